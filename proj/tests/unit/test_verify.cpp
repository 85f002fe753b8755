#include "doctest.h"
#include "toy.hpp"

#include "bsr/restoration/verify.hpp"

using namespace bsr;
using namespace bsr::restoration;
using bsr::testing::Rng;

namespace {

bsr::testing::ToySolve solved(std::uint64_t seed) {
    Rng rng(seed);
    const auto c = bsr::testing::toy_case(rng, {bsr::testing::ToyShape::Chain, 3, 0.5, true, 0});
    return bsr::testing::solve_toy(c, 9 * 60, 3);
}

network::GridCase toy_for(std::uint64_t seed) {
    Rng rng(seed);
    return bsr::testing::toy_case(rng, {bsr::testing::ToyShape::Chain, 3, 0.5, true, 0});
}

}  // namespace

TEST_SUITE("verify") {

TEST_CASE("solver output passes every check") {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        const auto c = toy_for(seed);
        const auto t = solved(seed);
        const auto rep = verify_solution(c, t.problem.inputs, t.problem.config, t.solution);
        CAPTURE(rep.table());
        CHECK(rep.passed());
        CHECK(rep.failures() == 0);
        CHECK(rep.errors.empty());
        for (const char* tag : {"eq21", "eq26", "eq27", "eq29", "eq38"}) CHECK(rep.find(tag) != nullptr);
    }
}

TEST_CASE("reopening a switch is caught by the monotonicity rows") {
    // Find a toy that closes a switch before the last step.
    for (std::uint64_t seed = 1; seed < 20; ++seed) {
        const auto c = toy_for(seed);
        const auto t = solved(seed);
        auto s = t.solution;
        std::size_t hit = s.switch_ids.size();
        for (std::size_t i = 0; i < s.switch_ids.size(); ++i) {
            if (s.y_switch[i][s.steps - 2] == 1) hit = i;
        }
        if (hit == s.switch_ids.size()) continue;
        s.y_switch[hit].back() = 0;
        const auto rep = verify_solution(c, t.problem.inputs, t.problem.config, s);
        CHECK_FALSE(rep.passed());
        const auto* eq38 = rep.find("eq38");
        REQUIRE(eq38 != nullptr);
        CHECK(eq38->failures >= 1);
        CHECK(eq38->worst_violation == doctest::Approx(1.0));
        return;
    }
    FAIL("no toy closed a switch early");
}

TEST_CASE("an injected rocof beyond its bound is reported with its size") {
    const auto c = toy_for(2);
    const auto t = solved(2);
    auto s = t.solution;
    REQUIRE_FALSE(s.gfm.empty());
    s.gfm[0].rocof[1] = t.problem.config.bounds.rocof + 0.2;
    const auto rep = verify_solution(c, t.problem.inputs, t.problem.config, s);
    CHECK_FALSE(rep.passed());
    const auto* eq26 = rep.find("eq26");
    REQUIRE(eq26 != nullptr);
    CHECK(eq26->failures == 1);
    CHECK(eq26->worst_violation == doctest::Approx(0.2).epsilon(1e-9));
    const auto* eq24 = rep.find("eq24");
    REQUIRE(eq24 != nullptr);
    CHECK(eq24->failures == 1);
}

TEST_CASE("report json is keyed by tag") {
    const auto c = toy_for(3);
    const auto t = solved(3);
    const auto rep = verify_solution(c, t.problem.inputs, t.problem.config, t.solution);
    const auto j = rep.to_json();
    CHECK(j.at("passed").get<bool>());
    for (const auto& ch : rep.checks) {
        CAPTURE(ch.tag);
        REQUIRE(j.at("tags").contains(ch.tag));
        CHECK(j["tags"][ch.tag].at("rows").get<std::size_t>() == ch.rows);
    }
    CHECK(rep.table().find("eq38") != std::string::npos);
}

TEST_CASE("a solution of the wrong shape is a structural error") {
    const auto c = toy_for(1);
    const auto t = solved(1);
    auto s = t.solution;
    s.y_switch.pop_back();
    const auto rep = verify_solution(c, t.problem.inputs, t.problem.config, s);
    CHECK_FALSE(rep.passed());
    CHECK_FALSE(rep.errors.empty());
}

}

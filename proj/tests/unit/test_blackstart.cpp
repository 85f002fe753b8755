#include <cmath>

#include "doctest.h"
#include "toy.hpp"

#include "bsr/restoration/blackstart.hpp"
#include "bsr/restoration/solution_io.hpp"
#include "bsr/restoration/verify.hpp"

using namespace bsr;
using namespace bsr::restoration;
using bsr::testing::Rng;
using bsr::testing::ToyShape;

namespace {

constexpr int kNine = 9 * 60;

network::GridCase toy(std::uint64_t seed, ToyShape shape, int blocks = 2, int tg_return = kNine + 30) {
    Rng rng(seed);
    return bsr::testing::toy_case(rng, {shape, blocks, 0.5, true, tg_return});
}

void check_structure(const network::GridCase& c, const PriorState& prior, const RestorationSolution& s) {
    for (std::size_t i = 0; i < s.switch_ids.size(); ++i) {
        const auto& sw = c.switches[i];
        int prev = prior.switch_y.count(sw.id) ? prior.switch_y.at(sw.id) : 0;
        for (std::size_t k = 0; k < s.steps; ++k) {
            const int y = s.y_switch[i][k];
            CHECK(y >= prev);
            const int ends = bsr::testing::bus_energized(c, s, prior, sw.from, static_cast<long>(k) - 1) +
                             bsr::testing::bus_energized(c, s, prior, sw.to, static_cast<long>(k) - 1);
            if (y == 1 && prev == 0) {
                if (sw.kind == network::SwitchKind::Esw) {
                    CHECK(ends == 1);
                } else {
                    CHECK(ends >= 1);
                }
            }
            if (sw.kind == network::SwitchKind::Ssw && s.z_switch[i][k] == 1) {
                const auto& fl = bsr::testing::switch_flow(s, sw.id);
                for (int p = 0; p < 3; ++p) CHECK(std::abs(fl.p[k][static_cast<std::size_t>(p)]) <= 1e-4 + 1e-6);
            }
            if (y == 1) {
                const double df = bsr::testing::bus_frequency(c, s, sw.from, k) -
                                  bsr::testing::bus_frequency(c, s, sw.to, k);
                CHECK(std::abs(df) <= 1e-4 + 1e-6);
            }
            prev = y;
        }
    }
    for (std::size_t b = 0; b < s.block_ids.size(); ++b) {
        for (std::size_t k = 1; k < s.steps; ++k) CHECK(s.y_block[b][k] >= s.y_block[b][k - 1]);
    }
}

}  // namespace

TEST_SUITE("blackstart") {

TEST_CASE("toy optimum equals the best enumerated switch schedule") {
    struct Run {
        std::uint64_t seed;
        ToyShape shape;
        int blocks;
    };
    for (const Run& r : {Run{1, ToyShape::Chain, 2}, Run{2, ToyShape::TwoIslands, 2}, Run{3, ToyShape::WithTg, 1}}) {
        const auto c = toy(r.seed, r.shape, r.blocks);
        const auto t = bsr::testing::solve_toy(c, kNine, 3);
        const auto bf = bsr::testing::brute_force_schedules(c, t.problem);
        CAPTURE(r.seed);
        REQUIRE(bf.feasible > 0);
        CHECK(t.solution.objective_total ==
              doctest::Approx(bf.best).epsilon(1e-6).scale(std::max(1.0, std::abs(bf.best))));
    }
}

TEST_CASE("a feeder without houses solves to zero served energy") {
    auto c = toy(9, ToyShape::Chain, 3);
    c.houses.clear();
    c.finalize();
    const auto t = bsr::testing::solve_toy(c, kNine, 3);
    CHECK(t.solution.objective == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(t.solution.served.empty());
}

TEST_CASE("switching structure holds on random toys") {
    for (std::uint64_t seed = 20; seed < 32; ++seed) {
        const ToyShape shape = static_cast<ToyShape>(seed % 3);
        const auto c = toy(seed, shape, 1 + static_cast<int>(seed % 3), kNine + 15 * static_cast<int>(seed % 4));
        const auto t = bsr::testing::solve_toy(c, kNine, 3);
        CAPTURE(seed);
        check_structure(c, t.problem.inputs.prior, t.solution);
    }
}

TEST_CASE("connection status follows the first-step bus energization") {
    const auto c = toy(5, ToyShape::Chain, 2);
    const auto t = bsr::testing::solve_toy(c, kNine, 3);
    for (const auto& h : c.houses) {
        const bool on = t.solution.y_bus[t.solution.bus_index(h.bus)][0] == 1;
        CHECK(connection_status(c, h.id, t.solution) == on);
    }
    CHECK_THROWS(connection_status(c, "no-such-house", t.solution));
}

TEST_CASE("advancing the prior applies exactly the first step") {
    const auto c = toy(6, ToyShape::TwoIslands);
    const auto t = bsr::testing::solve_toy(c, kNine, 3);
    const auto& s = t.solution;
    const PriorState next = advance_prior(c, t.problem.inputs.prior, s);
    CHECK(next.clock_min == kNine + 15);
    for (std::size_t i = 0; i < s.switch_ids.size(); ++i) CHECK(next.switch_y.at(s.switch_ids[i]) == s.y_switch[i][0]);
    for (std::size_t b = 0; b < s.block_ids.size(); ++b) CHECK(next.block_y.at(s.block_ids[b]) == s.y_block[b][0]);
    for (const auto& g : s.gfm) {
        CHECK(next.gfm_energy.at(g.unit) == g.e[0]);
        CHECK(next.gfm_p_total.at(g.unit) == doctest::Approx(g.p[0][0] + g.p[0][1] + g.p[0][2]));
    }
}

TEST_CASE("holding switches gives a plan that passes the full check") {
    const auto c = toy(7, ToyShape::Chain, 3);
    const auto t = bsr::testing::solve_toy(c, kNine, 3);
    const PriorState next = advance_prior(c, t.problem.inputs.prior, t.solution);
    const auto full = bsr::testing::toy_problem(c, next.clock_min, 3, &next);
    const auto held = hold_switches(c, full);
    const auto s = solve_restoration(c, held, bsr::testing::tight_limits());
    for (std::size_t i = 0; i < s.switch_ids.size(); ++i) {
        for (int y : s.y_switch[i]) CHECK(y == next.switch_y.at(s.switch_ids[i]));
    }
    const auto rep = verify_solution(c, full.inputs, full.config, s);
    CHECK(rep.passed());
    const auto best = solve_restoration(c, full, bsr::testing::tight_limits());
    CHECK(best.objective_total >= s.objective_total - 1e-6);
}

TEST_CASE("shifting a plan drops the first step and repeats the last") {
    const auto c = toy(8, ToyShape::Chain, 2);
    const auto s = bsr::testing::solve_toy(c, kNine, 4).solution;
    const auto sh = shift_solution(s);
    CHECK(sh.status == "shifted");
    CHECK(sh.start_min == s.timestamp(0));
    CHECK(sh.steps == s.steps);
    for (std::size_t i = 0; i < s.switch_ids.size(); ++i) {
        for (std::size_t k = 0; k + 1 < s.steps; ++k) CHECK(sh.y_switch[i][k] == s.y_switch[i][k + 1]);
        CHECK(sh.y_switch[i].back() == s.y_switch[i].back());
        CHECK(sh.z_switch[i].back() == 0);
    }
    for (const auto& g : sh.gfm) CHECK(g.dp.back() == 0.0);
    CHECK(sh.objective == doctest::Approx(sh.served_energy_kwh()));
}

TEST_CASE("solution directories round trip exactly") {
    const auto c = toy(10, ToyShape::WithTg, 1, kNine + 15);
    const auto t = bsr::testing::solve_toy(c, kNine, 3);
    const auto dir = std::filesystem::temp_directory_path() / "bsr_unit_solution_rt";
    std::filesystem::remove_all(dir);
    write_solution_dir(dir, c, t.problem.inputs, t.problem.config, t.solution);
    const SavedSolution back = read_solution_dir(dir);
    const auto& a = t.solution;
    const auto& b = back.solution;
    CHECK(back.case_name == c.name);
    CHECK(b.objective == a.objective);
    CHECK(b.objective_total == a.objective_total);
    CHECK(b.y_switch == a.y_switch);
    CHECK(b.y_block == a.y_block);
    CHECK(b.f_block == a.f_block);
    CHECK(b.dispatch == a.dispatch);
    CHECK(b.served == a.served);
    REQUIRE(b.gfm.size() == a.gfm.size());
    for (std::size_t g = 0; g < a.gfm.size(); ++g) {
        CHECK(b.gfm[g].e == a.gfm[g].e);
        CHECK(b.gfm[g].rocof == a.gfm[g].rocof);
    }
    CHECK(b.tg.y == a.tg.y);
    CHECK(to_json(back.config) == to_json(t.problem.config));
    CHECK(to_json(back.inputs.prior) == to_json(t.problem.inputs.prior));
    CHECK(verify_solution(c, back.inputs, back.config, b).passed());
    std::filesystem::remove_all(dir);
}

TEST_CASE("an energized load the units cannot hold is infeasible") {
    // Block already energized with fixed load and no PV, but almost no
    // frequency headroom: the battery cannot carry the load.
    network::GridCase c;
    for (std::uint64_t seed = 40;; ++seed) {
        Rng rng(seed);
        c = bsr::testing::toy_case(rng, {ToyShape::Chain, 1, 0.0, false, 0});
        if (!c.houses.empty()) break;
    }
    PriorState prior = PriorState::blackout(c, kNine);
    prior.switch_y["S1"] = 1;
    prior.block_y[c.blocks[0].id] = 1;
    auto cfg = bsr::testing::toy_config(2);
    cfg.bounds.qss = 1e-9;
    const auto inputs = make_inputs(c, prior, {}, cfg);
    const auto pb = build_restoration_milp(c, inputs, cfg);
    CHECK_THROWS_AS(solve_restoration(c, pb, bsr::testing::tight_limits()), RestorationInfeasible);
}

TEST_CASE("configuration validation") {
    RestorationConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    cfg.steps = 0;
    CHECK_THROWS(cfg.validate());
    cfg.steps = 3;
    cfg.power_factor = 1.5;
    CHECK_THROWS(cfg.validate());
}

}

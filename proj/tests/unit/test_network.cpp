#include <algorithm>
#include <set>

#include "doctest.h"
#include "toy.hpp"

#include "bsr/network/case.hpp"
#include "bsr/network/case_json.hpp"
#include "bsr/network/ieee123.hpp"

using namespace bsr::network;

namespace {

std::set<std::string> gei_ids(const GridCase& c) {
    std::set<std::string> s;
    for (const auto& h : c.houses) {
        if (h.has_gei) s.insert(h.id);
    }
    return s;
}

}  // namespace

TEST_SUITE("network") {

TEST_CASE("clock strings") {
    CHECK(parse_clock("09:00") == 540);
    CHECK(parse_clock("11:45") == 705);
    CHECK(parse_clock("25:10") == 1510);
    CHECK(format_clock(705) == "11:45");
    CHECK(format_clock(parse_clock("00:05")) == "00:05");
    CHECK_THROWS(parse_clock("9h"));
    CHECK_THROWS(parse_clock("10:75"));
}

TEST_CASE("natural ordering of ids") {
    std::vector<std::string> ids = {"150", "51r", "10", "2", "51", "B10", "B2"};
    std::sort(ids.begin(), ids.end(), [](const auto& a, const auto& b) { return natural_less(a, b); });
    CHECK(ids == std::vector<std::string>{"2", "10", "51", "51r", "150", "B2", "B10"});
    CHECK_FALSE(natural_less("7", "7"));
}

TEST_CASE("phase sets") {
    const PhaseSet ac = PhaseSet::from_string("ac");
    CHECK(ac.count() == 2);
    CHECK(ac.has(0));
    CHECK_FALSE(ac.has(1));
    CHECK(ac.to_string() == "ac");
    CHECK(ac.subset_of(PhaseSet::all()));
    CHECK((ac & PhaseSet::from_string("b")).empty());
}

TEST_CASE("generated feeder has the expected inventory") {
    const GridCase c = generate_ieee123();
    CHECK(c.houses.size() == 88);
    CHECK(c.switches.size() == 14);
    CHECK(c.blocks.size() == 11);
    CHECK(c.gfm_units().size() == 2);
    CHECK(c.pv_units().size() == 8);
    REQUIRE(c.tg.has_value());
    CHECK(c.tg->bus == "150");
    CHECK(c.tg->status_at(0) == 0);
    CHECK(c.tg->status_at(704) == 0);
    CHECK(c.tg->status_at(705) == 1);
    for (std::size_t g : c.gfm_units()) CHECK(c.is_source_bus(c.ders[g].bus));
    // every load bus sits in exactly one block
    std::set<std::string> seen;
    for (const auto& b : c.blocks) {
        for (const auto& bus : b.buses) CHECK(seen.insert(bus).second);
    }
    for (const auto& h : c.houses) CHECK(seen.count(h.bus) == 1);
}

TEST_CASE("gei fractions are deterministic and nested") {
    const auto full = gei_ids(generate_ieee123({7, 1.0}));
    const auto none = gei_ids(generate_ieee123({7, 0.0}));
    const auto a = gei_ids(generate_ieee123({7, 0.15}));
    const auto b = gei_ids(generate_ieee123({7, 0.15}));
    const auto mid = gei_ids(generate_ieee123({7, 0.4}));
    CHECK(full.size() == 88);
    CHECK(none.empty());
    CHECK(a == b);
    CHECK(a.size() == 13);
    CHECK(std::includes(mid.begin(), mid.end(), a.begin(), a.end()));
    GridCase c = generate_ieee123({7, 1.0});
    set_gei_fraction(c, 0.4, 7);
    CHECK(gei_ids(c) == mid);
    CHECK_THROWS_AS(set_gei_fraction(c, 1.5, 7), CaseError);
}

TEST_CASE("case json round trip is lossless") {
    const GridCase c = generate_ieee123({3, 0.4});
    const auto j = to_json(c);
    const GridCase back = load_case(j);
    CHECK(to_json(back) == j);
    CHECK(back.blocks.size() == c.blocks.size());
    for (std::size_t i = 0; i < c.blocks.size(); ++i) CHECK(back.blocks[i].buses == c.blocks[i].buses);

    bsr::testing::Rng rng(4);
    const GridCase toy = bsr::testing::toy_case(rng, {bsr::testing::ToyShape::WithTg, 1, 0.5, true, 30});
    CHECK(to_json(load_case(to_json(toy))) == to_json(toy));
}

TEST_CASE("case validation reports every problem at once") {
    auto j = to_json(generate_ieee123());
    j["lines"][0]["from"] = "nowhere";
    j["switches"][0]["to"] = "elsewhere";
    j["ders"][0]["s_rat"] = -1.0;
    try {
        load_case(j);
        FAIL("expected CaseError");
    } catch (const CaseError& e) {
        CHECK(e.problems().size() >= 3);
        const std::string all = e.what();
        CHECK(all.find("nowhere") != std::string::npos);
        CHECK(all.find("elsewhere") != std::string::npos);
    }
}

TEST_CASE("phase submatrix of a line") {
    const GridCase c = generate_ieee123();
    const auto it = std::find_if(c.lines.begin(), c.lines.end(), [](const Line& l) { return l.phases.count() == 1; });
    REQUIRE(it != c.lines.end());
    const PhaseMatrix pm = phase_matrix(*it, it->phases);
    CHECK(pm.phases.size() == 1);
    CHECK(pm.r_at(0, 0) > 0.0);
    CHECK_THROWS_AS(phase_matrix(*it, PhaseSet::all()), CaseError);
}

TEST_CASE("forecasts have the requested length and follow the profiles") {
    const GridCase c = generate_ieee123();
    const auto& h = c.houses.front();
    const auto f = house_forecast(c, h, 540, 12, 15.0);
    CHECK(f.steps() == 12);
    CHECK(f.t_out.size() == 12);
    const auto load = load_forecast(c, h, 540, 12, 15.0);
    REQUIRE(load.size() == 12);
    for (double v : load) CHECK(v >= 0.0);
    const auto& pv = c.ders[c.pv_units().front()];
    for (double v : pv_forecast(c, pv, 540, 12, 15.0)) CHECK(v <= pv.p_rated + 1e-12);
}

}

#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "toy.hpp"

#include "bsr/mpc/coordinator.hpp"
#include "bsr/mpc/messages.hpp"

using namespace bsr;
using namespace bsr::mpc;
using bsr::testing::Rng;
using bsr::testing::ToyShape;
namespace fs = std::filesystem;

namespace {

ScenarioConfig short_run(int minutes, std::size_t horizon = 3) {
    ScenarioConfig cfg;
    cfg.start_min = 9 * 60;
    cfg.end_min = cfg.start_min + minutes;
    cfg.steps = horizon;
    cfg.utility_limits = bsr::testing::tight_limits();
    return cfg;
}

// One block with exactly one GEI house.
network::GridCase one_house_toy() {
    for (std::uint64_t seed = 1;; ++seed) {
        Rng rng(seed);
        auto c = bsr::testing::toy_case(rng, {ToyShape::Chain, 1, 1.0, true, 0});
        if (c.houses.empty()) continue;
        c.houses.resize(1);
        c.houses[0].has_gei = true;
        c.finalize();
        return c;
    }
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// grid.csv ends with the wall-clock solve time, which is not reproducible.
std::string without_timing(const std::string& text) {
    std::stringstream in(text);
    std::string line, out;
    while (std::getline(in, line)) out += line.substr(0, line.rfind(',')) + "\n";
    return out;
}

fs::path fresh_dir(const std::string& name) {
    const auto d = fs::temp_directory_path() / name;
    fs::remove_all(d);
    return d;
}

FlexibilityMessage flex_msg() {
    FlexibilityMessage m;
    m.house_id = "H1";
    m.envelope.lower = {-1.0, 0.0};
    m.envelope.upper = {2.0, 3.0};
    m.envelope.horizon_start_min = 540;
    m.issued_at_min = 540;
    return m;
}

}  // namespace

TEST_SUITE("mpc") {

TEST_CASE("one house over two steps exchanges one envelope and one dispatch per energized step") {
    const auto c = one_house_toy();
    const auto dir = fresh_dir("bsr_unit_mpc_one");
    const RunResult r = run_scenario(c, short_run(30), dir);
    REQUIRE(r.steps.size() == 2);
    std::size_t flex = 0, disp = 0, connected = 0;
    for (int i = 1; i <= 2; ++i) {
        const auto msgs = read_jsonl(dir / "messages" / fmt::format("step_{:02}.jsonl", i));
        for (const auto& m : msgs) {
            CHECK(validate_message(m).empty());
            (m.at("type") == "flexibility" ? flex : disp) += 1;
        }
    }
    for (const auto& s : r.steps) connected += s.houses.at(0).connected ? 1 : 0;
    CHECK(flex == 2);
    CHECK(disp == connected);
    CHECK(connected == 2);
    for (const char* f : {"grid.csv", "switches.csv", "blocks.csv", "gfm.csv", "tg.csv", "voltages.csv",
                          "served_load.csv", "houses.csv", "houses_initial.csv", "meta.json"}) {
        CHECK(fs::exists(dir / "timeseries" / f));
    }
    fs::remove_all(dir);
}

TEST_CASE("runs are reproducible for a fixed seed") {
    Rng rng(12);
    const auto c = bsr::testing::toy_case(rng, {ToyShape::TwoIslands, 2, 0.6, true, 0});
    auto cfg = short_run(45);
    cfg.forecast_noise = 0.05;
    const auto a = fresh_dir("bsr_unit_mpc_rep_a"), b = fresh_dir("bsr_unit_mpc_rep_b");
    run_scenario(c, cfg, a);
    run_scenario(c, cfg, b);
    for (const auto& e : fs::directory_iterator(a / "timeseries")) {
        CAPTURE(e.path().filename().string());
        const bool timed = e.path().filename() == "grid.csv";
        const auto x = slurp(e.path()), y = slurp(b / "timeseries" / e.path().filename());
        CHECK((timed ? without_timing(x) == without_timing(y) : x == y));
    }
    for (const auto& e : fs::directory_iterator(a / "messages")) {
        CHECK(slurp(e.path()) == slurp(b / "messages" / e.path().filename()));
    }
    fs::remove_all(a);
    fs::remove_all(b);
}

TEST_CASE("messages carry only the agreed fields") {
    const auto f = flex_msg();
    const auto j = to_json(f);
    CHECK(validate_message(j).empty());
    const auto back = flexibility_from_json(j);
    CHECK(back.envelope.lower == f.envelope.lower);
    CHECK(back.envelope.upper == f.envelope.upper);

    auto leak = j;
    leak["e_es"] = 3.2;
    CHECK_FALSE(validate_message(leak).empty());
    CHECK_THROWS_AS(flexibility_from_json(leak), MessageError);

    auto bad = j;
    bad.erase("upper");
    bad["lower"] = nlohmann::json::array({1.0, "x"});
    try {
        flexibility_from_json(bad);
        FAIL("expected MessageError");
    } catch (const MessageError& e) {
        CHECK(e.problems().size() >= 2);
    }

    DispatchMessage d;
    d.house_id = "H1";
    d.dispatch.p_ref = {0.5, 3.5};
    d.dispatch.horizon_start_min = 540;
    d.issued_at_min = 540;
    const auto dj = to_json(d);
    CHECK(validate_message(dj).empty());
    CHECK_THROWS_AS(flexibility_from_json(dj), MessageError);
    CHECK(dispatch_from_json(dj).dispatch.p_ref == d.dispatch.p_ref);
    CHECK(check_dispatch_within(d, f).size() == 1);  // 3.5 > 3.0 at step 2
    d.dispatch.p_ref[1] = 3.0;
    CHECK(check_dispatch_within(d, f).empty());
}

TEST_CASE("a feeder without houses runs and serves nothing") {
    Rng rng(3);
    auto c = bsr::testing::toy_case(rng, {ToyShape::Chain, 2, 0.5, true, 0});
    c.houses.clear();
    c.finalize();
    const auto r = run_scenario(c, short_run(30));
    REQUIRE(r.steps.size() == 2);
    for (const auto& s : r.steps) {
        CHECK(s.flexibility.empty());
        CHECK(s.dispatch.empty());
        CHECK(s.served_kw == 0.0);
    }
}

TEST_CASE("TG status follows the scenario schedule") {
    Rng rng(4);
    const auto c = bsr::testing::toy_case(rng, {ToyShape::WithTg, 1, 0.5, true, 24 * 60});
    auto cfg = short_run(45);
    cfg.tg_schedule = std::vector<network::TgEvent>{{0, 0}, {9 * 60 + 15, 1}};
    const auto r = run_scenario(c, cfg);
    REQUIRE(r.steps.size() == 3);
    CHECK(r.steps[0].inputs.prior.tg_status == 0);
    CHECK(r.steps[1].inputs.prior.tg_status == 1);
    CHECK(r.steps[2].inputs.prior.tg_status == 1);

    Rng rng2(4);
    const auto no_tg = bsr::testing::toy_case(rng2, {ToyShape::Chain, 1, 0.5, true, 0});
    CHECK_THROWS_AS(scenario_case(no_tg, cfg), ScenarioError);
}

TEST_CASE("applied steps chain into the next solve") {
    Rng rng(21);
    const auto c = bsr::testing::toy_case(rng, {ToyShape::Chain, 3, 0.7, true, 0});
    const auto r = run_scenario(c, short_run(60));
    REQUIRE(r.steps.size() == 4);
    for (std::size_t i = 0; i < r.steps.size(); ++i) {
        const auto& s = r.steps[i];
        CHECK(s.clock_min == 540 + 15 * static_cast<int>(i));
        for (const auto& g : s.solution.gfm) CHECK(s.grid_after.gfm_energy.at(g.unit) == g.e[0]);
        for (const auto& h : s.houses) {
            CHECK(h.mode == (h.connected ? "tracking" : "standalone"));
            if (!h.connected) CHECK(h.p_ref == 0.0);
            const auto& spec = c.house(h.id);
            CHECK(h.connected == (s.solution.y_bus[s.solution.bus_index(spec.bus)][0] == 1));
        }
        if (i == 0) continue;
        const auto& prev = r.steps[i - 1];
        CHECK(s.inputs.prior.switch_y == prev.grid_after.switch_y);
        CHECK(s.inputs.prior.gfm_energy == prev.grid_after.gfm_energy);
        for (const auto& [b, y] : prev.grid_after.block_y) CHECK(s.grid_after.block_y.at(b) >= y);
        for (std::size_t j = 0; j < s.houses.size(); ++j) {
            const auto& was = prev.houses[j].after;
            const auto& now = s.houses[j].before;
            CHECK(now.e_es == was.e_es);
            CHECK(now.t_room == was.t_room);
            CHECK(now.t_wall == was.t_wall);
            CHECK(now.clock_min == s.clock_min);
        }
    }
}

TEST_CASE("a house switches from standalone to tracking when its block is energized") {
    // Second block of a chain cannot be energized before step 2.
    for (std::uint64_t seed = 30; seed < 60; ++seed) {
        Rng rng(seed);
        auto c = bsr::testing::toy_case(rng, {ToyShape::Chain, 2, 1.0, true, 0});
        const auto& far = c.blocks[1].buses;
        bool has = false;
        for (auto& h : c.houses) {
            if (std::find(far.begin(), far.end(), h.bus) != far.end()) has = h.has_gei = true;
        }
        if (!has) continue;
        const auto r = run_scenario(c, short_run(30));
        for (const auto& h : r.steps[0].houses) {
            if (std::find(far.begin(), far.end(), c.house(h.id).bus) != far.end()) CHECK(h.mode == "standalone");
        }
        bool tracked = false;
        for (const auto& h : r.steps[1].houses) tracked = tracked || h.mode == "tracking";
        if (!tracked) continue;
        CHECK(tracked);
        return;
    }
    FAIL("no toy energized a second block");
}

TEST_CASE("scenario configuration validation") {
    ScenarioConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    CHECK(cfg.mpc_steps() == 12);
    cfg.end_min = cfg.start_min;
    CHECK_THROWS(cfg.validate());
    cfg = {};
    cfg.workers = 0;
    CHECK_THROWS(cfg.validate());
}

}

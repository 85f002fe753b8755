#include <cmath>

#include "doctest.h"
#include "oracles.hpp"
#include "toy.hpp"

#include "bsr/gei/house.hpp"

using namespace bsr;
using namespace bsr::gei;
using bsr::testing::Rng;

namespace {

HouseForecast zero_forecast(std::size_t n) {
    HouseForecast f;
    f.t_out.assign(n, 0.0);
    for (auto& w : f.q_rad_wall) w.assign(n, 0.0);
    f.q_rad_win.assign(n, 0.0);
    f.q_int.assign(n, 0.0);
    f.p_pv_hat.assign(n, 0.0);
    f.p_load_hat.assign(n, 0.0);
    return f;
}

HouseParams bes_only(double e_lo, double e_hi, double pc, double pd, double eta_c, double eta_d) {
    HouseParams hp;
    hp.id = "b";
    BesParams b;
    b.e_lo = e_lo;
    b.e_hi = e_hi;
    b.p_c_max = pc;
    b.p_d_max = pd;
    b.eta_c = eta_c;
    b.eta_d = eta_d;
    hp.bes = b;
    return hp;
}

}  // namespace

TEST_SUITE("gei") {

TEST_CASE("full battery cannot charge in the first step") {
    const HouseParams hp = bes_only(1.0, 10.0, 5.0, 5.0, 0.95, 0.95);
    HouseState s = initial_state(hp, 22.0, 22.0, 10.0, 540);
    const auto pb = make_house_problem(hp, zero_forecast(4), s, HouseObjective::MaxConsumption);
    const auto r = milp::solve(pb.model, pb.objective, pb.direction);
    REQUIRE(r.has_values());
    CHECK(r.value(pb.vars.p_es_c[0]) == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("one charging step advances stored energy by dt * eta_c * P") {
    // 0.25 h * 0.9 * 2 kW = 0.45 kWh
    const HouseParams hp = bes_only(0.0, 10.0, 5.0, 5.0, 0.9, 1.0);
    const HouseState s = initial_state(hp, 22.0, 22.0, 3.0, 540);
    auto pb = make_house_problem(hp, zero_forecast(1), s, HouseObjective::MinConsumption);
    pb.model.fix(pb.vars.p_es_c[0], 2.0);
    const auto r = milp::solve(pb.model, pb.objective, pb.direction);
    REQUIRE(r.has_values());
    CHECK(r.value(pb.vars.e_es[0]) - 3.0 == doctest::Approx(0.45).epsilon(1e-12));
    const HouseState next = step_house_state(hp, zero_forecast(1), s, {0.0, 2.0, 0.0}, 900.0);
    CHECK(next.e_es - 3.0 == doctest::Approx(0.45).epsilon(1e-12));
}

TEST_CASE("one discharging step at unit efficiency removes 0.25 kWh per kW") {
    const HouseParams hp = bes_only(0.0, 10.0, 5.0, 5.0, 0.9, 1.0);
    const HouseState s = initial_state(hp, 22.0, 22.0, 3.0, 540);
    const HouseState next = step_house_state(hp, zero_forecast(1), s, {0.0, 0.0, 1.0}, 900.0);
    CHECK(next.e_es == doctest::Approx(2.75).epsilon(1e-12));
    CHECK(next.clock_min == 555);
    CHECK(next.p_es_d_prev == 1.0);
}

TEST_CASE("disconnected battery-only house exports at full discharge power") {
    const HouseParams hp = bes_only(0.0, 100.0, 4.0, 3.0, 0.95, 0.95);
    const HouseState s = initial_state(hp, 22.0, 22.0, 90.0, 540);
    const HouseDecision d = optimize_house(hp, zero_forecast(6), s, nullptr);
    for (std::size_t k = 0; k < 6; ++k) CHECK(d.p_gei[k] == doctest::Approx(-3.0));
}

TEST_CASE("hvac coefficient at the band midpoint") {
    HouseThermalParams th;
    th.cop = 4.0;
    HvacParams hv;
    hv.t_set_lo = 20.0;
    hv.t_set_hi = 24.0;
    // |22 - 26| / (4 * 299)
    CHECK(hvac_coefficient(th, hv, 26.0) == doctest::Approx(4.0 / 1196.0));
    CHECK(hvac_coefficient(th, hv, 22.0) == 0.0);
}

TEST_CASE("plant step matches an independent solve of the wall and room balances") {
    Rng rng(11);
    for (int t = 0; t < 50; ++t) {
        const HouseParams hp = bsr::testing::random_house_params(rng, "h", {true});
        const HouseForecast f = bsr::testing::random_forecast(rng, 1);
        const HouseState s = bsr::testing::random_state(rng, hp, f.t_out[0]);
        const double q = hp.hvac->mode == HvacMode::Cooling ? -bsr::testing::uniform(rng, 0, hp.hvac->q_max)
                                                             : bsr::testing::uniform(rng, 0, hp.hvac->q_max);
        const HouseState next = step_house_state(hp, f, s, {q, 0.0, 0.0}, 900.0);
        const auto o = bsr::testing::thermal_step(*hp.thermal, s.t_wall, s.t_room, f.t_out[0],
                                                  {f.q_rad_wall[0][0], f.q_rad_wall[1][0], f.q_rad_wall[2][0],
                                                   f.q_rad_wall[3][0]},
                                                  f.q_rad_win[0], f.q_int[0], q, 0.25);
        CHECK(next.t_room == doctest::Approx(o.t_room).epsilon(1e-10));
        for (int i = 0; i < 4; ++i) CHECK(next.t_wall[i] == doctest::Approx(o.t_wall[i]).epsilon(1e-10));
    }
}

TEST_CASE("decision invariants hold on random houses") {
    Rng rng(2024);
    for (int t = 0; t < 60; ++t) {
        const HouseParams hp = bsr::testing::random_house_params(rng, fmt::format("h{}", t));
        const std::size_t n = static_cast<std::size_t>(bsr::testing::uniform_int(rng, 1, 6));
        const HouseForecast f = bsr::testing::random_forecast(rng, n);
        const HouseState s = bsr::testing::random_state(rng, hp, f.t_out[0]);
        const HouseDecision d = optimize_house(hp, f, s, nullptr);
        double e = s.e_es;
        for (std::size_t k = 0; k < n; ++k) {
            // net power identity
            const double net = d.p_es_c[k] - d.p_es_d[k] - d.p_pv[k] + d.p_load[k] + d.p_hvac[k];
            CHECK(d.p_gei[k] == doctest::Approx(net).epsilon(1e-9));
            CHECK(d.beta_c[k] * d.beta_d[k] == 0.0);
            if (hp.bes) {
                e = bsr::testing::bes_energy_after(e, d.p_es_c[k], d.p_es_d[k], hp.bes->eta_c, hp.bes->eta_d, 0.25);
                CHECK(d.e_es[k] == doctest::Approx(e).epsilon(1e-9));
                CHECK(d.e_es[k] >= hp.bes->e_lo - 1e-7);
                CHECK(d.e_es[k] <= hp.bes->e_hi + 1e-7);
            }
            if (hp.hvac) {
                CHECK(d.t_hvac[k] >= hp.hvac->t_set_lo - 1e-9);
                CHECK(d.t_hvac[k] <= hp.hvac->t_set_hi + 1e-9);
            }
        }
    }
}

TEST_CASE("envelope is ordered and its sums equal the two horizon optima") {
    Rng rng(5);
    for (int t = 0; t < 25; ++t) {
        const HouseParams hp = bsr::testing::random_house_params(rng, "h");
        const HouseForecast f = bsr::testing::random_forecast(rng, 4);
        const HouseState s = bsr::testing::random_state(rng, hp, f.t_out[0]);
        const auto env = estimate_flexibility_envelope(hp, f, s);
        REQUIRE(env.well_formed());
        CHECK(env.horizon_start_min == s.clock_min);
        const auto hi = make_house_problem(hp, f, s, HouseObjective::MaxConsumption);
        const auto lo = make_house_problem(hp, f, s, HouseObjective::MinConsumption);
        const double best_hi = milp::solve(hi.model, hi.objective, hi.direction).objective;
        const double best_lo = milp::solve(lo.model, lo.objective, lo.direction).objective;
        double sum_u = 0, sum_l = 0;
        for (std::size_t k = 0; k < env.steps(); ++k) {
            sum_u += env.upper[k];
            sum_l += env.lower[k];
        }
        CHECK(sum_u <= best_hi + 1e-5 * std::max(1.0, std::abs(best_hi)));
        CHECK(sum_l >= best_lo - 1e-5 * std::max(1.0, std::abs(best_lo)));
    }
}

TEST_CASE("reachable dispatch is tracked with zero residual") {
    Rng rng(8);
    for (int t = 0; t < 20; ++t) {
        const HouseParams hp = bsr::testing::random_house_params(rng, "h");
        const HouseForecast f = bsr::testing::random_forecast(rng, 3);
        HouseState s = bsr::testing::random_state(rng, hp, f.t_out[0]);
        // any feasible trajectory is reachable by construction
        const HouseDecision free_run = optimize_house(hp, f, s, nullptr);
        DispatchSignal sig;
        sig.p_ref = free_run.p_gei;
        s.connected = true;
        const HouseDecision d = optimize_house(hp, f, s, &sig);
        CHECK(tracking_residual(d, sig) <= 1e-6);
    }
}

TEST_CASE("one-step optimum matches exhaustive enumeration of device settings") {
    Rng rng(77);
    for (int t = 0; t < 30; ++t) {
        const HouseParams hp = bsr::testing::random_house_params(rng, "h");
        const HouseForecast f = bsr::testing::random_forecast(rng, 1);
        const HouseState s = bsr::testing::random_state(rng, hp, f.t_out[0]);
        const auto en = bsr::testing::enumerate_one_step(hp, f, s, 0.25);
        REQUIRE(en.evaluated > 0);
        const auto env = estimate_flexibility_envelope(hp, f, s);
        CHECK(env.lower[0] == doctest::Approx(en.min).epsilon(1e-6));
        CHECK(env.upper[0] == doctest::Approx(en.max).epsilon(1e-6));
    }
}

TEST_CASE("mode contract: connected needs a dispatch, disconnected refuses one") {
    const HouseParams hp = bes_only(0.0, 10.0, 2.0, 2.0, 0.95, 0.95);
    HouseState s = initial_state(hp, 22.0, 22.0, 5.0, 540);
    DispatchSignal sig;
    sig.p_ref.assign(2, 0.0);
    CHECK_THROWS_AS(optimize_house(hp, zero_forecast(2), s, &sig), HouseError);
    s.connected = true;
    CHECK_THROWS_AS(optimize_house(hp, zero_forecast(2), s, nullptr), HouseError);
    CHECK_NOTHROW(optimize_house(hp, zero_forecast(2), s, &sig));
}

TEST_CASE("invalid inputs are rejected") {
    HouseParams hp = bes_only(5.0, 1.0, 2.0, 2.0, 0.95, 0.95);
    CHECK_THROWS_AS(hp.validate(), HouseError);
    hp = bes_only(0.0, 10.0, 2.0, 2.0, 0.95, 0.95);
    HouseState s = initial_state(hp, 22.0, 22.0, 50.0, 540);
    CHECK_THROWS_AS(estimate_flexibility_envelope(hp, zero_forecast(2), s), HouseError);
    s.e_es = 5.0;
    HouseForecast f = zero_forecast(2);
    f.p_load_hat.pop_back();
    CHECK_THROWS_AS(estimate_flexibility_envelope(hp, f, s), HouseError);
}

TEST_CASE("build emits every house family per step") {
    Rng rng(3);
    const HouseParams hp = bsr::testing::random_house_params(rng, "h", {true});
    for (std::size_t n : {1u, 3u}) {
        milp::Model m;
        const HouseForecast f = bsr::testing::random_forecast(rng, n);
        build_house_milp(m, hp, f, bsr::testing::random_state(rng, hp, f.t_out[0]));
        const auto counts = m.tag_counts();
        const std::map<std::string, std::size_t> per_step = {
            {"eq1", 4}, {"eq2", 1}, {"eq3", 1}, {"eq4", 2},  {"eq5", 1},  {"eq6", 2},  {"eq7", 1},
            {"eq8", 1}, {"eq9", 2}, {"eq10", 2}, {"eq11", 1}, {"eq12", 1}, {"eq13", 1}, {"eq14", 1}};
        for (const auto& [tag, rows] : per_step) {
            CAPTURE(tag);
            REQUIRE(counts.count(tag) == 1);
            CHECK(counts.at(tag) == rows * n);
        }
    }
}

}

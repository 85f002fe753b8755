#pragma once

// Hand-rolled generators and oracles shared by the unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <random>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "bsr/gei/house.hpp"
#include "bsr/milp/solver.hpp"
#include "bsr/network/case.hpp"
#include "bsr/restoration/blackstart.hpp"

namespace bsr::testing {

using Rng = std::mt19937_64;

inline double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }
inline int uniform_int(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }
inline bool coin(Rng& rng, double p = 0.5) { return uniform(rng, 0.0, 1.0) < p; }

struct HouseDraw {
    bool all_devices = false;  // force thermal + BES + PV + load
};

inline gei::HouseParams random_house_params(Rng& rng, const std::string& id, HouseDraw d = {}) {
    gei::HouseParams hp;
    hp.id = id;
    if (d.all_devices || coin(rng, 0.8)) {
        gei::HouseThermalParams th;
        for (std::size_t w = 0; w < 4; ++w) {
            th.c_wall[w] = uniform(rng, 1.5, 5.0);
            th.r_wall[w] = uniform(rng, 3.0, 10.0);
            th.w_wall[w] = uniform(rng, 0.3, 0.9);
        }
        th.r_win = uniform(rng, 6.0, 14.0);
        th.c_room = uniform(rng, 0.6, 1.5);
        th.w_win = uniform(rng, 0.2, 0.7);
        th.cop = uniform(rng, 2.5, 4.5);
        hp.thermal = th;
        gei::HvacParams hv;
        hv.p_max = uniform(rng, 2.0, 6.0);
        hv.q_max = hv.p_max * th.cop;
        hv.t_set_lo = uniform(rng, 19.0, 21.0);
        hv.t_set_hi = hv.t_set_lo + uniform(rng, 2.0, 5.0);
        hv.mode = coin(rng, 0.7) ? gei::HvacMode::Cooling : gei::HvacMode::Heating;
        hp.hvac = hv;
    }
    if (d.all_devices || coin(rng, 0.8)) {
        gei::BesParams b;
        const double cap = uniform(rng, 5.0, 25.0);
        b.e_lo = uniform(rng, 0.05, 0.2) * cap;
        b.e_hi = cap;
        b.p_c_max = uniform(rng, 2.0, 7.0);
        b.p_d_max = uniform(rng, 2.0, 7.0);
        b.eta_c = uniform(rng, 0.85, 1.0);
        b.eta_d = uniform(rng, 0.85, 1.0);
        if (coin(rng, 0.3)) {
            b.ramp_c_hi = uniform(rng, 1.0, 4.0);
            b.ramp_c_lo = -uniform(rng, 1.0, 4.0);
            b.ramp_d_hi = uniform(rng, 1.0, 4.0);
            b.ramp_d_lo = -uniform(rng, 1.0, 4.0);
        }
        hp.bes = b;
    }
    hp.has_pv = d.all_devices || coin(rng, 0.7);
    hp.has_load = d.all_devices || coin(rng, 0.9);
    hp.pv_floor = uniform(rng, 0.0, 0.8);
    hp.load_floor = uniform(rng, 0.3, 1.0);
    return hp;
}

inline gei::HouseForecast random_forecast(Rng& rng, std::size_t n) {
    gei::HouseForecast f;
    for (std::size_t k = 0; k < n; ++k) {
        f.t_out.push_back(uniform(rng, 5.0, 35.0));
        for (auto& w : f.q_rad_wall) w.push_back(uniform(rng, 0.0, 0.6));
        f.q_rad_win.push_back(uniform(rng, 0.0, 1.0));
        f.q_int.push_back(uniform(rng, 0.1, 0.5));
        f.p_pv_hat.push_back(uniform(rng, 0.0, 6.0));
        f.p_load_hat.push_back(uniform(rng, 0.5, 8.0));
    }
    return f;
}

inline gei::HouseState random_state(Rng& rng, const gei::HouseParams& hp, double t_out) {
    double e = 0.0;
    if (hp.bes) e = uniform(rng, hp.bes->e_lo, hp.bes->e_hi);
    gei::HouseState s = gei::initial_state(hp, uniform(rng, 20.0, 26.0), t_out, e, 9 * 60);
    if (hp.bes && coin(rng, 0.3)) {
        if (coin(rng)) {
            s.p_es_c_prev = uniform(rng, 0.0, hp.bes->p_c_max);
        } else {
            s.p_es_d_prev = uniform(rng, 0.0, hp.bes->p_d_max);
        }
    }
    return s;
}

inline network::Profiles flat_profiles(double solar, double load) {
    network::Profiles p;
    p.step_min = 15.0;
    for (int i = 0; i < 96; ++i) {
        const double h = i / 4.0;
        p.solar.push_back(solar * std::max(0.0, std::sin(3.14159265358979 * (h - 6.0) / 13.0)));
        p.load.push_back(load);
        p.t_out.push_back(24.0 + 6.0 * std::sin(3.14159265358979 * (h - 9.0) / 12.0));
        p.q_int.push_back(0.3);
    }
    return p;
}

enum class ToyShape {
    Chain,       // one battery feeding up to three blocks in series
    TwoIslands,  // two batteries, one block each, joined by a synchronizing switch
    WithTg,      // one battery, one block, synchronizing switch to the substation
};

struct ToyOptions {
    ToyShape shape = ToyShape::Chain;
    int blocks = 2;  // Chain only, 1..3
    double gei_share = 0.5;
    bool pv = true;
    int tg_return_min = 0;  // WithTg: TG available from this clock on
};

// Small radial case: each block holds 1-2 three-phase buses on a short line,
// each bus 0-2 houses. Switch count stays <= 3.
inline network::GridCase toy_case(Rng& rng, const ToyOptions& o) {
    using namespace network;
    GridCase c;
    c.name = "toy";
    c.base = {4.16, 100.0};
    c.profiles = flat_profiles(1.0, uniform(rng, 0.5, 0.9));
    int bus_no = 0;
    int house_no = 0;
    auto add_bus = [&](const std::string& id) { c.buses.push_back({id, PhaseSet::all()}); };
    auto add_line = [&](const std::string& a, const std::string& b) {
        Line l;
        l.id = fmt::format("L{}-{}", a, b);
        l.from = a;
        l.to = b;
        l.phases = PhaseSet::all();
        const double r = uniform(rng, 0.05, 0.3), x = uniform(rng, 0.05, 0.3);
        for (std::size_t p = 0; p < 3; ++p) {
            for (std::size_t q = 0; q < 3; ++q) {
                l.r_ohm[p][q] = p == q ? r : 0.3 * r;
                l.x_ohm[p][q] = p == q ? x : 0.3 * x;
            }
        }
        c.lines.push_back(l);
    };
    auto add_houses = [&](const std::string& bus) {
        const int n = uniform_int(rng, 0, 2);
        for (int i = 0; i < n; ++i) {
            HouseSpec h;
            h.id = fmt::format("H{}", ++house_no);
            h.bus = bus;
            h.phase = uniform_int(rng, 0, 2);
            h.peak_kw = uniform(rng, 1.0, 4.0);
            h.pv_kw = uniform(rng, 0.0, 3.0);
            h.has_gei = coin(rng, o.gei_share);
            h.t_room0 = uniform(rng, 22.0, 25.0);
            h.soc0 = uniform(rng, 0.3, 0.7);
            h.params = random_house_params(rng, h.id, {true});
            h.params.bes->p_c_max = std::min(h.params.bes->p_c_max, 3.0);
            h.params.bes->p_d_max = std::min(h.params.bes->p_d_max, 3.0);
            c.houses.push_back(h);
        }
    };
    // A block: 1-2 buses joined by a line; returns its first bus.
    auto add_block = [&]() {
        const std::string a = std::to_string(++bus_no);
        add_bus(a);
        add_houses(a);
        if (coin(rng)) {
            const std::string b = std::to_string(++bus_no);
            add_bus(b);
            add_line(a, b);
            add_houses(b);
        }
        return a;
    };
    auto add_gfm = [&](const std::string& id, const std::string& bus) {
        add_bus(bus);
        DerUnit g;
        g.id = id;
        g.bus = bus;
        g.kind = DerKind::GfmBess;
        g.s_rat = uniform(rng, 18.0, 30.0);
        g.e_cap = uniform(rng, 40.0, 100.0);
        g.e_init = uniform(rng, 0.5, 0.9) * g.e_cap;
        g.d = uniform(rng, 15.0, 25.0);
        g.k_f = uniform(rng, 20.0, 40.0);
        g.h = uniform(rng, 3.0, 6.0);
        g.gamma = uniform(rng, 0.2, 0.4);
        c.ders.push_back(g);
    };
    auto add_switch = [&](const std::string& id, const std::string& a, const std::string& b, SwitchKind k) {
        c.switches.push_back({id, a, b, k, PhaseSet::all()});
    };

    add_gfm("G1", "g1");
    const std::string first = add_block();
    add_switch("S1", "g1", first, SwitchKind::Esw);
    switch (o.shape) {
        case ToyShape::Chain: {
            std::string prev = first;
            for (int b = 1; b < std::clamp(o.blocks, 1, 3); ++b) {
                const std::string next = add_block();
                add_switch(fmt::format("S{}", b + 1), prev, next, SwitchKind::Esw);
                prev = next;
            }
            break;
        }
        case ToyShape::TwoIslands: {
            add_gfm("G2", "g2");
            const std::string second = add_block();
            add_switch("S2", "g2", second, SwitchKind::Esw);
            add_switch("S3", first, second, SwitchKind::Ssw);
            break;
        }
        case ToyShape::WithTg: {
            add_bus("tg");
            TgInterface tg;
            tg.bus = "tg";
            tg.ss_rat = 500.0;
            tg.schedule = {{0, 0}, {o.tg_return_min, 1}};
            c.tg = tg;
            add_switch("S2", "tg", first, SwitchKind::Ssw);
            break;
        }
    }
    if (o.pv && c.buses.size() > 1) {
        DerUnit pv;
        pv.id = "PV1";
        pv.bus = first;
        pv.kind = DerKind::GflPv;
        pv.p_rated = uniform(rng, 2.0, 8.0);
        pv.s_rat = pv.p_rated;
        c.ders.push_back(pv);
    }
    c.finalize();
    return c;
}

// Envelopes for every GEI house of `c` at `clock`, from the house model.
inline std::map<std::string, gei::FlexibilityEnvelope> case_envelopes(const network::GridCase& c, int clock,
                                                                      std::size_t steps, double dt_s) {
    std::map<std::string, gei::FlexibilityEnvelope> env;
    gei::HouseModelOptions opts;
    opts.dt_h = dt_s / 3600.0;
    for (const auto& h : c.houses) {
        if (!h.has_gei) continue;
        const auto f = network::house_forecast(c, h, clock, steps, dt_s / 60.0);
        const auto s = network::house_initial_state(c, h, clock);
        env[h.id] = gei::estimate_flexibility_envelope(h.params, f, s, opts);
    }
    return env;
}

// Best model objective over every monotone switch schedule, each schedule
// solved with all switch binaries fixed. Returns -inf when none is feasible.
struct BruteForceResult {
    double best = -std::numeric_limits<double>::infinity();
    std::size_t schedules = 0;
    std::size_t feasible = 0;
};

inline BruteForceResult brute_force_schedules(const network::GridCase& c, const restoration::RestorationProblem& pb) {
    const std::size_t ns = c.switches.size();
    const std::size_t N = pb.vars.steps;
    BruteForceResult out;
    // close[s] in 0..N: first closed step, N meaning never. Closed-at-prior switches stay closed.
    std::vector<std::size_t> close(ns, 0);
    std::function<void(std::size_t)> rec = [&](std::size_t s) {
        if (s == ns) {
            ++out.schedules;
            milp::Model m = pb.model;
            for (std::size_t i = 0; i < ns; ++i) {
                for (std::size_t k = 0; k < N; ++k) m.fix(pb.vars.y_sw[i][k], k >= close[i] ? 1.0 : 0.0);
            }
            milp::SolveLimits lim;
            lim.mip_rel_gap = 1e-9;
            lim.polish = false;
            const auto r = milp::solve(m, pb.objective, milp::Direction::Maximize, lim);
            if (r.status == milp::SolveStatus::Optimal) {
                ++out.feasible;
                out.best = std::max(out.best, r.objective);
            }
            return;
        }
        const auto it = pb.inputs.prior.switch_y.find(c.switches[s].id);
        const bool closed = it != pb.inputs.prior.switch_y.end() && it->second == 1;
        for (std::size_t t = 0; t <= (closed ? 0 : N); ++t) {
            close[s] = t;
            rec(s + 1);
        }
    };
    rec(0);
    return out;
}

// Toy restoration problem from a blackout (or `prior`) at `clock`, solved tight.
struct ToySolve {
    restoration::RestorationProblem problem;
    restoration::RestorationSolution solution;
};

inline restoration::RestorationConfig toy_config(std::size_t steps) {
    restoration::RestorationConfig cfg;
    cfg.steps = steps;
    return cfg;
}

inline restoration::RestorationProblem toy_problem(const network::GridCase& c, int clock, std::size_t steps,
                                                   const restoration::PriorState* prior = nullptr) {
    const auto cfg = toy_config(steps);
    const auto pr = prior ? *prior : restoration::PriorState::blackout(c, clock);
    auto inputs = restoration::make_inputs(c, pr, case_envelopes(c, pr.clock_min, steps, cfg.dt_s), cfg);
    return restoration::build_restoration_milp(c, inputs, cfg);
}

inline milp::SolveLimits tight_limits() {
    milp::SolveLimits lim;
    lim.mip_rel_gap = 1e-9;
    return lim;
}

inline ToySolve solve_toy(const network::GridCase& c, int clock, std::size_t steps,
                          const restoration::PriorState* prior = nullptr) {
    ToySolve t{toy_problem(c, clock, steps, prior), {}};
    t.solution = restoration::solve_restoration(c, t.problem, tight_limits());
    return t;
}

// Energization of a bus in a solution; k = -1 reads the prior state.
inline int bus_energized(const network::GridCase& c, const restoration::RestorationSolution& s,
                         const restoration::PriorState& prior, const std::string& bus, long k) {
    for (std::size_t g : c.gfm_units()) {
        if (c.ders[g].bus == bus) return 1;
    }
    if (c.tg && c.tg->bus == bus) {
        return k < 0 ? prior.tg_status : s.tg.y[static_cast<std::size_t>(k)];
    }
    if (k < 0) {
        const int b = c.bus(bus).block;
        const auto it = prior.block_y.find(c.blocks[static_cast<std::size_t>(b)].id);
        return it == prior.block_y.end() ? 0 : it->second;
    }
    return s.y_bus[s.bus_index(bus)][static_cast<std::size_t>(k)];
}

// Frequency at a bus at step k.
inline double bus_frequency(const network::GridCase& c, const restoration::RestorationSolution& s,
                            const std::string& bus, std::size_t k) {
    for (const auto& g : s.gfm) {
        for (std::size_t u : c.gfm_units()) {
            if (c.ders[u].id == g.unit && c.ders[u].bus == bus) return g.f[k];
        }
    }
    if (c.tg && c.tg->bus == bus) return s.tg.f[k];
    return s.f_block[static_cast<std::size_t>(c.bus(bus).block)][k];
}

inline const restoration::BranchFlow& switch_flow(const restoration::RestorationSolution& s, const std::string& id) {
    for (const auto& f : s.flows) {
        if (f.is_switch && f.id == id) return f;
    }
    throw std::out_of_range("no flow for switch " + id);
}

}  // namespace bsr::testing

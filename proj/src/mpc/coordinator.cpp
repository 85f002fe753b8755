#include "bsr/mpc/coordinator.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <mutex>
#include <random>
#include <thread>

#include <fmt/format.h>

#include "bsr/io/csv.hpp"
#include "bsr/restoration/solution_io.hpp"

namespace bsr::mpc {

namespace fs = std::filesystem;
using nlohmann::json;
using restoration::RestorationSolution;

void ScenarioConfig::validate() const {
    std::vector<std::string> p;
    if (!(end_min > start_min)) p.push_back("end time must be after start time");
    if (steps < 1) p.push_back("horizon needs at least one step");
    if (!(dt_s > 0)) p.push_back("time step must be positive");
    if (workers < 1) p.push_back("need at least one worker");
    if (!(forecast_noise >= 0)) p.push_back("forecast noise must be non-negative");
    if (!p.empty()) {
        std::string msg = "scenario config rejected:";
        for (const auto& x : p) msg += "\n  - " + x;
        throw ScenarioError(msg);
    }
    restoration_config().validate();
}

std::size_t ScenarioConfig::mpc_steps() const {
    return static_cast<std::size_t>(std::ceil((end_min - start_min) * 60.0 / dt_s - 1e-9));
}

restoration::RestorationConfig ScenarioConfig::restoration_config() const {
    restoration::RestorationConfig r;
    r.steps = steps;
    r.dt_s = dt_s;
    r.bounds = bounds;
    r.big_m = big_m;
    r.tie_break = tie_break;
    r.power_factor = power_factor;
    r.non_gei_load = non_gei_load;
    return r;
}

namespace {

json house_state_json(const gei::HouseState& s) {
    return {{"t_wall", s.t_wall},   {"t_room", s.t_room},   {"e_es", s.e_es},       {"p_es_c_prev", s.p_es_c_prev},
            {"p_es_d_prev", s.p_es_d_prev}, {"connected", s.connected}, {"clock", network::format_clock(s.clock_min)}};
}

// Runs fn(i) for i in [0, n) on up to `workers` threads; rethrows the first failure.
template <typename F>
void parallel_for(std::size_t n, unsigned workers, F&& fn) {
    if (workers <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::exception_ptr err;
    std::mutex mu;
    std::size_t next = 0;
    auto work = [&] {
        for (;;) {
            std::size_t i;
            {
                std::lock_guard lock(mu);
                if (next >= n || err) return;
                i = next++;
            }
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock(mu);
                if (!err) err = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < std::min<std::size_t>(workers, n); ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
    if (err) std::rethrow_exception(err);
}

gei::HouseForecast perturbed(const gei::HouseForecast& f, double sigma, std::uint64_t seed, std::size_t step,
                             std::size_t house) {
    if (sigma <= 0) return f;
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(step), static_cast<std::uint32_t>(house)};
    std::mt19937_64 rng(seq);
    std::normal_distribution<double> n(0.0, sigma);
    gei::HouseForecast g = f;
    for (auto& v : g.p_load_hat) v = std::max(0.0, v * (1.0 + n(rng)));
    for (auto& v : g.p_pv_hat) v = std::max(0.0, v * (1.0 + n(rng)));
    for (auto& v : g.t_out) v += 2.0 * n(rng);
    return g;
}

}  // namespace

json ScenarioState::to_json() const {
    json h = json::object();
    for (const auto& [id, s] : houses) h[id] = house_state_json(s);
    return {{"clock", network::format_clock(clock_min)},
            {"grid", restoration::to_json(grid)},
            {"houses", h},
            {"events", events}};
}

network::GridCase scenario_case(const network::GridCase& c, const ScenarioConfig& cfg) {
    network::GridCase out = c;
    if (cfg.tg_schedule) {
        if (!out.tg) throw ScenarioError("scenario sets a TG schedule but the case has no TG");
        out.tg->schedule = *cfg.tg_schedule;
    }
    return out;
}

ScenarioState initial_scenario_state(const network::GridCase& c, const ScenarioConfig& cfg) {
    ScenarioState s;
    s.clock_min = cfg.start_min;
    s.grid = restoration::PriorState::blackout(c, cfg.start_min);
    for (const auto& h : c.houses) {
        if (h.has_gei) s.houses[h.id] = network::house_initial_state(c, h, cfg.start_min);
    }
    return s;
}

StepRecord advance_step(ScenarioState& state, const network::GridCase& c, const ScenarioConfig& cfg,
                        std::size_t index) {
    StepRecord rec;
    rec.index = index;
    rec.clock_min = state.clock_min;
    const int clock = state.clock_min;
    const double dt_min = cfg.dt_s / 60.0;
    const std::size_t N = cfg.steps;
    gei::HouseModelOptions opts;
    opts.dt_h = cfg.dt_s / 3600.0;
    auto snapshot = [&](const std::string& why) {
        json j = state.to_json();
        j["step"] = index + 1;
        j["error"] = why;
        return j;
    };

    std::vector<const network::HouseSpec*> gei_houses;
    for (const auto& h : c.houses) {
        if (h.has_gei) gei_houses.push_back(&h);
    }
    const std::size_t nh = gei_houses.size();
    std::vector<gei::HouseForecast> truth(nh), seen(nh);
    std::vector<gei::FlexibilityEnvelope> env(nh);

    // (1) envelopes from every GEI house
    try {
        parallel_for(nh, cfg.workers, [&](std::size_t i) {
            const auto& h = *gei_houses[i];
            truth[i] = network::house_forecast(c, h, clock, N, dt_min);
            seen[i] = perturbed(truth[i], cfg.forecast_noise, cfg.seed, index, i);
            env[i] = gei::estimate_flexibility_envelope(h.params, seen[i], state.houses.at(h.id), opts, cfg.house_limits);
        });
    } catch (const std::exception& e) {
        throw ScenarioAbort(fmt::format("flexibility estimation failed at {}: {}", network::format_clock(clock), e.what()),
                            snapshot(e.what()));
    }
    std::map<std::string, gei::FlexibilityEnvelope> envelopes;
    for (std::size_t i = 0; i < nh; ++i) {
        rec.flexibility.push_back({gei_houses[i]->id, env[i], clock});
        envelopes[gei_houses[i]->id] = env[i];
    }

    // (2) utility solve
    const auto rcfg = cfg.restoration_config();
    const auto inputs = restoration::make_inputs(c, state.grid, envelopes, rcfg);
    const auto t0 = std::chrono::steady_clock::now();
    restoration::RestorationProblem pb;
    try {
        pb = restoration::build_restoration_milp(c, inputs, rcfg);
    } catch (const std::exception& e) {
        throw ScenarioAbort(fmt::format("restoration model rejected at {}: {}", network::format_clock(clock), e.what()),
                            snapshot(e.what()));
    }
    // The hold-switches variant is quick and always feasible for the full
    // problem when feasible itself; its solution seeds the full solve.
    std::optional<RestorationSolution> sol;
    const auto hold = restoration::hold_switches(c, pb);
    const auto rh = milp::solve(hold.model, hold.objective, milp::Direction::Maximize, cfg.utility_limits);
    auto limits = cfg.utility_limits;
    if (rh.has_values()) limits.start = rh.values;
    try {
        sol = restoration::solve_restoration(c, pb, limits);
    } catch (const restoration::RestorationInfeasible& e) {
        rec.notes.push_back(fmt::format("{}: {}", network::format_clock(clock), e.what()));
    }
    if (!sol && rh.has_values()) {
        rec.fallback = true;
        rec.notes.push_back(fmt::format("{}: holding switch states", network::format_clock(clock)));
        sol = restoration::extract_solution(c, hold, rh);
    }
    if (!sol && state.last_plan && state.last_plan->steps > 1) {
        rec.fallback = true;
        rec.notes.push_back(fmt::format("{}: no feasible plan; applying the next step of the previous plan",
                                        network::format_clock(clock)));
        sol = restoration::shift_solution(*state.last_plan);
    }
    if (!sol) {
        throw ScenarioAbort(fmt::format("restoration infeasible at {} with switches held and no previous plan",
                                        network::format_clock(clock)),
                            snapshot("restoration infeasible"));
    }
    rec.solve_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    rec.inputs = pb.inputs;
    rec.config = pb.config;
    rec.solution = std::move(*sol);
    const RestorationSolution& s = rec.solution;

    // (3) dispatch to houses whose bus is energized over the first step
    std::vector<bool> connected(nh);
    std::vector<gei::DispatchSignal> signal(nh);
    for (std::size_t i = 0; i < nh; ++i) {
        const auto& id = gei_houses[i]->id;
        connected[i] = restoration::connection_status(c, id, s);
        if (!connected[i]) continue;
        signal[i].p_ref = s.dispatch.at(id);
        if (s.status == "shifted") {
            // The old plan was cut for last step's envelopes; pull it into the current ones.
            const auto& e = rec.flexibility[i].envelope;
            for (std::size_t k = 0; k < signal[i].p_ref.size() && k < e.lower.size(); ++k) {
                signal[i].p_ref[k] = std::clamp(signal[i].p_ref[k], e.lower[k], e.upper[k]);
            }
        }
        signal[i].horizon_start_min = clock;
        signal[i].dt_s = cfg.dt_s;
        rec.dispatch.push_back({id, signal[i], clock});
        for (const auto& p : check_dispatch_within(rec.dispatch.back(), rec.flexibility[i])) rec.notes.push_back(p);
    }

    // (4) house solves and (5) first-step application
    rec.houses.resize(nh);
    try {
        parallel_for(nh, cfg.workers, [&](std::size_t i) {
            const auto& h = *gei_houses[i];
            gei::HouseState st = state.houses.at(h.id);
            st.connected = connected[i];
            const auto d = gei::optimize_house(h.params, seen[i], st, connected[i] ? &signal[i] : nullptr, opts,
                                               cfg.house_limits);
            gei::AppliedStep a;
            a.q_hvac = d.q_hvac.empty() ? 0.0 : d.q_hvac[0];
            a.p_es_c = d.p_es_c.empty() ? 0.0 : d.p_es_c[0];
            a.p_es_d = d.p_es_d.empty() ? 0.0 : d.p_es_d[0];
            auto& log = rec.houses[i];
            log.id = h.id;
            log.connected = connected[i];
            log.mode = connected[i] ? "tracking" : "standalone";
            log.env_lower = env[i].lower[0];
            log.env_upper = env[i].upper[0];
            log.p_ref = connected[i] ? signal[i].p_ref[0] : 0.0;
            log.p_gei = d.p_gei[0];
            log.q_hvac = a.q_hvac;
            log.p_hvac = d.p_hvac.empty() ? 0.0 : d.p_hvac[0];
            log.p_es_c = a.p_es_c;
            log.p_es_d = a.p_es_d;
            log.p_pv = d.p_pv.empty() ? 0.0 : d.p_pv[0];
            log.p_load = d.p_load.empty() ? 0.0 : d.p_load[0];
            log.residual = connected[i] ? gei::tracking_residual(d, signal[i]) : 0.0;
            log.before = st;
            log.after = gei::step_house_state(h.params, truth[i], st, a, cfg.dt_s);
            log.after.connected = connected[i];
        });
    } catch (const std::exception& e) {
        throw ScenarioAbort(fmt::format("house control failed at {}: {}", network::format_clock(clock), e.what()),
                            snapshot(e.what()));
    }

    rec.grid_after = restoration::advance_prior(c, state.grid, s);
    for (const auto& [id, v] : s.served) rec.served_kw += v[0];
    for (const auto& h : c.houses) rec.houses_restored += s.y_bus[s.bus_index(h.bus)][0];

    // (6) commit and advance the clock
    for (const auto& log : rec.houses) state.houses[log.id] = log.after;
    state.grid = rec.grid_after;
    state.clock_min = rec.grid_after.clock_min;
    state.last_plan = s;
    for (const auto& n : rec.notes) state.events.push_back(n);
    return rec;
}

bool tg_connected(const network::GridCase& c, const RestorationSolution& s, std::size_t k) {
    if (!c.tg) return false;
    for (std::size_t i = 0; i < c.switches.size(); ++i) {
        const auto& sw = c.switches[i];
        if (sw.from != c.tg->bus && sw.to != c.tg->bus) continue;
        if (s.y_switch[s.switch_index(sw.id)][k] == 1) return true;
    }
    return false;
}

void write_step(const fs::path& out_dir, const network::GridCase& c, const StepRecord& r) {
    const std::string tag = fmt::format("step_{:02}", r.index + 1);
    std::vector<json> msgs;
    for (const auto& m : r.flexibility) msgs.push_back(to_json(m));
    for (const auto& m : r.dispatch) msgs.push_back(to_json(m));
    write_jsonl(out_dir / "messages" / (tag + ".jsonl"), msgs);
    restoration::write_solution_dir(out_dir / "solutions" / tag, c, r.inputs, r.config, r.solution);
}

void write_timeseries(const fs::path& out_dir, const network::GridCase& c, const ScenarioConfig& cfg,
                      const std::vector<StepRecord>& steps) {
    using io::CsvWriter;
    using io::num;
    const fs::path dir = out_dir / "timeseries";
    fs::create_directories(dir);
    auto stamp = [&](const StepRecord& r) { return network::format_clock(r.grid_after.clock_min); };
    auto idx = [](const StepRecord& r) { return std::to_string(r.index + 1); };
    auto i01 = [](bool b) { return std::string(b ? "1" : "0"); };

    {
        CsvWriter w(dir / "grid.csv", {"step", "timestamp", "served_kw", "houses_restored", "energized_blocks",
                                       "tg_status", "fallback", "objective_kwh", "gap", "solve_s"});
        for (const auto& r : steps) {
            int blocks = 0;
            for (const auto& y : r.solution.y_block) blocks += y[0];
            const int tg = r.solution.tg.y.empty() ? 0 : r.solution.tg.y[0];
            w.row({idx(r), stamp(r), num(r.served_kw), std::to_string(r.houses_restored), std::to_string(blocks),
                   std::to_string(tg), i01(r.fallback), num(r.solution.objective), num(r.solution.gap),
                   fmt::format("{:.3f}", r.solve_s)});
        }
    }
    {
        CsvWriter w(dir / "switches.csv", {"switch", "kind", "step", "timestamp", "y", "z"});
        for (std::size_t s = 0; s < c.switches.size(); ++s) {
            for (const auto& r : steps) {
                const std::size_t i = r.solution.switch_index(c.switches[s].id);
                w.row({c.switches[s].id, std::string(network::to_string(c.switches[s].kind)), idx(r), stamp(r),
                       std::to_string(r.solution.y_switch[i][0]), std::to_string(r.solution.z_switch[i][0])});
            }
        }
    }
    {
        CsvWriter w(dir / "blocks.csv", {"block", "step", "timestamp", "y", "f"});
        for (const auto& b : c.blocks) {
            for (const auto& r : steps) {
                const std::size_t i = r.solution.block_index(b.id);
                w.row({b.id, idx(r), stamp(r), std::to_string(r.solution.y_block[i][0]), num(r.solution.f_block[i][0])});
            }
        }
    }
    {
        CsvWriter w(dir / "gfm.csv", {"unit", "step", "timestamp", "p_total", "dp", "e", "f", "df_qss", "rocof", "nadir",
                                      "df_star", "delta"});
        for (std::size_t u : c.gfm_units()) {
            const auto& id = c.ders[u].id;
            for (const auto& r : steps) {
                const auto& g = *std::find_if(r.solution.gfm.begin(), r.solution.gfm.end(),
                                              [&](const restoration::GfmTrajectory& x) { return x.unit == id; });
                w.row({id, idx(r), stamp(r), num(g.p[0][0] + g.p[0][1] + g.p[0][2]), num(g.dp[0]), num(g.e[0]),
                       num(g.f[0]), num(g.df_qss[0]), num(g.rocof[0]), num(g.nadir[0]), num(g.df_star[0]),
                       num(g.delta[0])});
            }
        }
    }
    {
        CsvWriter w(dir / "tg.csv", {"step", "timestamp", "y", "connected", "p_total", "q_total", "f"});
        if (c.tg) {
            for (const auto& r : steps) {
                const auto& t = r.solution.tg;
                w.row({idx(r), stamp(r), std::to_string(t.y[0]), i01(tg_connected(c, r.solution, 0)),
                       num(t.p[0][0] + t.p[0][1] + t.p[0][2]), num(t.q[0][0] + t.q[0][1] + t.q[0][2]), num(t.f[0])});
            }
        }
    }
    {
        CsvWriter w(dir / "voltages.csv", {"bus", "phase", "step", "timestamp", "y", "pu"});
        for (const auto& bus : c.buses) {
            for (const auto& r : steps) {
                const std::size_t i = r.solution.bus_index(bus.id);
                for (int p : bus.phases.list()) {
                    const double v = r.solution.v[i][0][static_cast<std::size_t>(p)];
                    w.row({bus.id, std::string(1, network::phase_name(p)), idx(r), stamp(r),
                           std::to_string(r.solution.y_bus[i][0]), num(std::sqrt(std::max(v, 0.0)))});
                }
            }
        }
    }
    {
        CsvWriter w(dir / "served_load.csv", {"house", "gei", "step", "timestamp", "kw"});
        for (const auto& h : c.houses) {
            for (const auto& r : steps) w.row({h.id, i01(h.has_gei), idx(r), stamp(r), num(r.solution.served.at(h.id)[0])});
        }
    }
    {
        CsvWriter init(dir / "houses_initial.csv", {"house", "timestamp", "e_es", "t_room", "t_wall1", "t_wall2",
                                                   "t_wall3", "t_wall4"});
        CsvWriter w(dir / "houses.csv", {"house", "step", "timestamp", "connected", "mode", "env_lower", "env_upper",
                                         "p_ref", "p_gei", "q_hvac", "p_hvac", "p_es_c", "p_es_d", "p_pv", "p_load",
                                         "e_es", "t_room", "t_wall1", "t_wall2", "t_wall3", "t_wall4", "residual"});
        if (!steps.empty()) {
            for (const auto& l : steps.front().houses) {
                const auto& s = l.before;
                init.row({l.id, network::format_clock(steps.front().clock_min), num(s.e_es), num(s.t_room),
                          num(s.t_wall[0]), num(s.t_wall[1]), num(s.t_wall[2]), num(s.t_wall[3])});
            }
        }
        for (const auto& h : c.houses) {
            if (!h.has_gei) continue;
            for (const auto& r : steps) {
                const auto& l = *std::find_if(r.houses.begin(), r.houses.end(), [&](const HouseStepLog& x) { return x.id == h.id; });
                const auto& s = l.after;
                w.row({l.id, idx(r), stamp(r), i01(l.connected), l.mode, num(l.env_lower), num(l.env_upper), num(l.p_ref),
                       num(l.p_gei), num(l.q_hvac), num(l.p_hvac), num(l.p_es_c), num(l.p_es_d), num(l.p_pv), num(l.p_load),
                       num(s.e_es), num(s.t_room), num(s.t_wall[0]), num(s.t_wall[1]), num(s.t_wall[2]), num(s.t_wall[3]),
                       num(l.residual)});
            }
        }
    }
    {
        json meta = {{"case", c.name},
                     {"start", network::format_clock(cfg.start_min)},
                     {"end", network::format_clock(cfg.end_min)},
                     {"dt_s", cfg.dt_s},
                     {"horizon_steps", cfg.steps},
                     {"steps_run", steps.size()}};
        std::ofstream(dir / "meta.json") << meta.dump(1) << '\n';
    }
}

RunResult run_scenario(const network::GridCase& c_in, const ScenarioConfig& cfg, const fs::path& out_dir) {
    cfg.validate();
    const network::GridCase c = scenario_case(c_in, cfg);
    RunResult out;
    out.final_state = initial_scenario_state(c, cfg);
    const std::size_t n = cfg.mpc_steps();
    for (std::size_t i = 0; i < n; ++i) {
        try {
            out.steps.push_back(advance_step(out.final_state, c, cfg, i));
        } catch (const ScenarioAbort& e) {
            if (!out_dir.empty()) {
                fs::create_directories(out_dir);
                std::ofstream(out_dir / "abort_state.json") << e.snapshot().dump(1) << '\n';
                write_timeseries(out_dir, c, cfg, out.steps);
            }
            throw;
        }
        if (!out_dir.empty()) write_step(out_dir, c, out.steps.back());
    }
    if (!out_dir.empty()) write_timeseries(out_dir, c, cfg, out.steps);
    return out;
}

}  // namespace bsr::mpc

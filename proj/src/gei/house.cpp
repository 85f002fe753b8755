#include "bsr/gei/house.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>
#include <fmt/format.h>

namespace bsr::gei {

using milp::Direction;
using milp::LinExpr;
using milp::Model;
using milp::Sense;
using milp::VarId;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require(bool ok, const std::string& what) {
    if (!ok) throw HouseError(what);
}

double clamp_ramp(double v, double pmax) { return std::clamp(v, -pmax, pmax); }

}  // namespace

void HouseThermalParams::validate() const {
    for (int i = 0; i < 4; ++i) {
        require(c_wall[i] > 0 && r_wall[i] > 0, "wall capacitance and resistance must be positive");
        require(w_wall[i] >= 0 && w_wall[i] <= 1, "wall weighting factor must lie in [0,1]");
    }
    require(r_win > 0 && c_room > 0, "window resistance and room capacitance must be positive");
    require(w_win >= 0 && w_win <= 1, "window weighting factor must lie in [0,1]");
    require(cop > 0, "COP must be positive");
}

void HvacParams::validate() const {
    require(t_set_lo < t_set_hi, "HVAC setpoint band is empty");
    require(q_max > 0 && p_max > 0, "HVAC capacities must be positive");
}

void BesParams::validate() const {
    require(e_lo >= 0 && e_lo < e_hi, "BES energy bounds must satisfy 0 <= E_lo < E_hi");
    require(p_c_max > 0 && p_d_max > 0, "BES power limits must be positive");
    require(eta_c > 0 && eta_c <= 1 && eta_d > 0 && eta_d <= 1, "BES efficiencies must lie in (0,1]");
    require(ramp_c_lo <= ramp_c_hi && ramp_d_lo <= ramp_d_hi, "BES ramp limits inverted");
}

void HouseParams::validate() const {
    require(thermal.has_value() == hvac.has_value(), "house " + id + ": thermal and HVAC parameters come together");
    if (thermal) thermal->validate();
    if (hvac) hvac->validate();
    if (bes) bes->validate();
    require(pv_floor >= 0 && pv_floor <= 1 && load_floor >= 0 && load_floor <= 1,
            "scaling floors must lie in [0,1]");
}

void HouseForecast::validate(const HouseParams& params) const {
    const std::size_t n = steps();
    require(n >= 1, "forecast horizon must have at least one step");
    auto check = [&](const std::vector<double>& v, const char* name, bool nonneg) {
        require(v.size() == n, fmt::format("forecast {} has {} entries, expected {}", name, v.size(), n));
        for (double x : v) {
            require(std::isfinite(x), fmt::format("forecast {} has a non-finite entry", name));
            if (nonneg) require(x >= 0, fmt::format("forecast {} must be non-negative", name));
        }
    };
    check(p_load_hat, "p_load_hat", true);
    check(p_pv_hat, "p_pv_hat", true);
    if (params.thermal) {
        check(t_out, "t_out", false);
        for (const auto& q : q_rad_wall) check(q, "q_rad_wall", false);
        check(q_rad_win, "q_rad_win", false);
        check(q_int, "q_int", false);
    }
}

HouseForecast HouseForecast::slice(std::size_t from, std::size_t n) const {
    auto cut = [&](const std::vector<double>& v) {
        if (v.empty()) return v;
        if (from + n > v.size()) throw HouseError("forecast slice out of range");
        return std::vector<double>(v.begin() + static_cast<long>(from), v.begin() + static_cast<long>(from + n));
    };
    HouseForecast f;
    f.t_out = cut(t_out);
    for (int i = 0; i < 4; ++i) f.q_rad_wall[i] = cut(q_rad_wall[i]);
    f.q_rad_win = cut(q_rad_win);
    f.q_int = cut(q_int);
    f.p_pv_hat = cut(p_pv_hat);
    f.p_load_hat = cut(p_load_hat);
    return f;
}

void HouseState::validate(const HouseParams& params) const {
    if (params.bes) {
        const double tol = 1e-6;
        require(e_es >= params.bes->e_lo - tol && e_es <= params.bes->e_hi + tol,
                fmt::format("house {}: stored energy {} outside [{}, {}]", params.id, e_es, params.bes->e_lo,
                            params.bes->e_hi));
    }
    require(std::isfinite(t_room), "room temperature must be finite");
}

HouseState initial_state(const HouseParams& params, double t_room, double t_out, double e_es, int clock_min) {
    HouseState s;
    s.t_room = t_room;
    s.t_wall.fill(0.5 * (t_room + t_out));
    s.e_es = params.bes ? e_es : 0.0;
    s.clock_min = clock_min;
    return s;
}

bool FlexibilityEnvelope::well_formed() const {
    if (lower.size() != upper.size()) return false;
    for (std::size_t k = 0; k < lower.size(); ++k) {
        if (!(std::isfinite(lower[k]) && std::isfinite(upper[k]) && lower[k] <= upper[k])) return false;
    }
    return dt_s > 0;
}

LinExpr HouseVars::total_p_gei() const {
    LinExpr e;
    for (VarId v : p_gei) e += LinExpr(v);
    return e;
}

double hvac_coefficient(const HouseThermalParams& th, const HvacParams& hvac, double t_room_measured) {
    const double t_mid = 0.5 * (hvac.t_set_lo + hvac.t_set_hi);
    return std::abs(t_mid - t_room_measured) / (th.cop * (273.0 + t_room_measured));
}

HouseVars build_house_milp(Model& model, const HouseParams& params, const HouseForecast& forecast,
                           const HouseState& state, const HouseModelOptions& opts, const std::string& prefix) {
    params.validate();
    forecast.validate(params);
    state.validate(params);
    require(opts.dt_h > 0, "time step must be positive");

    const std::size_t n = forecast.steps();
    const double dt = opts.dt_h;
    HouseVars hv;
    hv.steps = n;
    auto nm = [&](const char* what, std::size_t k) { return fmt::format("{}{}[{}]", prefix, what, k + 1); };

    for (std::size_t k = 0; k < n; ++k) {
        LinExpr net;

        if (params.has_load) {
            const VarId x = model.add_continuous(params.load_floor, 1.0, nm("x_load", k));
            const VarId p = model.add_continuous(0.0, kInf, nm("P_load", k));
            model.add_eq(LinExpr(p), forecast.p_load_hat[k] * x, "eq13", nm("eq13", k));
            hv.x_load.push_back(x);
            hv.p_load.push_back(p);
            net += LinExpr(p);
        }
        if (params.has_pv) {
            const VarId x = model.add_continuous(params.pv_floor, 1.0, nm("x_pv", k));
            const VarId p = model.add_continuous(0.0, kInf, nm("P_pv", k));
            model.add_eq(LinExpr(p), forecast.p_pv_hat[k] * x, "eq12", nm("eq12", k));
            hv.x_pv.push_back(x);
            hv.p_pv.push_back(p);
            net -= LinExpr(p);
        }
        if (params.bes) {
            const BesParams& b = *params.bes;
            const VarId pc = model.add_continuous(0.0, b.p_c_max, nm("P_es_c", k));
            const VarId pd = model.add_continuous(0.0, b.p_d_max, nm("P_es_d", k));
            const VarId bc = model.add_binary(nm("beta_c", k));
            const VarId bd = model.add_binary(nm("beta_d", k));
            const VarId e = model.add_continuous(-kInf, kInf, nm("E_es", k));
            const LinExpr e_prev = k == 0 ? LinExpr(state.e_es) : LinExpr(hv.e_es.back());
            model.add_eq(LinExpr(e), e_prev + dt * b.eta_c * pc - (dt / b.eta_d) * pd, "eq5", nm("eq5", k));
            model.add_constraint(LinExpr(e), Sense::GreaterEqual, b.e_lo, "eq6", nm("eq6.lo", k));
            model.add_constraint(LinExpr(e), Sense::LessEqual, b.e_hi, "eq6", nm("eq6.hi", k));
            model.add_le(LinExpr(pc), b.p_c_max * bc, "eq7", nm("eq7", k));
            model.add_le(LinExpr(pd), b.p_d_max * bd, "eq8", nm("eq8", k));
            const LinExpr pc_prev = k == 0 ? LinExpr(state.p_es_c_prev) : LinExpr(hv.p_es_c.back());
            const LinExpr pd_prev = k == 0 ? LinExpr(state.p_es_d_prev) : LinExpr(hv.p_es_d.back());
            model.add_ge(pc - pc_prev, LinExpr(clamp_ramp(b.ramp_c_lo, b.p_c_max)), "eq9", nm("eq9.lo", k));
            model.add_le(pc - pc_prev, LinExpr(clamp_ramp(b.ramp_c_hi, b.p_c_max)), "eq9", nm("eq9.hi", k));
            model.add_ge(pd - pd_prev, LinExpr(clamp_ramp(b.ramp_d_lo, b.p_d_max)), "eq10", nm("eq10.lo", k));
            model.add_le(pd - pd_prev, LinExpr(clamp_ramp(b.ramp_d_hi, b.p_d_max)), "eq10", nm("eq10.hi", k));
            model.add_constraint(bc + bd, Sense::LessEqual, 1.0, "eq11", nm("eq11", k));
            hv.p_es_c.push_back(pc);
            hv.p_es_d.push_back(pd);
            hv.beta_c.push_back(bc);
            hv.beta_d.push_back(bd);
            hv.e_es.push_back(e);
            net += LinExpr(pc) - LinExpr(pd);
        }
        if (params.thermal) {
            const HouseThermalParams& th = *params.thermal;
            const HvacParams& hvac = *params.hvac;
            const double coef = hvac_coefficient(th, hvac, state.t_room);
            hv.hvac_coef.push_back(coef);

            const VarId tr = model.add_continuous(-kInf, kInf, nm("T_room", k));
            std::array<VarId, 4> tw;
            for (int i = 0; i < 4; ++i) {
                tw[i] = model.add_continuous(-kInf, kInf, nm(("T_wall" + std::to_string(i + 1)).c_str(), k));
            }
            const bool cooling = hvac.mode == HvacMode::Cooling;
            const VarId q = model.add_continuous(cooling ? -hvac.q_max : 0.0, cooling ? 0.0 : hvac.q_max,
                                                 nm("Q_hvac", k));
            const VarId p = model.add_continuous(0.0, hvac.p_max, nm("P_hvac", k));
            const VarId t_set = model.add_continuous(-kInf, kInf, nm("T_hvac", k));

            for (int i = 0; i < 4; ++i) {
                const LinExpr tw_prev = k == 0 ? LinExpr(state.t_wall[i]) : LinExpr(hv.t_wall[i].back());
                // C (Tw - Tw_prev)/dt = (Tr - Tw)/R + (To - Tw)/R + w Qrad
                LinExpr lhs = (th.c_wall[i] / dt) * (LinExpr(tw[i]) - tw_prev);
                LinExpr rhs = (1.0 / th.r_wall[i]) * (LinExpr(tr) - LinExpr(tw[i]));
                rhs += (1.0 / th.r_wall[i]) * (LinExpr(forecast.t_out[k]) - LinExpr(tw[i]));
                rhs += LinExpr(th.w_wall[i] * forecast.q_rad_wall[i][k]);
                model.add_eq(lhs, rhs, "eq1", fmt::format("{}eq1[{},{}]", prefix, i + 1, k + 1));
            }
            const LinExpr tr_prev = k == 0 ? LinExpr(state.t_room) : LinExpr(hv.t_room.back());
            LinExpr lhs = (th.c_room / dt) * (LinExpr(tr) - tr_prev);
            LinExpr rhs;
            for (int i = 0; i < 4; ++i) rhs += (1.0 / th.r_wall[i]) * (LinExpr(tw[i]) - LinExpr(tr));
            rhs += (1.0 / th.r_win) * (LinExpr(forecast.t_out[k]) - LinExpr(tr));
            rhs += LinExpr(th.w_win * forecast.q_rad_win[k] + forecast.q_int[k]);
            rhs += LinExpr(q);
            model.add_eq(lhs, rhs, "eq2", nm("eq2", k));

            model.add_eq(LinExpr(p), (cooling ? -coef : coef) * q, "eq3", nm("eq3", k));
            model.add_constraint(LinExpr(t_set), Sense::GreaterEqual, hvac.t_set_lo, "eq4", nm("eq4.lo", k));
            model.add_constraint(LinExpr(t_set), Sense::LessEqual, hvac.t_set_hi, "eq4", nm("eq4.hi", k));

            hv.t_room.push_back(tr);
            for (int i = 0; i < 4; ++i) hv.t_wall[i].push_back(tw[i]);
            hv.q_hvac.push_back(q);
            hv.p_hvac.push_back(p);
            hv.t_hvac.push_back(t_set);
            net += LinExpr(p);
        }

        const VarId pg = model.add_continuous(-kInf, kInf, nm("P_gei", k));
        model.add_eq(LinExpr(pg), net, "eq14", nm("eq14", k));
        hv.p_gei.push_back(pg);
    }
    return hv;
}

HouseProblem make_house_problem(const HouseParams& params, const HouseForecast& forecast, const HouseState& state,
                                HouseObjective kind, const DispatchSignal* dispatch, const HouseModelOptions& opts) {
    HouseProblem hp{Model("house " + params.id), {}, {}, Direction::Minimize, {}};
    hp.vars = build_house_milp(hp.model, params, forecast, state, opts);
    switch (kind) {
    case HouseObjective::MaxConsumption:
        hp.objective = hp.vars.total_p_gei();
        hp.direction = Direction::Maximize;
        hp.objective_tag = "eq15";
        break;
    case HouseObjective::MinConsumption:
        hp.objective = hp.vars.total_p_gei();
        hp.objective_tag = "eq16";
        break;
    case HouseObjective::Standalone:
        hp.objective = hp.vars.total_p_gei();
        hp.objective_tag = "eq17";
        break;
    case HouseObjective::Tracking: {
        require(dispatch != nullptr, "tracking objective needs a dispatch signal");
        require(dispatch->p_ref.size() == hp.vars.steps, "dispatch signal length does not match the horizon");
        hp.objective_tag = "eq17";
        for (std::size_t k = 0; k < hp.vars.steps; ++k) {
            const double ref = dispatch->p_ref[k];
            require(std::isfinite(ref), "dispatch signal has a non-finite entry");
            const VarId dev = hp.model.add_continuous(0.0, kInf, fmt::format("dev[{}]", k + 1));
            hp.model.add_ge(LinExpr(dev), LinExpr(hp.vars.p_gei[k]) - ref, "eq17", fmt::format("eq17.up[{}]", k + 1));
            hp.model.add_ge(LinExpr(dev), ref - LinExpr(hp.vars.p_gei[k]), "eq17", fmt::format("eq17.dn[{}]", k + 1));
            hp.objective += LinExpr(dev);
        }
        break;
    }
    }
    return hp;
}

HouseDecision extract_decision(const HouseVars& hv, const milp::SolveResult& r) {
    auto grab = [&](const std::vector<VarId>& ids) {
        std::vector<double> out;
        out.reserve(ids.size());
        for (VarId v : ids) out.push_back(r.value(v));
        return out;
    };
    auto grab_or_zero = [&](const std::vector<VarId>& ids) {
        return ids.empty() ? std::vector<double>(hv.steps, 0.0) : grab(ids);
    };
    HouseDecision d;
    d.t_hvac = grab(hv.t_hvac);
    d.q_hvac = grab_or_zero(hv.q_hvac);
    d.p_hvac = grab_or_zero(hv.p_hvac);
    d.p_es_c = grab_or_zero(hv.p_es_c);
    d.p_es_d = grab_or_zero(hv.p_es_d);
    d.beta_c = grab_or_zero(hv.beta_c);
    d.beta_d = grab_or_zero(hv.beta_d);
    d.x_pv = grab_or_zero(hv.x_pv);
    d.x_load = grab_or_zero(hv.x_load);
    d.p_pv = grab_or_zero(hv.p_pv);
    d.p_load = grab_or_zero(hv.p_load);
    d.p_gei = grab(hv.p_gei);
    d.e_es = grab(hv.e_es);
    d.t_room = grab(hv.t_room);
    for (int i = 0; i < 4; ++i) d.t_wall[i] = grab(hv.t_wall[i]);
    d.objective = r.objective;
    return d;
}

namespace {

milp::SolveResult solve_problem(const HouseProblem& hp, const milp::SolveLimits& limits, const char* what) {
    milp::SolveResult r = milp::solve(hp.model, hp.objective, hp.direction, limits);
    if (!r.has_values()) {
        throw HouseInfeasible(fmt::format("{}: {} solve returned {}", hp.model.name(), what, milp::to_string(r.status)));
    }
    return r;
}

// The horizon-sum optimum is usually degenerate in time. Among the optimal
// trajectories pick the one that moves consumption (or export) earliest, so the
// near steps carry the widest band.
milp::SolveResult front_loaded(const HouseProblem& hp, const milp::SolveResult& first, const milp::SolveLimits& limits) {
    HouseProblem second = hp;
    const double opt = first.value(hp.objective);
    const double slack = 1e-7 * std::max(1.0, std::abs(opt));
    LinExpr timing;
    const std::size_t n = hp.vars.steps;
    for (std::size_t k = 0; k < n; ++k) timing += static_cast<double>(n - k) * LinExpr(hp.vars.p_gei[k]);
    if (hp.direction == Direction::Maximize) {
        second.model.add_ge(hp.objective, opt - slack, hp.objective_tag, hp.objective_tag + "[sum]");
    } else {
        second.model.add_le(hp.objective, opt + slack, hp.objective_tag, hp.objective_tag + "[sum]");
    }
    second.objective = timing;
    milp::SolveResult r = milp::solve(second.model, second.objective, second.direction, limits);
    return r.has_values() ? r : first;
}

}  // namespace

FlexibilityEnvelope estimate_flexibility_envelope(const HouseParams& params, const HouseForecast& forecast,
                                                  const HouseState& state, const HouseModelOptions& opts,
                                                  const milp::SolveLimits& limits) {
    const HouseProblem hi = make_house_problem(params, forecast, state, HouseObjective::MaxConsumption, nullptr, opts);
    const HouseProblem lo = make_house_problem(params, forecast, state, HouseObjective::MinConsumption, nullptr, opts);
    const milp::SolveResult rhi = front_loaded(hi, solve_problem(hi, limits, "upper envelope"), limits);
    const milp::SolveResult rlo = front_loaded(lo, solve_problem(lo, limits, "lower envelope"), limits);

    FlexibilityEnvelope env;
    env.horizon_start_min = state.clock_min;
    env.dt_s = opts.dt_h * 3600.0;
    for (std::size_t k = 0; k < hi.vars.steps; ++k) {
        const double a = rhi.value(hi.vars.p_gei[k]);
        const double b = rlo.value(lo.vars.p_gei[k]);
        // The sum-optimal trajectories can cross at individual steps.
        env.lower.push_back(std::min(a, b));
        env.upper.push_back(std::max(a, b));
    }
    return env;
}

HouseDecision optimize_house(const HouseParams& params, const HouseForecast& forecast, const HouseState& state,
                             const DispatchSignal* dispatch, const HouseModelOptions& opts,
                             const milp::SolveLimits& limits) {
    if (state.connected && dispatch == nullptr) throw HouseError("connected house " + params.id + " needs a dispatch");
    if (!state.connected && dispatch != nullptr) {
        throw HouseError("disconnected house " + params.id + " must not receive a dispatch");
    }
    const HouseObjective kind = state.connected ? HouseObjective::Tracking : HouseObjective::Standalone;
    const HouseProblem hp = make_house_problem(params, forecast, state, kind, dispatch, opts);
    const milp::SolveResult r = solve_problem(hp, limits, state.connected ? "tracking" : "standalone");
    return extract_decision(hp.vars, r);
}

double tracking_residual(const HouseDecision& d, const DispatchSignal& dispatch) {
    double sum = 0.0;
    for (std::size_t k = 0; k < d.steps() && k < dispatch.p_ref.size(); ++k) {
        sum += std::abs(d.p_gei[k] - dispatch.p_ref[k]);
    }
    return sum;
}

HouseState step_house_state(const HouseParams& params, const HouseForecast& forecast, const HouseState& state,
                            const AppliedStep& step, double dt_s) {
    HouseState next = state;
    const double dt = dt_s / 3600.0;
    if (params.thermal) {
        const HouseThermalParams& th = *params.thermal;
        const double to = forecast.t_out.at(0);
        // Unknowns: four walls then the room, all at the end of the step.
        Eigen::Matrix<double, 5, 5> a = Eigen::Matrix<double, 5, 5>::Zero();
        Eigen::Matrix<double, 5, 1> b;
        for (int i = 0; i < 4; ++i) {
            a(i, i) = th.c_wall[i] / dt + 2.0 / th.r_wall[i];
            a(i, 4) = -1.0 / th.r_wall[i];
            b(i) = th.c_wall[i] / dt * state.t_wall[i] + to / th.r_wall[i] +
                   th.w_wall[i] * forecast.q_rad_wall[i].at(0);
        }
        a(4, 4) = th.c_room / dt + 1.0 / th.r_win;
        for (int i = 0; i < 4; ++i) {
            a(4, 4) += 1.0 / th.r_wall[i];
            a(4, i) = -1.0 / th.r_wall[i];
        }
        b(4) = th.c_room / dt * state.t_room + to / th.r_win + th.w_win * forecast.q_rad_win.at(0) +
               forecast.q_int.at(0) + step.q_hvac;
        const Eigen::Matrix<double, 5, 1> x = a.partialPivLu().solve(b);
        for (int i = 0; i < 4; ++i) next.t_wall[i] = x(i);
        next.t_room = x(4);
    }
    if (params.bes) {
        const BesParams& bp = *params.bes;
        next.e_es = state.e_es + dt * (bp.eta_c * step.p_es_c - step.p_es_d / bp.eta_d);
        next.p_es_c_prev = step.p_es_c;
        next.p_es_d_prev = step.p_es_d;
    }
    next.clock_min = state.clock_min + static_cast<int>(std::lround(dt_s / 60.0));
    return next;
}

}  // namespace bsr::gei

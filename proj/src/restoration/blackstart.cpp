#include "bsr/restoration/blackstart.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <fmt/format.h>

namespace bsr::restoration {

using milp::LinExpr;
using milp::Model;
using milp::VarId;
using network::GridCase;

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kVoltLo = 0.9025;
constexpr double kVoltHi = 1.1025;
constexpr double kDvMax = 0.1025;
constexpr double kBlockFreqLo = 55.0;
constexpr double kBlockFreqHi = 65.0;

// Inner regular octagon of the circle of radius r, one row per face.
void add_octagon(Model& m, const LinExpr& p, const LinExpr& q, double r, const std::string& tag,
                 const std::string& name) {
    const double apothem = r * std::cos(kPi / 8.0);
    for (int f = 0; f < 8; ++f) {
        const double th = f * kPi / 4.0;
        m.add_le(std::cos(th) * p + std::sin(th) * q, apothem, tag, fmt::format("{}[face{}]", name, f));
    }
}

enum class BusRole { Block, Gfm, Tg };

struct BusInfo {
    BusRole role = BusRole::Block;
    int block = -1;
    std::size_t gfm = 0;  // index into vars.gfm
};

}  // namespace

PriorState PriorState::blackout(const GridCase& c, int clock_min) {
    PriorState p;
    p.clock_min = clock_min;
    for (const auto& s : c.switches) p.switch_y[s.id] = 0;
    for (const auto& b : c.blocks) p.block_y[b.id] = 0;
    for (std::size_t u : c.gfm_units()) {
        p.gfm_energy[c.ders[u].id] = c.ders[u].e_init;
        p.gfm_p_total[c.ders[u].id] = 0.0;
    }
    p.tg_status = c.tg ? c.tg->status_at(clock_min) : 0;
    return p;
}

void RestorationConfig::validate() const {
    if (steps < 1) throw RestorationError("horizon needs at least one step");
    if (!(dt_s > 0)) throw RestorationError("time step must be positive");
    if (!(power_factor > 0 && power_factor <= 1)) throw RestorationError("power factor must lie in (0, 1]");
    if (!(tie_break >= 0)) throw RestorationError("tie-break weight must be non-negative");
    bounds.validate();
}

RestorationInputs make_inputs(const GridCase& c, const PriorState& prior,
                              std::map<std::string, gei::FlexibilityEnvelope> envelopes,
                              const RestorationConfig& cfg) {
    RestorationInputs in;
    in.prior = prior;
    in.envelopes = std::move(envelopes);
    const double dt_min = cfg.dt_s / 60.0;
    for (const auto& h : c.houses) {
        if (!h.has_gei) in.load_forecast[h.id] = network::load_forecast(c, h, prior.clock_min, cfg.steps, dt_min);
    }
    for (std::size_t u : c.pv_units()) {
        in.pv_forecast[c.ders[u].id] = network::pv_forecast(c, c.ders[u], prior.clock_min, cfg.steps, dt_min);
    }
    return in;
}

double RestorationSolution::served_energy_kwh() const {
    double e = 0.0;
    for (const auto& [id, series] : served) {
        for (double v : series) e += v * dt_s / 3600.0;
    }
    return e;
}

namespace {

template <typename C>
std::size_t find_id(const C& ids, const std::string& id, const char* what) {
    const auto it = std::find(ids.begin(), ids.end(), id);
    if (it == ids.end()) throw RestorationError(fmt::format("unknown {} '{}'", what, id));
    return static_cast<std::size_t>(it - ids.begin());
}

}  // namespace

std::size_t RestorationSolution::switch_index(const std::string& id) const { return find_id(switch_ids, id, "switch"); }
std::size_t RestorationSolution::block_index(const std::string& id) const { return find_id(block_ids, id, "block"); }
std::size_t RestorationSolution::bus_index(const std::string& id) const { return find_id(bus_ids, id, "bus"); }

RestorationProblem build_restoration_milp(const GridCase& c, const RestorationInputs& inputs,
                                          const RestorationConfig& cfg_in) {
    cfg_in.validate();
    RestorationProblem pb;
    pb.inputs = inputs;
    pb.config = cfg_in;
    RestorationConfig& cfg = pb.config;
    const std::size_t N = cfg.steps;
    if (!cfg.big_m) {
        // 2x feeder peak, raised if needed so that it dominates the largest
        // flow any branch can carry (all non-TG injections at their limits).
        double reach = 0.0;
        for (const auto& [id, f] : inputs.load_forecast) reach += *std::max_element(f.begin(), f.end());
        for (const auto& [id, env] : inputs.envelopes) {
            double w = 0.0;
            for (std::size_t k = 0; k < env.steps(); ++k) w = std::max({w, std::abs(env.lower[k]), std::abs(env.upper[k])});
            reach += w;
        }
        for (const auto& [id, f] : inputs.pv_forecast) reach += *std::max_element(f.begin(), f.end());
        for (std::size_t u : c.gfm_units()) reach += c.ders[u].s_rat;
        cfg.big_m = milp::BigMConfig::for_peak_load(std::max(c.total_peak_kw(), 1.0));
        cfg.big_m->power = std::max(cfg.big_m->power, 1.05 * reach * (1.0 + std::tan(std::acos(cfg.power_factor))));
    }
    cfg.big_m->validate();
    const double dt_h = cfg.dt_h();
    const double M = cfg.big_m->power;
    const double Mf = cfg.big_m->freq;
    const double Mv = cfg.big_m->volt;
    const double eps = cfg.big_m->epsilon;
    const double tan_phi = std::tan(std::acos(cfg.power_factor));
    const PriorState& prior = inputs.prior;
    for (std::size_t u : c.gfm_units()) {
        if (c.bus(c.ders[u].bus).block >= 0) {
            throw RestorationError(fmt::format("grid-forming unit {} must sit on a source bus behind a switch", c.ders[u].id));
        }
    }
    if (c.tg && c.bus(c.tg->bus).block >= 0) {
        throw RestorationError("the TG bus must be a source bus behind a switch");
    }
    pb.tg_y = c.tg ? prior.tg_status : 0;
    const double ytg = pb.tg_y;

    // Input checks.
    std::vector<std::string> problems;
    for (const auto& h : c.houses) {
        if (h.has_gei) {
            const auto it = inputs.envelopes.find(h.id);
            if (it == inputs.envelopes.end()) {
                problems.push_back(fmt::format("missing flexibility envelope for house {}", h.id));
            } else if (it->second.steps() != N || it->second.upper.size() != N) {
                problems.push_back(fmt::format("envelope of house {} has {} steps, horizon is {}", h.id,
                                               it->second.steps(), N));
            } else if (!it->second.well_formed()) {
                problems.push_back(fmt::format("envelope of house {} has lower > upper", h.id));
            }
            pb.gei_houses.push_back(h.id);
        } else {
            const auto it = inputs.load_forecast.find(h.id);
            if (it == inputs.load_forecast.end() || it->second.size() != N) {
                problems.push_back(fmt::format("missing or short load forecast for house {}", h.id));
            }
        }
    }
    for (std::size_t u : c.pv_units()) {
        const auto it = inputs.pv_forecast.find(c.ders[u].id);
        if (it == inputs.pv_forecast.end() || it->second.size() != N) {
            problems.push_back(fmt::format("missing or short PV forecast for {}", c.ders[u].id));
        }
    }
    for (std::size_t u : c.gfm_units()) {
        if (!inputs.prior.gfm_energy.count(c.ders[u].id)) {
            problems.push_back(fmt::format("prior state lacks energy of {}", c.ders[u].id));
        }
    }
    if (!problems.empty()) {
        std::string msg = "restoration inputs rejected:";
        for (const auto& p : problems) msg += "\n  - " + p;
        throw RestorationError(msg);
    }

    Model& m = pb.model;
    RestorationVars& V = pb.vars;
    V.steps = N;
    const std::size_t nb = c.buses.size();
    const std::size_t nl = c.lines.size();
    const std::size_t ns = c.switches.size();
    const std::size_t nblk = c.blocks.size();

    // Bus roles.
    std::vector<BusInfo> info(nb);
    const auto gfm_idx = c.gfm_units();
    for (std::size_t i = 0; i < nb; ++i) {
        info[i].block = c.buses[i].block;
    }
    for (std::size_t g = 0; g < gfm_idx.size(); ++g) {
        const std::size_t bi = c.bus_index(c.ders[gfm_idx[g]].bus);
        info[bi].role = BusRole::Gfm;
        info[bi].gfm = g;
    }
    std::size_t tg_bus = nb;
    if (c.tg) {
        tg_bus = c.bus_index(c.tg->bus);
        info[tg_bus].role = BusRole::Tg;
    }
    auto prior_switch = [&](std::size_t s) {
        const auto it = prior.switch_y.find(c.switches[s].id);
        return it == prior.switch_y.end() ? 0 : it->second;
    };
    auto prior_block = [&](std::size_t b) {
        const auto it = prior.block_y.find(c.blocks[b].id);
        return it == prior.block_y.end() ? 0 : it->second;
    };

    // ---- variables ----
    V.y_sw.assign(ns, std::vector<VarId>(N));
    V.z_sw.assign(ns, std::vector<VarId>(N));
    V.d_sw.assign(ns, std::vector<VarId>(N));
    V.y_bb.assign(nblk, std::vector<VarId>(N));
    V.f_block.assign(nblk, std::vector<VarId>(N));
    V.y_bus.assign(nb, std::vector<VarId>(N));
    V.y_line.assign(nl, std::vector<VarId>(N));
    V.v.assign(nb, std::vector<VarPhase3>(N));
    V.flow_p.assign(nl + ns, std::vector<VarPhase3>(N));
    V.flow_q.assign(nl + ns, std::vector<VarPhase3>(N));
    for (std::size_t k = 0; k < N; ++k) {
        const std::size_t t = k + 1;
        for (std::size_t s = 0; s < ns; ++s) {
            const auto& sw = c.switches[s];
            V.y_sw[s][k] = m.add_binary(fmt::format("y_L[{},{}]", sw.id, t));
            if (sw.kind == network::SwitchKind::Ssw) {
                V.z_sw[s][k] = m.add_binary(fmt::format("z_L[{},{}]", sw.id, t));
                V.d_sw[s][k] = m.add_binary(fmt::format("dy_L[{},{}]", sw.id, t));
            }
        }
        for (std::size_t b = 0; b < nblk; ++b) {
            V.y_bb[b][k] = m.add_binary(fmt::format("y_BB[{},{}]", c.blocks[b].id, t));
            V.f_block[b][k] = m.add_continuous(kBlockFreqLo, kBlockFreqHi, fmt::format("f_blk[{},{}]", c.blocks[b].id, t));
        }
        for (std::size_t i = 0; i < nb; ++i) {
            if (info[i].role == BusRole::Block) {
                V.y_bus[i][k] = m.add_binary(fmt::format("y_B[{},{}]", c.buses[i].id, t));
            }
            for (int p : c.buses[i].phases.list()) {
                V.v[i][k][static_cast<std::size_t>(p)] =
                    m.add_continuous(0.0, kVoltHi, fmt::format("v[{},{},{}]", c.buses[i].id, network::phase_name(p), t));
            }
        }
        for (std::size_t l = 0; l < nl; ++l) {
            V.y_line[l][k] = m.add_continuous(0.0, 1.0, fmt::format("y_line[{},{}]", c.lines[l].id, t));
        }
        for (std::size_t br = 0; br < nl + ns; ++br) {
            const bool is_sw = br >= nl;
            const auto& id = is_sw ? c.switches[br - nl].id : c.lines[br].id;
            const auto phases = is_sw ? c.switches[br - nl].phases : c.lines[br].phases;
            for (int p : phases.list()) {
                const auto pp = static_cast<std::size_t>(p);
                V.flow_p[br][k][pp] = m.add_continuous(-M, M, fmt::format("P[{},{},{}]", id, network::phase_name(p), t));
                V.flow_q[br][k][pp] = m.add_continuous(-M, M, fmt::format("Q[{},{},{}]", id, network::phase_name(p), t));
            }
        }
    }

    // Bus energization as an expression; k < 0 means the prior state.
    auto yb = [&](std::size_t i, long k) -> LinExpr {
        switch (info[i].role) {
            case BusRole::Gfm: return LinExpr(1.0);
            case BusRole::Tg: return LinExpr(ytg);
            case BusRole::Block: break;
        }
        if (k < 0) return LinExpr(static_cast<double>(prior_block(static_cast<std::size_t>(info[i].block))));
        return LinExpr(V.y_bus[i][static_cast<std::size_t>(k)]);
    };
    auto ysw = [&](std::size_t s, long k) -> LinExpr {
        if (k < 0) return LinExpr(static_cast<double>(prior_switch(s)));
        return LinExpr(V.y_sw[s][static_cast<std::size_t>(k)]);
    };
    auto ybb = [&](std::size_t b, long k) -> LinExpr {
        if (k < 0) return LinExpr(static_cast<double>(prior_block(b)));
        return LinExpr(V.y_bb[b][static_cast<std::size_t>(k)]);
    };

    // GFM variables.
    for (std::size_t g = 0; g < gfm_idx.size(); ++g) {
        const auto& u = c.ders[gfm_idx[g]];
        GfmVars gv;
        gv.unit = gfm_idx[g];
        gv.bus = c.bus_index(u.bus);
        const double cap = u.s_rat / 3.0;
        gv.p.resize(N);
        gv.q.resize(N);
        gv.dv.resize(N);
        for (std::size_t k = 0; k < N; ++k) {
            const std::size_t t = k + 1;
            for (int p : c.buses[gv.bus].phases.list()) {
                const auto pp = static_cast<std::size_t>(p);
                const char ph = network::phase_name(p);
                gv.p[k][pp] = m.add_continuous(-cap, cap, fmt::format("P_es[{},{},{}]", u.id, ph, t));
                gv.q[k][pp] = m.add_continuous(-cap, cap, fmt::format("Q_es[{},{},{}]", u.id, ph, t));
                gv.dv[k][pp] = m.add_continuous(-1.0, 1.0, fmt::format("dv[{},{},{}]", u.id, ph, t));
            }
            gv.e.push_back(m.add_continuous(0.0, u.e_cap, fmt::format("E_es[{},{}]", u.id, t)));
            gv.df_qss.push_back(m.add_continuous(-Mf, Mf, fmt::format("df_qss[{},{}]", u.id, t)));
            gv.rocof.push_back(m.add_continuous(-Mf, Mf, fmt::format("rocof[{},{}]", u.id, t)));
            gv.nadir.push_back(m.add_continuous(-Mf, Mf, fmt::format("df_nad[{},{}]", u.id, t)));
            gv.f.push_back(m.add_continuous(kBlockFreqLo, kBlockFreqHi, fmt::format("f[{},{}]", u.id, t)));
            gv.df_star.push_back(m.add_continuous(-Mf, Mf, fmt::format("df_star[{},{}]", u.id, t)));
            gv.delta.push_back(m.add_binary(fmt::format("delta[{},{}]", u.id, t)));
            gv.w.push_back(m.add_continuous(-Mf, Mf, fmt::format("w_sync[{},{}]", u.id, t)));
        }
        V.gfm.push_back(std::move(gv));
    }

    // TG variables.
    if (c.tg) {
        const double ss = c.tg->ss_rat;
        for (std::size_t k = 0; k < N; ++k) {
            VarPhase3 p{}, q{};
            for (int ph : c.buses[tg_bus].phases.list()) {
                const auto pp = static_cast<std::size_t>(ph);
                p[pp] = m.add_continuous(-ss, ss, fmt::format("P_tg[{},{}]", network::phase_name(ph), k + 1));
                q[pp] = m.add_continuous(-ss, ss, fmt::format("Q_tg[{},{}]", network::phase_name(ph), k + 1));
            }
            V.tg_p.push_back(p);
            V.tg_q.push_back(q);
            V.tg_f.push_back(m.add_continuous(0.0, 2.0 * kNominalHz, fmt::format("f_tg[{}]", k + 1)));
        }
    }

    // Frequency seen at a bus.
    auto fbus = [&](std::size_t i, std::size_t k) -> LinExpr {
        switch (info[i].role) {
            case BusRole::Gfm: return LinExpr(V.gfm[info[i].gfm].f[k]);
            case BusRole::Tg: return LinExpr(V.tg_f[k]);
            case BusRole::Block: break;
        }
        return LinExpr(V.f_block[static_cast<std::size_t>(info[i].block)][k]);
    };

    // ---- switching logic ----
    std::vector<std::size_t> ssw;
    for (std::size_t s = 0; s < ns; ++s) {
        if (c.switches[s].kind == network::SwitchKind::Ssw) ssw.push_back(s);
    }
    for (std::size_t s = 0; s < ns; ++s) {
        const auto& sw = c.switches[s];
        const std::size_t bi = c.bus_index(sw.from), bj = c.bus_index(sw.to);
        const bool esw = sw.kind == network::SwitchKind::Esw;
        const bool touches_tg = info[bi].role == BusRole::Tg || info[bj].role == BusRole::Tg;
        // The TG bus sits at 0 Hz while out of service, so its frequency rows
        // need a wider relaxation.
        const double Mfs = touches_tg ? std::max(Mf, kBlockFreqHi + 5.0) : Mf;
        for (std::size_t k = 0; k < N; ++k) {
            const long kk = static_cast<long>(k);
            const std::string at = fmt::format("{},{}", sw.id, k + 1);
            const VarId y = V.y_sw[s][k];
            const LinExpr ends_prev = yb(bi, kk - 1) + yb(bj, kk - 1);
            m.add_le(y, ends_prev, esw ? "eq30" : "eq32", fmt::format("{}[{}]", esw ? "eq30" : "eq32", at));
            m.add_ge(y, ysw(s, kk - 1), "eq38", fmt::format("eq38[{}]", at));
            if (esw) {
                const LinExpr dy = LinExpr(y) - ysw(s, kk - 1);
                m.add_ge(dy, 0.0, "eq31", fmt::format("eq31[{},lo]", at));
                m.add_le(dy, 2.0 - ends_prev, "eq31", fmt::format("eq31[{},hi]", at));
            } else {
                const VarId d = V.d_sw[s][k];
                const VarId z = V.z_sw[s][k];
                m.add_eq(d, LinExpr(y) - ysw(s, kk - 1), "eq33", fmt::format("eq33[{},dy]", at));
                V.aux.push_back({d, LinExpr(y) - ysw(s, kk - 1), false, {}, {}});
                // z = d*yB_i + d*yB_j - d
                LinExpr zdef = -LinExpr(d);
                for (std::size_t end : {bi, bj}) {
                    const LinExpr ye = yb(end, kk - 1);
                    if (ye.empty()) {
                        zdef += ye.constant() * LinExpr(d);
                    } else {
                        const VarId a = ye.terms().front().var;
                        const VarId w = m.linearize_binary_product(
                            d, a, "eq33", fmt::format("eq33[{},{}]", at, c.buses[end].id));
                        V.aux.push_back({w, {}, true, d, a});
                        zdef += LinExpr(w);
                    }
                }
                m.add_eq(z, zdef, "eq33", fmt::format("eq33[{},z]", at));
                for (int p : sw.phases.list()) {
                    const auto pp = static_cast<std::size_t>(p);
                    const char ph = network::phase_name(p);
                    const LinExpr relax = eps + M * (1.0 - LinExpr(z));
                    m.add_le(V.flow_p[nl + s][k][pp], relax, "eq34", fmt::format("eq34[{},{},hi]", at, ph));
                    m.add_ge(V.flow_p[nl + s][k][pp], -relax, "eq34", fmt::format("eq34[{},{},lo]", at, ph));
                    m.add_le(V.flow_q[nl + s][k][pp], relax, "eq35", fmt::format("eq35[{},{},hi]", at, ph));
                    m.add_ge(V.flow_q[nl + s][k][pp], -relax, "eq35", fmt::format("eq35[{},{},lo]", at, ph));
                }
            }
            const LinExpr df = fbus(bi, k) - fbus(bj, k);
            const LinExpr frelax = (esw ? 0.0 : eps) + Mfs * (1.0 - LinExpr(y));
            const char* ftag = esw ? "freq_link" : "eq36";
            m.add_le(df, frelax, ftag, fmt::format("{}[{},hi]", ftag, at));
            m.add_ge(df, -frelax, ftag, fmt::format("{}[{},lo]", ftag, at));

            // Switch as a zero-impedance branch.
            for (int p : sw.phases.list()) {
                const auto pp = static_cast<std::size_t>(p);
                const char ph = network::phase_name(p);
                m.add_le(V.flow_p[nl + s][k][pp], M * LinExpr(y), "eq42", fmt::format("eq42[{},{},hi]", at, ph));
                m.add_ge(V.flow_p[nl + s][k][pp], -M * LinExpr(y), "eq42", fmt::format("eq42[{},{},lo]", at, ph));
                m.add_le(V.flow_q[nl + s][k][pp], M * LinExpr(y), "eq43", fmt::format("eq43[{},{},hi]", at, ph));
                m.add_ge(V.flow_q[nl + s][k][pp], -M * LinExpr(y), "eq43", fmt::format("eq43[{},{},lo]", at, ph));
                const LinExpr dv = LinExpr(V.v[bj][k][pp]) - LinExpr(V.v[bi][k][pp]);
                m.add_le(dv, Mv * (1.0 - LinExpr(y)), "eq47", fmt::format("eq47[{},{}]", at, ph));
                m.add_ge(dv, -Mv * (1.0 - LinExpr(y)), "eq48", fmt::format("eq48[{},{}]", at, ph));
            }
        }
    }

    // ---- bus blocks ----
    for (std::size_t b = 0; b < nblk; ++b) {
        const auto& blk = c.blocks[b];
        const double nw = static_cast<double>(blk.switches.size());
        for (std::size_t k = 0; k < N; ++k) {
            const long kk = static_cast<long>(k);
            const std::string at = fmt::format("{},{}", blk.id, k + 1);
            const VarId y = V.y_bb[b][k];
            LinExpr sum_now, sum_prev;
            for (std::size_t s : blk.switches) {
                m.add_ge(y, V.y_sw[s][k], "eq37", fmt::format("eq37[{},{}]", at, c.switches[s].id));
                sum_now += LinExpr(V.y_sw[s][k]);
                sum_prev += ysw(s, kk - 1);
            }
            m.add_le(y, sum_now, "eq37", fmt::format("eq37[{},any]", at));
            m.add_ge(y, ybb(b, kk - 1), "eq38", fmt::format("eq38[{}]", at));
            m.add_le(sum_now - sum_prev, nw * ybb(b, kk - 1) + 1.0, "eq41", fmt::format("eq41[{}]", at));
            for (std::size_t l : blk.lines) {
                m.add_eq(V.y_line[l][k], y, "eq39", fmt::format("eq39[{},{}]", c.lines[l].id, k + 1));
                V.aux.push_back({V.y_line[l][k], LinExpr(y), false, {}, {}});
            }
            for (const auto& bus : blk.buses) {
                const std::size_t i = c.bus_index(bus);
                m.add_eq(V.y_bus[i][k], y, "eq40", fmt::format("eq40[{},{}]", bus, k + 1));
                V.aux.push_back({V.y_bus[i][k], LinExpr(y), false, {}, {}});
            }
        }
    }

    // ---- lines ----
    const double drop = 2.0 / c.base.kva_per_phase;
    for (std::size_t l = 0; l < nl; ++l) {
        const auto& ln = c.lines[l];
        const std::size_t bi = c.bus_index(ln.from), bj = c.bus_index(ln.to);
        const auto ph = ln.phases.list();
        for (std::size_t k = 0; k < N; ++k) {
            const VarId y = V.y_line[l][k];
            for (int p : ph) {
                const auto pp = static_cast<std::size_t>(p);
                const char pn = network::phase_name(p);
                const std::string at = fmt::format("{},{},{}", ln.id, pn, k + 1);
                m.add_le(V.flow_p[l][k][pp], M * LinExpr(y), "eq42", fmt::format("eq42[{},hi]", at));
                m.add_ge(V.flow_p[l][k][pp], -M * LinExpr(y), "eq42", fmt::format("eq42[{},lo]", at));
                m.add_le(V.flow_q[l][k][pp], M * LinExpr(y), "eq43", fmt::format("eq43[{},hi]", at));
                m.add_ge(V.flow_q[l][k][pp], -M * LinExpr(y), "eq43", fmt::format("eq43[{},lo]", at));
                LinExpr dv = LinExpr(V.v[bj][k][pp]) - LinExpr(V.v[bi][k][pp]);
                for (int q : ph) {
                    const auto qq = static_cast<std::size_t>(q);
                    dv += drop * ln.r_bar[pp][qq] * LinExpr(V.flow_p[l][k][qq]);
                    dv += drop * ln.x_bar[pp][qq] * LinExpr(V.flow_q[l][k][qq]);
                }
                m.add_le(dv, Mv * (1.0 - LinExpr(y)), "eq47", fmt::format("eq47[{}]", at));
                m.add_ge(dv, -Mv * (1.0 - LinExpr(y)), "eq48", fmt::format("eq48[{}]", at));
            }
        }
    }

    // ---- injections per bus/phase ----
    std::vector<std::vector<Phase3>> fixed_load(nb, std::vector<Phase3>(N, Phase3{}));
    // Controllable consumption per bus and step: GEI dispatch and flexible loads.
    std::vector<std::vector<std::vector<std::pair<VarId, int>>>> gei_at(nb, std::vector<std::vector<std::pair<VarId, int>>>(N));
    LinExpr served;
    for (const auto& h : c.houses) {
        const std::size_t i = c.bus_index(h.bus);
        if (h.has_gei) {
            const auto& env = inputs.envelopes.at(h.id);
            auto& vars = V.dispatch[h.id];
            for (std::size_t k = 0; k < N; ++k) {
                const VarId p = m.add_continuous(-M, M, fmt::format("p_dis[{},{}]", h.id, k + 1));
                vars.push_back(p);
                const LinExpr y = yb(i, static_cast<long>(k));
                m.add_ge(p, env.lower[k] * y, "eqGEI", fmt::format("eqGEI[{},{},lo]", h.id, k + 1));
                m.add_le(p, env.upper[k] * y, "eqGEI", fmt::format("eqGEI[{},{},hi]", h.id, k + 1));
                gei_at[i][k].push_back({p, h.phase});
                served += dt_h * LinExpr(p);
            }
        } else if (cfg.non_gei_load == LoadModel::Flexible) {
            const auto& f = inputs.load_forecast.at(h.id);
            auto& vars = V.load[h.id];
            for (std::size_t k = 0; k < N; ++k) {
                const double cap = std::max(0.0, f[k]);
                const VarId p = m.add_continuous(0.0, cap, fmt::format("P_D[{},{}]", h.id, k + 1));
                vars.push_back(p);
                m.add_le(p, cap * yb(i, static_cast<long>(k)), "load_cap", fmt::format("load_cap[{},{}]", h.id, k + 1));
                gei_at[i][k].push_back({p, h.phase});
                served += dt_h * LinExpr(p);
            }
        } else {
            const auto& f = inputs.load_forecast.at(h.id);
            for (std::size_t k = 0; k < N; ++k) {
                fixed_load[i][k][static_cast<std::size_t>(h.phase)] += f[k];
                served += (dt_h * f[k]) * yb(i, static_cast<long>(k));
            }
        }
    }

    std::vector<std::vector<std::pair<std::size_t, std::size_t>>> pv_at(nb);  // (pv slot, case index)
    for (std::size_t u : c.pv_units()) {
        const auto& d = c.ders[u];
        const std::size_t i = c.bus_index(d.bus);
        const auto ph = c.buses[i].phases.list();
        const double share = 1.0 / static_cast<double>(ph.size());
        const auto& fc = inputs.pv_forecast.at(d.id);
        std::vector<VarPhase3> series(N);
        for (std::size_t k = 0; k < N; ++k) {
            for (int p : ph) {
                const auto pp = static_cast<std::size_t>(p);
                const double cap = std::max(0.0, fc[k] * share);
                series[k][pp] = m.add_continuous(0.0, cap, fmt::format("P_pv[{},{},{}]", d.id, network::phase_name(p), k + 1));
                m.add_le(series[k][pp], cap * yb(i, static_cast<long>(k)), "gfl",
                         fmt::format("gfl[{},{},{}]", d.id, network::phase_name(p), k + 1));
            }
        }
        pv_at[i].push_back({V.pv.size(), u});
        V.pv_units.push_back(u);
        V.pv.push_back(std::move(series));
    }

    for (std::size_t i = 0; i < nb; ++i) {
        const auto& bus = c.buses[i];
        for (std::size_t k = 0; k < N; ++k) {
            const LinExpr y = yb(i, static_cast<long>(k));
            for (int p : bus.phases.list()) {
                const auto pp = static_cast<std::size_t>(p);
                const char pn = network::phase_name(p);
                const std::string at = fmt::format("{},{},{}", bus.id, pn, k + 1);
                LinExpr bal_p, bal_q;  // inflow - outflow + generation - load = 0
                for (std::size_t br = 0; br < nl + ns; ++br) {
                    const bool is_sw = br >= nl;
                    const std::string& from = is_sw ? c.switches[br - nl].from : c.lines[br].from;
                    const std::string& to = is_sw ? c.switches[br - nl].to : c.lines[br].to;
                    if (!V.flow_p[br][k][pp].valid()) continue;
                    if (to == bus.id) {
                        bal_p += LinExpr(V.flow_p[br][k][pp]);
                        bal_q += LinExpr(V.flow_q[br][k][pp]);
                    } else if (from == bus.id) {
                        bal_p -= LinExpr(V.flow_p[br][k][pp]);
                        bal_q -= LinExpr(V.flow_q[br][k][pp]);
                    }
                }
                if (info[i].role == BusRole::Gfm) {
                    const auto& gv = V.gfm[info[i].gfm];
                    bal_p += LinExpr(gv.p[k][pp]);
                    bal_q += LinExpr(gv.q[k][pp]);
                }
                if (info[i].role == BusRole::Tg) {
                    bal_p += LinExpr(V.tg_p[k][pp]);
                    bal_q += LinExpr(V.tg_q[k][pp]);
                }
                for (const auto& [slot, u] : pv_at[i]) bal_p += LinExpr(V.pv[slot][k][pp]);
                const double fl = fixed_load[i][k][pp];
                bal_p -= fl * y;
                bal_q -= (tan_phi * fl) * y;
                for (const auto& [var, hp] : gei_at[i][k]) {
                    if (hp != p) continue;
                    bal_p -= LinExpr(var);
                    bal_q -= tan_phi * LinExpr(var);
                }
                m.add_eq(bal_p, 0.0, "eq44", fmt::format("eq44[{}]", at));
                m.add_eq(bal_q, 0.0, "eq45", fmt::format("eq45[{}]", at));
                m.add_ge(V.v[i][k][pp], kVoltLo * y, "eq46", fmt::format("eq46[{},lo]", at));
                m.add_le(V.v[i][k][pp], kVoltHi * y, "eq46", fmt::format("eq46[{},hi]", at));
            }
        }
    }

    // ---- grid-forming units ----
    for (auto& gv : V.gfm) {
        const auto& u = c.ders[gv.unit];
        const double cap = u.s_rat / 3.0;
        const double droop = kNominalHz / (u.s_rat * (u.d + u.k_f));
        const double rocof_c = kNominalHz / (2.0 * u.s_rat * u.h);
        const double nadir_c = droop * (1.0 + u.gamma);
        const auto ph = c.buses[gv.bus].phases.list();
        const double e0 = prior.gfm_energy.at(u.id);
        const auto pit = prior.gfm_p_total.find(u.id);
        const double p0 = pit == prior.gfm_p_total.end() ? 0.0 : pit->second;
        for (std::size_t k = 0; k < N; ++k) {
            const std::string at = fmt::format("{},{}", u.id, k + 1);
            LinExpr ptot, ptot_prev(k == 0 ? p0 : 0.0);
            for (int p : ph) {
                const auto pp = static_cast<std::size_t>(p);
                const char pn = network::phase_name(p);
                ptot += LinExpr(gv.p[k][pp]);
                if (k > 0) ptot_prev += LinExpr(gv.p[k - 1][pp]);
                m.add_eq(LinExpr(V.v[gv.bus][k][pp]) - LinExpr(gv.dv[k][pp]), 1.0, "eq18",
                         fmt::format("eq18[{},{}]", at, pn));
                m.add_le(gv.dv[k][pp], kDvMax, "eq20", fmt::format("eq20[{},{},hi]", at, pn));
                m.add_ge(gv.dv[k][pp], -kDvMax, "eq20", fmt::format("eq20[{},{},lo]", at, pn));
                add_octagon(m, gv.p[k][pp], gv.q[k][pp], cap, "eq23", fmt::format("eq23[{},{}]", at, pn));
            }
            const LinExpr dp = ptot - ptot_prev;
            m.add_eq(LinExpr(gv.df_qss[k]) - droop * dp, 0.0, "eq19", fmt::format("eq19[{}]", at));
            m.add_le(gv.df_qss[k], cfg.bounds.qss, "eq21", fmt::format("eq21[{},hi]", at));
            m.add_ge(gv.df_qss[k], -cfg.bounds.qss, "eq21", fmt::format("eq21[{},lo]", at));
            const LinExpr e_prev = k == 0 ? LinExpr(e0) : LinExpr(gv.e[k - 1]);
            m.add_eq(LinExpr(gv.e[k]) - e_prev + dt_h * ptot, 0.0, "eq22", fmt::format("eq22[{}]", at));
            m.add_le(gv.e[k], u.e_cap, "eq22", fmt::format("eq22[{},cap]", at));
            m.add_ge(gv.e[k], 0.0, "eq22", fmt::format("eq22[{},empty]", at));
            m.add_eq(LinExpr(gv.rocof[k]) - rocof_c * dp, 0.0, "eq24", fmt::format("eq24[{}]", at));
            m.add_eq(LinExpr(gv.nadir[k]) - nadir_c * dp, 0.0, "eq25", fmt::format("eq25[{}]", at));
            m.add_le(gv.rocof[k], cfg.bounds.rocof, "eq26", fmt::format("eq26[{},hi]", at));
            m.add_ge(gv.rocof[k], -cfg.bounds.rocof, "eq26", fmt::format("eq26[{},lo]", at));
            m.add_le(gv.nadir[k], cfg.bounds.nadir, "eq27", fmt::format("eq27[{},hi]", at));
            m.add_ge(gv.nadir[k], -cfg.bounds.nadir, "eq27", fmt::format("eq27[{},lo]", at));

            // f = f*(1 - P/(S(D+k_f))) + delta*df*, product by big-M on the df* bound.
            const double Ms = cfg.bounds.sync;
            const VarId w = gv.w[k], dl = gv.delta[k], ds = gv.df_star[k];
            m.add_eq(LinExpr(gv.f[k]) + droop * ptot - LinExpr(w), kNominalHz, "eq28", fmt::format("eq28[{}]", at));
            m.add_le(w, Ms * LinExpr(dl), "eq28", fmt::format("eq28[{},w1]", at));
            m.add_ge(w, -Ms * LinExpr(dl), "eq28", fmt::format("eq28[{},w2]", at));
            m.add_le(LinExpr(w) - LinExpr(ds), Ms * (1.0 - LinExpr(dl)), "eq28", fmt::format("eq28[{},w3]", at));
            m.add_ge(LinExpr(w) - LinExpr(ds), -Ms * (1.0 - LinExpr(dl)), "eq28", fmt::format("eq28[{},w4]", at));
            LinExpr gate;
            for (std::size_t s : ssw) gate += LinExpr(V.y_sw[s][k]);
            m.add_le(dl, gate, "eq28", fmt::format("eq28[{},gate]", at));
            V.aux.push_back({w, {}, true, dl, ds});
            m.add_le(ds, cfg.bounds.sync, "eq29", fmt::format("eq29[{},hi]", at));
            m.add_ge(ds, -cfg.bounds.sync, "eq29", fmt::format("eq29[{},lo]", at));
        }
    }

    // ---- transmission grid ----
    if (c.tg) {
        const double ss = c.tg->ss_rat;
        const auto ph = c.buses[tg_bus].phases.list();
        for (std::size_t k = 0; k < N; ++k) {
            LinExpr psum, qsum;
            for (int p : ph) {
                const auto pp = static_cast<std::size_t>(p);
                const char pn = network::phase_name(p);
                const std::string at = fmt::format("{},{}", pn, k + 1);
                psum += LinExpr(V.tg_p[k][pp]);
                qsum += LinExpr(V.tg_q[k][pp]);
                m.add_le(V.tg_p[k][pp], ss * ytg, "eq49", fmt::format("eq49[P,{},hi]", at));
                m.add_ge(V.tg_p[k][pp], -ss * ytg, "eq49", fmt::format("eq49[P,{},lo]", at));
                m.add_le(V.tg_q[k][pp], ss * ytg, "eq49", fmt::format("eq49[Q,{},hi]", at));
                m.add_ge(V.tg_q[k][pp], -ss * ytg, "eq49", fmt::format("eq49[Q,{},lo]", at));
                m.add_eq(V.v[tg_bus][k][pp], ytg, "eq50", fmt::format("eq50[{}]", at));
            }
            add_octagon(m, psum, qsum, ss, "eq49", fmt::format("eq49[{}]", k + 1));
            m.add_eq(V.tg_f[k], kNominalHz * ytg, "eq51", fmt::format("eq51[{}]", k + 1));
        }
    }

    // ---- objective ----
    pb.served_energy = served;
    LinExpr tie;
    for (std::size_t s = 0; s < ns; ++s) {
        for (std::size_t k = 0; k < N; ++k) tie += LinExpr(V.y_sw[s][k]);
    }
    pb.objective = served + cfg.tie_break * tie;
    return pb;
}

RestorationSolution extract_solution(const GridCase& c, const RestorationProblem& pb, const milp::SolveResult& r) {
    if (!r.has_values()) throw RestorationError("no solution values to extract");
    const RestorationVars& V = pb.vars;
    const std::size_t N = V.steps;
    RestorationSolution s;
    s.status = std::string(milp::to_string(r.status));
    s.gap = r.gap;
    s.steps = N;
    s.dt_s = pb.config.dt_s;
    s.start_min = pb.inputs.prior.clock_min;
    s.objective = r.value(pb.served_energy);
    s.objective_total = r.value(pb.objective);
    auto bin = [&](VarId v) { return r.is_set(v) ? 1 : 0; };
    auto val = [&](VarId v) { return v.valid() ? r.value(v) : 0.0; };
    auto val3 = [&](const VarPhase3& v) { return Phase3{val(v[0]), val(v[1]), val(v[2])}; };

    for (std::size_t sw = 0; sw < c.switches.size(); ++sw) {
        s.switch_ids.push_back(c.switches[sw].id);
        std::vector<int> y, z;
        for (std::size_t k = 0; k < N; ++k) {
            y.push_back(bin(V.y_sw[sw][k]));
            z.push_back(V.z_sw[sw][k].valid() ? bin(V.z_sw[sw][k]) : 0);
        }
        s.y_switch.push_back(std::move(y));
        s.z_switch.push_back(std::move(z));
    }
    for (std::size_t b = 0; b < c.blocks.size(); ++b) {
        s.block_ids.push_back(c.blocks[b].id);
        std::vector<int> y;
        std::vector<double> f;
        for (std::size_t k = 0; k < N; ++k) {
            y.push_back(bin(V.y_bb[b][k]));
            f.push_back(val(V.f_block[b][k]));
        }
        s.y_block.push_back(std::move(y));
        s.f_block.push_back(std::move(f));
    }
    for (std::size_t i = 0; i < c.buses.size(); ++i) {
        const auto& bus = c.buses[i];
        s.bus_ids.push_back(bus.id);
        std::vector<int> y;
        std::vector<Phase3> v;
        for (std::size_t k = 0; k < N; ++k) {
            if (bus.block >= 0) {
                y.push_back(s.y_block[static_cast<std::size_t>(bus.block)][k]);
            } else if (c.tg && bus.id == c.tg->bus) {
                y.push_back(pb.tg_y);
            } else {
                y.push_back(1);
            }
            v.push_back(val3(V.v[i][k]));
        }
        s.y_bus.push_back(std::move(y));
        s.v.push_back(std::move(v));
    }
    const auto& prior = pb.inputs.prior;
    for (const auto& gv : V.gfm) {
        const auto& u = c.ders[gv.unit];
        GfmTrajectory g;
        g.unit = u.id;
        const auto pit = prior.gfm_p_total.find(u.id);
        double prev = pit == prior.gfm_p_total.end() ? 0.0 : pit->second;
        for (std::size_t k = 0; k < N; ++k) {
            g.p.push_back(val3(gv.p[k]));
            g.q.push_back(val3(gv.q[k]));
            g.dv.push_back(val3(gv.dv[k]));
            g.e.push_back(val(gv.e[k]));
            const double tot = g.p.back()[0] + g.p.back()[1] + g.p.back()[2];
            g.dp.push_back(tot - prev);
            prev = tot;
            g.df_qss.push_back(val(gv.df_qss[k]));
            g.rocof.push_back(val(gv.rocof[k]));
            g.nadir.push_back(val(gv.nadir[k]));
            g.f.push_back(val(gv.f[k]));
            g.df_star.push_back(val(gv.df_star[k]));
            g.delta.push_back(bin(gv.delta[k]));
        }
        s.gfm.push_back(std::move(g));
    }
    if (c.tg) {
        const std::size_t tb = c.bus_index(c.tg->bus);
        for (std::size_t k = 0; k < N; ++k) {
            s.tg.y.push_back(pb.tg_y);
            s.tg.p.push_back(val3(V.tg_p[k]));
            s.tg.q.push_back(val3(V.tg_q[k]));
            s.tg.v.push_back(val3(V.v[tb][k]));
            s.tg.f.push_back(val(V.tg_f[k]));
        }
    }
    const std::size_t nl = c.lines.size();
    for (std::size_t br = 0; br < nl + c.switches.size(); ++br) {
        BranchFlow f;
        f.is_switch = br >= nl;
        f.id = f.is_switch ? c.switches[br - nl].id : c.lines[br].id;
        for (std::size_t k = 0; k < N; ++k) {
            f.p.push_back(val3(V.flow_p[br][k]));
            f.q.push_back(val3(V.flow_q[br][k]));
        }
        s.flows.push_back(std::move(f));
    }
    for (const auto& [id, vars] : V.dispatch) {
        std::vector<double> d;
        for (VarId v : vars) d.push_back(val(v));
        s.dispatch[id] = d;
    }
    for (const auto& h : c.houses) {
        if (h.has_gei) {
            s.served[h.id] = s.dispatch.at(h.id);
        } else if (const auto it = V.load.find(h.id); it != V.load.end()) {
            std::vector<double> d;
            for (VarId v : it->second) d.push_back(val(v));
            s.served[h.id] = d;
        } else {
            const auto& f = pb.inputs.load_forecast.at(h.id);
            const std::size_t bi = s.bus_index(h.bus);
            std::vector<double> d;
            for (std::size_t k = 0; k < N; ++k) d.push_back(f[k] * s.y_bus[bi][k]);
            s.served[h.id] = d;
        }
    }
    for (std::size_t slot = 0; slot < V.pv.size(); ++slot) {
        std::vector<Phase3> series;
        for (std::size_t k = 0; k < N; ++k) series.push_back(val3(V.pv[slot][k]));
        s.pv[c.ders[V.pv_units[slot]].id] = series;
    }
    return s;
}

RestorationSolution solve_restoration(const GridCase& c, const RestorationProblem& pb, const milp::SolveLimits& limits) {
    const milp::SolveResult r = milp::solve(pb.model, pb.objective, milp::Direction::Maximize, limits);
    if (!r.has_values()) {
        throw RestorationInfeasible(fmt::format("restoration MILP at {} returned {}",
                                                network::format_clock(pb.inputs.prior.clock_min),
                                                milp::to_string(r.status)),
                                    r.status);
    }
    return extract_solution(c, pb, r);
}

RestorationProblem hold_switches(const GridCase& c, const RestorationProblem& p) {
    RestorationProblem h = p;
    for (std::size_t s = 0; s < c.switches.size(); ++s) {
        const auto it = p.inputs.prior.switch_y.find(c.switches[s].id);
        const double y = it == p.inputs.prior.switch_y.end() ? 0.0 : it->second;
        for (VarId v : h.vars.y_sw[s]) h.model.fix(v, y);
    }
    return h;
}

namespace {

template <class T>
void shift_series(std::vector<T>& v) {
    if (v.size() < 2) return;
    v.erase(v.begin());
    v.push_back(v.back());
}

template <class T>
void shift_each(std::vector<std::vector<T>>& vv) {
    for (auto& v : vv) shift_series(v);
}

}  // namespace

RestorationSolution shift_solution(const RestorationSolution& s) {
    RestorationSolution o = s;
    o.status = "shifted";
    o.start_min = s.timestamp(0);
    shift_each(o.y_switch);
    shift_each(o.z_switch);
    for (auto& z : o.z_switch) {
        if (!z.empty()) z.back() = 0;
    }
    shift_each(o.y_block);
    shift_each(o.f_block);
    shift_each(o.y_bus);
    shift_each(o.v);
    for (auto& g : o.gfm) {
        shift_series(g.p);
        shift_series(g.q);
        shift_series(g.dv);
        shift_series(g.e);
        shift_series(g.dp);
        if (!g.dp.empty()) g.dp.back() = 0.0;
        shift_series(g.df_qss);
        shift_series(g.rocof);
        shift_series(g.nadir);
        shift_series(g.f);
        shift_series(g.df_star);
        shift_series(g.delta);
    }
    shift_series(o.tg.y);
    shift_series(o.tg.p);
    shift_series(o.tg.q);
    shift_series(o.tg.v);
    shift_series(o.tg.f);
    for (auto& b : o.flows) {
        shift_series(b.p);
        shift_series(b.q);
    }
    for (auto& [id, v] : o.dispatch) shift_series(v);
    for (auto& [id, v] : o.served) shift_series(v);
    for (auto& [id, v] : o.pv) shift_series(v);
    o.objective = o.served_energy_kwh();
    o.objective_total = o.objective;
    return o;
}

std::vector<double> solution_values(const GridCase& c, const RestorationProblem& pb, const RestorationSolution& s) {
    const RestorationVars& V = pb.vars;
    const std::size_t N = V.steps;
    if (s.steps != N) throw RestorationError("solution horizon does not match the problem");
    auto shape = [&](const auto& rows, std::size_t n, const char* what) {
        if (rows.size() != n) throw RestorationError(fmt::format("solution has {} {} rows, expected {}", rows.size(), what, n));
        for (const auto& r : rows) {
            if (r.size() != N) throw RestorationError(fmt::format("solution {} row has {} steps, expected {}", what, r.size(), N));
        }
    };
    shape(s.y_switch, s.switch_ids.size(), "switch");
    shape(s.z_switch, s.switch_ids.size(), "switch sync");
    shape(s.y_block, s.block_ids.size(), "block");
    shape(s.f_block, s.block_ids.size(), "block frequency");
    shape(s.y_bus, s.bus_ids.size(), "bus");
    shape(s.v, s.bus_ids.size(), "voltage");
    for (const auto& g : s.gfm) {
        for (const auto* row : {&g.e, &g.dp, &g.df_qss, &g.rocof, &g.nadir, &g.f, &g.df_star, &g.delta}) {
            if (row->size() != N) throw RestorationError("grid-forming trajectory " + g.unit + " has the wrong length");
        }
        if (g.p.size() != N || g.q.size() != N || g.dv.size() != N) {
            throw RestorationError("grid-forming trajectory " + g.unit + " has the wrong length");
        }
    }
    for (const auto& f : s.flows) {
        if (f.p.size() != N || f.q.size() != N) throw RestorationError("flow " + f.id + " has the wrong length");
    }
    std::vector<double> x(pb.model.num_vars(), std::numeric_limits<double>::quiet_NaN());
    auto put = [&](VarId v, double value) {
        if (v.valid()) x[v.index()] = value;
    };
    auto put3 = [&](const VarPhase3& v, const Phase3& value) {
        for (std::size_t p = 0; p < 3; ++p) put(v[p], value[p]);
    };
    for (std::size_t sw = 0; sw < c.switches.size(); ++sw) {
        const std::size_t si = s.switch_index(c.switches[sw].id);
        for (std::size_t k = 0; k < N; ++k) {
            put(V.y_sw[sw][k], s.y_switch[si][k]);
            put(V.z_sw[sw][k], s.z_switch[si][k]);
        }
    }
    for (std::size_t b = 0; b < c.blocks.size(); ++b) {
        const std::size_t bi = s.block_index(c.blocks[b].id);
        for (std::size_t k = 0; k < N; ++k) {
            put(V.y_bb[b][k], s.y_block[bi][k]);
            put(V.f_block[b][k], s.f_block[bi][k]);
        }
    }
    for (std::size_t i = 0; i < c.buses.size(); ++i) {
        const std::size_t bi = s.bus_index(c.buses[i].id);
        for (std::size_t k = 0; k < N; ++k) put3(V.v[i][k], s.v[bi][k]);
    }
    for (const auto& gv : V.gfm) {
        const auto& id = c.ders[gv.unit].id;
        const auto it = std::find_if(s.gfm.begin(), s.gfm.end(), [&](const GfmTrajectory& g) { return g.unit == id; });
        if (it == s.gfm.end()) throw RestorationError("solution lacks grid-forming unit " + id);
        for (std::size_t k = 0; k < N; ++k) {
            put3(gv.p[k], it->p[k]);
            put3(gv.q[k], it->q[k]);
            put3(gv.dv[k], it->dv[k]);
            put(gv.e[k], it->e[k]);
            put(gv.df_qss[k], it->df_qss[k]);
            put(gv.rocof[k], it->rocof[k]);
            put(gv.nadir[k], it->nadir[k]);
            put(gv.f[k], it->f[k]);
            put(gv.df_star[k], it->df_star[k]);
            put(gv.delta[k], it->delta[k]);
        }
    }
    for (std::size_t k = 0; k < V.tg_f.size(); ++k) {
        put3(V.tg_p[k], s.tg.p.at(k));
        put3(V.tg_q[k], s.tg.q.at(k));
        put(V.tg_f[k], s.tg.f.at(k));
    }
    const std::size_t nl = c.lines.size();
    for (std::size_t br = 0; br < nl + c.switches.size(); ++br) {
        const std::string& id = br < nl ? c.lines[br].id : c.switches[br - nl].id;
        const auto it = std::find_if(s.flows.begin(), s.flows.end(),
                                     [&](const BranchFlow& f) { return f.id == id && f.is_switch == (br >= nl); });
        if (it == s.flows.end()) throw RestorationError("solution lacks flows of branch " + id);
        for (std::size_t k = 0; k < N; ++k) {
            put3(V.flow_p[br][k], it->p[k]);
            put3(V.flow_q[br][k], it->q[k]);
        }
    }
    for (const auto& [id, vars] : V.dispatch) {
        const auto& d = s.dispatch.at(id);
        for (std::size_t k = 0; k < N; ++k) put(vars[k], d[k]);
    }
    for (const auto& [id, vars] : V.load) {
        const auto& d = s.served.at(id);
        for (std::size_t k = 0; k < N; ++k) put(vars[k], d[k]);
    }
    for (std::size_t slot = 0; slot < V.pv.size(); ++slot) {
        const auto& series = s.pv.at(c.ders[V.pv_units[slot]].id);
        for (std::size_t k = 0; k < N; ++k) put3(V.pv[slot][k], series[k]);
    }
    // Definitions may refer to each other in any order; sweep until settled.
    for (bool changed = true; changed;) {
        changed = false;
        for (const AuxDef& a : V.aux) {
            if (!std::isnan(x[a.out.index()])) continue;
            const double v = a.product ? x[a.a.index()] * x[a.b.index()] : a.expr.evaluate(x);
            if (!std::isnan(v)) {
                x[a.out.index()] = v;
                changed = true;
            }
        }
    }
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (std::isnan(x[i])) {
            throw RestorationError("typed solution does not determine variable " + pb.model.vars()[i].name);
        }
    }
    return x;
}

bool connection_status(const GridCase& c, const std::string& house_id, const RestorationSolution& s) {
    const auto& h = c.house(house_id);
    if (s.steps == 0) return false;
    return s.y_bus[s.bus_index(h.bus)][0] == 1;
}

PriorState advance_prior(const GridCase& c, const PriorState& prior, const RestorationSolution& s) {
    PriorState next = prior;
    next.clock_min = s.timestamp(0);
    for (std::size_t i = 0; i < s.switch_ids.size(); ++i) next.switch_y[s.switch_ids[i]] = s.y_switch[i][0];
    for (std::size_t b = 0; b < s.block_ids.size(); ++b) next.block_y[s.block_ids[b]] = s.y_block[b][0];
    for (const auto& g : s.gfm) {
        next.gfm_energy[g.unit] = g.e[0];
        next.gfm_p_total[g.unit] = g.p[0][0] + g.p[0][1] + g.p[0][2];
    }
    next.tg_status = c.tg ? c.tg->status_at(next.clock_min) : 0;
    return next;
}

}  // namespace bsr::restoration

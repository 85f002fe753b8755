#include "bsr/restoration/verify.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

namespace bsr::restoration {

bool VerificationReport::passed() const { return errors.empty() && failures() == 0; }

std::size_t VerificationReport::failures() const {
    std::size_t n = 0;
    for (const auto& c : checks) n += c.failures;
    return n;
}

const milp::TagCheck* VerificationReport::find(const std::string& tag) const {
    for (const auto& c : checks) {
        if (c.tag == tag) return &c;
    }
    return nullptr;
}

nlohmann::json VerificationReport::to_json() const {
    nlohmann::json j;
    j["tolerance"] = tolerance;
    j["passed"] = passed();
    j["errors"] = errors;
    j["tags"] = nlohmann::json::object();
    for (const auto& c : checks) {
        j["tags"][c.tag] = {{"rows", c.rows},
                            {"failures", c.failures},
                            {"worst_violation", c.worst_violation},
                            {"worst_row", c.worst_row},
                            {"pass", c.failures == 0}};
    }
    return j;
}

std::string VerificationReport::table() const {
    std::string out = fmt::format("{:<18} {:>8} {:>8} {:>14}  {}\n", "tag", "rows", "fail", "worst", "where");
    for (const auto& c : checks) {
        out += fmt::format("{:<18} {:>8} {:>8} {:>14.6g}  {}\n", c.tag, c.rows, c.failures, c.worst_violation,
                           c.failures ? c.worst_row : "");
    }
    for (const auto& e : errors) out += "error: " + e + "\n";
    out += passed() ? "verification passed\n" : "verification FAILED\n";
    return out;
}

namespace {

class Family {
public:
    Family(std::string tag, double tol) : tol_(tol) { c_.tag = std::move(tag); }
    void check(double violation, const std::string& where) {
        ++c_.rows;
        if (std::isnan(violation)) violation = std::numeric_limits<double>::infinity();
        if (violation > tol_) ++c_.failures;
        if (violation > c_.worst_violation) {
            c_.worst_violation = violation;
            c_.worst_row = where;
        }
    }
    milp::TagCheck done() const { return c_; }

private:
    milp::TagCheck c_;
    double tol_;
};

}  // namespace

VerificationReport verify_solution(const network::GridCase& c, const RestorationInputs& inputs,
                                   const RestorationConfig& cfg, const RestorationSolution& s, double tol) {
    VerificationReport rep;
    rep.tolerance = tol;
    RestorationProblem pb;
    std::vector<double> x;
    try {
        pb = build_restoration_milp(c, inputs, cfg);
        x = solution_values(c, pb, s);
    } catch (const std::exception& e) {
        rep.errors.push_back(e.what());
        return rep;
    }
    rep.checks = milp::check_constraints_by_tag(pb.model, x, tol);

    const std::size_t N = s.steps;
    // Binary values and aliases.
    Family binaries("binary", tol);
    for (std::size_t i = 0; i < s.switch_ids.size(); ++i) {
        for (std::size_t k = 0; k < N; ++k) {
            for (int v : {s.y_switch[i][k], s.z_switch[i][k]}) {
                binaries.check(v == 0 || v == 1 ? 0.0 : 1.0, fmt::format("{},{}", s.switch_ids[i], k + 1));
            }
        }
    }
    for (std::size_t i = 0; i < c.buses.size(); ++i) {
        const auto& bus = c.buses[i];
        const std::size_t si = s.bus_index(bus.id);
        for (std::size_t k = 0; k < N; ++k) {
            int expect = 1;
            if (bus.block >= 0) {
                expect = s.y_block[s.block_index(c.blocks[static_cast<std::size_t>(bus.block)].id)][k];
            } else if (c.tg && bus.id == c.tg->bus) {
                expect = pb.tg_y;
            }
            binaries.check(s.y_bus[si][k] == expect ? 0.0 : 1.0, fmt::format("y_B[{},{}]", bus.id, k + 1));
        }
    }
    rep.checks.push_back(binaries.done());

    // Exact capacity circle and frequencies recomputed from power.
    Family circle("capacity_circle", tol);
    Family freq("freq_recompute", tol);
    for (const auto& g : s.gfm) {
        const auto it = std::find_if(c.ders.begin(), c.ders.end(), [&](const network::DerUnit& d) { return d.id == g.unit; });
        if (it == c.ders.end()) {
            rep.errors.push_back("unknown grid-forming unit " + g.unit);
            continue;
        }
        const auto pit = inputs.prior.gfm_p_total.find(g.unit);
        double prev = pit == inputs.prior.gfm_p_total.end() ? 0.0 : pit->second;
        for (std::size_t k = 0; k < N; ++k) {
            for (std::size_t p = 0; p < 3; ++p) {
                const double mag = std::hypot(g.p[k][p], g.q[k][p]);
                circle.check(mag - it->s_rat / 3.0, fmt::format("{},{},{}", g.unit, network::phase_name(static_cast<int>(p)), k + 1));
            }
            const double tot = g.p[k][0] + g.p[k][1] + g.p[k][2];
            const double dp = tot - prev;
            prev = tot;
            const auto rn = compute_rocof_and_nadir(*it, dp);
            const std::string where = fmt::format("{},{}", g.unit, k + 1);
            freq.check(std::abs(g.df_qss[k] - compute_qss_deviation(*it, dp)), where + ",df_qss");
            freq.check(std::abs(g.rocof[k] - rn.rocof), where + ",rocof");
            freq.check(std::abs(g.nadir[k] - rn.nadir), where + ",nadir");
            freq.check(std::abs(g.f[k] - compute_qss_frequency(*it, tot, g.df_star[k], g.delta[k] == 1)), where + ",f");
        }
    }
    rep.checks.push_back(circle.done());
    rep.checks.push_back(freq.done());

    // Served load and the objective.
    Family served("served_load", tol);
    double total = 0.0;
    for (const auto& h : c.houses) {
        const auto it = s.served.find(h.id);
        if (it == s.served.end() || it->second.size() != N) {
            served.check(std::numeric_limits<double>::infinity(), h.id + ",missing");
            continue;
        }
        const std::size_t bi = s.bus_index(h.bus);
        for (std::size_t k = 0; k < N; ++k) {
            double expect = 0.0;
            if (h.has_gei) {
                expect = s.dispatch.count(h.id) ? s.dispatch.at(h.id)[k] : std::numeric_limits<double>::quiet_NaN();
            } else if (cfg.non_gei_load == LoadModel::Flexible) {
                const double cap = inputs.load_forecast.at(h.id)[k] * s.y_bus[bi][k];
                expect = std::clamp(it->second[k], 0.0, std::max(cap, 0.0));
            } else {
                expect = inputs.load_forecast.at(h.id)[k] * s.y_bus[bi][k];
            }
            served.check(std::abs(it->second[k] - expect), fmt::format("{},{}", h.id, k + 1));
            total += it->second[k] * cfg.dt_h();
        }
    }
    served.check(std::abs(total - s.objective) / std::max(1.0, std::abs(total)), "objective");
    served.check(std::abs(pb.served_energy.evaluate(x) - s.objective) / std::max(1.0, std::abs(total)), "objective_model");
    rep.checks.push_back(served.done());
    return rep;
}

}  // namespace bsr::restoration

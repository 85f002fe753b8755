#include <chrono>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <mutex>

#include "Highs.h"
#include "bsr/milp/solver.hpp"

namespace bsr::milp {

std::string_view to_string(SolveStatus s) {
    switch (s) {
    case SolveStatus::Optimal: return "optimal";
    case SolveStatus::Feasible: return "feasible";
    case SolveStatus::Infeasible: return "infeasible";
    case SolveStatus::Unbounded: return "unbounded";
    case SolveStatus::Limit: return "limit";
    }
    return "?";
}

namespace {

struct RowwiseProblem {
    std::vector<double> cost, col_lo, col_hi, row_lo, row_hi, values;
    std::vector<HighsInt> starts, index, integrality;
    double offset = 0.0;
    bool has_integers = false;
};

RowwiseProblem assemble(const Model& model, const LinExpr& objective) {
    const double inf = kHighsInf;
    RowwiseProblem p;
    const std::size_t n = model.num_vars();
    p.cost.assign(n, 0.0);
    const LinExpr obj = objective.normalized();
    for (const Term& t : obj.terms()) {
        if (t.var.index() >= n) throw ModelError("objective references unknown variable");
        p.cost[t.var.index()] = t.coef;
    }
    p.offset = obj.constant();
    p.col_lo.reserve(n);
    p.col_hi.reserve(n);
    p.integrality.reserve(n);
    for (const VarInfo& v : model.vars()) {
        p.col_lo.push_back(std::isinf(v.lo) ? -inf : v.lo);
        p.col_hi.push_back(std::isinf(v.hi) ? inf : v.hi);
        const bool integer = v.kind == VarKind::Binary;
        p.integrality.push_back(integer ? 1 : 0);
        p.has_integers = p.has_integers || integer;
    }
    for (const Constraint& c : model.constraints()) {
        p.starts.push_back(static_cast<HighsInt>(p.index.size()));
        for (const Term& t : c.expr.terms()) {
            p.index.push_back(static_cast<HighsInt>(t.var.index()));
            p.values.push_back(t.coef);
        }
        switch (c.sense) {
        case Sense::LessEqual: p.row_lo.push_back(-inf); p.row_hi.push_back(c.rhs); break;
        case Sense::Equal: p.row_lo.push_back(c.rhs); p.row_hi.push_back(c.rhs); break;
        case Sense::GreaterEqual: p.row_lo.push_back(c.rhs); p.row_hi.push_back(inf); break;
        }
    }
    p.starts.push_back(static_cast<HighsInt>(p.index.size()));
    return p;
}

HighsStatus pass(Highs& highs, const RowwiseProblem& p, Direction dir, bool with_integrality) {
    const auto n = static_cast<HighsInt>(p.cost.size());
    const auto m = static_cast<HighsInt>(p.row_lo.size());
    const auto nz = static_cast<HighsInt>(p.index.size());
    const HighsInt sense = dir == Direction::Minimize ? 1 : -1;
    return highs.passModel(n, m, nz, static_cast<HighsInt>(MatrixFormat::kRowwise), sense, p.offset, p.cost.data(),
                           p.col_lo.data(), p.col_hi.data(), p.row_lo.data(), p.row_hi.data(), p.starts.data(),
                           p.index.data(), p.values.data(),
                           with_integrality && p.has_integers ? p.integrality.data() : nullptr);
}

void configure(Highs& highs, const SolveLimits& limits) {
    highs.setOptionValue("output_flag", false);
    highs.setOptionValue("time_limit", limits.time_limit_s);
    highs.setOptionValue("mip_rel_gap", limits.mip_rel_gap);
    highs.setOptionValue("mip_abs_gap", 1e-9);
    highs.setOptionValue("threads", static_cast<HighsInt>(std::max(1, limits.threads)));
    highs.setOptionValue("random_seed", static_cast<HighsInt>(limits.seed));
    highs.setOptionValue("mip_feasibility_tolerance", 1e-8);
    highs.setOptionValue("primal_feasibility_tolerance", 1e-9);
}

class HighsBackend final : public SolverBackend {
public:
    std::string_view name() const override { return "highs"; }

    SolveResult solve(const Model& model, const LinExpr& objective, Direction dir,
                      const SolveLimits& limits) const override {
        const auto start = std::chrono::steady_clock::now();
        const RowwiseProblem problem = assemble(model, objective);

        SolveResult result;
        Highs highs;
        configure(highs, limits);
        if (pass(highs, problem, dir, true) == HighsStatus::kError) {
            throw ModelError("HiGHS rejected model " + model.name());
        }
        if (problem.has_integers && limits.start.size() == model.num_vars()) {
            HighsSolution hint;
            hint.col_value = limits.start;
            hint.value_valid = true;
            highs.setSolution(hint);
        }
        highs.run();
        HighsModelStatus status = highs.getModelStatus();
        if (status == HighsModelStatus::kUnboundedOrInfeasible) {
            // Ambiguous after presolve; rerun without it to separate the two.
            highs.setOptionValue("presolve", "off");
            highs.run();
            status = highs.getModelStatus();
        }
        const HighsInfo& info = highs.getInfo();
        const bool has_primal = info.primal_solution_status == kSolutionStatusFeasible;

        switch (status) {
        case HighsModelStatus::kOptimal: result.status = SolveStatus::Optimal; break;
        case HighsModelStatus::kModelEmpty: result.status = SolveStatus::Optimal; break;
        case HighsModelStatus::kInfeasible: result.status = SolveStatus::Infeasible; break;
        case HighsModelStatus::kUnbounded:
        case HighsModelStatus::kUnboundedOrInfeasible: result.status = SolveStatus::Unbounded; break;
        default: result.status = has_primal ? SolveStatus::Feasible : SolveStatus::Limit; break;
        }

        if (result.has_values()) {
            if (status == HighsModelStatus::kModelEmpty) {
                result.values.resize(model.num_vars());
                for (std::size_t i = 0; i < model.num_vars(); ++i) {
                    const VarInfo& v = model.vars()[i];
                    result.values[i] = problem.cost[i] * (dir == Direction::Minimize ? 1 : -1) > 0 ? v.lo : v.hi;
                }
            } else {
                result.values = highs.getSolution().col_value;
            }
            result.objective = objective.evaluate(result.values);
            result.gap = problem.has_integers ? std::max(0.0, info.mip_gap) : 0.0;
            if (std::isinf(result.gap)) result.gap = 0.0;
            if (problem.has_integers && limits.polish) polish(model, problem, dir, limits, result);
        }
        result.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        return result;
    }

private:
    static void polish(const Model& model, RowwiseProblem problem, Direction dir, const SolveLimits& limits,
                       SolveResult& result) {
        for (std::size_t i = 0; i < model.num_vars(); ++i) {
            if (problem.integrality[i] == 1) {
                const double r = std::round(result.values[i]);
                problem.col_lo[i] = r;
                problem.col_hi[i] = r;
            }
        }
        Highs lp;
        configure(lp, limits);
        lp.setOptionValue("primal_feasibility_tolerance", 1e-10);
        lp.setOptionValue("dual_feasibility_tolerance", 1e-10);
        if (pass(lp, problem, dir, false) == HighsStatus::kError) return;
        lp.run();
        if (lp.getModelStatus() != HighsModelStatus::kOptimal &&
            lp.getModelStatus() != HighsModelStatus::kModelEmpty) {
            // Keep the MIP values, only snap the integers.
            for (std::size_t i = 0; i < model.num_vars(); ++i) {
                if (problem.integrality[i] == 1) result.values[i] = problem.col_lo[i];
            }
            return;
        }
        if (lp.getModelStatus() == HighsModelStatus::kOptimal) result.values = lp.getSolution().col_value;
        for (std::size_t i = 0; i < model.num_vars(); ++i) {
            if (problem.integrality[i] == 1) result.values[i] = problem.col_lo[i];
        }
    }
};

}  // namespace

std::unique_ptr<SolverBackend> make_backend(std::string_view name) {
    if (name == "highs" || name.empty()) return std::make_unique<HighsBackend>();
    throw BackendUnavailable("unknown MILP backend '" + std::string(name) + "' (available: highs)");
}

const SolverBackend& default_backend() {
    static const std::unique_ptr<SolverBackend> backend = [] {
        const char* env = std::getenv("BSR_MILP_BACKEND");
        return make_backend(env != nullptr ? std::string_view(env) : std::string_view("highs"));
    }();
    return *backend;
}

SolveResult solve(const Model& model, const LinExpr& objective, Direction dir, const SolveLimits& limits) {
    SolveResult r = default_backend().solve(model, objective, dir, limits);
    if (r.has_values()) r.objective = objective.evaluate(r.values);
    return r;
}

}  // namespace bsr::milp

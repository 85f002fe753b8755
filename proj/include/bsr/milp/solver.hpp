#pragma once

#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "bsr/milp/model.hpp"

namespace bsr::milp {

enum class SolveStatus { Optimal, Feasible, Infeasible, Unbounded, Limit };

std::string_view to_string(SolveStatus s);

struct SolveLimits {
    double time_limit_s = 120.0;
    double mip_rel_gap = 1e-6;
    int threads = 1;
    int seed = 0;
    // Re-solve the LP with integers fixed so continuous values match integral binaries exactly.
    bool polish = true;
    // Optional MIP start indexed by VarId; ignored unless it covers every variable.
    std::vector<double> start;

    static SolveLimits with(double time_limit_s, double mip_rel_gap) {
        SolveLimits l;
        l.time_limit_s = time_limit_s;
        l.mip_rel_gap = mip_rel_gap;
        return l;
    }
};

struct SolveResult {
    SolveStatus status = SolveStatus::Limit;
    double objective = 0.0;
    std::vector<double> values;  // indexed by VarId; empty unless optimal/feasible
    double gap = 0.0;
    double wall_time_s = 0.0;

    bool has_values() const { return status == SolveStatus::Optimal || status == SolveStatus::Feasible; }
    double value(VarId v) const { return values.at(v.index()); }
    double value(const LinExpr& e) const { return e.evaluate(values); }
    // Binary values rounded to {0,1}.
    bool is_set(VarId v) const { return values.at(v.index()) > 0.5; }
};

class BackendUnavailable : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A solver must treat the Model as read-only; one backend object may serve
// several threads as long as each call gets its own model.
class SolverBackend {
public:
    virtual ~SolverBackend() = default;
    virtual std::string_view name() const = 0;
    virtual SolveResult solve(const Model& model, const LinExpr& objective, Direction dir,
                              const SolveLimits& limits) const = 0;
};

std::unique_ptr<SolverBackend> make_backend(std::string_view name);

// Backend named by $BSR_MILP_BACKEND, "highs" when unset.
const SolverBackend& default_backend();

SolveResult solve(const Model& model, const LinExpr& objective, Direction dir, const SolveLimits& limits = {});

}  // namespace bsr::milp

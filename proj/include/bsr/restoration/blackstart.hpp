#pragma once

#include <array>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "bsr/gei/house.hpp"
#include "bsr/milp/model.hpp"
#include "bsr/milp/solver.hpp"
#include "bsr/network/case.hpp"
#include "bsr/restoration/frequency.hpp"

namespace bsr::restoration {

class RestorationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class RestorationInfeasible : public RestorationError {
public:
    RestorationInfeasible(const std::string& what, milp::SolveStatus status)
        : RestorationError(what), status_(status) {}
    milp::SolveStatus status() const { return status_; }

private:
    milp::SolveStatus status_;
};

// Grid status at the solve clock; step k of a horizon ends at clock + k*dt.
struct PriorState {
    int clock_min = 0;
    std::map<std::string, int> switch_y;      // by switch id
    std::map<std::string, int> block_y;       // by block id
    std::map<std::string, double> gfm_energy;  // kWh, by unit id
    std::map<std::string, double> gfm_p_total; // kW over all phases, last applied
    int tg_status = 0;

    // Everything open and dead, storage at E_init, TG status from its schedule.
    static PriorState blackout(const network::GridCase& c, int clock_min);
};

// How houses without GEI enter the utility model: served anywhere between zero
// and the forecast while energized, or all-or-nothing with their block.
enum class LoadModel { Flexible, Fixed };

struct RestorationConfig {
    std::size_t steps = 12;
    double dt_s = 900.0;
    FrequencyBounds bounds;
    // Unset: power scale from the feeder (see build_restoration_milp), other
    // scales from BigMConfig defaults.
    std::optional<milp::BigMConfig> big_m;
    double tie_break = 1e-4;  // weight on switch-closed steps
    double power_factor = 0.95;
    LoadModel non_gei_load = LoadModel::Fixed;

    void validate() const;
    double dt_h() const { return dt_s / 3600.0; }
};

// Everything the utility knows for one solve besides the case itself.
struct RestorationInputs {
    PriorState prior;
    std::map<std::string, gei::FlexibilityEnvelope> envelopes;  // GEI houses
    std::map<std::string, std::vector<double>> load_forecast;   // other houses, kW
    std::map<std::string, std::vector<double>> pv_forecast;     // PV units, kW total
};

// Builds forecasts for non-GEI houses and PV units from the case profiles.
RestorationInputs make_inputs(const network::GridCase& c, const PriorState& prior,
                              std::map<std::string, gei::FlexibilityEnvelope> envelopes,
                              const RestorationConfig& cfg);

using Phase3 = std::array<double, 3>;
using VarPhase3 = std::array<milp::VarId, 3>;

struct GfmTrajectory {
    std::string unit;
    std::vector<Phase3> p, q, dv;  // per step
    std::vector<double> e;         // end-of-step energy, kWh
    std::vector<double> dp;        // total power change from the previous step
    std::vector<double> df_qss, rocof, nadir, f, df_star, delta;
};

struct TgTrajectory {
    std::vector<int> y;
    std::vector<Phase3> p, q, v;
    std::vector<double> f;
};

struct BranchFlow {
    std::string id;
    bool is_switch = false;
    std::vector<Phase3> p, q;
};

struct RestorationSolution {
    std::string status;
    double gap = 0.0;
    double objective = 0.0;        // restored energy, kWh
    double objective_total = 0.0;  // including the tie-break term
    std::size_t steps = 0;
    double dt_s = 900.0;
    int start_min = 0;

    std::vector<std::string> switch_ids;
    std::vector<std::vector<int>> y_switch;  // [switch][k]
    std::vector<std::vector<int>> z_switch;  // zero for ESWs
    std::vector<std::string> block_ids;
    std::vector<std::vector<int>> y_block;
    std::vector<std::vector<double>> f_block;
    std::vector<std::string> bus_ids;
    std::vector<std::vector<int>> y_bus;
    std::vector<std::vector<Phase3>> v;  // [bus][k], pu^2; absent phases 0
    std::vector<GfmTrajectory> gfm;
    TgTrajectory tg;
    std::vector<BranchFlow> flows;  // case lines, then switches
    std::map<std::string, std::vector<double>> dispatch;  // GEI houses
    std::map<std::string, std::vector<double>> served;    // every house
    std::map<std::string, std::vector<Phase3>> pv;

    int timestamp(std::size_t k) const {  // end of step k (0-based)
        return start_min + static_cast<int>((static_cast<double>(k) + 1.0) * dt_s / 60.0 + 0.5);
    }
    double served_energy_kwh() const;
    std::size_t switch_index(const std::string& id) const;
    std::size_t block_index(const std::string& id) const;
    std::size_t bus_index(const std::string& id) const;
};

// A value derived from other variables; used to rebuild a full value vector
// from a typed solution.
struct AuxDef {
    milp::VarId out;
    milp::LinExpr expr;  // out = expr, unless product
    bool product = false;
    milp::VarId a, b;  // out = a * b
};

struct GfmVars {
    std::size_t unit = 0;  // index into case ders
    std::size_t bus = 0;
    std::vector<VarPhase3> p, q, dv;
    std::vector<milp::VarId> e, df_qss, rocof, nadir, f, df_star, delta, w;
};

struct RestorationVars {
    std::size_t steps = 0;
    std::vector<std::vector<milp::VarId>> y_sw, z_sw, d_sw;  // [switch][k]
    std::vector<std::vector<milp::VarId>> y_bb, f_block;     // [block][k]
    std::vector<std::vector<milp::VarId>> y_bus;             // [bus][k], unset for source buses
    std::vector<std::vector<milp::VarId>> y_line;            // [line][k]
    std::vector<std::vector<VarPhase3>> v;                   // [bus][k]
    std::vector<std::vector<VarPhase3>> flow_p, flow_q;      // [branch][k]
    std::vector<GfmVars> gfm;
    std::vector<VarPhase3> tg_p, tg_q;
    std::vector<milp::VarId> tg_f;
    std::vector<std::size_t> pv_units;                       // case der indices
    std::vector<std::vector<VarPhase3>> pv;                  // [pv][k]
    std::map<std::string, std::vector<milp::VarId>> dispatch;
    std::map<std::string, std::vector<milp::VarId>> load;  // houses without GEI, flexible model only
    std::vector<AuxDef> aux;
};

struct RestorationProblem {
    milp::Model model{"restoration"};
    RestorationVars vars;
    milp::LinExpr served_energy;  // kWh
    milp::LinExpr objective;      // served_energy + tie-break
    RestorationInputs inputs;
    RestorationConfig config;
    int tg_y = 0;
    std::vector<std::string> gei_houses;
};

RestorationProblem build_restoration_milp(const network::GridCase& c, const RestorationInputs& inputs,
                                          const RestorationConfig& cfg);

RestorationSolution extract_solution(const network::GridCase& c, const RestorationProblem& p,
                                     const milp::SolveResult& r);

// Throws RestorationInfeasible when the solver returns no incumbent.
RestorationSolution solve_restoration(const network::GridCase& c, const RestorationProblem& p,
                                      const milp::SolveLimits& limits = {});

// Copy of `p` with every switch held at its prior status over the horizon.
// Any solution of it is feasible for `p`, so it doubles as a MIP start.
RestorationProblem hold_switches(const network::GridCase& c, const RestorationProblem& p);

// `s` advanced by one step: the first step is dropped and the last repeated.
RestorationSolution shift_solution(const RestorationSolution& s);

// Maps a typed solution back onto the problem's variables; derived variables
// are recomputed from their definitions.
std::vector<double> solution_values(const network::GridCase& c, const RestorationProblem& p,
                                    const RestorationSolution& s);

// House connected iff its bus is energized at the first step.
bool connection_status(const network::GridCase& c, const std::string& house_id, const RestorationSolution& s);

// State after applying the first step of `s`.
PriorState advance_prior(const network::GridCase& c, const PriorState& prior, const RestorationSolution& s);

}  // namespace bsr::restoration

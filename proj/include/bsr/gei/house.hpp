#pragma once

#include <array>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "bsr/milp/model.hpp"
#include "bsr/milp/solver.hpp"

namespace bsr::gei {

class HouseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Solver could not produce a feasible house plan.
class HouseInfeasible : public HouseError {
public:
    using HouseError::HouseError;
};

struct HouseThermalParams {
    std::array<double, 4> c_wall{};  // kWh/degC
    std::array<double, 4> r_wall{};  // degC/kW
    std::array<double, 4> w_wall{};
    double r_win = 0.0;   // degC/kW
    double c_room = 0.0;  // kWh/degC
    double w_win = 0.0;
    double cop = 3.0;

    void validate() const;
};

enum class HvacMode { Cooling, Heating };

struct HvacParams {
    double t_set_lo = 20.0;  // degC
    double t_set_hi = 24.0;
    double q_max = 10.0;  // kW thermal
    double p_max = 3.0;   // kW electrical
    HvacMode mode = HvacMode::Cooling;

    void validate() const;
};

struct BesParams {
    double e_lo = 0.0;  // kWh
    double e_hi = 0.0;
    double p_c_max = 0.0;  // kW
    double p_d_max = 0.0;
    // Per-step change limits on charge/discharge power (kW). Infinite limits
    // are clamped to +-P_max, which never binds.
    double ramp_c_lo = -std::numeric_limits<double>::infinity();
    double ramp_c_hi = std::numeric_limits<double>::infinity();
    double ramp_d_lo = -std::numeric_limits<double>::infinity();
    double ramp_d_hi = std::numeric_limits<double>::infinity();
    double eta_c = 0.95;
    double eta_d = 0.95;

    void validate() const;
};

struct HouseParams {
    std::string id;
    std::optional<HouseThermalParams> thermal;  // present together with hvac
    std::optional<HvacParams> hvac;
    std::optional<BesParams> bes;
    bool has_pv = false;
    bool has_load = false;
    double pv_floor = 0.5;
    double load_floor = 0.5;

    void validate() const;
};

struct HouseForecast {
    std::vector<double> t_out;                       // degC
    std::array<std::vector<double>, 4> q_rad_wall;   // kW thermal
    std::vector<double> q_rad_win;
    std::vector<double> q_int;
    std::vector<double> p_pv_hat;    // kW
    std::vector<double> p_load_hat;  // kW

    std::size_t steps() const { return p_load_hat.size(); }
    // Throws HouseError on length mismatch or non-finite/negative entries.
    void validate(const HouseParams& params) const;
    // Copy of steps [from, from + n).
    HouseForecast slice(std::size_t from, std::size_t n) const;
};

struct HouseState {
    std::array<double, 4> t_wall{};
    double t_room = 22.0;
    double e_es = 0.0;
    double p_es_c_prev = 0.0;  // last applied powers, for the ramp limits
    double p_es_d_prev = 0.0;
    bool connected = false;
    int clock_min = 0;  // minutes since midnight of day 0

    void validate(const HouseParams& params) const;
};

// State for a fresh house: walls at the mean of room and outdoor temperature.
HouseState initial_state(const HouseParams& params, double t_room, double t_out, double e_es, int clock_min);

struct HouseDecision {
    std::vector<double> t_hvac, q_hvac, p_hvac;
    std::vector<double> p_es_c, p_es_d, beta_c, beta_d;
    std::vector<double> x_pv, x_load, p_pv, p_load;
    std::vector<double> p_gei;
    std::vector<double> e_es;    // predicted end-of-step energy
    std::vector<double> t_room;  // predicted end-of-step room temperature
    std::array<std::vector<double>, 4> t_wall;
    double objective = 0.0;

    std::size_t steps() const { return p_gei.size(); }
};

// A single step of decisions applied to the plant.
struct AppliedStep {
    double q_hvac = 0.0;
    double p_es_c = 0.0;
    double p_es_d = 0.0;
};

struct FlexibilityEnvelope {
    std::vector<double> lower;  // kW
    std::vector<double> upper;
    int horizon_start_min = 0;
    double dt_s = 900.0;

    std::size_t steps() const { return lower.size(); }
    bool well_formed() const;
};

struct DispatchSignal {
    std::vector<double> p_ref;  // kW
    int horizon_start_min = 0;
    double dt_s = 900.0;
};

// Variable handles of one house embedded in a MILP.
struct HouseVars {
    std::size_t steps = 0;
    std::vector<milp::VarId> t_hvac, q_hvac, p_hvac;
    std::vector<milp::VarId> p_es_c, p_es_d, beta_c, beta_d, e_es;
    std::vector<milp::VarId> x_pv, x_load, p_pv, p_load;
    std::vector<milp::VarId> p_gei;
    std::array<std::vector<milp::VarId>, 4> t_wall;
    std::vector<milp::VarId> t_room;
    std::vector<double> hvac_coef;  // linearized P_hvac per unit |Q_hvac|

    milp::LinExpr total_p_gei() const;
};

struct HouseModelOptions {
    double dt_h = 0.25;
};

// HVAC electrical power per unit thermal power, evaluated at the measured room
// temperature and the setpoint band midpoint.
double hvac_coefficient(const HouseThermalParams& th, const HvacParams& hvac, double t_room_measured);

// Adds house variables and constraints (tags eq1..eq14) to `model`; names are
// prefixed with `prefix`.
HouseVars build_house_milp(milp::Model& model, const HouseParams& params, const HouseForecast& forecast,
                           const HouseState& state, const HouseModelOptions& opts = {},
                           const std::string& prefix = "");

enum class HouseObjective { MaxConsumption, MinConsumption, Standalone, Tracking };

// A complete house optimization problem; objective_tag names the objective family.
struct HouseProblem {
    milp::Model model;
    HouseVars vars;
    milp::LinExpr objective;
    milp::Direction direction = milp::Direction::Minimize;
    std::string objective_tag;
};

HouseProblem make_house_problem(const HouseParams& params, const HouseForecast& forecast, const HouseState& state,
                                HouseObjective kind, const DispatchSignal* dispatch = nullptr,
                                const HouseModelOptions& opts = {});

HouseDecision extract_decision(const HouseVars& vars, const milp::SolveResult& result);

FlexibilityEnvelope estimate_flexibility_envelope(const HouseParams& params, const HouseForecast& forecast,
                                                  const HouseState& state, const HouseModelOptions& opts = {},
                                                  const milp::SolveLimits& limits = {});

// Standalone (disconnected) mode minimizes total consumption; connected mode
// minimizes the L1 distance to the dispatch signal.
HouseDecision optimize_house(const HouseParams& params, const HouseForecast& forecast, const HouseState& state,
                             const DispatchSignal* dispatch, const HouseModelOptions& opts = {},
                             const milp::SolveLimits& limits = {});

double tracking_residual(const HouseDecision& d, const DispatchSignal& dispatch);

// One plant step under the same discrete dynamics as the predictive model.
// `forecast` supplies the disturbances for the step (index 0).
HouseState step_house_state(const HouseParams& params, const HouseForecast& forecast, const HouseState& state,
                            const AppliedStep& step, double dt_s);

}  // namespace bsr::gei

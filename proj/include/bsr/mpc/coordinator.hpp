#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "bsr/gei/house.hpp"
#include "bsr/mpc/messages.hpp"
#include "bsr/network/case.hpp"
#include "bsr/restoration/blackstart.hpp"

namespace bsr::mpc {

class ScenarioError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A step failed beyond the fallback; carries the state at the failing step.
class ScenarioAbort : public ScenarioError {
public:
    ScenarioAbort(const std::string& what, nlohmann::json snapshot)
        : ScenarioError(what), snapshot_(std::move(snapshot)) {}
    const nlohmann::json& snapshot() const { return snapshot_; }

private:
    nlohmann::json snapshot_;
};

struct ScenarioConfig {
    int start_min = 9 * 60;
    int end_min = 12 * 60;
    std::size_t steps = 12;  // horizon length N
    double dt_s = 900.0;
    restoration::FrequencyBounds bounds;
    std::optional<milp::BigMConfig> big_m;
    double tie_break = 1e-4;
    double power_factor = 0.95;
    restoration::LoadModel non_gei_load = restoration::LoadModel::Fixed;
    std::optional<std::vector<network::TgEvent>> tg_schedule;  // replaces the case schedule
    milp::SolveLimits utility_limits = milp::SolveLimits::with(60.0, 1e-4);
    milp::SolveLimits house_limits = milp::SolveLimits::with(30.0, 1e-6);
    std::uint64_t seed = 7;
    double forecast_noise = 0.0;  // relative std-dev on house forecasts seen by the controllers
    unsigned workers = 1;         // parallel house solves

    void validate() const;
    std::size_t mpc_steps() const;
    restoration::RestorationConfig restoration_config() const;
};

struct ScenarioState {
    int clock_min = 0;
    restoration::PriorState grid;
    std::map<std::string, gei::HouseState> houses;  // GEI houses only
    std::vector<std::string> events;
    std::optional<restoration::RestorationSolution> last_plan;  // not serialized

    nlohmann::json to_json() const;
};

struct HouseStepLog {
    std::string id;
    bool connected = false;
    std::string mode;  // "tracking" or "standalone"
    double env_lower = 0.0, env_upper = 0.0;  // first step of the envelope
    double p_ref = 0.0;                       // first step of the dispatch, 0 when none
    double p_gei = 0.0;                       // applied
    double q_hvac = 0.0, p_hvac = 0.0, p_es_c = 0.0, p_es_d = 0.0, p_pv = 0.0, p_load = 0.0;
    double residual = 0.0;  // L1 tracking residual over the horizon
    gei::HouseState before, after;
};

struct StepRecord {
    std::size_t index = 0;  // 0-based MPC step
    int clock_min = 0;      // solve time; the applied interval ends at clock + dt
    std::vector<FlexibilityMessage> flexibility;
    std::vector<DispatchMessage> dispatch;
    restoration::RestorationInputs inputs;
    restoration::RestorationConfig config;  // as solved, big-M resolved
    restoration::RestorationSolution solution;
    bool fallback = false;
    std::vector<std::string> notes;
    std::vector<HouseStepLog> houses;
    restoration::PriorState grid_after;
    double served_kw = 0.0;  // over the applied interval
    int houses_restored = 0;
    double solve_s = 0.0;
};

struct RunResult {
    std::vector<StepRecord> steps;
    ScenarioState final_state;
};

ScenarioState initial_scenario_state(const network::GridCase& c, const ScenarioConfig& cfg);

// One loop pass: envelopes, utility solve, dispatch, house solves, apply the
// first step, advance the clock.
StepRecord advance_step(ScenarioState& state, const network::GridCase& c, const ScenarioConfig& cfg,
                        std::size_t index);

// Runs from start to end. With a non-empty out_dir, writes messages/,
// solutions/step_XX/ and timeseries/ (plus abort_state.json on abort).
RunResult run_scenario(const network::GridCase& c, const ScenarioConfig& cfg,
                       const std::filesystem::path& out_dir = {});

// Case with the scenario's TG schedule applied.
network::GridCase scenario_case(const network::GridCase& c, const ScenarioConfig& cfg);

// True when a switch at the TG bus is closed at step k of `s`.
bool tg_connected(const network::GridCase& c, const restoration::RestorationSolution& s, std::size_t k);

void write_step(const std::filesystem::path& out_dir, const network::GridCase& c, const StepRecord& r);
void write_timeseries(const std::filesystem::path& out_dir, const network::GridCase& c, const ScenarioConfig& cfg,
                      const std::vector<StepRecord>& steps);

}  // namespace bsr::mpc

#pragma once

#include <filesystem>
#include <stdexcept>

#include "json.hpp"

#include "bsr/restoration/blackstart.hpp"

namespace bsr::restoration {

class SolutionIoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Everything needed to re-verify a solve without the solver.
struct SavedSolution {
    std::string case_name;
    RestorationInputs inputs;
    RestorationConfig config;
    RestorationSolution solution;
};

nlohmann::json to_json(const PriorState& p);
PriorState prior_from_json(const nlohmann::json& j);
nlohmann::json to_json(const RestorationConfig& c);
RestorationConfig config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const gei::FlexibilityEnvelope& e);
gei::FlexibilityEnvelope envelope_from_json(const nlohmann::json& j);

// Writes solution.json plus one long-format CSV per quantity:
// switch_schedule, blocks, voltages, frequencies, gfm_power, tg, flows,
// dispatch, served_load, pv.
void write_solution_dir(const std::filesystem::path& dir, const network::GridCase& c, const RestorationInputs& inputs,
                        const RestorationConfig& cfg, const RestorationSolution& s);

// Inverse of write_solution_dir; values come back bit-identical.
SavedSolution read_solution_dir(const std::filesystem::path& dir);

}  // namespace bsr::restoration

#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "bsr/mpc/coordinator.hpp"
#include "bsr/network/case.hpp"

namespace bsr::io {

// Every schema problem found in a scenario document.
class ScenarioSchemaError : public std::runtime_error {
public:
    explicit ScenarioSchemaError(std::vector<std::string> problems);
    const std::vector<std::string>& problems() const { return problems_; }

private:
    std::vector<std::string> problems_;
};

// Where the case comes from: a file, an inline document, or the IEEE-123 generator.
struct CaseSource {
    enum class Kind { File, Inline, Ieee123 } kind = Kind::Ieee123;
    std::filesystem::path file;  // resolved against the scenario's directory
    nlohmann::json inline_doc;
    std::optional<std::uint64_t> generator_seed;  // falls back to the scenario seed
};

struct ScenarioDocument {
    nlohmann::json raw;  // as read, with overrides applied
    std::filesystem::path base_dir;
    CaseSource source;
    std::optional<double> gei_fraction;
    mpc::ScenarioConfig config;
    std::filesystem::path output_dir;  // empty when unset
};

// Schema check plus conversion; collects all problems before throwing.
ScenarioDocument parse_scenario(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});
ScenarioDocument load_scenario_file(const std::filesystem::path& path);

// "a.b=value": value parsed as JSON when possible, else taken as a string.
// The document is re-parsed afterwards, so bad values raise ScenarioSchemaError.
void apply_override(ScenarioDocument& doc, std::string_view assignment);

// Loads or generates the case and applies gei_fraction.
network::GridCase resolve_case(const ScenarioDocument& doc);

// Standalone single-house input for envelope estimation.
struct HouseDocument {
    gei::HouseParams params;
    gei::HouseState state;
    gei::HouseForecast forecast;
    double dt_s = 900.0;
};

HouseDocument parse_house_document(const nlohmann::json& doc);
HouseDocument load_house_document(const std::filesystem::path& path);
nlohmann::json to_json(const HouseDocument& d);
// The house as the coordinator would see it at `start_min`.
HouseDocument house_document_from_case(const network::GridCase& c, const std::string& house_id, int start_min,
                                       std::size_t steps, double dt_s);

// Scenario document for the generated IEEE-123 feeder with default settings.
nlohmann::json default_ieee123_scenario(double gei_fraction, std::uint64_t seed);

}  // namespace bsr::io

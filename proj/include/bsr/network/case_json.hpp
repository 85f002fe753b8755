#pragma once

#include <filesystem>

#include "json.hpp"

#include "bsr/network/case.hpp"

namespace bsr::network {

// Parses and validates a case document; every schema or topology problem is
// collected before throwing CaseError.
GridCase load_case(const nlohmann::json& doc);
GridCase load_case_file(const std::filesystem::path& path);

nlohmann::json to_json(const GridCase& c);
void save_case_file(const GridCase& c, const std::filesystem::path& path);

nlohmann::json to_json(const gei::HouseParams& p);
gei::HouseParams house_params_from_json(const nlohmann::json& j, std::vector<std::string>& problems,
                                        const std::string& where);

}  // namespace bsr::network

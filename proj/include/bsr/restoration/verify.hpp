#pragma once

#include <string>
#include <vector>

#include "json.hpp"

#include "bsr/milp/model.hpp"
#include "bsr/restoration/blackstart.hpp"

namespace bsr::restoration {

struct VerificationReport {
    double tolerance = 1e-6;
    std::vector<milp::TagCheck> checks;  // model rows by tag, then the extra families
    std::vector<std::string> errors;     // structural problems (missing entities, bad shapes)

    bool passed() const;
    std::size_t failures() const;
    const milp::TagCheck* find(const std::string& tag) const;
    nlohmann::json to_json() const;
    std::string table() const;
};

// Re-checks a typed solution against the same constraint rows the solver saw
// (rebuilt from the stored inputs), then adds checks the model only
// approximates: the exact capacity circle, frequencies recomputed from the
// power trajectory, served-load bookkeeping and the restored-energy total.
VerificationReport verify_solution(const network::GridCase& c, const RestorationInputs& inputs,
                                   const RestorationConfig& cfg, const RestorationSolution& s, double tol = 1e-6);

}  // namespace bsr::restoration

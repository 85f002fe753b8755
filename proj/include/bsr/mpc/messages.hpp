#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "bsr/gei/house.hpp"

namespace bsr::mpc {

class MessageError : public std::runtime_error {
public:
    explicit MessageError(std::vector<std::string> problems);
    const std::vector<std::string>& problems() const { return problems_; }

private:
    std::vector<std::string> problems_;
};

// House -> utility.
struct FlexibilityMessage {
    std::string house_id;
    gei::FlexibilityEnvelope envelope;
    int issued_at_min = 0;
};

// Utility -> house.
struct DispatchMessage {
    std::string house_id;
    gei::DispatchSignal dispatch;
    int issued_at_min = 0;
};

// Wire form. Only the fields below cross the house/utility boundary:
//   {"type":"flexibility","house_id","issued_at","horizon_start","dt_s","lower","upper"}
//   {"type":"dispatch","house_id","issued_at","horizon_start","dt_s","p_ref"}
nlohmann::json to_json(const FlexibilityMessage& m);
nlohmann::json to_json(const DispatchMessage& m);

// Every schema problem found, empty when the message is valid. Unknown keys
// are problems.
std::vector<std::string> validate_message(const nlohmann::json& j);

// Throw MessageError unless valid (and of the expected type).
FlexibilityMessage flexibility_from_json(const nlohmann::json& j);
DispatchMessage dispatch_from_json(const nlohmann::json& j);

// Checks that each dispatch value lies in its envelope (within tol).
std::vector<std::string> check_dispatch_within(const DispatchMessage& d, const FlexibilityMessage& f, double tol = 1e-6);

// One message per line; each is validated on write and on read.
void write_jsonl(const std::filesystem::path& path, const std::vector<nlohmann::json>& messages);
std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& path);

}  // namespace bsr::mpc

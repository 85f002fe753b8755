#include "bsr/mpc/messages.hpp"

#include <cmath>
#include <fstream>
#include <set>

#include <fmt/format.h>

#include "bsr/network/case.hpp"

namespace bsr::mpc {

using nlohmann::json;

namespace {

std::string join(const std::vector<std::string>& p) {
    std::string s = "invalid message:";
    for (const auto& x : p) s += "\n  - " + x;
    return s;
}

json header(const char* type, const std::string& house, int issued, int start, double dt) {
    return {{"type", type},
            {"house_id", house},
            {"issued_at", network::format_clock(issued)},
            {"horizon_start", network::format_clock(start)},
            {"dt_s", dt}};
}

void check_series(const json& j, const char* key, std::vector<std::string>& p) {
    if (!j.contains(key)) {
        p.push_back(fmt::format("missing '{}'", key));
        return;
    }
    const auto& a = j.at(key);
    if (!a.is_array() || a.empty()) {
        p.push_back(fmt::format("'{}' must be a non-empty array", key));
        return;
    }
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (!a[i].is_number() || !std::isfinite(a[i].get<double>())) {
            p.push_back(fmt::format("'{}'[{}] is not a finite number", key, i));
        }
    }
}

void check_clock(const json& j, const char* key, std::vector<std::string>& p) {
    if (!j.contains(key) || !j.at(key).is_string()) {
        p.push_back(fmt::format("'{}' must be an HH:MM string", key));
        return;
    }
    try {
        network::parse_clock(j.at(key).get<std::string>());
    } catch (const std::exception&) {
        p.push_back(fmt::format("'{}' is not a clock: {}", key, j.at(key).get<std::string>()));
    }
}

}  // namespace

MessageError::MessageError(std::vector<std::string> problems)
    : std::runtime_error(join(problems)), problems_(std::move(problems)) {}

json to_json(const FlexibilityMessage& m) {
    json j = header("flexibility", m.house_id, m.issued_at_min, m.envelope.horizon_start_min, m.envelope.dt_s);
    j["lower"] = m.envelope.lower;
    j["upper"] = m.envelope.upper;
    return j;
}

json to_json(const DispatchMessage& m) {
    json j = header("dispatch", m.house_id, m.issued_at_min, m.dispatch.horizon_start_min, m.dispatch.dt_s);
    j["p_ref"] = m.dispatch.p_ref;
    return j;
}

std::vector<std::string> validate_message(const json& j) {
    std::vector<std::string> p;
    if (!j.is_object()) return {"message must be a JSON object"};
    if (!j.contains("type") || !j.at("type").is_string()) return {"missing message type"};
    const std::string type = j.at("type").get<std::string>();
    std::set<std::string> allowed = {"type", "house_id", "issued_at", "horizon_start", "dt_s"};
    if (type == "flexibility") {
        allowed.insert({"lower", "upper"});
    } else if (type == "dispatch") {
        allowed.insert("p_ref");
    } else {
        return {fmt::format("unknown message type '{}'", type)};
    }
    for (const auto& [k, v] : j.items()) {
        if (!allowed.count(k)) p.push_back(fmt::format("field '{}' is not allowed in a {} message", k, type));
    }
    if (!j.contains("house_id") || !j.at("house_id").is_string() || j.at("house_id").get<std::string>().empty()) {
        p.push_back("'house_id' must be a non-empty string");
    }
    check_clock(j, "issued_at", p);
    check_clock(j, "horizon_start", p);
    if (!j.contains("dt_s") || !j.at("dt_s").is_number() || !(j.at("dt_s").get<double>() > 0)) {
        p.push_back("'dt_s' must be a positive number");
    }
    if (type == "flexibility") {
        check_series(j, "lower", p);
        check_series(j, "upper", p);
        if (p.empty()) {
            const auto lo = j.at("lower").get<std::vector<double>>();
            const auto hi = j.at("upper").get<std::vector<double>>();
            if (lo.size() != hi.size()) {
                p.push_back("'lower' and 'upper' differ in length");
            } else {
                for (std::size_t k = 0; k < lo.size(); ++k) {
                    if (lo[k] > hi[k]) p.push_back(fmt::format("step {}: lower {} above upper {}", k + 1, lo[k], hi[k]));
                }
            }
        }
    } else {
        check_series(j, "p_ref", p);
    }
    return p;
}

FlexibilityMessage flexibility_from_json(const json& j) {
    auto p = validate_message(j);
    if (p.empty() && j.at("type") != "flexibility") p.push_back("expected a flexibility message");
    if (!p.empty()) throw MessageError(std::move(p));
    FlexibilityMessage m;
    m.house_id = j.at("house_id").get<std::string>();
    m.issued_at_min = network::parse_clock(j.at("issued_at").get<std::string>());
    m.envelope.horizon_start_min = network::parse_clock(j.at("horizon_start").get<std::string>());
    m.envelope.dt_s = j.at("dt_s").get<double>();
    m.envelope.lower = j.at("lower").get<std::vector<double>>();
    m.envelope.upper = j.at("upper").get<std::vector<double>>();
    return m;
}

DispatchMessage dispatch_from_json(const json& j) {
    auto p = validate_message(j);
    if (p.empty() && j.at("type") != "dispatch") p.push_back("expected a dispatch message");
    if (!p.empty()) throw MessageError(std::move(p));
    DispatchMessage m;
    m.house_id = j.at("house_id").get<std::string>();
    m.issued_at_min = network::parse_clock(j.at("issued_at").get<std::string>());
    m.dispatch.horizon_start_min = network::parse_clock(j.at("horizon_start").get<std::string>());
    m.dispatch.dt_s = j.at("dt_s").get<double>();
    m.dispatch.p_ref = j.at("p_ref").get<std::vector<double>>();
    return m;
}

std::vector<std::string> check_dispatch_within(const DispatchMessage& d, const FlexibilityMessage& f, double tol) {
    std::vector<std::string> p;
    if (d.house_id != f.house_id) p.push_back(fmt::format("house mismatch {} vs {}", d.house_id, f.house_id));
    if (d.dispatch.horizon_start_min != f.envelope.horizon_start_min) p.push_back("horizon start mismatch");
    if (d.dispatch.p_ref.size() != f.envelope.steps()) {
        p.push_back("horizon length mismatch");
        return p;
    }
    for (std::size_t k = 0; k < d.dispatch.p_ref.size(); ++k) {
        const double v = d.dispatch.p_ref[k];
        if (v < f.envelope.lower[k] - tol || v > f.envelope.upper[k] + tol) {
            p.push_back(fmt::format("{} step {}: dispatch {} outside [{}, {}]", d.house_id, k + 1, v,
                                    f.envelope.lower[k], f.envelope.upper[k]));
        }
    }
    return p;
}

void write_jsonl(const std::filesystem::path& path, const std::vector<json>& messages) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    for (const auto& m : messages) {
        auto p = validate_message(m);
        if (!p.empty()) throw MessageError(std::move(p));
        out << m.dump() << '\n';
    }
}

std::vector<json> read_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    std::vector<json> out;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw MessageError({fmt::format("{}:{}: {}", path.string(), n, e.what())});
        }
        auto p = validate_message(j);
        if (!p.empty()) {
            for (auto& x : p) x = fmt::format("{}:{}: {}", path.string(), n, x);
            throw MessageError(std::move(p));
        }
        out.push_back(std::move(j));
    }
    return out;
}

}  // namespace bsr::mpc

#include "bsr/io/scenario.hpp"

#include <cmath>
#include <fstream>
#include <set>

#include <fmt/format.h>

#include "bsr/network/case_json.hpp"
#include "bsr/network/ieee123.hpp"

namespace bsr::io {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string join_problems(const std::vector<std::string>& problems) {
    std::string msg = "scenario rejected:";
    for (const auto& p : problems) msg += "\n  - " + p;
    return msg;
}

const std::set<std::string> kTopKeys = {
    "case",       "gei_fraction",   "start",          "end",          "horizon_steps", "dt_s",
    "frequency_bounds", "big_m",    "tie_break",      "power_factor", "non_gei_load",  "tg_schedule",
    "utility_limits", "house_limits", "seed",         "forecast_noise", "workers",     "output_dir"};

class Checker {
public:
    std::vector<std::string> problems;

    void unknown_keys(const json& j, const std::set<std::string>& known, const std::string& where) {
        for (const auto& [k, v] : j.items()) {
            if (!known.count(k)) problems.push_back(fmt::format("{}: unknown field '{}'", where, k));
        }
    }

    template <class T>
    void number(const json& j, const char* key, T& out, const std::string& where, double lo, double hi) {
        if (!j.contains(key)) return;
        const json& v = j.at(key);
        if (!v.is_number()) {
            problems.push_back(fmt::format("{}: '{}' must be a number", where, key));
            return;
        }
        const double x = v.get<double>();
        if (!std::isfinite(x) || x < lo || x > hi) {
            problems.push_back(fmt::format("{}: '{}' = {} outside [{}, {}]", where, key, x, lo, hi));
            return;
        }
        if constexpr (std::is_integral_v<T>) {
            if (!v.is_number_integer()) {
                problems.push_back(fmt::format("{}: '{}' must be an integer", where, key));
                return;
            }
            out = static_cast<T>(v.get<long long>());
        } else {
            out = static_cast<T>(x);
        }
    }

    void clock(const json& j, const char* key, int& out) {
        if (!j.contains(key)) return;
        if (!j.at(key).is_string()) {
            problems.push_back(fmt::format("'{}' must be a \"HH:MM\" string", key));
            return;
        }
        try {
            out = network::parse_clock(j.at(key).get<std::string>());
        } catch (const std::exception& e) {
            problems.push_back(fmt::format("'{}': {}", key, e.what()));
        }
    }

    void limits(const json& j, const char* key, milp::SolveLimits& out) {
        if (!j.contains(key)) return;
        const json& v = j.at(key);
        if (!v.is_object()) {
            problems.push_back(fmt::format("'{}' must be an object", key));
            return;
        }
        unknown_keys(v, {"time_limit_s", "mip_rel_gap", "threads", "seed"}, key);
        number(v, "time_limit_s", out.time_limit_s, key, 1e-3, 1e7);
        number(v, "mip_rel_gap", out.mip_rel_gap, key, 0.0, 1.0);
        number(v, "threads", out.threads, key, 1, 1024);
        number(v, "seed", out.seed, key, 0, 2147483647);
    }
};

void parse_case_source(const json& j, const fs::path& base, CaseSource& src, Checker& ck) {
    if (!j.contains("case")) {
        ck.problems.push_back("missing field 'case' (file path, inline case, or {\"generator\": \"ieee123\"})");
        return;
    }
    const json& c = j.at("case");
    if (c.is_string()) {
        src.kind = CaseSource::Kind::File;
        fs::path p = c.get<std::string>();
        src.file = p.is_absolute() || base.empty() ? p : base / p;
        if (!fs::exists(src.file)) ck.problems.push_back(fmt::format("case file '{}' does not exist", src.file.string()));
    } else if (c.is_object() && c.contains("generator")) {
        ck.unknown_keys(c, {"generator", "seed"}, "case");
        if (c.at("generator") != "ieee123") {
            ck.problems.push_back("case: only the 'ieee123' generator is available");
        }
        src.kind = CaseSource::Kind::Ieee123;
        if (c.contains("seed")) {
            std::uint64_t s = 0;
            ck.number(c, "seed", s, "case", 0, 1e18);
            src.generator_seed = s;
        }
    } else if (c.is_object()) {
        src.kind = CaseSource::Kind::Inline;
        src.inline_doc = c;
    } else {
        ck.problems.push_back("'case' must be a path string or an object");
    }
}

}  // namespace

ScenarioSchemaError::ScenarioSchemaError(std::vector<std::string> problems)
    : std::runtime_error(join_problems(problems)), problems_(std::move(problems)) {}

ScenarioDocument parse_scenario(const json& j, const fs::path& base_dir) {
    if (!j.is_object()) throw ScenarioSchemaError({"scenario must be a JSON object"});
    Checker ck;
    ScenarioDocument d;
    d.raw = j;
    d.base_dir = base_dir;
    ck.unknown_keys(j, kTopKeys, "scenario");
    parse_case_source(j, base_dir, d.source, ck);

    if (j.contains("gei_fraction")) {
        double f = 0.0;
        const std::size_t before = ck.problems.size();
        ck.number(j, "gei_fraction", f, "scenario", 0.0, 1.0);
        if (ck.problems.size() == before) d.gei_fraction = f;
    }
    auto& cfg = d.config;
    ck.clock(j, "start", cfg.start_min);
    ck.clock(j, "end", cfg.end_min);
    ck.number(j, "horizon_steps", cfg.steps, "scenario", 1, 1000);
    ck.number(j, "dt_s", cfg.dt_s, "scenario", 1.0, 86400.0);
    ck.number(j, "tie_break", cfg.tie_break, "scenario", 0.0, 1.0);
    ck.number(j, "power_factor", cfg.power_factor, "scenario", 0.01, 1.0);
    ck.number(j, "seed", cfg.seed, "scenario", 0, 1e18);
    ck.number(j, "forecast_noise", cfg.forecast_noise, "scenario", 0.0, 10.0);
    ck.number(j, "workers", cfg.workers, "scenario", 1, 256);
    if (j.contains("frequency_bounds")) {
        const json& b = j.at("frequency_bounds");
        if (!b.is_object()) {
            ck.problems.push_back("'frequency_bounds' must be an object");
        } else {
            ck.unknown_keys(b, {"qss", "nadir", "rocof", "sync"}, "frequency_bounds");
            ck.number(b, "qss", cfg.bounds.qss, "frequency_bounds", 1e-6, 60.0);
            ck.number(b, "nadir", cfg.bounds.nadir, "frequency_bounds", 1e-6, 60.0);
            ck.number(b, "rocof", cfg.bounds.rocof, "frequency_bounds", 1e-6, 1000.0);
            ck.number(b, "sync", cfg.bounds.sync, "frequency_bounds", 1e-6, 60.0);
        }
    }
    if (j.contains("big_m")) {
        const json& b = j.at("big_m");
        if (!b.is_object()) {
            ck.problems.push_back("'big_m' must be an object");
        } else {
            ck.unknown_keys(b, {"power", "freq", "volt", "epsilon"}, "big_m");
            milp::BigMConfig m;
            ck.number(b, "power", m.power, "big_m", 1e-6, 1e12);
            ck.number(b, "freq", m.freq, "big_m", 1e-6, 1e6);
            ck.number(b, "volt", m.volt, "big_m", 1e-6, 1e6);
            ck.number(b, "epsilon", m.epsilon, "big_m", 0.0, 1.0);
            cfg.big_m = m;
        }
    }
    if (j.contains("non_gei_load")) {
        const json& v = j.at("non_gei_load");
        if (v == "fixed") {
            cfg.non_gei_load = restoration::LoadModel::Fixed;
        } else if (v == "flexible") {
            cfg.non_gei_load = restoration::LoadModel::Flexible;
        } else {
            ck.problems.push_back("'non_gei_load' must be \"fixed\" or \"flexible\"");
        }
    }
    if (j.contains("tg_schedule")) {
        const json& v = j.at("tg_schedule");
        if (!v.is_array()) {
            ck.problems.push_back("'tg_schedule' must be an array of {\"time\", \"y\"}");
        } else {
            std::vector<network::TgEvent> events;
            for (std::size_t i = 0; i < v.size(); ++i) {
                const json& e = v[i];
                const std::string where = fmt::format("tg_schedule[{}]", i);
                if (!e.is_object()) {
                    ck.problems.push_back(where + " must be an object");
                    continue;
                }
                ck.unknown_keys(e, {"time", "y"}, where);
                network::TgEvent ev;
                ck.clock(e, "time", ev.minute);
                if (!e.contains("time")) ck.problems.push_back(where + ": missing 'time'");
                if (!e.contains("y")) ck.problems.push_back(where + ": missing 'y'");
                ck.number(e, "y", ev.y, where, 0, 1);
                events.push_back(ev);
            }
            cfg.tg_schedule = events;
        }
    }
    ck.limits(j, "utility_limits", cfg.utility_limits);
    ck.limits(j, "house_limits", cfg.house_limits);
    if (j.contains("output_dir")) {
        if (!j.at("output_dir").is_string()) {
            ck.problems.push_back("'output_dir' must be a string");
        } else {
            fs::path p = j.at("output_dir").get<std::string>();
            d.output_dir = p.is_absolute() || base_dir.empty() ? p : base_dir / p;
        }
    }
    if (ck.problems.empty()) {
        try {
            cfg.validate();
        } catch (const std::exception& e) {
            ck.problems.push_back(e.what());
        }
    }
    if (!ck.problems.empty()) throw ScenarioSchemaError(ck.problems);
    return d;
}

ScenarioDocument load_scenario_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ScenarioSchemaError({fmt::format("cannot open scenario '{}'", path.string())});
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ScenarioSchemaError({fmt::format("{}: {}", path.string(), e.what())});
    }
    return parse_scenario(j, path.parent_path());
}

void apply_override(ScenarioDocument& doc, std::string_view assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string_view::npos || eq == 0) {
        throw ScenarioSchemaError({fmt::format("override '{}' must look like key=value", assignment)});
    }
    const std::string key(assignment.substr(0, eq));
    const std::string text(assignment.substr(eq + 1));
    json value = json::parse(text, nullptr, false);
    if (value.is_discarded()) value = text;

    json raw = doc.raw;
    json* node = &raw;
    std::size_t pos = 0;
    while (true) {
        const auto dot = key.find('.', pos);
        const std::string part = key.substr(pos, dot == std::string::npos ? std::string::npos : dot - pos);
        if (part.empty()) throw ScenarioSchemaError({fmt::format("override key '{}' is malformed", key)});
        if (dot == std::string::npos) {
            (*node)[part] = value;
            break;
        }
        json& next = (*node)[part];
        if (next.is_null()) next = json::object();
        if (!next.is_object()) {
            throw ScenarioSchemaError({fmt::format("override '{}': '{}' is not an object", key, part)});
        }
        node = &next;
        pos = dot + 1;
    }
    doc = parse_scenario(raw, doc.base_dir);
}

network::GridCase resolve_case(const ScenarioDocument& doc) {
    network::GridCase c;
    const auto& src = doc.source;
    switch (src.kind) {
        case CaseSource::Kind::File:
            c = network::load_case_file(src.file);
            break;
        case CaseSource::Kind::Inline:
            c = network::load_case(src.inline_doc);
            break;
        case CaseSource::Kind::Ieee123: {
            network::Ieee123Options o;
            o.seed = src.generator_seed.value_or(doc.config.seed);
            o.gei_fraction = doc.gei_fraction.value_or(1.0);
            return network::generate_ieee123(o);
        }
    }
    if (doc.gei_fraction) network::set_gei_fraction(c, *doc.gei_fraction, doc.config.seed);
    return c;
}

HouseDocument parse_house_document(const json& j) {
    std::vector<std::string> problems;
    HouseDocument d;
    if (!j.is_object()) throw ScenarioSchemaError({"house document must be a JSON object"});
    for (const auto& [k, v] : j.items()) {
        if (k != "params" && k != "state" && k != "forecast" && k != "dt_s") {
            problems.push_back(fmt::format("house: unknown field '{}'", k));
        }
    }
    for (const char* k : {"params", "state", "forecast"}) {
        if (!j.contains(k) || !j.at(k).is_object()) problems.push_back(fmt::format("house: '{}' object required", k));
    }
    if (!problems.empty()) throw ScenarioSchemaError(problems);
    d.params = network::house_params_from_json(j.at("params"), problems, "house.params");
    d.dt_s = j.value("dt_s", 900.0);
    if (!(d.dt_s > 0)) problems.push_back("house: dt_s must be positive");
    try {
        const json& st = j.at("state");
        d.state.t_room = st.at("t_room").get<double>();
        d.state.e_es = st.value("e_es", 0.0);
        d.state.clock_min = network::parse_clock(st.value("clock", std::string("00:00")));
        d.state.p_es_c_prev = st.value("p_es_c_prev", 0.0);
        d.state.p_es_d_prev = st.value("p_es_d_prev", 0.0);
        d.state.connected = st.value("connected", false);
        if (st.contains("t_wall")) {
            d.state.t_wall = st.at("t_wall").get<std::array<double, 4>>();
        } else {
            const double t_out = j.at("forecast").at("t_out").at(0).get<double>();
            d.state.t_wall.fill(0.5 * (d.state.t_room + t_out));
        }
        const json& f = j.at("forecast");
        d.forecast.t_out = f.at("t_out").get<std::vector<double>>();
        d.forecast.q_rad_wall = f.at("q_rad_wall").get<std::array<std::vector<double>, 4>>();
        d.forecast.q_rad_win = f.at("q_rad_win").get<std::vector<double>>();
        d.forecast.q_int = f.at("q_int").get<std::vector<double>>();
        d.forecast.p_pv_hat = f.at("p_pv_hat").get<std::vector<double>>();
        d.forecast.p_load_hat = f.at("p_load_hat").get<std::vector<double>>();
    } catch (const std::exception& e) {
        problems.push_back(fmt::format("house: {}", e.what()));
    }
    if (problems.empty()) {
        try {
            d.params.validate();
            d.forecast.validate(d.params);
            d.state.validate(d.params);
        } catch (const std::exception& e) {
            problems.push_back(e.what());
        }
    }
    if (!problems.empty()) throw ScenarioSchemaError(problems);
    return d;
}

HouseDocument load_house_document(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ScenarioSchemaError({fmt::format("cannot open house document '{}'", path.string())});
    try {
        return parse_house_document(json::parse(in));
    } catch (const json::parse_error& e) {
        throw ScenarioSchemaError({fmt::format("{}: {}", path.string(), e.what())});
    }
}

json to_json(const HouseDocument& d) {
    const auto& s = d.state;
    const auto& f = d.forecast;
    return {{"params", network::to_json(d.params)},
            {"state",
             {{"t_room", s.t_room},
              {"e_es", s.e_es},
              {"t_wall", s.t_wall},
              {"clock", network::format_clock(s.clock_min)},
              {"p_es_c_prev", s.p_es_c_prev},
              {"p_es_d_prev", s.p_es_d_prev},
              {"connected", s.connected}}},
            {"forecast",
             {{"t_out", f.t_out},
              {"q_rad_wall", f.q_rad_wall},
              {"q_rad_win", f.q_rad_win},
              {"q_int", f.q_int},
              {"p_pv_hat", f.p_pv_hat},
              {"p_load_hat", f.p_load_hat}}},
            {"dt_s", d.dt_s}};
}

HouseDocument house_document_from_case(const network::GridCase& c, const std::string& house_id, int start_min,
                                       std::size_t steps, double dt_s) {
    const auto& h = c.house(house_id);
    HouseDocument d;
    d.params = h.params;
    d.state = network::house_initial_state(c, h, start_min);
    d.forecast = network::house_forecast(c, h, start_min, steps, dt_s / 60.0);
    d.dt_s = dt_s;
    return d;
}

json default_ieee123_scenario(double gei_fraction, std::uint64_t seed) {
    return {{"case", {{"generator", "ieee123"}}},
            {"gei_fraction", gei_fraction},
            {"seed", seed},
            {"start", "09:00"},
            {"end", "12:00"},
            {"horizon_steps", 12},
            {"dt_s", 900},
            {"tg_schedule", json::array({{{"time", "00:00"}, {"y", 0}}, {{"time", "11:45"}, {"y", 1}}})},
            {"utility_limits", {{"time_limit_s", 60}, {"mip_rel_gap", 1e-4}}}};
}

}  // namespace bsr::io

#include "bsr/network/case_json.hpp"

#include <fstream>

#include <fmt/format.h>

namespace bsr::network {

using nlohmann::json;

namespace {

// Collects schema problems instead of stopping at the first one.
class Reader {
public:
    explicit Reader(std::vector<std::string>& problems) : problems_(problems) {}

    double num(const json& j, const char* key, const std::string& where, std::optional<double> dflt = {}) {
        if (!j.is_object() || !j.contains(key)) {
            if (dflt) return *dflt;
            problems_.push_back(fmt::format("{}: missing field '{}'", where, key));
            return 0.0;
        }
        const json& v = j.at(key);
        if (!v.is_number()) {
            problems_.push_back(fmt::format("{}: field '{}' must be a number", where, key));
            return dflt.value_or(0.0);
        }
        return v.get<double>();
    }

    std::string str(const json& j, const char* key, const std::string& where, std::optional<std::string> dflt = {}) {
        if (!j.is_object() || !j.contains(key)) {
            if (dflt) return *dflt;
            problems_.push_back(fmt::format("{}: missing field '{}'", where, key));
            return {};
        }
        const json& v = j.at(key);
        if (v.is_string()) return v.get<std::string>();
        if (v.is_number_integer()) return std::to_string(v.get<long>());
        problems_.push_back(fmt::format("{}: field '{}' must be a string", where, key));
        return {};
    }

    bool boolean(const json& j, const char* key, const std::string& where, bool dflt) {
        if (!j.is_object() || !j.contains(key)) return dflt;
        if (!j.at(key).is_boolean()) {
            problems_.push_back(fmt::format("{}: field '{}' must be true/false", where, key));
            return dflt;
        }
        return j.at(key).get<bool>();
    }

    std::vector<double> series(const json& j, const char* key, const std::string& where, std::size_t expect = 0) {
        std::vector<double> out;
        if (!j.is_object() || !j.contains(key)) {
            problems_.push_back(fmt::format("{}: missing array '{}'", where, key));
            return out;
        }
        const json& v = j.at(key);
        if (!v.is_array()) {
            problems_.push_back(fmt::format("{}: '{}' must be an array", where, key));
            return out;
        }
        for (const json& x : v) {
            if (!x.is_number()) {
                problems_.push_back(fmt::format("{}: '{}' must hold numbers", where, key));
                return {};
            }
            out.push_back(x.get<double>());
        }
        if (expect && out.size() != expect) {
            problems_.push_back(fmt::format("{}: '{}' must have {} entries", where, key, expect));
        }
        return out;
    }

    PhaseSet phases(const json& j, const char* key, const std::string& where, std::optional<PhaseSet> dflt = {}) {
        if (!j.is_object() || !j.contains(key)) {
            if (dflt) return *dflt;
        }
        const std::string s = str(j, key, where);
        try {
            return PhaseSet::from_string(s);
        } catch (const CaseError& e) {
            problems_.push_back(fmt::format("{}: {}", where, e.problems().front()));
            return {};
        }
    }

    Mat3 matrix(const json& j, const char* key, const std::string& where) {
        const std::vector<double> v = series(j, key, where, 9);
        Mat3 m{};
        if (v.size() == 9) {
            for (int p = 0; p < 3; ++p) {
                for (int q = 0; q < 3; ++q) m[p][q] = v[static_cast<std::size_t>(3 * p + q)];
            }
        }
        return m;
    }

    const json& array(const json& j, const char* key, const std::string& where) {
        static const json empty = json::array();
        if (!j.contains(key)) {
            problems_.push_back(fmt::format("{}: missing array '{}'", where, key));
            return empty;
        }
        if (!j.at(key).is_array()) {
            problems_.push_back(fmt::format("{}: '{}' must be an array", where, key));
            return empty;
        }
        return j.at(key);
    }

    void fail(std::string msg) { problems_.push_back(std::move(msg)); }

private:
    std::vector<std::string>& problems_;
};

json mat_json(const Mat3& m) {
    json a = json::array();
    for (const auto& row : m) {
        for (double v : row) a.push_back(v);
    }
    return a;
}

}  // namespace

json to_json(const gei::HouseParams& p) {
    json j;
    if (p.thermal) {
        const auto& t = *p.thermal;
        j["thermal"] = {{"c_wall", t.c_wall}, {"r_wall", t.r_wall}, {"w_wall", t.w_wall}, {"r_win", t.r_win},
                        {"c_room", t.c_room}, {"w_win", t.w_win},   {"cop", t.cop}};
    }
    if (p.hvac) {
        const auto& h = *p.hvac;
        j["hvac"] = {{"t_set_lo", h.t_set_lo},
                     {"t_set_hi", h.t_set_hi},
                     {"q_max", h.q_max},
                     {"p_max", h.p_max},
                     {"mode", h.mode == gei::HvacMode::Cooling ? "cooling" : "heating"}};
    }
    if (p.bes) {
        const auto& b = *p.bes;
        j["bes"] = {{"e_lo", b.e_lo}, {"e_hi", b.e_hi}, {"p_c_max", b.p_c_max}, {"p_d_max", b.p_d_max},
                    {"eta_c", b.eta_c}, {"eta_d", b.eta_d}};
        auto put_ramp = [&](const char* key, double v) {
            if (std::isfinite(v)) j["bes"][key] = v;
        };
        put_ramp("ramp_c_lo", b.ramp_c_lo);
        put_ramp("ramp_c_hi", b.ramp_c_hi);
        put_ramp("ramp_d_lo", b.ramp_d_lo);
        put_ramp("ramp_d_hi", b.ramp_d_hi);
    }
    j["has_pv"] = p.has_pv;
    j["has_load"] = p.has_load;
    j["pv_floor"] = p.pv_floor;
    j["load_floor"] = p.load_floor;
    return j;
}

gei::HouseParams house_params_from_json(const json& j, std::vector<std::string>& problems, const std::string& where) {
    Reader rd(problems);
    gei::HouseParams p;
    if (!j.is_object()) {
        problems.push_back(where + ": house parameters must be an object");
        return p;
    }
    auto arr4 = [&](const json& o, const char* key, const std::string& w) {
        std::array<double, 4> a{};
        const std::vector<double> v = rd.series(o, key, w, 4);
        if (v.size() == 4) std::copy(v.begin(), v.end(), a.begin());
        return a;
    };
    if (j.contains("thermal")) {
        const json& t = j.at("thermal");
        const std::string w = where + ".thermal";
        gei::HouseThermalParams th;
        th.c_wall = arr4(t, "c_wall", w);
        th.r_wall = arr4(t, "r_wall", w);
        th.w_wall = arr4(t, "w_wall", w);
        th.r_win = rd.num(t, "r_win", w);
        th.c_room = rd.num(t, "c_room", w);
        th.w_win = rd.num(t, "w_win", w);
        th.cop = rd.num(t, "cop", w);
        p.thermal = th;
    }
    if (j.contains("hvac")) {
        const json& h = j.at("hvac");
        const std::string w = where + ".hvac";
        gei::HvacParams hv;
        hv.t_set_lo = rd.num(h, "t_set_lo", w);
        hv.t_set_hi = rd.num(h, "t_set_hi", w);
        hv.q_max = rd.num(h, "q_max", w);
        hv.p_max = rd.num(h, "p_max", w);
        const std::string mode = rd.str(h, "mode", w, std::string("cooling"));
        if (mode == "cooling") {
            hv.mode = gei::HvacMode::Cooling;
        } else if (mode == "heating") {
            hv.mode = gei::HvacMode::Heating;
        } else {
            rd.fail(w + ": mode must be 'cooling' or 'heating'");
        }
        p.hvac = hv;
    }
    if (j.contains("bes")) {
        const json& b = j.at("bes");
        const std::string w = where + ".bes";
        gei::BesParams bp;
        const double inf = std::numeric_limits<double>::infinity();
        bp.e_lo = rd.num(b, "e_lo", w);
        bp.e_hi = rd.num(b, "e_hi", w);
        bp.p_c_max = rd.num(b, "p_c_max", w);
        bp.p_d_max = rd.num(b, "p_d_max", w);
        bp.eta_c = rd.num(b, "eta_c", w, 0.95);
        bp.eta_d = rd.num(b, "eta_d", w, 0.95);
        bp.ramp_c_lo = rd.num(b, "ramp_c_lo", w, -inf);
        bp.ramp_c_hi = rd.num(b, "ramp_c_hi", w, inf);
        bp.ramp_d_lo = rd.num(b, "ramp_d_lo", w, -inf);
        bp.ramp_d_hi = rd.num(b, "ramp_d_hi", w, inf);
        p.bes = bp;
    }
    p.has_pv = rd.boolean(j, "has_pv", where, false);
    p.has_load = rd.boolean(j, "has_load", where, true);
    p.pv_floor = rd.num(j, "pv_floor", where, 0.5);
    p.load_floor = rd.num(j, "load_floor", where, 0.5);
    return p;
}

GridCase load_case(const json& doc) {
    std::vector<std::string> problems;
    Reader rd(problems);
    GridCase c;
    if (!doc.is_object()) throw CaseError({"case document must be a JSON object"});

    c.name = rd.str(doc, "name", "case", std::string("case"));
    if (doc.contains("base")) {
        c.base.kv_ll = rd.num(doc["base"], "kv_ll", "base", 4.16);
        c.base.kva_per_phase = rd.num(doc["base"], "kva_per_phase", "base", 100.0);
    }

    const json& buses = rd.array(doc, "buses", "case");
    for (std::size_t i = 0; i < buses.size(); ++i) {
        const std::string w = fmt::format("buses[{}]", i);
        Bus b;
        b.id = rd.str(buses[i], "id", w);
        b.phases = rd.phases(buses[i], "phases", w);
        c.buses.push_back(std::move(b));
    }

    const json& lines = rd.array(doc, "lines", "case");
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const std::string w = fmt::format("lines[{}]", i);
        Line l;
        l.from = rd.str(lines[i], "from", w);
        l.to = rd.str(lines[i], "to", w);
        l.id = rd.str(lines[i], "id", w, l.from + "-" + l.to);
        l.phases = rd.phases(lines[i], "phases", w);
        l.r_ohm = rd.matrix(lines[i], "r_ohm", w);
        l.x_ohm = rd.matrix(lines[i], "x_ohm", w);
        c.lines.push_back(std::move(l));
    }

    const json& switches = rd.array(doc, "switches", "case");
    for (std::size_t i = 0; i < switches.size(); ++i) {
        const std::string w = fmt::format("switches[{}]", i);
        Switch s;
        s.id = rd.str(switches[i], "id", w);
        s.from = rd.str(switches[i], "from", w);
        s.to = rd.str(switches[i], "to", w);
        s.phases = rd.phases(switches[i], "phases", w, PhaseSet::all());
        const std::string kind = rd.str(switches[i], "kind", w);
        if (kind == "ESW") {
            s.kind = SwitchKind::Esw;
        } else if (kind == "SSW") {
            s.kind = SwitchKind::Ssw;
        } else {
            rd.fail(fmt::format("{}: kind must be ESW or SSW, got '{}'", w, kind));
        }
        c.switches.push_back(std::move(s));
    }

    if (doc.contains("ders")) {
        const json& ders = rd.array(doc, "ders", "case");
        for (std::size_t i = 0; i < ders.size(); ++i) {
            const std::string w = fmt::format("ders[{}]", i);
            const json& d = ders[i];
            DerUnit u;
            u.id = rd.str(d, "id", w);
            u.bus = rd.str(d, "bus", w);
            const std::string kind = rd.str(d, "kind", w);
            if (kind == "gfm_bess") {
                u.kind = DerKind::GfmBess;
                u.s_rat = rd.num(d, "s_rat", w);
                u.e_cap = rd.num(d, "e_cap", w);
                u.e_init = rd.num(d, "e_init", w);
                u.d = rd.num(d, "D", w);
                u.k_f = rd.num(d, "k_f", w);
                u.h = rd.num(d, "H", w);
                u.gamma = rd.num(d, "gamma", w, 0.3);
            } else if (kind == "gfl_pv") {
                u.kind = DerKind::GflPv;
                u.p_rated = rd.num(d, "p_rated", w);
                u.s_rat = rd.num(d, "s_rat", w, u.p_rated);
            } else {
                rd.fail(fmt::format("{}: kind must be gfm_bess or gfl_pv, got '{}'", w, kind));
            }
            c.ders.push_back(std::move(u));
        }
    }

    if (doc.contains("tg") && !doc["tg"].is_null()) {
        const json& t = doc["tg"];
        TgInterface tg;
        tg.bus = rd.str(t, "bus", "tg");
        tg.ss_rat = rd.num(t, "ss_rat", "tg");
        const json& sched = rd.array(t, "schedule", "tg");
        for (std::size_t i = 0; i < sched.size(); ++i) {
            const std::string w = fmt::format("tg.schedule[{}]", i);
            TgEvent e;
            try {
                e.minute = parse_clock(rd.str(sched[i], "time", w));
            } catch (const CaseError& err) {
                rd.fail(w + ": " + err.problems().front());
            }
            e.y = static_cast<int>(rd.num(sched[i], "y", w));
            tg.schedule.push_back(e);
        }
        c.tg = tg;
    }

    if (doc.contains("houses")) {
        const json& houses = rd.array(doc, "houses", "case");
        for (std::size_t i = 0; i < houses.size(); ++i) {
            const json& h = houses[i];
            HouseSpec hs;
            hs.id = rd.str(h, "id", fmt::format("houses[{}]", i));
            const std::string w = fmt::format("house {}", hs.id);
            hs.bus = rd.str(h, "bus", w);
            const std::string ph = rd.str(h, "phase", w);
            hs.phase = ph.size() == 1 ? phase_from_char(ph[0]) : -1;
            if (hs.phase < 0) rd.fail(fmt::format("{}: phase must be one of a, b, c", w));
            hs.peak_kw = rd.num(h, "peak_kw", w);
            hs.pv_kw = rd.num(h, "pv_kw", w, 0.0);
            hs.has_gei = rd.boolean(h, "has_gei", w, false);
            hs.t_room0 = rd.num(h, "t_room0", w, 24.0);
            hs.soc0 = rd.num(h, "soc0", w, 0.45);
            hs.params = house_params_from_json(h.value("params", json::object()), problems, w);
            hs.params.id = hs.id;
            c.houses.push_back(std::move(hs));
        }
    }

    if (doc.contains("profiles")) {
        const json& p = doc["profiles"];
        c.profiles.step_min = rd.num(p, "step_min", "profiles", 15.0);
        c.profiles.solar = rd.series(p, "solar", "profiles");
        c.profiles.load = rd.series(p, "load", "profiles");
        c.profiles.t_out = rd.series(p, "t_out", "profiles");
        c.profiles.q_int = rd.series(p, "q_int", "profiles");
        c.profiles.rad_wall_factor = rd.num(p, "rad_wall_factor", "profiles", 0.5);
        c.profiles.rad_win_factor = rd.num(p, "rad_win_factor", "profiles", 1.0);
    } else {
        rd.fail("case: missing object 'profiles'");
    }

    if (doc.contains("blocks")) {
        const json& blocks = rd.array(doc, "blocks", "case");
        for (std::size_t i = 0; i < blocks.size(); ++i) {
            const std::string w = fmt::format("blocks[{}]", i);
            std::vector<std::string> members;
            const json& m = rd.array(blocks[i], "buses", w);
            for (const json& id : m) {
                if (id.is_string()) {
                    members.push_back(id.get<std::string>());
                } else {
                    rd.fail(w + ": bus ids must be strings");
                }
            }
            c.declared_blocks.push_back(std::move(members));
        }
    }

    // Topology checks run even when the schema had problems so the caller
    // sees everything at once.
    try {
        c.finalize();
    } catch (const CaseError& e) {
        problems.insert(problems.end(), e.problems().begin(), e.problems().end());
    }
    if (!problems.empty()) throw CaseError(std::move(problems));
    return c;
}

GridCase load_case_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw CaseError({fmt::format("cannot open case file {}", path.string())});
    json doc;
    try {
        in >> doc;
    } catch (const json::parse_error& e) {
        throw CaseError({fmt::format("{}: {}", path.string(), e.what())});
    }
    return load_case(doc);
}

json to_json(const GridCase& c) {
    json doc;
    doc["name"] = c.name;
    doc["base"] = {{"kv_ll", c.base.kv_ll}, {"kva_per_phase", c.base.kva_per_phase}};
    doc["buses"] = json::array();
    for (const Bus& b : c.buses) doc["buses"].push_back({{"id", b.id}, {"phases", b.phases.to_string()}});
    doc["lines"] = json::array();
    for (const Line& l : c.lines) {
        doc["lines"].push_back({{"id", l.id},
                                {"from", l.from},
                                {"to", l.to},
                                {"phases", l.phases.to_string()},
                                {"r_ohm", mat_json(l.r_ohm)},
                                {"x_ohm", mat_json(l.x_ohm)}});
    }
    doc["switches"] = json::array();
    for (const Switch& s : c.switches) {
        doc["switches"].push_back({{"id", s.id},
                                   {"from", s.from},
                                   {"to", s.to},
                                   {"kind", std::string(to_string(s.kind))},
                                   {"phases", s.phases.to_string()}});
    }
    doc["ders"] = json::array();
    for (const DerUnit& d : c.ders) {
        json j{{"id", d.id}, {"bus", d.bus}, {"s_rat", d.s_rat}};
        if (d.kind == DerKind::GfmBess) {
            j["kind"] = "gfm_bess";
            j["e_cap"] = d.e_cap;
            j["e_init"] = d.e_init;
            j["D"] = d.d;
            j["k_f"] = d.k_f;
            j["H"] = d.h;
            j["gamma"] = d.gamma;
        } else {
            j["kind"] = "gfl_pv";
            j["p_rated"] = d.p_rated;
        }
        doc["ders"].push_back(j);
    }
    if (c.tg) {
        json sched = json::array();
        for (const TgEvent& e : c.tg->schedule) sched.push_back({{"time", format_clock(e.minute)}, {"y", e.y}});
        doc["tg"] = {{"bus", c.tg->bus}, {"ss_rat", c.tg->ss_rat}, {"schedule", sched}};
    }
    doc["houses"] = json::array();
    for (const HouseSpec& h : c.houses) {
        doc["houses"].push_back({{"id", h.id},
                                 {"bus", h.bus},
                                 {"phase", std::string(1, phase_name(h.phase))},
                                 {"peak_kw", h.peak_kw},
                                 {"pv_kw", h.pv_kw},
                                 {"has_gei", h.has_gei},
                                 {"t_room0", h.t_room0},
                                 {"soc0", h.soc0},
                                 {"params", to_json(h.params)}});
    }
    const Profiles& p = c.profiles;
    doc["profiles"] = {{"step_min", p.step_min}, {"solar", p.solar},   {"load", p.load},
                       {"t_out", p.t_out},       {"q_int", p.q_int},   {"rad_wall_factor", p.rad_wall_factor},
                       {"rad_win_factor", p.rad_win_factor}};
    doc["blocks"] = json::array();
    for (const BusBlock& b : c.blocks) doc["blocks"].push_back({{"id", b.id}, {"buses", b.buses}});
    return doc;
}

void save_case_file(const GridCase& c, const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw CaseError({fmt::format("cannot write case file {}", path.string())});
    out << to_json(c).dump(1) << '\n';
}

}  // namespace bsr::network

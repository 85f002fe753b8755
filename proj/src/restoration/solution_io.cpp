#include "bsr/restoration/solution_io.hpp"

#include <fstream>

#include <fmt/format.h>

#include "bsr/io/csv.hpp"

namespace bsr::restoration {

namespace fs = std::filesystem;
using io::CsvTable;
using io::CsvWriter;
using io::num;
using nlohmann::json;

json to_json(const PriorState& p) {
    return {{"clock", network::format_clock(p.clock_min)},
            {"switch_y", p.switch_y},
            {"block_y", p.block_y},
            {"gfm_energy", p.gfm_energy},
            {"gfm_p_total", p.gfm_p_total},
            {"tg_status", p.tg_status}};
}

PriorState prior_from_json(const json& j) {
    PriorState p;
    p.clock_min = network::parse_clock(j.at("clock").get<std::string>());
    p.switch_y = j.at("switch_y").get<std::map<std::string, int>>();
    p.block_y = j.at("block_y").get<std::map<std::string, int>>();
    p.gfm_energy = j.at("gfm_energy").get<std::map<std::string, double>>();
    p.gfm_p_total = j.at("gfm_p_total").get<std::map<std::string, double>>();
    p.tg_status = j.at("tg_status").get<int>();
    return p;
}

json to_json(const RestorationConfig& c) {
    json j = {{"steps", c.steps},
              {"dt_s", c.dt_s},
              {"bounds", {{"qss", c.bounds.qss}, {"nadir", c.bounds.nadir}, {"rocof", c.bounds.rocof}, {"sync", c.bounds.sync}}},
              {"tie_break", c.tie_break},
              {"power_factor", c.power_factor},
              {"non_gei_load", c.non_gei_load == LoadModel::Fixed ? "fixed" : "flexible"}};
    if (c.big_m) {
        j["big_m"] = {{"power", c.big_m->power}, {"freq", c.big_m->freq}, {"volt", c.big_m->volt}, {"epsilon", c.big_m->epsilon}};
    }
    return j;
}

RestorationConfig config_from_json(const json& j) {
    RestorationConfig c;
    c.steps = j.value("steps", c.steps);
    c.dt_s = j.value("dt_s", c.dt_s);
    if (j.contains("bounds")) {
        const auto& b = j.at("bounds");
        c.bounds.qss = b.value("qss", c.bounds.qss);
        c.bounds.nadir = b.value("nadir", c.bounds.nadir);
        c.bounds.rocof = b.value("rocof", c.bounds.rocof);
        c.bounds.sync = b.value("sync", c.bounds.sync);
    }
    c.tie_break = j.value("tie_break", c.tie_break);
    c.power_factor = j.value("power_factor", c.power_factor);
    const std::string load = j.value("non_gei_load", std::string("fixed"));
    if (load == "fixed") {
        c.non_gei_load = LoadModel::Fixed;
    } else if (load == "flexible") {
        c.non_gei_load = LoadModel::Flexible;
    } else {
        throw SolutionIoError("non_gei_load must be 'flexible' or 'fixed', got '" + load + "'");
    }
    if (j.contains("big_m") && !j.at("big_m").is_null()) {
        const auto& b = j.at("big_m");
        milp::BigMConfig m;
        m.power = b.value("power", m.power);
        m.freq = b.value("freq", m.freq);
        m.volt = b.value("volt", m.volt);
        m.epsilon = b.value("epsilon", m.epsilon);
        c.big_m = m;
    }
    return c;
}

json to_json(const gei::FlexibilityEnvelope& e) {
    return {{"horizon_start", network::format_clock(e.horizon_start_min)},
            {"dt_s", e.dt_s},
            {"lower", e.lower},
            {"upper", e.upper}};
}

gei::FlexibilityEnvelope envelope_from_json(const json& j) {
    gei::FlexibilityEnvelope e;
    e.horizon_start_min = network::parse_clock(j.at("horizon_start").get<std::string>());
    e.dt_s = j.at("dt_s").get<double>();
    e.lower = j.at("lower").get<std::vector<double>>();
    e.upper = j.at("upper").get<std::vector<double>>();
    if (e.lower.size() != e.upper.size()) throw SolutionIoError("envelope bounds differ in length");
    return e;
}

namespace {

std::string stamp(const RestorationSolution& s, std::size_t k) { return network::format_clock(s.timestamp(k)); }

std::string step(std::size_t k) { return std::to_string(k + 1); }

}  // namespace

void write_solution_dir(const fs::path& dir, const network::GridCase& c, const RestorationInputs& inputs,
                        const RestorationConfig& cfg, const RestorationSolution& s) {
    fs::create_directories(dir);
    const std::size_t N = s.steps;
    {
        json meta = {{"case", c.name},
                     {"status", s.status},
                     {"gap", s.gap},
                     {"objective_kwh", s.objective},
                     {"objective_total", s.objective_total},
                     {"steps", N},
                     {"dt_s", s.dt_s},
                     {"start", network::format_clock(s.start_min)}};
        json env = json::object();
        for (const auto& [id, e] : inputs.envelopes) env[id] = to_json(e);
        json doc = {{"meta", meta},
                    {"config", to_json(cfg)},
                    {"prior", to_json(inputs.prior)},
                    {"envelopes", env},
                    {"load_forecast", inputs.load_forecast},
                    {"pv_forecast", inputs.pv_forecast}};
        std::ofstream out(dir / "solution.json");
        if (!out) throw SolutionIoError("cannot write " + (dir / "solution.json").string());
        out << doc.dump(1) << '\n';
    }
    {
        CsvWriter w(dir / "switch_schedule.csv", {"switch", "kind", "step", "timestamp", "y", "z"});
        for (std::size_t i = 0; i < s.switch_ids.size(); ++i) {
            const auto& sw = *std::find_if(c.switches.begin(), c.switches.end(),
                                           [&](const network::Switch& x) { return x.id == s.switch_ids[i]; });
            for (std::size_t k = 0; k < N; ++k) {
                w.row({sw.id, std::string(network::to_string(sw.kind)), step(k), stamp(s, k),
                       std::to_string(s.y_switch[i][k]), std::to_string(s.z_switch[i][k])});
            }
        }
    }
    {
        CsvWriter w(dir / "blocks.csv", {"block", "step", "timestamp", "y", "f"});
        for (std::size_t b = 0; b < s.block_ids.size(); ++b) {
            for (std::size_t k = 0; k < N; ++k) {
                w.row({s.block_ids[b], step(k), stamp(s, k), std::to_string(s.y_block[b][k]), num(s.f_block[b][k])});
            }
        }
    }
    {
        CsvWriter w(dir / "voltages.csv", {"bus", "phase", "step", "timestamp", "y", "v", "pu"});
        for (std::size_t i = 0; i < s.bus_ids.size(); ++i) {
            const auto& bus = c.bus(s.bus_ids[i]);
            for (std::size_t k = 0; k < N; ++k) {
                for (int p : bus.phases.list()) {
                    const double v = s.v[i][k][static_cast<std::size_t>(p)];
                    w.row({bus.id, std::string(1, network::phase_name(p)), step(k), stamp(s, k),
                           std::to_string(s.y_bus[i][k]), num(v), num(std::sqrt(std::max(v, 0.0)))});
                }
            }
        }
    }
    {
        CsvWriter f(dir / "frequencies.csv",
                    {"unit", "step", "timestamp", "f", "df_qss", "rocof", "nadir", "df_star", "delta", "dp", "e"});
        CsvWriter pw(dir / "gfm_power.csv", {"unit", "phase", "step", "timestamp", "p", "q", "dv"});
        for (const auto& g : s.gfm) {
            const auto& d = *std::find_if(c.ders.begin(), c.ders.end(), [&](const network::DerUnit& u) { return u.id == g.unit; });
            const auto phases = c.bus(d.bus).phases.list();
            for (std::size_t k = 0; k < N; ++k) {
                f.row({g.unit, step(k), stamp(s, k), num(g.f[k]), num(g.df_qss[k]), num(g.rocof[k]), num(g.nadir[k]),
                       num(g.df_star[k]), num(g.delta[k]), num(g.dp[k]), num(g.e[k])});
                for (int p : phases) {
                    const auto pp = static_cast<std::size_t>(p);
                    pw.row({g.unit, std::string(1, network::phase_name(p)), step(k), stamp(s, k), num(g.p[k][pp]),
                            num(g.q[k][pp]), num(g.dv[k][pp])});
                }
            }
        }
    }
    {
        CsvWriter w(dir / "tg.csv", {"phase", "step", "timestamp", "y", "p", "q", "v", "f"});
        if (c.tg) {
            for (std::size_t k = 0; k < s.tg.y.size(); ++k) {
                for (int p : c.bus(c.tg->bus).phases.list()) {
                    const auto pp = static_cast<std::size_t>(p);
                    w.row({std::string(1, network::phase_name(p)), step(k), stamp(s, k), std::to_string(s.tg.y[k]),
                           num(s.tg.p[k][pp]), num(s.tg.q[k][pp]), num(s.tg.v[k][pp]), num(s.tg.f[k])});
                }
            }
        }
    }
    {
        CsvWriter w(dir / "flows.csv", {"branch", "kind", "phase", "step", "timestamp", "p", "q"});
        for (const auto& fl : s.flows) {
            network::PhaseSet phases;
            if (fl.is_switch) {
                phases = std::find_if(c.switches.begin(), c.switches.end(), [&](const network::Switch& x) { return x.id == fl.id; })->phases;
            } else {
                phases = std::find_if(c.lines.begin(), c.lines.end(), [&](const network::Line& x) { return x.id == fl.id; })->phases;
            }
            for (std::size_t k = 0; k < N; ++k) {
                for (int p : phases.list()) {
                    const auto pp = static_cast<std::size_t>(p);
                    w.row({fl.id, fl.is_switch ? "switch" : "line", std::string(1, network::phase_name(p)), step(k),
                           stamp(s, k), num(fl.p[k][pp]), num(fl.q[k][pp])});
                }
            }
        }
    }
    {
        CsvWriter w(dir / "dispatch.csv", {"house", "step", "timestamp", "p_dis"});
        for (const auto& [id, d] : s.dispatch) {
            for (std::size_t k = 0; k < N; ++k) w.row({id, step(k), stamp(s, k), num(d[k])});
        }
    }
    {
        CsvWriter w(dir / "served_load.csv", {"house", "step", "timestamp", "kw"});
        for (const auto& [id, d] : s.served) {
            for (std::size_t k = 0; k < N; ++k) w.row({id, step(k), stamp(s, k), num(d[k])});
        }
    }
    {
        CsvWriter w(dir / "pv.csv", {"unit", "phase", "step", "timestamp", "p"});
        for (const auto& [id, series] : s.pv) {
            const auto& d = *std::find_if(c.ders.begin(), c.ders.end(), [&](const network::DerUnit& u) { return u.id == id; });
            for (std::size_t k = 0; k < N; ++k) {
                for (int p : c.bus(d.bus).phases.list()) {
                    w.row({id, std::string(1, network::phase_name(p)), step(k), stamp(s, k),
                           num(series[k][static_cast<std::size_t>(p)])});
                }
            }
        }
    }
}

namespace {

// Ids in order of first appearance.
class Order {
public:
    std::size_t at(const std::string& id) {
        const auto it = pos_.find(id);
        if (it != pos_.end()) return it->second;
        ids_.push_back(id);
        return pos_[id] = ids_.size() - 1;
    }
    const std::vector<std::string>& ids() const { return ids_; }

private:
    std::vector<std::string> ids_;
    std::map<std::string, std::size_t> pos_;
};

std::size_t step_of(const CsvTable& t, std::size_t r, std::size_t N) {
    const long k = t.integer(r, "step");
    if (k < 1 || static_cast<std::size_t>(k) > N) {
        throw SolutionIoError(fmt::format("row {}: step {} outside 1..{}", r + 2, k, N));
    }
    return static_cast<std::size_t>(k - 1);
}

std::size_t phase_of(const CsvTable& t, std::size_t r) {
    const auto& p = t.at(r, "phase");
    if (p.size() != 1) throw SolutionIoError(fmt::format("row {}: bad phase '{}'", r + 2, p));
    return static_cast<std::size_t>(network::phase_from_char(p[0]));
}

template <typename T>
void grow(std::vector<std::vector<T>>& v, std::size_t i, std::size_t N, T fill = T{}) {
    if (v.size() <= i) v.resize(i + 1, std::vector<T>(N, fill));
}

}  // namespace

SavedSolution read_solution_dir(const fs::path& dir) {
    SavedSolution out;
    json doc;
    {
        std::ifstream in(dir / "solution.json");
        if (!in) throw SolutionIoError("missing " + (dir / "solution.json").string());
        try {
            doc = json::parse(in);
        } catch (const json::exception& e) {
            throw SolutionIoError(fmt::format("{}: {}", (dir / "solution.json").string(), e.what()));
        }
    }
    try {
        const auto& meta = doc.at("meta");
        out.case_name = meta.value("case", "");
        out.config = config_from_json(doc.at("config"));
        out.inputs.prior = prior_from_json(doc.at("prior"));
        for (const auto& [id, e] : doc.at("envelopes").items()) out.inputs.envelopes[id] = envelope_from_json(e);
        out.inputs.load_forecast = doc.at("load_forecast").get<std::map<std::string, std::vector<double>>>();
        out.inputs.pv_forecast = doc.at("pv_forecast").get<std::map<std::string, std::vector<double>>>();
        auto& s = out.solution;
        s.status = meta.at("status").get<std::string>();
        s.gap = meta.at("gap").get<double>();
        s.objective = meta.at("objective_kwh").get<double>();
        s.objective_total = meta.at("objective_total").get<double>();
        s.steps = meta.at("steps").get<std::size_t>();
        s.dt_s = meta.at("dt_s").get<double>();
        s.start_min = network::parse_clock(meta.at("start").get<std::string>());
    } catch (const json::exception& e) {
        throw SolutionIoError(fmt::format("{}: {}", (dir / "solution.json").string(), e.what()));
    }
    auto& s = out.solution;
    const std::size_t N = s.steps;
    auto table = [&](const char* name) {
        const fs::path p = dir / name;
        if (!fs::exists(p)) throw SolutionIoError("missing " + p.string());
        return CsvTable::read(p);
    };

    {
        const auto t = table("switch_schedule.csv");
        Order ids;
        for (std::size_t r = 0; r < t.rows(); ++r) {
            const std::size_t i = ids.at(t.at(r, "switch"));
            grow(s.y_switch, i, N, 0);
            grow(s.z_switch, i, N, 0);
            const std::size_t k = step_of(t, r, N);
            s.y_switch[i][k] = static_cast<int>(t.integer(r, "y"));
            s.z_switch[i][k] = static_cast<int>(t.integer(r, "z"));
        }
        s.switch_ids = ids.ids();
    }
    {
        const auto t = table("blocks.csv");
        Order ids;
        for (std::size_t r = 0; r < t.rows(); ++r) {
            const std::size_t i = ids.at(t.at(r, "block"));
            grow(s.y_block, i, N, 0);
            grow(s.f_block, i, N, 0.0);
            const std::size_t k = step_of(t, r, N);
            s.y_block[i][k] = static_cast<int>(t.integer(r, "y"));
            s.f_block[i][k] = t.number(r, "f");
        }
        s.block_ids = ids.ids();
    }
    {
        const auto t = table("voltages.csv");
        Order ids;
        for (std::size_t r = 0; r < t.rows(); ++r) {
            const std::size_t i = ids.at(t.at(r, "bus"));
            grow(s.y_bus, i, N, 0);
            grow(s.v, i, N, Phase3{});
            const std::size_t k = step_of(t, r, N);
            s.y_bus[i][k] = static_cast<int>(t.integer(r, "y"));
            s.v[i][k][phase_of(t, r)] = t.number(r, "v");
        }
        s.bus_ids = ids.ids();
    }
    {
        const auto f = table("frequencies.csv");
        Order ids;
        auto unit = [&](const std::string& id) -> GfmTrajectory& {
            const std::size_t i = ids.at(id);
            if (s.gfm.size() <= i) {
                GfmTrajectory g;
                g.unit = id;
                g.p.assign(N, Phase3{});
                g.q.assign(N, Phase3{});
                g.dv.assign(N, Phase3{});
                for (auto* v : {&g.e, &g.dp, &g.df_qss, &g.rocof, &g.nadir, &g.f, &g.df_star, &g.delta}) v->assign(N, 0.0);
                s.gfm.push_back(std::move(g));
            }
            return s.gfm[i];
        };
        for (std::size_t r = 0; r < f.rows(); ++r) {
            auto& g = unit(f.at(r, "unit"));
            const std::size_t k = step_of(f, r, N);
            g.f[k] = f.number(r, "f");
            g.df_qss[k] = f.number(r, "df_qss");
            g.rocof[k] = f.number(r, "rocof");
            g.nadir[k] = f.number(r, "nadir");
            g.df_star[k] = f.number(r, "df_star");
            g.delta[k] = f.number(r, "delta");
            g.dp[k] = f.number(r, "dp");
            g.e[k] = f.number(r, "e");
        }
        const auto pw = table("gfm_power.csv");
        for (std::size_t r = 0; r < pw.rows(); ++r) {
            auto& g = unit(pw.at(r, "unit"));
            const std::size_t k = step_of(pw, r, N);
            const std::size_t p = phase_of(pw, r);
            g.p[k][p] = pw.number(r, "p");
            g.q[k][p] = pw.number(r, "q");
            g.dv[k][p] = pw.number(r, "dv");
        }
    }
    {
        const auto t = table("tg.csv");
        if (t.rows() > 0) {
            s.tg.y.assign(N, 0);
            s.tg.p.assign(N, Phase3{});
            s.tg.q.assign(N, Phase3{});
            s.tg.v.assign(N, Phase3{});
            s.tg.f.assign(N, 0.0);
        }
        for (std::size_t r = 0; r < t.rows(); ++r) {
            const std::size_t k = step_of(t, r, N);
            const std::size_t p = phase_of(t, r);
            s.tg.y[k] = static_cast<int>(t.integer(r, "y"));
            s.tg.p[k][p] = t.number(r, "p");
            s.tg.q[k][p] = t.number(r, "q");
            s.tg.v[k][p] = t.number(r, "v");
            s.tg.f[k] = t.number(r, "f");
        }
    }
    {
        const auto t = table("flows.csv");
        Order ids;
        for (std::size_t r = 0; r < t.rows(); ++r) {
            const bool sw = t.at(r, "kind") == "switch";
            const std::size_t i = ids.at((sw ? "s:" : "l:") + t.at(r, "branch"));
            if (s.flows.size() <= i) {
                BranchFlow f;
                f.id = t.at(r, "branch");
                f.is_switch = sw;
                f.p.assign(N, Phase3{});
                f.q.assign(N, Phase3{});
                s.flows.push_back(std::move(f));
            }
            const std::size_t k = step_of(t, r, N);
            const std::size_t p = phase_of(t, r);
            s.flows[i].p[k][p] = t.number(r, "p");
            s.flows[i].q[k][p] = t.number(r, "q");
        }
    }
    auto series = [&](const char* name, const char* key, const char* col, std::map<std::string, std::vector<double>>& dst) {
        const auto t = table(name);
        for (std::size_t r = 0; r < t.rows(); ++r) {
            auto& v = dst[t.at(r, key)];
            v.resize(N, 0.0);
            v[step_of(t, r, N)] = t.number(r, col);
        }
    };
    series("dispatch.csv", "house", "p_dis", s.dispatch);
    series("served_load.csv", "house", "kw", s.served);
    {
        const auto t = table("pv.csv");
        for (std::size_t r = 0; r < t.rows(); ++r) {
            auto& v = s.pv[t.at(r, "unit")];
            v.resize(N, Phase3{});
            v[step_of(t, r, N)][phase_of(t, r)] = t.number(r, "p");
        }
    }
    return out;
}

}  // namespace bsr::restoration

#include "bsr/io/summary.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <fmt/format.h>

#include "bsr/io/csv.hpp"

namespace bsr::io {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

class ExtremaAcc {
public:
    void add(double v, const std::string& where) {
        if (v < e_.min || !seen_) {
            e_.min = v;
            e_.min_at = where;
        }
        if (v > e_.max || !seen_) {
            e_.max = v;
            e_.max_at = where;
        }
        seen_ = true;
    }
    Extrema get() const { return e_; }

private:
    Extrema e_;
    bool seen_ = false;
};

json extrema_json(const Extrema& e) {
    return {{"min", e.min}, {"max", e.max}, {"min_at", e.min_at}, {"max_at", e.max_at}};
}

void first_time(std::map<std::string, std::string>& m, const std::string& id, const std::string& t) {
    m.emplace(id, t);  // keeps the earliest when called in step order
}

}  // namespace

json SummaryRecord::to_json() const {
    json j;
    j["case"] = case_name;
    j["dt_h"] = dt_h;
    j["restored_load_hours"] = restored_load_hours;
    j["restored_gei_load_hours"] = restored_gei_load_hours;
    j["timestamps"] = timestamps;
    j["served_kw"] = served_kw;
    j["houses_restored_by_step"] = houses_restored_by_step;
    j["block_energization_times"] = block_energization_times;
    j["switch_closing_times"] = switch_closing_times;
    j["tg_sync_time"] = tg_sync_time ? json(*tg_sync_time) : json(nullptr);
    j["frequency_extrema_hz"] = extrema_json(frequency_hz);
    j["voltage_extrema_pu"] = extrema_json(voltage_pu);
    j["max_abs_rocof_hz_s"] = max_abs_rocof;
    j["max_abs_nadir_hz"] = max_abs_nadir;
    j["max_abs_df_qss_hz"] = max_abs_df_qss;
    j["fallback_steps"] = fallback_steps;
    return j;
}

SummaryRecord summarize(const network::GridCase& c, const mpc::ScenarioConfig& cfg,
                        const std::vector<mpc::StepRecord>& steps) {
    SummaryRecord s;
    s.case_name = c.name;
    s.dt_h = cfg.dt_s / 3600.0;
    ExtremaAcc freq, volt;
    for (const auto& r : steps) {
        const auto& sol = r.solution;
        const std::string t = network::format_clock(r.grid_after.clock_min);
        s.timestamps.push_back(t);
        double served = 0.0;
        int restored = 0;
        for (const auto& h : c.houses) {
            const double kw = sol.served.at(h.id)[0];
            served += kw;
            s.restored_load_hours += kw * s.dt_h;
            if (h.has_gei) s.restored_gei_load_hours += kw * s.dt_h;
            restored += sol.y_bus[sol.bus_index(h.bus)][0];
        }
        s.served_kw.push_back(served);
        s.houses_restored_by_step.push_back(restored);
        for (const auto& b : c.blocks) {
            if (sol.y_block[sol.block_index(b.id)][0] == 1) first_time(s.block_energization_times, b.id, t);
        }
        for (const auto& sw : c.switches) {
            if (sol.y_switch[sol.switch_index(sw.id)][0] == 1) first_time(s.switch_closing_times, sw.id, t);
        }
        if (!s.tg_sync_time && mpc::tg_connected(c, sol, 0)) s.tg_sync_time = t;
        for (const auto& g : sol.gfm) {
            freq.add(g.f[0], g.unit + "@" + t);
            s.max_abs_rocof = std::max(s.max_abs_rocof, std::abs(g.rocof[0]));
            s.max_abs_nadir = std::max(s.max_abs_nadir, std::abs(g.nadir[0]));
            s.max_abs_df_qss = std::max(s.max_abs_df_qss, std::abs(g.df_qss[0]));
        }
        for (const auto& bus : c.buses) {
            const std::size_t i = sol.bus_index(bus.id);
            if (sol.y_bus[i][0] != 1) continue;
            for (int p : bus.phases.list()) {
                const double v = sol.v[i][0][static_cast<std::size_t>(p)];
                volt.add(std::sqrt(std::max(v, 0.0)), fmt::format("{}.{}@{}", bus.id, network::phase_name(p), t));
            }
        }
        if (r.fallback) ++s.fallback_steps;
    }
    s.frequency_hz = freq.get();
    s.voltage_pu = volt.get();
    return s;
}

SummaryRecord summarize_run_dir(const fs::path& run_dir) {
    const fs::path dir = run_dir / "timeseries";
    SummaryRecord s;
    json meta;
    {
        std::ifstream in(dir / "meta.json");
        if (!in) throw CsvError(fmt::format("{}: missing", (dir / "meta.json").string()));
        meta = json::parse(in);
    }
    s.case_name = meta.at("case").get<std::string>();
    s.dt_h = meta.at("dt_s").get<double>() / 3600.0;

    const auto grid = CsvTable::read(dir / "grid.csv");
    std::map<long, std::size_t> step_pos;
    for (std::size_t r = 0; r < grid.rows(); ++r) {
        step_pos[grid.integer(r, "step")] = r;
        s.timestamps.push_back(grid.at(r, "timestamp"));
        s.houses_restored_by_step.push_back(static_cast<int>(grid.integer(r, "houses_restored")));
        if (grid.integer(r, "fallback") == 1) ++s.fallback_steps;
    }
    s.served_kw.assign(grid.rows(), 0.0);
    auto pos = [&](const CsvTable& t, std::size_t r) {
        const auto it = step_pos.find(t.integer(r, "step"));
        if (it == step_pos.end()) throw CsvError(fmt::format("step {} not in grid.csv", t.at(r, "step")));
        return it->second;
    };

    const auto served = CsvTable::read(dir / "served_load.csv");
    // Summed in step order per house to match the in-memory accumulation.
    std::vector<std::vector<std::pair<double, bool>>> by_step(grid.rows());
    for (std::size_t r = 0; r < served.rows(); ++r) {
        const std::size_t k = pos(served, r);
        by_step[k].push_back({served.number(r, "kw"), served.integer(r, "gei") == 1});
    }
    for (std::size_t k = 0; k < by_step.size(); ++k) {
        for (const auto& [kw, gei] : by_step[k]) {
            s.served_kw[k] += kw;
            s.restored_load_hours += kw * s.dt_h;
            if (gei) s.restored_gei_load_hours += kw * s.dt_h;
        }
    }

    auto first_times = [&](const char* file, const char* id_col, std::map<std::string, std::string>& out) {
        const auto t = CsvTable::read(dir / file);
        std::map<std::string, std::size_t> best;
        for (std::size_t r = 0; r < t.rows(); ++r) {
            if (t.integer(r, "y") != 1) continue;
            const std::size_t k = pos(t, r);
            const auto& id = t.at(r, id_col);
            const auto it = best.find(id);
            if (it == best.end() || k < it->second) best[id] = k;
        }
        for (const auto& [id, k] : best) out[id] = s.timestamps[k];
    };
    first_times("blocks.csv", "block", s.block_energization_times);
    first_times("switches.csv", "switch", s.switch_closing_times);

    {
        const auto tg = CsvTable::read(dir / "tg.csv");
        std::optional<std::size_t> first;
        for (std::size_t r = 0; r < tg.rows(); ++r) {
            if (tg.integer(r, "connected") != 1) continue;
            const std::size_t k = pos(tg, r);
            if (!first || k < *first) first = k;
        }
        if (first) s.tg_sync_time = s.timestamps[*first];
    }
    {
        // Visited in step order so ties resolve like the in-memory pass.
        const auto gfm = CsvTable::read(dir / "gfm.csv");
        std::vector<std::vector<std::size_t>> rows(grid.rows());
        for (std::size_t r = 0; r < gfm.rows(); ++r) rows[pos(gfm, r)].push_back(r);
        ExtremaAcc freq;
        for (std::size_t k = 0; k < rows.size(); ++k) {
            for (std::size_t r : rows[k]) {
                freq.add(gfm.number(r, "f"), gfm.at(r, "unit") + "@" + s.timestamps[k]);
                s.max_abs_rocof = std::max(s.max_abs_rocof, std::abs(gfm.number(r, "rocof")));
                s.max_abs_nadir = std::max(s.max_abs_nadir, std::abs(gfm.number(r, "nadir")));
                s.max_abs_df_qss = std::max(s.max_abs_df_qss, std::abs(gfm.number(r, "df_qss")));
            }
        }
        s.frequency_hz = freq.get();
    }
    {
        const auto v = CsvTable::read(dir / "voltages.csv");
        std::vector<std::vector<std::size_t>> rows(grid.rows());
        for (std::size_t r = 0; r < v.rows(); ++r) {
            if (v.integer(r, "y") == 1) rows[pos(v, r)].push_back(r);
        }
        ExtremaAcc volt;
        for (std::size_t k = 0; k < rows.size(); ++k) {
            for (std::size_t r : rows[k]) {
                volt.add(v.number(r, "pu"), fmt::format("{}.{}@{}", v.at(r, "bus"), v.at(r, "phase"), s.timestamps[k]));
            }
        }
        s.voltage_pu = volt.get();
    }
    return s;
}

void write_summary(const fs::path& run_dir, const SummaryRecord& s) {
    fs::create_directories(run_dir);
    std::ofstream out(run_dir / "summary.json");
    if (!out) throw CsvError(fmt::format("cannot write {}", (run_dir / "summary.json").string()));
    out << s.to_json().dump(1) << '\n';
}

std::vector<std::string> compare_summaries(const SummaryRecord& a, const SummaryRecord& b, double tol) {
    std::vector<std::string> out;
    auto close = [&](double x, double y) { return std::abs(x - y) <= tol * std::max(1.0, std::abs(x)); };
    auto num = [&](const char* name, double x, double y) {
        if (!close(x, y)) out.push_back(fmt::format("{}: {} vs {}", name, x, y));
    };
    num("restored_load_hours", a.restored_load_hours, b.restored_load_hours);
    num("restored_gei_load_hours", a.restored_gei_load_hours, b.restored_gei_load_hours);
    num("dt_h", a.dt_h, b.dt_h);
    if (a.served_kw.size() != b.served_kw.size()) {
        out.push_back("served_kw length differs");
    } else {
        for (std::size_t k = 0; k < a.served_kw.size(); ++k) num("served_kw", a.served_kw[k], b.served_kw[k]);
    }
    if (a.timestamps != b.timestamps) out.push_back("timestamps differ");
    if (a.houses_restored_by_step != b.houses_restored_by_step) out.push_back("houses_restored_by_step differs");
    if (a.block_energization_times != b.block_energization_times) out.push_back("block_energization_times differ");
    if (a.switch_closing_times != b.switch_closing_times) out.push_back("switch_closing_times differ");
    if (a.tg_sync_time != b.tg_sync_time) out.push_back("tg_sync_time differs");
    num("frequency min", a.frequency_hz.min, b.frequency_hz.min);
    num("frequency max", a.frequency_hz.max, b.frequency_hz.max);
    num("voltage min", a.voltage_pu.min, b.voltage_pu.min);
    num("voltage max", a.voltage_pu.max, b.voltage_pu.max);
    num("max_abs_rocof", a.max_abs_rocof, b.max_abs_rocof);
    num("max_abs_nadir", a.max_abs_nadir, b.max_abs_nadir);
    num("max_abs_df_qss", a.max_abs_df_qss, b.max_abs_df_qss);
    if (a.fallback_steps != b.fallback_steps) out.push_back("fallback_steps differs");
    return out;
}

}  // namespace bsr::io

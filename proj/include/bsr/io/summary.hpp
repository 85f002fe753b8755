#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "bsr/mpc/coordinator.hpp"

namespace bsr::io {

struct Extrema {
    double min = 0.0;
    double max = 0.0;
    std::string min_at, max_at;  // entity@timestamp
};

struct SummaryRecord {
    std::string case_name;
    double dt_h = 0.25;
    double restored_load_hours = 0.0;  // kWh, served kW summed over steps times dt
    double restored_gei_load_hours = 0.0;
    std::vector<std::string> timestamps;  // end of each applied step
    std::vector<double> served_kw;
    std::vector<int> houses_restored_by_step;
    std::map<std::string, std::string> block_energization_times;  // first energized timestamp
    std::map<std::string, std::string> switch_closing_times;
    std::optional<std::string> tg_sync_time;
    Extrema frequency_hz;     // grid-forming units
    Extrema voltage_pu;       // energized buses only
    double max_abs_rocof = 0.0;
    double max_abs_nadir = 0.0;
    double max_abs_df_qss = 0.0;
    int fallback_steps = 0;

    nlohmann::json to_json() const;
};

SummaryRecord summarize(const network::GridCase& c, const mpc::ScenarioConfig& cfg,
                        const std::vector<mpc::StepRecord>& steps);

// Same record rebuilt from the timeseries/ CSVs of a run directory.
SummaryRecord summarize_run_dir(const std::filesystem::path& run_dir);

void write_summary(const std::filesystem::path& run_dir, const SummaryRecord& s);

// Field-by-field comparison; returns the mismatches (empty when equal within tol).
std::vector<std::string> compare_summaries(const SummaryRecord& a, const SummaryRecord& b, double tol);

}  // namespace bsr::io

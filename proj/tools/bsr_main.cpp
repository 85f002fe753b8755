#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <fmt/format.h>

#include "CLI11.hpp"
#include "json.hpp"

#include "bsr/gei/house.hpp"
#include "bsr/io/csv.hpp"
#include "bsr/io/scenario.hpp"
#include "bsr/io/summary.hpp"
#include "bsr/mpc/coordinator.hpp"
#include "bsr/network/case_json.hpp"
#include "bsr/network/ieee123.hpp"
#include "bsr/restoration/solution_io.hpp"
#include "bsr/restoration/verify.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace bsr;

namespace {

constexpr int kOk = 0;
constexpr int kFailed = 1;
constexpr int kInputError = 2;

class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

void print_problems(const std::vector<std::string>& problems) {
    for (const auto& p : problems) std::cerr << "  - " << p << '\n';
}

io::ScenarioDocument load_doc(const std::string& scenario, const std::vector<std::string>& overrides,
                              std::optional<std::uint64_t> seed) {
    io::ScenarioDocument doc = scenario.empty() ? io::parse_scenario(io::default_ieee123_scenario(1.0, 7))
                                                : io::load_scenario_file(scenario);
    for (const auto& o : overrides) io::apply_override(doc, o);
    if (seed) io::apply_override(doc, fmt::format("seed={}", *seed));
    return doc;
}

struct RunOutcome {
    io::SummaryRecord summary;
    std::size_t verify_failures = 0;
    bool aborted = false;
};

// Runs one scenario into `out`, verifying every step and cross-checking the summary.
RunOutcome run_one(const io::ScenarioDocument& doc, const fs::path& out, double tol) {
    RunOutcome r;
    const network::GridCase c_raw = io::resolve_case(doc);
    const network::GridCase c = mpc::scenario_case(c_raw, doc.config);
    fs::create_directories(out);
    network::save_case_file(c, out / "case.json");
    std::ofstream(out / "scenario.json") << doc.raw.dump(1) << '\n';

    mpc::RunResult res;
    try {
        res = mpc::run_scenario(c, doc.config, out);
    } catch (const mpc::ScenarioAbort& e) {
        std::cerr << "run aborted: " << e.what() << '\n';
        r.aborted = true;
        return r;
    }
    for (const auto& step : res.steps) {
        const fs::path dir = out / "solutions" / fmt::format("step_{:02}", step.index + 1);
        if (step.solution.status == "shifted") {
            std::cerr << fmt::format("step {}: shifted plan, not re-verified\n", step.index + 1);
            continue;
        }
        const auto rep = restoration::verify_solution(c, step.inputs, step.config, step.solution, tol);
        std::ofstream(dir / "verification.json") << rep.to_json().dump(1) << '\n';
        if (!rep.passed()) {
            ++r.verify_failures;
            std::cerr << fmt::format("step {}: verification failed\n{}", step.index + 1, rep.table());
        }
    }
    r.summary = io::summarize(c, doc.config, res.steps);
    io::write_summary(out, r.summary);
    const auto diff = io::compare_summaries(r.summary, io::summarize_run_dir(out), 1e-6);
    if (!diff.empty()) {
        ++r.verify_failures;
        std::cerr << "summary does not match the timeseries CSVs:\n";
        print_problems(diff);
    }
    return r;
}

void print_summary(const io::SummaryRecord& s) {
    std::cout << fmt::format("restored load-hours: {:.3f} kWh ({:.3f} kWh at GEI houses)\n", s.restored_load_hours,
                             s.restored_gei_load_hours);
    for (std::size_t k = 0; k < s.timestamps.size(); ++k) {
        std::cout << fmt::format("  {}  served {:8.2f} kW  houses {:3d}\n", s.timestamps[k], s.served_kw[k],
                                 s.houses_restored_by_step[k]);
    }
    std::cout << "tg sync: " << s.tg_sync_time.value_or("none") << '\n';
}

int cmd_run(const std::string& scenario, const std::string& out_arg, const std::vector<std::string>& overrides,
            std::optional<std::uint64_t> seed, double tol) {
    const auto doc = load_doc(scenario, overrides, seed);
    fs::path out = out_arg.empty() ? doc.output_dir : fs::path(out_arg);
    if (out.empty()) throw InputError("no output directory: pass --out or set output_dir in the scenario");
    const auto r = run_one(doc, out, tol);
    if (r.aborted) return kFailed;
    print_summary(r.summary);
    std::cout << "artifacts: " << out.string() << '\n';
    return r.verify_failures ? kFailed : kOk;
}

int cmd_sweep(const std::string& scenario, const std::string& out_arg, const std::vector<double>& fractions,
              const std::vector<std::string>& overrides, std::optional<std::uint64_t> seed, double tol) {
    const auto base = load_doc(scenario, overrides, seed);
    fs::path out = out_arg.empty() ? base.output_dir : fs::path(out_arg);
    if (out.empty()) throw InputError("no output directory: pass --out or set output_dir in the scenario");
    fs::create_directories(out);
    int status = kOk;
    json all = json::array();
    io::CsvWriter csv(out / "sweep.csv", {"gei_fraction", "restored_load_hours", "restored_gei_load_hours",
                                          "tg_sync_time", "fallback_steps", "houses_restored_by_step"});
    for (double f : fractions) {
        auto doc = base;
        io::apply_override(doc, fmt::format("gei_fraction={}", f));
        const fs::path dir = out / fmt::format("gei_{:03}", static_cast<int>(std::lround(f * 100)));
        std::cerr << fmt::format("gei fraction {} -> {}\n", f, dir.string());
        const auto r = run_one(doc, dir, tol);
        if (r.aborted) {
            status = kFailed;
            all.push_back({{"gei_fraction", f}, {"aborted", true}});
            continue;
        }
        if (r.verify_failures) status = kFailed;
        std::string houses;
        for (int h : r.summary.houses_restored_by_step) houses += (houses.empty() ? "" : ";") + std::to_string(h);
        csv.row({io::num(f), io::num(r.summary.restored_load_hours), io::num(r.summary.restored_gei_load_hours),
                 r.summary.tg_sync_time.value_or(""), std::to_string(r.summary.fallback_steps), houses});
        json j = r.summary.to_json();
        j["gei_fraction"] = f;
        all.push_back(j);
        std::cout << fmt::format("{:5.2f}  {:10.3f} kWh\n", f, r.summary.restored_load_hours);
    }
    std::ofstream(out / "sweep.json") << all.dump(1) << '\n';
    return status;
}

int cmd_flex(const std::string& house_file, const std::string& case_file, const std::string& house_id,
             const std::string& start, std::size_t steps, double dt_s, double time_limit) {
    io::HouseDocument doc;
    if (!house_file.empty()) {
        doc = io::load_house_document(house_file);
    } else {
        if (case_file.empty() || house_id.empty()) throw InputError("flex needs --house FILE or --case FILE --id HOUSE");
        const auto c = network::load_case_file(case_file);
        doc = io::house_document_from_case(c, house_id, network::parse_clock(start), steps, dt_s);
    }
    gei::HouseModelOptions opts;
    opts.dt_h = doc.dt_s / 3600.0;
    const auto env = gei::estimate_flexibility_envelope(doc.params, doc.forecast, doc.state, opts,
                                                        milp::SolveLimits::with(time_limit, 1e-6));
    std::cout << "step,timestamp,lower_kw,upper_kw\n";
    for (std::size_t k = 0; k < env.steps(); ++k) {
        const int t = doc.state.clock_min + static_cast<int>(std::lround((k + 1) * doc.dt_s / 60.0));
        std::cout << fmt::format("{},{},{},{}\n", k + 1, network::format_clock(t), io::num(env.lower[k]),
                                 io::num(env.upper[k]));
    }
    return kOk;
}

int cmd_verify(const std::string& case_file, const std::string& solution_dir, double tol, const std::string& report) {
    if (!fs::exists(case_file)) throw InputError(fmt::format("case file '{}' not found", case_file));
    if (!fs::exists(fs::path(solution_dir) / "solution.json")) {
        throw InputError(fmt::format("'{}' holds no solution.json", solution_dir));
    }
    const auto c = network::load_case_file(case_file);
    const auto saved = restoration::read_solution_dir(solution_dir);
    const auto rep = restoration::verify_solution(c, saved.inputs, saved.config, saved.solution, tol);
    std::cout << rep.table();
    if (!report.empty()) std::ofstream(report) << rep.to_json().dump(1) << '\n';
    std::cout << (rep.passed() ? "PASS" : fmt::format("FAIL ({} violated rows)", rep.failures())) << '\n';
    return rep.passed() ? kOk : kFailed;
}

int cmd_gen(std::uint64_t seed, double fraction, const std::string& out) {
    if (!(fraction >= 0.0 && fraction <= 1.0)) throw InputError("--gei-fraction must lie in [0, 1]");
    network::Ieee123Options o;
    o.seed = seed;
    o.gei_fraction = fraction;
    const auto c = network::generate_ieee123(o);
    if (out.empty() || out == "-") {
        std::cout << network::to_json(c).dump(1) << '\n';
    } else {
        network::save_case_file(c, out);
    }
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Black-start restoration planner with house-level flexibility"};
    app.require_subcommand(1);
    double tol = 1e-6;

    std::string scenario, out;
    std::vector<std::string> overrides;
    std::optional<std::uint64_t> seed;
    auto* run = app.add_subcommand("run", "Run a rolling-horizon restoration scenario");
    run->add_option("--scenario", scenario, "Scenario JSON (default: generated IEEE-123)");
    run->add_option("--out", out, "Run directory");
    run->add_option("--seed", seed, "Scenario seed");
    run->add_option("--override", overrides, "key=value, dotted keys allowed (repeatable)");
    run->add_option("--tol", tol, "Verification tolerance");

    std::vector<double> fractions{0.15, 0.4, 0.7, 1.0};
    auto* sweep = app.add_subcommand("sweep", "Run a scenario over several GEI fractions");
    sweep->add_option("--scenario", scenario, "Scenario JSON (default: generated IEEE-123)");
    sweep->add_option("--out", out, "Sweep directory")->required();
    sweep->add_option("--fractions", fractions, "GEI fractions")->delimiter(',');
    sweep->add_option("--seed", seed, "Scenario seed");
    sweep->add_option("--override", overrides, "key=value, dotted keys allowed (repeatable)");
    sweep->add_option("--tol", tol, "Verification tolerance");

    std::string house_file, case_file, house_id, start = "09:00";
    std::size_t steps = 12;
    double dt_s = 900.0, time_limit = 30.0;
    auto* flex = app.add_subcommand("flex", "Print a house's flexibility envelope as CSV");
    flex->add_option("--house", house_file, "House JSON document");
    flex->add_option("--case", case_file, "Case JSON (with --id)");
    flex->add_option("--id", house_id, "House id within --case");
    flex->add_option("--start", start, "Horizon start HH:MM (with --case)");
    flex->add_option("--steps", steps, "Horizon steps (with --case)");
    flex->add_option("--dt-s", dt_s, "Step length in seconds (with --case)");
    flex->add_option("--time-limit", time_limit, "Per-solve time limit, seconds");

    std::string solution_dir, report;
    auto* verify = app.add_subcommand("verify", "Re-check a saved solution against every constraint tag");
    verify->add_option("--case", case_file, "Case JSON")->required();
    verify->add_option("--solution", solution_dir, "Solution directory (holds solution.json)")->required();
    verify->add_option("--tol", tol, "Absolute tolerance");
    verify->add_option("--report", report, "Write the JSON report here");

    std::uint64_t gen_seed = 7;
    double fraction = 1.0;
    std::string gen_out;
    auto* gen = app.add_subcommand("gen-ieee123", "Write the modified IEEE-123 case JSON");
    gen->add_option("--seed", gen_seed, "House parameter seed");
    gen->add_option("--gei-fraction", fraction, "Share of houses with GEI");
    gen->add_option("--out", gen_out, "Output file (default stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kInputError;
    }

    try {
        if (*run) return cmd_run(scenario, out, overrides, seed, tol);
        if (*sweep) return cmd_sweep(scenario, out, fractions, overrides, seed, tol);
        if (*flex) return cmd_flex(house_file, case_file, house_id, start, steps, dt_s, time_limit);
        if (*verify) return cmd_verify(case_file, solution_dir, tol, report);
        if (*gen) return cmd_gen(gen_seed, fraction, gen_out);
    } catch (const io::ScenarioSchemaError& e) {
        std::cerr << "invalid scenario:\n";
        print_problems(e.problems());
        return kInputError;
    } catch (const network::CaseError& e) {
        std::cerr << "invalid case:\n";
        print_problems(e.problems());
        return kInputError;
    } catch (const InputError& e) {
        std::cerr << e.what() << '\n';
        return kInputError;
    } catch (const restoration::SolutionIoError& e) {
        std::cerr << e.what() << '\n';
        return kInputError;
    } catch (const io::CsvError& e) {
        std::cerr << e.what() << '\n';
        return kInputError;
    } catch (const gei::HouseError& e) {
        std::cerr << "house: " << e.what() << '\n';
        return kInputError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kFailed;
    }
    return kInputError;
}

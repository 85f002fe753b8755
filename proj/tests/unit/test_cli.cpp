#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "doctest.h"
#include "toy.hpp"

#include "bsr/io/scenario.hpp"
#include "bsr/network/case_json.hpp"

using namespace bsr;
namespace fs = std::filesystem;

namespace {

struct Cli {
    int code = -1;
    std::string out, err;
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path work_dir() {
    static const fs::path d = [] {
        auto p = fs::temp_directory_path() / "bsr_unit_cli";
        fs::remove_all(p);
        fs::create_directories(p);
        return p;
    }();
    return d;
}

Cli cli(const std::string& args) {
    const auto out = work_dir() / "stdout.txt", err = work_dir() / "stderr.txt";
    const std::string cmd = fmt::format("\"{}\" {} > \"{}\" 2> \"{}\"", BSR_CLI_PATH, args, out.string(), err.string());
    const int raw = std::system(cmd.c_str());
    Cli r;
    r.code = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    r.out = slurp(out);
    r.err = slurp(err);
    return r;
}

// Toy case on disk plus a 30-minute scenario around it.
fs::path toy_scenario() {
    static const fs::path path = [] {
        bsr::testing::Rng rng(5);
        const auto c = bsr::testing::toy_case(rng, {bsr::testing::ToyShape::Chain, 2, 0.6, true, 0});
        network::save_case_file(c, work_dir() / "toy.json");
        nlohmann::json s = {{"case", "toy.json"},   {"start", "09:00"},     {"end", "09:30"},
                            {"horizon_steps", 3},   {"seed", 3},            {"gei_fraction", 0.5},
                            {"utility_limits", {{"mip_rel_gap", 1e-9}}}};
        const auto p = work_dir() / "toy_scenario.json";
        std::ofstream(p) << s.dump(1);
        return p;
    }();
    return path;
}

fs::path run_dir() {
    static const fs::path dir = [] {
        const auto d = work_dir() / "run";
        const auto r = cli(fmt::format("run --scenario \"{}\" --out \"{}\"", toy_scenario().string(), d.string()));
        REQUIRE_MESSAGE(r.code == 0, r.err);
        return d;
    }();
    return dir;
}

std::vector<std::string> lines(const std::string& text) {
    std::vector<std::string> v;
    std::stringstream ss(text);
    for (std::string l; std::getline(ss, l);) v.push_back(l);
    return v;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("gen-ieee123 writes a loadable case") {
    const auto p = work_dir() / "ieee123.json";
    const auto r = cli(fmt::format("gen-ieee123 --seed 7 --gei-fraction 0.4 --out \"{}\"", p.string()));
    REQUIRE(r.code == 0);
    const auto c = network::load_case_file(p);
    CHECK(c.houses.size() == 88);
    CHECK(std::count_if(c.houses.begin(), c.houses.end(), [](const auto& h) { return h.has_gei; }) == 35);
    CHECK(cli("gen-ieee123 --gei-fraction 2").code == 2);
}

TEST_CASE("flex prints the envelope and agrees between case and house inputs") {
    toy_scenario();
    const auto c = network::load_case_file(work_dir() / "toy.json");
    REQUIRE_FALSE(c.houses.empty());
    const std::string id = c.houses.front().id;
    const auto a = cli(fmt::format("flex --case \"{}\" --id {} --start 09:00 --steps 4 --dt-s 900",
                                   (work_dir() / "toy.json").string(), id));
    REQUIRE(a.code == 0);
    const auto rows = lines(a.out);
    REQUIRE(rows.size() == 5);
    CHECK(rows[0] == "step,timestamp,lower_kw,upper_kw");
    CHECK(rows[1].rfind("1,09:15,", 0) == 0);
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto f = rows[i].substr(rows[i].find(',', rows[i].find(',') + 1) + 1);
        CHECK(std::stod(f.substr(0, f.find(','))) <= std::stod(f.substr(f.find(',') + 1)) + 1e-9);
    }
    const auto doc = io::house_document_from_case(c, id, 540, 4, 900.0);
    const auto hp = work_dir() / "house.json";
    std::ofstream(hp) << io::to_json(doc).dump(1);
    const auto b = cli(fmt::format("flex --house \"{}\"", hp.string()));
    REQUIRE(b.code == 0);
    CHECK(b.out == a.out);
    CHECK(cli("flex").code == 2);
}

TEST_CASE("run writes verified artifacts") {
    const auto d = run_dir();
    for (const char* f : {"case.json", "scenario.json", "summary.json", "timeseries/grid.csv",
                          "messages/step_01.jsonl", "solutions/step_02/solution.json",
                          "solutions/step_02/verification.json"}) {
        CAPTURE(f);
        CHECK(fs::exists(d / f));
    }
    const auto v = nlohmann::json::parse(slurp(d / "solutions/step_01/verification.json"));
    CHECK(v.at("passed").get<bool>());
    const auto s = nlohmann::json::parse(slurp(d / "summary.json"));
    CHECK(s.at("timestamps").size() == 2);
}

TEST_CASE("verify accepts a clean solution and flags a reopened switch") {
    const auto d = run_dir();
    const auto sol = d / "solutions" / "step_01";
    const auto ok = cli(fmt::format("verify --case \"{}\" --solution \"{}\"", (d / "case.json").string(), sol.string()));
    CHECK(ok.code == 0);
    CHECK(ok.out.find("PASS") != std::string::npos);

    // Copy the solution and open a switch that was closed on the previous step.
    const auto bad = work_dir() / "corrupt";
    fs::remove_all(bad);
    fs::copy(sol, bad);
    auto rows = lines(slurp(bad / "switch_schedule.csv"));
    std::map<std::string, std::vector<std::size_t>> by_switch;
    for (std::size_t r = 1; r < rows.size(); ++r) by_switch[rows[r].substr(0, rows[r].find(','))].push_back(r);
    bool done = false;
    for (auto& [sw, idx] : by_switch) {
        const auto y_of = [&](std::size_t r) {
            const auto& l = rows[r];
            std::size_t p = 0;
            for (int i = 0; i < 4; ++i) p = l.find(',', p) + 1;
            return std::pair<std::size_t, char>(p, l[p]);
        };
        const auto last = idx.back(), before = idx[idx.size() - 2];
        if (y_of(last).second == '1' && y_of(before).second == '1') {
            rows[last][y_of(last).first] = '0';
            done = true;
            break;
        }
    }
    REQUIRE_MESSAGE(done, "no switch closed before the last step");
    std::ofstream out(bad / "switch_schedule.csv");
    for (const auto& l : rows) out << l << '\n';
    out.close();
    const auto report = work_dir() / "report.json";
    const auto r = cli(fmt::format("verify --case \"{}\" --solution \"{}\" --report \"{}\"", (d / "case.json").string(),
                                   bad.string(), report.string()));
    CHECK(r.code == 1);
    CHECK(r.out.find("FAIL") != std::string::npos);
    const auto j = nlohmann::json::parse(slurp(report));
    CHECK(j.at("tags").at("eq38").at("failures").get<int>() >= 1);
}

TEST_CASE("schema problems exit with status 2 and are all listed") {
    const auto p = work_dir() / "bad_scenario.json";
    std::ofstream(p) << R"({"case": "toy.json", "bogus": 1, "dt_s": -5})";
    toy_scenario();
    const auto r = cli(fmt::format("run --scenario \"{}\" --out \"{}\"", p.string(), (work_dir() / "x").string()));
    CHECK(r.code == 2);
    CHECK(r.err.find("bogus") != std::string::npos);
    CHECK(r.err.find("dt_s") != std::string::npos);
    CHECK(cli(fmt::format("verify --case \"{}\" --solution \"{}\"", (work_dir() / "nope.json").string(),
                          work_dir().string()))
              .code == 2);
}

TEST_CASE("sweep runs each fraction into its own directory") {
    const auto d = work_dir() / "sweep";
    const auto r = cli(fmt::format("sweep --scenario \"{}\" --out \"{}\" --fractions 0,1", toy_scenario().string(),
                                   d.string()));
    REQUIRE_MESSAGE(r.code == 0, r.err);
    CHECK(fs::exists(d / "gei_000" / "summary.json"));
    CHECK(fs::exists(d / "gei_100" / "summary.json"));
    CHECK(lines(slurp(d / "sweep.csv")).size() == 3);
    const auto j = nlohmann::json::parse(slurp(d / "sweep.json"));
    REQUIRE(j.size() == 2);
    CHECK(j[1].at("restored_load_hours").get<double>() >= j[0].at("restored_load_hours").get<double>() - 1e-6);
}

TEST_CASE("overrides edit the scenario and are re-validated") {
    auto doc = io::parse_scenario(io::default_ieee123_scenario(0.4, 7));
    io::apply_override(doc, "frequency_bounds.rocof=2.5");
    CHECK(doc.config.bounds.rocof == 2.5);
    io::apply_override(doc, "start=10:00");
    CHECK(doc.config.start_min == 600);
    io::apply_override(doc, "gei_fraction=0.15");
    REQUIRE(doc.gei_fraction.has_value());
    CHECK(*doc.gei_fraction == 0.15);
    CHECK_THROWS_AS(io::apply_override(doc, "dt_s=abc"), io::ScenarioSchemaError);
    CHECK_THROWS_AS(io::apply_override(doc, "no_equals_sign"), io::ScenarioSchemaError);
    const auto c = io::resolve_case(doc);
    CHECK(std::count_if(c.houses.begin(), c.houses.end(), [](const auto& h) { return h.has_gei; }) == 13);
}

}

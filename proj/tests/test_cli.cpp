#include <doctest.h>

#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "pwexp/pwexp.hpp"

// End-to-end checks driving the built binary; PWEXP_BIN is set by ctest.

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

std::string cli_path() {
    const char* bin = std::getenv("PWEXP_BIN");
    REQUIRE_MESSAGE(bin != nullptr, "PWEXP_BIN must point at the pwexp binary (set by ctest)");
    return bin;
}

int run_cli(const std::string& args) {
    const std::string cmd = cli_path() + " " + args + " > /dev/null 2> /tmp/pwexp_cli_stderr.txt";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

std::string last_stderr() {
    std::ifstream in("/tmp/pwexp_cli_stderr.txt");
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE_MESSAGE(in.good(), "missing expected output " << p.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path fresh_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "pwexp_tests" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

void write_scenario(const fs::path& p, const std::string& text) {
    std::ofstream out(p);
    out << text;
}

} // namespace

TEST_CASE("cli: fit writes the documented artifacts and is byte-reproducible") {
    const fs::path dir = fresh_dir("fit");
    // small simulated cohort via the library
    pwexp::Rng rng(2026);
    const auto times =
        pwexp::sample_piecewise_exponential(std::vector<double>{0.6}, std::vector<double>{2.0, 0.4}, 90, rng);
    pwexp::SimScenario scenario;
    scenario.tau = {0.6};
    scenario.lambda = {2.0, 0.4};
    scenario.n = 90;
    const auto ds = pwexp::apply_censoring(times, scenario, rng);
    {
        std::ofstream csv(dir / "input.csv");
        csv << "time,status\n";
        csv.precision(12);
        for (const auto& o : ds.observations) csv << o.time << ',' << (o.event ? 1 : 0) << '\n';
    }
    const std::string common = "fit --input " + (dir / "input.csv").string() +
                               " --iterations 1200 --burnin 200 --chains 2 --seed 7";
    REQUIRE(run_cli(common + " --out " + (dir / "a").string()) == 0);
    REQUIRE(run_cli(common + " --out " + (dir / "b").string()) == 0);

    for (const char* name :
         {"manifest.json", "summary.json", "fit_statistics.json", "hazard_curve.csv", "survival_curve.csv"})
        CHECK(fs::exists(dir / "a" / name));

    const auto summary = json::parse(read_file(dir / "a" / "summary.json"));
    CHECK(summary["n"] == 90);
    CHECK(summary["model_probabilities"].is_object());
    CHECK(summary.contains("psrf_k"));
    const auto stats = json::parse(read_file(dir / "a" / "fit_statistics.json"));
    CHECK(stats["waic"].is_number());
    CHECK(stats["neg2_log_pml"].is_number());

    // same seed, same bytes (outputs don't embed paths except the manifest)
    for (const char* name : {"summary.json", "fit_statistics.json", "hazard_curve.csv", "survival_curve.csv"})
        CHECK(read_file(dir / "a" / name) == read_file(dir / "b" / name));
}

TEST_CASE("cli: fit without uncollapsing writes the trace summary only") {
    const fs::path dir = fresh_dir("nouncollapse");
    {
        std::ofstream csv(dir / "input.csv");
        csv << "time,status\n";
        pwexp::Rng rng(9);
        for (int i = 0; i < 30; ++i) csv << rng.exponential(0.5) << ",1\n";
    }
    REQUIRE(run_cli("fit --input " + (dir / "input.csv").string() + " --out " + (dir / "out").string() +
                    " --iterations 500 --burnin 50 --chains 1 --seed 2 --no-uncollapse") == 0);
    CHECK(fs::exists(dir / "out" / "summary.json"));
    CHECK_FALSE(fs::exists(dir / "out" / "hazard_curve.csv"));
    CHECK_FALSE(fs::exists(dir / "out" / "fit_statistics.json"));
}

TEST_CASE("cli: timescale flag drives the default hazard prior rate") {
    const fs::path dir = fresh_dir("timescale");
    {
        std::ofstream csv(dir / "input.csv");
        csv << "time,status\n";
        pwexp::Rng rng(10);
        for (int i = 0; i < 30; ++i) csv << 365.0 * rng.exponential(0.5) << ",1\n";
    }
    REQUIRE(run_cli("fit --input " + (dir / "input.csv").string() + " --out " + (dir / "out").string() +
                    " --iterations 500 --burnin 50 --chains 1 --seed 2 --timescale days") == 0);
    const auto manifest = json::parse(read_file(dir / "out" / "manifest.json"));
    CHECK(manifest["timescale"] == "days");
}

TEST_CASE("cli: fit with a beta hyperprior runs end to end") {
    const fs::path dir = fresh_dir("hyper");
    {
        std::ofstream csv(dir / "input.csv");
        csv << "time,status\n";
        pwexp::Rng rng(12);
        for (int i = 0; i < 40; ++i) csv << rng.exponential(0.8) << ",1\n";
    }
    REQUIRE(run_cli("fit --input " + (dir / "input.csv").string() + " --out " + (dir / "out").string() +
                    " --iterations 800 --burnin 100 --chains 1 --seed 4 --hyperprior 1,1") == 0);
    const auto summary = json::parse(read_file(dir / "out" / "summary.json"));
    CHECK(summary["modal_k"].is_number());
    const auto manifest = json::parse(read_file(dir / "out" / "manifest.json"));
    CHECK(manifest["hyperprior"] == "1,1");
}

TEST_CASE("cli: missing input file exits 2 naming the path") {
    const fs::path dir = fresh_dir("missing");
    const int code =
        run_cli("fit --input /no/such/data.csv --out " + (dir / "out").string() + " --iterations 100 --burnin 10");
    CHECK(code == 2);
    CHECK(last_stderr().find("/no/such/data.csv") != std::string::npos);
}

TEST_CASE("cli: sampler refusal on too few events exits 3") {
    const fs::path dir = fresh_dir("refusal");
    {
        std::ofstream csv(dir / "tiny.csv");
        csv << "time,status\n1,1\n2,1\n3,0\n";
    }
    const int code = run_cli("fit --input " + (dir / "tiny.csv").string() + " --out " +
                             (dir / "out").string() + " --iterations 100 --burnin 10");
    CHECK(code == 3);
}

TEST_CASE("cli: simulate respects the follow-up horizon and the seed") {
    const fs::path dir = fresh_dir("simulate");
    write_scenario(dir / "s.txt",
                   "lambda = 0.5\nn = 100\nfollow_up = 2\ncensor_pct = 0\nseed = 5\n");
    REQUIRE(run_cli("simulate --scenario " + (dir / "s.txt").string() + " --out " +
                    (dir / "a.csv").string()) == 0);
    REQUIRE(run_cli("simulate --scenario " + (dir / "s.txt").string() + " --out " +
                    (dir / "b.csv").string()) == 0);
    CHECK(read_file(dir / "a.csv") == read_file(dir / "b.csv"));
    CHECK(fs::exists(dir / "a.csv.manifest.json"));

    const auto ds = pwexp::load_dataset_csv_file((dir / "a.csv").string());
    CHECK(ds.size() == 100);
    for (const auto& o : ds.observations) CHECK(o.time <= 2.0);
}

TEST_CASE("cli: invalid scenarios exit 2") {
    const fs::path dir = fresh_dir("badscenario");
    write_scenario(dir / "high_pct.txt", "lambda = 0.5\nn = 50\ncensor_pct = 0.6\n");
    CHECK(run_cli("simulate --scenario " + (dir / "high_pct.txt").string() + " --out " +
                  (dir / "x.csv").string()) == 2);
    write_scenario(dir / "unknown.txt", "lambda = 0.5\nn = 50\nshape = 2\n");
    CHECK(run_cli("simulate --scenario " + (dir / "unknown.txt").string() + " --out " +
                  (dir / "y.csv").string()) == 2);
}

TEST_CASE("cli: study emits a table-shaped report") {
    const fs::path dir = fresh_dir("study");
    write_scenario(dir / "s.txt",
                   "tau = 0.5\nlambda = 0.25, 1.5\nn = 100\nfollow_up = 2\ncensor_pct = 0\n"
                   "replicates = 3\nseed = 8\niterations = 600\nburnin = 100\n");
    REQUIRE(run_cli("study --scenario " + (dir / "s.txt").string() + " --out " + (dir / "out").string()) ==
            0);
    const auto report = json::parse(read_file(dir / "out" / "report.json"));
    CHECK(report["replicates_run"] == 3);
    CHECK(report["modal_k"].size() == 3);
    CHECK(report["pct_correct_model"].is_number());

    write_scenario(dir / "one.txt",
                   "tau = 0.5\nlambda = 0.25, 1.5\nn = 100\nreplicates = 1\nseed = 8\n"
                   "iterations = 400\nburnin = 50\n");
    REQUIRE(run_cli("study --scenario " + (dir / "one.txt").string() + " --out " +
                    (dir / "single").string()) == 0);
    const auto single = json::parse(read_file(dir / "single" / "report.json"));
    CHECK(single["changepoint_sd"].is_null()); // no dispersion from one replicate
}

TEST_CASE("cli: summarize reports descriptives and the KM curve") {
    const fs::path dir = fresh_dir("summarize");
    {
        std::ofstream csv(dir / "d.csv");
        csv << "time,status\n1,1\n2,0\n3,1\n";
    }
    REQUIRE(run_cli("summarize --input " + (dir / "d.csv").string() + " --out " + (dir / "out").string()) ==
            0);
    const auto summary = json::parse(read_file(dir / "out" / "dataset_summary.json"));
    CHECK(summary["n"] == 3);
    CHECK(summary["events"] == 2);
    CHECK(fs::exists(dir / "out" / "km_curve.csv"));
    CHECK(fs::exists(dir / "out" / "manifest.json"));
}

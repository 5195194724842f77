// pwexp command line: fit change-point survival models, simulate piecewise
// exponential cohorts, run replicated simulation studies, summarize datasets.

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "pwexp/pwexp.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitSamplerRefusal = 3;

struct CommonArgs {
    std::string input;
    std::string out;
    long iterations = 20750;
    long burn_in = 750;
    int chains = 4;
    std::uint64_t seed = 1;
    double alpha = 1.0;
    std::optional<double> beta;
    double xi = 1.0;
    int max_k = 10;
    std::string hyperprior; // "shape,rate"
    std::string timescale = "years";
    std::optional<double> horizon;
    bool uncollapse = true;
};

pwexp::PriorConfig make_prior(const CommonArgs& args, pwexp::Timescale ts) {
    pwexp::PriorConfig prior = pwexp::PriorConfig::defaults_for(ts);
    prior.alpha = args.alpha;
    if (args.beta) prior.beta = *args.beta;
    prior.poisson_rate = args.xi;
    prior.max_changepoints = args.max_k;
    if (!args.hyperprior.empty()) {
        const auto comma = args.hyperprior.find(',');
        if (comma == std::string::npos)
            throw pwexp::ValidationError("--hyperprior expects 'shape,rate'");
        try {
            pwexp::Hyperprior hp;
            hp.shape = std::stod(args.hyperprior.substr(0, comma));
            hp.rate = std::stod(args.hyperprior.substr(comma + 1));
            prior.hyperprior = hp;
        } catch (const std::exception&) {
            throw pwexp::ValidationError("--hyperprior expects 'shape,rate'");
        }
    }
    prior.validate();
    return prior;
}

json manifest_json(const std::string& command, const CommonArgs& args) {
    json m;
    m["command"] = command;
    m["version"] = pwexp::kVersion;
    m["input"] = args.input;
    m["out"] = args.out;
    m["iterations"] = args.iterations;
    m["burnin"] = args.burn_in;
    m["chains"] = args.chains;
    m["seed"] = args.seed;
    m["alpha"] = args.alpha;
    m["beta"] = args.beta ? json(*args.beta) : json("timescale default");
    m["xi"] = args.xi;
    m["max_k"] = args.max_k;
    m["hyperprior"] = args.hyperprior.empty() ? json(nullptr) : json(args.hyperprior);
    m["timescale"] = args.timescale;
    m["horizon"] = args.horizon ? json(*args.horizon) : json("max observed time");
    m["uncollapse"] = args.uncollapse;
    return m;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw pwexp::ValidationError("cannot write output file: " + path.string());
    out << text;
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

int cmd_fit(const CommonArgs& args) {
    const pwexp::Timescale ts = pwexp::parse_timescale(args.timescale);
    const pwexp::SurvivalDataset ds = pwexp::load_dataset_csv_file(args.input, ts);
    const pwexp::GapTimeData gaps = pwexp::gap_times(ds);
    const pwexp::PriorConfig prior = make_prior(args, ts);

    pwexp::ChainOptions chain;
    chain.iterations = args.iterations;
    chain.burn_in = args.burn_in;
    chain.uncollapse = args.uncollapse;
    chain.hyperprior = prior.hyperprior.has_value();

    const auto traces = pwexp::run_chains(gaps, prior, chain, args.chains, args.seed);
    const pwexp::Trace merged = pwexp::merge_traces(traces);
    const pwexp::Trace thinned = pwexp::thin_trace(merged, 20000);

    fs::create_directories(args.out);
    const fs::path out_dir(args.out);
    write_json(out_dir / "manifest.json", manifest_json("fit", args));

    json summary;
    summary["n"] = ds.size();
    summary["events"] = ds.event_count();
    summary["draws"] = merged.states.size();
    const auto probs = pwexp::model_posterior_probs(merged);
    json probs_json;
    for (const auto& [k, p] : probs) probs_json[std::to_string(k)] = p;
    summary["model_probabilities"] = probs_json;
    const int mode = pwexp::modal_k(merged);
    summary["modal_k"] = mode;
    json cps = json::array();
    for (const auto& s : pwexp::changepoint_summaries(merged, mode))
        cps.push_back({{"mean", s.mean}, {"sd", s.sd}});
    summary["changepoints"] = cps;
    if (merged.has_hazards()) {
        json hz = json::array();
        for (const auto& s : pwexp::hazard_summaries(merged, mode))
            hz.push_back({{"mean", s.mean}, {"sd", s.sd}});
        summary["hazards"] = hz;
    }
    if (traces.size() >= 2) {
        summary["psrf_k"] = pwexp::psrf(traces, pwexp::ChainFunctional::k);
        summary["psrf_log_posterior"] = pwexp::psrf(traces, pwexp::ChainFunctional::log_posterior);
    }
    summary["acceptance"] = {
        {"birth_attempts", merged.birth_attempts}, {"birth_accepts", merged.birth_accepts},
        {"death_attempts", merged.death_attempts}, {"death_accepts", merged.death_accepts},
        {"relocations", merged.relocations}};
    write_json(out_dir / "summary.json", summary);

    if (merged.has_hazards()) {
        const double horizon = args.horizon ? *args.horizon : ds.max_time();
        const auto grid = pwexp::default_grid(horizon);
        const auto hazard = pwexp::hazard_curve(thinned, grid);
        const auto survival = pwexp::survival_curve(thinned, grid);
        {
            std::ofstream f(out_dir / "hazard_curve.csv", std::ios::binary);
            pwexp::write_curve_csv(f, hazard);
        }
        {
            std::ofstream f(out_dir / "survival_curve.csv", std::ios::binary);
            pwexp::write_curve_csv(f, survival);
        }
        const auto ll = pwexp::pointwise_loglik(thinned, ds);
        const auto stats = pwexp::fit_statistics(ll);
        json fit_stats;
        fit_stats["waic"] = stats.waic;
        fit_stats["neg2_log_pml"] = stats.neg2_log_pml;
        fit_stats["auc"] = pwexp::auc_exact(thinned, horizon);
        fit_stats["abs_difference_km"] = pwexp::abs_difference(survival, pwexp::kaplan_meier(ds), horizon);
        fit_stats["horizon"] = horizon;
        fit_stats["draws"] = stats.draws;
        fit_stats["observations"] = stats.observations;
        write_json(out_dir / "fit_statistics.json", fit_stats);
    }
    return kExitOk;
}

int cmd_simulate(const std::string& scenario_path, const std::string& out,
                 std::optional<std::uint64_t> seed) {
    pwexp::ScenarioFile sf = pwexp::parse_scenario_file(scenario_path);
    if (seed) sf.scenario.seed = *seed;
    pwexp::Rng rng = pwexp::Rng::stream(sf.scenario.seed, 0x5D, 0);
    const auto times = pwexp::sample_piecewise_exponential(sf.scenario.tau, sf.scenario.lambda,
                                                           sf.scenario.n, rng);
    const pwexp::SurvivalDataset ds = pwexp::apply_censoring(times, sf.scenario, rng);

    std::ostringstream csv;
    csv << "time,status\n";
    csv.precision(12);
    for (const auto& o : ds.observations) csv << o.time << ',' << (o.event ? 1 : 0) << '\n';
    const fs::path out_path(out);
    if (out_path.has_parent_path()) fs::create_directories(out_path.parent_path());
    write_text(out_path, csv.str());

    json m;
    m["command"] = "simulate";
    m["version"] = pwexp::kVersion;
    m["scenario"] = scenario_path;
    m["out"] = out;
    m["seed"] = sf.scenario.seed;
    m["n"] = sf.scenario.n;
    m["tau"] = sf.scenario.tau;
    m["lambda"] = sf.scenario.lambda;
    m["follow_up"] = sf.scenario.follow_up;
    m["censor_pct"] = sf.scenario.random_censor_pct;
    write_json(out_path.string() + ".manifest.json", m);
    return kExitOk;
}

int cmd_study(const CommonArgs& args, const std::string& scenario_path) {
    const pwexp::ScenarioFile sf = pwexp::parse_scenario_file(scenario_path);
    pwexp::StudyOptions options;
    options.prior = make_prior(args, pwexp::parse_timescale(args.timescale));
    options.iterations = sf.iterations.value_or(args.iterations);
    options.burn_in = sf.burn_in.value_or(args.burn_in);
    const pwexp::SimReport report = pwexp::run_simulation_study(sf.scenario, options);

    fs::create_directories(args.out);
    const fs::path out_dir(args.out);
    CommonArgs echo = args;
    echo.input = scenario_path;
    echo.iterations = options.iterations;
    echo.burn_in = options.burn_in;
    write_json(out_dir / "manifest.json", manifest_json("study", echo));

    json j;
    j["scenario"] = {{"tau", report.scenario.tau},
                     {"lambda", report.scenario.lambda},
                     {"n", report.scenario.n},
                     {"follow_up", report.scenario.follow_up},
                     {"censor_pct", report.scenario.random_censor_pct},
                     {"replicates", report.scenario.replicates},
                     {"seed", report.scenario.seed}};
    j["iterations"] = report.iterations;
    j["burnin"] = report.burn_in;
    j["replicates_run"] = report.replicates_run;
    j["replicates_failed"] = report.replicates_failed;
    j["pct_correct_model"] = report.pct_correct_model;
    j["modal_k"] = report.modal_k;
    j["changepoint_mean"] = report.changepoint_mean;
    j["changepoint_sd"] = report.changepoint_sd ? json(*report.changepoint_sd) : json(nullptr);
    j["failures"] = report.failures;
    write_json(out_dir / "report.json", j);
    return kExitOk;
}

int cmd_summarize(const CommonArgs& args) {
    const pwexp::Timescale ts = pwexp::parse_timescale(args.timescale);
    const pwexp::SurvivalDataset ds = pwexp::load_dataset_csv_file(args.input, ts);
    const pwexp::GapTimeData gaps = pwexp::gap_times(ds);
    const pwexp::KMCurve km = pwexp::kaplan_meier(ds);

    fs::create_directories(args.out);
    const fs::path out_dir(args.out);
    json m;
    m["command"] = "summarize";
    m["version"] = pwexp::kVersion;
    m["input"] = args.input;
    m["out"] = args.out;
    m["timescale"] = args.timescale;
    write_json(out_dir / "manifest.json", m);

    json j;
    j["n"] = ds.size();
    j["events"] = ds.event_count();
    j["censored"] = ds.size() - ds.event_count();
    j["distinct_event_times"] = gaps.distinct_count();
    j["total_exposure"] = ds.total_time();
    j["max_time"] = ds.max_time();
    j["timescale"] = args.timescale;
    write_json(out_dir / "dataset_summary.json", j);

    std::ostringstream csv;
    csv << "time,survival\n";
    csv.precision(12);
    for (std::size_t i = 0; i < km.step_times.size(); ++i)
        csv << km.step_times[i] << ',' << km.survival_probs[i] << '\n';
    write_text(out_dir / "km_curve.csv", csv.str());
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Bayesian piecewise exponential survival models with unknown change-points"};
    app.require_subcommand(1);

    CommonArgs args;
    std::string scenario_path;
    std::optional<std::uint64_t> simulate_seed;

    auto add_sampler_flags = [&](CLI::App* cmd) {
        cmd->add_option("--iterations", args.iterations, "MCMC iterations per chain");
        cmd->add_option("--burnin", args.burn_in, "Burn-in iterations discarded per chain");
        cmd->add_option("--seed", args.seed, "Base random seed");
        cmd->add_option("--alpha", args.alpha, "Gamma shape of the hazard prior");
        cmd->add_option("--beta", args.beta, "Gamma rate of the hazard prior (default by timescale)");
        cmd->add_option("--xi", args.xi, "Poisson prior rate for the number of change-points");
        cmd->add_option("--max-k", args.max_k, "Largest number of change-points considered");
        cmd->add_option("--hyperprior", args.hyperprior, "Gamma hyperprior on beta as 'shape,rate'");
        cmd->add_option("--timescale", args.timescale, "Time unit: years, months or days")
            ->check(CLI::IsMember({"years", "months", "days"}));
    };

    CLI::App* fit = app.add_subcommand("fit", "Fit the change-point model to a time,status CSV");
    fit->add_option("--input", args.input, "Input CSV with header time,status")->required();
    fit->add_option("--out", args.out, "Output directory")->required();
    fit->add_option("--chains", args.chains, "Number of independent chains")->check(CLI::PositiveNumber);
    fit->add_option("--horizon", args.horizon, "Curve and AUC horizon (default: max observed time)");
    fit->add_flag("--uncollapse,!--no-uncollapse", args.uncollapse,
                  "Sample segment hazards post-hoc each iteration (default on)");
    add_sampler_flags(fit);

    CLI::App* simulate = app.add_subcommand("simulate", "Write one simulated cohort as CSV");
    simulate->add_option("--scenario", scenario_path, "Scenario file (key = value lines)")->required();
    simulate->add_option("--out", args.out, "Output CSV path")->required();
    simulate->add_option("--seed", simulate_seed, "Override the scenario seed");

    CLI::App* study = app.add_subcommand("study", "Replicated simulate-and-fit study");
    study->add_option("--scenario", scenario_path, "Scenario file (key = value lines)")->required();
    study->add_option("--out", args.out, "Output directory")->required();
    add_sampler_flags(study);

    CLI::App* summarize = app.add_subcommand("summarize", "Dataset descriptives and Kaplan-Meier curve");
    summarize->add_option("--input", args.input, "Input CSV with header time,status")->required();
    summarize->add_option("--out", args.out, "Output directory")->required();
    summarize->add_option("--timescale", args.timescale, "Time unit: years, months or days")
        ->check(CLI::IsMember({"years", "months", "days"}));

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitValidation;
    }

    try {
        if (app.got_subcommand(fit)) return cmd_fit(args);
        if (app.got_subcommand(simulate)) return cmd_simulate(scenario_path, args.out, simulate_seed);
        if (app.got_subcommand(study)) return cmd_study(args, scenario_path);
        if (app.got_subcommand(summarize)) return cmd_summarize(args);
    } catch (const pwexp::SamplerRefusal& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitSamplerRefusal;
    } catch (const pwexp::ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const std::domain_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return kExitOk;
}

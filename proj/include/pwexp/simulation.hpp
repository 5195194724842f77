#ifndef PWEXP_SIMULATION_HPP
#define PWEXP_SIMULATION_HPP

#include <atomic>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "pwexp/priors.hpp"
#include "pwexp/rng.hpp"
#include "pwexp/sampler.hpp"
#include "pwexp/survival_data.hpp"

namespace pwexp {

struct SimScenario {
    std::vector<double> tau;    // change-point times, ascending; empty for constant hazard
    std::vector<double> lambda; // one hazard per segment, |lambda| = |tau| + 1
    int n = 100;
    double follow_up = 2.0;
    double random_censor_pct = 0.0; // expected censored fraction within follow-up, <= 0.5
    int replicates = 1;
    std::uint64_t seed = 1;

    void validate() const {
        if (lambda.empty() || lambda.size() != tau.size() + 1)
            throw ValidationError("scenario: need one hazard per segment (|lambda| = |tau| + 1)");
        for (double l : lambda)
            if (!(l > 0.0)) throw ValidationError("scenario: hazards must be positive");
        for (std::size_t j = 0; j < tau.size(); ++j)
            if (!(tau[j] > 0.0) || (j > 0 && !(tau[j] > tau[j - 1])))
                throw ValidationError("scenario: change-points must be positive and increasing");
        if (!(follow_up > 0.0) || (!tau.empty() && !(follow_up > tau.back())))
            throw ValidationError("scenario: follow-up must exceed the last change-point");
        if (random_censor_pct < 0.0 || random_censor_pct > 0.5)
            throw ValidationError("scenario: censor percentage must lie in [0, 0.5]");
        if (n < 1) throw ValidationError("scenario: sample size must be positive");
        if (replicates < 1) throw ValidationError("scenario: replicates must be positive");
    }
};

// Inverse-transform draw through the piecewise-linear cumulative hazard.
inline double sample_piecewise_exponential_one(std::span<const double> tau, std::span<const double> lambda,
                                               Rng& rng) {
    const double target = rng.exponential();
    double cum = 0.0;
    double prev = 0.0;
    for (std::size_t j = 0; j < tau.size(); ++j) {
        const double next_cum = cum + lambda[j] * (tau[j] - prev);
        if (target <= next_cum) return prev + (target - cum) / lambda[j];
        cum = next_cum;
        prev = tau[j];
    }
    return prev + (target - cum) / lambda.back();
}

inline std::vector<double> sample_piecewise_exponential(std::span<const double> tau,
                                                        std::span<const double> lambda, int n, Rng& rng) {
    if (lambda.size() != tau.size() + 1)
        throw std::invalid_argument("sample_piecewise_exponential: |lambda| must equal |tau| + 1");
    std::vector<double> times(n);
    for (auto& t : times) t = sample_piecewise_exponential_one(tau, lambda, rng);
    return times;
}

// Random censoring per the doubling scheme: the first ceil(2 * pct * n)
// subjects receive an independent censoring time from the same piecewise
// distribution, then everyone is administratively censored at follow-up.
inline SurvivalDataset apply_censoring(const std::vector<double>& times, const SimScenario& scenario,
                                       Rng& rng) {
    scenario.validate();
    const int n = static_cast<int>(times.size());
    const int with_censor =
        std::min<int>(n, static_cast<int>(std::ceil(2.0 * scenario.random_censor_pct * n)));
    std::vector<std::pair<double, int>> records;
    records.reserve(n);
    for (int i = 0; i < n; ++i) {
        double time = times[i];
        int status = 1;
        if (i < with_censor) {
            const double censor = sample_piecewise_exponential_one(scenario.tau, scenario.lambda, rng);
            if (censor < time) {
                time = censor;
                status = 0;
            }
        }
        if (time > scenario.follow_up) {
            time = scenario.follow_up;
            status = 0;
        }
        records.emplace_back(time, status);
    }
    return load_dataset(records);
}

struct ReplicateResult {
    int modal_k = -1;
    std::vector<double> changepoint_means; // posterior means in time units, set when modal_k == true k
    std::string error;                     // nonempty when the fit failed
};

struct SimReport {
    SimScenario scenario;
    long iterations = 0;
    long burn_in = 0;
    int replicates_run = 0;
    int replicates_failed = 0;
    double pct_correct_model = 0.0;
    std::vector<int> modal_k;                      // per successful replicate
    std::vector<double> changepoint_mean;          // across correct replicates, per change-point
    std::optional<std::vector<double>> changepoint_sd; // absent with fewer than 2 correct replicates
    std::vector<std::string> failures;
};

struct StudyOptions {
    PriorConfig prior;
    long iterations = 20750;
    long burn_in = 750;
    int threads = 0; // 0: hardware concurrency
};

namespace detail {
inline int modal_k_of(const Trace& trace) {
    std::map<int, long> counts;
    for (const auto& st : trace.states) ++counts[st.k()];
    int best_k = 0;
    long best = -1;
    for (const auto& [k, c] : counts) {
        if (c > best) { // ties resolve to the smaller k
            best = c;
            best_k = k;
        }
    }
    return best_k;
}
} // namespace detail

inline SimReport run_simulation_study(const SimScenario& scenario, const StudyOptions& options) {
    scenario.validate();
    options.prior.validate();
    const int R = scenario.replicates;
    const int true_k = static_cast<int>(scenario.tau.size());

    std::vector<ReplicateResult> results(R);
    const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    const int workers =
        static_cast<int>(std::min<unsigned>(options.threads > 0 ? options.threads : hw, R));
    std::atomic<int> cursor{0};
    auto worker = [&] {
        for (;;) {
            const int r = cursor.fetch_add(1);
            if (r >= R) return;
            try {
                Rng data_rng = Rng::stream(scenario.seed, 0x5D, r);
                const auto times =
                    sample_piecewise_exponential(scenario.tau, scenario.lambda, scenario.n, data_rng);
                const SurvivalDataset ds = apply_censoring(times, scenario, data_rng);
                const GapTimeData gaps = gap_times(ds);
                ChainOptions chain;
                chain.iterations = options.iterations;
                chain.burn_in = options.burn_in;
                std::uint64_t fit_seed = scenario.seed ^ 0xF17F17ULL;
                fit_seed += 0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(r + 1);
                const Trace trace = run_chain(gaps, options.prior, chain, splitmix64(fit_seed));

                ReplicateResult& res = results[r];
                res.modal_k = detail::modal_k_of(trace);
                if (res.modal_k == true_k && true_k > 0) {
                    std::vector<double> sums(true_k, 0.0);
                    long count = 0;
                    for (const auto& st : trace.states) {
                        if (st.k() != true_k) continue;
                        for (int j = 0; j < true_k; ++j) sums[j] += trace.time_of_event[st.s[j]];
                        ++count;
                    }
                    res.changepoint_means.resize(true_k);
                    for (int j = 0; j < true_k; ++j) res.changepoint_means[j] = sums[j] / count;
                }
            } catch (const std::exception& e) {
                results[r].error = e.what();
            }
        }
    };
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();

    SimReport report;
    report.scenario = scenario;
    report.iterations = options.iterations;
    report.burn_in = options.burn_in;
    int correct = 0;
    std::vector<std::vector<double>> per_cp(true_k);
    for (int r = 0; r < R; ++r) {
        const auto& res = results[r];
        if (!res.error.empty()) {
            ++report.replicates_failed;
            report.failures.push_back("replicate " + std::to_string(r + 1) + ": " + res.error);
            continue;
        }
        ++report.replicates_run;
        report.modal_k.push_back(res.modal_k);
        if (res.modal_k == true_k) {
            ++correct;
            for (int j = 0; j < true_k; ++j) per_cp[j].push_back(res.changepoint_means[j]);
        }
    }
    if (report.replicates_run > 0)
        report.pct_correct_model = 100.0 * correct / report.replicates_run;
    if (true_k > 0 && correct > 0) {
        report.changepoint_mean.resize(true_k);
        for (int j = 0; j < true_k; ++j) {
            double sum = 0.0;
            for (double v : per_cp[j]) sum += v;
            report.changepoint_mean[j] = sum / correct;
        }
        if (correct >= 2) {
            std::vector<double> sds(true_k);
            for (int j = 0; j < true_k; ++j) {
                double ss = 0.0;
                for (double v : per_cp[j]) {
                    const double dev = v - report.changepoint_mean[j];
                    ss += dev * dev;
                }
                sds[j] = std::sqrt(ss / (correct - 1));
            }
            report.changepoint_sd = std::move(sds);
        }
    }
    return report;
}

// Scenario files are plain `key = value` text; lists are comma or space
// separated and `#` starts a comment.
struct ScenarioFile {
    SimScenario scenario;
    std::optional<long> iterations;
    std::optional<long> burn_in;
};

inline ScenarioFile parse_scenario(std::istream& in) {
    ScenarioFile out;
    bool saw_lambda = false;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const auto eq = line.find('=');
        auto trim = [](std::string s) {
            const auto a = s.find_first_not_of(" \t\r");
            const auto b = s.find_last_not_of(" \t\r");
            return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
        };
        const std::string whole = trim(line);
        if (whole.empty()) continue;
        if (eq == std::string::npos)
            throw ValidationError("scenario line " + std::to_string(lineno) + ": expected 'key = value'");
        const std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        for (auto& c : value)
            if (c == ',') c = ' ';

        auto parse_list = [&](const std::string& v) {
            std::vector<double> xs;
            std::stringstream ss(v);
            double x;
            while (ss >> x) xs.push_back(x);
            if (!ss.eof())
                throw ValidationError("scenario line " + std::to_string(lineno) + ": bad number in '" + v + "'");
            return xs;
        };
        auto one = [&](const std::string& v) {
            const auto xs = parse_list(v);
            if (xs.size() != 1)
                throw ValidationError("scenario line " + std::to_string(lineno) + ": expected a single value");
            return xs[0];
        };

        if (key == "tau") out.scenario.tau = parse_list(value);
        else if (key == "lambda") { out.scenario.lambda = parse_list(value); saw_lambda = true; }
        else if (key == "n") out.scenario.n = static_cast<int>(one(value));
        else if (key == "follow_up") out.scenario.follow_up = one(value);
        else if (key == "censor_pct") out.scenario.random_censor_pct = one(value);
        else if (key == "replicates") out.scenario.replicates = static_cast<int>(one(value));
        else if (key == "seed") out.scenario.seed = static_cast<std::uint64_t>(one(value));
        else if (key == "iterations") out.iterations = static_cast<long>(one(value));
        else if (key == "burnin") out.burn_in = static_cast<long>(one(value));
        else throw ValidationError("scenario: unknown key '" + key + "'");
    }
    if (!saw_lambda) throw ValidationError("scenario: missing required key 'lambda'");
    out.scenario.validate();
    return out;
}

inline ScenarioFile parse_scenario_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open scenario file: " + path);
    return parse_scenario(in);
}

} // namespace pwexp

#endif

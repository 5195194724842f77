#ifndef PWEXP_PRIORS_HPP
#define PWEXP_PRIORS_HPP

#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>

#include "pwexp/survival_data.hpp"

namespace pwexp {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

struct Hyperprior {
    double shape = 1.0; // xi_h
    double rate = 1.0;  // delta
};

struct PriorConfig {
    double alpha = 1.0;        // Gamma shape for segment hazards
    double beta = 1.0;         // Gamma rate, timescale dependent
    double poisson_rate = 1.0; // xi, prior mean change-point count
    int max_changepoints = 10; // K
    double birth_prob = 0.5;   // a_k for 0 < k < K
    std::optional<Hyperprior> hyperprior;

    void validate() const {
        if (!(alpha > 0.0)) throw std::domain_error("prior: alpha must be positive");
        if (!(beta > 0.0)) throw std::domain_error("prior: beta must be positive");
        if (!(poisson_rate > 0.0)) throw std::domain_error("prior: poisson rate must be positive");
        if (max_changepoints < 0) throw std::domain_error("prior: max change-points must be nonnegative");
        // interior moves use a_k = r_k = birth_prob, so a_k + r_k <= 1 caps it at 0.5
        if (!(birth_prob > 0.0) || birth_prob > 0.5)
            throw std::domain_error("prior: birth probability must lie in (0, 0.5]");
        if (hyperprior) {
            if (!(hyperprior->shape > 0.0) || !(hyperprior->rate > 0.0))
                throw std::domain_error("prior: hyperprior shape and rate must be positive");
        }
    }

    static double default_beta(Timescale ts) {
        switch (ts) {
            case Timescale::months: return 12.0;
            case Timescale::days: return 365.0;
            default: return 1.0;
        }
    }

    // Hyperprior with prior mean equal to the timescale's default beta.
    static Hyperprior default_hyperprior(Timescale ts) { return {1.0, 1.0 / default_beta(ts)}; }

    static PriorConfig defaults_for(Timescale ts) {
        PriorConfig p;
        p.beta = default_beta(ts);
        return p;
    }
};

struct SegmentStats {
    int deaths = 0;      // D
    double exposure = 0; // T
};

// Events (a, b] of the gap-time data; both ends must be segment boundaries.
inline SegmentStats segment_stats(const GapTimeData& gaps, int a, int b) {
    if (a < 0 || b > gaps.total_events || a > b || !gaps.is_boundary(a) || !gaps.is_boundary(b))
        throw std::invalid_argument("segment_stats: invalid segment boundaries");
    return {b - a, gaps.exposure_between(a, b)};
}

// log of the segment marginal likelihood under the Gamma(alpha, beta) hazard
// prior: the ratio of prior to posterior normalising constants.
inline double log_marginal_segment(const SegmentStats& seg, double alpha, double beta) {
    if (!(alpha > 0.0) || !(beta > 0.0))
        throw std::domain_error("log_marginal_segment: alpha and beta must be positive");
    if (seg.deaths < 0 || seg.exposure < 0.0)
        throw std::domain_error("log_marginal_segment: negative segment statistics");
    return alpha * std::log(beta) - std::lgamma(alpha) + std::lgamma(alpha + seg.deaths) -
           (alpha + seg.deaths) * std::log(beta + seg.exposure);
}

inline double log_segment_loglik(double lambda, const SegmentStats& seg) {
    if (!(lambda > 0.0)) throw std::domain_error("log_segment_loglik: hazard must be positive");
    return seg.deaths * std::log(lambda) - lambda * seg.exposure;
}

// Time-scale log-likelihood of the piecewise exponential model: for each
// subject, v_i * log(hazard at t_i) minus the cumulative hazard at t_i.
inline double log_piecewise_loglik_timescale(const SurvivalDataset& ds, std::span<const double> tau,
                                             std::span<const double> lambda) {
    if (lambda.size() != tau.size() + 1)
        throw std::invalid_argument("piecewise loglik: need one more hazard than change-points");
    for (std::size_t j = 0; j < tau.size(); ++j) {
        if (!(tau[j] > 0.0) || (j > 0 && !(tau[j] > tau[j - 1])))
            throw std::domain_error("piecewise loglik: change-points must be positive and increasing");
        if (!(tau[j] < ds.max_time()))
            throw std::domain_error("piecewise loglik: change-points must precede the last observation");
    }
    for (double l : lambda)
        if (!(l > 0.0)) throw std::domain_error("piecewise loglik: hazards must be positive");

    // cumulative hazard at segment starts
    std::vector<double> cum(tau.size() + 1, 0.0);
    for (std::size_t j = 0; j < tau.size(); ++j)
        cum[j + 1] = cum[j] + lambda[j] * (tau[j] - (j == 0 ? 0.0 : tau[j - 1]));

    double ll = 0.0;
    for (const auto& o : ds.observations) {
        const std::size_t j =
            static_cast<std::size_t>(std::lower_bound(tau.begin(), tau.end(), o.time) - tau.begin());
        const double seg_start = j == 0 ? 0.0 : tau[j - 1];
        const double big_lambda = cum[j] + lambda[j] * (o.time - seg_start);
        ll += (o.event ? std::log(lambda[j]) : 0.0) - big_lambda;
    }
    return ll;
}

// Poisson(xi) log-pmf; the sampler truncates at K by never proposing beyond it.
inline double log_prior_k(int k, double poisson_rate) {
    if (k < 0) throw std::domain_error("log_prior_k: k must be nonnegative");
    return k * std::log(poisson_rate) - poisson_rate - std::lgamma(k + 1.0);
}

inline double log_binomial_coefficient(int n, int r) {
    if (r < 0 || r > n) return kNegInf;
    return std::lgamma(n + 1.0) - std::lgamma(r + 1.0) - std::lgamma(n - r + 1.0);
}

// Discrete location prior over event indices 0 < s_1 < ... < s_k < d:
// inverse binomial coefficient times the product of inter-change-point
// spacings, which is zero (returned as -inf) for adjacent indices.
inline double log_prior_locations(std::span<const int> s, int d) {
    const int k = static_cast<int>(s.size());
    int prev = 0;
    for (int j = 0; j < k; ++j) {
        if (s[j] <= prev || s[j] >= d)
            throw std::domain_error("log_prior_locations: indices must satisfy 0 < s_1 < ... < s_k < d");
        prev = s[j];
    }
    const double log_binom = log_binomial_coefficient(d - 1, 2 * k + 1);
    if (log_binom == kNegInf) return kNegInf;
    double total = -log_binom;
    prev = 0;
    for (int j = 0; j <= k; ++j) {
        const int next = j == k ? d : s[j];
        const int spacing = next - prev - 1;
        if (spacing <= 0) return kNegInf;
        total += std::log(static_cast<double>(spacing));
        prev = next;
    }
    return total;
}

} // namespace pwexp

#endif

#ifndef PWEXP_POSTERIOR_HPP
#define PWEXP_POSTERIOR_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <ostream>
#include <span>
#include <stdexcept>
#include <vector>

#include "pwexp/sampler.hpp"
#include "pwexp/survival_data.hpp"

namespace pwexp {

enum class CurveKind { hazard, survival, cumulative_hazard };

struct CurveSummary {
    std::vector<double> grid;
    std::vector<double> mean;
    std::vector<double> q025;
    std::vector<double> q50;
    std::vector<double> q975;
    CurveKind kind = CurveKind::hazard;
};

struct FitStatistics {
    double waic = 0.0;
    double neg2_log_pml = 0.0;
    std::size_t draws = 0;
    std::size_t observations = 0;
};

struct SummaryStat {
    double mean = 0.0;
    double sd = 0.0;
};

inline std::map<int, double> model_posterior_probs(const Trace& trace) {
    if (trace.states.empty()) throw std::invalid_argument("model_posterior_probs: empty trace");
    std::map<int, long> counts;
    for (const auto& st : trace.states) ++counts[st.k()];
    std::map<int, double> probs;
    for (const auto& [k, c] : counts) probs[k] = static_cast<double>(c) / trace.states.size();
    return probs;
}

inline int modal_k(const Trace& trace) {
    const auto probs = model_posterior_probs(trace);
    int best_k = 0;
    double best = -1.0;
    for (const auto& [k, p] : probs) {
        if (p > best) {
            best = p;
            best_k = k;
        }
    }
    return best_k;
}

namespace detail {

inline SummaryStat mean_sd(const std::vector<double>& xs) {
    SummaryStat s;
    if (xs.empty()) return s;
    double sum = 0.0;
    for (double x : xs) sum += x;
    s.mean = sum / xs.size();
    if (xs.size() >= 2) {
        double ss = 0.0;
        for (double x : xs) ss += (x - s.mean) * (x - s.mean);
        s.sd = std::sqrt(ss / (xs.size() - 1));
    }
    return s;
}

// R type-7 quantile on a sorted vector.
inline double quantile_sorted(const std::vector<double>& sorted, double p) {
    const std::size_t n = sorted.size();
    if (n == 1) return sorted[0];
    const double h = p * (n - 1);
    const std::size_t lo = static_cast<std::size_t>(h);
    if (lo + 1 >= n) return sorted[n - 1];
    const double frac = h - lo;
    return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

inline double logsumexp(std::span<const double> xs) {
    double mx = kNegInf;
    for (double x : xs) mx = std::max(mx, x);
    if (mx == kNegInf) return kNegInf;
    double sum = 0.0;
    for (double x : xs) sum += std::exp(x - mx);
    return mx + std::log(sum);
}

// Step representation of one posterior draw: boundaries in time units and
// the cumulative hazard at each boundary.
struct DrawSteps {
    std::vector<double> tau;
    std::vector<double> cum; // cumulative hazard at tau values
    const std::vector<double>* hazards = nullptr;

    double hazard_at(double t) const {
        const std::size_t j =
            static_cast<std::size_t>(std::lower_bound(tau.begin(), tau.end(), t) - tau.begin());
        return (*hazards)[j];
    }
    double cumhaz_at(double t) const {
        const std::size_t j =
            static_cast<std::size_t>(std::lower_bound(tau.begin(), tau.end(), t) - tau.begin());
        const double start = j == 0 ? 0.0 : tau[j - 1];
        const double base = j == 0 ? 0.0 : cum[j - 1];
        return base + (*hazards)[j] * (t - start);
    }
};

inline DrawSteps draw_steps(const Trace& trace, const ChangePointState& st) {
    DrawSteps d;
    d.hazards = &*st.hazards;
    d.tau.resize(st.s.size());
    d.cum.resize(st.s.size());
    double cum = 0.0;
    double prev = 0.0;
    for (std::size_t j = 0; j < st.s.size(); ++j) {
        d.tau[j] = trace.time_of_event[st.s[j]];
        cum += (*st.hazards)[j] * (d.tau[j] - prev);
        d.cum[j] = cum;
        prev = d.tau[j];
    }
    return d;
}

inline void require_hazards(const Trace& trace, const char* who) {
    if (!trace.has_hazards())
        throw std::logic_error(std::string(who) +
                               ": trace has no hazard draws; rerun the chain with uncollapsing enabled");
}

inline CurveSummary summarise_curves(const Trace& trace, std::span<const double> grid, CurveKind kind) {
    require_hazards(trace, "curve summary");
    const std::size_t m = trace.states.size();
    const std::size_t g = grid.size();
    std::vector<double> values(m * g);
    for (std::size_t i = 0; i < m; ++i) {
        const DrawSteps steps = draw_steps(trace, trace.states[i]);
        for (std::size_t p = 0; p < g; ++p) {
            double v;
            switch (kind) {
                case CurveKind::hazard: v = steps.hazard_at(grid[p]); break;
                case CurveKind::cumulative_hazard: v = steps.cumhaz_at(grid[p]); break;
                default: v = std::exp(-steps.cumhaz_at(grid[p])); break;
            }
            values[i * g + p] = v;
        }
    }
    CurveSummary out;
    out.kind = kind;
    out.grid.assign(grid.begin(), grid.end());
    out.mean.resize(g);
    out.q025.resize(g);
    out.q50.resize(g);
    out.q975.resize(g);
    std::vector<double> column(m);
    for (std::size_t p = 0; p < g; ++p) {
        double sum = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            column[i] = values[i * g + p];
            sum += column[i];
        }
        std::sort(column.begin(), column.end());
        out.mean[p] = sum / m;
        out.q025[p] = quantile_sorted(column, 0.025);
        out.q50[p] = quantile_sorted(column, 0.50);
        out.q975[p] = quantile_sorted(column, 0.975);
    }
    return out;
}

} // namespace detail

// Posterior mean and SD of each change-point time, conditional on states
// with exactly `k` change-points. Empty when no such state was visited.
inline std::vector<SummaryStat> changepoint_summaries(const Trace& trace, int k) {
    std::vector<std::vector<double>> samples(k);
    for (const auto& st : trace.states) {
        if (st.k() != k) continue;
        for (int j = 0; j < k; ++j) samples[j].push_back(trace.time_of_event[st.s[j]]);
    }
    if (k == 0 || samples[0].empty()) return {};
    std::vector<SummaryStat> out(k);
    for (int j = 0; j < k; ++j) out[j] = detail::mean_sd(samples[j]);
    return out;
}

// Posterior mean and SD of each segment hazard, conditional on k.
inline std::vector<SummaryStat> hazard_summaries(const Trace& trace, int k) {
    detail::require_hazards(trace, "hazard_summaries");
    std::vector<std::vector<double>> samples(k + 1);
    for (const auto& st : trace.states) {
        if (st.k() != k) continue;
        for (int j = 0; j <= k; ++j) samples[j].push_back((*st.hazards)[j]);
    }
    if (samples[0].empty()) return {};
    std::vector<SummaryStat> out(k + 1);
    for (int j = 0; j <= k; ++j) out[j] = detail::mean_sd(samples[j]);
    return out;
}

// Pointwise 2.5/50/97.5 percent quantiles per segment hazard, conditional on k.
inline std::vector<std::array<double, 3>> hazard_intervals(const Trace& trace, int k) {
    detail::require_hazards(trace, "hazard_intervals");
    std::vector<std::vector<double>> samples(k + 1);
    for (const auto& st : trace.states) {
        if (st.k() != k) continue;
        for (int j = 0; j <= k; ++j) samples[j].push_back((*st.hazards)[j]);
    }
    std::vector<std::array<double, 3>> out;
    if (samples[0].empty()) return out;
    for (int j = 0; j <= k; ++j) {
        std::sort(samples[j].begin(), samples[j].end());
        out.push_back({detail::quantile_sorted(samples[j], 0.025),
                       detail::quantile_sorted(samples[j], 0.50),
                       detail::quantile_sorted(samples[j], 0.975)});
    }
    return out;
}

inline std::vector<double> default_grid(double horizon, int points = 200) {
    if (!(horizon > 0.0)) throw std::invalid_argument("default_grid: horizon must be positive");
    if (points < 2) throw std::invalid_argument("default_grid: need at least 2 points");
    std::vector<double> grid(points);
    for (int i = 0; i < points; ++i) grid[i] = horizon * i / (points - 1);
    return grid;
}

inline CurveSummary hazard_curve(const Trace& trace, std::span<const double> grid) {
    return detail::summarise_curves(trace, grid, CurveKind::hazard);
}

inline CurveSummary survival_curve(const Trace& trace, std::span<const double> grid) {
    return detail::summarise_curves(trace, grid, CurveKind::survival);
}

inline CurveSummary cumulative_hazard_curve(const Trace& trace, std::span<const double> grid) {
    return detail::summarise_curves(trace, grid, CurveKind::cumulative_hazard);
}

// Area under the mean survival curve by trapezoid on the summary grid.
inline double auc(const CurveSummary& curve, double horizon) {
    if (curve.kind != CurveKind::survival) throw std::invalid_argument("auc: needs a survival curve");
    if (curve.grid.empty() || horizon > curve.grid.back() + 1e-12)
        throw std::invalid_argument("auc: horizon lies beyond the curve grid");
    double area = 0.0;
    for (std::size_t p = 1; p < curve.grid.size(); ++p) {
        const double lo = curve.grid[p - 1];
        if (lo >= horizon) break;
        const double hi = std::min(curve.grid[p], horizon);
        double right = curve.mean[p];
        if (hi < curve.grid[p]) {
            const double w = (hi - lo) / (curve.grid[p] - lo);
            right = curve.mean[p - 1] + w * (curve.mean[p] - curve.mean[p - 1]);
        }
        area += 0.5 * (curve.mean[p - 1] + right) * (hi - lo);
    }
    return area;
}

// Exact per-draw integration of the survival function out to `horizon`,
// averaged over draws; preferred over the grid version.
inline double auc_exact(const Trace& trace, double horizon) {
    detail::require_hazards(trace, "auc_exact");
    if (!(horizon > 0.0)) throw std::invalid_argument("auc_exact: horizon must be positive");
    double total = 0.0;
    for (const auto& st : trace.states) {
        const detail::DrawSteps steps = detail::draw_steps(trace, st);
        double area = 0.0;
        double prev = 0.0;
        double surv = 1.0;
        for (std::size_t j = 0; j <= steps.tau.size(); ++j) {
            const double hi = j == steps.tau.size() ? horizon : std::min(steps.tau[j], horizon);
            if (hi > prev) {
                const double lambda = (*steps.hazards)[j];
                area += surv * (1.0 - std::exp(-lambda * (hi - prev))) / lambda;
                surv *= std::exp(-lambda * (hi - prev));
            }
            if (hi >= horizon) break;
            prev = hi;
        }
        total += area;
    }
    return total / trace.states.size();
}

// Integral over [0, horizon] of |mean model survival - Kaplan-Meier|, with
// the model curve linear between grid points and the KM constant between
// steps; sign crossings are split exactly.
inline double abs_difference(const CurveSummary& curve, const KMCurve& km, double horizon) {
    if (curve.kind != CurveKind::survival)
        throw std::invalid_argument("abs_difference: needs a survival curve");
    if (curve.grid.empty() || curve.grid.front() > 1e-12 || horizon > curve.grid.back() + 1e-12)
        throw std::invalid_argument("abs_difference: curve grid must span [0, horizon]");

    std::vector<double> breaks;
    for (double t : curve.grid)
        if (t < horizon) breaks.push_back(t);
    for (double t : km.step_times)
        if (t < horizon && t > 0.0) breaks.push_back(t);
    breaks.push_back(horizon);
    breaks.push_back(0.0);
    std::sort(breaks.begin(), breaks.end());
    breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());

    auto model_at = [&](double t) {
        auto it = std::lower_bound(curve.grid.begin(), curve.grid.end(), t);
        std::size_t p = static_cast<std::size_t>(it - curve.grid.begin());
        if (p >= curve.grid.size()) return curve.mean.back();
        if (curve.grid[p] == t || p == 0) return curve.mean[p];
        const double w = (t - curve.grid[p - 1]) / (curve.grid[p] - curve.grid[p - 1]);
        return curve.mean[p - 1] + w * (curve.mean[p] - curve.mean[p - 1]);
    };

    double total = 0.0;
    for (std::size_t b = 1; b < breaks.size(); ++b) {
        const double lo = breaks[b - 1];
        const double hi = breaks[b];
        const double step = km.value_at(0.5 * (lo + hi));
        const double d_lo = model_at(lo) - step;
        const double d_hi = model_at(hi) - step;
        const double len = hi - lo;
        if (d_lo * d_hi >= 0.0) {
            total += 0.5 * (std::abs(d_lo) + std::abs(d_hi)) * len;
        } else {
            const double cross = len * d_lo / (d_lo - d_hi);
            total += 0.5 * std::abs(d_lo) * cross + 0.5 * std::abs(d_hi) * (len - cross);
        }
    }
    return total;
}

// Draw-by-observation log-likelihood matrix, row-major by draw.
struct PointwiseLogLik {
    std::size_t n_draws = 0;
    std::size_t n_obs = 0;
    std::vector<double> values;

    double at(std::size_t draw, std::size_t obs) const { return values[draw * n_obs + obs]; }
};

inline PointwiseLogLik pointwise_loglik(const Trace& trace, const SurvivalDataset& ds) {
    detail::require_hazards(trace, "pointwise_loglik");
    PointwiseLogLik out;
    out.n_draws = trace.states.size();
    out.n_obs = ds.observations.size();
    out.values.resize(out.n_draws * out.n_obs);
    for (std::size_t m = 0; m < out.n_draws; ++m) {
        const detail::DrawSteps steps = detail::draw_steps(trace, trace.states[m]);
        for (std::size_t i = 0; i < out.n_obs; ++i) {
            const auto& o = ds.observations[i];
            const double ll =
                (o.event ? std::log(steps.hazard_at(o.time)) : 0.0) - steps.cumhaz_at(o.time);
            out.values[m * out.n_obs + i] = ll;
        }
    }
    return out;
}

inline double waic(const PointwiseLogLik& ll) {
    if (ll.n_draws < 2) throw std::invalid_argument("waic: need at least 2 draws");
    const double log_m = std::log(static_cast<double>(ll.n_draws));
    double total = 0.0;
    std::vector<double> column(ll.n_draws);
    for (std::size_t i = 0; i < ll.n_obs; ++i) {
        double mean = 0.0;
        for (std::size_t m = 0; m < ll.n_draws; ++m) {
            column[m] = ll.at(m, i);
            mean += column[m];
        }
        mean /= ll.n_draws;
        double var = 0.0;
        for (double v : column) var += (v - mean) * (v - mean);
        var /= ll.n_draws - 1;
        const double lppd = detail::logsumexp(column) - log_m;
        total += lppd - var;
    }
    return -2.0 * total;
}

// -2 log pseudo-marginal likelihood: CPO_i is the harmonic mean of the
// pointwise likelihoods across draws.
inline double neg2_log_pml(const PointwiseLogLik& ll) {
    if (ll.n_draws < 2) throw std::invalid_argument("pml: need at least 2 draws");
    const double log_m = std::log(static_cast<double>(ll.n_draws));
    double total = 0.0;
    std::vector<double> column(ll.n_draws);
    for (std::size_t i = 0; i < ll.n_obs; ++i) {
        for (std::size_t m = 0; m < ll.n_draws; ++m) column[m] = -ll.at(m, i);
        const double log_cpo = log_m - detail::logsumexp(column);
        total += log_cpo;
    }
    return -2.0 * total;
}

inline FitStatistics fit_statistics(const PointwiseLogLik& ll) {
    return {waic(ll), neg2_log_pml(ll), ll.n_draws, ll.n_obs};
}

enum class ChainFunctional { k, log_posterior };

// Gelman-Rubin potential scale reduction factor on a scalar functional of
// the trans-dimensional state.
inline double psrf(const std::vector<Trace>& traces, ChainFunctional functional) {
    if (traces.size() < 2) throw std::invalid_argument("psrf: need at least 2 chains");
    const std::size_t n = traces.front().size();
    for (const auto& t : traces)
        if (t.size() != n) throw std::invalid_argument("psrf: chains must have equal length");
    if (n < 2) throw std::invalid_argument("psrf: chains too short");

    const std::size_t m = traces.size();
    std::vector<double> chain_mean(m), chain_var(m);
    for (std::size_t c = 0; c < m; ++c) {
        double sum = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            sum += functional == ChainFunctional::k ? traces[c].states[i].k()
                                                    : traces[c].log_posteriors[i];
        chain_mean[c] = sum / n;
        double ss = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double v = functional == ChainFunctional::k
                                 ? traces[c].states[i].k()
                                 : traces[c].log_posteriors[i];
            ss += (v - chain_mean[c]) * (v - chain_mean[c]);
        }
        chain_var[c] = ss / (n - 1);
    }
    double grand = 0.0;
    for (double v : chain_mean) grand += v;
    grand /= m;
    double b = 0.0;
    for (double v : chain_mean) b += (v - grand) * (v - grand);
    b *= static_cast<double>(n) / (m - 1);
    double w = 0.0;
    for (double v : chain_var) w += v;
    w /= m;
    if (w <= 0.0) return b <= 0.0 ? 1.0 : std::numeric_limits<double>::infinity();
    const double v_hat = (n - 1.0) / n * w + b / n;
    return std::sqrt(v_hat / w);
}

// Pools chains into one trace for posterior summaries.
inline Trace merge_traces(const std::vector<Trace>& traces) {
    if (traces.empty()) throw std::invalid_argument("merge_traces: no chains");
    Trace merged = traces.front();
    for (std::size_t c = 1; c < traces.size(); ++c) {
        const Trace& t = traces[c];
        merged.states.insert(merged.states.end(), t.states.begin(), t.states.end());
        merged.log_posteriors.insert(merged.log_posteriors.end(), t.log_posteriors.begin(),
                                     t.log_posteriors.end());
        merged.birth_attempts += t.birth_attempts;
        merged.birth_accepts += t.birth_accepts;
        merged.death_attempts += t.death_attempts;
        merged.death_accepts += t.death_accepts;
        merged.relocations += t.relocations;
    }
    merged.iterations = static_cast<long>(merged.states.size());
    merged.burn_in = 0;
    return merged;
}

// Deterministic thinning to at most `max_draws` states.
inline Trace thin_trace(const Trace& trace, std::size_t max_draws) {
    if (max_draws == 0) throw std::invalid_argument("thin_trace: max_draws must be positive");
    if (trace.states.size() <= max_draws) return trace;
    const std::size_t stride = (trace.states.size() + max_draws - 1) / max_draws;
    Trace thinned = trace;
    thinned.states.clear();
    thinned.log_posteriors.clear();
    for (std::size_t i = 0; i < trace.states.size(); i += stride) {
        thinned.states.push_back(trace.states[i]);
        thinned.log_posteriors.push_back(trace.log_posteriors[i]);
    }
    thinned.iterations = static_cast<long>(thinned.states.size());
    thinned.burn_in = 0;
    return thinned;
}

inline void write_curve_csv(std::ostream& out, const CurveSummary& curve) {
    out << "time,mean,q2.5,q50,q97.5\n";
    out.precision(12);
    for (std::size_t p = 0; p < curve.grid.size(); ++p)
        out << curve.grid[p] << ',' << curve.mean[p] << ',' << curve.q025[p] << ',' << curve.q50[p]
            << ',' << curve.q975[p] << '\n';
}

} // namespace pwexp

#endif

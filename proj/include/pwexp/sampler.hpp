#ifndef PWEXP_SAMPLER_HPP
#define PWEXP_SAMPLER_HPP

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <optional>
#include <span>
#include <thread>
#include <vector>

#include "pwexp/priors.hpp"
#include "pwexp/rng.hpp"
#include "pwexp/survival_data.hpp"

namespace pwexp {

class SamplerRefusal : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Current point of the collapsed chain: change-point event indices, plus the
// post-hoc hazard draws and the hyperprior beta when those steps are enabled.
struct ChangePointState {
    std::vector<int> s;
    std::optional<std::vector<double>> hazards;
    std::optional<double> beta;

    int k() const { return static_cast<int>(s.size()); }
};

// Per-k birth/death proposal probabilities: r_0 = 0, a_K = 0, a_k = r_k = p
// for interior k, and r_k = 1 - a_k throughout.
struct MoveProbabilities {
    std::vector<double> birth;
    std::vector<double> death;

    static MoveProbabilities standard(int max_changepoints, double interior_prob = 0.5) {
        MoveProbabilities mp;
        const int K = max_changepoints;
        mp.birth.assign(K + 1, interior_prob);
        mp.death.assign(K + 1, interior_prob);
        mp.birth[0] = K == 0 ? 0.0 : 1.0;
        mp.death[0] = 0.0;
        if (K > 0) {
            mp.birth[K] = 0.0;
            mp.death[K] = 1.0;
        }
        return mp;
    }
};

struct Trace {
    std::vector<ChangePointState> states;
    std::vector<double> log_posteriors; // collapsed, unnormalised
    long iterations = 0;
    long burn_in = 0;
    std::uint64_t seed = 0;
    long birth_attempts = 0, birth_accepts = 0;
    long death_attempts = 0, death_accepts = 0;
    long relocations = 0;

    int total_events = 0;              // d of the fitted data
    std::vector<double> time_of_event; // 1-based copy from GapTimeData

    std::size_t size() const { return states.size(); }
    bool has_hazards() const { return !states.empty() && states.front().hazards.has_value(); }
};

struct ChainOptions {
    long iterations = 20750;
    long burn_in = 750;
    bool uncollapse = false;
    bool hyperprior = false; // implies uncollapsing; beta is Gibbs-updated each iteration
};

inline double effective_beta(const ChangePointState& state, const PriorConfig& prior) {
    return state.beta ? *state.beta : prior.beta;
}

// Unnormalised collapsed log posterior of (k, s): sum of segment marginal
// log likelihoods plus location and count priors.
inline double log_collapsed_posterior(const GapTimeData& gaps, const PriorConfig& prior,
                                      std::span<const int> s, double beta) {
    const int d = gaps.total_events;
    for (int idx : s)
        if (!gaps.is_boundary(idx)) return kNegInf;
    double lp = log_prior_locations(s, d);
    if (lp == kNegInf) return kNegInf;
    lp += log_prior_k(static_cast<int>(s.size()), prior.poisson_rate);
    int prev = 0;
    for (std::size_t j = 0; j <= s.size(); ++j) {
        const int next = j == s.size() ? d : s[j];
        lp += log_marginal_segment(segment_stats(gaps, prev, next), prior.alpha, beta);
        prev = next;
    }
    return lp;
}

namespace detail {

inline double log_marginal_between(const GapTimeData& gaps, const PriorConfig& prior, double beta, int a,
                                   int b) {
    return log_marginal_segment(segment_stats(gaps, a, b), prior.alpha, beta);
}

// Neighbours of the change-point at position j (0-based) within s.
inline std::pair<int, int> segment_bounds(std::span<const int> s, int j, int d) {
    const int lo = j == 0 ? 0 : s[j - 1];
    const int hi = j + 1 == static_cast<int>(s.size()) ? d : s[j + 1];
    return {lo, hi};
}

} // namespace detail

// log Metropolis-Hastings ratio for inserting a change-point at event index
// `candidate`. Only the split segment's marginals enter; everything else
// cancels. Returns -inf for inadmissible candidates (tie interiors or
// zero-mass spacings), which the chain then rejects.
inline double birth_log_ratio(const ChangePointState& state, int candidate, const GapTimeData& gaps,
                              const PriorConfig& prior, const MoveProbabilities& moves) {
    const int k = state.k();
    const int d = gaps.total_events;
    if (candidate <= 0 || candidate >= d) throw std::invalid_argument("birth: candidate out of range");
    if (k + 1 >= static_cast<int>(moves.birth.size()))
        throw std::invalid_argument("birth: k is already at the maximum");
    if (!gaps.is_boundary(candidate)) return kNegInf;

    std::vector<int> proposed(state.s);
    proposed.insert(std::upper_bound(proposed.begin(), proposed.end(), candidate), candidate);
    const double new_loc_prior = log_prior_locations(proposed, d);
    if (new_loc_prior == kNegInf) return kNegInf;

    const double beta = effective_beta(state, prior);
    const auto split_pos =
        static_cast<int>(std::upper_bound(state.s.begin(), state.s.end(), candidate) - state.s.begin());
    const int lo = split_pos == 0 ? 0 : state.s[split_pos - 1];
    const int hi = split_pos == k ? d : state.s[split_pos];

    double log_a = detail::log_marginal_between(gaps, prior, beta, lo, candidate) +
                   detail::log_marginal_between(gaps, prior, beta, candidate, hi) -
                   detail::log_marginal_between(gaps, prior, beta, lo, hi);
    log_a += new_loc_prior - log_prior_locations(state.s, d);
    log_a += log_prior_k(k + 1, prior.poisson_rate) - log_prior_k(k, prior.poisson_rate);
    // P(k+1,k) / P(k,k+1) with P(k,k+1) = a_k/(d-k-1), P(k+1,k) = r_{k+1}/(k+1)
    log_a += std::log(moves.death[k + 1] / (k + 1)) - std::log(moves.birth[k] / (d - k - 1));
    return log_a;
}

// log MH ratio for deleting the change-point at position j; the exact
// negative of the matching birth ratio.
inline double death_log_ratio(const ChangePointState& state, int j, const GapTimeData& gaps,
                              const PriorConfig& prior, const MoveProbabilities& moves) {
    const int k = state.k();
    const int d = gaps.total_events;
    if (j < 0 || j >= k) throw std::invalid_argument("death: no change-point at that position");

    std::vector<int> proposed(state.s);
    proposed.erase(proposed.begin() + j);

    const double beta = effective_beta(state, prior);
    const auto [lo, hi] = detail::segment_bounds(state.s, j, d);
    const int removed = state.s[j];

    double log_a = detail::log_marginal_between(gaps, prior, beta, lo, hi) -
                   detail::log_marginal_between(gaps, prior, beta, lo, removed) -
                   detail::log_marginal_between(gaps, prior, beta, removed, hi);
    log_a += log_prior_locations(proposed, d) - log_prior_locations(state.s, d);
    log_a += log_prior_k(k - 1, prior.poisson_rate) - log_prior_k(k, prior.poisson_rate);
    log_a += std::log(moves.birth[k - 1] / (d - k)) - std::log(moves.death[k] / k);
    return log_a;
}

struct MoveProposal {
    ChangePointState candidate;
    double log_accept = kNegInf;
    bool admissible = false;
};

// Uniform draw over the d-k-1 unoccupied event indices in 1..d-1.
inline MoveProposal propose_birth(const ChangePointState& state, const GapTimeData& gaps,
                                  const PriorConfig& prior, const MoveProbabilities& moves, Rng& rng) {
    const int k = state.k();
    const int d = gaps.total_events;
    MoveProposal out;
    const int candidates = d - 1 - k;
    if (k >= prior.max_changepoints || candidates <= 0) return out;

    int pick = static_cast<int>(rng.uniform_index(candidates)) + 1; // rank among unoccupied
    for (int occupied : state.s)
        if (occupied <= pick) ++pick;

    out.admissible = true;
    out.log_accept = birth_log_ratio(state, pick, gaps, prior, moves);
    out.candidate = state;
    out.candidate.s.insert(std::upper_bound(out.candidate.s.begin(), out.candidate.s.end(), pick), pick);
    return out;
}

inline MoveProposal propose_death(const ChangePointState& state, const GapTimeData& gaps,
                                  const PriorConfig& prior, const MoveProbabilities& moves, Rng& rng) {
    MoveProposal out;
    if (state.k() == 0) return out;
    const int j = static_cast<int>(rng.uniform_index(state.s.size()));
    out.admissible = true;
    out.log_accept = death_log_ratio(state, j, gaps, prior, moves);
    out.candidate = state;
    out.candidate.s.erase(out.candidate.s.begin() + j);
    return out;
}

// Exact Gibbs redraw of one uniformly chosen change-point from its full
// conditional over the open interval between its neighbours.
inline ChangePointState resample_location(const ChangePointState& state, const GapTimeData& gaps,
                                          const PriorConfig& prior, Rng& rng) {
    const int k = state.k();
    if (k == 0) return state;
    const int d = gaps.total_events;
    const double beta = effective_beta(state, prior);

    const int j = static_cast<int>(rng.uniform_index(state.s.size()));
    const auto [lo, hi] = detail::segment_bounds(state.s, j, d);

    std::vector<int> values;
    std::vector<double> log_w;
    values.reserve(hi - lo - 1);
    log_w.reserve(hi - lo - 1);
    double max_w = kNegInf;
    for (int v = lo + 1; v <= hi - 1; ++v) {
        if (!gaps.is_boundary(v)) continue;
        const int left_gap = v - lo - 1;
        const int right_gap = hi - v - 1;
        if (left_gap <= 0 || right_gap <= 0) continue; // zero prior mass
        const double w = detail::log_marginal_between(gaps, prior, beta, lo, v) +
                         detail::log_marginal_between(gaps, prior, beta, v, hi) +
                         std::log(static_cast<double>(left_gap)) +
                         std::log(static_cast<double>(right_gap));
        values.push_back(v);
        log_w.push_back(w);
        max_w = std::max(max_w, w);
    }
    if (values.empty()) // cannot happen for states reachable by the chain
        throw std::logic_error("resample_location: current state has zero prior mass");
    double total = 0.0;
    for (double& w : log_w) {
        w = std::exp(w - max_w);
        total += w;
    }
    const double u = rng.uniform() * total;
    double acc = 0.0;
    std::size_t chosen = log_w.size() - 1;
    for (std::size_t i = 0; i < log_w.size(); ++i) {
        acc += log_w[i];
        if (u < acc) {
            chosen = i;
            break;
        }
    }
    ChangePointState next = state;
    next.s[j] = values[chosen];
    std::sort(next.s.begin(), next.s.end());
    return next;
}

// Post-hoc uncollapsing: independent conjugate Gamma draw per segment.
inline ChangePointState sample_hazards(const ChangePointState& state, const GapTimeData& gaps,
                                       const PriorConfig& prior, Rng& rng) {
    const int d = gaps.total_events;
    const double beta = effective_beta(state, prior);
    ChangePointState next = state;
    std::vector<double> hazards(state.k() + 1);
    int prev = 0;
    for (int j = 0; j <= state.k(); ++j) {
        const int bound = j == state.k() ? d : state.s[j];
        const SegmentStats seg = segment_stats(gaps, prev, bound);
        hazards[j] = rng.gamma(prior.alpha + seg.deaths, beta + seg.exposure);
        prev = bound;
    }
    next.hazards = std::move(hazards);
    return next;
}

// Gibbs update of the rate hyperparameter given uncollapsed hazards:
// beta ~ Gamma((k+1) alpha + xi_h, sum(lambda) + delta).
inline double sample_beta(const ChangePointState& state, const PriorConfig& prior, Rng& rng) {
    if (!prior.hyperprior) throw std::logic_error("sample_beta: no hyperprior configured");
    if (!state.hazards) throw std::logic_error("sample_beta: hazards must be uncollapsed first");
    double lambda_sum = 0.0;
    for (double l : *state.hazards) lambda_sum += l;
    const double shape = (state.k() + 1) * prior.alpha + prior.hyperprior->shape;
    const double rate = lambda_sum + prior.hyperprior->rate;
    return rng.gamma(shape, rate);
}

inline Trace run_chain(const GapTimeData& gaps, const PriorConfig& prior, const ChainOptions& options,
                       std::uint64_t seed) {
    prior.validate();
    if (gaps.total_events < 3)
        throw SamplerRefusal("refusing to sample: fewer than 3 events leaves no admissible change-point model");
    if (options.burn_in < 0 || options.iterations <= options.burn_in)
        throw std::invalid_argument("run_chain: need iterations > burn_in >= 0");

    const bool uncollapse = options.uncollapse || options.hyperprior;
    const MoveProbabilities moves = MoveProbabilities::standard(prior.max_changepoints, prior.birth_prob);
    Rng rng(seed);

    Trace trace;
    trace.iterations = options.iterations;
    trace.burn_in = options.burn_in;
    trace.seed = seed;
    trace.total_events = gaps.total_events;
    trace.time_of_event = gaps.time_of_event;
    trace.states.reserve(options.iterations - options.burn_in);
    trace.log_posteriors.reserve(options.iterations - options.burn_in);

    ChangePointState state;
    if (options.hyperprior)
        state.beta = rng.gamma(prior.hyperprior->shape, prior.hyperprior->rate);

    for (long iter = 0; iter < options.iterations; ++iter) {
        const int k = state.k();
        const double u = rng.uniform();
        if (u < moves.birth[k]) {
            ++trace.birth_attempts;
            MoveProposal prop = propose_birth(state, gaps, prior, moves, rng);
            if (prop.admissible && std::log(rng.uniform_pos()) < prop.log_accept) {
                state.s = std::move(prop.candidate.s);
                ++trace.birth_accepts;
            }
        } else if (u < moves.birth[k] + moves.death[k]) {
            ++trace.death_attempts;
            MoveProposal prop = propose_death(state, gaps, prior, moves, rng);
            if (prop.admissible && std::log(rng.uniform_pos()) < prop.log_accept) {
                state.s = std::move(prop.candidate.s);
                ++trace.death_accepts;
            }
        }
        if (state.k() >= 1) {
            state = resample_location(state, gaps, prior, rng);
            ++trace.relocations;
        }
        if (uncollapse) state = sample_hazards(state, gaps, prior, rng);
        if (options.hyperprior) state.beta = sample_beta(state, prior, rng);

        if (iter >= options.burn_in) {
            trace.states.push_back(state);
            trace.log_posteriors.push_back(
                log_collapsed_posterior(gaps, prior, state.s, effective_beta(state, prior)));
        }
    }
    return trace;
}

inline std::uint64_t splitmix_chain_seed(std::uint64_t seed, int chain) {
    std::uint64_t sm = seed ^ 0xA3C59AC2ULL;
    splitmix64(sm);
    sm += 0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(chain + 1);
    return splitmix64(sm);
}

// Independent chains with per-chain derived seeds; runs them concurrently.
inline std::vector<Trace> run_chains(const GapTimeData& gaps, const PriorConfig& prior,
                                     const ChainOptions& options, int n_chains, std::uint64_t seed) {
    if (n_chains < 1) throw std::invalid_argument("run_chains: need at least one chain");
    std::vector<Trace> traces(n_chains);
    std::vector<std::exception_ptr> errors(n_chains);
    const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    const int workers = static_cast<int>(std::min<unsigned>(hw, n_chains));
    std::vector<std::thread> pool;
    std::atomic<int> cursor{0};
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (;;) {
                const int c = cursor.fetch_add(1);
                if (c >= n_chains) return;
                try {
                    traces[c] = run_chain(gaps, prior, options, splitmix_chain_seed(seed, c));
                } catch (...) {
                    errors[c] = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    return traces;
}

} // namespace pwexp

#endif

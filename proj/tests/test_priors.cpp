#include <doctest.h>

#include <cmath>

#include "pwexp/priors.hpp"
#include "pwexp/rng.hpp"

#include "support/enumeration.hpp"
#include "support/quadrature.hpp"

using namespace pwexp;

TEST_CASE("log_marginal_segment closed-form values") {
    CHECK(log_marginal_segment({0, 0.0}, 1.0, 1.0) == doctest::Approx(0.0));
    CHECK(log_marginal_segment({1, 1.0}, 1.0, 1.0) == doctest::Approx(std::log(0.25)));
    CHECK(log_marginal_segment({2, 3.0}, 1.0, 1.0) == doctest::Approx(std::log(2.0 / 64.0)));
    CHECK_THROWS_AS(log_marginal_segment({1, 1.0}, 0.0, 1.0), std::domain_error);
    CHECK_THROWS_AS(log_marginal_segment({1, 1.0}, 1.0, -1.0), std::domain_error);
}

TEST_CASE("log_marginal_segment agrees with adaptive quadrature") {
    Rng rng(101);
    double worst = 0.0;
    for (int rep = 0; rep < 100; ++rep) {
        const int deaths = static_cast<int>(rng.uniform_index(6));
        const double exposure = rng.uniform() * 10.0;
        const double alpha = 0.5 + rng.uniform() * 2.5;
        const double beta = 0.5 + rng.uniform() * 2.5;
        const double closed = std::exp(log_marginal_segment({deaths, exposure}, alpha, beta));
        const double quad = oracle::marginal_by_quadrature(deaths, exposure, alpha, beta);
        worst = std::max(worst, std::abs(closed - quad) / quad);
    }
    CHECK(worst < 1e-8);
}

TEST_CASE("log_marginal_segment strictly decreases when event-free exposure is added") {
    Rng rng(55);
    for (int rep = 0; rep < 200; ++rep) {
        const int deaths = static_cast<int>(rng.uniform_index(6));
        const double exposure = rng.uniform() * 10.0;
        const double extra = 1e-6 + rng.uniform() * 5.0;
        const double alpha = 0.5 + rng.uniform() * 2.5;
        const double beta = 0.5 + rng.uniform() * 2.5;
        CHECK(log_marginal_segment({deaths, exposure + extra}, alpha, beta) <
              log_marginal_segment({deaths, exposure}, alpha, beta));
    }
}

TEST_CASE("log_segment_loglik") {
    CHECK(log_segment_loglik(1.0, {0, 2.0}) == doctest::Approx(-2.0));
    CHECK(log_segment_loglik(0.5, {3, 4.0}) == doctest::Approx(3.0 * std::log(0.5) - 2.0));
    CHECK(log_segment_loglik(2.0, {1, 0.0}) == doctest::Approx(std::log(2.0)));
    CHECK_THROWS_AS(log_segment_loglik(0.0, {1, 1.0}), std::domain_error);
}

TEST_CASE("time-scale piecewise log-likelihood") {
    const auto ds = load_dataset({{1, 1}});
    CHECK(log_piecewise_loglik_timescale(ds, {}, std::vector<double>{1.0}) == doctest::Approx(-1.0));

    // equals the gap-scale segment product (hand value from the data module test)
    const auto ds2 = load_dataset({{1, 1}, {2.5, 0}, {3, 1}});
    const std::vector<double> tau{1.0}, lambda{0.5, 0.25};
    const auto g = gap_times(ds2);
    const double gap_ll = log_segment_loglik(0.5, segment_stats(g, 0, 1)) +
                          log_segment_loglik(0.25, segment_stats(g, 1, 2));
    CHECK(log_piecewise_loglik_timescale(ds2, tau, lambda) == doctest::Approx(gap_ll).epsilon(1e-12));

    // constant hazards collapse to the exponential log-likelihood
    const std::vector<double> tau2{0.8, 2.0}, flat{0.7, 0.7, 0.7};
    const double expected = ds2.event_count() * std::log(0.7) - 0.7 * ds2.total_time();
    CHECK(log_piecewise_loglik_timescale(ds2, tau2, flat) == doctest::Approx(expected));

    CHECK_THROWS_AS(
        log_piecewise_loglik_timescale(ds2, std::vector<double>{2.0, 1.0}, std::vector<double>{1, 1, 1}),
        std::domain_error);
}

TEST_CASE("log_prior_k is the Poisson log-pmf") {
    CHECK(log_prior_k(0, 1.0) == doctest::Approx(-1.0));
    CHECK(log_prior_k(2, 1.0) == doctest::Approx(-1.0 - std::log(2.0)));
    CHECK(log_prior_k(1, 2.0) == doctest::Approx(std::log(2.0) - 2.0));
    CHECK_THROWS_AS(log_prior_k(-1, 1.0), std::domain_error);
}

TEST_CASE("log_prior_locations values and zero-mass boundaries") {
    const std::vector<int> mid{5};
    CHECK(log_prior_locations(mid, 10) == doctest::Approx(std::log(16.0 / 84.0)));
    const std::vector<int> edge{1};
    CHECK(log_prior_locations(edge, 10) == kNegInf);
    const std::vector<int> none{};
    CHECK(log_prior_locations(none, 10) == doctest::Approx(0.0));
    const std::vector<int> bad{4, 2};
    CHECK_THROWS_AS(log_prior_locations(bad, 10), std::domain_error);
    const std::vector<int> out_of_range{10};
    CHECK_THROWS_AS(log_prior_locations(out_of_range, 10), std::domain_error);
}

TEST_CASE("location prior normalises exactly by enumeration") {
    for (int d = 2; d <= 12; ++d) {
        for (int k = 0; k <= 3; ++k) {
            if (d < 2 * k + 2) continue; // no admissible configuration
            double total = 0.0;
            oracle::State prefix;
            std::vector<oracle::State> states;
            oracle::enumerate_subsets(d, k, prefix, 1, states);
            for (const auto& s : states) {
                if (static_cast<int>(s.size()) != k) continue;
                const double lp = log_prior_locations(s, d);
                if (lp != kNegInf) total += std::exp(lp);
            }
            CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
        }
    }
}

TEST_CASE("segment_stats slices exposures and merges the trailing tail") {
    const auto g = gap_times(load_dataset({{1, 1}, {2, 1}, {3, 1}, {4, 0}}));
    // y = (4, 3, 2), trailing = 1
    const auto first = segment_stats(g, 0, 1);
    CHECK(first.deaths == 1);
    CHECK(first.exposure == doctest::Approx(4.0));
    const auto last = segment_stats(g, 2, 3);
    CHECK(last.deaths == 1);
    CHECK(last.exposure == doctest::Approx(3.0)); // 2 + trailing 1
    const auto all = segment_stats(g, 0, 3);
    CHECK(all.exposure == doctest::Approx(10.0));
    CHECK_THROWS_AS(segment_stats(g, 0, 5), std::invalid_argument);
}

TEST_CASE("prior config defaults and validation") {
    CHECK(PriorConfig::default_beta(Timescale::years) == 1.0);
    CHECK(PriorConfig::default_beta(Timescale::months) == 12.0);
    CHECK(PriorConfig::default_beta(Timescale::days) == 365.0);
    const auto hp = PriorConfig::default_hyperprior(Timescale::days);
    CHECK(hp.shape / hp.rate == doctest::Approx(365.0)); // prior mean of beta
    PriorConfig bad;
    bad.alpha = 0.0;
    CHECK_THROWS_AS(bad.validate(), std::domain_error);
    PriorConfig ok = PriorConfig::defaults_for(Timescale::years);
    CHECK_NOTHROW(ok.validate());
}

#ifndef PWEXP_PWEXP_HPP
#define PWEXP_PWEXP_HPP

// Bayesian piecewise exponential survival modelling with an unknown number
// of hazard change-points, fitted by a collapsed trans-dimensional sampler.

#include "pwexp/posterior.hpp"
#include "pwexp/priors.hpp"
#include "pwexp/rng.hpp"
#include "pwexp/sampler.hpp"
#include "pwexp/simulation.hpp"
#include "pwexp/survival_data.hpp"

namespace pwexp {
inline constexpr const char* kVersion = "0.1.0";
}

#endif

#pragma once

#include <cstdint>
#include <functional>

#include "curesimex/rng.hpp"
#include "curesimex/types.hpp"

namespace curesimex {

// estimator under the bootstrap: returns the parameter vector of interest;
// the seed feeds any internal randomness (a SIMEX pipeline reruns in full on
// a fresh substream for every resample)
using ParamFitter =
    std::function<VectorXd(const Dataset&, const ModelLayout&, std::uint64_t seed)>;

struct BootstrapReport {
    VectorXd estimates;  // point fit on the original data
    VectorXd sd;         // per-parameter bootstrap standard deviation
    VectorXd p_values;   // two-sided Wald
    int n_boot = 0;
    int n_failed = 0;
};

// case resampling with replacement; per-resample refits on split substreams;
// sd uses denominator (successes - 1); more than 20% failed refits aborts
BootstrapReport bootstrap_sd(const Dataset& data, const ModelLayout& layout,
                             const ParamFitter& fitter, int n_boot, std::uint64_t seed,
                             int jobs = 1);

// two-sided normal Wald p-values, p = 2 (1 - Phi(|est|/sd)); a zero sd maps
// to p = 0 for a nonzero estimate and p = 1 otherwise
VectorXd wald_pvalues(const VectorXd& estimates, const VectorXd& sd);

}  // namespace curesimex

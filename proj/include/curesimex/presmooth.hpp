#pragma once

#include "curesimex/em.hpp"

namespace curesimex {

enum class Kernel { epanechnikov, uniform_box };

struct PresmoothOptions {
    std::optional<double> bandwidth;     // fixed value; unset = cross-validate
    std::vector<double> bandwidth_grid;  // defaults to 0.1..2.0 step 0.1
    Kernel kernel = Kernel::epanechnikov;
    EmOptions em;
    // testing hook: skip the Beran stage and fit the incidence directly to
    // these per-record uncure probabilities
    std::optional<VectorXd> pi_override;
};

std::vector<double> default_bandwidth_grid();

// kernel-weighted product-limit survival estimator at time t given covariate
// value x0; weights K((w_i0 - x0)/h) on the first covariate column, on the
// scale stored in the dataset (callers standardize beforehand if desired)
double beran_survival(const Dataset& data, double x0, double t, double h,
                      Kernel kernel = Kernel::epanechnikov);

// leave-one-out cross-validation bandwidth for the conditional distribution
// of the follow-up time given the first covariate column (standardized
// internally); scored at the observed times up to the largest uncensored
// observation; result capped at 2. Selection always runs on a Gaussian
// reference kernel and the chosen value is applied with the smoothing
// kernel, so the kernel argument does not affect the choice.
double cv_bandwidth(const Dataset& data, const std::vector<double>& grid,
                    Kernel kernel = Kernel::epanechnikov);

// bandwidth fit_presmooth would use: the fixed value when set, otherwise
// leave-one-out cross-validation on the continuous incidence covariate;
// exposed so a SIMEX driver can compute it once on the original data and
// pin it across contamination levels
double presmooth_bandwidth(const Dataset& data, const ModelLayout& layout,
                           const PresmoothOptions& opts = {});

// presmoothing fit: Beran-based uncure probabilities at tau0, incidence by
// Bernoulli quasi-likelihood on them, latency by EM with the incidence fixed
CureFit fit_presmooth(const Dataset& data, const ModelLayout& layout,
                      const PresmoothOptions& opts = {});

}  // namespace curesimex

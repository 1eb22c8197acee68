#pragma once

#include "curesimex/model.hpp"
#include "curesimex/types.hpp"

namespace curesimex {

// posterior expectation of the uncure indicator, one entry per record
struct UncureWeights {
    VectorXd w;
};

struct IncidenceStep {
    VectorXd gamma;
    bool diverged = false;
};

struct LatencyStep {
    VectorXd beta;
    StepFunction baseline;
    bool diverged = false;
};

// E-step: w_i = 1 for events; g(y_i) for censored records up to tau0;
// 0 for censored records strictly beyond tau0 (zero-tail).
UncureWeights e_step(const Dataset& data, const ModelLayout& layout, const CureFit& current);

// weighted Bernoulli log-likelihood maximizer (Newton with step-halving,
// covariates standardized internally)
IncidenceStep m_step_incidence(const Dataset& data, const ModelLayout& layout,
                               const UncureWeights& w, const VectorXd& init,
                               const EmOptions& opts = {});

// weighted Cox partial likelihood (Breslow ties) plus weighted Breslow
// baseline; events carry weight 1, censored records weight w_i
LatencyStep m_step_latency(const Dataset& data, const ModelLayout& layout,
                           const UncureWeights& w, const VectorXd& init_beta,
                           const EmOptions& opts = {});

// EM fit of the full logistic/Cox mixture cure model.  loglik_trace, when
// given, records the observed log-likelihood after every EM iteration.
CureFit fit_mle(const Dataset& data, const ModelLayout& layout, const EmOptions& opts = {},
                std::vector<double>* loglik_trace = nullptr);

// EM over the latency only, with the incidence coefficients held fixed
CureFit fit_latency_with_fixed_incidence(const Dataset& data, const ModelLayout& layout,
                                         const VectorXd& gamma, const EmOptions& opts = {},
                                         std::vector<double>* loglik_trace = nullptr);

// observed-data log-likelihood; censored records beyond fit.tau0 contribute
// log(1 - phi) (the latency survival is 0 past tau0 for the fitted model)
double observed_loglik(const Dataset& data, const ModelLayout& layout, const CureFit& fit);

// shared Newton core, also used for the presmoothed incidence fit: maximizes
// sum_i [w_i log phi(g,x_i) + (1-w_i) log(1-phi(g,x_i))] over g
IncidenceStep weighted_logistic_newton(const MatrixXd& X, const VectorXd& w,
                                       const VectorXd& init, const EmOptions& opts = {});

}  // namespace curesimex

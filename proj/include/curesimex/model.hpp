#pragma once

#include "curesimex/types.hpp"

namespace curesimex {

// logistic incidence phi = e^{gamma'x}/(1+e^{gamma'x}); x carries a leading 1
double phi_logistic(const VectorXd& gamma, const VectorXd& x);

// latency survival exp(-Lambda(t) e^{beta'z})
double cox_survival(const VectorXd& beta, const StepFunction& baseline, double t,
                    const VectorXd& z);

// mixture survival 1 - phi + phi * S_u(t|z)
double population_survival(const CureFit& fit, double t, const VectorXd& x,
                           const VectorXd& z);

double cure_probability(const VectorXd& gamma, const VectorXd& x);
double cure_probability(const CureFit& fit, const VectorXd& x);

// product-limit survival estimator; ties put events before censorings
StepFunction kaplan_meier(const Dataset& data);

// design-row helpers: incidence rows get the leading 1, latency rows do not
VectorXd incidence_row(const SurvivalRecord& r, const ModelLayout& layout);
VectorXd latency_row(const SurvivalRecord& r, const ModelLayout& layout);
MatrixXd incidence_design(const Dataset& data, const ModelLayout& layout);
MatrixXd latency_design(const Dataset& data, const ModelLayout& layout);

inline double clamp_prob(double p) {
    return std::min(1.0 - 1e-12, std::max(1e-12, p));
}

}  // namespace curesimex

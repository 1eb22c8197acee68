#include "curesimex/model.hpp"

#include <cmath>

namespace curesimex {

double phi_logistic(const VectorXd& gamma, const VectorXd& x) {
    if (gamma.size() != x.size()) throw std::invalid_argument("phi_logistic: dimension mismatch");
    double eta = gamma.dot(x);
    // sign-split form keeps exp() argument nonpositive
    if (eta >= 0.0) return 1.0 / (1.0 + std::exp(-eta));
    double e = std::exp(eta);
    return e / (1.0 + e);
}

double cox_survival(const VectorXd& beta, const StepFunction& baseline, double t,
                    const VectorXd& z) {
    if (beta.size() != z.size()) throw std::invalid_argument("cox_survival: dimension mismatch");
    return std::exp(-baseline(t) * std::exp(beta.dot(z)));
}

double population_survival(const CureFit& fit, double t, const VectorXd& x,
                           const VectorXd& z) {
    double phi = phi_logistic(fit.gamma, x);
    return 1.0 - phi + phi * cox_survival(fit.beta, fit.baseline, t, z);
}

double cure_probability(const VectorXd& gamma, const VectorXd& x) {
    return 1.0 - phi_logistic(gamma, x);
}

double cure_probability(const CureFit& fit, const VectorXd& x) {
    return cure_probability(fit.gamma, x);
}

StepFunction kaplan_meier(const Dataset& data) {
    if (data.records.empty()) throw std::invalid_argument("kaplan_meier: empty dataset");
    std::size_t n = data.size();
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const auto& ra = data.records[a];
        const auto& rb = data.records[b];
        if (ra.y != rb.y) return ra.y < rb.y;
        return ra.delta > rb.delta;  // events first at tied times
    });

    StepFunction s;
    s.value_before_first = 1.0;
    double surv = 1.0;
    std::size_t i = 0;
    while (i < n) {
        double t = data.records[order[i]].y;
        std::size_t at_risk = n - i;
        std::size_t d = 0;
        std::size_t j = i;
        while (j < n && data.records[order[j]].y == t) {
            if (data.records[order[j]].delta == 1) ++d;
            ++j;
        }
        if (d > 0) {
            surv *= 1.0 - static_cast<double>(d) / static_cast<double>(at_risk);
            s.times.push_back(t);
            s.values.push_back(surv);
        }
        i = j;
    }
    return s;
}

VectorXd incidence_row(const SurvivalRecord& r, const ModelLayout& layout) {
    VectorXd x(layout.incidence_idx.size() + 1);
    x(0) = 1.0;
    for (std::size_t j = 0; j < layout.incidence_idx.size(); ++j)
        x(static_cast<Eigen::Index>(j) + 1) = r.w[static_cast<std::size_t>(layout.incidence_idx[j])];
    return x;
}

VectorXd latency_row(const SurvivalRecord& r, const ModelLayout& layout) {
    VectorXd z(layout.latency_idx.size());
    for (std::size_t j = 0; j < layout.latency_idx.size(); ++j)
        z(static_cast<Eigen::Index>(j)) = r.w[static_cast<std::size_t>(layout.latency_idx[j])];
    return z;
}

MatrixXd incidence_design(const Dataset& data, const ModelLayout& layout) {
    MatrixXd X(data.size(), layout.incidence_idx.size() + 1);
    for (std::size_t i = 0; i < data.size(); ++i)
        X.row(static_cast<Eigen::Index>(i)) = incidence_row(data.records[i], layout).transpose();
    return X;
}

MatrixXd latency_design(const Dataset& data, const ModelLayout& layout) {
    MatrixXd Z(data.size(), layout.latency_idx.size());
    for (std::size_t i = 0; i < data.size(); ++i)
        Z.row(static_cast<Eigen::Index>(i)) = latency_row(data.records[i], layout).transpose();
    return Z;
}

}  // namespace curesimex

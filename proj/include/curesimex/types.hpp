#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace curesimex {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// One subject: follow-up time, event indicator (1 = event, 0 = censored),
// observed covariate vector.
struct SurvivalRecord {
    double y = 0.0;
    int delta = 0;
    std::vector<double> w;
};

struct Dataset {
    std::vector<SurvivalRecord> records;
    std::vector<std::string> column_names;

    std::size_t size() const { return records.size(); }
    std::size_t dim() const { return records.empty() ? column_names.size() : records.front().w.size(); }

    void validate() const {
        std::size_t d = dim();
        for (const auto& r : records) {
            if (r.w.size() != d) throw std::invalid_argument("records have mixed covariate dimensions");
            if (!(r.y >= 0.0)) throw std::invalid_argument("follow-up times must be nonnegative");
            if (r.delta != 0 && r.delta != 1) throw std::invalid_argument("status must be 0 or 1");
            for (double v : r.w)
                if (!std::isfinite(v)) throw std::invalid_argument("covariates must be finite");
        }
    }
};

// Which covariate columns feed the incidence (intercept prepended implicitly)
// and the latency (no intercept), plus the measurement-error covariance over
// all D observed covariates (zero rows/columns mark error-free ones).
struct ModelLayout {
    std::vector<int> incidence_idx;
    std::vector<int> latency_idx;
    MatrixXd error_cov;  // D x D, symmetric PSD; may be 0x0 when unused
};

// Right-continuous step function: value at t is the value attached to the
// largest jump time <= t, else value_before_first.
struct StepFunction {
    std::vector<double> times;   // strictly increasing
    std::vector<double> values;
    double value_before_first = 0.0;

    double operator()(double t) const {
        auto it = std::upper_bound(times.begin(), times.end(), t);
        if (it == times.begin()) return value_before_first;
        return values[static_cast<std::size_t>(it - times.begin()) - 1];
    }

    // size of the jump exactly at t (0 if t is not a jump time)
    double jump_at(double t) const {
        auto it = std::lower_bound(times.begin(), times.end(), t);
        if (it == times.end() || *it != t) return 0.0;
        std::size_t i = static_cast<std::size_t>(it - times.begin());
        return values[i] - (i == 0 ? value_before_first : values[i - 1]);
    }

    bool non_decreasing() const {
        double prev = value_before_first;
        for (double v : values) {
            if (v < prev) return false;
            prev = v;
        }
        return true;
    }
};

struct CureFit {
    VectorXd gamma;        // incidence, [intercept, slopes...]
    VectorXd beta;         // latency, no intercept
    StepFunction baseline; // cumulative hazard, jumps at event times <= tau0
    double tau0 = 0.0;
    double loglik = 0.0;
    bool converged = false;
    int iterations = 0;
    bool incidence_diverged = false;
    bool latency_diverged = false;
};

struct EmOptions {
    int max_iter = 500;
    double tol = 1e-7;
    int inner_newton_iter = 25;
    double inner_tol = 1e-10;
    std::optional<double> tau0_override;
};

}  // namespace curesimex

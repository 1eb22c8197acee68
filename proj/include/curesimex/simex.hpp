#pragma once

#include <cstdint>
#include <functional>

#include "curesimex/em.hpp"
#include "curesimex/rng.hpp"

namespace curesimex {

enum class Extrapolant { linear, quadratic, cubic };

inline int extrapolant_degree(Extrapolant e) {
    switch (e) {
        case Extrapolant::linear: return 1;
        case Extrapolant::quadratic: return 2;
        case Extrapolant::cubic: return 3;
    }
    return 2;
}

struct SimexOptions {
    std::vector<double> lambdas = {0.0, 0.5, 1.0, 1.5, 2.0};
    int B = 50;
    Extrapolant extrapolant = Extrapolant::quadratic;
    bool isotonize = true;
    std::uint64_t seed = 0;
    int jobs = 1;  // worker threads over the (lambda, b) grid; 0 = all cores
};

// per-level average of the B refits; the baseline average lives on the
// original data's event-time grid
struct AveragedFit {
    double lambda = 0.0;
    VectorXd gamma_bar, beta_bar;
    StepFunction lambda_bar;
};

struct SimexResult {
    std::vector<AveragedFit> per_lambda;
    // least-squares coefficients, one vector per scalar parameter in the
    // order gamma coordinates then beta coordinates
    std::vector<VectorXd> extrap_coeffs;
    VectorXd gamma_simex, beta_simex;
    StepFunction baseline_simex;
    bool baseline_was_monotone = true;
    int n_failed = 0;   // dropped (lambda, b) cells across all levels
    CureFit naive_fit;  // the uncontaminated fit the pipeline started from
};

using Fitter = std::function<CureFit(const Dataset&, const ModelLayout&)>;

// symmetric PSD square root; eigenvalues below -1e-10 are rejected, small
// negatives clipped to 0; rows/columns that are exactly zero in the input
// stay exactly zero
MatrixXd matrix_sqrt_psd(const MatrixXd& M);

// adds (lambda V)^{1/2} times a standard normal vector to every covariate
// row; coordinates with zero rows of V are left untouched, and lambda = 0
// returns the input unchanged without consuming any draws
Dataset contaminate(const Dataset& data, const MatrixXd& V, double lambda, RngStream& rng);

AveragedFit average_fits(const std::vector<CureFit>& fits);

// ordinary least-squares polynomial fit of values over lambdas; constant
// inputs short-circuit to (c, 0, ..., 0) exactly
VectorXd fit_extrapolant(const std::vector<double>& lambdas, const std::vector<double>& values,
                         Extrapolant kind);

// polynomial evaluated at lambda = -1 (terms as present)
double extrapolate_minus1(const VectorXd& coeffs, Extrapolant kind);

// pool-adjacent-violators: closest non-decreasing sequence in least squares
std::vector<double> pava(const std::vector<double>& values);

// full pipeline: contaminate/refit B times per level on per-cell substreams,
// average, extrapolate each parameter and each baseline value to lambda = -1
SimexResult run_simex(const Dataset& data, const ModelLayout& layout, const Fitter& fitter,
                      const SimexOptions& opts);

}  // namespace curesimex

#include "curesimex/simex.hpp"

#include <cmath>
#include <sstream>

#include "curesimex/parallel.hpp"

namespace curesimex {

namespace {

bool fit_is_usable(const CureFit& f) {
    if (f.incidence_diverged || f.latency_diverged) return false;
    for (Eigen::Index j = 0; j < f.gamma.size(); ++j)
        if (!std::isfinite(f.gamma(j))) return false;
    for (Eigen::Index j = 0; j < f.beta.size(); ++j)
        if (!std::isfinite(f.beta(j))) return false;
    for (double v : f.baseline.values)
        if (!std::isfinite(v)) return false;
    return true;
}

}  // namespace

MatrixXd matrix_sqrt_psd(const MatrixXd& M) {
    if (M.rows() != M.cols()) throw std::invalid_argument("covariance must be square");
    double scale = std::max(1.0, M.lpNorm<Eigen::Infinity>());
    if ((M - M.transpose()).lpNorm<Eigen::Infinity>() > 1e-12 * scale)
        throw std::invalid_argument("covariance must be symmetric");
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(M);
    if (es.info() != Eigen::Success) throw std::invalid_argument("covariance eigendecomposition failed");
    VectorXd ev = es.eigenvalues();
    for (Eigen::Index i = 0; i < ev.size(); ++i) {
        if (ev(i) < -1e-10) throw std::invalid_argument("covariance is not positive semidefinite");
        ev(i) = std::sqrt(std::max(ev(i), 0.0));
    }
    MatrixXd S = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
    for (Eigen::Index d = 0; d < M.rows(); ++d) {
        if (M.row(d).isZero(0.0) && M.col(d).isZero(0.0)) {
            S.row(d).setZero();
            S.col(d).setZero();
        }
    }
    return S;
}

Dataset contaminate(const Dataset& data, const MatrixXd& V, double lambda, RngStream& rng) {
    data.validate();
    if (!(lambda >= 0.0)) throw std::invalid_argument("lambda must be nonnegative");
    Eigen::Index D = static_cast<Eigen::Index>(data.dim());
    if (V.rows() != D || V.cols() != D)
        throw std::invalid_argument("covariance dimension does not match the dataset");
    if (lambda == 0.0) return data;
    MatrixXd S = matrix_sqrt_psd(lambda * V);

    std::vector<Eigen::Index> noisy;
    for (Eigen::Index d = 0; d < D; ++d)
        if (!(V.row(d).isZero(0.0) && V.col(d).isZero(0.0))) noisy.push_back(d);

    Dataset out = data;
    if (noisy.empty()) return out;
    VectorXd u(D);
    for (auto& r : out.records) {
        for (Eigen::Index d = 0; d < D; ++d) u(d) = rng.normal();
        for (Eigen::Index d : noisy)
            r.w[static_cast<std::size_t>(d)] += S.row(d).dot(u);
    }
    return out;
}

AveragedFit average_fits(const std::vector<CureFit>& fits) {
    if (fits.empty()) throw std::invalid_argument("average_fits: no fits");
    const CureFit& first = fits.front();
    for (const auto& f : fits) {
        if (f.gamma.size() != first.gamma.size() || f.beta.size() != first.beta.size())
            throw std::invalid_argument("average_fits: mismatched parameter dimensions");
        if (f.baseline.times != first.baseline.times)
            throw std::invalid_argument("average_fits: mismatched event-time grids");
    }
    AveragedFit out;
    double inv = 1.0 / static_cast<double>(fits.size());
    out.gamma_bar = VectorXd::Zero(first.gamma.size());
    out.beta_bar = VectorXd::Zero(first.beta.size());
    out.lambda_bar.times = first.baseline.times;
    out.lambda_bar.value_before_first = 0.0;
    out.lambda_bar.values.assign(first.baseline.values.size(), 0.0);
    for (const auto& f : fits) {
        out.gamma_bar += f.gamma;
        out.beta_bar += f.beta;
        for (std::size_t m = 0; m < f.baseline.values.size(); ++m)
            out.lambda_bar.values[m] += f.baseline.values[m];
    }
    out.gamma_bar *= inv;
    out.beta_bar *= inv;
    for (double& v : out.lambda_bar.values) v *= inv;
    return out;
}

VectorXd fit_extrapolant(const std::vector<double>& lambdas, const std::vector<double>& values,
                         Extrapolant kind) {
    int degree = extrapolant_degree(kind);
    std::size_t n = lambdas.size();
    if (values.size() != n) throw std::invalid_argument("fit_extrapolant: length mismatch");
    if (n < static_cast<std::size_t>(degree + 1))
        throw std::invalid_argument("fit_extrapolant: need at least degree + 1 levels");
    {
        std::vector<double> s = lambdas;
        std::sort(s.begin(), s.end());
        if (std::adjacent_find(s.begin(), s.end()) != s.end())
            throw std::invalid_argument("fit_extrapolant: duplicate lambda levels");
    }
    VectorXd coeffs = VectorXd::Zero(degree + 1);
    bool constant = true;
    for (double v : values)
        if (v != values.front()) {
            constant = false;
            break;
        }
    if (constant) {
        coeffs(0) = values.front();
        return coeffs;
    }
    MatrixXd A(static_cast<Eigen::Index>(n), degree + 1);
    VectorXd y(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
        double p = 1.0;
        for (int j = 0; j <= degree; ++j) {
            A(static_cast<Eigen::Index>(i), j) = p;
            p *= lambdas[i];
        }
        y(static_cast<Eigen::Index>(i)) = values[i];
    }
    coeffs = A.colPivHouseholderQr().solve(y);
    return coeffs;
}

double extrapolate_minus1(const VectorXd& coeffs, Extrapolant kind) {
    if (coeffs.size() < 1) throw std::invalid_argument("extrapolate_minus1: empty coefficients");
    if (coeffs.size() > extrapolant_degree(kind) + 1)
        throw std::invalid_argument("extrapolate_minus1: more coefficients than the extrapolant has terms");
    double out = 0.0;
    double sign = 1.0;
    for (Eigen::Index k = 0; k < coeffs.size(); ++k) {
        if (!std::isfinite(coeffs(k)))
            throw std::invalid_argument("extrapolate_minus1: coefficients must be finite");
        out += sign * coeffs(k);
        sign = -sign;
    }
    return out;
}

std::vector<double> pava(const std::vector<double>& values) {
    std::vector<double> level, weight;
    level.reserve(values.size());
    weight.reserve(values.size());
    for (double v : values) {
        level.push_back(v);
        weight.push_back(1.0);
        while (level.size() >= 2 && level[level.size() - 2] > level.back()) {
            double w = weight[weight.size() - 2] + weight.back();
            double m = (level[level.size() - 2] * weight[weight.size() - 2] +
                        level.back() * weight.back()) /
                       w;
            level.pop_back();
            weight.pop_back();
            level.back() = m;
            weight.back() = w;
        }
    }
    std::vector<double> out;
    out.reserve(values.size());
    for (std::size_t b = 0; b < level.size(); ++b)
        for (int k = 0; k < static_cast<int>(weight[b]); ++k) out.push_back(level[b]);
    return out;
}

SimexResult run_simex(const Dataset& data, const ModelLayout& layout, const Fitter& fitter,
                      const SimexOptions& opts) {
    data.validate();
    if (opts.lambdas.empty()) throw std::invalid_argument("simex: lambda levels must be nonempty");
    for (std::size_t k = 0; k < opts.lambdas.size(); ++k) {
        if (!(opts.lambdas[k] >= 0.0))
            throw std::invalid_argument("simex: lambda levels must be nonnegative");
        if (k > 0 && !(opts.lambdas[k] > opts.lambdas[k - 1]))
            throw std::invalid_argument("simex: lambda levels must be increasing");
    }
    if (opts.B < 1) throw std::invalid_argument("simex: B must be at least 1");
    int degree = extrapolant_degree(opts.extrapolant);
    if (opts.lambdas.size() < static_cast<std::size_t>(degree + 1))
        throw std::invalid_argument("simex: need at least degree + 1 lambda levels");

    Eigen::Index D = static_cast<Eigen::Index>(data.dim());
    MatrixXd V = layout.error_cov.size() == 0 ? MatrixXd::Zero(D, D) : layout.error_cov;
    if (V.rows() != D || V.cols() != D)
        throw std::invalid_argument("simex: error covariance dimension mismatch");
    bool zero_V = V.isZero(0.0);

    CureFit fit0 = fitter(data, layout);
    if (!fit_is_usable(fit0)) throw std::runtime_error("simex: the uncontaminated fit failed");

    int K = static_cast<int>(opts.lambdas.size());
    SimexResult res;
    res.naive_fit = fit0;
    res.per_lambda.resize(static_cast<std::size_t>(K));

    // levels that actually need contamination; lambda = 0 (or an all-zero V)
    // reuses the uncontaminated fit directly, keeping the exact-equality
    // guarantee (averaging B identical copies could perturb the last bit)
    struct Cell {
        int k, b;
    };
    std::vector<Cell> cells;
    std::vector<int> active(static_cast<std::size_t>(K), 0);
    for (int k = 0; k < K; ++k) {
        if (opts.lambdas[static_cast<std::size_t>(k)] == 0.0 || zero_V) {
            AveragedFit af;
            af.lambda = opts.lambdas[static_cast<std::size_t>(k)];
            af.gamma_bar = fit0.gamma;
            af.beta_bar = fit0.beta;
            af.lambda_bar = fit0.baseline;
            af.lambda_bar.value_before_first = 0.0;
            res.per_lambda[static_cast<std::size_t>(k)] = af;
        } else {
            active[static_cast<std::size_t>(k)] = 1;
            for (int b = 0; b < opts.B; ++b) cells.push_back({k, b});
        }
    }

    std::vector<CureFit> cell_fit(cells.size());
    std::vector<char> cell_ok(cells.size(), 0);
    parallel_for(static_cast<int>(cells.size()), opts.jobs, [&](int c) {
        const Cell& cell = cells[static_cast<std::size_t>(c)];
        RngStream rng = substream(opts.seed, static_cast<std::uint64_t>(cell.k),
                                  static_cast<std::uint64_t>(cell.b));
        try {
            Dataset noisy = contaminate(data, V, opts.lambdas[static_cast<std::size_t>(cell.k)], rng);
            CureFit f = fitter(noisy, layout);
            if (fit_is_usable(f)) {
                cell_fit[static_cast<std::size_t>(c)] = std::move(f);
                cell_ok[static_cast<std::size_t>(c)] = 1;
            }
        } catch (const std::exception&) {
            // dropped below; per-level abort threshold applies
        }
    });

    std::size_t ci = 0;
    for (int k = 0; k < K; ++k) {
        if (!active[static_cast<std::size_t>(k)]) continue;
        std::vector<CureFit> good;
        good.reserve(static_cast<std::size_t>(opts.B));
        int failed = 0;
        for (int b = 0; b < opts.B; ++b, ++ci) {
            if (cell_ok[ci])
                good.push_back(std::move(cell_fit[ci]));
            else
                ++failed;
        }
        res.n_failed += failed;
        if (failed > 0.2 * opts.B) {
            std::ostringstream msg;
            msg << "simex: " << failed << " of " << opts.B << " fits failed at lambda="
                << opts.lambdas[static_cast<std::size_t>(k)];
            throw std::runtime_error(msg.str());
        }
        AveragedFit af = average_fits(good);
        af.lambda = opts.lambdas[static_cast<std::size_t>(k)];
        res.per_lambda[static_cast<std::size_t>(k)] = std::move(af);
    }

    Eigen::Index p = fit0.gamma.size();
    Eigen::Index q = fit0.beta.size();
    res.gamma_simex.resize(p);
    res.beta_simex.resize(q);
    std::vector<double> vals(static_cast<std::size_t>(K));
    for (Eigen::Index j = 0; j < p; ++j) {
        for (int k = 0; k < K; ++k)
            vals[static_cast<std::size_t>(k)] = res.per_lambda[static_cast<std::size_t>(k)].gamma_bar(j);
        VectorXd c = fit_extrapolant(opts.lambdas, vals, opts.extrapolant);
        res.gamma_simex(j) = extrapolate_minus1(c, opts.extrapolant);
        res.extrap_coeffs.push_back(std::move(c));
    }
    for (Eigen::Index j = 0; j < q; ++j) {
        for (int k = 0; k < K; ++k)
            vals[static_cast<std::size_t>(k)] = res.per_lambda[static_cast<std::size_t>(k)].beta_bar(j);
        VectorXd c = fit_extrapolant(opts.lambdas, vals, opts.extrapolant);
        res.beta_simex(j) = extrapolate_minus1(c, opts.extrapolant);
        res.extrap_coeffs.push_back(std::move(c));
    }

    res.baseline_simex.times = fit0.baseline.times;
    res.baseline_simex.value_before_first = 0.0;
    res.baseline_simex.values.resize(fit0.baseline.values.size());
    for (std::size_t m = 0; m < fit0.baseline.values.size(); ++m) {
        for (int k = 0; k < K; ++k)
            vals[static_cast<std::size_t>(k)] =
                res.per_lambda[static_cast<std::size_t>(k)].lambda_bar.values[m];
        VectorXd c = fit_extrapolant(opts.lambdas, vals, opts.extrapolant);
        res.baseline_simex.values[m] = extrapolate_minus1(c, opts.extrapolant);
    }
    res.baseline_was_monotone = res.baseline_simex.non_decreasing();
    if (!res.baseline_was_monotone && opts.isotonize)
        res.baseline_simex.values = pava(res.baseline_simex.values);
    return res;
}

}  // namespace curesimex

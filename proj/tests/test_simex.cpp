#include <doctest.h>

#include <cmath>
#include <map>
#include <stdexcept>
#include <vector>

#include "curesimex/mclab.hpp"
#include "curesimex/rng.hpp"
#include "curesimex/simex.hpp"

using namespace curesimex;

namespace {

VectorXd vec(std::initializer_list<double> v) {
    VectorXd out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v) out(i++) = x;
    return out;
}

ModelLayout single_column_layout() {
    ModelLayout layout;
    layout.incidence_idx = {0};
    layout.latency_idx = {0};
    return layout;
}

CureFit toy_fit(double g, double b, std::vector<double> baseline_values) {
    CureFit f;
    f.gamma = vec({g});
    f.beta = vec({b});
    f.baseline.times = {1.0, 2.0};
    f.baseline.values = std::move(baseline_values);
    f.converged = true;
    f.tau0 = 2.0;
    return f;
}

}  // namespace

TEST_SUITE("simex") {

TEST_CASE("psd square root") {
    MatrixXd M(2, 2);
    M << 0.49, 0.1, 0.1, 0.25;
    MatrixXd S = matrix_sqrt_psd(M);
    CHECK(((S * S) - M).lpNorm<Eigen::Infinity>() < 1e-12);

    MatrixXd Z = MatrixXd::Zero(2, 2);
    Z(0, 0) = 1.0;
    MatrixXd SZ = matrix_sqrt_psd(Z);
    CHECK(SZ(0, 0) == 1.0);
    CHECK(SZ(0, 1) == 0.0);
    CHECK(SZ(1, 0) == 0.0);
    CHECK(SZ(1, 1) == 0.0);

    MatrixXd bad(2, 2);
    bad << 1.0, 2.0, 2.0, 1.0;
    CHECK_THROWS_AS((void)matrix_sqrt_psd(bad), std::invalid_argument);
}

TEST_CASE("contamination basics") {
    Dataset d;
    d.records.push_back({1.0, 1, {0.3, -0.7}});
    d.records.push_back({2.0, 0, {1.1, 0.4}});
    d.column_names = {"a", "b"};

    MatrixXd V(2, 2);
    V << 0.49, 0.0, 0.0, 0.0;

    SUBCASE("lambda zero is the identity") {
        RngStream rng(1);
        Dataset out = contaminate(d, V, 0.0, rng);
        for (std::size_t i = 0; i < d.records.size(); ++i) {
            CHECK(out.records[i].y == d.records[i].y);
            CHECK(out.records[i].delta == d.records[i].delta);
            CHECK(out.records[i].w[0] == d.records[i].w[0]);
            CHECK(out.records[i].w[1] == d.records[i].w[1]);
        }
    }
    SUBCASE("zero covariance rows stay untouched") {
        RngStream rng(2);
        Dataset out = contaminate(d, V, 1.0, rng);
        CHECK(out.records[0].w[0] != d.records[0].w[0]);
        CHECK(out.records[0].w[1] == d.records[0].w[1]);
        CHECK(out.records[1].w[1] == d.records[1].w[1]);
    }
    SUBCASE("negative lambda is rejected") {
        RngStream rng(3);
        CHECK_THROWS_AS((void)contaminate(d, V, -0.5, rng), std::invalid_argument);
    }
    SUBCASE("non-psd covariance is rejected") {
        MatrixXd bad(2, 2);
        bad << 1.0, 2.0, 2.0, 1.0;
        RngStream rng(4);
        CHECK_THROWS_AS((void)contaminate(d, bad, 1.0, rng), std::invalid_argument);
    }
}

TEST_CASE("added noise has covariance lambda V") {
    const int n = 100000;
    Dataset d;
    d.records.reserve(n);
    RngStream gen(5);
    for (int i = 0; i < n; ++i) d.records.push_back({1.0, 1, {gen.normal(), gen.normal()}});
    d.column_names = {"a", "b"};

    MatrixXd V(2, 2);
    V << 0.49, 0.1, 0.1, 0.25;
    const double lambda = 1.5;
    RngStream rng(6);
    Dataset out = contaminate(d, V, lambda, rng);

    double s00 = 0, s01 = 0, s11 = 0, m0 = 0, m1 = 0;
    for (int i = 0; i < n; ++i) {
        double d0 = out.records[static_cast<std::size_t>(i)].w[0] -
                    d.records[static_cast<std::size_t>(i)].w[0];
        double d1 = out.records[static_cast<std::size_t>(i)].w[1] -
                    d.records[static_cast<std::size_t>(i)].w[1];
        m0 += d0;
        m1 += d1;
        s00 += d0 * d0;
        s01 += d0 * d1;
        s11 += d1 * d1;
    }
    m0 /= n;
    m1 /= n;
    double c00 = s00 / n - m0 * m0;
    double c01 = s01 / n - m0 * m1;
    double c11 = s11 / n - m1 * m1;
    MatrixXd C = lambda * V;
    auto mcse = [&](int a, int b) { return std::sqrt((C(a, a) * C(b, b) + C(a, b) * C(a, b)) / n); };
    CHECK(std::abs(c00 - C(0, 0)) < 3.0 * mcse(0, 0));
    CHECK(std::abs(c01 - C(0, 1)) < 3.0 * mcse(0, 1));
    CHECK(std::abs(c11 - C(1, 1)) < 3.0 * mcse(1, 1));
}

TEST_CASE("averaging fitted models") {
    CureFit a = toy_fit(1.0, 0.5, {0.2, 0.5});
    CureFit b = toy_fit(3.0, 0.7, {0.4, 0.7});
    SUBCASE("single fit averages to itself") {
        AveragedFit av = average_fits({a});
        CHECK(av.gamma_bar(0) == a.gamma(0));
        CHECK(av.beta_bar(0) == a.beta(0));
        CHECK(av.lambda_bar.values[0] == a.baseline.values[0]);
        CHECK(av.lambda_bar.values[1] == a.baseline.values[1]);
    }
    SUBCASE("two fits average coordinatewise") {
        AveragedFit av = average_fits({a, b});
        CHECK(av.gamma_bar(0) == doctest::Approx(2.0).epsilon(1e-12));
        CHECK(av.beta_bar(0) == doctest::Approx(0.6).epsilon(1e-12));
        CHECK(av.lambda_bar.values[0] == doctest::Approx(0.3).epsilon(1e-12));
        CHECK(av.lambda_bar.values[1] == doctest::Approx(0.6).epsilon(1e-12));
    }
    SUBCASE("mismatched hazard grids are rejected") {
        CureFit c = b;
        c.baseline.times = {1.0, 2.5};
        CHECK_THROWS_AS((void)average_fits({a, c}), std::invalid_argument);
    }
    SUBCASE("empty input is rejected") {
        CHECK_THROWS_AS((void)average_fits({}), std::invalid_argument);
    }
}

TEST_CASE("polynomial extrapolation") {
    std::vector<double> lambdas = {0.0, 0.5, 1.0, 1.5, 2.0};
    SUBCASE("quadratic data is recovered exactly") {
        std::vector<double> values;
        for (double l : lambdas) values.push_back(2.0 - l + 0.5 * l * l);
        VectorXd c = fit_extrapolant(lambdas, values, Extrapolant::quadratic);
        CHECK(std::abs(c(0) - 2.0) < 1e-10);
        CHECK(std::abs(c(1) + 1.0) < 1e-10);
        CHECK(std::abs(c(2) - 0.5) < 1e-10);
    }
    SUBCASE("linear and cubic interpolate exactly at their degree") {
        VectorXd cl = fit_extrapolant({0.0, 1.0}, {2.0, 3.0}, Extrapolant::linear);
        CHECK(std::abs(cl(0) - 2.0) < 1e-12);
        CHECK(std::abs(cl(1) - 1.0) < 1e-12);
        std::vector<double> ls = {0.0, 1.0, 2.0, 3.0};
        std::vector<double> vs;
        for (double l : ls) vs.push_back(1.0 + l - 0.5 * l * l + 0.25 * l * l * l);
        VectorXd cc = fit_extrapolant(ls, vs, Extrapolant::cubic);
        CHECK(std::abs(cc(0) - 1.0) < 1e-9);
        CHECK(std::abs(cc(1) - 1.0) < 1e-9);
        CHECK(std::abs(cc(2) + 0.5) < 1e-9);
        CHECK(std::abs(cc(3) - 0.25) < 1e-9);
    }
    SUBCASE("constant data short-circuits exactly") {
        VectorXd c = fit_extrapolant(lambdas, {0.7, 0.7, 0.7, 0.7, 0.7}, Extrapolant::quadratic);
        CHECK(c(0) == 0.7);
        CHECK(c(1) == 0.0);
        CHECK(c(2) == 0.0);
    }
    SUBCASE("least squares matches the normal equations on a known system") {
        std::vector<double> values = {0.0, 1.0, 1.0, 2.0, 2.0};
        VectorXd c = fit_extrapolant(lambdas, values, Extrapolant::quadratic);
        MatrixXd A(3, 3);
        A << 5.0, 5.0, 7.5, 5.0, 7.5, 12.5, 7.5, 12.5, 22.125;
        VectorXd rhs(3);
        rhs << 6.0, 8.5, 13.75;
        VectorXd oracle = A.fullPivLu().solve(rhs);
        CHECK((c - oracle).lpNorm<Eigen::Infinity>() < 1e-10);
    }
    SUBCASE("degenerate inputs are rejected") {
        CHECK_THROWS_AS((void)fit_extrapolant({0.0, 0.0, 1.0}, {1.0, 2.0, 3.0},
                                              Extrapolant::quadratic),
                        std::invalid_argument);
        CHECK_THROWS_AS((void)fit_extrapolant({0.0, 1.0}, {1.0, 2.0}, Extrapolant::quadratic),
                        std::invalid_argument);
        CHECK_THROWS_AS((void)fit_extrapolant({0.0, 1.0}, {1.0}, Extrapolant::linear),
                        std::invalid_argument);
    }
}

TEST_CASE("evaluation at lambda = -1") {
    CHECK(extrapolate_minus1(vec({1.0, 2.0, 3.0}), Extrapolant::quadratic) == 2.0);
    CHECK(extrapolate_minus1(vec({0.7}), Extrapolant::linear) == 0.7);
    CHECK_THROWS_AS((void)extrapolate_minus1(VectorXd(0), Extrapolant::linear),
                    std::invalid_argument);
    CHECK_THROWS_AS((void)extrapolate_minus1(vec({1.0, 2.0, 3.0}), Extrapolant::linear),
                    std::invalid_argument);
}

TEST_CASE("pool adjacent violators") {
    CHECK(pava({1.0, 2.0, 3.0}) == std::vector<double>{1.0, 2.0, 3.0});
    CHECK(pava({2.0, 1.0}) == std::vector<double>{1.5, 1.5});
    CHECK(pava({1.0, 3.0, 2.0}) == std::vector<double>{1.0, 2.5, 2.5});
}

TEST_CASE("zero error covariance reproduces the uncorrected fit exactly") {
    ScenarioSpec spec = model1_preset(1, 1, 1);
    spec.n = 80;
    RngStream rng = substream(3000, 0);
    auto [obs, latent] = generate(spec, rng);
    ModelLayout layout = single_column_layout();
    layout.error_cov = MatrixXd::Zero(1, 1);

    Fitter fitter = [](const Dataset& d, const ModelLayout& l) { return fit_mle(d, l); };
    SimexOptions opts;
    opts.B = 3;
    opts.seed = 11;
    SimexResult res = run_simex(obs, layout, fitter, opts);

    CureFit direct = fit_mle(obs, layout);
    for (Eigen::Index j = 0; j < direct.gamma.size(); ++j) {
        CHECK(res.gamma_simex(j) == direct.gamma(j));
        CHECK(res.naive_fit.gamma(j) == direct.gamma(j));
    }
    for (Eigen::Index j = 0; j < direct.beta.size(); ++j)
        CHECK(res.beta_simex(j) == direct.beta(j));
    REQUIRE(res.baseline_simex.values.size() == direct.baseline.values.size());
    for (std::size_t m = 0; m < direct.baseline.values.size(); ++m)
        CHECK(res.baseline_simex.values[m] == direct.baseline.values[m]);
    CHECK(res.n_failed == 0);
}

TEST_CASE("a quadratic mock estimator extrapolates to its lambda = -1 value") {
    Dataset d;
    d.records.push_back({1.0, 1, {0.0}});
    d.column_names = {"x"};
    ModelLayout layout = single_column_layout();
    layout.error_cov = MatrixXd::Identity(1, 1);

    SimexOptions opts;
    opts.B = 1;
    opts.seed = 424242;
    const double a1 = 0.7, a2 = -0.3, a3 = 0.12;
    auto g = [&](double l) { return a1 + a2 * l + a3 * l * l; };

    // reconstruct each cell's contaminated covariate to key the mock fitter
    std::map<double, double> lambda_of_value;
    for (std::size_t k = 1; k < opts.lambdas.size(); ++k) {
        RngStream rng = substream(opts.seed, k, 0);
        Dataset noisy = contaminate(d, layout.error_cov, opts.lambdas[k], rng);
        lambda_of_value[noisy.records[0].w[0]] = opts.lambdas[k];
    }

    Fitter mock = [&](const Dataset& dd, const ModelLayout&) {
        double v = dd.records[0].w[0];
        double lambda = 0.0;
        if (v != 0.0) {
            auto it = lambda_of_value.find(v);
            REQUIRE(it != lambda_of_value.end());
            lambda = it->second;
        }
        CureFit f;
        f.gamma = vec({g(lambda)});
        f.beta = vec({-g(lambda)});
        f.baseline.times = {1.0};
        f.baseline.values = {1.0};
        f.converged = true;
        f.tau0 = 1.0;
        return f;
    };

    SimexResult res = run_simex(d, layout, mock, opts);
    double target = a1 - a2 + a3;
    CHECK(std::abs(res.gamma_simex(0) - target) < 1e-8);
    CHECK(std::abs(res.beta_simex(0) + target) < 1e-8);
    REQUIRE(res.extrap_coeffs.size() == 2);
    CHECK(std::abs(res.extrap_coeffs[0](0) - a1) < 1e-8);
    CHECK(std::abs(res.extrap_coeffs[0](1) - a2) < 1e-8);
    CHECK(std::abs(res.extrap_coeffs[0](2) - a3) < 1e-8);
    for (std::size_t k = 0; k < opts.lambdas.size(); ++k)
        CHECK(std::abs(res.per_lambda[k].gamma_bar(0) - g(opts.lambdas[k])) < 1e-12);
}

TEST_CASE("non-monotone extrapolated hazards are isotonized when asked") {
    Dataset d;
    d.records.push_back({1.0, 1, {0.0}});
    d.column_names = {"x"};
    ModelLayout layout = single_column_layout();
    layout.error_cov = MatrixXd::Identity(1, 1);

    SimexOptions opts;
    opts.B = 1;
    opts.seed = 515151;

    std::map<double, double> lambda_of_value;
    for (std::size_t k = 1; k < opts.lambdas.size(); ++k) {
        RngStream rng = substream(opts.seed, k, 0);
        Dataset noisy = contaminate(d, layout.error_cov, opts.lambdas[k], rng);
        lambda_of_value[noisy.records[0].w[0]] = opts.lambdas[k];
    }
    Fitter mock = [&](const Dataset& dd, const ModelLayout&) {
        double v = dd.records[0].w[0];
        double lambda = v == 0.0 ? 0.0 : lambda_of_value.at(v);
        CureFit f;
        f.gamma = vec({1.0});
        f.beta = vec({1.0});
        f.baseline.times = {1.0, 2.0};
        // first grid point constant 1, second 0.2 + lambda: at lambda = -1
        // the second extrapolates to -0.8 < 1, breaking monotonicity
        f.baseline.values = {1.0, 0.2 + lambda};
        f.converged = true;
        f.tau0 = 2.0;
        return f;
    };

    SimexResult res = run_simex(d, layout, mock, opts);
    CHECK_FALSE(res.baseline_was_monotone);
    CHECK(res.baseline_simex.non_decreasing());
    CHECK(res.baseline_simex.values[0] == doctest::Approx(0.1).epsilon(1e-6));
    CHECK(res.baseline_simex.values[1] == doctest::Approx(0.1).epsilon(1e-6));

    SimexOptions raw = opts;
    raw.isotonize = false;
    SimexResult res_raw = run_simex(d, layout, mock, raw);
    CHECK_FALSE(res_raw.baseline_simex.non_decreasing());
    CHECK(res_raw.baseline_simex.values[1] == doctest::Approx(-0.8).epsilon(1e-6));
}

TEST_CASE("results do not depend on the worker schedule") {
    ScenarioSpec spec = model1_preset(1, 1, 1);
    spec.n = 60;
    RngStream rng = substream(3100, 0);
    auto [obs, latent] = generate(spec, rng);
    ModelLayout layout = single_column_layout();
    layout.error_cov = MatrixXd::Identity(1, 1) * 0.49;

    Fitter fitter = [](const Dataset& d, const ModelLayout& l) { return fit_mle(d, l); };
    SimexOptions one;
    one.B = 8;
    one.seed = 99;
    one.jobs = 1;
    SimexOptions four = one;
    four.jobs = 4;

    SimexResult r1 = run_simex(obs, layout, fitter, one);
    SimexResult r4 = run_simex(obs, layout, fitter, four);
    for (Eigen::Index j = 0; j < r1.gamma_simex.size(); ++j)
        CHECK(r1.gamma_simex(j) == r4.gamma_simex(j));
    for (Eigen::Index j = 0; j < r1.beta_simex.size(); ++j)
        CHECK(r1.beta_simex(j) == r4.beta_simex(j));
    for (std::size_t m = 0; m < r1.baseline_simex.values.size(); ++m)
        CHECK(r1.baseline_simex.values[m] == r4.baseline_simex.values[m]);
    for (std::size_t k = 0; k < r1.per_lambda.size(); ++k) {
        CHECK(r1.per_lambda[k].gamma_bar(0) == r4.per_lambda[k].gamma_bar(0));
        CHECK(r1.per_lambda[k].beta_bar(0) == r4.per_lambda[k].beta_bar(0));
    }
}

TEST_CASE("the lambda = 0 level reproduces the uncorrected fit") {
    ScenarioSpec spec = model1_preset(1, 1, 1);
    spec.n = 60;
    RngStream rng = substream(3200, 0);
    auto [obs, latent] = generate(spec, rng);
    ModelLayout layout = single_column_layout();
    layout.error_cov = MatrixXd::Identity(1, 1) * 0.49;

    Fitter fitter = [](const Dataset& d, const ModelLayout& l) { return fit_mle(d, l); };
    SimexOptions opts;
    opts.B = 4;
    opts.seed = 7;
    SimexResult res = run_simex(obs, layout, fitter, opts);
    CureFit direct = fit_mle(obs, layout);
    CHECK(res.per_lambda[0].lambda == 0.0);
    for (Eigen::Index j = 0; j < direct.gamma.size(); ++j)
        CHECK(res.per_lambda[0].gamma_bar(j) == direct.gamma(j));
    for (Eigen::Index j = 0; j < direct.beta.size(); ++j)
        CHECK(res.per_lambda[0].beta_bar(j) == direct.beta(j));
}

TEST_CASE("correction shrinks the headline latency bias") {
    ScenarioSpec spec = model1_preset(1, 1, 1);
    StudyOptions opts;
    opts.jobs = 0;
    McSummary s = run_study(spec, StudyMethod::simex_mle, 500, opts, 20260801);
    // beta_1 is the last parameter (gamma_1, gamma_2, beta_1)
    REQUIRE(s.params.size() == 3);
    CHECK(s.params[2].name == "beta_1");
    CHECK(std::abs(s.params[2].bias - (-0.188)) < 0.03);
}

}  // TEST_SUITE

#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "curesimex/mclab.hpp"
#include "curesimex/rng.hpp"

using namespace curesimex;

namespace {

double cure_fraction(const Dataset& latent) {
    // trailing column flags the subjects that are susceptible
    std::size_t col = latent.dim() - 1;
    REQUIRE(latent.column_names.back() == "uncured");
    double s = 0;
    for (const auto& r : latent.records) s += r.w[col];
    return 1.0 - s / static_cast<double>(latent.size());
}

double censored_fraction(const Dataset& obs) {
    double s = 0;
    for (const auto& r : obs.records) s += (r.delta == 0) ? 1.0 : 0.0;
    return s / static_cast<double>(obs.size());
}

const ParamSummary& by_name(const McSummary& s, const std::string& name) {
    for (const auto& p : s.params)
        if (p.name == name) return p;
    REQUIRE_MESSAGE(false, "missing parameter " << name);
    return s.params.front();
}

}  // namespace

TEST_SUITE("mclab") {

TEST_CASE("generation is deterministic in the seed") {
    ScenarioSpec spec = model_preset(2, 1, 2);
    spec.n = 50;
    RngStream r1 = substream(42, 0);
    RngStream r2 = substream(42, 0);
    auto [obs1, lat1] = generate(spec, r1);
    auto [obs2, lat2] = generate(spec, r2);
    REQUIRE(obs1.size() == obs2.size());
    for (std::size_t i = 0; i < obs1.size(); ++i) {
        CHECK(obs1.records[i].y == obs2.records[i].y);
        CHECK(obs1.records[i].delta == obs2.records[i].delta);
        for (std::size_t j = 0; j < obs1.dim(); ++j)
            CHECK(obs1.records[i].w[j] == obs2.records[i].w[j]);
        for (std::size_t j = 0; j < lat1.dim(); ++j)
            CHECK(lat1.records[i].w[j] == lat2.records[i].w[j]);
    }
}

TEST_CASE("headline scenario hits its table rates at large n") {
    ScenarioSpec spec = model1_preset(1, 1, 1);
    spec.n = 100000;
    RngStream rng = substream(7, 0);
    auto [obs, latent] = generate(spec, rng);
    CHECK(std::abs(cure_fraction(latent) - 0.20) < 0.005);
    CHECK(std::abs(censored_fraction(obs) - 0.25) < 0.01);
}

TEST_CASE("every preset matches its tabulated cure and censoring rates") {
    for (const ScenarioSpec& base : all_presets()) {
        ScenarioSpec spec = base;
        spec.n = 100000;
        RngStream rng = substream(11, 0);
        auto [obs, latent] = generate(spec, rng);
        INFO("preset ", spec.label);
        // the tabulated rates are rounded design labels; the exact rates
        // implied by the stated parameters sit up to ~1.1pp away
        CHECK(std::abs(cure_fraction(latent) - spec.cure_rate) <= 0.015);
        CHECK(std::abs(censored_fraction(obs) - spec.cens_rate) <= 0.015);
    }
}

TEST_CASE("latent draws ignore the measurement error setting") {
    ScenarioSpec low = model_preset(2, 1, 1);
    ScenarioSpec high = model_preset(2, 1, 2);
    low.n = high.n = 200;
    RngStream r1 = substream(99, 0);
    RngStream r2 = substream(99, 0);
    auto [obs_low, lat_low] = generate(low, r1);
    auto [obs_high, lat_high] = generate(high, r2);
    bool any_obs_diff = false;
    for (std::size_t i = 0; i < lat_low.size(); ++i) {
        CHECK(obs_low.records[i].y == obs_high.records[i].y);
        CHECK(obs_low.records[i].delta == obs_high.records[i].delta);
        for (std::size_t j = 0; j < lat_low.dim(); ++j)
            CHECK(lat_low.records[i].w[j] == lat_high.records[i].w[j]);
        for (std::size_t j = 0; j < obs_low.dim(); ++j)
            if (obs_low.records[i].w[j] != obs_high.records[i].w[j]) any_obs_diff = true;
    }
    CHECK(any_obs_diff);
}

TEST_CASE("scenario preconditions are enforced") {
    ScenarioSpec spec = model1_preset(1, 1, 1);
    SUBCASE("truncation order") {
        spec.tau0 = 9.0;
        spec.tau = 7.0;
        CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
    }
    SUBCASE("censoring rate parameter") {
        spec.censor_rate_param = 0.0;
        CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
    }
}

TEST_CASE("error covariance layout") {
    ScenarioSpec spec = model1_preset(1, 1, 1);
    ModelLayout layout = layout_for(spec);
    REQUIRE(layout.error_cov.rows() == 1);
    CHECK(layout.error_cov(0, 0) == doctest::Approx(0.49).epsilon(1e-12));

    ModelLayout overridden = layout_for(spec, {0.3});
    CHECK(overridden.error_cov(0, 0) == doctest::Approx(0.09).epsilon(1e-12));

    CHECK_THROWS_AS((void)layout_for(spec, {0.3, 0.3}), std::invalid_argument);
}

TEST_CASE("perturbed error draws hit their target moments") {
    const int m = 1000000;
    SUBCASE("uniform") {
        RngStream rng(101);
        double s = 0, s2 = 0;
        for (int i = 0; i < m; ++i) {
            double u = perturbed_error_sampler(ErrorKind::uniform, 0.4, 5, rng);
            s += u;
            s2 += u * u;
        }
        double mean = s / m;
        double sd = std::sqrt(s2 / m - mean * mean);
        CHECK(std::abs(mean) < 0.002);
        CHECK(std::abs(sd - 0.4) < 0.002);
    }
    SUBCASE("student t") {
        RngStream rng(102);
        double s = 0, s2 = 0;
        for (int i = 0; i < m; ++i) {
            double u = perturbed_error_sampler(ErrorKind::student_t, 0.4, 5, rng);
            s += u;
            s2 += u * u;
        }
        double mean = s / m;
        double sd = std::sqrt(s2 / m - mean * mean);
        CHECK(std::abs(mean) < 0.002);
        CHECK(std::abs(sd - 0.4) < 0.003);
    }
    SUBCASE("chi squared keeps its asymmetry") {
        RngStream rng(103);
        std::vector<double> draws(m);
        double s = 0;
        for (int i = 0; i < m; ++i) {
            draws[static_cast<std::size_t>(i)] =
                perturbed_error_sampler(ErrorKind::chi_squared, 0.4, 5, rng);
            s += draws[static_cast<std::size_t>(i)];
        }
        double mean = s / m;
        double s2 = 0, s3 = 0;
        for (double u : draws) {
            double d = u - mean;
            s2 += d * d;
            s3 += d * d * d;
        }
        double var = s2 / m;
        double skew = (s3 / m) / std::pow(var, 1.5);
        CHECK(std::abs(mean) < 0.002);
        CHECK(std::abs(std::sqrt(var) - 0.4) < 0.002);
        CHECK(skew > 0.5);
    }
    SUBCASE("normal degenerates to a scaled baseline draw") {
        RngStream a(104), b(104);
        for (int i = 0; i < 100; ++i)
            CHECK(perturbed_error_sampler(ErrorKind::normal, 0.7, 5, a) == 0.7 * b.normal());
    }
    SUBCASE("inadmissible degrees of freedom") {
        RngStream rng(105);
        CHECK_THROWS_AS((void)perturbed_error_sampler(ErrorKind::student_t, 0.4, 2, rng),
                        std::invalid_argument);
        CHECK_THROWS_AS((void)perturbed_error_sampler(ErrorKind::chi_squared, 0.4, 0, rng),
                        std::invalid_argument);
    }
}

TEST_CASE("summary statistics") {
    VectorXd truth(1);
    truth << 1.0;
    SUBCASE("constant estimates equal to truth") {
        std::vector<VectorXd> est(5, truth);
        McSummary s = summarize(est, truth);
        CHECK(s.params[0].bias == 0.0);
        CHECK(s.params[0].variance == 0.0);
        CHECK(s.params[0].mse == 0.0);
        CHECK(s.params[0].name == "param_1");
        CHECK(s.replicates == 5);
    }
    SUBCASE("a two point spread around the truth") {
        VectorXd a(1), b(1);
        a << 0.0;
        b << 2.0;
        McSummary s = summarize({a, b}, truth);
        CHECK(s.params[0].bias == 0.0);
        CHECK(s.params[0].variance == 1.0);
        CHECK(s.params[0].mse == 1.0);
    }
    SUBCASE("mse decomposes into squared bias plus variance") {
        RngStream rng(201);
        std::vector<VectorXd> est;
        VectorXd t3(3);
        t3 << 0.5, -1.0, 2.0;
        for (int r = 0; r < 50; ++r) {
            VectorXd e(3);
            for (int j = 0; j < 3; ++j) e(j) = t3(j) + rng.normal();
            est.push_back(e);
        }
        McSummary s = summarize(est, t3);
        for (const auto& p : s.params)
            CHECK(std::abs(p.mse - (p.bias * p.bias + p.variance)) <= 1e-12);
    }
    SUBCASE("preconditions") {
        VectorXd a(1);
        a << 0.0;
        CHECK_THROWS_AS((void)summarize({a}, truth), std::invalid_argument);
        CHECK_THROWS_AS((void)summarize({a, a}, truth, {"one", "two"}), std::invalid_argument);
    }
}

TEST_CASE("a two replicate study runs end to end") {
    ScenarioSpec spec = model1_preset(1, 1, 1);
    spec.n = 60;
    StudyOptions opts;
    McSummary s = run_study(spec, StudyMethod::naive_mle, 2, opts, 5);
    CHECK(s.replicates == 2);
    REQUIRE(s.params.size() == 3);
    CHECK(s.params[0].name == "gamma_1");
    CHECK(s.params[2].name == "beta_1");
    for (const auto& p : s.params) {
        CHECK(std::isfinite(p.bias));
        CHECK(std::isfinite(p.variance));
        CHECK(p.variance >= 0.0);
    }
}

TEST_CASE("study summaries do not depend on the worker schedule") {
    ScenarioSpec spec = model1_preset(1, 1, 1);
    spec.n = 60;
    StudyOptions one;
    one.jobs = 1;
    StudyOptions four;
    four.jobs = 4;
    McSummary s1 = run_study(spec, StudyMethod::naive_mle, 8, one, 17);
    McSummary s4 = run_study(spec, StudyMethod::naive_mle, 8, four, 17);
    REQUIRE(s1.params.size() == s4.params.size());
    for (std::size_t j = 0; j < s1.params.size(); ++j) {
        CHECK(s1.params[j].bias == s4.params[j].bias);
        CHECK(s1.params[j].variance == s4.params[j].variance);
        CHECK(s1.params[j].mse == s4.params[j].mse);
    }
}

TEST_CASE("small measurement error leaves little bias after correction") {
    ScenarioSpec spec = model_preset(2, 1, 1);
    StudyOptions opts;
    opts.jobs = 0;
    McSummary s = run_study(spec, StudyMethod::simex_mle, 500, opts, 20260802);
    CHECK(std::abs(by_name(s, "beta_1").bias - 0.010) < 0.025);
}

TEST_CASE("an uncorrected fit attenuates a strong latency effect") {
    ScenarioSpec spec = model_preset(3, 3, 2);
    StudyOptions opts;
    opts.jobs = 0;
    McSummary s = run_study(spec, StudyMethod::naive_mle, 500, opts, 20260803);
    CHECK(std::abs(by_name(s, "beta_2").bias - (-0.516)) < 0.05);
}

}  // TEST_SUITE

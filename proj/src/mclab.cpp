#include "curesimex/mclab.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "curesimex/parallel.hpp"

namespace curesimex {

namespace {

struct ModelShape {
    std::vector<std::string> columns;
    std::vector<int> incidence_idx;
    std::vector<int> latency_idx;
    std::vector<int> error_cols;  // columns carrying measurement error, model order
    Eigen::Index gamma_dim, beta_dim;
};

ModelShape model_shape(int model_id) {
    switch (model_id) {
        case 1:
            return {{"w"}, {0}, {0}, {0}, 2, 1};
        case 2:
            return {{"w1", "x2"}, {0, 1}, {0, 1}, {0}, 3, 2};
        case 3:
            return {{"x1", "x2", "w"}, {0, 1}, {0, 2}, {2}, 3, 2};
        case 4:
            return {{"w1", "w2"}, {0}, {0, 1}, {0, 1}, 2, 2};
        case 5:
            return {{"x", "w"}, {0}, {0, 1}, {1}, 2, 2};
        default:
            throw std::invalid_argument("model_id must be 1..5");
    }
}

bool fit_usable(const CureFit& f) {
    if (f.incidence_diverged || f.latency_diverged) return false;
    for (Eigen::Index j = 0; j < f.gamma.size(); ++j)
        if (!std::isfinite(f.gamma(j))) return false;
    for (Eigen::Index j = 0; j < f.beta.size(); ++j)
        if (!std::isfinite(f.beta(j))) return false;
    return true;
}

VectorXd concat(const VectorXd& a, const VectorXd& b) {
    VectorXd out(a.size() + b.size());
    out.head(a.size()) = a;
    out.tail(b.size()) = b;
    return out;
}

}  // namespace

ModelLayout layout_for(const ScenarioSpec& spec, const std::vector<double>& error_sd_override) {
    ModelShape shape = model_shape(spec.model_id);
    const std::vector<double>& sds =
        error_sd_override.empty() ? spec.error_sd : error_sd_override;
    if (sds.size() != shape.error_cols.size())
        throw std::invalid_argument("error sd count does not match the model's mismeasured covariates");
    ModelLayout layout;
    layout.incidence_idx = shape.incidence_idx;
    layout.latency_idx = shape.latency_idx;
    Eigen::Index D = static_cast<Eigen::Index>(shape.columns.size());
    layout.error_cov = MatrixXd::Zero(D, D);
    for (std::size_t k = 0; k < sds.size(); ++k) {
        if (!(sds[k] >= 0.0)) throw std::invalid_argument("error sd must be nonnegative");
        int col = shape.error_cols[k];
        layout.error_cov(col, col) = sds[k] * sds[k];
    }
    return layout;
}

std::pair<Dataset, Dataset> generate(const ScenarioSpec& spec, RngStream& rng) {
    spec.validate();
    ModelShape shape = model_shape(spec.model_id);
    if (spec.gamma_true.size() != shape.gamma_dim)
        throw std::invalid_argument("gamma_true has the wrong length for this model");
    if (spec.beta_true.size() != shape.beta_dim)
        throw std::invalid_argument("beta_true has the wrong length for this model");
    if (spec.error_sd.size() != shape.error_cols.size())
        throw std::invalid_argument("error sd count does not match the model's mismeasured covariates");

    int n = spec.n;
    std::size_t D = shape.columns.size();
    std::vector<std::vector<double>> latent_cov(static_cast<std::size_t>(n));
    std::vector<double> ys(static_cast<std::size_t>(n));
    std::vector<int> deltas(static_cast<std::size_t>(n));
    std::vector<int> uncured(static_cast<std::size_t>(n));

    // phase 1: every latent draw (covariates, cure status, event, censoring);
    // the event-time uniform is consumed even for cured subjects so the draw
    // count per record is fixed
    for (int i = 0; i < n; ++i) {
        std::vector<double> cov(D);
        switch (spec.model_id) {
            case 1:
                cov[0] = rng.normal();
                break;
            case 2:
                cov[0] = rng.uniform_ab(-1.0, 1.0);
                cov[1] = rng.bernoulli(0.5);
                break;
            case 3:
                cov[0] = rng.uniform_ab(-1.0, 1.0);
                cov[1] = rng.bernoulli(0.5);
                cov[2] = 0.3 * rng.normal();
                break;
            case 4:
                cov[0] = rng.normal();
                cov[1] = rng.uniform_ab(-1.0, 1.0);
                break;
            case 5:
                cov[0] = rng.normal();
                cov[1] = -cov[0] + 0.5 * rng.normal();
                break;
        }

        VectorXd x(shape.incidence_idx.size() + 1);
        x(0) = 1.0;
        for (std::size_t j = 0; j < shape.incidence_idx.size(); ++j)
            x(static_cast<Eigen::Index>(j) + 1) =
                cov[static_cast<std::size_t>(shape.incidence_idx[j])];
        double phi = phi_logistic(spec.gamma_true, x);

        int b = rng.bernoulli(phi);
        double u_t = rng.uniform();
        double c = std::min(rng.exponential(spec.censor_rate_param), spec.tau);

        double t = std::numeric_limits<double>::infinity();
        if (b == 1) {
            double bz = 0.0;
            for (std::size_t j = 0; j < shape.latency_idx.size(); ++j)
                bz += spec.beta_true(static_cast<Eigen::Index>(j)) *
                      cov[static_cast<std::size_t>(shape.latency_idx[j])];
            double t0 = std::pow(-std::log(u_t) / (spec.weibull_mu * std::exp(bz)),
                                 1.0 / spec.weibull_rho);
            t = std::min(t0, spec.tau0);
        }

        std::size_t ii = static_cast<std::size_t>(i);
        latent_cov[ii] = std::move(cov);
        uncured[ii] = b;
        if (t <= c) {
            ys[ii] = t;
            deltas[ii] = 1;
        } else {
            ys[ii] = c;
            deltas[ii] = 0;
        }
    }

    // phase 2: measurement error only
    Dataset observed;
    observed.column_names = shape.columns;
    observed.records.reserve(static_cast<std::size_t>(n));
    Dataset latent;
    latent.column_names = shape.columns;
    latent.column_names.push_back("uncured");
    latent.records.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        std::size_t ii = static_cast<std::size_t>(i);
        std::vector<double> obs_cov = latent_cov[ii];
        for (std::size_t k = 0; k < shape.error_cols.size(); ++k) {
            double e = perturbed_error_sampler(spec.error_kind, spec.error_sd[k], spec.error_df, rng);
            obs_cov[static_cast<std::size_t>(shape.error_cols[k])] += e;
        }
        observed.records.push_back({ys[ii], deltas[ii], std::move(obs_cov)});
        std::vector<double> lat_cov = std::move(latent_cov[ii]);
        lat_cov.push_back(static_cast<double>(uncured[ii]));
        latent.records.push_back({ys[ii], deltas[ii], std::move(lat_cov)});
    }
    return {std::move(observed), std::move(latent)};
}

double perturbed_error_sampler(ErrorKind kind, double v, int df, RngStream& rng) {
    if (!(v > 0.0)) throw std::invalid_argument("error sd must be positive");
    switch (kind) {
        case ErrorKind::normal:
            return v * rng.normal();
        case ErrorKind::uniform: {
            double a = v * std::sqrt(3.0);
            return rng.uniform_ab(-a, a);
        }
        case ErrorKind::student_t: {
            if (df < 3) throw std::invalid_argument("student_t error needs df >= 3");
            double a = v * std::sqrt((df - 2.0) / df);
            return a * rng.student_t(df);
        }
        case ErrorKind::chi_squared: {
            if (df < 1) throw std::invalid_argument("chi_squared error needs df >= 1");
            double a = v / std::sqrt(2.0 * df);
            return a * (rng.chi_squared(df) - df);
        }
    }
    throw std::invalid_argument("unknown error kind");
}

McSummary summarize(const std::vector<VectorXd>& estimates, const VectorXd& truth,
                    const std::vector<std::string>& names) {
    if (estimates.size() < 2) throw std::invalid_argument("summarize needs at least 2 replicates");
    Eigen::Index p = truth.size();
    for (const auto& e : estimates)
        if (e.size() != p) throw std::invalid_argument("estimate length does not match the truth");
    if (!names.empty() && names.size() != static_cast<std::size_t>(p))
        throw std::invalid_argument("name count does not match the parameter count");

    double R = static_cast<double>(estimates.size());
    McSummary out;
    out.replicates = static_cast<int>(estimates.size());
    for (Eigen::Index j = 0; j < p; ++j) {
        double mean = 0.0;
        for (const auto& e : estimates) mean += e(j);
        mean /= R;
        double var = 0.0;
        for (const auto& e : estimates) var += (e(j) - mean) * (e(j) - mean);
        var /= R;
        ParamSummary ps;
        ps.name = names.empty() ? "param_" + std::to_string(j + 1) : names[static_cast<std::size_t>(j)];
        ps.bias = mean - truth(j);
        ps.variance = var;
        ps.mse = ps.bias * ps.bias + var;
        out.params.push_back(std::move(ps));
    }
    return out;
}

McSummary run_study(const ScenarioSpec& spec, StudyMethod method, int replicates,
                    const StudyOptions& opts, std::uint64_t seed) {
    spec.validate();
    if (replicates < 2) throw std::invalid_argument("run_study needs at least 2 replicates");

    ModelLayout layout = layout_for(spec, opts.specified_error_sd);
    VectorXd truth = concat(spec.gamma_true, spec.beta_true);
    std::vector<std::string> names;
    for (Eigen::Index j = 0; j < spec.gamma_true.size(); ++j)
        names.push_back("gamma_" + std::to_string(j + 1));
    for (Eigen::Index j = 0; j < spec.beta_true.size(); ++j)
        names.push_back("beta_" + std::to_string(j + 1));

    std::vector<VectorXd> slot(static_cast<std::size_t>(replicates));
    std::vector<char> ok(static_cast<std::size_t>(replicates), 0);

    parallel_for(replicates, opts.jobs, [&](int r) {
        RngStream gen_rng = substream(seed, static_cast<std::uint64_t>(r));
        try {
            auto [obs, latent] = generate(spec, gen_rng);
            (void)latent;
            VectorXd est;
            switch (method) {
                case StudyMethod::naive_mle: {
                    CureFit f = fit_mle(obs, layout, opts.em);
                    if (!fit_usable(f)) return;
                    est = concat(f.gamma, f.beta);
                    break;
                }
                case StudyMethod::naive_presmooth: {
                    CureFit f = fit_presmooth(obs, layout, opts.presmooth);
                    if (!fit_usable(f)) return;
                    est = concat(f.gamma, f.beta);
                    break;
                }
                case StudyMethod::simex_mle: {
                    SimexOptions so = opts.simex;
                    so.seed = derive_seed(seed, static_cast<std::uint64_t>(r), 1);
                    so.jobs = 1;
                    EmOptions em = opts.em;
                    SimexResult sr = run_simex(
                        obs, layout,
                        [&em](const Dataset& d, const ModelLayout& l) { return fit_mle(d, l, em); },
                        so);
                    est = concat(sr.gamma_simex, sr.beta_simex);
                    break;
                }
                case StudyMethod::simex_presmooth: {
                    SimexOptions so = opts.simex;
                    so.seed = derive_seed(seed, static_cast<std::uint64_t>(r), 1);
                    so.jobs = 1;
                    PresmoothOptions po = opts.presmooth;
                    po.bandwidth = presmooth_bandwidth(obs, layout, opts.presmooth);
                    SimexResult sr = run_simex(
                        obs, layout,
                        [&po](const Dataset& d, const ModelLayout& l) {
                            return fit_presmooth(d, l, po);
                        },
                        so);
                    est = concat(sr.gamma_simex, sr.beta_simex);
                    break;
                }
            }
            for (Eigen::Index j = 0; j < est.size(); ++j)
                if (!std::isfinite(est(j))) return;
            slot[static_cast<std::size_t>(r)] = std::move(est);
            ok[static_cast<std::size_t>(r)] = 1;
        } catch (const std::exception&) {
            // counted as a failed replicate below
        }
    });

    std::vector<VectorXd> good;
    good.reserve(static_cast<std::size_t>(replicates));
    int failed = 0;
    for (int r = 0; r < replicates; ++r) {
        if (ok[static_cast<std::size_t>(r)])
            good.push_back(std::move(slot[static_cast<std::size_t>(r)]));
        else
            ++failed;
    }
    if (failed > 0.1 * replicates) {
        std::ostringstream msg;
        msg << "study aborted: " << failed << " of " << replicates << " replicates failed ("
            << spec.label << ", " << study_method_name(method) << ")";
        throw std::runtime_error(msg.str());
    }
    McSummary out = summarize(good, truth, names);
    out.failures = failed;
    return out;
}

ScenarioSpec model1_preset(int setting, int scenario, int cens_level, double v, int n) {
    if (setting < 1 || setting > 3) throw std::invalid_argument("setting must be 1..3");
    if (scenario < 1 || scenario > 2) throw std::invalid_argument("scenario must be 1..2");
    if (cens_level < 1 || cens_level > 2) throw std::invalid_argument("cens level must be 1..2");

    static const double gamma2[3] = {0.1, 0.5, 2.0};
    static const double lambda_c[3][2][2] = {
        {{0.09, 0.3}, {0.13, 0.5}},
        {{0.07, 0.26}, {0.15, 0.6}},
        {{0.1, 0.33}, {0.2, 0.7}},
    };
    static const double cens[2][2] = {{0.25, 0.35}, {0.55, 0.65}};

    ScenarioSpec spec;
    spec.model_id = 1;
    spec.gamma_true.resize(2);
    spec.gamma_true(0) = scenario == 1 ? (setting == 3 ? 2.2 : 1.4) : 0.0;
    spec.gamma_true(1) = gamma2[setting - 1];
    spec.beta_true.resize(1);
    spec.beta_true(0) = 1.0;
    spec.censor_rate_param = lambda_c[setting - 1][scenario - 1][cens_level - 1];
    spec.tau0 = 7.0;
    spec.tau = 9.0;
    spec.error_sd = {v};
    spec.n = n;
    spec.cure_rate = scenario == 1 ? 0.20 : 0.50;
    spec.cens_rate = cens[scenario - 1][cens_level - 1];
    std::ostringstream label;
    label << "1/" << setting << "/" << scenario << "/" << cens_level;
    spec.label = label.str();
    return spec;
}

ScenarioSpec model_preset(int model, int scenario, int error_level, int n) {
    if (model < 2 || model > 5) throw std::invalid_argument("model must be 2..5");
    if (scenario < 1 || scenario > 3) throw std::invalid_argument("scenario must be 1..3");
    if (error_level < 1 || error_level > 2) throw std::invalid_argument("error level must be 1..2");

    struct Row {
        std::vector<double> gamma, beta;
        double lambda_c, tau0, tau, cure, cens;
    };
    static const Row rows[4][3] = {
        {{{1.3, 1.0, 0.4}, {0.8, 0.3}, 0.33, 4, 6, 0.20, 0.35},
         {{1.1, 1.3, -0.3}, {2.0, -0.8}, 0.08, 10, 12, 0.30, 0.35},
         {{-0.5, 1.5, 1.0}, {0.8, 0.3}, 0.4, 4, 6, 0.50, 0.60}},
        {{{1.3, 1.0, 0.4}, {1.5, 0.5}, 0.3, 6, 8, 0.20, 0.35},
         {{1.1, 1.3, -0.3}, {1.0, -1.0}, 0.1, 6, 8, 0.30, 0.35},
         {{-0.5, 1.5, 1.0}, {0.5, 1.5}, 0.3, 6, 8, 0.50, 0.60}},
        {{{1.4, 0.5}, {0.5, 0.1}, 0.3, 5, 7, 0.20, 0.35},
         {{1.4, 2.0}, {0.1, 0.5}, 0.12, 5, 7, 0.30, 0.35},
         {{0.0, -2.0}, {-1.5, 0.5}, 0.5, 5, 7, 0.50, 0.60}},
        {{{1.4, 0.5}, {0.5, 0.1}, 0.3, 4, 6, 0.20, 0.35},
         {{1.4, 2.0}, {0.1, -0.5}, 0.13, 4, 6, 0.30, 0.35},
         {{0.0, 2.0}, {1.0, -1.0}, 0.5, 6, 8, 0.50, 0.60}},
    };
    static const std::vector<double> error_sds[4][2] = {
        {{0.2}, {0.4}},
        {{0.1}, {0.2}},
        {{0.35, 0.2}, {0.7, 0.4}},
        {{0.39}, {0.78}},
    };

    const Row& row = rows[model - 2][scenario - 1];
    ScenarioSpec spec;
    spec.model_id = model;
    spec.gamma_true = Eigen::Map<const VectorXd>(row.gamma.data(),
                                                 static_cast<Eigen::Index>(row.gamma.size()));
    spec.beta_true = Eigen::Map<const VectorXd>(row.beta.data(),
                                                static_cast<Eigen::Index>(row.beta.size()));
    spec.censor_rate_param = row.lambda_c;
    spec.tau0 = row.tau0;
    spec.tau = row.tau;
    spec.error_sd = error_sds[model - 2][error_level - 1];
    spec.n = n;
    spec.cure_rate = row.cure;
    spec.cens_rate = row.cens;
    std::ostringstream label;
    label << model << "/" << scenario << " v=";
    if (spec.error_sd.size() == 1)
        label << spec.error_sd[0];
    else
        label << "(" << spec.error_sd[0] << "," << spec.error_sd[1] << ")";
    spec.label = label.str();
    return spec;
}

std::vector<ScenarioSpec> all_presets() {
    std::vector<ScenarioSpec> out;
    for (int setting = 1; setting <= 3; ++setting)
        for (int scenario = 1; scenario <= 2; ++scenario)
            for (int cens = 1; cens <= 2; ++cens)
                out.push_back(model1_preset(setting, scenario, cens));
    for (int model = 2; model <= 5; ++model)
        for (int scenario = 1; scenario <= 3; ++scenario)
            out.push_back(model_preset(model, scenario, 2));
    return out;
}

const char* study_method_name(StudyMethod m) {
    switch (m) {
        case StudyMethod::naive_mle: return "naive-mle";
        case StudyMethod::naive_presmooth: return "naive-presmooth";
        case StudyMethod::simex_mle: return "simex-mle";
        case StudyMethod::simex_presmooth: return "simex-presmooth";
    }
    return "unknown";
}

StudyMethod study_method_from_name(const std::string& name) {
    if (name == "naive-mle") return StudyMethod::naive_mle;
    if (name == "naive-presmooth") return StudyMethod::naive_presmooth;
    if (name == "simex-mle") return StudyMethod::simex_mle;
    if (name == "simex-presmooth") return StudyMethod::simex_presmooth;
    throw std::invalid_argument("unknown study method: " + name);
}

}  // namespace curesimex

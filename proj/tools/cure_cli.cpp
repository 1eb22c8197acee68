// Batch front door: fitting, SIMEX correction, simulation, Monte Carlo
// studies and bootstrap inference over CSV datasets.
//
// Exit codes: 0 success, 2 invalid input, 3 estimation failure.

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "curesimex/em.hpp"
#include "curesimex/inference.hpp"
#include "curesimex/io.hpp"
#include "curesimex/mclab.hpp"
#include "curesimex/model.hpp"
#include "curesimex/parallel.hpp"
#include "curesimex/presmooth.hpp"
#include "curesimex/rng.hpp"
#include "curesimex/simex.hpp"

namespace {

using namespace curesimex;

std::string trim_copy(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    std::stringstream ss(s);
    while (std::getline(ss, cur, ',')) {
        cur = trim_copy(cur);
        if (!cur.empty()) out.push_back(cur);
    }
    return out;
}

double parse_double_strict(const std::string& s, const std::string& what) {
    const char* b = s.data();
    const char* e = b + s.size();
    double v = 0.0;
    auto res = std::from_chars(b, e, v);
    if (s.empty() || res.ec != std::errc() || res.ptr != e || !std::isfinite(v))
        throw std::invalid_argument(what + ": cannot parse number `" + s + "`");
    return v;
}

std::vector<double> parse_double_list(const std::string& s, const std::string& what) {
    std::vector<double> out;
    for (const auto& tok : split_list(s)) out.push_back(parse_double_strict(tok, what));
    if (out.empty()) throw std::invalid_argument(what + ": expected at least one value");
    return out;
}

// a covariate referenced by header name or 0-based index
int resolve_column(const Dataset& data, const std::string& token) {
    for (std::size_t j = 0; j < data.column_names.size(); ++j)
        if (data.column_names[j] == token) return static_cast<int>(j);
    const char* b = token.data();
    const char* e = b + token.size();
    int idx = -1;
    auto res = std::from_chars(b, e, idx);
    if (token.empty() || res.ec != std::errc() || res.ptr != e)
        throw std::invalid_argument("unknown covariate `" + token + "`");
    if (idx < 0 || static_cast<std::size_t>(idx) >= data.dim())
        throw std::invalid_argument("covariate index " + token + " out of range");
    return idx;
}

std::vector<int> resolve_columns(const Dataset& data, const std::string& list,
                                 const std::string& flag) {
    auto tokens = split_list(list);
    if (tokens.empty()) throw std::invalid_argument(flag + ": expected at least one covariate");
    std::vector<int> out;
    out.reserve(tokens.size());
    for (const auto& t : tokens) out.push_back(resolve_column(data, t));
    return out;
}

std::string join_doubles(const std::vector<double>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ',';
        out += format_double(v[i]);
    }
    return out;
}

std::string join_vector(const VectorXd& v) {
    std::string out;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (i) out += ',';
        out += format_double(v(i));
    }
    return out;
}

std::string column_label(const Dataset& data, int idx) {
    if (static_cast<std::size_t>(idx) < data.column_names.size() &&
        !data.column_names[static_cast<std::size_t>(idx)].empty())
        return data.column_names[static_cast<std::size_t>(idx)];
    return "x" + std::to_string(idx + 1);
}

// worker count: flag beats the CURE_JOBS environment variable beats all cores
int resolve_worker_count(bool flag_given, int flag_value) {
    if (flag_given) return resolve_jobs(flag_value);
    if (const char* env = std::getenv("CURE_JOBS")) {
        std::string s = trim_copy(env);
        const char* b = s.data();
        const char* e = b + s.size();
        int v = 0;
        auto res = std::from_chars(b, e, v);
        if (s.empty() || res.ec != std::errc() || res.ptr != e)
            throw std::invalid_argument("CURE_JOBS must be an integer, got `" + s + "`");
        return resolve_jobs(v);
    }
    return resolve_jobs(0);
}

void emit_output(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-")
        std::cout << text;
    else
        write_text_file(path, text);
}

// square covariance matrix as comment-tolerant CSV, one row per line
MatrixXd read_cov_csv(const std::string& path, std::size_t dim) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path);
    std::vector<std::vector<double>> rows;
    std::string raw;
    int line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        std::string line = trim_copy(raw);
        if (line.empty() || line[0] == '#') continue;
        std::vector<double> row;
        for (const auto& cell : split_list(line)) {
            try {
                row.push_back(parse_double_strict(cell, "covariance entry"));
            } catch (const std::invalid_argument& ex) {
                throw ParseError("line " + std::to_string(line_no) + ": " + ex.what());
            }
        }
        if (row.size() != dim)
            throw ParseError("line " + std::to_string(line_no) + ": expected " +
                             std::to_string(dim) + " entries, got " + std::to_string(row.size()));
        rows.push_back(std::move(row));
    }
    if (rows.size() != dim)
        throw ParseError(path + ": expected " + std::to_string(dim) + " rows, got " +
                         std::to_string(rows.size()));
    MatrixXd V(dim, dim);
    for (std::size_t i = 0; i < dim; ++i)
        for (std::size_t j = 0; j < dim; ++j) V(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    return V;
}

VectorXd concat(const VectorXd& a, const VectorXd& b) {
    VectorXd out(a.size() + b.size());
    out << a, b;
    return out;
}

// ---- shared flag bundles -------------------------------------------------

struct DataArgs {
    std::string data_path;
    std::string incidence;
    std::string latency;
    std::string method = "mle";
    std::string center;
    double tau0 = 0.0;
    double bandwidth = 0.0;
    CLI::Option* tau0_opt = nullptr;
    CLI::Option* bandwidth_opt = nullptr;
};

void add_data_flags(CLI::App* sub, DataArgs& a) {
    sub->add_option("--data", a.data_path, "input CSV (time,status,<covariates...>)")->required();
    sub->add_option("--incidence", a.incidence,
                    "comma-separated covariates of the cure-probability part (names or 0-based indices)")
        ->required();
    sub->add_option("--latency", a.latency,
                    "comma-separated covariates of the survival part (names or 0-based indices)")
        ->required();
    sub->add_option("--method", a.method, "fitting method")
        ->check(CLI::IsMember({"mle", "presmooth"}))
        ->capture_default_str();
    sub->add_option("--center", a.center,
                    "comma-separated covariates to mean-center before fitting")
        ->capture_default_str();
    a.tau0_opt = sub->add_option("--tau0", a.tau0,
                                 "cure threshold time (default: largest event time)");
    a.bandwidth_opt = sub->add_option(
        "--bandwidth", a.bandwidth,
        "presmoothing kernel bandwidth (default: cross-validated)");
}

struct SimexArgs {
    std::string error_sd;
    std::string error_cov;
    std::string lambdas = "0,0.5,1,1.5,2";
    int B = 50;
    std::string extrapolant = "quadratic";
    bool isotonize = true;
    std::uint64_t seed = 1;
};

void add_simex_flags(CLI::App* sub, SimexArgs& a) {
    sub->add_option("--error-sd", a.error_sd,
                    "comma-separated measurement-error sd per covariate column (0 = error-free)");
    sub->add_option("--error-cov", a.error_cov, "CSV file with the full error covariance matrix");
    sub->add_option("--lambdas", a.lambdas, "added-noise multipliers")->capture_default_str();
    sub->add_option("--B", a.B, "contaminated replicates per lambda")->capture_default_str();
    sub->add_option("--extrapolant", a.extrapolant, "extrapolation curve")
        ->check(CLI::IsMember({"linear", "quadratic", "cubic"}))
        ->capture_default_str();
    sub->add_flag("--isotonize,!--no-isotonize", a.isotonize,
                  "restore monotonicity of the extrapolated baseline hazard")
        ->capture_default_str();
}

struct JobsArg {
    int jobs = 0;
    CLI::Option* opt = nullptr;
};

void add_jobs_flag(CLI::App* sub, JobsArg& a) {
    a.opt = sub->add_option(
        "--jobs", a.jobs,
        "worker threads, 0 = all cores (default: CURE_JOBS environment variable, else 0)");
}

// ---- shared assembly -----------------------------------------------------

struct PreparedData {
    Dataset data;
    ModelLayout layout;
    ConfigMap cfg;
    EmOptions em;
    std::optional<double> pinned_bandwidth;  // presmooth only
};

PreparedData prepare(const DataArgs& a, const char* command) {
    PreparedData p;
    p.data = ingest_csv(a.data_path);
    p.layout.incidence_idx = resolve_columns(p.data, a.incidence, "--incidence");
    p.layout.latency_idx = resolve_columns(p.data, a.latency, "--latency");
    p.cfg["command"] = command;
    p.cfg["data"] = a.data_path;
    p.cfg["incidence"] = a.incidence;
    p.cfg["latency"] = a.latency;
    p.cfg["method"] = a.method;
    p.cfg["center"] = a.center;
    if (!a.center.empty()) {
        auto cols = resolve_columns(p.data, a.center, "--center");
        auto means = center_columns(p.data, cols);
        p.cfg["center_means"] = join_doubles(means);
    }
    if (a.tau0_opt->count() > 0) {
        p.em.tau0_override = a.tau0;
        p.cfg["tau0"] = format_double(a.tau0);
    } else {
        p.cfg["tau0"] = "max-event";
    }
    if (a.method == "presmooth") {
        PresmoothOptions po;
        po.em = p.em;
        if (a.bandwidth_opt->count() > 0) po.bandwidth = a.bandwidth;
        // resolved once here so contaminated or resampled refits share it
        p.pinned_bandwidth = presmooth_bandwidth(p.data, p.layout, po);
        p.cfg["bandwidth"] = format_double(*p.pinned_bandwidth);
    }
    return p;
}

Fitter make_fitter(const PreparedData& p) {
    EmOptions em = p.em;
    if (p.pinned_bandwidth) {
        PresmoothOptions po;
        po.em = em;
        po.bandwidth = *p.pinned_bandwidth;
        return [po](const Dataset& d, const ModelLayout& l) { return fit_presmooth(d, l, po); };
    }
    return [em](const Dataset& d, const ModelLayout& l) { return fit_mle(d, l, em); };
}

MatrixXd resolve_error_cov(const PreparedData& p, const SimexArgs& a, ConfigMap& cfg) {
    const std::size_t d = p.data.dim();
    if (!a.error_sd.empty() && !a.error_cov.empty())
        throw std::invalid_argument("--error-sd and --error-cov are mutually exclusive");
    if (!a.error_sd.empty()) {
        auto sds = parse_double_list(a.error_sd, "--error-sd");
        if (sds.size() != d)
            throw std::invalid_argument("--error-sd needs one value per covariate column (" +
                                        std::to_string(d) + ")");
        cfg["error_sd"] = join_doubles(sds);
        MatrixXd V = MatrixXd::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
        for (std::size_t j = 0; j < d; ++j)
            V(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(j)) = sds[j] * sds[j];
        return V;
    }
    if (!a.error_cov.empty()) {
        cfg["error_cov"] = a.error_cov;
        return read_cov_csv(a.error_cov, d);
    }
    throw std::invalid_argument("specify --error-sd or --error-cov");
}

void record_simex_config(const SimexArgs& a, const SimexOptions& so, ConfigMap& cfg) {
    cfg["lambdas"] = join_doubles(so.lambdas);
    cfg["B"] = std::to_string(so.B);
    cfg["extrapolant"] = a.extrapolant;
    cfg["isotonize"] = so.isotonize ? "true" : "false";
    cfg["seed"] = std::to_string(so.seed);
}

// ---- subcommands ---------------------------------------------------------

struct FitCmd {
    DataArgs data;
    std::string out;
    std::string km_out;
};

int run_fit(const FitCmd& c) {
    PreparedData p = prepare(c.data, "fit");
    CureFit fit;
    if (p.pinned_bandwidth) {
        PresmoothOptions po;
        po.em = p.em;
        po.bandwidth = *p.pinned_bandwidth;
        fit = fit_presmooth(p.data, p.layout, po);
    } else {
        fit = fit_mle(p.data, p.layout, p.em);
    }
    emit_output(c.out, fit_to_json(fit, p.cfg));
    if (!c.km_out.empty()) write_text_file(c.km_out, km_to_csv(kaplan_meier(p.data)));
    return 0;
}

struct SimexCmd {
    DataArgs data;
    SimexArgs simex;
    JobsArg jobs;
    std::string out;
};

int run_simex_cmd(const SimexCmd& c) {
    PreparedData p = prepare(c.data, "simex");
    p.layout.error_cov = resolve_error_cov(p, c.simex, p.cfg);
    SimexOptions so;
    so.lambdas = parse_double_list(c.simex.lambdas, "--lambdas");
    so.B = c.simex.B;
    so.extrapolant = extrapolant_from_name(c.simex.extrapolant);
    so.isotonize = c.simex.isotonize;
    so.seed = c.simex.seed;
    so.jobs = resolve_worker_count(c.jobs.opt->count() > 0, c.jobs.jobs);
    record_simex_config(c.simex, so, p.cfg);
    SimexResult res = run_simex(p.data, p.layout, make_fitter(p), so);
    emit_output(c.out, simex_to_json(res, p.cfg));
    return 0;
}

struct SimulateCmd {
    int model = 1;
    int setting = 1;
    int scenario = 1;
    int cens = 1;
    int error_level = 2;
    std::string v;
    int n = 200;
    std::uint64_t seed = 1;
    std::string error_kind = "normal";
    int error_df = 5;
    std::string out;
    std::string latent_out;
};

int run_simulate(const SimulateCmd& c) {
    ScenarioSpec spec;
    ConfigMap cfg;
    cfg["command"] = "simulate";
    cfg["model"] = std::to_string(c.model);
    if (c.model == 1) {
        double v = 0.7;
        if (!c.v.empty()) {
            auto vs = parse_double_list(c.v, "--v");
            if (vs.size() != 1) throw std::invalid_argument("--v: model 1 has one mismeasured covariate");
            v = vs[0];
        }
        spec = model1_preset(c.setting, c.scenario, c.cens, v, c.n);
        cfg["setting"] = std::to_string(c.setting);
        cfg["scenario"] = std::to_string(c.scenario);
        cfg["cens"] = std::to_string(c.cens);
    } else {
        spec = model_preset(c.model, c.scenario, c.error_level, c.n);
        if (!c.v.empty()) {
            auto vs = parse_double_list(c.v, "--v");
            if (vs.size() != spec.error_sd.size())
                throw std::invalid_argument("--v: model " + std::to_string(c.model) + " expects " +
                                            std::to_string(spec.error_sd.size()) + " value(s)");
            spec.error_sd = vs;
        }
        cfg["scenario"] = std::to_string(c.scenario);
        cfg["error_level"] = std::to_string(c.error_level);
    }
    spec.error_kind = error_kind_from_name(c.error_kind);
    spec.error_df = c.error_df;
    cfg["v"] = join_doubles(spec.error_sd);
    cfg["n"] = std::to_string(spec.n);
    cfg["seed"] = std::to_string(c.seed);
    cfg["error_kind"] = c.error_kind;
    cfg["error_df"] = std::to_string(c.error_df);
    cfg["gamma_true"] = join_vector(spec.gamma_true);
    cfg["beta_true"] = join_vector(spec.beta_true);
    cfg["censor_rate"] = format_double(spec.censor_rate_param);
    cfg["tau0"] = format_double(spec.tau0);
    cfg["tau"] = format_double(spec.tau);

    // replicate 0 of a study with the same seed sees exactly this dataset
    RngStream rng = substream(c.seed, 0);
    auto [observed, latent] = generate(spec, rng);
    ConfigMap cfg_obs = cfg;
    cfg_obs["content"] = "observed";
    emit_output(c.out, dataset_to_csv(observed, cfg_obs));
    if (!c.latent_out.empty()) {
        ConfigMap cfg_lat = cfg;
        cfg_lat["content"] = "latent";
        write_text_file(c.latent_out, dataset_to_csv(latent, cfg_lat));
    }
    return 0;
}

struct McRunCmd {
    std::string config_path;
    int replicates = 500;
    std::uint64_t seed = 1;
    JobsArg jobs;
    std::string out;
};

int run_mc_run(const McRunCmd& c) {
    auto arms = parse_study_config(c.config_path);
    int jobs = resolve_worker_count(c.jobs.opt->count() > 0, c.jobs.jobs);
    std::vector<StudyRow> rows;
    for (const auto& arm : arms) {
        StudyOptions opts = arm.options;
        opts.jobs = jobs;
        McSummary s = run_study(arm.spec, arm.method, c.replicates, opts, c.seed);
        for (const auto& param : s.params)
            rows.push_back({param.name, arm.name, param.bias, param.variance, param.mse});
    }
    ConfigMap cfg;
    cfg["command"] = "mc-run";
    cfg["config"] = c.config_path;
    cfg["replicates"] = std::to_string(c.replicates);
    cfg["seed"] = std::to_string(c.seed);
    emit_output(c.out, study_rows_to_csv(rows, cfg));
    return 0;
}

struct BootstrapCmd {
    DataArgs data;
    SimexArgs simex;
    JobsArg jobs;
    bool use_simex = false;
    int n_boot = 1000;
    std::uint64_t seed = 1;
    std::string out;
};

int run_bootstrap(const BootstrapCmd& c) {
    PreparedData p = prepare(c.data, "bootstrap");
    p.cfg["simex"] = c.use_simex ? "true" : "false";
    p.cfg["n_boot"] = std::to_string(c.n_boot);
    p.cfg["seed"] = std::to_string(c.seed);

    Fitter base = make_fitter(p);
    auto flat = [](const CureFit& f) {
        if (f.incidence_diverged || f.latency_diverged)
            throw std::runtime_error("fit diverged");
        return concat(f.gamma, f.beta);
    };
    ParamFitter pf;
    if (c.use_simex) {
        p.layout.error_cov = resolve_error_cov(p, c.simex, p.cfg);
        SimexOptions so;
        so.lambdas = parse_double_list(c.simex.lambdas, "--lambdas");
        so.B = c.simex.B;
        so.extrapolant = extrapolant_from_name(c.simex.extrapolant);
        so.isotonize = c.simex.isotonize;
        so.seed = c.simex.seed;  // replaced per resample below
        so.jobs = 1;
        record_simex_config(c.simex, so, p.cfg);
        p.cfg["seed"] = std::to_string(c.seed);  // bootstrap seed wins the echo
        pf = [base, so](const Dataset& d, const ModelLayout& l, std::uint64_t seed) {
            SimexOptions with_seed = so;
            with_seed.seed = seed;
            SimexResult r = run_simex(d, l, base, with_seed);
            return concat(r.gamma_simex, r.beta_simex);
        };
    } else {
        pf = [base, flat](const Dataset& d, const ModelLayout& l, std::uint64_t) {
            return flat(base(d, l));
        };
    }

    int jobs = resolve_worker_count(c.jobs.opt->count() > 0, c.jobs.jobs);
    BootstrapReport rep = bootstrap_sd(p.data, p.layout, pf, c.n_boot, c.seed, jobs);

    std::vector<std::string> names;
    names.push_back("gamma_intercept");
    for (int idx : p.layout.incidence_idx) names.push_back("gamma_" + column_label(p.data, idx));
    for (int idx : p.layout.latency_idx) names.push_back("beta_" + column_label(p.data, idx));
    emit_output(c.out, bootstrap_to_json(rep, names, p.cfg));
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"mixture cure model fitting with measurement-error correction"};
    app.require_subcommand(1);

    FitCmd fit_cmd;
    CLI::App* fit_sub = app.add_subcommand("fit", "fit a cure model to a CSV dataset");
    add_data_flags(fit_sub, fit_cmd.data);
    fit_sub->add_option("--out", fit_cmd.out, "output JSON path (default: stdout)")
        ->capture_default_str();
    fit_sub->add_option("--km-out", fit_cmd.km_out, "also write the Kaplan-Meier curve as CSV")
        ->capture_default_str();

    SimexCmd simex_cmd;
    CLI::App* simex_sub =
        app.add_subcommand("simex", "measurement-error-corrected fit via simulation extrapolation");
    add_data_flags(simex_sub, simex_cmd.data);
    add_simex_flags(simex_sub, simex_cmd.simex);
    simex_sub->add_option("--seed", simex_cmd.simex.seed, "master random seed")
        ->capture_default_str();
    add_jobs_flag(simex_sub, simex_cmd.jobs);
    simex_sub->add_option("--out", simex_cmd.out, "output JSON path (default: stdout)")
        ->capture_default_str();

    SimulateCmd sim_cmd;
    CLI::App* sim_sub = app.add_subcommand("simulate", "draw one dataset from a study preset");
    sim_sub->add_option("--model", sim_cmd.model, "covariate design 1-5")->capture_default_str();
    sim_sub->add_option("--setting", sim_cmd.setting, "incidence-strength setting (model 1)")
        ->capture_default_str();
    sim_sub->add_option("--scenario", sim_cmd.scenario, "cure-rate scenario")->capture_default_str();
    sim_sub->add_option("--cens", sim_cmd.cens, "censoring level (model 1)")->capture_default_str();
    sim_sub->add_option("--error-level", sim_cmd.error_level, "error-sd level (models 2-5)")
        ->capture_default_str();
    sim_sub->add_option("--v", sim_cmd.v, "override the measurement-error sd(s)")
        ->capture_default_str();
    sim_sub->add_option("--n", sim_cmd.n, "sample size")->capture_default_str();
    sim_sub->add_option("--seed", sim_cmd.seed, "master random seed")->capture_default_str();
    sim_sub->add_option("--error-kind", sim_cmd.error_kind, "true error distribution")
        ->check(CLI::IsMember({"normal", "uniform", "student_t", "chi_squared"}))
        ->capture_default_str();
    sim_sub->add_option("--error-df", sim_cmd.error_df, "degrees of freedom for t / chi-squared")
        ->capture_default_str();
    sim_sub->add_option("--out", sim_cmd.out, "observed-data CSV path (default: stdout)")
        ->capture_default_str();
    sim_sub->add_option("--latent-out", sim_cmd.latent_out,
                        "also write the latent error-free dataset")
        ->capture_default_str();

    McRunCmd mc_cmd;
    CLI::App* mc_sub = app.add_subcommand("mc-run", "run the study arms of a config file");
    mc_sub->add_option("--config", mc_cmd.config_path, "declarative study config (INI sections)")
        ->required();
    mc_sub->add_option("--replicates", mc_cmd.replicates, "Monte Carlo replicates per arm")
        ->capture_default_str();
    mc_sub->add_option("--seed", mc_cmd.seed, "master random seed")->capture_default_str();
    add_jobs_flag(mc_sub, mc_cmd.jobs);
    mc_sub->add_option("--out", mc_cmd.out, "output CSV path (default: stdout)")
        ->capture_default_str();

    BootstrapCmd boot_cmd;
    CLI::App* boot_sub =
        app.add_subcommand("bootstrap", "nonparametric bootstrap standard errors and Wald tests");
    add_data_flags(boot_sub, boot_cmd.data);
    boot_sub->add_flag("--simex", boot_cmd.use_simex, "bootstrap the corrected estimator")
        ->capture_default_str();
    add_simex_flags(boot_sub, boot_cmd.simex);
    add_jobs_flag(boot_sub, boot_cmd.jobs);
    boot_sub->add_option("--n-boot", boot_cmd.n_boot, "bootstrap resamples")->capture_default_str();
    boot_sub->add_option("--seed", boot_cmd.seed, "master random seed")->capture_default_str();
    boot_sub->add_option("--out", boot_cmd.out, "output JSON path (default: stdout)")
        ->capture_default_str();

    try {
        app.parse(argc, argv);
        // a malformed CURE_JOBS value is diagnosed for every subcommand,
        // including the single-threaded ones that never act on it
        (void)resolve_worker_count(false, 0);
        if (fit_sub->parsed()) return run_fit(fit_cmd);
        if (simex_sub->parsed()) return run_simex_cmd(simex_cmd);
        if (sim_sub->parsed()) return run_simulate(sim_cmd);
        if (mc_sub->parsed()) return run_mc_run(mc_cmd);
        if (boot_sub->parsed()) return run_bootstrap(boot_cmd);
        return 2;
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::runtime_error& e) {
        std::cerr << "estimation failed: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}

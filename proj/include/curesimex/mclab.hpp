#pragma once

#include <string>
#include <utility>

#include "curesimex/presmooth.hpp"
#include "curesimex/simex.hpp"

namespace curesimex {

// distribution of the measurement error added by the generator; the SIMEX
// engine itself always injects Gaussian noise
enum class ErrorKind { normal, uniform, student_t, chi_squared };

struct ScenarioSpec {
    int model_id = 1;  // 1..5, selects the covariate design below
    VectorXd gamma_true;
    VectorXd beta_true;
    double weibull_rho = 1.75;
    double weibull_mu = 1.5;
    double censor_rate_param = 0.0;  // exponential censoring rate
    double tau0 = 0.0;               // event-time truncation bound
    double tau = 0.0;                // censoring-time truncation bound
    std::vector<double> error_sd;    // sd per mismeasured covariate, model order
    int n = 200;
    std::string label;
    ErrorKind error_kind = ErrorKind::normal;
    int error_df = 5;       // t / chi-squared degrees of freedom
    double cure_rate = 0.0;  // table metadata, used by rate checks
    double cens_rate = 0.0;

    void validate() const {
        if (model_id < 1 || model_id > 5) throw std::invalid_argument("model_id must be 1..5");
        if (!(censor_rate_param > 0.0))
            throw std::invalid_argument("censoring rate parameter must be positive");
        if (!(tau0 < tau)) throw std::invalid_argument("tau0 must be below tau");
        if (n < 1) throw std::invalid_argument("sample size must be positive");
    }
};

struct ParamSummary {
    std::string name;
    double bias = 0.0;      // unscaled; multiply by 100 for table layout
    double variance = 0.0;
    double mse = 0.0;       // bias^2 + variance, exact by construction
};

struct McSummary {
    std::vector<ParamSummary> params;
    int replicates = 0;  // successful replicates entering the summary
    int failures = 0;
};

enum class StudyMethod { naive_mle, naive_presmooth, simex_mle, simex_presmooth };

struct StudyOptions {
    SimexOptions simex;          // seed ignored; per-replicate seeds are derived
    PresmoothOptions presmooth;
    EmOptions em;
    int jobs = 1;                // worker threads over replicates; 0 = all cores
    // fitting-side error sd overrides (variance-misspecification studies);
    // empty = use the generating spec's error_sd
    std::vector<double> specified_error_sd;
};

// covariate columns, component indices and error covariance implied by the
// scenario's model; honors the override when given
ModelLayout layout_for(const ScenarioSpec& spec,
                       const std::vector<double>& error_sd_override = {});

// one simulated dataset: observed covariates (with measurement error) plus a
// latent-truth copy carrying the error-free covariates and the cure status
// in an extra trailing column named "uncured".  All latent draws happen
// before any error draw, so the latent data is invariant across error
// settings that share a seed.
std::pair<Dataset, Dataset> generate(const ScenarioSpec& spec, RngStream& rng);

// one mean-zero draw with standard deviation v from the requested family
double perturbed_error_sampler(ErrorKind kind, double v, int df, RngStream& rng);

// bias/variance/MSE per coordinate; variance uses denominator R so that
// mse = bias^2 + variance holds exactly
McSummary summarize(const std::vector<VectorXd>& estimates, const VectorXd& truth,
                    const std::vector<std::string>& names = {});

McSummary run_study(const ScenarioSpec& spec, StudyMethod method, int replicates,
                    const StudyOptions& opts, std::uint64_t seed);

// named presets mirroring the published parameter tables
ScenarioSpec model1_preset(int setting, int scenario, int cens_level, double v = 0.7,
                           int n = 200);
ScenarioSpec model_preset(int model, int scenario, int error_level, int n = 200);
std::vector<ScenarioSpec> all_presets();

const char* study_method_name(StudyMethod m);
StudyMethod study_method_from_name(const std::string& name);

}  // namespace curesimex

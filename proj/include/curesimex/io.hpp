#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "curesimex/inference.hpp"
#include "curesimex/mclab.hpp"
#include "curesimex/simex.hpp"

namespace curesimex {

// malformed input; what() names the offending physical line when row-level
struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// failed write (unwritable path, full disk)
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// resolved run settings, echoed into every output for reproducibility;
// std::map keeps the emitted key order deterministic
using ConfigMap = std::map<std::string, std::string>;

// CSV with header `time,status,<covariate names...>`; '#' lines and blank
// lines are skipped but still count toward physical line numbers
Dataset ingest_csv(const std::string& path);

// inverse of ingest_csv; digits chosen so a round trip is value-exact.
// A non-empty config is embedded as a leading `# config <json>` line.
std::string dataset_to_csv(const Dataset& data, const ConfigMap& config = {});

// subtracts each listed covariate column's mean in place; returns the means
std::vector<double> center_columns(Dataset& data, const std::vector<int>& cols);

std::string fit_to_json(const CureFit& fit, const ConfigMap& config);
std::string simex_to_json(const SimexResult& result, const ConfigMap& config);
std::string bootstrap_to_json(const BootstrapReport& report,
                              const std::vector<std::string>& names,
                              const ConfigMap& config);

// one table row of a simulation study, unscaled; emission multiplies by 100
struct StudyRow {
    std::string parameter;
    std::string method;
    double bias = 0.0;
    double variance = 0.0;
    double mse = 0.0;
};

// `# config <json>` line, then header parameter,method,bias_x100,var_x100,mse_x100
std::string study_rows_to_csv(const std::vector<StudyRow>& rows, const ConfigMap& config);

// survival curve as two-column CSV (t,S) starting from the value at t=0
std::string km_to_csv(const StepFunction& survival);

void write_text_file(const std::string& path, const std::string& text);

// one section of a declarative study config file
struct StudyArm {
    std::string name;
    ScenarioSpec spec;
    StudyMethod method = StudyMethod::naive_mle;
    StudyOptions options;
};

// INI-style sections: `[arm-name]` followed by `key = value` lines.
// Keys: model, setting, scenario, cens (model 1), error_level (models 2-5),
// v, n, method, error_kind, error_df, B, lambdas, extrapolant, isotonize,
// specified_error_sd, bandwidth.
std::vector<StudyArm> parse_study_config(const std::string& path);

// shortest decimal form that parses back to the same double
std::string format_double(double x);

// name mappers shared by flag parsing and config echo; unknown names throw
// std::invalid_argument
const char* error_kind_name(ErrorKind kind);
ErrorKind error_kind_from_name(const std::string& name);
const char* extrapolant_name(Extrapolant kind);
Extrapolant extrapolant_from_name(const std::string& name);

}  // namespace curesimex

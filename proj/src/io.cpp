#include "curesimex/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <utility>

#include <json.hpp>

namespace curesimex {

namespace {

using nlohmann::json;

// shortest representation that parses back to the same double
std::string fmt(double x) {
    char buf[40];
    auto res = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, res.ptr);
}

std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::stringstream ss(line);
    while (std::getline(ss, cur, sep)) out.push_back(trim(cur));
    if (!line.empty() && line.back() == sep) out.push_back("");
    return out;
}

ParseError at_line(int line_no, const std::string& msg) {
    return ParseError("line " + std::to_string(line_no) + ": " + msg);
}

double parse_double_cell(const std::string& cell, int line_no, const char* what) {
    if (cell.empty()) throw at_line(line_no, std::string("empty ") + what + " cell");
    const char* b = cell.data();
    const char* e = b + cell.size();
    double v = 0.0;
    auto res = std::from_chars(b, e, v);
    if (res.ec != std::errc() || res.ptr != e)
        throw at_line(line_no, std::string("cannot parse ") + what + " `" + cell + "`");
    if (!std::isfinite(v))
        throw at_line(line_no, std::string("non-finite ") + what + " `" + cell + "`");
    return v;
}

json vec_json(const VectorXd& v) {
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
    return a;
}

json step_json(const StepFunction& f) {
    json a = json::array();
    for (std::size_t i = 0; i < f.times.size(); ++i)
        a.push_back(json{{"t", f.times[i]}, {"value", f.values[i]}});
    return a;
}

json config_json(const ConfigMap& m) {
    json o = json::object();
    for (const auto& [k, v] : m) o[k] = v;
    return o;
}

json fit_body(const CureFit& fit) {
    json j;
    j["gamma"] = vec_json(fit.gamma);
    j["beta"] = vec_json(fit.beta);
    j["baseline"] = step_json(fit.baseline);
    j["tau0"] = fit.tau0;
    j["converged"] = fit.converged;
    j["iterations"] = fit.iterations;
    j["loglik"] = fit.loglik;
    j["incidence_diverged"] = fit.incidence_diverged;
    j["latency_diverged"] = fit.latency_diverged;
    return j;
}

}  // namespace

Dataset ingest_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    Dataset data;
    std::string raw;
    int line_no = 0;
    bool have_header = false;
    std::size_t nfields = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        std::string line = trim(raw);
        if (line.empty() || line[0] == '#') continue;
        auto cells = split(line, ',');
        if (!have_header) {
            if (cells.size() < 2 || cells[0] != "time" || cells[1] != "status")
                throw at_line(line_no, "header must be `time,status,<covariates...>`");
            for (std::size_t i = 2; i < cells.size(); ++i) {
                if (cells[i].empty()) throw at_line(line_no, "empty covariate name");
                data.column_names.push_back(cells[i]);
            }
            nfields = cells.size();
            have_header = true;
            continue;
        }
        if (cells.size() != nfields)
            throw at_line(line_no, "expected " + std::to_string(nfields) + " fields, got " +
                                       std::to_string(cells.size()));
        SurvivalRecord rec;
        rec.y = parse_double_cell(cells[0], line_no, "time");
        if (rec.y < 0.0) throw at_line(line_no, "negative time");
        double st = parse_double_cell(cells[1], line_no, "status");
        if (st != 0.0 && st != 1.0) throw at_line(line_no, "status must be 0 or 1");
        rec.delta = static_cast<int>(st);
        rec.w.reserve(nfields - 2);
        for (std::size_t i = 2; i < cells.size(); ++i)
            rec.w.push_back(parse_double_cell(cells[i], line_no, "covariate"));
        data.records.push_back(std::move(rec));
    }
    if (!have_header) throw ParseError(path + ": missing header row");
    data.validate();
    return data;
}

std::string dataset_to_csv(const Dataset& data, const ConfigMap& config) {
    std::string out;
    if (!config.empty()) out += "# config " + config_json(config).dump() + "\n";
    out += "time,status";
    const std::size_t d = data.dim();
    for (std::size_t j = 0; j < d; ++j) {
        out += ',';
        out += (j < data.column_names.size() && !data.column_names[j].empty())
                   ? data.column_names[j]
                   : "x" + std::to_string(j + 1);
    }
    out += '\n';
    for (const auto& rec : data.records) {
        out += fmt(rec.y);
        out += rec.delta ? ",1" : ",0";
        for (double v : rec.w) {
            out += ',';
            out += fmt(v);
        }
        out += '\n';
    }
    return out;
}

std::vector<double> center_columns(Dataset& data, const std::vector<int>& cols) {
    if (data.records.empty()) throw std::invalid_argument("center_columns: empty dataset");
    if (cols.empty()) throw std::invalid_argument("center_columns: no columns selected");
    const std::size_t d = data.dim();
    std::vector<double> means;
    means.reserve(cols.size());
    for (int c : cols) {
        if (c < 0 || static_cast<std::size_t>(c) >= d)
            throw std::invalid_argument("center_columns: column index out of range");
        double mean = 0.0;
        for (const auto& rec : data.records) mean += rec.w[static_cast<std::size_t>(c)];
        mean /= static_cast<double>(data.records.size());
        for (auto& rec : data.records) rec.w[static_cast<std::size_t>(c)] -= mean;
        means.push_back(mean);
    }
    return means;
}

std::string fit_to_json(const CureFit& fit, const ConfigMap& config) {
    json j = fit_body(fit);
    j["config"] = config_json(config);
    return j.dump(2) + "\n";
}

std::string simex_to_json(const SimexResult& result, const ConfigMap& config) {
    json j;
    j["gamma"] = vec_json(result.gamma_simex);
    j["beta"] = vec_json(result.beta_simex);
    j["baseline"] = step_json(result.baseline_simex);
    // the anchor fit's bookkeeping doubles as the pipeline's
    j["converged"] = result.naive_fit.converged;
    j["iterations"] = result.naive_fit.iterations;
    j["loglik"] = result.naive_fit.loglik;
    json levels = json::array();
    for (const auto& af : result.per_lambda) {
        levels.push_back(json{{"lambda", af.lambda},
                              {"gamma_bar", vec_json(af.gamma_bar)},
                              {"beta_bar", vec_json(af.beta_bar)},
                              {"baseline", step_json(af.lambda_bar)}});
    }
    j["per_lambda"] = levels;
    json coeffs = json::array();
    for (const auto& c : result.extrap_coeffs) coeffs.push_back(vec_json(c));
    j["extrap_coeffs"] = coeffs;
    j["baseline_was_monotone"] = result.baseline_was_monotone;
    j["n_failed"] = result.n_failed;
    j["naive"] = fit_body(result.naive_fit);
    j["config"] = config_json(config);
    return j.dump(2) + "\n";
}

std::string bootstrap_to_json(const BootstrapReport& report,
                              const std::vector<std::string>& names,
                              const ConfigMap& config) {
    const auto m = static_cast<std::size_t>(report.estimates.size());
    if (!names.empty() && names.size() != m)
        throw std::invalid_argument("bootstrap_to_json: one name per parameter expected");
    json jp = json::array();
    for (std::size_t i = 0; i < m; ++i) {
        json entry;
        entry["name"] = names.empty() ? "param_" + std::to_string(i + 1) : names[i];
        entry["estimate"] = report.estimates(static_cast<Eigen::Index>(i));
        entry["sd"] = report.sd(static_cast<Eigen::Index>(i));
        entry["p_value"] = report.p_values(static_cast<Eigen::Index>(i));
        jp.push_back(entry);
    }
    json j;
    j["parameters"] = jp;
    j["n_boot"] = report.n_boot;
    j["n_failed"] = report.n_failed;
    j["config"] = config_json(config);
    return j.dump(2) + "\n";
}

std::string study_rows_to_csv(const std::vector<StudyRow>& rows, const ConfigMap& config) {
    std::string out = "# config " + config_json(config).dump() + "\n";
    out += "parameter,method,bias_x100,var_x100,mse_x100\n";
    for (const auto& r : rows) {
        out += r.parameter + "," + r.method + "," + fmt(100.0 * r.bias) + "," +
               fmt(100.0 * r.variance) + "," + fmt(100.0 * r.mse) + "\n";
    }
    return out;
}

std::string km_to_csv(const StepFunction& survival) {
    std::string out = "t,S\n";
    if (survival.times.empty() || survival.times.front() > 0.0)
        out += "0," + fmt(survival.value_before_first) + "\n";
    for (std::size_t i = 0; i < survival.times.size(); ++i)
        out += fmt(survival.times[i]) + "," + fmt(survival.values[i]) + "\n";
    return out;
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << text;
    out.flush();
    if (!out) throw IoError("failed writing " + path);
}

namespace {

struct KvEntry {
    std::string key, value;
    int line = 0;
};

struct RawArm {
    std::string name;
    int line = 0;
    std::vector<KvEntry> entries;
};

int to_int(const KvEntry& e) {
    const char* b = e.value.data();
    const char* end = b + e.value.size();
    int v = 0;
    auto res = std::from_chars(b, end, v);
    if (e.value.empty() || res.ec != std::errc() || res.ptr != end)
        throw at_line(e.line, "`" + e.key + "` expects an integer, got `" + e.value + "`");
    return v;
}

double to_double(const KvEntry& e) { return parse_double_cell(e.value, e.line, e.key.c_str()); }

bool to_bool(const KvEntry& e) {
    if (e.value == "true" || e.value == "1") return true;
    if (e.value == "false" || e.value == "0") return false;
    throw at_line(e.line, "`" + e.key + "` expects true or false, got `" + e.value + "`");
}

std::vector<double> to_double_list(const KvEntry& e) {
    std::vector<double> out;
    for (const auto& cell : split(e.value, ','))
        out.push_back(parse_double_cell(cell, e.line, e.key.c_str()));
    if (out.empty()) throw at_line(e.line, "`" + e.key + "` expects at least one value");
    return out;
}

StudyArm materialize(const RawArm& ra) {
    std::map<std::string, KvEntry> kv;
    for (const auto& e : ra.entries)
        if (!kv.emplace(e.key, e).second)
            throw at_line(e.line, "duplicate key `" + e.key + "`");

    static const std::vector<std::string> known = {
        "model",       "setting",     "scenario",    "cens",
        "error_level", "v",           "n",           "method",
        "error_kind",  "error_df",    "B",           "lambdas",
        "extrapolant", "isotonize",   "specified_error_sd", "bandwidth"};
    for (const auto& [k, e] : kv)
        if (std::find(known.begin(), known.end(), k) == known.end())
            throw at_line(e.line, "unknown key `" + k + "`");

    auto take = [&](const char* k) -> const KvEntry* {
        auto it = kv.find(k);
        return it == kv.end() ? nullptr : &it->second;
    };

    StudyArm arm;
    arm.name = ra.name;

    const KvEntry* model_e = take("model");
    if (!model_e) throw at_line(ra.line, "arm [" + ra.name + "] is missing `model`");
    int model = to_int(*model_e);
    int n = take("n") ? to_int(*take("n")) : 200;
    try {
        if (model == 1) {
            if (take("error_level"))
                throw at_line(take("error_level")->line, "`error_level` applies to models 2-5");
            int setting = take("setting") ? to_int(*take("setting")) : 1;
            int scenario = take("scenario") ? to_int(*take("scenario")) : 1;
            int cens = take("cens") ? to_int(*take("cens")) : 1;
            double v = take("v") ? to_double(*take("v")) : 0.7;
            arm.spec = model1_preset(setting, scenario, cens, v, n);
        } else {
            if (take("setting")) throw at_line(take("setting")->line, "`setting` applies to model 1");
            if (take("cens")) throw at_line(take("cens")->line, "`cens` applies to model 1");
            int scenario = take("scenario") ? to_int(*take("scenario")) : 1;
            int level = take("error_level") ? to_int(*take("error_level")) : 2;
            arm.spec = model_preset(model, scenario, level, n);
            if (const KvEntry* ev = take("v")) {
                auto sds = to_double_list(*ev);
                if (sds.size() != arm.spec.error_sd.size())
                    throw at_line(ev->line, "`v` expects " + std::to_string(arm.spec.error_sd.size()) +
                                                " value(s) for model " + std::to_string(model));
                arm.spec.error_sd = sds;
            }
        }
    } catch (const std::invalid_argument& ex) {
        throw at_line(ra.line, "arm [" + ra.name + "]: " + ex.what());
    }

    if (const KvEntry* e = take("error_kind")) {
        try {
            arm.spec.error_kind = error_kind_from_name(e->value);
        } catch (const std::invalid_argument& ex) {
            throw at_line(e->line, ex.what());
        }
    }
    if (const KvEntry* e = take("error_df")) arm.spec.error_df = to_int(*e);

    const KvEntry* method_e = take("method");
    if (!method_e) throw at_line(ra.line, "arm [" + ra.name + "] is missing `method`");
    try {
        arm.method = study_method_from_name(method_e->value);
    } catch (const std::invalid_argument& ex) {
        throw at_line(method_e->line, ex.what());
    }

    if (const KvEntry* e = take("B")) arm.options.simex.B = to_int(*e);
    if (const KvEntry* e = take("lambdas")) arm.options.simex.lambdas = to_double_list(*e);
    if (const KvEntry* e = take("extrapolant")) {
        try {
            arm.options.simex.extrapolant = extrapolant_from_name(e->value);
        } catch (const std::invalid_argument& ex) {
            throw at_line(e->line, ex.what());
        }
    }
    if (const KvEntry* e = take("isotonize")) arm.options.simex.isotonize = to_bool(*e);
    if (const KvEntry* e = take("specified_error_sd"))
        arm.options.specified_error_sd = to_double_list(*e);
    if (const KvEntry* e = take("bandwidth")) arm.options.presmooth.bandwidth = to_double(*e);
    return arm;
}

}  // namespace

std::vector<StudyArm> parse_study_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    std::vector<RawArm> raw;
    std::string rawline;
    int line_no = 0;
    while (std::getline(in, rawline)) {
        ++line_no;
        std::string line = trim(rawline);
        if (line.empty() || line[0] == '#' || line[0] == ';') continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw at_line(line_no, "unterminated section header");
            std::string name = trim(line.substr(1, line.size() - 2));
            if (name.empty()) throw at_line(line_no, "empty arm name");
            raw.push_back({name, line_no, {}});
            continue;
        }
        auto eq = line.find('=');
        if (eq == std::string::npos) throw at_line(line_no, "expected `key = value`");
        if (raw.empty()) throw at_line(line_no, "key outside an arm section");
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty()) throw at_line(line_no, "empty key");
        raw.back().entries.push_back({key, value, line_no});
    }
    if (raw.empty()) throw ParseError(path + ": no study arms defined");
    std::vector<StudyArm> arms;
    arms.reserve(raw.size());
    for (const auto& ra : raw) arms.push_back(materialize(ra));
    return arms;
}

std::string format_double(double x) { return fmt(x); }

const char* error_kind_name(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::normal: return "normal";
        case ErrorKind::uniform: return "uniform";
        case ErrorKind::student_t: return "student_t";
        case ErrorKind::chi_squared: return "chi_squared";
    }
    throw std::invalid_argument("unknown error kind");
}

ErrorKind error_kind_from_name(const std::string& name) {
    if (name == "normal") return ErrorKind::normal;
    if (name == "uniform") return ErrorKind::uniform;
    if (name == "student_t") return ErrorKind::student_t;
    if (name == "chi_squared") return ErrorKind::chi_squared;
    throw std::invalid_argument("unknown error kind `" + name + "`");
}

const char* extrapolant_name(Extrapolant kind) {
    switch (kind) {
        case Extrapolant::linear: return "linear";
        case Extrapolant::quadratic: return "quadratic";
        case Extrapolant::cubic: return "cubic";
    }
    throw std::invalid_argument("unknown extrapolant");
}

Extrapolant extrapolant_from_name(const std::string& name) {
    if (name == "linear") return Extrapolant::linear;
    if (name == "quadratic") return Extrapolant::quadratic;
    if (name == "cubic") return Extrapolant::cubic;
    throw std::invalid_argument("unknown extrapolant `" + name + "`");
}

}  // namespace curesimex

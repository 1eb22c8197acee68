#include "curesimex/presmooth.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <numeric>

namespace curesimex {

namespace {

double kernel_value(Kernel k, double u) {
    double a = std::abs(u);
    if (a > 1.0) return 0.0;
    switch (k) {
        case Kernel::epanechnikov:
            return 0.75 * (1.0 - u * u);
        case Kernel::uniform_box:
            return 0.5;
    }
    return 0.0;
}

// indices sorted by time ascending, events before censorings at ties
std::vector<int> time_order(const Dataset& data) {
    std::vector<int> order(data.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        const auto& ra = data.records[static_cast<std::size_t>(a)];
        const auto& rb = data.records[static_cast<std::size_t>(b)];
        if (ra.y != rb.y) return ra.y < rb.y;
        return ra.delta > rb.delta;
    });
    return order;
}

// weighted product-limit over presorted records; kw holds one nonnegative
// weight per sorted position
double weighted_product_limit(const std::vector<double>& ys, const std::vector<int>& deltas,
                              const std::vector<double>& kw, double t) {
    double total = 0.0;
    for (double v : kw) total += v;
    if (total <= 0.0) throw std::runtime_error("degenerate kernel window: no weight near x0");
    double s = 1.0;
    double at_risk = total;
    for (std::size_t i = 0; i < ys.size(); ++i) {
        if (ys[i] > t) break;
        if (deltas[i] == 1 && kw[i] > 0.0) {
            double factor = 1.0 - kw[i] / at_risk;
            s *= std::max(factor, 0.0);
        }
        at_risk -= kw[i];
    }
    return std::min(std::max(s, 0.0), 1.0);
}

struct SortedView {
    std::vector<double> ys, xs;
    std::vector<int> deltas;
};

SortedView sorted_view(const Dataset& data, const std::vector<double>& x) {
    std::vector<int> order = time_order(data);
    SortedView v;
    v.ys.reserve(order.size());
    v.xs.reserve(order.size());
    v.deltas.reserve(order.size());
    for (int idx : order) {
        const auto& r = data.records[static_cast<std::size_t>(idx)];
        v.ys.push_back(r.y);
        v.deltas.push_back(r.delta);
        v.xs.push_back(x[static_cast<std::size_t>(idx)]);
    }
    return v;
}

// selection runs on a fixed Gaussian reference kernel; the chosen value is
// then applied with the compact smoothing kernel
double gaussian_reference(double u) {
    return std::exp(-0.5 * u * u) * 0.3989422804014327;
}

// leave-one-out cross-validation for the conditional distribution of the
// observed time, scored at every observed time up to the largest event
double cv_criterion(const SortedView& v, double h, double t_max) {
    std::size_t n = v.ys.size();
    double own = gaussian_reference(0.0);
    // last sorted position of each record's tie block
    std::vector<std::size_t> block_end(n);
    {
        std::size_t i = 0;
        while (i < n) {
            std::size_t j = i;
            while (j < n && v.ys[j] == v.ys[i]) ++j;
            for (std::size_t k = i; k < j; ++k) block_end[k] = j - 1;
            i = j;
        }
    }
    double loss = 0.0;
    std::vector<double> kw(n), prefix(n);
    for (std::size_t i = 0; i < n; ++i) {
        double total = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            kw[j] = gaussian_reference((v.xs[j] - v.xs[i]) / h);
            total += kw[j];
        }
        double acc = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            acc += kw[j];
            prefix[j] = acc;
        }
        double den = total - own;  // leave record i out
        for (std::size_t j = 0; j < n; ++j) {
            if (v.ys[j] > t_max) break;
            double ind = v.ys[i] <= v.ys[j] ? 1.0 : 0.0;
            double est;
            if (den > 0.0) {
                est = (prefix[block_end[j]] - ind * own) / den;
            } else {
                est = 0.5;  // no neighbours in the window: uninformative value
            }
            double d = est - ind;
            loss += d * d;
        }
    }
    return loss;
}

std::vector<double> standardized(const std::vector<double>& x) {
    double m = 0.0;
    for (double v : x) m += v;
    m /= static_cast<double>(x.size());
    double var = 0.0;
    for (double v : x) var += (v - m) * (v - m);
    var /= static_cast<double>(x.size());
    double sd = std::sqrt(var);
    if (sd <= 0.0) sd = 1.0;
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = (x[i] - m) / sd;
    return out;
}

double cv_bandwidth_on(const Dataset& data, const std::vector<double>& x_raw,
                       const std::vector<double>& grid) {
    if (grid.empty()) throw std::invalid_argument("bandwidth grid must be nonempty");
    double midpoint = std::min(grid[grid.size() / 2], 2.0);
    double ymax_unc = -std::numeric_limits<double>::infinity();
    for (const auto& r : data.records)
        if (r.delta == 1) ymax_unc = std::max(ymax_unc, r.y);
    if (!(ymax_unc > 0.0)) return midpoint;

    SortedView v = sorted_view(data, standardized(x_raw));
    std::vector<double> crit(grid.size());
    for (std::size_t g = 0; g < grid.size(); ++g) {
        if (!(grid[g] > 0.0)) throw std::invalid_argument("bandwidths must be positive");
        crit[g] = cv_criterion(v, grid[g], ymax_unc);
    }
    double lo = *std::min_element(crit.begin(), crit.end());
    double hi = *std::max_element(crit.begin(), crit.end());
    if (hi - lo <= 1e-12 * std::max(1.0, std::abs(hi))) return midpoint;
    std::size_t best = static_cast<std::size_t>(std::min_element(crit.begin(), crit.end()) - crit.begin());
    return std::min(grid[best], 2.0);
}

bool is_binary_column(const Dataset& data, int col) {
    for (const auto& r : data.records) {
        double v = r.w[static_cast<std::size_t>(col)];
        if (v != 0.0 && v != 1.0) return false;
    }
    return true;
}

int continuous_incidence_column(const Dataset& data, const ModelLayout& layout) {
    int cont = -1;
    for (int col : layout.incidence_idx) {
        if (is_binary_column(data, col)) continue;
        if (cont >= 0)
            throw std::invalid_argument(
                "presmoothing requires exactly one continuous incidence covariate");
        cont = col;
    }
    if (cont < 0)
        throw std::invalid_argument(
            "presmoothing requires exactly one continuous incidence covariate");
    return cont;
}

}  // namespace

std::vector<double> default_bandwidth_grid() {
    std::vector<double> g;
    for (int k = 1; k <= 20; ++k) g.push_back(0.1 * k);
    return g;
}

double beran_survival(const Dataset& data, double x0, double t, double h, Kernel kernel) {
    data.validate();
    if (!(h > 0.0)) throw std::invalid_argument("bandwidth must be positive");
    if (data.size() == 0) throw std::invalid_argument("empty dataset");
    std::vector<double> x(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) x[i] = data.records[i].w.at(0);
    SortedView v = sorted_view(data, x);
    std::vector<double> kw(v.xs.size());
    for (std::size_t i = 0; i < v.xs.size(); ++i)
        kw[i] = kernel_value(kernel, (v.xs[i] - x0) / h);
    return weighted_product_limit(v.ys, v.deltas, kw, t);
}

double cv_bandwidth(const Dataset& data, const std::vector<double>& grid, Kernel /*kernel*/) {
    data.validate();
    if (data.size() == 0) throw std::invalid_argument("empty dataset");
    std::vector<double> x(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) x[i] = data.records[i].w.at(0);
    return cv_bandwidth_on(data, x, grid);
}

double presmooth_bandwidth(const Dataset& data, const ModelLayout& layout,
                           const PresmoothOptions& opts) {
    if (opts.bandwidth) {
        if (!(*opts.bandwidth > 0.0)) throw std::invalid_argument("bandwidth must be positive");
        return *opts.bandwidth;
    }
    data.validate();
    int cont_col = continuous_incidence_column(data, layout);
    std::size_t n = data.size();
    std::vector<double> x_raw(n);
    for (std::size_t i = 0; i < n; ++i)
        x_raw[i] = data.records[i].w[static_cast<std::size_t>(cont_col)];
    Dataset cont;
    cont.column_names = {"x"};
    cont.records.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& r = data.records[i];
        cont.records.push_back({r.y, r.delta, {x_raw[i]}});
    }
    const std::vector<double>& grid =
        opts.bandwidth_grid.empty() ? default_bandwidth_grid() : opts.bandwidth_grid;
    return cv_bandwidth_on(cont, x_raw, grid);
}

CureFit fit_presmooth(const Dataset& data, const ModelLayout& layout,
                      const PresmoothOptions& opts) {
    data.validate();
    std::size_t n = data.size();
    int n_events = 0;
    double max_event = -std::numeric_limits<double>::infinity();
    for (const auto& r : data.records) {
        n_events += r.delta;
        if (r.delta == 1) max_event = std::max(max_event, r.y);
    }
    if (n_events == 0) throw std::invalid_argument("fit requires at least one event");

    double tau0 = max_event;
    if (opts.em.tau0_override) {
        if (*opts.em.tau0_override < max_event)
            throw std::invalid_argument("tau0 override below the largest event time");
        tau0 = *opts.em.tau0_override;
    }

    VectorXd pi;
    if (opts.pi_override) {
        if (opts.pi_override->size() != static_cast<Eigen::Index>(n))
            throw std::invalid_argument("pi override: size mismatch");
        pi = *opts.pi_override;
    } else {
        // exactly one continuous incidence covariate carries the kernel;
        // binary incidence covariates partition the sample by exact match
        int cont_col = continuous_incidence_column(data, layout);
        std::vector<int> binary_cols;
        for (int col : layout.incidence_idx)
            if (col != cont_col) binary_cols.push_back(col);

        std::vector<double> x_raw(n);
        for (std::size_t i = 0; i < n; ++i)
            x_raw[i] = data.records[i].w[static_cast<std::size_t>(cont_col)];
        std::vector<double> xs = standardized(x_raw);

        double h = presmooth_bandwidth(data, layout, opts);

        // group indices by the binary covariate pattern
        std::map<std::vector<double>, std::vector<int>> groups;
        for (std::size_t i = 0; i < n; ++i) {
            std::vector<double> key;
            key.reserve(binary_cols.size());
            for (int col : binary_cols)
                key.push_back(data.records[i].w[static_cast<std::size_t>(col)]);
            groups[key].push_back(static_cast<int>(i));
        }

        pi.resize(static_cast<Eigen::Index>(n));
        for (const auto& [key, members] : groups) {
            // sorted view of this group's records
            std::vector<int> order = members;
            std::sort(order.begin(), order.end(), [&](int a, int b) {
                const auto& ra = data.records[static_cast<std::size_t>(a)];
                const auto& rb = data.records[static_cast<std::size_t>(b)];
                if (ra.y != rb.y) return ra.y < rb.y;
                return ra.delta > rb.delta;
            });
            std::vector<double> ys, gx;
            std::vector<int> deltas;
            ys.reserve(order.size());
            gx.reserve(order.size());
            deltas.reserve(order.size());
            for (int idx : order) {
                const auto& r = data.records[static_cast<std::size_t>(idx)];
                ys.push_back(r.y);
                deltas.push_back(r.delta);
                gx.push_back(xs[static_cast<std::size_t>(idx)]);
            }
            std::vector<double> kw(order.size());
            for (int idx : members) {
                double x0 = xs[static_cast<std::size_t>(idx)];
                for (std::size_t j = 0; j < order.size(); ++j)
                    kw[j] = kernel_value(opts.kernel, (gx[j] - x0) / h);
                double s = weighted_product_limit(ys, deltas, kw, tau0);
                double p = 1.0 - s;
                pi(idx) = std::min(1.0 - 1e-6, std::max(1e-6, p));
            }
        }
    }

    MatrixXd X = incidence_design(data, layout);
    IncidenceStep inc = weighted_logistic_newton(X, pi, VectorXd::Zero(X.cols()), opts.em);

    CureFit fit = fit_latency_with_fixed_incidence(data, layout, inc.gamma, opts.em);
    fit.incidence_diverged = inc.diverged;
    return fit;
}

}  // namespace curesimex

#include "curesimex/inference.hpp"

#include <cmath>
#include <sstream>

#include "curesimex/parallel.hpp"

namespace curesimex {

BootstrapReport bootstrap_sd(const Dataset& data, const ModelLayout& layout,
                             const ParamFitter& fitter, int n_boot, std::uint64_t seed,
                             int jobs) {
    data.validate();
    if (n_boot < 2) throw std::invalid_argument("bootstrap needs at least 2 resamples");
    std::size_t n = data.size();
    if (n == 0) throw std::invalid_argument("bootstrap needs a nonempty dataset");

    BootstrapReport report;
    report.n_boot = n_boot;
    report.estimates = fitter(data, layout, derive_seed(seed, 0, 0));

    std::vector<VectorXd> slot(static_cast<std::size_t>(n_boot));
    std::vector<char> ok(static_cast<std::size_t>(n_boot), 0);
    parallel_for(n_boot, jobs, [&](int b) {
        RngStream idx_rng = substream(seed, static_cast<std::uint64_t>(b), 0);
        Dataset resample;
        resample.column_names = data.column_names;
        resample.records.reserve(n);
        for (std::size_t i = 0; i < n; ++i) {
            std::size_t pick = static_cast<std::size_t>(idx_rng.uniform() * static_cast<double>(n));
            if (pick >= n) pick = n - 1;
            resample.records.push_back(data.records[pick]);
        }
        try {
            VectorXd est = fitter(resample, layout, derive_seed(seed, static_cast<std::uint64_t>(b), 1));
            if (est.size() != report.estimates.size()) return;
            for (Eigen::Index j = 0; j < est.size(); ++j)
                if (!std::isfinite(est(j))) return;
            slot[static_cast<std::size_t>(b)] = std::move(est);
            ok[static_cast<std::size_t>(b)] = 1;
        } catch (const std::exception&) {
            // dropped; abort threshold applies below
        }
    });

    std::vector<const VectorXd*> good;
    good.reserve(static_cast<std::size_t>(n_boot));
    for (int b = 0; b < n_boot; ++b)
        if (ok[static_cast<std::size_t>(b)])
            good.push_back(&slot[static_cast<std::size_t>(b)]);
    report.n_failed = n_boot - static_cast<int>(good.size());
    if (report.n_failed > 0.2 * n_boot) {
        std::ostringstream msg;
        msg << "bootstrap aborted: " << report.n_failed << " of " << n_boot << " refits failed";
        throw std::runtime_error(msg.str());
    }

    Eigen::Index p = report.estimates.size();
    double m = static_cast<double>(good.size());
    report.sd = VectorXd::Zero(p);
    for (Eigen::Index j = 0; j < p; ++j) {
        double mean = 0.0;
        for (const VectorXd* e : good) mean += (*e)(j);
        mean /= m;
        double ss = 0.0;
        for (const VectorXd* e : good) ss += ((*e)(j) - mean) * ((*e)(j) - mean);
        report.sd(j) = std::sqrt(ss / (m - 1.0));
    }
    report.p_values = wald_pvalues(report.estimates, report.sd);
    return report;
}

VectorXd wald_pvalues(const VectorXd& estimates, const VectorXd& sd) {
    if (estimates.size() != sd.size())
        throw std::invalid_argument("wald_pvalues: length mismatch");
    VectorXd p(estimates.size());
    for (Eigen::Index j = 0; j < estimates.size(); ++j) {
        if (sd(j) < 0.0) throw std::invalid_argument("wald_pvalues: negative sd");
        if (sd(j) == 0.0) {
            p(j) = estimates(j) != 0.0 ? 0.0 : 1.0;
            continue;
        }
        double z = std::abs(estimates(j)) / sd(j);
        p(j) = std::erfc(z / std::sqrt(2.0));
    }
    return p;
}

}  // namespace curesimex

#include "curesimex/em.hpp"

#include <cmath>
#include <limits>
#include <numeric>

namespace curesimex {

namespace {

constexpr double kSeparationBound = 30.0;  // on the standardized scale

struct Standardizer {
    VectorXd mean, scale;  // per column; intercept column untouched

    static Standardizer fit(const MatrixXd& M, int skip_leading) {
        Standardizer s;
        Eigen::Index p = M.cols();
        s.mean = VectorXd::Zero(p);
        s.scale = VectorXd::Ones(p);
        for (Eigen::Index j = skip_leading; j < p; ++j) {
            double m = M.col(j).mean();
            double v = (M.col(j).array() - m).square().sum() / static_cast<double>(M.rows());
            double sd = std::sqrt(v);
            s.mean(j) = m;
            s.scale(j) = sd > 0.0 ? sd : 1.0;
        }
        return s;
    }

    MatrixXd apply(const MatrixXd& M, int skip_leading) const {
        MatrixXd out = M;
        for (Eigen::Index j = skip_leading; j < M.cols(); ++j)
            out.col(j) = (M.col(j).array() - mean(j)) / scale(j);
        return out;
    }
};

double bernoulli_loglik(const MatrixXd& X, const VectorXd& w, const VectorXd& g) {
    double ll = 0.0;
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        double eta = X.row(i).dot(g);
        double mu = eta >= 0.0 ? 1.0 / (1.0 + std::exp(-eta)) : std::exp(eta) / (1.0 + std::exp(eta));
        ll += w(i) * std::log(clamp_prob(mu)) + (1.0 - w(i)) * std::log(clamp_prob(1.0 - mu));
    }
    return ll;
}

// presorted view of a dataset for the partial likelihood: ascending time,
// events before censorings at ties, tie blocks precomputed
struct CoxWork {
    std::vector<int> order;
    std::vector<double> y;   // sorted
    std::vector<int> delta;  // sorted
    MatrixXd Z;              // sorted rows
    struct Block {
        int begin, end, d;
        double t;
    };
    std::vector<Block> blocks;
    int n = 0, q = 0, n_events = 0;
};

CoxWork build_cox_work(const Dataset& data, const ModelLayout& layout) {
    CoxWork cw;
    cw.n = static_cast<int>(data.size());
    cw.q = static_cast<int>(layout.latency_idx.size());
    cw.order.resize(cw.n);
    std::iota(cw.order.begin(), cw.order.end(), 0);
    std::sort(cw.order.begin(), cw.order.end(), [&](int a, int b) {
        const auto& ra = data.records[static_cast<std::size_t>(a)];
        const auto& rb = data.records[static_cast<std::size_t>(b)];
        if (ra.y != rb.y) return ra.y < rb.y;
        return ra.delta > rb.delta;
    });
    cw.y.resize(static_cast<std::size_t>(cw.n));
    cw.delta.resize(static_cast<std::size_t>(cw.n));
    cw.Z.resize(cw.n, cw.q);
    for (int i = 0; i < cw.n; ++i) {
        const auto& r = data.records[static_cast<std::size_t>(cw.order[static_cast<std::size_t>(i)])];
        cw.y[static_cast<std::size_t>(i)] = r.y;
        cw.delta[static_cast<std::size_t>(i)] = r.delta;
        cw.n_events += r.delta;
        for (int j = 0; j < cw.q; ++j)
            cw.Z(i, j) = r.w[static_cast<std::size_t>(layout.latency_idx[static_cast<std::size_t>(j)])];
    }
    int i = 0;
    while (i < cw.n) {
        int j = i;
        int d = 0;
        while (j < cw.n && cw.y[static_cast<std::size_t>(j)] == cw.y[static_cast<std::size_t>(i)]) {
            d += cw.delta[static_cast<std::size_t>(j)];
            ++j;
        }
        cw.blocks.push_back({i, j, d, cw.y[static_cast<std::size_t>(i)]});
        i = j;
    }
    return cw;
}

// partial log-likelihood with risk weights rw (sorted order)
double cox_loglik(const CoxWork& cw, const VectorXd& rw, const MatrixXd& Z, const VectorXd& beta,
                  std::vector<double>& score_buf) {
    double ll = 0.0;
    double s0 = 0.0;
    score_buf.resize(static_cast<std::size_t>(cw.n));
    for (int i = 0; i < cw.n; ++i) score_buf[static_cast<std::size_t>(i)] = Z.row(i).dot(beta);
    for (auto it = cw.blocks.rbegin(); it != cw.blocks.rend(); ++it) {
        for (int i = it->begin; i < it->end; ++i)
            s0 += rw(i) * std::exp(score_buf[static_cast<std::size_t>(i)]);
        if (it->d > 0) {
            for (int i = it->begin; i < it->end; ++i)
                if (cw.delta[static_cast<std::size_t>(i)] == 1) ll += score_buf[static_cast<std::size_t>(i)];
            ll -= it->d * std::log(s0);
        }
    }
    return ll;
}

struct CoxNewtonResult {
    VectorXd beta;
    bool diverged = false;
};

CoxNewtonResult weighted_cox_newton(const CoxWork& cw, const VectorXd& rw, const VectorXd& init,
                                    const EmOptions& opts) {
    int q = cw.q;
    CoxNewtonResult res;
    if (q == 0) {
        res.beta = VectorXd(0);
        return res;
    }
    Standardizer std_ = Standardizer::fit(cw.Z, 0);
    MatrixXd Z = std_.apply(cw.Z, 0);
    VectorXd b = init.cwiseProduct(std_.scale);  // to standardized scale

    std::vector<double> buf;
    double ll = cox_loglik(cw, rw, Z, b, buf);
    VectorXd grad(q), s1(q);
    MatrixXd H(q, q), s2(q, q);
    bool grad_ok = false;
    for (int iter = 0; iter < opts.inner_newton_iter; ++iter) {
        grad.setZero();
        H.setZero();
        double s0 = 0.0;
        s1.setZero();
        s2.setZero();
        for (auto it = cw.blocks.rbegin(); it != cw.blocks.rend(); ++it) {
            for (int i = it->begin; i < it->end; ++i) {
                double r = rw(i) * std::exp(Z.row(i).dot(b));
                s0 += r;
                s1.noalias() += r * Z.row(i).transpose();
                s2.noalias() += r * (Z.row(i).transpose() * Z.row(i));
            }
            if (it->d > 0) {
                for (int i = it->begin; i < it->end; ++i)
                    if (cw.delta[static_cast<std::size_t>(i)] == 1) grad.noalias() += Z.row(i).transpose();
                VectorXd m = s1 / s0;
                grad.noalias() -= it->d * m;
                H.noalias() += it->d * (s2 / s0 - m * m.transpose());
            }
        }
        if (grad.lpNorm<Eigen::Infinity>() < opts.inner_tol) {
            grad_ok = true;
            break;
        }
        MatrixXd Hr = H + 1e-12 * MatrixXd::Identity(q, q);
        VectorXd step = Hr.ldlt().solve(grad);
        double scale = 1.0;
        bool accepted = false;
        for (int h = 0; h < 30; ++h) {
            VectorXd cand = b + scale * step;
            double llc = cox_loglik(cw, rw, Z, cand, buf);
            if (llc >= ll - 1e-10 * (1.0 + std::abs(ll))) {
                b = cand;
                ll = llc;
                accepted = true;
                break;
            }
            scale *= 0.5;
        }
        if (!accepted) break;
        if (b.lpNorm<Eigen::Infinity>() > kSeparationBound) {
            res.diverged = true;
            break;
        }
    }
    if (!grad_ok && !res.diverged) {
        grad.setZero();
        double s0 = 0.0;
        s1.setZero();
        for (auto it = cw.blocks.rbegin(); it != cw.blocks.rend(); ++it) {
            for (int i = it->begin; i < it->end; ++i) {
                double r = rw(i) * std::exp(Z.row(i).dot(b));
                s0 += r;
                s1.noalias() += r * Z.row(i).transpose();
            }
            if (it->d > 0) {
                for (int i = it->begin; i < it->end; ++i)
                    if (cw.delta[static_cast<std::size_t>(i)] == 1) grad.noalias() += Z.row(i).transpose();
                grad.noalias() -= it->d * (s1 / s0);
            }
        }
        if (grad.lpNorm<Eigen::Infinity>() >= opts.inner_tol) res.diverged = true;
    }
    // same saturation guard as the incidence step
    if (b.lpNorm<Eigen::Infinity>() > kSeparationBound) res.diverged = true;
    res.beta = b.cwiseQuotient(std_.scale);  // back to the original scale
    return res;
}

StepFunction breslow_baseline(const CoxWork& cw, const VectorXd& rw, const VectorXd& beta) {
    StepFunction sf;
    sf.value_before_first = 0.0;
    std::vector<double> s0_at_block(cw.blocks.size());
    double s0 = 0.0;
    for (std::size_t bi = cw.blocks.size(); bi-- > 0;) {
        const auto& blk = cw.blocks[bi];
        for (int i = blk.begin; i < blk.end; ++i)
            s0 += rw(i) * std::exp(cw.Z.row(i).dot(beta));
        s0_at_block[bi] = s0;
    }
    double cum = 0.0;
    for (std::size_t bi = 0; bi < cw.blocks.size(); ++bi) {
        const auto& blk = cw.blocks[bi];
        if (blk.d == 0) continue;
        cum += static_cast<double>(blk.d) / s0_at_block[bi];
        sf.times.push_back(blk.t);
        sf.values.push_back(cum);
    }
    return sf;
}

double resolve_tau0(const Dataset& data, const EmOptions& opts) {
    double max_event = -std::numeric_limits<double>::infinity();
    for (const auto& r : data.records)
        if (r.delta == 1) max_event = std::max(max_event, r.y);
    if (opts.tau0_override) {
        if (*opts.tau0_override < max_event)
            throw std::invalid_argument("tau0 override below the largest event time");
        return *opts.tau0_override;
    }
    return max_event;
}

CureFit fit_em(const Dataset& data, const ModelLayout& layout, const EmOptions& opts,
               const VectorXd* frozen_gamma, std::vector<double>* loglik_trace) {
    data.validate();
    int n = static_cast<int>(data.size());
    int n_events = 0;
    for (const auto& r : data.records) n_events += r.delta;
    if (n_events == 0) throw std::invalid_argument("fit requires at least one event");
    if (n_events == n) throw std::invalid_argument("fit requires at least one censored record");

    CureFit fit;
    fit.tau0 = resolve_tau0(data, opts);

    MatrixXd X = incidence_design(data, layout);
    CoxWork cw = build_cox_work(data, layout);

    // per-record index into the event-time grid: largest jump time <= y_i,
    // -1 when y_i falls before the first event (cumulative hazard 0 there)
    std::vector<double> grid;
    for (const auto& blk : cw.blocks)
        if (blk.d > 0) grid.push_back(blk.t);
    std::vector<int> lam_idx(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const auto& r = data.records[static_cast<std::size_t>(i)];
        auto it = std::upper_bound(grid.begin(), grid.end(), r.y);
        lam_idx[static_cast<std::size_t>(i)] = static_cast<int>(it - grid.begin()) - 1;
    }

    // initial values: incidence fitted to the raw event indicator, latency
    // from an events-only Cox fit, baseline from Breslow at that fit
    VectorXd delta(n);
    for (int i = 0; i < n; ++i) delta(i) = data.records[static_cast<std::size_t>(i)].delta;

    if (frozen_gamma) {
        if (frozen_gamma->size() != X.cols())
            throw std::invalid_argument("frozen incidence coefficients: size mismatch");
        fit.gamma = *frozen_gamma;
    } else {
        IncidenceStep g0 = weighted_logistic_newton(X, delta, VectorXd::Zero(X.cols()), opts);
        fit.gamma = g0.gamma;
        fit.incidence_diverged = g0.diverged;
    }
    VectorXd rw(n);
    for (int i = 0; i < n; ++i)
        rw(i) = delta(cw.order[static_cast<std::size_t>(i)]);
    CoxNewtonResult b0 = weighted_cox_newton(cw, rw, VectorXd::Zero(cw.q), opts);
    fit.beta = b0.beta;
    fit.latency_diverged = b0.diverged;
    fit.baseline = breslow_baseline(cw, rw, fit.beta);

    MatrixXd Zorig = latency_design(data, layout);
    VectorXd w(n);
    for (int iter = 1; iter <= opts.max_iter; ++iter) {
        // E-step on the cached designs (same formula as the public e_step)
        const std::vector<double>& cum = fit.baseline.values;
        for (int i = 0; i < n; ++i) {
            const auto& r = data.records[static_cast<std::size_t>(i)];
            if (r.delta == 1) {
                w(i) = 1.0;
                continue;
            }
            if (r.y > fit.tau0) {
                w(i) = 0.0;
                continue;
            }
            double eta = X.row(i).dot(fit.gamma);
            double phi = clamp_prob(eta >= 0.0 ? 1.0 / (1.0 + std::exp(-eta))
                                               : std::exp(eta) / (1.0 + std::exp(eta)));
            int li = lam_idx[static_cast<std::size_t>(i)];
            double lam = li < 0 ? 0.0 : cum[static_cast<std::size_t>(li)];
            double su = std::exp(-lam * std::exp(Zorig.row(i).dot(fit.beta)));
            w(i) = phi * su / (1.0 - phi + phi * su);
        }

        double change = 0.0;
        if (!frozen_gamma) {
            IncidenceStep gs = weighted_logistic_newton(X, w, fit.gamma, opts);
            change = std::max(change, (gs.gamma - fit.gamma).lpNorm<Eigen::Infinity>());
            fit.gamma = gs.gamma;
            fit.incidence_diverged = gs.diverged;
        }

        for (int i = 0; i < cw.n; ++i) {
            int orig = cw.order[static_cast<std::size_t>(i)];
            rw(i) = cw.delta[static_cast<std::size_t>(i)] == 1 ? 1.0 : w(orig);
        }
        CoxNewtonResult bs = weighted_cox_newton(cw, rw, fit.beta, opts);
        if (cw.q > 0) change = std::max(change, (bs.beta - fit.beta).lpNorm<Eigen::Infinity>());
        fit.beta = bs.beta;
        fit.latency_diverged = bs.diverged;
        fit.baseline = breslow_baseline(cw, rw, fit.beta);

        fit.iterations = iter;
        if (loglik_trace) loglik_trace->push_back(observed_loglik(data, layout, fit));
        if (change < opts.tol) {
            fit.converged = true;
            break;
        }
    }
    fit.loglik = observed_loglik(data, layout, fit);
    return fit;
}

}  // namespace

UncureWeights e_step(const Dataset& data, const ModelLayout& layout, const CureFit& current) {
    UncureWeights out;
    out.w.resize(static_cast<Eigen::Index>(data.size()));
    for (std::size_t i = 0; i < data.size(); ++i) {
        const auto& r = data.records[i];
        Eigen::Index ii = static_cast<Eigen::Index>(i);
        if (r.delta == 1) {
            out.w(ii) = 1.0;
            continue;
        }
        if (r.y > current.tau0) {
            out.w(ii) = 0.0;
            continue;
        }
        double phi = clamp_prob(phi_logistic(current.gamma, incidence_row(r, layout)));
        double su = cox_survival(current.beta, current.baseline, r.y, latency_row(r, layout));
        out.w(ii) = phi * su / (1.0 - phi + phi * su);
    }
    return out;
}

IncidenceStep weighted_logistic_newton(const MatrixXd& X, const VectorXd& w, const VectorXd& init,
                                       const EmOptions& opts) {
    Eigen::Index p = X.cols();
    Standardizer std_ = Standardizer::fit(X, 1);
    MatrixXd Xs = std_.apply(X, 1);

    // map the initial value onto the standardized scale
    VectorXd g(p);
    g(0) = init(0);
    for (Eigen::Index j = 1; j < p; ++j) {
        g(j) = init(j) * std_.scale(j);
        g(0) += init(j) * std_.mean(j);
    }

    IncidenceStep res;
    double ll = bernoulli_loglik(Xs, w, g);
    VectorXd grad(p);
    MatrixXd H(p, p);
    bool grad_ok = false;
    for (int iter = 0; iter < opts.inner_newton_iter; ++iter) {
        grad.setZero();
        H.setZero();
        for (Eigen::Index i = 0; i < Xs.rows(); ++i) {
            double eta = Xs.row(i).dot(g);
            double mu = eta >= 0.0 ? 1.0 / (1.0 + std::exp(-eta))
                                   : std::exp(eta) / (1.0 + std::exp(eta));
            grad.noalias() += (w(i) - mu) * Xs.row(i).transpose();
            H.noalias() += (mu * (1.0 - mu)) * (Xs.row(i).transpose() * Xs.row(i));
        }
        if (grad.lpNorm<Eigen::Infinity>() < opts.inner_tol) {
            grad_ok = true;
            break;
        }
        MatrixXd Hr = H + 1e-12 * MatrixXd::Identity(p, p);
        VectorXd step = Hr.ldlt().solve(grad);
        double scale = 1.0;
        bool accepted = false;
        for (int h = 0; h < 30; ++h) {
            VectorXd cand = g + scale * step;
            double llc = bernoulli_loglik(Xs, w, cand);
            if (llc >= ll - 1e-10 * (1.0 + std::abs(ll))) {
                g = cand;
                ll = llc;
                accepted = true;
                break;
            }
            scale *= 0.5;
        }
        if (!accepted) break;
        if (g.lpNorm<Eigen::Infinity>() > kSeparationBound) {
            res.diverged = true;
            break;
        }
    }
    if (!grad_ok && !res.diverged) {
        grad.setZero();
        for (Eigen::Index i = 0; i < Xs.rows(); ++i) {
            double eta = Xs.row(i).dot(g);
            double mu = eta >= 0.0 ? 1.0 / (1.0 + std::exp(-eta))
                                   : std::exp(eta) / (1.0 + std::exp(eta));
            grad.noalias() += (w(i) - mu) * Xs.row(i).transpose();
        }
        if (grad.lpNorm<Eigen::Infinity>() >= opts.inner_tol) res.diverged = true;
    }
    // the gradient vanishes numerically once the fitted probabilities
    // saturate, so a runaway estimate can look converged
    if (g.lpNorm<Eigen::Infinity>() > kSeparationBound) res.diverged = true;

    // back to the original scale
    res.gamma.resize(p);
    res.gamma(0) = g(0);
    for (Eigen::Index j = 1; j < p; ++j) {
        res.gamma(j) = g(j) / std_.scale(j);
        res.gamma(0) -= g(j) * std_.mean(j) / std_.scale(j);
    }
    return res;
}

IncidenceStep m_step_incidence(const Dataset& data, const ModelLayout& layout,
                               const UncureWeights& w, const VectorXd& init,
                               const EmOptions& opts) {
    MatrixXd X = incidence_design(data, layout);
    if (init.size() != X.cols()) throw std::invalid_argument("m_step_incidence: init size mismatch");
    return weighted_logistic_newton(X, w.w, init, opts);
}

LatencyStep m_step_latency(const Dataset& data, const ModelLayout& layout, const UncureWeights& w,
                           const VectorXd& init_beta, const EmOptions& opts) {
    int n_events = 0;
    for (const auto& r : data.records) n_events += r.delta;
    if (n_events == 0) throw std::invalid_argument("m_step_latency: no events");
    CoxWork cw = build_cox_work(data, layout);
    VectorXd rw(cw.n);
    for (int i = 0; i < cw.n; ++i) {
        int orig = cw.order[static_cast<std::size_t>(i)];
        rw(i) = data.records[static_cast<std::size_t>(orig)].delta == 1 ? 1.0 : w.w(orig);
    }
    CoxNewtonResult nr = weighted_cox_newton(cw, rw, init_beta, opts);
    LatencyStep out;
    out.beta = nr.beta;
    out.diverged = nr.diverged;
    out.baseline = breslow_baseline(cw, rw, nr.beta);
    return out;
}

CureFit fit_mle(const Dataset& data, const ModelLayout& layout, const EmOptions& opts,
                std::vector<double>* loglik_trace) {
    return fit_em(data, layout, opts, nullptr, loglik_trace);
}

CureFit fit_latency_with_fixed_incidence(const Dataset& data, const ModelLayout& layout,
                                         const VectorXd& gamma, const EmOptions& opts,
                                         std::vector<double>* loglik_trace) {
    return fit_em(data, layout, opts, &gamma, loglik_trace);
}

double observed_loglik(const Dataset& data, const ModelLayout& layout, const CureFit& fit) {
    double ll = 0.0;
    for (const auto& r : data.records) {
        double phi = clamp_prob(phi_logistic(fit.gamma, incidence_row(r, layout)));
        if (r.delta == 1) {
            VectorXd z = latency_row(r, layout);
            double bz = fit.beta.dot(z);
            double lam = fit.baseline(r.y);
            double dlam = fit.baseline.jump_at(r.y);
            ll += std::log(phi) + std::log(std::max(dlam, 1e-300)) + bz - lam * std::exp(bz);
        } else if (r.y > fit.tau0) {
            ll += std::log(clamp_prob(1.0 - phi));
        } else {
            double su = cox_survival(fit.beta, fit.baseline, r.y, latency_row(r, layout));
            ll += std::log(clamp_prob(1.0 - phi + phi * su));
        }
    }
    return ll;
}

}  // namespace curesimex

#include "aclab/critic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace aclab {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr int kMaxTraceLength = 10000;

void check_pair(const Policy& target, const Policy& behavior) {
    if (target.n_states() != behavior.n_states() || target.n_actions() != behavior.n_actions())
        throw InvalidInput("target and behavior policies have different shapes");
}

Mat ratios(const Policy& target, const Policy& behavior) {
    check_pair(target, behavior);
    if ((behavior.probs().array() <= 0.0).any())
        throw AssumptionViolation("behavior policy must put positive mass on every action");
    return target.probs().cwiseQuotient(behavior.probs());
}

void summarize(IsFactorTable& t, const Policy& behavior) {
    if (t.c.rows() != behavior.n_states() || t.c.cols() != behavior.n_actions() ||
        t.rho.rows() != t.c.rows() || t.rho.cols() != t.c.cols())
        throw InvalidInput("factor tables must be |S| x |A|");
    if (!t.c.allFinite() || !t.rho.allFinite() || (t.c.array() < 0.0).any() || (t.rho.array() < 0.0).any())
        throw InvalidInput("importance sampling factors must be finite and non-negative");
    t.d_c = behavior.probs().cwiseProduct(t.c).rowwise().sum();
    t.d_rho = behavior.probs().cwiseProduct(t.rho).rowwise().sum();
    t.d_c_min = t.d_c.minCoeff();
    t.d_c_max = t.d_c.maxCoeff();
    t.d_rho_min = t.d_rho.minCoeff();
    t.d_rho_max = t.d_rho.maxCoeff();
    t.c_max = t.c.maxCoeff();
    t.rho_max = t.rho.maxCoeff();
}

double two_sided_mass(const Eigen::Ref<const Vec>& pb, const Eigen::Ref<const Vec>& r, double lo, double hi) {
    double total = 0.0;
    for (Eigen::Index a = 0; a < r.size(); ++a) total += pb(a) * truncate(r(a), lo, hi);
    return total;
}

/// Every k in [t_k + n + 1, horizon] satisfies the stepsize-window condition.
bool window_condition_holds(double alpha, double h, int n, double cap, MixingProfile& profile,
                            std::int64_t horizon) {
    std::vector<double> prefix(static_cast<std::size_t>(horizon) + 1, 0.0);
    for (std::int64_t i = 0; i < horizon; ++i)
        prefix[static_cast<std::size_t>(i) + 1] = prefix[static_cast<std::size_t>(i)] + alpha / (static_cast<double>(i) + h);
    for (std::int64_t k = 1; k <= horizon; ++k) {
        const std::int64_t window = profile.mixing_time(alpha / (static_cast<double>(k) + h)) + n + 1;
        if (k < window) continue;
        const double sum = prefix[static_cast<std::size_t>(k)] - prefix[static_cast<std::size_t>(k - window)];
        if (sum > cap) return false;
    }
    return true;
}

std::string fmt(double x) {
    std::ostringstream os;
    os.precision(6);
    os << x;
    return os.str();
}

}  // namespace

std::string to_string(FactorScheme scheme) {
    switch (scheme) {
        case FactorScheme::lambda_averaged: return "lambda";
        case FactorScheme::two_sided: return "two_sided";
        case FactorScheme::vanilla: return "vanilla";
        case FactorScheme::on_policy: return "on_policy";
        case FactorScheme::custom: return "custom";
    }
    return "custom";
}

FactorScheme parse_scheme(const std::string& name) {
    if (name == "lambda" || name == "lambda_averaged") return FactorScheme::lambda_averaged;
    if (name == "two_sided") return FactorScheme::two_sided;
    if (name == "vanilla") return FactorScheme::vanilla;
    if (name == "on_policy") return FactorScheme::on_policy;
    if (name == "custom") return FactorScheme::custom;
    throw InvalidInput("unknown factor scheme '" + name + "' (expected lambda, two_sided, vanilla, on_policy)");
}

IsFactorTable make_lambda_factors(const Policy& target, const Policy& behavior, const Vec& lambda) {
    const Mat r = ratios(target, behavior);
    if (lambda.size() != behavior.n_states()) throw InvalidInput("lambda must have one entry per state");
    if ((lambda.array() < 0.0).any() || (lambda.array() > 1.0).any())
        throw InvalidInput("lambda(s) must lie in [0, 1]");
    IsFactorTable t;
    t.scheme = FactorScheme::lambda_averaged;
    t.lambda = lambda;
    t.c = (r.array().colwise() * lambda.array()).colwise() + (1.0 - lambda.array());
    t.rho = t.c;
    summarize(t, behavior);
    return t;
}

IsFactorTable make_two_sided_factors(const Policy& target, const Policy& behavior, const Vec& upper) {
    const Mat r = ratios(target, behavior);
    const int ns = behavior.n_states();
    if (upper.size() != ns) throw InvalidInput("upper truncation must have one entry per state");
    if ((upper.array() < 1.0).any()) throw InvalidInput("upper truncation levels must be at least 1");
    IsFactorTable t;
    t.scheme = FactorScheme::two_sided;
    t.upper = upper;
    t.lower.resize(ns);
    t.c.resize(ns, behavior.n_actions());
    for (int s = 0; s < ns; ++s) {
        const Vec pb = behavior.probs().row(s).transpose();
        const Vec rs = r.row(s).transpose();
        // Mass is non-decreasing in the lower level: <= 1 at 0, >= 1 at 1.
        if (two_sided_mass(pb, rs, 0.0, upper(s)) > 1.0 + 1e-12)
            throw StabilityError("no lower truncation level in [0,1] balances state " + std::to_string(s));
        double lo = 0.0, hi = 1.0;
        for (int it = 0; it < 200 && hi - lo > 1e-16; ++it) {
            const double mid = 0.5 * (lo + hi);
            (two_sided_mass(pb, rs, mid, upper(s)) <= 1.0 ? lo : hi) = mid;
        }
        t.lower(s) = lo;
        for (int a = 0; a < behavior.n_actions(); ++a) t.c(s, a) = truncate(rs(a), lo, upper(s));
    }
    t.rho = t.c;
    summarize(t, behavior);
    return t;
}

IsFactorTable make_vanilla_factors(const Policy& target, const Policy& behavior) {
    IsFactorTable t;
    t.scheme = FactorScheme::vanilla;
    t.c = ratios(target, behavior);
    t.rho = t.c;
    summarize(t, behavior);
    return t;
}

IsFactorTable make_on_policy_factors(const Policy& behavior) {
    IsFactorTable t;
    t.scheme = FactorScheme::on_policy;
    t.c = Mat::Ones(behavior.n_states(), behavior.n_actions());
    t.rho = t.c;
    summarize(t, behavior);
    return t;
}

IsFactorTable make_custom_factors(const Policy& behavior, Mat c, Mat rho) {
    IsFactorTable t;
    t.scheme = FactorScheme::custom;
    t.c = std::move(c);
    t.rho = std::move(rho);
    summarize(t, behavior);
    return t;
}

Vec lambda_for_bounded_rho(const Policy& target, const Policy& behavior, double gamma) {
    const Mat r = ratios(target, behavior);
    Vec lambda = Vec::Ones(behavior.n_states());
    if (gamma <= 0.0) return lambda;
    for (int s = 0; s < behavior.n_states(); ++s) {
        const double excess = r.row(s).maxCoeff() - 1.0;
        if (excess <= 0.0) continue;
        double l = std::min(1.0, (1.0 / gamma - 1.0) / excess);
        while (l > 0.0 && gamma * (l * (excess + 1.0) + 1.0 - l) > 1.0) l = std::nextafter(l, 0.0);
        lambda(s) = l;
    }
    return lambda;
}

double geometric_sum(double x, int n) {
    double total = 0.0, term = 1.0;
    for (int i = 0; i < n; ++i) {
        total += term;
        term *= x;
    }
    return total;
}

double gamma_tilde(const IsFactorTable& factors, double gamma, int n) {
    return 1.0 - geometric_sum(gamma * factors.d_c_min, n) * (1.0 - gamma * factors.d_rho_max);
}

double variance_parameter(const IsFactorTable& factors, double gamma, int n) {
    if (factors.c_equals_rho()) return 1.0 + std::pow(gamma * factors.rho_max, n);
    return (1.0 + gamma * factors.rho_max) * geometric_sum(gamma * factors.c_max, n);
}

StabilityReport stability_report(const IsFactorTable& factors, const WeightMatrixInfo& weights,
                                 double gamma, int n) {
    if (n < 1) throw InvalidInput("n must be at least 1");
    if (!(weights.ksa_min > 0.0)) throw AssumptionViolation("K_SA,min must be positive");
    const double root_k = std::sqrt(weights.ksa_min);
    StabilityReport rep;
    rep.n = n;
    rep.gamma_tilde_n = gamma_tilde(factors, gamma, n);
    rep.gamma_c = rep.gamma_tilde_n / root_k;
    rep.c_le_rho = (factors.c.array() <= factors.rho.array()).all();
    rep.rho_contractive = gamma * factors.d_rho_max < 1.0;
    const double x = gamma * factors.d_c_min;
    rep.limit_gamma_c = x >= 1.0 ? -std::numeric_limits<double>::infinity()
                                 : gamma * (factors.d_rho_max - factors.d_c_min) / ((1.0 - x) * root_k);
    rep.limit_contractive = rep.limit_gamma_c < 1.0;
    if (rep.rho_contractive) {
        for (int m = 1; m <= kMaxTraceLength; ++m) {
            if (gamma_tilde(factors, gamma, m) / root_k < 1.0) {
                rep.n_required = m;
                break;
            }
        }
    }
    rep.L = variance_parameter(factors, gamma, n);
    return rep;
}

GeneralizedBellman::GeneralizedBellman(const Mdp& mdp, const Policy& behavior,
                                       const IsFactorTable& factors, int n)
    : n_(n), gamma_(mdp.gamma()), reward_(mdp.reward_vector()) {
    if (n < 1) throw InvalidInput("n must be at least 1");
    if (behavior.n_states() != mdp.n_states() || behavior.n_actions() != mdp.n_actions())
        throw InvalidInput("behavior policy does not match the MDP");
    if (factors.c.rows() != mdp.n_states() || factors.c.cols() != mdp.n_actions())
        throw InvalidInput("factor table does not match the MDP");
    trace_kernel_ = mdp.pair_transition(behavior.probs().cwiseProduct(factors.c));
    rho_kernel_ = mdp.pair_transition(behavior.probs().cwiseProduct(factors.rho));
}

QTable generalized_bellman(const QTable& q, const Mdp& mdp, const Policy& behavior,
                           const IsFactorTable& factors, int n) {
    if (q.size() != mdp.n_pairs()) throw InvalidInput("Q-table size does not match |S||A|");
    return GeneralizedBellman(mdp, behavior, factors, n).apply(q);
}

QTable q_fixed_point(const Mdp& mdp, const Policy& behavior, const IsFactorTable& factors) {
    if (!(mdp.gamma() * factors.d_rho_max < 1.0))
        throw StabilityError("gamma * D_rho,max = " + fmt(mdp.gamma() * factors.d_rho_max) +
                             " >= 1; H_rho has no guaranteed fixed point");
    const GeneralizedBellman op(mdp, behavior, factors, 1);
    const auto np = mdp.n_pairs();
    const Mat system = Mat::Identity(np, np) - mdp.gamma() * op.rho_kernel();
    return system.partialPivLu().solve(op.reward());
}

PbeSystem pbe_system(const GeneralizedBellman& op, const FeatureMap& features,
                     const WeightMatrixInfo& weights) {
    const Mat& phi = features.phi();
    if (phi.rows() != op.reward().size() || weights.ksa_diag.size() != phi.rows())
        throw InvalidInput("features, K_SA and MDP disagree on |S||A|");
    const Mat weighted = phi.transpose() * weights.ksa_diag.asDiagonal();
    const Mat residual = phi - op.gamma() * (op.rho_kernel() * phi);
    PbeSystem sys;
    sys.a = weighted * op.trace(residual);
    sys.b = weighted * op.trace(op.reward());
    return sys;
}

Vec pbe_fixed_point(const Mdp& mdp, const Policy& behavior, const IsFactorTable& factors,
                    const FeatureMap& features, int n, const WeightMatrixInfo& weights) {
    const StabilityReport rep = stability_report(factors, weights, mdp.gamma(), n);
    if (!(rep.gamma_c < 1.0))
        throw StabilityError("gamma_c = " + fmt(rep.gamma_c) + " >= 1 at n = " + std::to_string(n) +
                             (rep.n_required ? "; need n >= " + std::to_string(*rep.n_required)
                                             : "; no n makes the operator contractive"));
    const GeneralizedBellman op(mdp, behavior, factors, n);
    const PbeSystem sys = pbe_system(op, features, weights);
    const Eigen::FullPivLU<Mat> lu(sys.a);
    if (!lu.isInvertible()) throw InvalidInput("projected Bellman system is singular; features are rank deficient");
    const Vec w = lu.solve(sys.b);

    const QTable values = features.values(w);
    const QTable image = project(op.apply(values), features, weights);
    const double tol = 1e-8 * std::max(1.0, values.lpNorm<Eigen::Infinity>());
    if ((image - values).lpNorm<Eigen::Infinity>() > tol)
        throw StabilityError("projected Bellman fixed point failed verification");
    return w;
}

BiasBound bias_bound(const Mdp& mdp, const Policy& behavior, const IsFactorTable& factors,
                     const FeatureMap& features, int n, const Policy& target,
                     const WeightMatrixInfo& weights) {
    check_pair(target, behavior);
    const double gamma = mdp.gamma();
    const StabilityReport rep = stability_report(factors, weights, gamma, n);
    if (!(rep.gamma_c < 1.0)) throw StabilityError("bias bound requires gamma_c < 1, got " + fmt(rep.gamma_c));
    if (!rep.rho_contractive) throw StabilityError("bias bound requires gamma * D_rho,max < 1");

    const QTable q = q_fixed_point(mdp, behavior, factors);
    const double shrink = std::sqrt(1.0 - rep.gamma_c * rep.gamma_c);
    BiasBound out;
    out.approx_term = weighted_norm(q - project(q, features, weights), weights) / shrink;

    const Mat& pi = target.probs();
    const Mat& pb = behavior.probs();
    const double mismatch = (pi - pb.cwiseProduct(factors.rho)).cwiseAbs().rowwise().sum().maxCoeff();
    out.sampling_bias_term = gamma * mismatch / ((1.0 - gamma) * (1.0 - gamma * factors.d_rho_max));

    const double denom = (1.0 - gamma) * (1.0 - gamma);
    if (factors.scheme == FactorScheme::lambda_averaged) {
        const Vec per_state = (1.0 - factors.lambda.array()).matrix().cwiseProduct((pi - pb).cwiseAbs().rowwise().sum());
        out.specialized_sampling = gamma * per_state.maxCoeff() / denom;
        if (std::abs(*out.specialized_sampling - out.sampling_bias_term) >
            1e-9 * std::max(1.0, out.sampling_bias_term) && std::abs(factors.d_rho_max - 1.0) < 1e-12)
            throw std::logic_error("lambda-averaged bias term disagrees with the general form");
    } else if (factors.scheme == FactorScheme::two_sided) {
        double worst = 0.0;
        for (int s = 0; s < behavior.n_states(); ++s) {
            double total = 0.0;
            for (int a = 0; a < behavior.n_actions(); ++a) {
                total += std::max(pi(s, a) - pb(s, a) * factors.upper(s), 0.0) -
                         std::min(pi(s, a) - pb(s, a) * factors.lower(s), 0.0);
            }
            worst = std::max(worst, total);
        }
        out.specialized_sampling = gamma * worst / denom;
        const Vec w = pbe_fixed_point(mdp, behavior, factors, features, n, weights);
        out.specialized_approx = weighted_norm(q - features.values(w), weights) / shrink;
        if (*out.specialized_sampling < out.sampling_bias_term - 1e-9 * std::max(1.0, out.sampling_bias_term))
            throw std::logic_error("two-sided bias term is smaller than the general form");
    }
    return out;
}

std::vector<Vec> td_iterate(const Mdp& mdp, const IsFactorTable& factors, const FeatureMap& features,
                            const CriticConfig& config, const Trajectory& trajectory) {
    const int n = config.n;
    const std::int64_t iters = config.iterations;
    if (n < 1) throw InvalidInput("n must be at least 1");
    if (iters < 0) throw InvalidInput("iteration count must be non-negative");
    if (!(config.stepsize.alpha >= 0.0)) throw InvalidInput("stepsize alpha must be non-negative");
    if (config.stepsize.kind == Stepsize::Kind::diminishing && !(config.stepsize.h > 0.0))
        throw InvalidInput("diminishing stepsize offset h must be positive");
    if (static_cast<std::int64_t>(trajectory.size()) < iters + n)
        throw InvalidInput("trajectory has " + std::to_string(trajectory.size()) + " samples; need K + n = " +
                           std::to_string(iters + n));
    if (features.n_pairs() != mdp.n_pairs()) throw InvalidInput("feature rows do not match |S||A|");
    const auto d = features.dim();
    Vec w = config.w0.size() == 0 ? Vec::Zero(d) : config.w0;
    if (w.size() != d) throw InvalidInput("w0 has the wrong dimension");

    const int na = mdp.n_actions();
    const std::size_t len = static_cast<std::size_t>(iters + n);
    std::vector<Eigen::Index> sa(len);
    std::vector<double> reward(len), c(len), rho(len);
    for (std::size_t i = 0; i < len; ++i) {
        const auto [s, a] = trajectory[i];
        if (s < 0 || s >= mdp.n_states() || a < 0 || a >= na) throw InvalidInput("trajectory index out of range");
        sa[i] = sa_index(s, a, na);
        reward[i] = mdp.reward(s, a);
        c[i] = factors.c(s, a);
        rho[i] = factors.rho(s, a);
    }
    const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> phi = features.phi();
    const double gamma = mdp.gamma();
    // Window values phi_i^T w are cached; after w += s phi_k they shift by s phi_i^T phi_k.
    const bool use_gram = mdp.n_pairs() <= 2048;
    const Mat gram = use_gram ? Mat(phi * phi.transpose()) : Mat();
    std::vector<double> value(len);
    for (std::size_t i = 0; i <= static_cast<std::size_t>(n) && i < len; ++i) value[i] = phi.row(sa[i]).dot(w);

    std::vector<Vec> out;
    out.reserve(static_cast<std::size_t>(iters) + 1);
    out.push_back(w);
    for (std::int64_t k = 0; k < iters; ++k) {
        const auto base = static_cast<std::size_t>(k);
        double acc = 0.0, weight = 1.0;
        for (int j = 0; j < n; ++j) {
            const std::size_t i = base + static_cast<std::size_t>(j);
            if (j > 0) weight *= gamma * c[i];
            acc += weight * (reward[i] + gamma * rho[i + 1] * value[i + 1] - value[i]);
        }
        const double step = config.stepsize.at(k) * acc;
        w.noalias() += step * phi.row(sa[base]).transpose();
        for (std::size_t i = base + 1; i <= base + static_cast<std::size_t>(n); ++i)
            value[i] = use_gram ? value[i] + step * gram(sa[i], sa[base]) : phi.row(sa[i]).dot(w);
        const std::size_t entering = base + static_cast<std::size_t>(n) + 1;
        if (entering < len) value[entering] = phi.row(sa[entering]).dot(w);
        out.push_back(w);
    }
    return out;
}

CriticRun td_run(const Mdp& mdp, const Policy& behavior, const IsFactorTable& factors,
                 const FeatureMap& features, const CriticConfig& config, const Trajectory& trajectory) {
    CriticRun run;
    const MixingInfo mixing = stationary_distribution(mdp, behavior);
    run.weights_info = spectral_info(features, mixing, behavior);
    run.report = stability_report(factors, run.weights_info, mdp.gamma(), config.n);
    run.fixed_point = pbe_fixed_point(mdp, behavior, factors, features, config.n, run.weights_info);
    run.weights = td_iterate(mdp, factors, features, config, trajectory);

    run.alphas.reserve(run.weights.size());
    run.errors.reserve(run.weights.size());
    for (std::size_t k = 0; k < run.weights.size(); ++k) {
        run.alphas.push_back(config.stepsize.at(static_cast<std::int64_t>(k)));
        run.errors.push_back((run.weights[k] - run.fixed_point).squaredNorm());
    }
    const double last_alpha = config.stepsize.at(config.iterations);
    if (last_alpha > 0.0) run.t_mix = mixing.mixing_time(last_alpha);
    try {
        run.bounds = theoretical_bound_curve(config, run.report, run.weights_info.lambda_min, mixing,
                                             run.weights.front(), run.fixed_point);
    } catch (const PreconditionError& e) {
        run.warnings.emplace_back(e.what());
        run.bounds.assign(run.weights.size(), kNaN);
    }
    return run;
}

CriticRun td_run(const Mdp& mdp, const Policy& behavior, const IsFactorTable& factors,
                 const FeatureMap& features, const CriticConfig& config) {
    const Trajectory traj = sample_trajectory(mdp, behavior, static_cast<std::size_t>(config.iterations + config.n),
                                              config.seed);
    return td_run(mdp, behavior, factors, features, config, traj);
}

double stepsize_cap(const StabilityReport& report, double lambda_min) {
    return (1.0 - report.gamma_c) * lambda_min / (130.0 * report.L * report.L);
}

double max_constant_stepsize(const StabilityReport& report, double lambda_min, const MixingInfo& mixing) {
    if (!(report.gamma_c < 1.0)) throw StabilityError("gamma_c >= 1; no admissible stepsize");
    const double cap = stepsize_cap(report, lambda_min);
    MixingProfile profile(mixing.chain, mixing.stationary);
    double alpha = cap / (report.n + 1);
    // alpha only decreases and t_alpha only increases; stop once t_alpha is stable.
    for (int t = 0, next = profile.mixing_time(alpha); next != t; next = profile.mixing_time(alpha)) {
        t = next;
        alpha = cap / (t + report.n + 1);
    }
    return alpha;
}

double min_diminishing_offset(double alpha, const StabilityReport& report, double lambda_min,
                              const MixingInfo& mixing, std::int64_t horizon) {
    if (!(report.gamma_c < 1.0)) throw StabilityError("gamma_c >= 1; no admissible stepsize");
    const double cap = stepsize_cap(report, lambda_min);
    MixingProfile profile(mixing.chain, mixing.stationary);
    auto ok = [&](double h) { return window_condition_holds(alpha, h, report.n, cap, profile, horizon); };
    double hi = 1.0;
    while (!ok(hi)) {
        hi *= 2.0;
        if (hi > 1e15) throw PreconditionError("no offset h up to 1e15 satisfies the stepsize condition");
    }
    double lo = std::floor(hi / 2.0);
    if (lo < 1.0) return hi;
    while (hi - lo > 1.0) {
        const double mid = std::floor(0.5 * (lo + hi));
        (ok(mid) ? hi : lo) = mid;
    }
    return hi;
}

std::vector<double> theoretical_bound_curve(const CriticConfig& config, const StabilityReport& report,
                                            double lambda_min, const MixingInfo& mixing,
                                            const Vec& w0, const Vec& w_star) {
    if (!(report.gamma_c < 1.0)) throw PreconditionError("gamma_c = " + fmt(report.gamma_c) + " >= 1");
    if (!(config.stepsize.alpha > 0.0)) throw PreconditionError("the bound requires alpha > 0");
    const double rate = (1.0 - report.gamma_c) * lambda_min;
    const double cap = stepsize_cap(report, lambda_min);
    const double c1 = std::pow(w0.norm() + (w0 - w_star).norm() + 1.0, 2);
    const double c2 = 130.0 * std::pow(w_star.norm() + 1.0, 2);
    const int n = config.n;
    const std::int64_t iters = config.iterations;
    const double alpha = config.stepsize.alpha;
    std::vector<double> out(static_cast<std::size_t>(iters) + 1, kNaN);
    MixingProfile profile(mixing.chain, mixing.stationary);

    if (config.stepsize.kind == Stepsize::Kind::constant) {
        const std::int64_t burn = profile.mixing_time(alpha) + n + 1;
        if (alpha * static_cast<double>(burn) > cap * (1.0 + 1e-12))
            throw PreconditionError("alpha (t_alpha + n + 1) = " + fmt(alpha * static_cast<double>(burn)) +
                                    " exceeds (1 - gamma_c) lambda_min / (130 L^2) = " + fmt(cap));
        const double floor_term = c2 * report.L * report.L * alpha * static_cast<double>(burn) / rate;
        for (std::int64_t k = burn; k <= iters; ++k)
            out[static_cast<std::size_t>(k)] =
                c1 * std::pow(1.0 - rate * alpha, static_cast<double>(k - burn)) + floor_term;
        return out;
    }

    const double h = config.stepsize.h;
    if (!(alpha * rate > 1.0))
        throw PreconditionError("diminishing stepsize needs alpha > 1 / ((1 - gamma_c) lambda_min) = " +
                                fmt(1.0 / rate));
    if (!window_condition_holds(alpha, h, n, cap, profile, iters))
        throw PreconditionError("offset h = " + fmt(h) + " violates the stepsize window condition");
    std::int64_t k0 = -1;
    const double noise = c2 * 8.0 * std::numbers::e * alpha * alpha / (rate * alpha - 1.0);
    for (std::int64_t k = 0; k <= iters; ++k) {
        const double t_k = profile.mixing_time(config.stepsize.at(k));
        if (k0 < 0) {
            if (static_cast<double>(k) < t_k + n + 1) continue;
            k0 = k;
        }
        const double kh = static_cast<double>(k) + h;
        out[static_cast<std::size_t>(k)] = c1 * (static_cast<double>(k0) + h) / kh + noise * (t_k + n + 1) / kh;
    }
    return out;
}

}  // namespace aclab

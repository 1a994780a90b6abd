#include "aclab/actor.hpp"

#include <cmath>
#include <iostream>
#include <limits>

namespace aclab {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void check_q(const QTable& q, int n_actions) {
    if (n_actions < 1 || q.size() % n_actions != 0) throw InvalidInput("Q-table size is not a multiple of |A|");
    if (!q.allFinite()) throw InvalidInput("Q-table has non-finite entries");
}

/// Subtracts the row-wise log-sum-exp; rows with a finite entry only.
void normalize_log_rows(Mat& logits) {
    for (Eigen::Index s = 0; s < logits.rows(); ++s) {
        const double top = logits.row(s).maxCoeff();
        if (!std::isfinite(top)) throw InvalidInput("policy row has no finite log-probability");
        const double lse = top + std::log((logits.row(s).array() - top).exp().sum());
        logits.row(s).array() -= lse;
    }
}

}  // namespace

std::string to_string(UpdateRule rule) {
    switch (rule) {
        case UpdateRule::npg: return "npg";
        case UpdateRule::boltzmann: return "boltzmann";
        case UpdateRule::eps_greedy: return "eps_greedy";
    }
    return "npg";
}

std::string to_string(StepsizeMode mode) { return mode == StepsizeMode::constant ? "constant" : "increasing"; }

UpdateRule parse_rule(const std::string& name) {
    if (name == "npg") return UpdateRule::npg;
    if (name == "boltzmann") return UpdateRule::boltzmann;
    if (name == "eps_greedy" || name == "eps-greedy") return UpdateRule::eps_greedy;
    throw InvalidInput("unknown actor rule '" + name + "' (expected npg, boltzmann, eps_greedy)");
}

StepsizeMode parse_mode(const std::string& name) {
    if (name == "constant" || name == "cond1") return StepsizeMode::constant;
    if (name == "increasing" || name == "cond2") return StepsizeMode::increasing;
    throw InvalidInput("unknown stepsize mode '" + name + "' (expected constant, increasing)");
}

Mat q_rows(const QTable& q, int n_actions) {
    check_q(q, n_actions);
    return Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        q.data(), q.size() / n_actions, n_actions);
}

Mat log_policy(const Policy& policy) {
    Mat out = policy.probs().unaryExpr([](double p) { return p > 0.0 ? std::log(p) : kNegInf; });
    return out;
}

Policy policy_from_log(const Mat& log_probs) {
    Mat logits = log_probs;
    normalize_log_rows(logits);
    Mat probs = logits.array().exp().matrix();
    // Exact row sums after exponentiation.
    for (Eigen::Index s = 0; s < probs.rows(); ++s) probs.row(s) /= probs.row(s).sum();
    return Policy(std::move(probs));
}

Mat npg_update_log(const Mat& log_prev, const QTable& q, double beta) {
    if (!(beta >= 0.0) || !std::isfinite(beta)) throw InvalidInput("stepsize beta_t must be finite and non-negative");
    Mat logits = log_prev + beta * q_rows(q, static_cast<int>(log_prev.cols()));
    if (logits.rows() != log_prev.rows()) throw InvalidInput("Q-table does not match policy shape");
    normalize_log_rows(logits);
    return logits;
}

Policy npg_update(const Policy& prev, const QTable& q, double beta) {
    return policy_from_log(npg_update_log(log_policy(prev), q, beta));
}

Policy boltzmann_update(const QTable& q, int n_actions, double beta) {
    if (!(beta >= 0.0) || !std::isfinite(beta)) throw InvalidInput("stepsize beta_t must be finite and non-negative");
    return policy_from_log(beta * q_rows(q, n_actions));
}

Policy eps_greedy_update(const QTable& q, int n_actions, const Vec& beta_s) {
    const Mat table = q_rows(q, n_actions);
    if (beta_s.size() != table.rows()) throw InvalidInput("eps-greedy stepsize needs one entry per state");
    Mat probs(table.rows(), n_actions);
    for (Eigen::Index s = 0; s < table.rows(); ++s) {
        const double b = beta_s(s);
        if (!(b >= 0.0 && b <= 1.0)) throw InvalidInput("eps-greedy stepsize must lie in [0, 1]");
        probs.row(s).setConstant(b / n_actions);
        probs(s, argmax_lowest(table.row(s))) += 1.0 - b;
    }
    return Policy(std::move(probs));
}

Vec stepsize_condition(UpdateRule rule, StepsizeMode mode, double beta, int t, const Mat& log_prev,
                       const QTable& q, double gamma) {
    if (t < 0) throw InvalidInput("iteration index must be non-negative");
    if (mode == StepsizeMode::constant && !(beta > 0.0)) throw InvalidInput("beta must be positive");
    if (!(gamma > 0.0 && gamma < 1.0)) throw InvalidInput("stepsize conditions need 0 < gamma < 1");
    const int na = static_cast<int>(log_prev.cols());
    // Constant mode scales by gamma beta; increasing mode divides by gamma^{2t-1}.
    const double scale = mode == StepsizeMode::constant ? gamma * beta : std::pow(gamma, -(2.0 * t - 1.0));
    const Mat table = q_rows(q, na);
    if (table.rows() != log_prev.rows()) throw InvalidInput("Q-table does not match policy shape");

    switch (rule) {
        case UpdateRule::npg: {
            double worst = 0.0;
            for (Eigen::Index s = 0; s < table.rows(); ++s) {
                const double lp = log_prev(s, argmax_lowest(table.row(s)));
                if (!std::isfinite(lp))
                    throw StabilityError("pi_t puts zero mass on the greedy action at state " + std::to_string(s));
                worst = std::max(worst, -lp);
            }
            return Vec::Constant(1, scale * worst);
        }
        case UpdateRule::boltzmann: return Vec::Constant(1, scale * std::log(static_cast<double>(na)));
        case UpdateRule::eps_greedy: return 2.0 * scale * table.cwiseAbs().rowwise().maxCoeff();
    }
    return {};
}

Vec stepsize_condition(UpdateRule rule, StepsizeMode mode, double beta, int t, const Policy& prev,
                       const QTable& q, double gamma) {
    return stepsize_condition(rule, mode, beta, t, log_policy(prev), q, gamma);
}

ActorStep actor_step(UpdateRule rule, StepsizeMode mode, double beta, int t, const Mat& log_prev,
                     const QTable& q, double gamma) {
    ActorStep step;
    step.beta_t = stepsize_condition(rule, mode, beta, t, log_prev, q, gamma);
    const int na = static_cast<int>(log_prev.cols());
    switch (rule) {
        case UpdateRule::npg: step.log_policy = npg_update_log(log_prev, q, step.beta_t(0)); break;
        case UpdateRule::boltzmann: {
            Mat logits = step.beta_t(0) * q_rows(q, na);
            normalize_log_rows(logits);
            step.log_policy = std::move(logits);
            break;
        }
        case UpdateRule::eps_greedy: {
            Vec clipped = step.beta_t.cwiseMax(0.0).cwiseMin(1.0);
            step.clamped = static_cast<int>((clipped.array() != step.beta_t.array()).count());
            step.log_policy = log_policy(eps_greedy_update(q, na, clipped));
            break;
        }
    }
    return step;
}

std::pair<double, double> actor_error(const Mdp& mdp, const QTable& q, const Policy& next) {
    const QTable gap = bellman_optimality(mdp, q) - bellman_policy(mdp, next, q);
    return {gap.maxCoeff(), gap.minCoeff()};
}

double actor_error_bound(StepsizeMode mode, double beta, double gamma, int t) {
    return mode == StepsizeMode::constant ? 1.0 / beta : std::pow(gamma, 2.0 * t);
}

double actor_n1(double gamma, int t, double initial_error) { return std::pow(gamma, t) * initial_error; }

double actor_n3(StepsizeMode mode, double beta, double gamma, int t) {
    const double denom = (1.0 - gamma) * (1.0 - gamma);
    return mode == StepsizeMode::constant ? 2.0 * gamma / (beta * denom) : 2.0 * std::pow(gamma, t) / denom;
}

double actor_n3_alt(StepsizeMode mode, double beta, double gamma, int t) {
    const double denom = (1.0 - gamma) * (1.0 - gamma);
    return mode == StepsizeMode::constant ? 2.0 * gamma * beta / denom : actor_n3(mode, beta, gamma, t);
}

ActorRun run_actor_exact(const Mdp& mdp, UpdateRule rule, StepsizeMode mode, double beta, int iterations) {
    if (iterations < 0) throw InvalidInput("T must be non-negative");
    const double gamma = mdp.gamma();
    ActorRun run;
    run.rule = rule;
    run.mode = mode;
    run.beta = beta;
    run.q_star = value_iteration(mdp, 1e-12).q;

    Mat logp = log_policy(Policy::uniform(mdp.n_states(), mdp.n_actions()));
    double initial_error = 0.0;
    for (int t = 0; t <= iterations; ++t) {
        const Policy pi = policy_from_log(logp);
        const QTable q = exact_q(mdp, pi);
        ActorRecord rec;
        rec.t = t;
        rec.err_inf = (run.q_star - q).lpNorm<Eigen::Infinity>();
        if (t == 0) initial_error = rec.err_inf;
        rec.n1 = actor_n1(gamma, t, initial_error);
        rec.n3 = actor_n3(mode, beta, gamma, t);
        rec.n3_alt = actor_n3_alt(mode, beta, gamma, t);
        rec.beta_t = kNaN;
        rec.actor_gap = kNaN;
        rec.actor_gap_min = kNaN;
        run.policies.push_back(pi);
        if (t < iterations) {
            ActorStep step = actor_step(rule, mode, beta, t, logp, q, gamma);
            rec.beta_t = step.beta_t.maxCoeff();
            rec.clamped = step.clamped;
            run.clamp_count += step.clamped;
            logp = std::move(step.log_policy);
            std::tie(rec.actor_gap, rec.actor_gap_min) = actor_error(mdp, q, policy_from_log(logp));
        }
        run.records.push_back(rec);
    }
    if (run.clamp_count > 0)
        std::cerr << "warning: eps-greedy stepsize clamped to [0,1] " << run.clamp_count << " times\n";
    return run;
}

SoftmaxParam theta_update(const SoftmaxParam& param, const Vec& w, double beta) {
    if (param.theta.size() != w.size()) throw InvalidInput("theta and w have different dimensions");
    return {param.theta + beta * w};
}

Mat log_policy_from_theta(const FeatureMap& features, const SoftmaxParam& param, int n_actions) {
    if (param.theta.size() != features.dim()) throw InvalidInput("theta does not match the feature dimension");
    Mat logits = q_rows(features.values(param.theta), n_actions);
    normalize_log_rows(logits);
    return logits;
}

Policy policy_from_theta(const FeatureMap& features, const SoftmaxParam& param, int n_actions) {
    return policy_from_log(log_policy_from_theta(features, param, n_actions));
}

std::pair<double, double> logsumexp_gap_check(const Vec& x, const Vec& y, double beta) {
    if (x.size() != y.size() || x.size() == 0) throw InvalidInput("x and y must be non-empty and equally sized");
    if (!(beta > 0.0)) throw InvalidInput("beta must be positive");
    if ((y.array() <= 0.0).any()) throw InvalidInput("y must be strictly positive");
    const Eigen::Index imax = argmax_lowest(x);
    const double top = x(imax);
    const Vec weights = y.array() * (beta * (x.array() - top)).exp();
    const double tilted = weights.dot(x) / weights.sum();
    return {top - tilted, std::log(1.0 / y(imax)) / beta};
}

}  // namespace aclab

#pragma once

#include "aclab/common.hpp"
#include "aclab/features.hpp"
#include "aclab/mdp.hpp"

#include <string>
#include <utility>
#include <vector>

namespace aclab {

enum class UpdateRule { npg, boltzmann, eps_greedy };
enum class StepsizeMode { constant, increasing };

std::string to_string(UpdateRule rule);
std::string to_string(StepsizeMode mode);
UpdateRule parse_rule(const std::string& name);
StepsizeMode parse_mode(const std::string& name);

/// Flat Q-table viewed as |S| x |A|.
Mat q_rows(const QTable& q, int n_actions);

/// Row-normalised log-probabilities; -inf marks zero mass.
Mat log_policy(const Policy& policy);
Policy policy_from_log(const Mat& log_probs);

/// pi'(a|s) proportional to pi(a|s) exp(beta Q(s,a)).
Policy npg_update(const Policy& prev, const QTable& q, double beta);
Mat npg_update_log(const Mat& log_prev, const QTable& q, double beta);

/// pi'(a|s) proportional to exp(beta Q(s,a)).
Policy boltzmann_update(const QTable& q, int n_actions, double beta);

/// beta_s / |A| on every action plus 1 - beta_s on the lowest-index argmax.
/// beta_s must lie in [0, 1].
Policy eps_greedy_update(const QTable& q, int n_actions, const Vec& beta_s);

/// Minimal admissible beta_t (one entry per state for eps_greedy, else a single
/// entry). `beta` is ignored in increasing mode.
Vec stepsize_condition(UpdateRule rule, StepsizeMode mode, double beta, int t, const Mat& log_prev,
                       const QTable& q, double gamma);
Vec stepsize_condition(UpdateRule rule, StepsizeMode mode, double beta, int t, const Policy& prev,
                       const QTable& q, double gamma);

struct ActorStep {
    Mat log_policy;
    Vec beta_t;
    int clamped = 0;  // eps_greedy states whose beta_t was clipped to [0,1]
};

/// One policy update with the condition-derived stepsize.
ActorStep actor_step(UpdateRule rule, StepsizeMode mode, double beta, int t, const Mat& log_prev,
                     const QTable& q, double gamma);

/// Largest entry of H(Q) - H_{pi'}(Q) and its smallest entry (non-negative).
std::pair<double, double> actor_error(const Mdp& mdp, const QTable& q, const Policy& next);

/// Per-iteration bound on H(Q_t) - H_{pi_{t+1}}(Q_t): 1/beta or gamma^{2t}.
double actor_error_bound(StepsizeMode mode, double beta, double gamma, int t);

struct ActorRecord {
    int t = 0;
    double beta_t = 0.0;  // max over states for eps_greedy; NaN at t = T
    double err_inf = 0.0;
    double n1 = 0.0;
    double n2 = 0.0;
    double n3 = 0.0;      // 2 gamma / (beta (1-gamma)^2) or 2 gamma^t / (1-gamma)^2
    double n3_alt = 0.0;  // 2 gamma beta / (1-gamma)^2 in constant mode
    double actor_gap = 0.0;  // max_(s,a) H(Q_t) - H_{pi_{t+1}}(Q_t); NaN at t = T
    double actor_gap_min = 0.0;
    int clamped = 0;

    double bound() const { return n1 + n2 + n3; }
};

struct ActorRun {
    UpdateRule rule = UpdateRule::npg;
    StepsizeMode mode = StepsizeMode::increasing;
    double beta = 0.0;
    QTable q_star;
    std::vector<Policy> policies;  // pi_0 .. pi_T
    std::vector<ActorRecord> records;
    int clamp_count = 0;
};

/// N1 = gamma^t ||Q* - Q^{pi_0}||_inf.
double actor_n1(double gamma, int t, double initial_error);
double actor_n3(StepsizeMode mode, double beta, double gamma, int t);
double actor_n3_alt(StepsizeMode mode, double beta, double gamma, int t);

/// Exact-critic iteration pi_{t+1} = G(Q^{pi_t}, pi_t) from the uniform policy.
ActorRun run_actor_exact(const Mdp& mdp, UpdateRule rule, StepsizeMode mode, double beta, int iterations);

/// Compatible softmax pi_theta(a|s) proportional to exp(phi(s,a)^T theta).
struct SoftmaxParam {
    Vec theta;
};

SoftmaxParam theta_update(const SoftmaxParam& param, const Vec& w, double beta);
Mat log_policy_from_theta(const FeatureMap& features, const SoftmaxParam& param, int n_actions);
Policy policy_from_theta(const FeatureMap& features, const SoftmaxParam& param, int n_actions);

/// max_i x_i - sum x_i y_i e^{beta x_i} / sum y_j e^{beta x_j}, and log(1/y_imax) / beta.
std::pair<double, double> logsumexp_gap_check(const Vec& x, const Vec& y, double beta);

}  // namespace aclab

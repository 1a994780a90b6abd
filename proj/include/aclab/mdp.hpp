#pragma once

#include "aclab/common.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <vector>

namespace aclab {

/// Row-stochastic |S| x |A| table pi(a|s).
class Policy {
public:
    explicit Policy(Mat probs);

    static Policy uniform(int n_states, int n_actions);
    static Policy deterministic(const std::vector<int>& actions, int n_actions);

    const Mat& probs() const { return probs_; }
    double operator()(Eigen::Index s, Eigen::Index a) const { return probs_(s, a); }
    int n_states() const { return static_cast<int>(probs_.rows()); }
    int n_actions() const { return static_cast<int>(probs_.cols()); }

private:
    Mat probs_;
};

/// Finite discounted MDP. Transitions are indexed [a](s, s').
class Mdp {
public:
    /// Largest |S||A| accepted by the dense exact solvers.
    static constexpr Eigen::Index kMaxStateActions = 10000;

    Mdp(std::vector<Mat> transitions, Mat rewards, double gamma);

    int n_states() const { return static_cast<int>(rewards_.rows()); }
    int n_actions() const { return static_cast<int>(rewards_.cols()); }
    Eigen::Index n_pairs() const { return rewards_.size(); }
    double gamma() const { return gamma_; }

    const Mat& transition(int a) const { return transitions_[static_cast<std::size_t>(a)]; }
    const std::vector<Mat>& transitions() const { return transitions_; }
    const Mat& rewards() const { return rewards_; }
    double reward(Eigen::Index s, Eigen::Index a) const { return rewards_(s, a); }

    /// R flattened to the state-action index.
    QTable reward_vector() const;

    /// P_pi((s,a),(s',a')) = P_a(s,s') * weights(s',a').
    /// With weights = pi this is the state-action chain of pi.
    Mat pair_transition(const Mat& next_action_weights) const;

    /// State chain P_pi(s,s') = sum_a pi(a|s) P_a(s,s').
    Mat state_chain(const Policy& policy) const;

    Mdp with_gamma(double gamma) const;

private:
    std::vector<Mat> transitions_;
    Mat rewards_;
    double gamma_;
};

struct StateAction {
    int state = 0;
    int action = 0;
    friend bool operator==(const StateAction&, const StateAction&) = default;
};

using Trajectory = std::vector<StateAction>;

struct OptimalSolution {
    QTable q;
    Policy policy;
};

/// Stationary distribution, mixing times and a geometric TV envelope
/// max_s ||P^k(s,.) - mu||_TV <= C sigma^k of the behavior chain.
struct MixingInfo {
    Mat chain;
    Vec stationary;
    std::map<double, int> t_delta;
    double fit_c = 1.0;
    double fit_sigma = 0.5;

    /// t_delta for an arbitrary precision; looks up the cache first.
    int mixing_time(double delta) const;
};

/// Solves (I - gamma P_pi) Q = R by partial-pivot LU.
QTable exact_q(const Mdp& mdp, const Policy& policy);

QTable bellman_optimality(const Mdp& mdp, const QTable& q);
QTable bellman_policy(const Mdp& mdp, const Policy& policy, const QTable& q);

/// Greedy deterministic policy, ties to the lowest action index.
Policy greedy_policy(const QTable& q, int n_states, int n_actions);

/// Value iteration to ||H(Q) - Q||_inf <= tol, followed by exact evaluation of
/// the greedy policy while that does not increase the residual.
OptimalSolution value_iteration(const Mdp& mdp, double tol);

/// Throws AssumptionViolation unless the behavior has full support and its
/// state chain is irreducible and aperiodic (structural check).
void check_behavior_assumption(const Mdp& mdp, const Policy& behavior);

/// Half L1 distance between each row of chain^k and mu, maximised over rows.
double max_tv_distance(const Mat& chain_power, const Vec& mu);

/// Half L1 distance between the two most distant rows.
double max_pairwise_tv(const Mat& chain_power);

/// Lazily extended TV distances d(k) = max_s ||P^k(s,.) - mu||_TV of one chain.
///
/// Below kExactFloor the computed distances are roundoff, so smaller deltas use
/// d(j m) <= dbar(m)^j with m the exact mixing time at the floor and dbar the
/// pairwise row distance. The result is then an upper bound on t_delta.
class MixingProfile {
public:
    static constexpr double kExactFloor = 1e-10;
    static constexpr int kCap = 1000000;

    MixingProfile(Mat chain, Vec mu);

    /// min{k : d(k) <= delta}, capped at kCap.
    int mixing_time(double delta);

private:
    int exact(double delta);

    Mat chain_;
    Vec mu_;
    Mat power_;
    std::vector<double> tv_;
    int floor_time_ = -1;
    double floor_contraction_ = 1.0;
};

/// min{k : max_s ||P^k(s,.) - mu||_TV <= delta}, capped at 10^6.
int mixing_time(const Mat& chain, const Vec& mu, double delta);

MixingInfo stationary_distribution(const Mdp& mdp, const Policy& behavior,
                                   std::span<const double> deltas = {});

/// Markovian rollout under the behavior policy. S_0 ~ mu unless start_state is set.
Trajectory sample_trajectory(const Mdp& mdp, const Policy& behavior, std::size_t length,
                             std::uint64_t seed, std::optional<int> start_state = std::nullopt);

/// Random Garnet MDP: each (s,a) reaches `branching` distinct states with
/// Dirichlet(1,...,1) weights; rewards Uniform[0,1].
Mdp gen_garnet(int n_states, int n_actions, int branching, std::uint64_t seed,
               double gamma = 0.9);

/// Two states, actions {stay, switch}, reward 1 in state 0.
Mdp two_loop(double gamma = 0.9);

}  // namespace aclab

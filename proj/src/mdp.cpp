#include "aclab/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>
#include <random>
#include <sstream>

namespace aclab {

namespace {

constexpr double kRowTol = 1e-12;

void check_rows(const Mat& m, const std::string& what) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        if ((m.row(r).array() < 0.0).any() || !m.row(r).allFinite())
            throw InvalidInput(what + ": negative or non-finite entry in row " + std::to_string(r));
        if (std::abs(m.row(r).sum() - 1.0) > kRowTol)
            throw InvalidInput(what + ": row " + std::to_string(r) + " sums to " +
                               std::to_string(m.row(r).sum()));
    }
}

std::string list_states(const std::vector<int>& states) {
    std::ostringstream os;
    os << '{';
    for (std::size_t i = 0; i < states.size(); ++i) os << (i ? "," : "") << states[i];
    os << '}';
    return os.str();
}

std::vector<int> reachable(const Mat& chain, bool forward) {
    const auto n = chain.rows();
    std::vector<int> seen(static_cast<std::size_t>(n), 0);
    std::queue<Eigen::Index> frontier;
    frontier.push(0);
    seen[0] = 1;
    while (!frontier.empty()) {
        const auto u = frontier.front();
        frontier.pop();
        for (Eigen::Index v = 0; v < n; ++v) {
            const double p = forward ? chain(u, v) : chain(v, u);
            if (p > 0.0 && !seen[static_cast<std::size_t>(v)]) {
                seen[static_cast<std::size_t>(v)] = 1;
                frontier.push(v);
            }
        }
    }
    return seen;
}

// Period of an irreducible chain: gcd over edges u->v of level(u) + 1 - level(v).
long chain_period(const Mat& chain) {
    const auto n = chain.rows();
    std::vector<long> level(static_cast<std::size_t>(n), -1);
    std::queue<Eigen::Index> frontier;
    level[0] = 0;
    frontier.push(0);
    while (!frontier.empty()) {
        const auto u = frontier.front();
        frontier.pop();
        for (Eigen::Index v = 0; v < n; ++v)
            if (chain(u, v) > 0.0 && level[static_cast<std::size_t>(v)] < 0) {
                level[static_cast<std::size_t>(v)] = level[static_cast<std::size_t>(u)] + 1;
                frontier.push(v);
            }
    }
    long g = 0;
    for (Eigen::Index u = 0; u < n; ++u)
        for (Eigen::Index v = 0; v < n; ++v)
            if (chain(u, v) > 0.0)
                g = std::gcd(g, std::abs(level[static_cast<std::size_t>(u)] + 1 -
                                         level[static_cast<std::size_t>(v)]));
    return g;
}

std::vector<int> all_states(int n) {
    std::vector<int> all(static_cast<std::size_t>(n));
    std::iota(all.begin(), all.end(), 0);
    return all;
}

void check_dims(const Mdp& mdp, const Policy& policy) {
    if (policy.n_states() != mdp.n_states() || policy.n_actions() != mdp.n_actions())
        throw InvalidInput("policy shape does not match the MDP");
}

void check_dims(const Mdp& mdp, const QTable& q) {
    if (q.size() != mdp.n_pairs()) throw InvalidInput("Q-table size does not match |S||A|");
}

}  // namespace

Policy::Policy(Mat probs) : probs_(std::move(probs)) {
    if (probs_.rows() < 1 || probs_.cols() < 1) throw InvalidInput("empty policy");
    check_rows(probs_, "policy");
}

Policy Policy::uniform(int n_states, int n_actions) {
    if (n_states < 1 || n_actions < 1) throw InvalidInput("policy sizes must be positive");
    return Policy(Mat::Constant(n_states, n_actions, 1.0 / n_actions));
}

Policy Policy::deterministic(const std::vector<int>& actions, int n_actions) {
    Mat p = Mat::Zero(static_cast<Eigen::Index>(actions.size()), n_actions);
    for (std::size_t s = 0; s < actions.size(); ++s) {
        if (actions[s] < 0 || actions[s] >= n_actions) throw InvalidInput("action out of range");
        p(static_cast<Eigen::Index>(s), actions[s]) = 1.0;
    }
    return Policy(std::move(p));
}

Mdp::Mdp(std::vector<Mat> transitions, Mat rewards, double gamma)
    : transitions_(std::move(transitions)), rewards_(std::move(rewards)), gamma_(gamma) {
    if (rewards_.rows() < 1 || rewards_.cols() < 1) throw InvalidInput("MDP needs |S|,|A| >= 1");
    if (static_cast<Eigen::Index>(transitions_.size()) != rewards_.cols())
        throw InvalidInput("transition tensor must have one matrix per action");
    if (!(gamma_ >= 0.0 && gamma_ < 1.0)) throw InvalidInput("discount must lie in [0,1)");
    if (!rewards_.allFinite() || (rewards_.array() < 0.0).any() || (rewards_.array() > 1.0).any())
        throw InvalidInput("rewards must lie in [0,1]");
    for (std::size_t a = 0; a < transitions_.size(); ++a) {
        const auto& p = transitions_[a];
        if (p.rows() != rewards_.rows() || p.cols() != rewards_.rows())
            throw InvalidInput("transition matrix for action " + std::to_string(a) +
                               " must be |S| x |S|");
        check_rows(p, "transitions[" + std::to_string(a) + "]");
    }
}

QTable Mdp::reward_vector() const {
    QTable r(n_pairs());
    for (int s = 0; s < n_states(); ++s)
        for (int a = 0; a < n_actions(); ++a) r(sa_index(s, a, n_actions())) = rewards_(s, a);
    return r;
}

Mat Mdp::pair_transition(const Mat& next_action_weights) const {
    const int ns = n_states();
    const int na = n_actions();
    Mat out(n_pairs(), n_pairs());
    for (int s = 0; s < ns; ++s)
        for (int a = 0; a < na; ++a) {
            const auto row = sa_index(s, a, na);
            for (int s2 = 0; s2 < ns; ++s2) {
                const double p = transitions_[static_cast<std::size_t>(a)](s, s2);
                for (int a2 = 0; a2 < na; ++a2)
                    out(row, sa_index(s2, a2, na)) = p * next_action_weights(s2, a2);
            }
        }
    return out;
}

Mat Mdp::state_chain(const Policy& policy) const {
    check_dims(*this, policy);
    Mat chain = Mat::Zero(n_states(), n_states());
    for (int s = 0; s < n_states(); ++s)
        for (int a = 0; a < n_actions(); ++a)
            chain.row(s) += policy(s, a) * transitions_[static_cast<std::size_t>(a)].row(s);
    return chain;
}

Mdp Mdp::with_gamma(double gamma) const { return Mdp(transitions_, rewards_, gamma); }

QTable exact_q(const Mdp& mdp, const Policy& policy) {
    check_dims(mdp, policy);
    if (mdp.n_pairs() > Mdp::kMaxStateActions)
        throw InvalidInput("exact solvers are limited to |S||A| <= 10000");
    const Mat system =
        Mat::Identity(mdp.n_pairs(), mdp.n_pairs()) - mdp.gamma() * mdp.pair_transition(policy.probs());
    return system.partialPivLu().solve(mdp.reward_vector());
}

QTable bellman_optimality(const Mdp& mdp, const QTable& q) {
    check_dims(mdp, q);
    const int na = mdp.n_actions();
    Vec best(mdp.n_states());
    for (int s = 0; s < mdp.n_states(); ++s) best(s) = q.segment(sa_index(s, 0, na), na).maxCoeff();
    QTable out(mdp.n_pairs());
    for (int a = 0; a < na; ++a) {
        const Vec next = mdp.transition(a) * best;
        for (int s = 0; s < mdp.n_states(); ++s)
            out(sa_index(s, a, na)) = mdp.reward(s, a) + mdp.gamma() * next(s);
    }
    return out;
}

QTable bellman_policy(const Mdp& mdp, const Policy& policy, const QTable& q) {
    check_dims(mdp, policy);
    check_dims(mdp, q);
    const int na = mdp.n_actions();
    Vec expected(mdp.n_states());
    for (int s = 0; s < mdp.n_states(); ++s)
        expected(s) = policy.probs().row(s).dot(q.segment(sa_index(s, 0, na), na));
    QTable out(mdp.n_pairs());
    for (int a = 0; a < na; ++a) {
        const Vec next = mdp.transition(a) * expected;
        for (int s = 0; s < mdp.n_states(); ++s)
            out(sa_index(s, a, na)) = mdp.reward(s, a) + mdp.gamma() * next(s);
    }
    return out;
}

Policy greedy_policy(const QTable& q, int n_states, int n_actions) {
    std::vector<int> actions(static_cast<std::size_t>(n_states));
    for (int s = 0; s < n_states; ++s)
        actions[static_cast<std::size_t>(s)] =
            static_cast<int>(argmax_lowest(q.segment(sa_index(s, 0, n_actions), n_actions)));
    return Policy::deterministic(actions, n_actions);
}

OptimalSolution value_iteration(const Mdp& mdp, double tol) {
    if (!(tol > 0.0)) throw InvalidInput("value iteration tolerance must be positive");
    QTable q = QTable::Zero(mdp.n_pairs());
    double residual = 0.0;
    do {
        QTable next = bellman_optimality(mdp, q);
        residual = (next - q).lpNorm<Eigen::Infinity>();
        q = std::move(next);
    } while (residual > tol);
    residual = (bellman_optimality(mdp, q) - q).lpNorm<Eigen::Infinity>();

    Policy policy = greedy_policy(q, mdp.n_states(), mdp.n_actions());
    for (int polish = 0; polish < 100; ++polish) {
        QTable evaluated = exact_q(mdp, policy);
        const double r = (bellman_optimality(mdp, evaluated) - evaluated).lpNorm<Eigen::Infinity>();
        if (r > residual) break;
        q = std::move(evaluated);
        residual = r;
        Policy improved = greedy_policy(q, mdp.n_states(), mdp.n_actions());
        if (improved.probs() == policy.probs()) break;
        policy = std::move(improved);
    }
    Policy greedy = greedy_policy(q, mdp.n_states(), mdp.n_actions());
    return {std::move(q), std::move(greedy)};
}

void check_behavior_assumption(const Mdp& mdp, const Policy& behavior) {
    check_dims(mdp, behavior);
    std::vector<int> zero_support;
    for (int s = 0; s < mdp.n_states(); ++s)
        if ((behavior.probs().row(s).array() <= 0.0).any()) zero_support.push_back(s);
    if (!zero_support.empty())
        throw AssumptionViolation("behavior policy has zero probabilities in states " +
                                  list_states(zero_support));

    const Mat chain = mdp.state_chain(behavior);
    const auto fwd = reachable(chain, true);
    const auto bwd = reachable(chain, false);
    std::vector<int> outside;
    for (int s = 0; s < mdp.n_states(); ++s)
        if (!fwd[static_cast<std::size_t>(s)] || !bwd[static_cast<std::size_t>(s)]) outside.push_back(s);
    if (!outside.empty())
        throw AssumptionViolation("behavior chain is reducible: states " + list_states(outside) +
                                  " do not communicate with state 0");
    const long period = chain_period(chain);
    if (period != 1)
        throw AssumptionViolation("behavior chain is periodic with period " + std::to_string(period) +
                                  "; every state in " + list_states(all_states(mdp.n_states())) +
                                  " is visited periodically");
}

double max_tv_distance(const Mat& chain_power, const Vec& mu) {
    double worst = 0.0;
    for (Eigen::Index s = 0; s < chain_power.rows(); ++s)
        worst = std::max(worst, 0.5 * (chain_power.row(s).transpose() - mu).lpNorm<1>());
    return worst;
}

double max_pairwise_tv(const Mat& chain_power) {
    double worst = 0.0;
    for (Eigen::Index x = 0; x < chain_power.rows(); ++x)
        for (Eigen::Index y = x + 1; y < chain_power.rows(); ++y)
            worst = std::max(worst, 0.5 * (chain_power.row(x) - chain_power.row(y)).lpNorm<1>());
    return worst;
}

MixingProfile::MixingProfile(Mat chain, Vec mu)
    : chain_(std::move(chain)), mu_(std::move(mu)), power_(Mat::Identity(chain_.rows(), chain_.cols())) {
    tv_.push_back(max_tv_distance(power_, mu_));
}

int MixingProfile::exact(double delta) {
    while (tv_.back() > delta) {
        if (static_cast<int>(tv_.size()) > kCap) return kCap;
        power_ = power_ * chain_;
        tv_.push_back(max_tv_distance(power_, mu_));
    }
    const auto it = std::find_if(tv_.begin(), tv_.end(), [delta](double v) { return v <= delta; });
    return static_cast<int>(it - tv_.begin());
}

int MixingProfile::mixing_time(double delta) {
    if (!(delta > 0.0)) throw InvalidInput("mixing precision must be positive");
    if (delta >= kExactFloor) return exact(delta);
    if (floor_time_ < 0) {
        floor_time_ = exact(kExactFloor);
        if (floor_time_ >= kCap) return kCap;
        Mat p = Mat::Identity(chain_.rows(), chain_.cols());
        for (int i = 0; i < floor_time_; ++i) p = p * chain_;
        floor_contraction_ = max_pairwise_tv(p);
    }
    if (floor_time_ >= kCap) return kCap;
    if (floor_contraction_ <= 0.0) return floor_time_;
    // floor_contraction_ <= 2 kExactFloor, so the power count is small.
    const double j = std::max(1.0, std::ceil(std::log(delta) / std::log(floor_contraction_)));
    return static_cast<int>(std::min<double>(j * floor_time_, kCap));
}

int mixing_time(const Mat& chain, const Vec& mu, double delta) {
    return MixingProfile(chain, mu).mixing_time(delta);
}

int MixingInfo::mixing_time(double delta) const {
    if (auto it = t_delta.find(delta); it != t_delta.end()) return it->second;
    return aclab::mixing_time(chain, stationary, delta);
}

MixingInfo stationary_distribution(const Mdp& mdp, const Policy& behavior,
                                   std::span<const double> deltas) {
    check_behavior_assumption(mdp, behavior);
    MixingInfo info;
    info.chain = mdp.state_chain(behavior);
    const auto n = info.chain.rows();

    // mu^T (P - I) = 0 with one balance equation replaced by sum(mu) = 1.
    Mat system = info.chain.transpose() - Mat::Identity(n, n);
    system.row(n - 1).setOnes();
    Vec rhs = Vec::Zero(n);
    rhs(n - 1) = 1.0;
    info.stationary = system.partialPivLu().solve(rhs);
    info.stationary = info.stationary.cwiseMax(0.0);
    info.stationary /= info.stationary.sum();

    static constexpr double kDefaultDeltas[] = {1e-1, 1e-2, 1e-3, 1e-4, 1e-6};
    if (deltas.empty()) deltas = kDefaultDeltas;
    for (double d : deltas) info.t_delta[d] = aclab::mixing_time(info.chain, info.stationary, d);

    // Least-squares fit of log TV_k = log C + k log sigma.
    std::vector<double> ks, logs, tvs;
    Mat power = Mat::Identity(n, n);
    for (int k = 0; k < 10000; ++k) {
        const double tv = max_tv_distance(power, info.stationary);
        if (tv < MixingProfile::kExactFloor) break;
        ks.push_back(k);
        logs.push_back(std::log(tv));
        tvs.push_back(tv);
        power = power * info.chain;
    }
    if (ks.size() >= 2) {
        const double mk = std::accumulate(ks.begin(), ks.end(), 0.0) / static_cast<double>(ks.size());
        const double ml = std::accumulate(logs.begin(), logs.end(), 0.0) / static_cast<double>(logs.size());
        double sxy = 0.0, sxx = 0.0;
        for (std::size_t i = 0; i < ks.size(); ++i) {
            sxy += (ks[i] - mk) * (logs[i] - ml);
            sxx += (ks[i] - mk) * (ks[i] - mk);
        }
        info.fit_sigma = std::clamp(std::exp(sxy / sxx), 1e-12, 1.0 - 1e-12);
    } else {
        info.fit_sigma = 1e-12;
    }
    // Raise C so the envelope dominates every observed distance.
    info.fit_c = 1.0;
    for (std::size_t i = 0; i < tvs.size(); ++i)
        info.fit_c = std::max(info.fit_c, tvs[i] / std::pow(info.fit_sigma, ks[i]));
    return info;
}

Trajectory sample_trajectory(const Mdp& mdp, const Policy& behavior, std::size_t length,
                             std::uint64_t seed, std::optional<int> start_state) {
    if (length < 1) throw InvalidInput("trajectory length must be at least 1");
    check_dims(mdp, behavior);
    std::mt19937_64 rng(seed);
    int s = 0;
    if (start_state) {
        if (*start_state < 0 || *start_state >= mdp.n_states()) throw InvalidInput("start state out of range");
        s = *start_state;
    } else {
        const MixingInfo mixing = stationary_distribution(mdp, behavior, std::span<const double>{});
        s = static_cast<int>(sample_index(rng, mixing.stationary));
    }
    Trajectory out;
    out.reserve(length);
    for (std::size_t k = 0; k < length; ++k) {
        const int a = static_cast<int>(sample_index(rng, behavior.probs().row(s)));
        out.push_back({s, a});
        s = static_cast<int>(sample_index(rng, mdp.transition(a).row(s)));
    }
    return out;
}

Mdp gen_garnet(int n_states, int n_actions, int branching, std::uint64_t seed, double gamma) {
    if (n_states < 1 || n_actions < 1) throw InvalidInput("Garnet sizes must be positive");
    if (branching < 1 || branching > n_states) throw InvalidInput("branching must lie in [1, n_states]");
    std::mt19937_64 rng(seed);
    std::vector<Mat> transitions(static_cast<std::size_t>(n_actions), Mat::Zero(n_states, n_states));
    Mat rewards(n_states, n_actions);
    std::vector<int> order(static_cast<std::size_t>(n_states));
    for (int s = 0; s < n_states; ++s)
        for (int a = 0; a < n_actions; ++a) {
            std::iota(order.begin(), order.end(), 0);
            for (int i = 0; i < branching; ++i) {
                const auto j = i + static_cast<int>(rng() % static_cast<std::uint64_t>(n_states - i));
                std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
            }
            Vec weights(branching);
            for (int i = 0; i < branching; ++i) weights(i) = -std::log1p(-uniform01(rng));
            weights /= weights.sum();
            for (int i = 0; i < branching; ++i)
                transitions[static_cast<std::size_t>(a)](s, order[static_cast<std::size_t>(i)]) += weights(i);
            rewards(s, a) = uniform01(rng);
        }
    return Mdp(std::move(transitions), std::move(rewards), gamma);
}

Mdp two_loop(double gamma) {
    std::vector<Mat> transitions(2, Mat::Zero(2, 2));
    transitions[0] << 1.0, 0.0, 0.0, 1.0;
    transitions[1] << 0.0, 1.0, 1.0, 0.0;
    Mat rewards(2, 2);
    rewards << 1.0, 1.0, 0.0, 0.0;
    return Mdp(std::move(transitions), std::move(rewards), gamma);
}

}  // namespace aclab

#pragma once

#include "aclab/actor.hpp"
#include "aclab/critic.hpp"
#include "aclab/features.hpp"
#include "aclab/mdp.hpp"

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>

namespace aclab::testing {

/// Hand-rolled generators; every caller passes a fixed seed.
class Gen {
public:
    explicit Gen(std::uint64_t seed) : rng_(seed) {}

    double uniform(double lo = 0.0, double hi = 1.0) { return lo + (hi - lo) * uniform01(rng_); }
    int integer(int lo, int hi) { return lo + static_cast<int>(uniform01(rng_) * (hi - lo + 1)); }
    std::uint64_t bits() { return rng_(); }

    Vec vector(Eigen::Index n, double lo, double hi) {
        Vec v(n);
        for (Eigen::Index i = 0; i < n; ++i) v(i) = uniform(lo, hi);
        return v;
    }

    /// Row-stochastic; min_mass > 0 gives full support.
    Policy policy(int n_states, int n_actions, double min_mass = 0.0) {
        Mat p(n_states, n_actions);
        for (int s = 0; s < n_states; ++s) {
            for (int a = 0; a < n_actions; ++a) p(s, a) = min_mass + uniform();
            p.row(s) /= p.row(s).sum();
        }
        return Policy(std::move(p));
    }

    std::mt19937_64& engine() { return rng_; }

private:
    std::mt19937_64 rng_;
};

/// Garnet instance whose uniform behavior chain satisfies the mixing assumption.
inline Mdp mixing_garnet(int n_states, int n_actions, int branching, std::uint64_t seed, double gamma = 0.9) {
    for (std::uint64_t s = seed;; s += 1000003) {
        Mdp mdp = gen_garnet(n_states, n_actions, branching, s, gamma);
        try {
            check_behavior_assumption(mdp, Policy::uniform(n_states, n_actions));
            return mdp;
        } catch (const AssumptionViolation&) {
        }
    }
}

/// Everything derived from (mdp, behavior, features, factors) at a fixed n.
struct CriticCase {
    MixingInfo mixing;
    WeightMatrixInfo weights;
    StabilityReport report;
};

inline CriticCase critic_case(const Mdp& mdp, const Policy& behavior, const FeatureMap& features,
                              const IsFactorTable& factors, std::optional<int> n = std::nullopt) {
    CriticCase c;
    c.mixing = stationary_distribution(mdp, behavior);
    c.weights = spectral_info(features, c.mixing, behavior);
    const StabilityReport probe = stability_report(factors, c.weights, mdp.gamma(), 1);
    const int chosen = n ? *n : probe.n_required.value_or(1);
    c.report = stability_report(factors, c.weights, mdp.gamma(), chosen);
    return c;
}

/// Least-squares slope of log y on log x.
inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += std::log(x[i]);
        my += std::log(y[i]);
    }
    mx /= static_cast<double>(x.size());
    my /= static_cast<double>(y.size());
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = std::log(x[i]) - mx;
        sxy += dx * (std::log(y[i]) - my);
        sxx += dx * dx;
    }
    return sxy / sxx;
}

/// One state, two self-loop actions with the given rewards.
inline Mdp bandit_loop(double gamma, double r0 = 0.0, double r1 = 1.0) {
    std::vector<Mat> transitions(2, Mat::Ones(1, 1));
    Mat rewards(1, 2);
    rewards << r0, r1;
    return Mdp(std::move(transitions), std::move(rewards), gamma);
}

}  // namespace aclab::testing

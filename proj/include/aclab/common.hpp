#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace aclab {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Q-functions are flat vectors over state-action pairs, index s * n_actions + a.
using QTable = Eigen::VectorXd;

/// Bad arguments, malformed files, dimension mismatches. CLI exit code 1.
class InvalidInput : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Behavior-policy or chain assumptions that do not hold. CLI exit code 2.
class AssumptionViolation : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Contraction / stepsize conditions that fail. CLI exit code 2.
class StabilityError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A theoretical precondition for a bound does not hold.
class PreconditionError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline Eigen::Index sa_index(Eigen::Index s, Eigen::Index a, Eigen::Index n_actions) {
    return s * n_actions + a;
}

/// Lowest-index argmax of a row segment.
template <typename Derived>
Eigen::Index argmax_lowest(const Eigen::DenseBase<Derived>& v) {
    Eigen::Index best = 0;
    for (Eigen::Index i = 1; i < v.size(); ++i)
        if (v(i) > v(best)) best = i;
    return best;
}

/// Uniform double in [0,1) from a 64-bit engine; platform independent, unlike
/// std::uniform_real_distribution.
template <typename Engine>
double uniform01(Engine& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Inverse-CDF draw from a discrete distribution given by a dense row.
template <typename Engine, typename Derived>
Eigen::Index sample_index(Engine& rng, const Eigen::DenseBase<Derived>& probs) {
    const double u = uniform01(rng);
    double acc = 0.0;
    Eigen::Index last_positive = 0;
    for (Eigen::Index i = 0; i < probs.size(); ++i) {
        if (probs(i) <= 0.0) continue;
        last_positive = i;
        acc += probs(i);
        if (u < acc) return i;
    }
    return last_positive;
}

}  // namespace aclab

#pragma once

#include "aclab/common.hpp"
#include "aclab/features.hpp"
#include "aclab/mdp.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace aclab {

enum class FactorScheme { lambda_averaged, two_sided, vanilla, on_policy, custom };

std::string to_string(FactorScheme scheme);
FactorScheme parse_scheme(const std::string& name);

/// Two-sided truncation g_{lo,hi}(x) = min(max(x, lo), hi).
inline double truncate(double x, double lo, double hi) { return x < lo ? lo : (x > hi ? hi : x); }

/// Generalized importance-sampling factors c(s,a), rho(s,a) and the summaries
/// of D_c = diag(sum_a' pi_b(a'|s) c(s,a')) and D_rho.
struct IsFactorTable {
    FactorScheme scheme = FactorScheme::custom;
    Mat c;    // |S| x |A|
    Mat rho;  // |S| x |A|
    Vec lambda;  // lambda-averaged only
    Vec lower;   // two-sided only
    Vec upper;   // two-sided only

    Vec d_c;    // per state
    Vec d_rho;  // per state
    double d_c_min = 0, d_c_max = 0, d_rho_min = 0, d_rho_max = 0;
    double c_max = 0, rho_max = 0;

    bool c_equals_rho() const { return c == rho; }
};

/// c = rho = lambda(s) pi/pi_b + 1 - lambda(s).
IsFactorTable make_lambda_factors(const Policy& target, const Policy& behavior, const Vec& lambda);

/// c = rho = g_{l(s),u(s)}(pi/pi_b) with l(s) in [0,1] found by bisection so
/// that sum_a pi_b(a|s) g(pi(a|s)/pi_b(a|s)) = 1.
IsFactorTable make_two_sided_factors(const Policy& target, const Policy& behavior, const Vec& upper);

/// c = rho = pi/pi_b.
IsFactorTable make_vanilla_factors(const Policy& target, const Policy& behavior);

/// c = rho = 1: evaluates the behavior policy itself.
IsFactorTable make_on_policy_factors(const Policy& behavior);

IsFactorTable make_custom_factors(const Policy& behavior, Mat c, Mat rho);

/// Per-state lambda(s) = min(1, (1/gamma - 1) / (max_a pi/pi_b - 1)), the
/// largest choice keeping gamma * rho_max <= 1.
Vec lambda_for_bounded_rho(const Policy& target, const Policy& behavior, double gamma);

/// f_n(x) = sum_{i<n} x^i.
double geometric_sum(double x, int n);

/// 1 - f_n(gamma D_c,min)(1 - gamma D_rho,max).
double gamma_tilde(const IsFactorTable& factors, double gamma, int n);

/// Lipschitz parameter of the TD update direction.
double variance_parameter(const IsFactorTable& factors, double gamma, int n);

struct StabilityReport {
    int n = 1;
    double gamma_tilde_n = 0;
    double gamma_c = 0;
    bool c_le_rho = false;
    bool rho_contractive = false;    // gamma D_rho,max < 1
    bool limit_contractive = false;  // lim_n gamma_c < 1
    double limit_gamma_c = 0;
    std::optional<int> n_required;   // empty when infeasible
    double L = 0;
};

StabilityReport stability_report(const IsFactorTable& factors, const WeightMatrixInfo& weights,
                                 double gamma, int n);

/// Matrix forms of T_c and H_rho for a fixed MDP, behavior and factor table.
class GeneralizedBellman {
public:
    GeneralizedBellman(const Mdp& mdp, const Policy& behavior, const IsFactorTable& factors, int n);

    int n() const { return n_; }
    double gamma() const { return gamma_; }
    const QTable& reward() const { return reward_; }
    /// P_{pi_c} D_c as a state-action matrix.
    const Mat& trace_kernel() const { return trace_kernel_; }
    /// P_{pi_rho} D_rho as a state-action matrix.
    const Mat& rho_kernel() const { return rho_kernel_; }

    /// T_c(X) = sum_{i<n} (gamma P_{pi_c} D_c)^i X, evaluated by Horner's rule.
    template <typename Derived>
    typename Derived::PlainObject trace(const Eigen::MatrixBase<Derived>& x) const {
        typename Derived::PlainObject acc = x;
        for (int i = 1; i < n_; ++i) acc = x + gamma_ * (trace_kernel_ * acc);
        return acc;
    }

    Mat trace_matrix() const { return trace(Mat::Identity(reward_.size(), reward_.size())); }

    QTable h_rho(const QTable& q) const { return reward_ + gamma_ * (rho_kernel_ * q); }

    /// B(Q) = T_c(H_rho(Q) - Q) + Q.
    QTable apply(const QTable& q) const { return trace(QTable(h_rho(q) - q)) + q; }

private:
    int n_;
    double gamma_;
    QTable reward_;
    Mat trace_kernel_;
    Mat rho_kernel_;
};

QTable generalized_bellman(const QTable& q, const Mdp& mdp, const Policy& behavior,
                           const IsFactorTable& factors, int n);

/// Solution of Q = B(Q), via (I - gamma P_{pi_rho} D_rho) Q = R.
QTable q_fixed_point(const Mdp& mdp, const Policy& behavior, const IsFactorTable& factors);

/// Linear system A w = b of the generalized projected Bellman equation;
/// the expected update direction is b - A w.
struct PbeSystem {
    Mat a;
    Vec b;
    Vec expected_update(const Vec& w) const { return b - a * w; }
};

PbeSystem pbe_system(const GeneralizedBellman& op, const FeatureMap& features,
                     const WeightMatrixInfo& weights);

/// Unique w with Phi w = Proj B(Phi w). Requires gamma_c < 1.
Vec pbe_fixed_point(const Mdp& mdp, const Policy& behavior, const IsFactorTable& factors,
                    const FeatureMap& features, int n, const WeightMatrixInfo& weights);

struct BiasBound {
    /// ||Q_cr - Proj Q_cr||_K / sqrt(1 - gamma_c^2)
    double approx_term = 0;
    /// gamma max_s ||pi(.|s) - pi_b(.|s) rho(s,.)||_1 / ((1-gamma)(1 - gamma D_rho,max))
    double sampling_bias_term = 0;
    /// Scheme-specific sampling term: (1-lambda(s))||pi - pi_b||_1 or sum(u - l) form.
    std::optional<double> specialized_sampling;
    /// Two-sided variant of the first term, ||Q_cr - Phi w||_K / sqrt(1 - gamma_c^2).
    std::optional<double> specialized_approx;

    double total() const { return approx_term + sampling_bias_term; }
    double specialized_total() const {
        return specialized_approx.value_or(approx_term) +
               specialized_sampling.value_or(sampling_bias_term);
    }
};

BiasBound bias_bound(const Mdp& mdp, const Policy& behavior, const IsFactorTable& factors,
                     const FeatureMap& features, int n, const Policy& target,
                     const WeightMatrixInfo& weights);

struct Stepsize {
    enum class Kind { constant, diminishing };
    Kind kind = Kind::constant;
    double alpha = 0.0;
    double h = 0.0;

    static Stepsize constant(double alpha) { return {Kind::constant, alpha, 0.0}; }
    static Stepsize diminishing(double alpha, double h) { return {Kind::diminishing, alpha, h}; }
    double at(std::int64_t k) const {
        return kind == Kind::constant ? alpha : alpha / (static_cast<double>(k) + h);
    }
};

struct CriticConfig {
    int n = 1;
    std::int64_t iterations = 0;  // K
    Stepsize stepsize;
    Vec w0;  // empty means zero
    std::uint64_t seed = 0;
};

struct CriticRun {
    std::vector<Vec> weights;          // w_0 .. w_K
    Vec fixed_point;
    std::vector<double> alphas;        // alpha_k for k = 0 .. K
    std::vector<double> errors;        // ||w_k - w*||^2
    std::vector<double> bounds;        // NaN where the bound is not defined
    StabilityReport report;
    WeightMatrixInfo weights_info;
    int t_mix = 0;                     // t_{alpha_K}; 0 when alpha_K = 0
    std::vector<std::string> warnings;
};

/// Algorithm-3 iteration over a behavior trajectory of length >= K + n.
/// Returns every iterate w_0 .. w_K.
std::vector<Vec> td_iterate(const Mdp& mdp, const IsFactorTable& factors, const FeatureMap& features,
                            const CriticConfig& config, const Trajectory& trajectory);

/// td_iterate plus the exact fixed point, squared errors and the finite-sample bound.
CriticRun td_run(const Mdp& mdp, const Policy& behavior, const IsFactorTable& factors,
                 const FeatureMap& features, const CriticConfig& config, const Trajectory& trajectory);

/// Samples a stationary behavior trajectory of length K + n from config.seed first.
CriticRun td_run(const Mdp& mdp, const Policy& behavior, const IsFactorTable& factors,
                 const FeatureMap& features, const CriticConfig& config);

/// (1 - gamma_c) lambda_min / (130 L^2).
double stepsize_cap(const StabilityReport& report, double lambda_min);

/// Largest alpha of the form cap / (t_alpha + n + 1) with alpha (t_alpha + n + 1) <= cap.
double max_constant_stepsize(const StabilityReport& report, double lambda_min, const MixingInfo& mixing);

/// Smallest integer h such that sum_{i=k-(t_k+n+1)}^{k-1} alpha/(i+h) <= cap for
/// every k in [t_k+n+1, horizon].
double min_diminishing_offset(double alpha, const StabilityReport& report, double lambda_min,
                              const MixingInfo& mixing, std::int64_t horizon);

/// Finite-sample bound E||w_k - w*||^2 for k = 0..K (NaN before the burn-in).
/// Throws PreconditionError when the stepsize is outside the range where the bound holds.
std::vector<double> theoretical_bound_curve(const CriticConfig& config, const StabilityReport& report,
                                            double lambda_min, const MixingInfo& mixing,
                                            const Vec& w0, const Vec& w_star);

}  // namespace aclab

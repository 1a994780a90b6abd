#pragma once

#include "aclab/common.hpp"
#include "aclab/mdp.hpp"

#include <cstdint>

namespace aclab {

/// Feature matrix Phi, one row per state-action pair (row s * |A| + a).
///
/// Construction enforces full column rank (smallest singular value at least
/// 1e-10 times the largest) and rescales Phi by 1 / ||Phi||_inf when the
/// max-row-L1 norm exceeds one, printing a warning to stderr.
class FeatureMap {
public:
    explicit FeatureMap(Mat phi);

    /// Identity features; ||Phi||_inf = 1.
    static FeatureMap tabular(Eigen::Index n_pairs);

    /// Dense Gaussian features, normalised to ||Phi||_inf = 1.
    static FeatureMap random(Eigen::Index n_pairs, Eigen::Index dim, std::uint64_t seed);

    const Mat& phi() const { return phi_; }
    Eigen::Index dim() const { return phi_.cols(); }
    Eigen::Index n_pairs() const { return phi_.rows(); }
    auto row(Eigen::Index sa) const { return phi_.row(sa); }

    /// Factor applied at construction (1 when the input already met the bound).
    double rescale_factor() const { return rescale_; }

    QTable values(const Vec& w) const { return phi_ * w; }

private:
    Mat phi_;
    double rescale_ = 1.0;
};

/// K_SA = diag(mu(s) pi_b(a|s)) together with its spectral summaries.
struct WeightMatrixInfo {
    Vec ksa_diag;
    double ksa_min = 0.0;
    /// Smallest eigenvalue of Phi^T K_SA Phi.
    double lambda_min = 0.0;
};

/// K_SA diagonal only; lambda_min is left at zero.
WeightMatrixInfo ksa_weights(const MixingInfo& mixing, const Policy& behavior);

WeightMatrixInfo spectral_info(const FeatureMap& features, const MixingInfo& mixing,
                               const Policy& behavior);

/// sqrt(sum_{s,a} mu(s) pi_b(a|s) Q(s,a)^2).
double weighted_norm(const QTable& q, const WeightMatrixInfo& w);

/// K_SA-orthogonal projection onto span(Phi): Phi (Phi^T K Phi)^{-1} Phi^T K q.
QTable project(const QTable& q, const FeatureMap& features, const WeightMatrixInfo& w);

/// Coefficients of the projection, (Phi^T K Phi)^{-1} Phi^T K q.
Vec project_coefficients(const QTable& q, const FeatureMap& features, const WeightMatrixInfo& w);

}  // namespace aclab

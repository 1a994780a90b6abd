#include "aclab/features.hpp"

#include <iostream>
#include <cmath>
#include <random>

namespace aclab {

namespace {

double max_row_l1(const Mat& m) { return m.cwiseAbs().rowwise().sum().maxCoeff(); }

void check_dims(const QTable& q, const WeightMatrixInfo& w) {
    if (q.size() != w.ksa_diag.size()) throw InvalidInput("Q-table size does not match K_SA");
}

}  // namespace

FeatureMap::FeatureMap(Mat phi) : phi_(std::move(phi)) {
    if (phi_.rows() < 1 || phi_.cols() < 1) throw InvalidInput("empty feature matrix");
    if (!phi_.allFinite()) throw InvalidInput("feature matrix has non-finite entries");
    if (phi_.cols() > phi_.rows()) throw InvalidInput("feature dimension exceeds |S||A|");

    const Eigen::JacobiSVD<Mat> svd(phi_);
    const Vec& sv = svd.singularValues();
    if (sv(sv.size() - 1) < 1e-10 * sv(0))
        throw InvalidInput("feature matrix is rank deficient (columns must be linearly independent)");

    const double norm = max_row_l1(phi_);
    if (norm > 1.0 + 1e-12) {
        rescale_ = 1.0 / norm;
        phi_ *= rescale_;
        std::cerr << "warning: feature matrix rescaled by " << rescale_ << " so that ||Phi||_inf <= 1\n";
    }
}

FeatureMap FeatureMap::tabular(Eigen::Index n_pairs) {
    return FeatureMap(Mat::Identity(n_pairs, n_pairs));
}

FeatureMap FeatureMap::random(Eigen::Index n_pairs, Eigen::Index dim, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    // Box-Muller on uniform01 keeps the features identical across standard libraries.
    const auto normal = [&rng] {
        const double u = 1.0 - uniform01(rng);
        return std::sqrt(-2.0 * std::log(u)) * std::cos(2.0 * M_PI * uniform01(rng));
    };
    Mat phi(n_pairs, dim);
    for (Eigen::Index i = 0; i < n_pairs; ++i)
        for (Eigen::Index j = 0; j < dim; ++j) phi(i, j) = normal();
    phi /= max_row_l1(phi);
    return FeatureMap(std::move(phi));
}

WeightMatrixInfo ksa_weights(const MixingInfo& mixing, const Policy& behavior) {
    if (mixing.stationary.size() != behavior.n_states())
        throw InvalidInput("stationary distribution does not match behavior policy");
    const int na = behavior.n_actions();
    WeightMatrixInfo info;
    info.ksa_diag.resize(static_cast<Eigen::Index>(behavior.n_states()) * na);
    for (int s = 0; s < behavior.n_states(); ++s)
        for (int a = 0; a < na; ++a)
            info.ksa_diag(sa_index(s, a, na)) = mixing.stationary(s) * behavior(s, a);
    info.ksa_min = info.ksa_diag.minCoeff();
    if (!(info.ksa_min > 0.0))
        throw AssumptionViolation("K_SA has a zero diagonal entry; behavior must visit every pair");
    return info;
}

WeightMatrixInfo spectral_info(const FeatureMap& features, const MixingInfo& mixing,
                               const Policy& behavior) {
    WeightMatrixInfo info = ksa_weights(mixing, behavior);
    if (features.n_pairs() != info.ksa_diag.size())
        throw InvalidInput("feature rows do not match |S||A|");
    const Mat& phi = features.phi();
    const Mat gram = phi.transpose() * info.ksa_diag.asDiagonal() * phi;
    const Eigen::SelfAdjointEigenSolver<Mat> eig(gram, Eigen::EigenvaluesOnly);
    info.lambda_min = eig.eigenvalues()(0);
    return info;
}

double weighted_norm(const QTable& q, const WeightMatrixInfo& w) {
    check_dims(q, w);
    return std::sqrt((w.ksa_diag.array() * q.array().square()).sum());
}

Vec project_coefficients(const QTable& q, const FeatureMap& features, const WeightMatrixInfo& w) {
    check_dims(q, w);
    if (features.n_pairs() != q.size()) throw InvalidInput("feature rows do not match Q-table size");
    const Mat& phi = features.phi();
    const Mat weighted = phi.transpose() * w.ksa_diag.asDiagonal();
    const Mat gram = weighted * phi;
    return gram.ldlt().solve(weighted * q);
}

QTable project(const QTable& q, const FeatureMap& features, const WeightMatrixInfo& w) {
    return features.phi() * project_coefficients(q, features, w);
}

}  // namespace aclab

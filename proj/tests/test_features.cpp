#include "support.hpp"

#include <doctest.h>

#include <cmath>

using namespace aclab;
using aclab::testing::Gen;

namespace {

struct Setup {
    Mdp mdp;
    Policy behavior;
    MixingInfo mixing;
};

Setup garnet_setup(int s, int a, std::uint64_t seed) {
    Mdp mdp = aclab::testing::mixing_garnet(s, a, 3, seed);
    Policy b = Policy::uniform(s, a);
    MixingInfo mixing = stationary_distribution(mdp, b);
    return {std::move(mdp), std::move(b), std::move(mixing)};
}

// Smallest eigenvalue of a symmetric positive definite matrix by inverse power iteration.
double inverse_power_min(const Mat& m) {
    const auto lu = m.fullPivLu();
    Vec v = Vec::Ones(m.rows()).normalized();
    double estimate = 0;
    for (int i = 0; i < 2000; ++i) {
        Vec next = lu.solve(v);
        estimate = 1.0 / next.norm();
        v = next.normalized();
    }
    return estimate;
}

}  // namespace

TEST_CASE("weighted norm examples") {
    const Setup st = garnet_setup(4, 2, 1);
    const WeightMatrixInfo w = ksa_weights(st.mixing, st.behavior);
    CHECK(weighted_norm(QTable::Zero(8), w) == 0.0);
    CHECK(weighted_norm(QTable::Ones(8), w) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::abs(w.ksa_diag.sum() - 1.0) <= 1e-10);
    CHECK(w.ksa_min == w.ksa_diag.minCoeff());

    const MixingInfo loop = stationary_distribution(two_loop(), Policy::uniform(2, 2));
    const WeightMatrixInfo lw = ksa_weights(loop, Policy::uniform(2, 2));
    Gen gen(2);
    const QTable q = gen.vector(4, -4, 4);
    double brute = 0;
    for (int s = 0; s < 2; ++s)
        for (int a = 0; a < 2; ++a) brute += loop.stationary(s) * 0.5 * q(2 * s + a) * q(2 * s + a);
    CHECK(weighted_norm(q, lw) == doctest::Approx(std::sqrt(brute)).epsilon(1e-13));
}

TEST_CASE("projection of a vector in the span is the identity") {
    const Setup st = garnet_setup(5, 3, 3);
    const FeatureMap f = FeatureMap::random(15, 4, 9);
    const WeightMatrixInfo w = spectral_info(f, st.mixing, st.behavior);
    Gen gen(3);
    const QTable in_span = f.values(gen.vector(4, -2, 2));
    CHECK((project(in_span, f, w) - in_span).lpNorm<Eigen::Infinity>() <= 1e-10);
    const QTable q = gen.vector(15, -5, 5);
    const QTable p = project(q, f, w);
    CHECK((project(p, f, w) - p).lpNorm<Eigen::Infinity>() <= 1e-10);
    const Vec inner = f.phi().transpose() * w.ksa_diag.asDiagonal() * (q - p);
    CHECK(inner.lpNorm<Eigen::Infinity>() <= 1e-9);
}

TEST_CASE("tabular projection is the identity") {
    const Setup st = garnet_setup(4, 3, 4);
    const FeatureMap f = FeatureMap::tabular(12);
    const WeightMatrixInfo w = spectral_info(f, st.mixing, st.behavior);
    Gen gen(4);
    const QTable q = gen.vector(12, -5, 5);
    CHECK((project(q, f, w) - q).lpNorm<Eigen::Infinity>() <= 1e-10);
}

TEST_CASE("two-dimensional projection on TwoLoop matches the normal equations") {
    const Policy b = Policy::uniform(2, 2);
    const MixingInfo mixing = stationary_distribution(two_loop(), b);
    const FeatureMap f = FeatureMap::random(4, 2, 5);
    const WeightMatrixInfo w = spectral_info(f, mixing, b);
    Gen gen(5);
    const QTable q = gen.vector(4, -3, 3);
    // Cramer's rule on G c = r with G = Phi^T K Phi and r = Phi^T K q, summed by hand.
    double g00 = 0, g01 = 0, g11 = 0, r0 = 0, r1 = 0;
    for (int i = 0; i < 4; ++i) {
        const double k = w.ksa_diag(i), x = f.phi()(i, 0), y = f.phi()(i, 1);
        g00 += k * x * x;
        g01 += k * x * y;
        g11 += k * y * y;
        r0 += k * x * q(i);
        r1 += k * y * q(i);
    }
    const double det = g00 * g11 - g01 * g01;
    const double c0 = (r0 * g11 - g01 * r1) / det, c1 = (g00 * r1 - g01 * r0) / det;
    const Vec coeff = project_coefficients(q, f, w);
    CHECK(coeff(0) == doctest::Approx(c0).epsilon(1e-10));
    CHECK(coeff(1) == doctest::Approx(c1).epsilon(1e-10));
    const QTable p = project(q, f, w);
    for (int i = 0; i < 4; ++i)
        CHECK(p(i) == doctest::Approx(c0 * f.phi()(i, 0) + c1 * f.phi()(i, 1)).epsilon(1e-10));
}

TEST_CASE("rank-deficient features are rejected") {
    Mat phi(4, 2);
    phi << 0.5, 0.25, 0.2, 0.1, 0.1, 0.05, 0.4, 0.2;
    CHECK_THROWS_AS(FeatureMap{phi}, InvalidInput);
    CHECK_THROWS_AS(FeatureMap{Mat::Ones(2, 3)}, InvalidInput);
    Mat nan = Mat::Identity(2, 2);
    nan(0, 0) = std::nan("");
    CHECK_THROWS_AS(FeatureMap{nan}, InvalidInput);
}

TEST_CASE("features exceeding the norm bound are rescaled") {
    Mat phi(3, 2);
    phi << 1, 1, 2, 0, 0, 1;
    const FeatureMap f(phi);
    CHECK(f.rescale_factor() == doctest::Approx(0.5));
    CHECK(f.phi().cwiseAbs().rowwise().sum().maxCoeff() == doctest::Approx(1.0));
    const FeatureMap r = FeatureMap::random(20, 5, 1);
    CHECK(r.rescale_factor() == 1.0);
    CHECK(r.phi().cwiseAbs().rowwise().sum().maxCoeff() <= 1.0 + 1e-12);
}

TEST_CASE("spectral info in the diagonal cases") {
    const Policy b = Policy::uniform(2, 2);
    const MixingInfo mixing = stationary_distribution(two_loop(), b);
    const WeightMatrixInfo tab = spectral_info(FeatureMap::tabular(4), mixing, b);
    CHECK(tab.lambda_min == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(tab.ksa_min == doctest::Approx(0.25).epsilon(1e-12));
    const double c = 0.7;
    const WeightMatrixInfo one = spectral_info(FeatureMap(Mat::Constant(4, 1, c)), mixing, b);
    CHECK(one.lambda_min == doctest::Approx(c * c).epsilon(1e-12));
}

TEST_CASE("lambda_min on random features matches inverse power iteration") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const Setup st = garnet_setup(6, 3, 10 + seed);
        const FeatureMap f = FeatureMap::random(18, 5, seed);
        const WeightMatrixInfo w = spectral_info(f, st.mixing, st.behavior);
        const Mat gram = f.phi().transpose() * w.ksa_diag.asDiagonal() * f.phi();
        CHECK(std::abs(w.lambda_min - inverse_power_min(gram)) <= 1e-8);
        CHECK(w.lambda_min > 0.0);
    }
}

TEST_CASE("zero behavior mass is an assumption violation") {
    const Setup st = garnet_setup(3, 2, 20);
    Mat p = st.behavior.probs();
    p(1, 0) = 0.0;
    p(1, 1) = 1.0;
    CHECK_THROWS_AS(ksa_weights(st.mixing, Policy(p)), AssumptionViolation);
}

TEST_CASE("norm ordering, non-expansive projection and the Pythagorean identity") {
    Gen gen(21);
    for (int i = 0; i < 30; ++i) {
        const int s = gen.integer(3, 7), a = gen.integer(2, 4);
        const Setup st = garnet_setup(s, a, gen.bits());
        const Eigen::Index pairs = st.mdp.n_pairs();
        const FeatureMap f = FeatureMap::random(pairs, gen.integer(1, static_cast<int>(pairs)), gen.bits());
        const WeightMatrixInfo w = spectral_info(f, st.mixing, st.behavior);
        const QTable q1 = gen.vector(pairs, -5, 5), q2 = gen.vector(pairs, -5, 5);
        const double kn = weighted_norm(q1, w), sup = q1.lpNorm<Eigen::Infinity>();
        CHECK(kn <= sup + 1e-12);
        CHECK(sup <= kn / std::sqrt(w.ksa_min) + 1e-12);
        const QTable p1 = project(q1, f, w), p2 = project(q2, f, w);
        CHECK(weighted_norm(p1 - p2, w) <= weighted_norm(q1 - q2, w) + 1e-12);
        const double lhs = kn * kn;
        const double rhs = std::pow(weighted_norm(p1, w), 2) + std::pow(weighted_norm(q1 - p1, w), 2);
        CHECK(std::abs(lhs - rhs) <= 1e-9);
    }
}

#include "support.hpp"

#include "aclab/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

using namespace aclab;
using aclab::testing::Gen;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

template <typename... Args>
std::string format(const char* fmt, Args... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, fmt, args...);
    return buf;
}

struct GarnetShape {
    int states;
    int actions;
    int branching;
};

GarnetShape random_shape(Gen& gen) {
    const int s = gen.integer(5, 10);
    const int a = gen.integer(2, 5);
    return {s, a, gen.integer(2, std::min(s, 4))};
}

// 1. Exact-critic NPG with increasing stepsizes.
Outcome npg_exact_critic() {
    Gen gen(101);
    const int horizon = 30;
    int final_ok = 0, curve_ok = 0;
    double worst_final = 0.0;
    for (int i = 0; i < 20; ++i) {
        const GarnetShape g = random_shape(gen);
        const Mdp mdp = gen_garnet(g.states, g.actions, g.branching, gen.bits(), 0.9);
        const ActorRun run = run_actor_exact(mdp, UpdateRule::npg, StepsizeMode::increasing, 1.0, horizon);
        const double gamma = mdp.gamma();
        const double limit = 3.0 * std::pow(gamma, horizon) / ((1 - gamma) * (1 - gamma));
        const double final_err = run.records.back().err_inf;
        worst_final = std::max(worst_final, final_err / limit);
        if (final_err <= limit) ++final_ok;
        bool dominated = true;
        for (const ActorRecord& r : run.records) {
            const double envelope = actor_n1(gamma, r.t, run.records.front().err_inf) +
                                    2.0 * std::pow(gamma, r.t) / ((1 - gamma) * (1 - gamma));
            if (r.err_inf > envelope * (1 + 1e-12) || r.err_inf > r.bound() * (1 + 1e-12)) dominated = false;
        }
        if (dominated) ++curve_ok;
    }
    return {final_ok == 20 && curve_ok == 20,
            format("final<=3g^T/(1-g)^2 on %d/20 (worst ratio %.3g), curve dominated on %d/20", final_ok,
                   worst_final, curve_ok)};
}

// 2. Constant-stepsize floor shrinks with beta.
Outcome boltzmann_floor() {
    Gen gen(202);
    int better = 0;
    double sum10 = 0, sum100 = 0;
    for (int i = 0; i < 20; ++i) {
        const GarnetShape g = random_shape(gen);
        const Mdp mdp = gen_garnet(g.states, g.actions, g.branching, gen.bits(), 0.9);
        const double e10 =
            run_actor_exact(mdp, UpdateRule::boltzmann, StepsizeMode::constant, 10.0, 50).records.back().err_inf;
        const double e100 =
            run_actor_exact(mdp, UpdateRule::boltzmann, StepsizeMode::constant, 100.0, 50).records.back().err_inf;
        sum10 += e10;
        sum100 += e100;
        if (e100 < e10 + 1e-9) ++better;
    }
    return {better >= 18, format("beta=100 below beta=10 on %d/20 (mean %.3g vs %.3g)", better, sum100 / 20,
                                 sum10 / 20)};
}

struct RandomTriple {
    Mdp mdp;
    Policy behavior;
    Policy target;
    FeatureMap features;
    IsFactorTable factors;
};

RandomTriple random_triple(Gen& gen, int i) {
    const int s = gen.integer(3, 8);
    const int a = gen.integer(2, 4);
    const Mdp mdp = aclab::testing::mixing_garnet(s, a, gen.integer(2, s), gen.bits(), 0.9);
    const Policy behavior = gen.policy(s, a, 0.2);
    const Policy target = gen.policy(s, a);
    const Eigen::Index pairs = mdp.n_pairs();
    FeatureMap features = gen.uniform() < 0.3 ? FeatureMap::tabular(pairs)
                                              : FeatureMap::random(pairs, gen.integer(1, static_cast<int>(pairs)), gen.bits());
    IsFactorTable factors;
    switch (i % 4) {
    case 0: factors = make_lambda_factors(target, behavior, gen.vector(s, 0.0, 1.0)); break;
    case 1: factors = make_two_sided_factors(target, behavior, gen.vector(s, 1.0, 3.0)); break;
    case 2: factors = make_vanilla_factors(target, behavior); break;
    default: factors = make_on_policy_factors(behavior); break;
    }
    return {mdp, behavior, target, std::move(features), std::move(factors)};
}

// 3. Expected update vanishes at the PBE solution, and the solution is a projected fixed point.
Outcome pbe_equivalence() {
    Gen gen(303);
    double worst_update = 0, worst_fixed = 0;
    int tested = 0;
    for (int i = 0; i < 50; ++i) {
        const RandomTriple tr = random_triple(gen, i);
        const auto cc = aclab::testing::critic_case(tr.mdp, tr.behavior, tr.features, tr.factors);
        if (cc.report.gamma_c >= 1) continue;
        ++tested;
        const int n = cc.report.n;
        const Vec w = pbe_fixed_point(tr.mdp, tr.behavior, tr.factors, tr.features, n, cc.weights);
        const GeneralizedBellman op(tr.mdp, tr.behavior, tr.factors, n);
        const PbeSystem sys = pbe_system(op, tr.features, cc.weights);
        worst_update = std::max(worst_update, sys.expected_update(w).norm());
        const QTable q = tr.features.values(w);
        const QTable pb = project(op.apply(q), tr.features, cc.weights);
        worst_fixed = std::max(worst_fixed, (q - pb).lpNorm<Eigen::Infinity>());
    }
    return {tested == 50 && worst_update <= 1e-8 && worst_fixed <= 1e-8,
            format("%d/50 triples, max |b-Aw*| = %.2e, max |Phi w - Proj B(Phi w)| = %.2e", tested,
                   worst_update, worst_fixed)};
}

// 4. Proj o B contracts in the K_SA norm with modulus gamma_c; gamma_tilde decreases in n.
Outcome contraction() {
    Gen gen(404);
    struct Config {
        Mdp mdp;
        FeatureMap features;
        IsFactorTable factors;
        Policy behavior;
    };
    std::vector<Config> configs;
    {
        const Mdp m = two_loop(0.9);
        const Policy b = Policy::uniform(2, 2);
        const Policy t = gen.policy(2, 2);
        configs.push_back({m, FeatureMap::random(4, 2, 11), make_lambda_factors(t, b, Vec::Constant(2, 0.5)), b});
    }
    {
        const Mdp m = aclab::testing::mixing_garnet(6, 3, 3, 12);
        const Policy b = Policy::uniform(6, 3);
        const Policy t = gen.policy(6, 3);
        configs.push_back({m, FeatureMap::tabular(18), make_lambda_factors(t, b, Vec::Constant(6, 0.75)), b});
    }
    {
        const Mdp m = aclab::testing::mixing_garnet(8, 4, 3, 13);
        const Policy b = gen.policy(8, 4, 0.3);
        const Policy t = gen.policy(8, 4);
        configs.push_back({m, FeatureMap::random(32, 10, 14), make_two_sided_factors(t, b, Vec::Constant(8, 1.5)), b});
    }
    {
        const Mdp m = aclab::testing::mixing_garnet(5, 2, 2, 15);
        const Policy b = Policy::uniform(5, 2);
        const Policy t = gen.policy(5, 2);
        configs.push_back({m, FeatureMap::random(10, 5, 16), make_vanilla_factors(t, b), b});
    }
    bool ok = true;
    double worst_excess = -1;
    std::ostringstream ratios;
    for (const Config& c : configs) {
        const auto cc = aclab::testing::critic_case(c.mdp, c.behavior, c.features, c.factors);
        const GeneralizedBellman op(c.mdp, c.behavior, c.factors, cc.report.n);
        double worst = 0;
        for (int k = 0; k < 200; ++k) {
            const QTable q1 = gen.vector(c.mdp.n_pairs(), -10, 10);
            const QTable q2 = gen.vector(c.mdp.n_pairs(), -10, 10);
            const QTable d = project(op.apply(q1), c.features, cc.weights) - project(op.apply(q2), c.features, cc.weights);
            worst = std::max(worst, weighted_norm(d, cc.weights) / weighted_norm(q1 - q2, cc.weights));
        }
        worst_excess = std::max(worst_excess, worst - cc.report.gamma_c);
        if (worst > cc.report.gamma_c + 1e-9) ok = false;
        ratios << format(" %.3f/%.3f", worst, cc.report.gamma_c);
        for (int n = 1; n < 50; ++n)
            if (!(gamma_tilde(c.factors, c.mdp.gamma(), n + 1) < gamma_tilde(c.factors, c.mdp.gamma(), n))) ok = false;
    }
    return {ok, "ratio/gamma_c:" + ratios.str() + ", gamma_tilde strictly decreasing n=1..50"};
}

// 5. Constant-stepsize finite-sample bound.
Outcome constant_bound() {
    std::vector<Mdp> instances{two_loop(0.9)};
    for (std::uint64_t s = 0; s < 5; ++s) instances.push_back(aclab::testing::mixing_garnet(5 + static_cast<int>(s), 3, 3, 500 + s));
    bool ok = true;
    std::ostringstream detail;
    for (const Mdp& mdp : instances) {
        const int ns = mdp.n_states(), na = mdp.n_actions();
        const Policy behavior = Policy::uniform(ns, na);
        const Policy target = boltzmann_update(value_iteration(mdp, 1e-12).q, na, 2.0);
        const IsFactorTable factors = make_lambda_factors(target, behavior, Vec::Ones(ns));
        const FeatureMap features = FeatureMap::tabular(mdp.n_pairs());
        const auto cc = aclab::testing::critic_case(mdp, behavior, features, factors);
        const double alpha = max_constant_stepsize(cc.report, cc.weights.lambda_min, cc.mixing);
        CriticConfig config;
        config.n = cc.report.n;
        config.iterations = 50000;
        config.stepsize = Stepsize::constant(alpha);
        std::vector<double> mean(static_cast<std::size_t>(config.iterations) + 1, 0.0);
        std::vector<double> bound;
        for (std::uint64_t seed = 0; seed < 20; ++seed) {
            config.seed = seed;
            const CriticRun run = td_run(mdp, behavior, factors, features, config);
            for (std::size_t k = 0; k < mean.size(); ++k) mean[k] += run.errors[k] / 20.0;
            if (!run.warnings.empty()) ok = false;
            bound = run.bounds;
        }
        const int burn = cc.mixing.mixing_time(alpha) + config.n + 1;
        double worst = 0;
        int checked = 0;
        for (std::size_t k = static_cast<std::size_t>(burn); k < mean.size(); ++k) {
            if (!std::isfinite(bound[k])) {
                ok = false;
                continue;
            }
            ++checked;
            worst = std::max(worst, mean[k] / bound[k]);
        }
        if (worst > 1.0 || checked == 0) ok = false;
        detail << format(" [n=%d a=%.1e max mean/bound=%.2e]", config.n, alpha, worst);
    }
    return {ok, "6 instances" + detail.str()};
}

// 6. Diminishing-stepsize O(1/k) rate.
Outcome diminishing_rate() {
    const Mdp mdp = aclab::testing::bandit_loop(0.1);
    const Policy behavior = Policy::uniform(1, 2);
    const IsFactorTable factors = make_on_policy_factors(behavior);
    const FeatureMap features(Mat::Ones(2, 1));
    const auto cc = aclab::testing::critic_case(mdp, behavior, features, factors, 1);
    const std::int64_t horizon = 100000;
    const double alpha = 7.0;
    const double rate = (1 - cc.report.gamma_c) * cc.weights.lambda_min;
    const double h = min_diminishing_offset(alpha, cc.report, cc.weights.lambda_min, cc.mixing, horizon);
    CriticConfig config;
    config.n = 1;
    config.iterations = horizon;
    config.stepsize = Stepsize::diminishing(alpha, h);
    std::vector<double> mean(static_cast<std::size_t>(horizon) + 1, 0.0);
    bool preconditions = alpha * rate > 1.0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        config.seed = 1000 + seed;
        const CriticRun run = td_run(mdp, behavior, factors, features, config);
        if (!run.warnings.empty()) preconditions = false;
        for (std::size_t k = 0; k < mean.size(); ++k) mean[k] += run.errors[k] / 20.0;
    }
    std::vector<double> ks, ys;
    for (int j = 0; j <= 20; ++j) {
        const double k = std::round(std::pow(10.0, 3.0 + 2.0 * j / 20.0));
        ks.push_back(k);
        ys.push_back(mean[static_cast<std::size_t>(k)]);
    }
    const double slope = aclab::testing::loglog_slope(ks, ys);
    return {preconditions && slope >= -1.3 && slope <= -0.7,
            format("alpha=%.2f h=%.0f alpha(1-gc)lmin=%.3f slope=%.3f", alpha, h, alpha * rate, slope)};
}

// 7. Bias bound for lambda-averaged and two-sided factors.
Outcome bias() {
    struct Instance {
        Mdp mdp;
        FeatureMap features;
        bool tabular;
    };
    std::vector<Instance> instances{
        {two_loop(0.9), FeatureMap::tabular(4), true},
        {two_loop(0.9), FeatureMap::random(4, 2, 71), false},
        {aclab::testing::mixing_garnet(6, 3, 3, 72), FeatureMap::tabular(18), true},
        {aclab::testing::mixing_garnet(6, 3, 3, 72), FeatureMap::random(18, 6, 73), false},
    };
    bool ok = true;
    int cases = 0;
    double worst_ratio = 0, worst_exact = 0;
    for (const Instance& in : instances) {
        const int ns = in.mdp.n_states(), na = in.mdp.n_actions();
        const Policy behavior = Policy::uniform(ns, na);
        const Policy target = boltzmann_update(value_iteration(in.mdp, 1e-12).q, na, 2.0);
        const QTable q_pi = exact_q(in.mdp, target);
        std::vector<IsFactorTable> tables;
        for (double l : {0.0, 0.25, 0.5, 0.75, 1.0}) tables.push_back(make_lambda_factors(target, behavior, Vec::Constant(ns, l)));
        for (double u : {1.0, 1.5, 3.0}) tables.push_back(make_two_sided_factors(target, behavior, Vec::Constant(ns, u)));
        for (const IsFactorTable& f : tables) {
            const auto cc = aclab::testing::critic_case(in.mdp, behavior, in.features, f);
            const int n = cc.report.n;
            const Vec w = pbe_fixed_point(in.mdp, behavior, f, in.features, n, cc.weights);
            const double lhs = weighted_norm(q_pi - in.features.values(w), cc.weights);
            const BiasBound b = bias_bound(in.mdp, behavior, f, in.features, n, target, cc.weights);
            ++cases;
            if (b.specialized_total() > 1e-10)
                worst_ratio = std::max({worst_ratio, lhs / b.total(), lhs / b.specialized_total()});
            if (lhs > b.total() + 1e-12 || lhs > b.specialized_total() + 1e-12) ok = false;
            if (in.tabular && f.scheme == FactorScheme::lambda_averaged && f.lambda(0) == 1.0) {
                worst_exact = std::max(worst_exact, lhs);
                if (lhs > 1e-8) ok = false;
            }
        }
    }
    return {ok, format("%d cases, max lhs/rhs = %.3f, lambda=1 tabular lhs = %.2e", cases, worst_ratio, worst_exact)};
}

// 8. Two-sided normalization.
Outcome two_sided_normalization() {
    Gen gen(808);
    double worst_mass = 0, worst_drho = 0;
    bool contracts = true;
    for (int i = 0; i < 100; ++i) {
        const int s = gen.integer(1, 4), a = gen.integer(2, 6);
        Mat p(s, a);
        for (int r = 0; r < s; ++r) {
            for (int c = 0; c < a; ++c) p(r, c) = gen.uniform() < 0.3 ? 0.0 : gen.uniform();
            p(r, gen.integer(0, a - 1)) += 0.1;
            p.row(r) /= p.row(r).sum();
        }
        const Policy target(p);
        const Policy behavior = gen.policy(s, a, 0.05);
        const IsFactorTable f = make_two_sided_factors(target, behavior, gen.vector(s, 1.0, 4.0));
        for (int r = 0; r < s; ++r) {
            double mass = 0;
            for (int c = 0; c < a; ++c)
                mass += behavior(r, c) * truncate(target(r, c) / behavior(r, c), f.lower(r), f.upper(r));
            worst_mass = std::max(worst_mass, std::abs(mass - 1.0));
        }
        worst_drho = std::max(worst_drho, std::abs(f.d_rho_max - 1.0));
        WeightMatrixInfo w;
        w.ksa_min = behavior.probs().minCoeff() / s;
        const StabilityReport r = stability_report(f, w, 0.9, 1);
        if (!(r.c_le_rho && r.rho_contractive && r.limit_contractive)) contracts = false;
    }
    return {worst_mass <= 1e-10 && worst_drho <= 1e-10 && contracts,
            format("max |mass-1| = %.2e, max |D_rho,max-1| = %.2e, limit contraction %s", worst_mass, worst_drho,
                   contracts ? "holds" : "fails")};
}

// 9. Variance parameter of vanilla IS versus bounded lambda.
Outcome variance_demo() {
    const Mdp mdp = two_loop(0.9);
    const Policy behavior = Policy::uniform(2, 2);
    const Policy target = value_iteration(mdp, 1e-12).policy;
    const double gamma = mdp.gamma();
    const IsFactorTable vanilla = make_vanilla_factors(target, behavior);
    const IsFactorTable bounded = make_lambda_factors(target, behavior, lambda_for_bounded_rho(target, behavior, gamma));
    const double growth = variance_parameter(vanilla, gamma, 10) / variance_parameter(vanilla, gamma, 1);
    double worst = 0;
    for (int n = 1; n <= 50; ++n) worst = std::max(worst, variance_parameter(bounded, gamma, n));
    const bool premise = vanilla.rho_max > 1.0 / gamma;
    return {premise && growth >= 10 && worst <= 2,
            format("max ratio %.3g > 1/gamma, vanilla L(10)/L(1) = %.1f, bounded max L = %.6f", vanilla.rho_max,
                   growth, worst)};
}

// 10. Log-sum-exp gap inequality.
Outcome logsumexp_property() {
    Gen gen(1010);
    int violations = 0;
    for (int i = 0; i < 10000; ++i) {
        const int d = gen.integer(2, 8);
        const Vec x = gen.vector(d, -5, 5);
        const Vec y = gen.policy(1, d, 0.01).probs().row(0).transpose();
        const double beta = std::exp(gen.uniform(std::log(1e-2), std::log(1e3)));
        const auto [lhs, rhs] = logsumexp_gap_check(x, y, beta);
        if (lhs > rhs + 1e-12 * (1 + std::abs(rhs))) ++violations;
    }
    int monotone = 0;
    for (int i = 0; i < 20; ++i) {
        const int d = gen.integer(2, 8);
        const Vec x = gen.vector(d, -5, 5);
        const Vec y = gen.policy(1, d, 0.01).probs().row(0).transpose();
        double prev = std::numeric_limits<double>::infinity();
        bool ok = true;
        for (double beta : {1.0, 10.0, 100.0, 1000.0}) {
            const auto [lhs, rhs] = logsumexp_gap_check(x, y, beta);
            if (!(rhs - lhs < prev)) ok = false;
            prev = rhs - lhs;
        }
        if (ok) ++monotone;
    }
    return {violations == 0 && monotone == 20,
            format("%d violations in 1e4 draws, gap strictly decreasing on %d/20 fixed inputs", violations, monotone)};
}

// 11. Sample complexity of the full pipeline.
//
// Accuracy is the mean over seeds of ||Q^{pi_T} - Q^{pihat_T}||_inf, where pihat_T
// is the exact-critic actor with the same rule, so only critic error counts. Each
// level runs K = 30 log(1/alpha) / alpha critic steps, enough to forget w = 0.
Outcome sample_complexity() {
    const Mdp mdp = two_loop(0.9);
    const Policy behavior = Policy::uniform(2, 2);
    const FeatureMap features = FeatureMap::tabular(4);
    PipelineConfig config;
    config.rule = UpdateRule::boltzmann;
    config.mode = StepsizeMode::constant;
    config.beta = 1.0;
    config.scheme = FactorScheme::lambda_averaged;
    config.lambda = 1.0;
    config.n = 7;
    config.outer = 5;
    config.log_every = 1000000;
    config.seeds.clear();
    for (std::uint64_t s = 0; s < 200; ++s) config.seeds.push_back(s);
    const ActorRun exact = run_actor_exact(mdp, config.rule, config.mode, config.beta, config.outer);
    const QTable q_exact = exact_q(mdp, exact.policies.back());

    std::vector<double> inv_eps, samples;
    std::ostringstream detail;
    for (double alpha : {0.032, 0.008, 0.002, 0.0005}) {
        config.alpha = alpha;
        config.iterations = static_cast<std::int64_t>(std::ceil(30.0 * std::log(1.0 / alpha) / alpha));
        const PipelineRun run = run_pipeline(mdp, behavior, features, config);
        const double m = static_cast<double>(run.seeds.size());
        double err = 0, sq = 0, used = 0;
        for (const SeedRun& s : run.seeds) {
            const double e = (exact_q(mdp, s.final_policy) - q_exact).lpNorm<Eigen::Infinity>();
            err += e / m;
            sq += e * e / m;
            used += static_cast<double>(s.samples) / m;
        }
        inv_eps.push_back(1.0 / err);
        samples.push_back(used);
        detail << format(" [eps=%.3g se=%.2g N=%.0f]", err, std::sqrt((sq - err * err) / m), used);
    }
    const double exponent = aclab::testing::loglog_slope(inv_eps, samples);
    return {exponent >= 1.6 && exponent <= 2.6, format("exponent %.3f;", exponent) + detail.str()};
}

}  // namespace

int main(int argc, char** argv) {
    struct Criterion {
        int id;
        const char* name;
        Outcome (*run)();
        double limit_s;  // 0: no runtime requirement
    };
    const std::vector<Criterion> criteria{
        {1, "exact-critic NPG error bound", npg_exact_critic, 10},
        {2, "Boltzmann constant-stepsize floor", boltzmann_floor, 0},
        {3, "PBE equivalence", pbe_equivalence, 5},
        {4, "projected operator contraction", contraction, 0},
        {5, "constant-stepsize critic bound", constant_bound, 60},
        {6, "diminishing-stepsize rate", diminishing_rate, 0},
        {7, "bias bound", bias, 0},
        {8, "two-sided normalization", two_sided_normalization, 0},
        {9, "variance parameter demonstration", variance_demo, 0},
        {10, "log-sum-exp gap property", logsumexp_property, 0},
        {11, "end-to-end sample complexity", sample_complexity, 600},
    };
    std::vector<int> only;
    for (int i = 1; i < argc; ++i) only.push_back(std::atoi(argv[i]));

    int failed = 0;
    for (const Criterion& c : criteria) {
        if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
        const auto start = std::chrono::steady_clock::now();
        Outcome out;
        try {
            out = c.run();
        } catch (const std::exception& e) {
            out = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        const bool in_time = c.limit_s == 0 || secs < c.limit_s;
        const bool pass = out.pass && in_time;
        if (!pass) ++failed;
        std::printf("%s  %2d  %-36s %7.2fs%s  %s\n", pass ? "PASS" : "FAIL", c.id, c.name, secs,
                    in_time ? "" : " (over time limit)", out.detail.c_str());
        std::fflush(stdout);
    }
    return failed == 0 ? 0 : 1;
}

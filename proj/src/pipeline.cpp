#include "aclab/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <limits>
#include <optional>
#include <random>
#include <thread>

namespace aclab {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

/// Behavior chain sampled block by block; consecutive blocks form one trajectory.
class BehaviorStream {
public:
    BehaviorStream(const Mdp& mdp, const Policy& behavior, const Vec& mu, std::uint64_t seed)
        : mdp_(mdp), behavior_(behavior), rng_(seed) {
        state_ = static_cast<int>(sample_index(rng_, mu));
    }

    Trajectory next_block(std::size_t length) {
        Trajectory out(length);
        for (auto& step : out) {
            const int a = static_cast<int>(sample_index(rng_, behavior_.probs().row(state_)));
            step = {state_, a};
            state_ = static_cast<int>(sample_index(rng_, mdp_.transition(a).row(state_)));
        }
        return out;
    }

private:
    const Mdp& mdp_;
    const Policy& behavior_;
    std::mt19937_64 rng_;
    int state_ = 0;
};

IsFactorTable make_factors(const PipelineConfig& cfg, const Policy& target, const Policy& behavior) {
    const int ns = behavior.n_states();
    switch (cfg.scheme) {
        case FactorScheme::lambda_averaged:
            return make_lambda_factors(target, behavior, Vec::Constant(ns, cfg.lambda));
        case FactorScheme::two_sided:
            return make_two_sided_factors(target, behavior, Vec::Constant(ns, cfg.upper));
        case FactorScheme::vanilla: return make_vanilla_factors(target, behavior);
        case FactorScheme::on_policy: return make_on_policy_factors(behavior);
        case FactorScheme::custom: break;
    }
    throw InvalidInput("custom factors are not available in the pipeline");
}

void validate(const PipelineConfig& cfg, const Mdp& mdp, const Policy& behavior, const FeatureMap& features) {
    if (cfg.outer < 0) throw InvalidInput("T must be non-negative");
    if (cfg.iterations < 0) throw InvalidInput("K must be non-negative");
    if (cfg.seeds.empty()) throw InvalidInput("at least one seed is required");
    if (cfg.n && *cfg.n < 1) throw InvalidInput("n must be at least 1");
    if (cfg.log_every < 1) throw InvalidInput("log_every must be at least 1");
    if (cfg.mode == StepsizeMode::constant && !(cfg.beta > 0.0)) throw InvalidInput("beta must be positive");
    if (cfg.scheme == FactorScheme::lambda_averaged && !(cfg.lambda >= 0.0 && cfg.lambda <= 1.0))
        throw InvalidInput("lambda must lie in [0, 1]");
    if (cfg.scheme == FactorScheme::two_sided && !(cfg.upper >= 1.0))
        throw InvalidInput("upper truncation level must be at least 1");
    if (behavior.n_states() != mdp.n_states() || behavior.n_actions() != mdp.n_actions())
        throw InvalidInput("behavior policy does not match the MDP");
    if (features.n_pairs() != mdp.n_pairs()) throw InvalidInput("feature rows do not match |S||A|");
}

struct Shared {
    const Mdp& mdp;
    const Policy& behavior;
    const FeatureMap& features;
    const PipelineConfig& cfg;
    const MixingInfo& mixing;
    const WeightMatrixInfo& weights;
    const QTable& q_star;
};

SeedRun run_seed(const Shared& sh, std::uint64_t seed, bool keep_traces) {
    const Mdp& mdp = sh.mdp;
    const PipelineConfig& cfg = sh.cfg;
    const double gamma = mdp.gamma();
    const int na = mdp.n_actions();
    const bool theta_actor = cfg.rule == UpdateRule::npg;

    SeedRun out;
    out.seed = seed;
    BehaviorStream stream(mdp, sh.behavior, sh.mixing.stationary, seed);
    SoftmaxParam theta{Vec::Zero(sh.features.dim())};
    Mat logp = log_policy(Policy::uniform(mdp.n_states(), na));

    for (int t = 0; t < cfg.outer; ++t) {
        if (theta_actor) logp = log_policy_from_theta(sh.features, theta, na);
        const Policy pi = policy_from_log(logp);
        const IsFactorTable factors = make_factors(cfg, pi, sh.behavior);

        PipelineRecord rec;
        rec.t = t;
        const StabilityReport auto_rep = stability_report(factors, sh.weights, gamma, 1);
        if (cfg.n) {
            rec.n = *cfg.n;
        } else if (auto_rep.n_required) {
            rec.n = *auto_rep.n_required;
        } else {
            throw StabilityError("no n makes the critic contractive for pi_t at t = " + std::to_string(t));
        }
        const StabilityReport rep = stability_report(factors, sh.weights, gamma, rec.n);
        if (!(rep.gamma_c < 1.0))
            throw StabilityError("gamma_c = " + std::to_string(rep.gamma_c) + " >= 1 for pi_t at t = " +
                                 std::to_string(t));
        rec.gamma_c = rep.gamma_c;
        rec.L = rep.L;
        rec.alpha = cfg.alpha > 0.0 ? cfg.alpha : max_constant_stepsize(rep, sh.weights.lambda_min, sh.mixing);
        rec.t_alpha = sh.mixing.mixing_time(rec.alpha);

        CriticConfig critic;
        critic.n = rec.n;
        critic.iterations = cfg.iterations;
        critic.stepsize = Stepsize::constant(rec.alpha);
        const Trajectory block = stream.next_block(static_cast<std::size_t>(cfg.iterations + rec.n));
        out.samples += static_cast<std::int64_t>(block.size());
        const std::vector<Vec> trace = td_iterate(mdp, factors, sh.features, critic, block);
        rec.w = trace.back();

        // Oracle diagnostics; nothing below feeds back into the learning path.
        const QTable q_pi = exact_q(mdp, pi);
        rec.err_before = (sh.q_star - q_pi).lpNorm<Eigen::Infinity>();
        if (t == 0) out.initial_error = rec.err_before;
        const QTable q_hat = sh.features.values(rec.w);
        rec.critic_err = (q_pi - q_hat).lpNorm<Eigen::Infinity>();
        const Vec w_star = pbe_fixed_point(mdp, sh.behavior, factors, sh.features, rec.n, sh.weights);
        rec.approx_err = (q_fixed_point(mdp, sh.behavior, factors) - sh.features.values(w_star))
                             .lpNorm<Eigen::Infinity>();
        rec.bias_err = (pi.probs() - sh.behavior.probs().cwiseProduct(factors.rho))
                           .cwiseAbs().rowwise().sum().maxCoeff();

        if (keep_traces) {
            std::vector<double> bound;
            try {
                bound = theoretical_bound_curve(critic, rep, sh.weights.lambda_min, sh.mixing,
                                                Vec::Zero(sh.features.dim()), w_star);
            } catch (const PreconditionError&) {
                bound.assign(trace.size(), kNaN);
            }
            std::vector<CriticTraceRow> rows;
            for (std::size_t k = 0; k < trace.size(); ++k) {
                if (k % static_cast<std::size_t>(cfg.log_every) != 0 && k + 1 != trace.size()) continue;
                rows.push_back({static_cast<std::int64_t>(k), rec.alpha, (trace[k] - w_star).squaredNorm(), bound[k]});
            }
            out.critic_traces.push_back(std::move(rows));
        }

        // Actor: Q_t = Phi w_{t+1}.
        ActorStep step = actor_step(cfg.rule, cfg.mode, cfg.beta, t, logp, q_hat, gamma);
        rec.beta_t = step.beta_t.maxCoeff();
        rec.clamped = step.clamped;
        if (theta_actor) {
            theta = theta_update(theta, rec.w, step.beta_t(0));
        } else {
            logp = std::move(step.log_policy);
        }
        out.records.push_back(std::move(rec));
    }

    if (theta_actor) logp = log_policy_from_theta(sh.features, theta, na);
    out.final_policy = policy_from_log(logp);
    out.final_error = (sh.q_star - exact_q(mdp, out.final_policy)).lpNorm<Eigen::Infinity>();
    out.final_bias_err = (out.final_policy.probs() -
                          sh.behavior.probs().cwiseProduct(make_factors(cfg, out.final_policy, sh.behavior).rho))
                             .cwiseAbs().rowwise().sum().maxCoeff();
    if (cfg.outer == 0) out.initial_error = out.final_error;
    for (auto& rec : out.records)
        if (rec.t + 1 < static_cast<int>(out.records.size())) rec.err_after = out.records[static_cast<std::size_t>(rec.t) + 1].err_before;
    if (!out.records.empty()) out.records.back().err_after = out.final_error;
    return out;
}

}  // namespace

unsigned worker_count(std::size_t jobs) {
    unsigned cap = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("ACLAB_THREADS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v > 0) cap = static_cast<unsigned>(v);
    }
    return static_cast<unsigned>(std::max<std::size_t>(1, std::min<std::size_t>(cap, jobs)));
}

PipelineRun run_pipeline(const Mdp& mdp, const Policy& behavior, const FeatureMap& features,
                         const PipelineConfig& config) {
    validate(config, mdp, behavior, features);
    PipelineRun run;
    run.config = config;
    run.gamma = mdp.gamma();
    run.q_star = value_iteration(mdp, 1e-12).q;
    const MixingInfo mixing = stationary_distribution(mdp, behavior);
    const WeightMatrixInfo weights = spectral_info(features, mixing, behavior);
    run.lambda_min = weights.lambda_min;
    run.ksa_min = weights.ksa_min;

    const Shared shared{mdp, behavior, features, config, mixing, weights, run.q_star};
    const std::size_t jobs = config.seeds.size();
    std::vector<std::optional<SeedRun>> results(jobs);
    std::vector<std::exception_ptr> errors(jobs);
    const unsigned workers = worker_count(jobs);
    auto work = [&](unsigned id) {
        for (std::size_t j = id; j < jobs; j += workers) {
            try {
                results[j] = run_seed(shared, config.seeds[j], j == 0);
            } catch (...) {
                errors[j] = std::current_exception();
            }
        }
    };
    if (workers == 1) {
        work(0);
    } else {
        std::vector<std::thread> pool;
        for (unsigned id = 0; id < workers; ++id) pool.emplace_back(work, id);
        for (auto& th : pool) th.join();
    }
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);
    for (auto& r : results) run.seeds.push_back(std::move(*r));
    return run;
}

BoundReport bound_report(const PipelineRun& run) {
    const PipelineConfig& cfg = run.config;
    const double g = run.gamma;
    const double one = 1.0 - g;
    BoundReport rep;
    double initial = 0.0;
    for (const SeedRun& s : run.seeds) {
        initial = std::max(initial, s.initial_error);
        rep.measured += s.final_error;
        rep.samples = std::max(rep.samples, s.samples);
        rep.e_bias = std::max(rep.e_bias, s.final_bias_err);
        for (const PipelineRecord& r : s.records) {
            rep.e_approx = std::max(rep.e_approx, r.approx_err);
            rep.e_bias = std::max(rep.e_bias, r.bias_err);
            const double contraction = (1.0 - r.gamma_c) * run.lambda_min;
            const double burn = r.t_alpha + r.n + 1.0;
            const double n23 = 6.0 * std::pow(1.0 - contraction * r.alpha, 0.5 * (static_cast<double>(cfg.iterations) - burn)) /
                               (one * one * one * std::sqrt(1.0 - r.gamma_c) * std::sqrt(run.lambda_min));
            const double n24 = 70.0 * r.L * std::sqrt(r.alpha * burn) / (contraction * one * one * one);
            rep.n2_3 = std::max(rep.n2_3, n23);
            rep.n2_4 = std::max(rep.n2_4, n24);
        }
    }
    rep.measured /= static_cast<double>(run.seeds.size());
    rep.n1 = actor_n1(g, cfg.outer, initial);
    rep.n2_1 = 2.0 * g * rep.e_approx / (one * one);
    rep.n2_2 = 2.0 * g * g * rep.e_bias / std::pow(one, 4);
    rep.n3 = actor_n3(cfg.mode, cfg.beta, g, cfg.outer);
    rep.n3_alt = actor_n3_alt(cfg.mode, cfg.beta, g, cfg.outer);
    return rep;
}

}  // namespace aclab

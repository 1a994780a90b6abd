#pragma once

#include "aclab/actor.hpp"
#include "aclab/critic.hpp"
#include "aclab/features.hpp"
#include "aclab/mdp.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace aclab {

/// Off-policy actor-critic settings. The actor option follows the rule:
/// npg updates theta of a compatible softmax, boltzmann and eps_greedy act
/// on Phi w directly.
struct PipelineConfig {
    UpdateRule rule = UpdateRule::npg;
    StepsizeMode mode = StepsizeMode::increasing;
    double beta = 1.0;

    FactorScheme scheme = FactorScheme::lambda_averaged;
    double lambda = 1.0;  // lambda_averaged: same lambda(s) for every state
    double upper = 1.0;   // two_sided: same u(s) for every state
    std::optional<int> n;  // empty: n_required for each pi_t

    double alpha = 0.0;  // <= 0: largest constant stepsize admitted for each pi_t
    std::int64_t iterations = 0;  // K
    int outer = 1;                // T
    std::vector<std::uint64_t> seeds{0};
    int log_every = 1;            // thinning of the recorded critic trace
};

struct CriticTraceRow {
    std::int64_t k = 0;
    double alpha = 0.0;
    double w_err_sq = 0.0;
    double bound = 0.0;
};

struct PipelineRecord {
    int t = 0;
    Vec w;                  // w_{t+1}
    int n = 1;
    double alpha = 0.0;
    int t_alpha = 0;
    double gamma_c = 0.0;
    double L = 0.0;
    double beta_t = 0.0;    // max over states for eps_greedy
    double err_before = 0.0;  // ||Q* - Q^{pi_t}||_inf
    double err_after = 0.0;   // ||Q* - Q^{pi_{t+1}}||_inf
    double critic_err = 0.0;  // ||Q^{pi_t} - Phi w_{t+1}||_inf
    double approx_err = 0.0;  // ||Q^{pi_t}_{c,rho} - Phi w^{pi_t}_{c,rho}||_inf
    double bias_err = 0.0;    // max_s ||pi_t(.|s) - pi_b(.|s) rho(s,.)||_1
    int clamped = 0;
};

struct SeedRun {
    std::uint64_t seed = 0;
    std::vector<PipelineRecord> records;  // exactly T entries
    std::int64_t samples = 0;             // sum over t of K + n_t
    double initial_error = 0.0;
    double final_error = 0.0;
    double final_bias_err = 0.0;          // bias_err for pi_T
    Policy final_policy = Policy::uniform(1, 1);
    std::vector<std::vector<CriticTraceRow>> critic_traces;  // first seed only
};

struct PipelineRun {
    PipelineConfig config;
    double gamma = 0.0;
    QTable q_star;
    double lambda_min = 0.0;
    double ksa_min = 0.0;
    std::vector<SeedRun> seeds;  // in config.seeds order
};

/// Runs every seed on a worker pool of at most ACLAB_THREADS threads.
PipelineRun run_pipeline(const Mdp& mdp, const Policy& behavior, const FeatureMap& features,
                         const PipelineConfig& config);

/// Outer-loop error bound terms, computed from the worst case over seeds and iterates.
struct BoundReport {
    double n1 = 0.0;
    double n2_1 = 0.0;
    double n2_2 = 0.0;
    double n2_3 = 0.0;
    double n2_4 = 0.0;
    double n3 = 0.0;      // 2 gamma / (beta (1-gamma)^2) or 2 gamma^T / (1-gamma)^2
    double n3_alt = 0.0;  // 2 gamma beta / (1-gamma)^2 in constant mode
    double e_approx = 0.0;  // max over encountered policies: a lower bound of the sup
    double e_bias = 0.0;
    double measured = 0.0;  // mean final error over seeds
    std::int64_t samples = 0;

    double total() const { return n1 + n2_1 + n2_2 + n2_3 + n2_4 + n3; }
    double ratio() const { return measured / total(); }
};

BoundReport bound_report(const PipelineRun& run);

/// Worker count: ACLAB_THREADS when set and positive, else hardware concurrency.
unsigned worker_count(std::size_t jobs);

}  // namespace aclab

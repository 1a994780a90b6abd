#pragma once

#include "aclab/actor.hpp"
#include "aclab/critic.hpp"
#include "aclab/mdp.hpp"
#include "aclab/pipeline.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace aclab {

using Json = nlohmann::json;

/// First line of every CSV written by the lab.
inline constexpr const char* kCsvHeader = "# offpolicy-ac-lab v1";

/// {"n_states", "n_actions", "gamma", "rewards": [s][a], "transitions": [a][s][s']}
Json mdp_to_json(const Mdp& mdp);
Mdp mdp_from_json(const Json& j);

/// {"probs": [s][a]}
Json policy_to_json(const Policy& policy);
Policy policy_from_json(const Json& j);

/// {"dim", "rows": [sa][d]}
Json features_to_json(const FeatureMap& features);
FeatureMap features_from_json(const Json& j);

Json read_json(const std::filesystem::path& path);
/// Pretty-printed with a trailing newline.
void write_json(const Json& j, const std::filesystem::path& path);

/// "two_loop", "garnet:S:A:B:seed[:gamma]" or a JSON file.
Mdp load_mdp(const std::string& source);
/// "uniform" or a JSON policy file.
Policy load_policy(const std::string& source, int n_states, int n_actions);
/// "tabular", "random:d[:seed]" or a JSON feature file.
FeatureMap load_features(const std::string& source, Eigen::Index n_pairs);

Json factors_to_json(const IsFactorTable& factors);
Json stability_to_json(const StabilityReport& report, double ksa_min, double lambda_min);
Json bound_report_to_json(const BoundReport& report, const PipelineConfig& config);

/// Config file fields mirror PipelineConfig plus the input sources.
struct PipelineSources {
    std::string mdp = "two_loop";
    std::string behavior = "uniform";
    std::string features = "tabular";
    std::string output = ".";
};

void apply_pipeline_json(const Json& j, PipelineConfig& config, PipelineSources& sources);
Json pipeline_config_to_json(const PipelineConfig& config, const PipelineSources& sources);

/// Shortest round-trip text for a double; "nan" and "inf" spelled out.
std::string format_number(double x);

void write_q_csv(const QTable& q, int n_actions, const std::filesystem::path& path);
void write_policy_csv(const Policy& policy, const std::filesystem::path& path);
void write_actor_csv(const ActorRun& run, const std::filesystem::path& path);
void write_critic_csv(const CriticRun& run, const std::filesystem::path& path, int log_every = 1);
void write_critic_trace_csv(const std::vector<CriticTraceRow>& rows, const std::filesystem::path& path);
/// One row per (seed, t) of the pipeline.
void write_pipeline_csv(const PipelineRun& run, const std::filesystem::path& path);

}  // namespace aclab

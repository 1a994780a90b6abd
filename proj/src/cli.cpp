#include "aclab/cli.hpp"

#include "aclab/actor.hpp"
#include "aclab/critic.hpp"
#include "aclab/features.hpp"
#include "aclab/io.hpp"
#include "aclab/mdp.hpp"
#include "aclab/pipeline.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

namespace aclab {

namespace {

namespace fs = std::filesystem;

struct CriticArgs {
    std::string mdp = "two_loop";
    std::string behavior = "uniform";
    std::string target = "greedy";
    std::string features = "tabular";
    std::string scheme = "lambda";
    std::string lambda = "1";
    double upper = 1.0;
    std::string n = "auto";
    std::string out = ".";

    // critic run
    double alpha = 0.0;
    double h = 0.0;
    std::int64_t iterations = 10000;
    std::uint64_t seed = 0;
    int log_every = 1;
};

/// Everything a critic subcommand needs, resolved from the flags.
struct CriticSetup {
    Mdp mdp;
    Policy behavior;
    Policy target;
    FeatureMap features;
    IsFactorTable factors;
    MixingInfo mixing;
    WeightMatrixInfo weights;
    StabilityReport report;
};

void add_critic_options(CLI::App* cmd, CriticArgs& a) {
    cmd->add_option("--mdp", a.mdp, "MDP: two_loop, garnet:S:A:B:seed[:gamma] or JSON file");
    cmd->add_option("--behavior", a.behavior, "behavior policy: uniform or JSON file");
    cmd->add_option("--target", a.target, "target policy: greedy, uniform or JSON file");
    cmd->add_option("--features", a.features, "features: tabular, random:d[:seed] or JSON file");
    cmd->add_option("--scheme", a.scheme, "lambda, two_sided, vanilla or on_policy");
    cmd->add_option("--lambda", a.lambda, "lambda in [0,1] for every state, or 'bounded'");
    cmd->add_option("--upper", a.upper, "two-sided upper truncation level (>= 1)");
    cmd->add_option("--n", a.n, "bootstrapping length or 'auto'");
    cmd->add_option("-o,--out", a.out, "output directory");
}

Policy resolve_target(const std::string& source, const Mdp& mdp) {
    if (source == "greedy") return value_iteration(mdp, 1e-12).policy;
    return load_policy(source, mdp.n_states(), mdp.n_actions());
}

CriticSetup resolve_critic(const CriticArgs& a) {
    Mdp mdp = load_mdp(a.mdp);
    Policy behavior = load_policy(a.behavior, mdp.n_states(), mdp.n_actions());
    Policy target = resolve_target(a.target, mdp);
    FeatureMap features = load_features(a.features, mdp.n_pairs());
    const FactorScheme scheme = parse_scheme(a.scheme);
    IsFactorTable factors;
    switch (scheme) {
        case FactorScheme::lambda_averaged: {
            Vec lambda = a.lambda == "bounded"
                             ? lambda_for_bounded_rho(target, behavior, mdp.gamma())
                             : Vec::Constant(mdp.n_states(), std::stod(a.lambda));
            factors = make_lambda_factors(target, behavior, lambda);
            break;
        }
        case FactorScheme::two_sided:
            factors = make_two_sided_factors(target, behavior, Vec::Constant(mdp.n_states(), a.upper));
            break;
        case FactorScheme::vanilla: factors = make_vanilla_factors(target, behavior); break;
        case FactorScheme::on_policy: factors = make_on_policy_factors(behavior); break;
        case FactorScheme::custom: throw InvalidInput("custom factors are library-only");
    }
    MixingInfo mixing = stationary_distribution(mdp, behavior);
    WeightMatrixInfo weights = spectral_info(features, mixing, behavior);
    int n = 1;
    if (a.n == "auto") {
        const StabilityReport probe = stability_report(factors, weights, mdp.gamma(), 1);
        if (!probe.n_required) throw StabilityError("no n makes the critic contractive (the limit of gamma_c is not below 1)");
        n = *probe.n_required;
    } else {
        n = std::stoi(a.n);
    }
    StabilityReport report = stability_report(factors, weights, mdp.gamma(), n);
    return {std::move(mdp), std::move(behavior), std::move(target), std::move(features),
            std::move(factors), std::move(mixing), std::move(weights), std::move(report)};
}

fs::path prepare_dir(const std::string& dir) {
    fs::path p(dir);
    fs::create_directories(p);
    return p;
}

int cmd_mdp_gen(int states, int actions, int branching, std::uint64_t seed, double gamma, const std::string& out) {
    const Mdp mdp = gen_garnet(states, actions, branching, seed, gamma);
    const fs::path path(out);
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    write_json(mdp_to_json(mdp), path);
    std::cout << "mdp gen: " << states << " states, " << actions << " actions -> " << path.string() << '\n';
    return 0;
}

int cmd_mdp_solve(const std::string& mdp_src, const std::string& policy_src, double tol, const std::string& out) {
    const Mdp mdp = load_mdp(mdp_src);
    const fs::path dir = prepare_dir(out);
    const OptimalSolution opt = value_iteration(mdp, tol);
    write_q_csv(opt.q, mdp.n_actions(), dir / "q_star.csv");
    write_json(policy_to_json(opt.policy), dir / "optimal_policy.json");
    const Policy pi = resolve_target(policy_src, mdp);
    const QTable q_pi = exact_q(mdp, pi);
    write_q_csv(q_pi, mdp.n_actions(), dir / "q_policy.csv");
    std::cout << "mdp solve: ||Q*||_inf = " << format_number(opt.q.lpNorm<Eigen::Infinity>())
              << ", ||Q* - Q^pi||_inf = " << format_number((opt.q - q_pi).lpNorm<Eigen::Infinity>()) << '\n';
    return 0;
}

int cmd_critic_check(const CriticArgs& a) {
    const CriticSetup s = resolve_critic(a);
    const fs::path dir = prepare_dir(a.out);
    Json j = stability_to_json(s.report, s.weights.ksa_min, s.weights.lambda_min);
    j["mixing"] = {{"fit_c", s.mixing.fit_c}, {"fit_sigma", s.mixing.fit_sigma}};
    write_json(j, dir / "stability.json");
    write_json(factors_to_json(s.factors), dir / "factors.json");
    std::cout << "critic check: n = " << s.report.n << ", gamma_c = " << format_number(s.report.gamma_c)
              << ", n_required = " << (s.report.n_required ? std::to_string(*s.report.n_required) : "infeasible")
              << ", L = " << format_number(s.report.L) << '\n';
    return s.report.gamma_c < 1.0 ? 0 : 2;
}

int cmd_critic_oracle(const CriticArgs& a) {
    const CriticSetup s = resolve_critic(a);
    const fs::path dir = prepare_dir(a.out);
    const QTable q_cr = q_fixed_point(s.mdp, s.behavior, s.factors);
    const Vec w = pbe_fixed_point(s.mdp, s.behavior, s.factors, s.features, s.report.n, s.weights);
    const BiasBound bias = bias_bound(s.mdp, s.behavior, s.factors, s.features, s.report.n, s.target, s.weights);
    const QTable q_pi = exact_q(s.mdp, s.target);
    const double lhs = weighted_norm(q_pi - s.features.values(w), s.weights);
    Json j;
    j["n"] = s.report.n;
    j["gamma_c"] = s.report.gamma_c;
    j["w_star"] = std::vector<double>(w.data(), w.data() + w.size());
    j["approx_term"] = bias.approx_term;
    j["sampling_bias_term"] = bias.sampling_bias_term;
    if (bias.specialized_sampling) j["specialized_sampling_term"] = *bias.specialized_sampling;
    if (bias.specialized_approx) j["specialized_approx_term"] = *bias.specialized_approx;
    j["target_error_weighted"] = lhs;
    write_json(j, dir / "oracle.json");
    write_q_csv(q_cr, s.mdp.n_actions(), dir / "q_fixed_point.csv");
    std::cout << "critic oracle: ||Q^pi - Phi w*||_K = " << format_number(lhs)
              << " <= " << format_number(bias.total()) << '\n';
    return 0;
}

int cmd_critic_run(const CriticArgs& a) {
    const CriticSetup s = resolve_critic(a);
    if (!(s.report.gamma_c < 1.0))
        throw StabilityError("gamma_c = " + format_number(s.report.gamma_c) + " >= 1 at n = " + std::to_string(s.report.n));
    const fs::path dir = prepare_dir(a.out);
    CriticConfig cfg;
    cfg.n = s.report.n;
    cfg.iterations = a.iterations;
    cfg.seed = a.seed;
    const double alpha = a.alpha > 0.0 ? a.alpha : max_constant_stepsize(s.report, s.weights.lambda_min, s.mixing);
    cfg.stepsize = a.h > 0.0 ? Stepsize::diminishing(alpha, a.h) : Stepsize::constant(alpha);
    const CriticRun run = td_run(s.mdp, s.behavior, s.factors, s.features, cfg);
    for (const auto& w : run.warnings) std::cerr << "warning: " << w << '\n';
    write_critic_csv(run, dir / "critic_t0.csv", a.log_every);
    std::cout << "critic run: K = " << a.iterations << ", alpha = " << format_number(alpha)
              << ", final ||w_K - w*||^2 = " << format_number(run.errors.back()) << '\n';
    return 0;
}

int cmd_actor_run(const std::string& mdp_src, const std::string& rule, const std::string& mode, double beta, int T,
                  const std::string& out) {
    const Mdp mdp = load_mdp(mdp_src);
    const fs::path dir = prepare_dir(out);
    const ActorRun run = run_actor_exact(mdp, parse_rule(rule), parse_mode(mode), beta, T);
    write_actor_csv(run, dir / "actor.csv");
    write_json(policy_to_json(run.policies.back()), dir / "policy.json");
    const ActorRecord& last = run.records.back();
    std::cout << "actor run: T = " << T << ", final error = " << format_number(last.err_inf)
              << ", bound = " << format_number(last.bound()) << '\n';
    return 0;
}

std::string report_text(const BoundReport& r, const PipelineRun& run) {
    std::ostringstream os;
    os << "off-policy actor-critic run\n";
    os << "seeds            " << run.seeds.size() << '\n';
    os << "outer iterations " << run.config.outer << '\n';
    os << "critic K         " << run.config.iterations << '\n';
    os << "samples per seed " << r.samples << '\n';
    os << "N1               " << format_number(r.n1) << '\n';
    os << "N2,1             " << format_number(r.n2_1) << '\n';
    os << "N2,2             " << format_number(r.n2_2) << '\n';
    os << "N2,3             " << format_number(r.n2_3) << '\n';
    os << "N2,4             " << format_number(r.n2_4) << '\n';
    os << (run.config.mode == StepsizeMode::constant ? "N3               " : "N3'              ")
       << format_number(r.n3) << '\n';
    if (run.config.mode == StepsizeMode::constant) os << "N3 (beta times)  " << format_number(r.n3_alt) << '\n';
    os << "total bound      " << format_number(r.total()) << '\n';
    os << "measured error   " << format_number(r.measured) << '\n';
    os << "ratio            " << format_number(r.ratio()) << '\n';
    os << "E_approx is the max over encountered policies, a lower bound of the sup.\n";
    return os.str();
}

int cmd_pipeline(const std::string& config_path, PipelineConfig cfg, PipelineSources src,
                 const std::vector<std::string>& overrides_json, bool bounds_only) {
    if (!config_path.empty()) apply_pipeline_json(read_json(config_path), cfg, src);
    for (const auto& o : overrides_json) apply_pipeline_json(Json::parse(o), cfg, src);
    const Mdp mdp = load_mdp(src.mdp);
    const Policy behavior = load_policy(src.behavior, mdp.n_states(), mdp.n_actions());
    const FeatureMap features = load_features(src.features, mdp.n_pairs());
    const PipelineRun run = run_pipeline(mdp, behavior, features, cfg);
    const BoundReport rep = bound_report(run);
    const fs::path dir = prepare_dir(src.output);
    Json bounds = bound_report_to_json(rep, cfg);
    bounds["config"] = pipeline_config_to_json(cfg, src);
    write_json(bounds, dir / "bounds.json");
    {
        std::ofstream txt(dir / "report.txt");
        txt << report_text(rep, run);
    }
    if (!bounds_only) {
        write_pipeline_csv(run, dir / "actor.csv");
        const auto& traces = run.seeds.front().critic_traces;
        for (std::size_t t = 0; t < traces.size(); ++t)
            write_critic_trace_csv(traces[t], dir / ("critic_t" + std::to_string(t) + ".csv"));
    }
    std::cout << (bounds_only ? "bounds report" : "pipeline run") << ": mean final error "
              << format_number(rep.measured) << ", bound " << format_number(rep.total()) << ", samples "
              << rep.samples << '\n';
    return 0;
}

}  // namespace

int cli_main(int argc, char** argv) {
    CLI::App app{"Off-policy actor-critic lab"};
    app.name("aclab");
    app.require_subcommand(1);

    auto* mdp_cmd = app.add_subcommand("mdp", "generate or solve MDPs");
    mdp_cmd->require_subcommand(1);
    int states = 5, actions = 3, branching = 2;
    std::uint64_t seed = 0;
    double gamma = 0.9;
    std::string out_file = "mdp.json";
    auto* gen = mdp_cmd->add_subcommand("gen", "random Garnet MDP as JSON");
    gen->add_option("--states", states)->required();
    gen->add_option("--actions", actions)->required();
    gen->add_option("--branching", branching)->required();
    gen->add_option("--seed", seed);
    gen->add_option("--gamma", gamma);
    gen->add_option("-o,--out", out_file);

    std::string mdp_src = "two_loop", policy_src = "uniform", out_dir = ".";
    double tol = 1e-12;
    auto* solve = mdp_cmd->add_subcommand("solve", "optimal Q and the Q-function of a policy");
    solve->add_option("--mdp", mdp_src)->required();
    solve->add_option("--policy", policy_src, "uniform, greedy or JSON file");
    solve->add_option("--tol", tol);
    solve->add_option("-o,--out", out_dir);

    auto* critic_cmd = app.add_subcommand("critic", "policy evaluation with generalized importance sampling");
    critic_cmd->require_subcommand(1);
    CriticArgs cargs;
    auto* check = critic_cmd->add_subcommand("check", "stability report");
    add_critic_options(check, cargs);
    auto* oracle = critic_cmd->add_subcommand("oracle", "exact fixed points and bias bound");
    add_critic_options(oracle, cargs);
    auto* crun = critic_cmd->add_subcommand("run", "multi-step off-policy TD");
    add_critic_options(crun, cargs);
    crun->add_option("--alpha", cargs.alpha, "stepsize (default: largest admitted constant)");
    crun->add_option("--offset", cargs.h, "diminishing stepsize alpha / (k + offset)");
    crun->add_option("--K", cargs.iterations);
    crun->add_option("--seed", cargs.seed);
    crun->add_option("--log-every", cargs.log_every);

    auto* actor_cmd = app.add_subcommand("actor", "exact-critic policy iteration");
    actor_cmd->require_subcommand(1);
    std::string rule = "npg", mode = "increasing";
    double beta = 1.0;
    int T = 30;
    auto* arun = actor_cmd->add_subcommand("run", "iterate the actor with exact Q");
    arun->add_option("--mdp", mdp_src);
    arun->add_option("--rule", rule, "npg, boltzmann or eps_greedy");
    arun->add_option("--mode", mode, "constant or increasing");
    arun->add_option("--beta", beta);
    arun->add_option("--T", T);
    arun->add_option("-o,--out", out_dir);

    PipelineConfig pcfg;
    PipelineSources psrc;
    std::string config_path;
    std::vector<std::string> overrides;
    std::string p_mdp, p_behavior, p_features, p_out, p_rule, p_mode, p_scheme, p_n;
    std::optional<double> p_beta, p_alpha, p_lambda, p_upper;
    std::optional<int> p_log_every;
    std::optional<std::int64_t> p_k;
    std::optional<int> p_t;
    std::vector<std::uint64_t> p_seeds;
    auto add_pipeline_options = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "JSON config mirroring the pipeline fields");
        cmd->add_option("--mdp", p_mdp);
        cmd->add_option("--behavior", p_behavior);
        cmd->add_option("--features", p_features);
        cmd->add_option("--rule", p_rule);
        cmd->add_option("--mode", p_mode);
        cmd->add_option("--beta", p_beta);
        cmd->add_option("--scheme", p_scheme, "lambda, two_sided, vanilla or on_policy");
        cmd->add_option("--lambda", p_lambda);
        cmd->add_option("--upper", p_upper);
        cmd->add_option("--n", p_n, "bootstrapping length or 'auto'");
        cmd->add_option("--alpha", p_alpha);
        cmd->add_option("--K", p_k);
        cmd->add_option("--T", p_t);
        cmd->add_option("--seeds", p_seeds, "comma-separated replication seeds")->delimiter(',');
        cmd->add_option("--log-every", p_log_every);
        cmd->add_option("-o,--out", p_out);
    };
    auto* pipe_cmd = app.add_subcommand("pipeline", "off-policy actor-critic");
    pipe_cmd->require_subcommand(1);
    auto* prun = pipe_cmd->add_subcommand("run", "run and write actor.csv, critic_t<k>.csv, bounds.json, report.txt");
    add_pipeline_options(prun);
    auto* bounds_cmd = app.add_subcommand("bounds", "error bound terms");
    bounds_cmd->require_subcommand(1);
    auto* brep = bounds_cmd->add_subcommand("report", "run the pipeline and write bounds.json, report.txt");
    add_pipeline_options(brep);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n\n" << app.help();
        return 1;
    }

    // Flags override config-file fields.
    auto flag_overrides = [&] {
        Json j = Json::object();
        if (!p_mdp.empty()) j["mdp"] = p_mdp;
        if (!p_behavior.empty()) j["behavior"] = p_behavior;
        if (!p_features.empty()) j["features"] = p_features;
        if (!p_out.empty()) j["output"] = p_out;
        if (!p_rule.empty()) j["rule"] = p_rule;
        if (!p_mode.empty()) j["mode"] = p_mode;
        if (p_beta) j["beta"] = *p_beta;
        if (!p_scheme.empty()) j["scheme"] = p_scheme;
        if (p_lambda) j["lambda"] = *p_lambda;
        if (p_upper) j["upper"] = *p_upper;
        if (!p_n.empty()) j["n"] = p_n == "auto" ? Json("auto") : Json(std::stoi(p_n));
        if (p_alpha) j["alpha"] = *p_alpha;
        if (p_k) j["K"] = *p_k;
        if (p_t) j["T"] = *p_t;
        if (!p_seeds.empty()) j["seeds"] = p_seeds;
        if (p_log_every) j["log_every"] = *p_log_every;
        overrides.push_back(j.dump());
    };

    try {
        if (*gen) return cmd_mdp_gen(states, actions, branching, seed, gamma, out_file);
        if (*solve) return cmd_mdp_solve(mdp_src, policy_src, tol, out_dir);
        if (*check) return cmd_critic_check(cargs);
        if (*oracle) return cmd_critic_oracle(cargs);
        if (*crun) return cmd_critic_run(cargs);
        if (*arun) return cmd_actor_run(mdp_src, rule, mode, beta, T, out_dir);
        if (*prun || *brep) {
            flag_overrides();
            return cmd_pipeline(config_path, pcfg, psrc, overrides, static_cast<bool>(*brep));
        }
    } catch (const InvalidInput& e) {
        std::cerr << "invalid input: " << e.what() << '\n';
        return 1;
    } catch (const AssumptionViolation& e) {
        std::cerr << "assumption violated: " << e.what() << '\n';
        return 2;
    } catch (const StabilityError& e) {
        std::cerr << "stability error: " << e.what() << '\n';
        return 2;
    } catch (const PreconditionError& e) {
        std::cerr << "precondition failed: " << e.what() << '\n';
        return 2;
    } catch (const std::logic_error& e) {
        // std::stod / std::stoi failures and malformed JSON overrides.
        std::cerr << "invalid input: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    std::cerr << app.help();
    return 1;
}

}  // namespace aclab

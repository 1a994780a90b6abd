#include "aclab/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace aclab {

namespace {

Json matrix_to_json(const Mat& m) {
    Json rows = Json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        Json row = Json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

Json vector_to_json(const Vec& v) {
    Json out = Json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
    return out;
}

Mat matrix_from_json(const Json& j, const std::string& what) {
    if (!j.is_array() || j.empty()) throw InvalidInput(what + " must be a non-empty array of rows");
    const auto rows = static_cast<Eigen::Index>(j.size());
    if (!j[0].is_array() || j[0].empty()) throw InvalidInput(what + " rows must be non-empty arrays");
    const auto cols = static_cast<Eigen::Index>(j[0].size());
    Mat m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        const Json& row = j[static_cast<std::size_t>(i)];
        if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols)
            throw InvalidInput(what + " is ragged");
        for (Eigen::Index c = 0; c < cols; ++c) {
            const Json& v = row[static_cast<std::size_t>(c)];
            if (!v.is_number()) throw InvalidInput(what + " has a non-numeric entry");
            m(i, c) = v.get<double>();
        }
    }
    return m;
}

template <typename T>
T field(const Json& j, const char* key) {
    if (!j.contains(key)) throw InvalidInput(std::string("missing field '") + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw InvalidInput(std::string("field '") + key + "' has the wrong type");
    }
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    for (std::string part; std::getline(ss, part, sep);) out.push_back(part);
    return out;
}

long parse_long(const std::string& s, const std::string& what) {
    long v = 0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) throw InvalidInput("bad integer '" + s + "' in " + what);
    return v;
}

double parse_double(const std::string& s, const std::string& what) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) throw InvalidInput("bad number '" + s + "' in " + what);
        return v;
    } catch (const std::logic_error&) {
        throw InvalidInput("bad number '" + s + "' in " + what);
    }
}

std::ofstream open_csv(const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw InvalidInput("cannot write " + path.string());
    out << kCsvHeader << '\n';
    return out;
}

Json number_or_null(double x) { return std::isfinite(x) ? Json(x) : Json(nullptr); }

}  // namespace

std::string format_number(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, res.ptr);
}

Json mdp_to_json(const Mdp& mdp) {
    Json j;
    j["n_states"] = mdp.n_states();
    j["n_actions"] = mdp.n_actions();
    j["gamma"] = mdp.gamma();
    j["rewards"] = matrix_to_json(mdp.rewards());
    Json trans = Json::array();
    for (const Mat& p : mdp.transitions()) trans.push_back(matrix_to_json(p));
    j["transitions"] = std::move(trans);
    return j;
}

Mdp mdp_from_json(const Json& j) {
    if (!j.is_object()) throw InvalidInput("MDP JSON must be an object");
    const int ns = field<int>(j, "n_states");
    const int na = field<int>(j, "n_actions");
    const double gamma = field<double>(j, "gamma");
    if (ns < 1 || na < 1) throw InvalidInput("n_states and n_actions must be positive");
    const Mat rewards = matrix_from_json(j.at("rewards"), "rewards");
    if (rewards.rows() != ns || rewards.cols() != na) throw InvalidInput("rewards must be n_states x n_actions");
    const Json& tj = j.contains("transitions") ? j.at("transitions") : Json();
    if (!tj.is_array() || static_cast<int>(tj.size()) != na)
        throw InvalidInput("transitions must hold one matrix per action");
    std::vector<Mat> transitions;
    for (int a = 0; a < na; ++a) {
        Mat p = matrix_from_json(tj[static_cast<std::size_t>(a)], "transitions[" + std::to_string(a) + "]");
        if (p.rows() != ns || p.cols() != ns) throw InvalidInput("each transition matrix must be n_states x n_states");
        transitions.push_back(std::move(p));
    }
    return Mdp(std::move(transitions), rewards, gamma);
}

Json policy_to_json(const Policy& policy) {
    Json j;
    j["probs"] = matrix_to_json(policy.probs());
    return j;
}

Policy policy_from_json(const Json& j) {
    if (!j.is_object() || !j.contains("probs")) throw InvalidInput("policy JSON needs a 'probs' field");
    return Policy(matrix_from_json(j.at("probs"), "probs"));
}

Json features_to_json(const FeatureMap& features) {
    Json j;
    j["dim"] = features.dim();
    j["rows"] = matrix_to_json(features.phi());
    return j;
}

FeatureMap features_from_json(const Json& j) {
    if (!j.is_object()) throw InvalidInput("feature JSON must be an object");
    const int dim = field<int>(j, "dim");
    Mat phi = matrix_from_json(j.at("rows"), "rows");
    if (phi.cols() != dim) throw InvalidInput("feature rows do not have 'dim' columns");
    return FeatureMap(std::move(phi));
}

Json read_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InvalidInput("cannot open " + path.string());
    try {
        return Json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw InvalidInput("malformed JSON in " + path.string() + ": " + e.what());
    }
}

void write_json(const Json& j, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw InvalidInput("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

Mdp load_mdp(const std::string& source) {
    if (source == "two_loop") return two_loop();
    if (source.rfind("garnet:", 0) == 0) {
        const auto parts = split(source, ':');
        if (parts.size() != 5 && parts.size() != 6)
            throw InvalidInput("garnet source must be garnet:S:A:branching:seed[:gamma]");
        const double gamma = parts.size() == 6 ? parse_double(parts[5], "garnet gamma") : 0.9;
        return gen_garnet(static_cast<int>(parse_long(parts[1], "garnet")), static_cast<int>(parse_long(parts[2], "garnet")),
                          static_cast<int>(parse_long(parts[3], "garnet")),
                          static_cast<std::uint64_t>(parse_long(parts[4], "garnet")), gamma);
    }
    return mdp_from_json(read_json(source));
}

Policy load_policy(const std::string& source, int n_states, int n_actions) {
    if (source == "uniform") return Policy::uniform(n_states, n_actions);
    Policy p = policy_from_json(read_json(source));
    if (p.n_states() != n_states || p.n_actions() != n_actions) throw InvalidInput("policy shape does not match the MDP");
    return p;
}

FeatureMap load_features(const std::string& source, Eigen::Index n_pairs) {
    if (source == "tabular") return FeatureMap::tabular(n_pairs);
    if (source.rfind("random:", 0) == 0) {
        const auto parts = split(source, ':');
        if (parts.size() != 2 && parts.size() != 3) throw InvalidInput("random features must be random:d[:seed]");
        const long d = parse_long(parts[1], "random features");
        const long seed = parts.size() == 3 ? parse_long(parts[2], "random features") : 0;
        if (d < 1) throw InvalidInput("feature dimension must be positive");
        return FeatureMap::random(n_pairs, d, static_cast<std::uint64_t>(seed));
    }
    FeatureMap f = features_from_json(read_json(source));
    if (f.n_pairs() != n_pairs) throw InvalidInput("feature rows do not match |S||A|");
    return f;
}

Json factors_to_json(const IsFactorTable& f) {
    Json j;
    j["scheme"] = to_string(f.scheme);
    j["c"] = matrix_to_json(f.c);
    j["rho"] = matrix_to_json(f.rho);
    if (f.lambda.size()) j["lambda"] = vector_to_json(f.lambda);
    if (f.lower.size()) j["lower"] = vector_to_json(f.lower);
    if (f.upper.size()) j["upper"] = vector_to_json(f.upper);
    j["d_c"] = vector_to_json(f.d_c);
    j["d_rho"] = vector_to_json(f.d_rho);
    j["d_c_min"] = f.d_c_min;
    j["d_rho_max"] = f.d_rho_max;
    j["c_max"] = f.c_max;
    j["rho_max"] = f.rho_max;
    return j;
}

Json stability_to_json(const StabilityReport& r, double ksa_min, double lambda_min) {
    Json j;
    j["n"] = r.n;
    j["gamma_tilde_n"] = r.gamma_tilde_n;
    j["gamma_c"] = r.gamma_c;
    j["ksa_min"] = ksa_min;
    j["lambda_min"] = lambda_min;
    j["condition3"] = {{"c_le_rho", r.c_le_rho},
                       {"gamma_d_rho_max_lt_1", r.rho_contractive},
                       {"limit_contractive", r.limit_contractive},
                       {"limit_gamma_c", number_or_null(r.limit_gamma_c)}};
    j["n_required"] = r.n_required ? Json(*r.n_required) : Json("infeasible");
    j["L"] = number_or_null(r.L);
    return j;
}

Json bound_report_to_json(const BoundReport& r, const PipelineConfig& cfg) {
    Json j;
    j["N1"] = r.n1;
    j["N2_1"] = r.n2_1;
    j["N2_2"] = r.n2_2;
    j["N2_3"] = number_or_null(r.n2_3);
    j["N2_4"] = number_or_null(r.n2_4);
    j[cfg.mode == StepsizeMode::constant ? "N3" : "N3_prime"] = r.n3;
    if (cfg.mode == StepsizeMode::constant) j["N3_beta_times"] = r.n3_alt;
    j["total"] = number_or_null(r.total());
    j["measured"] = r.measured;
    j["ratio"] = number_or_null(r.ratio());
    j["E_approx"] = r.e_approx;
    j["E_approx_note"] = "max over encountered policies; lower bound of the sup over all policies";
    j["E_bias"] = r.e_bias;
    j["samples"] = r.samples;
    return j;
}

void apply_pipeline_json(const Json& j, PipelineConfig& cfg, PipelineSources& src) {
    if (!j.is_object()) throw InvalidInput("pipeline config must be a JSON object");
    static const char* kKeys[] = {"mdp", "behavior", "features", "output", "rule", "mode", "beta", "scheme",
                                  "lambda", "upper", "n", "alpha", "K", "T", "seeds", "log_every"};
    for (const auto& [key, _] : j.items())
        if (std::find(std::begin(kKeys), std::end(kKeys), key) == std::end(kKeys))
            throw InvalidInput("unknown config field '" + key + "'");
    if (j.contains("mdp")) src.mdp = field<std::string>(j, "mdp");
    if (j.contains("behavior")) src.behavior = field<std::string>(j, "behavior");
    if (j.contains("features")) src.features = field<std::string>(j, "features");
    if (j.contains("output")) src.output = field<std::string>(j, "output");
    if (j.contains("rule")) cfg.rule = parse_rule(field<std::string>(j, "rule"));
    if (j.contains("mode")) cfg.mode = parse_mode(field<std::string>(j, "mode"));
    if (j.contains("beta")) cfg.beta = field<double>(j, "beta");
    if (j.contains("scheme")) cfg.scheme = parse_scheme(field<std::string>(j, "scheme"));
    if (j.contains("lambda")) cfg.lambda = field<double>(j, "lambda");
    if (j.contains("upper")) cfg.upper = field<double>(j, "upper");
    if (j.contains("n")) {
        if (j.at("n").is_string()) {
            if (j.at("n").get<std::string>() != "auto") throw InvalidInput("n must be an integer or \"auto\"");
            cfg.n.reset();
        } else {
            cfg.n = field<int>(j, "n");
        }
    }
    if (j.contains("alpha")) cfg.alpha = field<double>(j, "alpha");
    if (j.contains("K")) cfg.iterations = field<std::int64_t>(j, "K");
    if (j.contains("T")) cfg.outer = field<int>(j, "T");
    if (j.contains("seeds")) cfg.seeds = field<std::vector<std::uint64_t>>(j, "seeds");
    if (j.contains("log_every")) cfg.log_every = field<int>(j, "log_every");
}

Json pipeline_config_to_json(const PipelineConfig& cfg, const PipelineSources& src) {
    Json j;
    j["mdp"] = src.mdp;
    j["behavior"] = src.behavior;
    j["features"] = src.features;
    j["rule"] = to_string(cfg.rule);
    j["mode"] = to_string(cfg.mode);
    j["beta"] = cfg.beta;
    j["scheme"] = to_string(cfg.scheme);
    j["lambda"] = cfg.lambda;
    j["upper"] = cfg.upper;
    j["n"] = cfg.n ? Json(*cfg.n) : Json("auto");
    j["alpha"] = cfg.alpha;
    j["K"] = cfg.iterations;
    j["T"] = cfg.outer;
    j["seeds"] = cfg.seeds;
    j["log_every"] = cfg.log_every;
    return j;
}

void write_q_csv(const QTable& q, int n_actions, const std::filesystem::path& path) {
    auto out = open_csv(path);
    out << "state,action,q\n";
    for (Eigen::Index i = 0; i < q.size(); ++i)
        out << i / n_actions << ',' << i % n_actions << ',' << format_number(q(i)) << '\n';
}

void write_policy_csv(const Policy& policy, const std::filesystem::path& path) {
    auto out = open_csv(path);
    out << "state,action,prob\n";
    for (int s = 0; s < policy.n_states(); ++s)
        for (int a = 0; a < policy.n_actions(); ++a) out << s << ',' << a << ',' << format_number(policy(s, a)) << '\n';
}

void write_actor_csv(const ActorRun& run, const std::filesystem::path& path) {
    auto out = open_csv(path);
    out << "t,beta_t,err_inf,N1,N2,N3,N3_alt,actor_gap,clamped\n";
    for (const ActorRecord& r : run.records) {
        out << r.t << ',' << format_number(r.beta_t) << ',' << format_number(r.err_inf) << ',' << format_number(r.n1)
            << ',' << format_number(r.n2) << ',' << format_number(r.n3) << ',' << format_number(r.n3_alt) << ','
            << format_number(r.actor_gap) << ',' << r.clamped << '\n';
    }
}

void write_critic_csv(const CriticRun& run, const std::filesystem::path& path, int log_every) {
    auto out = open_csv(path);
    out << "k,alpha_k,w_err_sq,bound\n";
    const std::size_t step = static_cast<std::size_t>(std::max(1, log_every));
    for (std::size_t k = 0; k < run.errors.size(); ++k) {
        if (k % step != 0 && k + 1 != run.errors.size()) continue;
        out << k << ',' << format_number(run.alphas[k]) << ',' << format_number(run.errors[k]) << ','
            << format_number(run.bounds[k]) << '\n';
    }
}

void write_critic_trace_csv(const std::vector<CriticTraceRow>& rows, const std::filesystem::path& path) {
    auto out = open_csv(path);
    out << "k,alpha_k,w_err_sq,bound\n";
    for (const auto& r : rows)
        out << r.k << ',' << format_number(r.alpha) << ',' << format_number(r.w_err_sq) << ','
            << format_number(r.bound) << '\n';
}

void write_pipeline_csv(const PipelineRun& run, const std::filesystem::path& path) {
    auto out = open_csv(path);
    out << "seed,t,beta_t,err_inf,N1,N2,N3,critic_err,n,alpha,gamma_c,L\n";
    const double g = run.gamma;
    const PipelineConfig& cfg = run.config;
    for (const SeedRun& s : run.seeds) {
        // N2 realised from the measured critic errors.
        double n2 = 0.0;
        for (std::size_t t = 0; t <= s.records.size(); ++t) {
            const bool last = t == s.records.size();
            const int ti = static_cast<int>(t);
            const double err = last ? s.final_error : s.records[t].err_before;
            out << s.seed << ',' << t << ',';
            out << (last ? "nan" : format_number(s.records[t].beta_t)) << ',' << format_number(err) << ','
                << format_number(actor_n1(g, ti, s.initial_error)) << ',' << format_number(n2) << ','
                << format_number(actor_n3(cfg.mode, cfg.beta, g, ti)) << ',';
            if (last) {
                out << "nan,nan,nan,nan,nan\n";
                break;
            }
            const PipelineRecord& r = s.records[t];
            out << format_number(r.critic_err) << ',' << r.n << ',' << format_number(r.alpha) << ','
                << format_number(r.gamma_c) << ',' << format_number(r.L) << '\n';
            n2 = g * n2 + 2.0 * g / (1.0 - g) * r.critic_err;
        }
    }
}

}  // namespace aclab

#include "dak/config.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

#include "dak/sup_dakucb.hpp"

namespace dak {

using nlohmann::json;

namespace {

std::string join_problems(const std::vector<std::string>& problems) {
    std::string out = "invalid configuration:";
    for (const auto& p : problems) out += "\n  " + p;
    return out;
}

// Collects type and range problems instead of stopping at the first one.
class Reader {
public:
    explicit Reader(std::vector<std::string>& problems) : problems_(problems) {}

    template <class T>
    T get(const json& obj, const std::string& key, const std::string& path, T fallback) {
        if (!obj.is_object() || !obj.contains(key)) return fallback;
        try {
            return obj.at(key).get<T>();
        } catch (const json::exception&) {
            problems_.push_back(path + ": wrong type");
            return fallback;
        }
    }

    void require(bool ok, const std::string& message) {
        if (!ok) problems_.push_back(message);
    }

    std::vector<std::string>& problems() { return problems_; }

private:
    std::vector<std::string>& problems_;
};

KernelConfig read_kernel(Reader& r, const json& node, const std::string& path) {
    KernelConfig k;
    if (node.is_null()) return k;
    if (!node.is_object()) {
        r.require(false, path + ": must be an object");
        return k;
    }
    const auto family = r.get<std::string>(node, "family", path + ".family", "gaussian");
    try {
        k.family = kernel_family_from_string(family);
    } catch (const std::exception&) {
        r.require(false, path + ".family: unknown kernel '" + family + "'");
    }
    if (node.contains("sigma") && !node.at("sigma").is_null()) {
        const double sigma = r.get<double>(node, "sigma", path + ".sigma", 1.0);
        r.require(sigma > 0.0 && std::isfinite(sigma), path + ".sigma: must be > 0");
        k.sigma = sigma;
    }
    k.gamma = r.get<double>(node, "gamma", path + ".gamma", 1.0);
    r.require(k.gamma > 0.0, path + ".gamma: must be > 0");
    k.degree = r.get<int>(node, "degree", path + ".degree", 2);
    r.require(k.degree >= 1, path + ".degree: must be >= 1");
    k.normalize = r.get<bool>(node, "normalize", path + ".normalize", true);
    return k;
}

ArmTemplate read_arm(Reader& r, const json& node, const std::string& path, int clusters) {
    ArmTemplate arm;
    if (!node.is_object()) {
        r.require(false, path + ": must be an object");
        return arm;
    }
    const auto selection = r.get<std::string>(node, "selection", path + ".selection", "collapsed");
    try {
        arm.selection = mode_selection_from_string(selection);
    } catch (const std::exception&) {
        r.require(false, path + ".selection: unknown mode selection '" + selection + "'");
    }
    arm.modes_per_cluster = r.get<int>(node, "modes", path + ".modes", 1);
    r.require(arm.modes_per_cluster >= 1, path + ".modes: must be >= 1");
    arm.style_radius = r.get<double>(node, "style_radius", path + ".style_radius", 0.7);
    r.require(arm.style_radius >= 0.0, path + ".style_radius: must be >= 0");
    arm.alignment_gain = r.get<double>(node, "alignment_gain", path + ".alignment_gain", 1.0);
    arm.noise_scale = r.get<double>(node, "noise_scale", path + ".noise_scale", 0.02);
    r.require(arm.noise_scale >= 0.0, path + ".noise_scale: must be >= 0");
    arm.expert_cluster = r.get<int>(node, "expert_cluster", path + ".expert_cluster", -1);
    if (arm.selection == ModeSelection::expert) {
        r.require(arm.expert_cluster >= 0 && arm.expert_cluster < clusters,
                  path + ".expert_cluster: must name a defined cluster");
        r.require(clusters >= 2, path + ": expert arms need at least two clusters");
    }
    arm.anchor_group = r.get<int>(node, "anchor_group", path + ".anchor_group", -1);
    return arm;
}

KernelSpec to_spec(const KernelConfig& k, double sigma) {
    KernelSpec spec;
    spec.family = k.family;
    spec.sigma = sigma;
    spec.gamma = k.gamma;
    spec.degree = k.degree;
    spec.normalize = k.normalize;
    return spec;
}

}  // namespace

ValidationError::ValidationError(std::vector<std::string> problems)
    : std::runtime_error(join_problems(problems)), problems_(std::move(problems)) {}

std::string to_string(PolicyKind kind) {
    switch (kind) {
        case PolicyKind::dakucb: return "dakucb";
        case PolicyKind::mixture_dakucb: return "mixture_dakucb";
        case PolicyKind::sup_dakucb: return "sup_dakucb";
        case PolicyKind::pakucb: return "pakucb";
        case PolicyKind::random: return "random";
        case PolicyKind::oracle: return "oracle";
    }
    return "unknown";
}

PolicyKind policy_kind_from_string(const std::string& name) {
    for (auto kind : {PolicyKind::dakucb, PolicyKind::mixture_dakucb, PolicyKind::sup_dakucb, PolicyKind::pakucb,
                      PolicyKind::random, PolicyKind::oracle})
        if (to_string(kind) == name) return kind;
    throw std::invalid_argument("unknown policy '" + name + "'");
}

RunConfig parse_run_config(const json& doc) {
    std::vector<std::string> problems;
    Reader r(problems);
    RunConfig cfg;
    cfg.source = doc;
    if (!doc.is_object()) throw ValidationError({"config: top level must be an object"});

    cfg.seed = r.get<std::uint64_t>(doc, "seed", "seed", 0);
    cfg.horizon = r.get<long>(doc, "horizon", "horizon", 500);
    r.require(cfg.horizon >= 1, "horizon: must be >= 1");
    cfg.trials = r.get<int>(doc, "trials", "trials", 1);
    r.require(cfg.trials >= 1, "trials: must be >= 1");
    cfg.workers = r.get<int>(doc, "workers", "workers", 1);
    r.require(cfg.workers >= 1, "workers: must be >= 1");
    cfg.output_dir = r.get<std::string>(doc, "output_dir", "output_dir", "out");

    const json eval = doc.value("eval", json::object());
    cfg.eval_every = r.get<long>(eval, "every", "eval.every", 25);
    r.require(cfg.eval_every >= 1, "eval.every: must be >= 1");
    cfg.eval_window = r.get<long>(eval, "window", "eval.window", 0);
    r.require(cfg.eval_window >= 0, "eval.window: must be >= 0");
    cfg.vendi_cap = r.get<std::size_t>(eval, "vendi_cap", "eval.vendi_cap", 256);
    r.require(cfg.vendi_cap >= 1, "eval.vendi_cap: must be >= 1");
    cfg.record_timing = r.get<bool>(eval, "timing", "eval.timing", false);

    const json env = doc.value("env", json::object());
    cfg.env_type = r.get<std::string>(env, "type", "env.type", "synthetic");
    if (cfg.env_type == "synthetic") {
        auto& L = cfg.layout;
        L.prompt_dim = r.get<long>(env, "prompt_dim", "env.prompt_dim", 16);
        L.output_dim = r.get<long>(env, "output_dim", "env.output_dim", 16);
        L.semantic_dim = r.get<long>(env, "semantic_dim", "env.semantic_dim", 8);
        r.require(L.prompt_dim >= 1, "env.prompt_dim: must be >= 1");
        r.require(L.semantic_dim >= 1 && L.semantic_dim < L.output_dim,
                  "env.semantic_dim: must lie in [1, output_dim)");
        L.clusters = r.get<int>(env, "clusters", "env.clusters", 2);
        r.require(L.clusters >= 1, "env.clusters: must be >= 1");
        L.cluster_separation = r.get<double>(env, "cluster_separation", "env.cluster_separation", 1.0);
        L.cluster_spread = r.get<double>(env, "cluster_spread", "env.cluster_spread", 0.05);
        r.require(L.cluster_spread >= 0.0, "env.cluster_spread: must be >= 0");
        L.cluster_weights = r.get<std::vector<double>>(env, "cluster_weights", "env.cluster_weights", {});
        if (!L.cluster_weights.empty()) {
            r.require(static_cast<int>(L.cluster_weights.size()) == L.clusters,
                      "env.cluster_weights: need one weight per cluster");
            double total = 0.0;
            bool nonneg = true;
            for (double w : L.cluster_weights) {
                total += w;
                nonneg = nonneg && w >= 0.0;
            }
            r.require(nonneg && total > 0.0, "env.cluster_weights: must be nonnegative with positive sum");
        }
        L.seed = r.get<std::uint64_t>(env, "layout_seed", "env.layout_seed", cfg.seed);
        if (!env.contains("arms") || !env.at("arms").is_array() || env.at("arms").empty()) {
            problems.push_back("env.arms: at least one arm must be defined");
        } else {
            for (std::size_t i = 0; i < env.at("arms").size(); ++i)
                L.arms.push_back(read_arm(r, env.at("arms")[i], "env.arms[" + std::to_string(i) + "]", L.clusters));
        }
        if (env.contains("reference") && !env.at("reference").is_null())
            L.reference = read_arm(r, env.at("reference"), "env.reference", L.clusters);
    } else if (cfg.env_type == "replay") {
        cfg.replay_path = r.get<std::string>(env, "path", "env.path", "");
        r.require(!cfg.replay_path.empty(), "env.path: replay environments need an embedding file");
        if (env.contains("reference_arm") && !env.at("reference_arm").is_null())
            cfg.reference_arm = r.get<std::string>(env, "reference_arm", "env.reference_arm", "");
    } else {
        problems.push_back("env.type: must be 'synthetic' or 'replay'");
    }

    const json kernels = doc.value("kernels", json::object());
    cfg.prompt_kernel = read_kernel(r, kernels.value("prompt", json()), "kernels.prompt");
    cfg.output_kernel = read_kernel(r, kernels.value("output", json()), "kernels.output");
    cfg.bandwidth_samples = r.get<std::size_t>(kernels, "bandwidth_samples", "kernels.bandwidth_samples", 200);
    r.require(cfg.bandwidth_samples >= 2, "kernels.bandwidth_samples: must be >= 2");

    const json pol = doc.value("policy", json::object());
    const auto name = r.get<std::string>(pol, "name", "policy.name", "dakucb");
    try {
        cfg.policy = policy_kind_from_string(name);
    } catch (const std::exception&) {
        problems.push_back("policy.name: unknown policy '" + name + "'");
    }
    auto& pc = cfg.policy_config;
    pc.lambda = r.get<double>(pol, "lambda", "policy.lambda", 1.0);
    r.require(pc.lambda >= 0.0 && std::isfinite(pc.lambda), "policy.lambda: must be >= 0");
    const auto primitive = r.get<std::string>(pol, "diversity", "policy.diversity", "neg_ijrke");
    try {
        pc.diversity = diversity_primitive_from_string(primitive);
    } catch (const std::exception&) {
        problems.push_back("policy.diversity: must be neg_ijrke or neg_jkd");
    }
    const auto beta_mode = r.get<std::string>(pol, "beta_mode", "policy.beta_mode", "fixed");
    if (beta_mode == "fixed") cfg.beta_mode = BetaMode::fixed;
    else if (beta_mode == "theory") cfg.beta_mode = BetaMode::theory;
    else problems.push_back("policy.beta_mode: must be 'fixed' or 'theory'");
    pc.beta_s = r.get<double>(pol, "beta_s", "policy.beta_s", 1.5);
    pc.beta_d = r.get<double>(pol, "beta_d", "policy.beta_d", 1.5);
    r.require(pc.beta_s > 0.0, "policy.beta_s: must be > 0");
    r.require(pc.beta_d > 0.0, "policy.beta_d: must be > 0");
    pc.ridge = r.get<double>(pol, "ridge", "policy.ridge", 1.0);
    r.require(pc.ridge > 0.0, "policy.ridge: must be > 0");
    pc.panel_rate = r.get<double>(pol, "panel_rate", "policy.panel_rate", 0.2);
    r.require(pc.panel_rate >= 0.0 && pc.panel_rate <= 1.0, "policy.panel_rate: must lie in [0,1]");
    pc.qp_tolerance = r.get<double>(pol, "qp_tolerance", "policy.qp_tolerance", 1e-9);
    r.require(pc.qp_tolerance > 0.0, "policy.qp_tolerance: must be > 0");
    pc.qp_max_iterations = r.get<int>(pol, "qp_max_iterations", "policy.qp_max_iterations", 10000);
    r.require(pc.qp_max_iterations >= 1, "policy.qp_max_iterations: must be >= 1");
    pc.refactor_every = r.get<std::size_t>(pol, "refactor_every", "policy.refactor_every", 512);
    r.require(pc.refactor_every >= 1, "policy.refactor_every: must be >= 1");
    pc.rff_features = r.get<std::size_t>(pol, "rff_features", "policy.rff_features", 0);
    pc.rff_seed = r.get<std::uint64_t>(pol, "rff_seed", "policy.rff_seed", cfg.seed);
    pc.seed = cfg.seed;
    if (pc.rff_features > 0) {
        r.require(pc.diversity == DiversityPrimitive::neg_ijrke, "policy.rff_features: requires neg_ijrke");
        r.require(cfg.prompt_kernel.family == KernelFamily::gaussian &&
                      cfg.output_kernel.family == KernelFamily::gaussian,
                  "policy.rff_features: requires gaussian prompt and output kernels");
    }
    if (cfg.policy == PolicyKind::mixture_dakucb)
        r.require(pc.diversity == DiversityPrimitive::neg_ijrke, "policy.diversity: mixture_dakucb needs neg_ijrke");
    cfg.reference_size = r.get<std::size_t>(pol, "reference_size", "policy.reference_size", 200);
    r.require(cfg.reference_size >= 1, "policy.reference_size: must be >= 1");
    cfg.oracle_validation = r.get<std::size_t>(pol, "oracle_validation", "policy.oracle_validation", 200);
    r.require(cfg.oracle_validation >= 1, "policy.oracle_validation: must be >= 1");

    const json theory = pol.value("theory", json::object());
    cfg.theory.rkhs_bound = r.get<double>(theory, "rkhs_bound", "policy.theory.rkhs_bound", 1.0);
    cfg.theory.fidelity_noise = r.get<double>(theory, "fidelity_noise", "policy.theory.fidelity_noise", 0.5);
    cfg.theory.diversity_noise = r.get<double>(theory, "diversity_noise", "policy.theory.diversity_noise", 0.5);
    cfg.theory.failure_prob = r.get<double>(theory, "delta", "policy.theory.delta", 0.1);
    r.require(cfg.theory.failure_prob > 0.0 && cfg.theory.failure_prob < 1.0, "policy.theory.delta: must lie in (0,1)");
    r.require(cfg.theory.rkhs_bound >= 0.0, "policy.theory.rkhs_bound: must be >= 0");

    if (pc.diversity == DiversityPrimitive::neg_jkd && cfg.env_type == "synthetic")
        r.require(cfg.layout.reference.has_value(), "env.reference: neg_jkd needs a reference arm");
    if (pc.diversity == DiversityPrimitive::neg_jkd && cfg.env_type == "replay")
        r.require(cfg.reference_arm.has_value(), "env.reference_arm: neg_jkd needs a reference column");

    if (!problems.empty()) throw ValidationError(std::move(problems));
    return cfg;
}

void apply_override(json& doc, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0)
        throw ValidationError({"--set " + assignment + ": expected key=value"});
    const std::string key = assignment.substr(0, eq);
    const std::string raw = assignment.substr(eq + 1);
    json value = json::parse(raw, nullptr, false);
    if (value.is_discarded()) value = raw;

    json* node = &doc;
    std::size_t start = 0;
    while (true) {
        const auto dot = key.find('.', start);
        std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (part.empty()) throw ValidationError({"--set " + assignment + ": empty key segment"});
        const bool index = !part.empty() && std::all_of(part.begin(), part.end(), ::isdigit) && node->is_array();
        json& child = index ? node->at(std::stoul(part)) : (*node)[part];
        if (dot == std::string::npos) {
            child = value;
            return;
        }
        if (child.is_null()) child = json::object();
        node = &child;
        start = dot + 1;
    }
}

RunConfig load_run_config(const std::string& path, const std::vector<std::string>& overrides) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config '" + path + "'");
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ValidationError({path + ": " + e.what()});
    }
    for (const auto& o : overrides) apply_override(doc, o);
    return parse_run_config(doc);
}

std::unique_ptr<Environment> make_environment(const RunConfig& config,
                                              const std::shared_ptr<const EmbeddingDataset>& dataset) {
    if (config.env_type == "replay") {
        EmbeddingDataset data = dataset ? *dataset : load_embeddings(config.replay_path);
        return std::make_unique<ReplayEnv>(std::move(data), config.reference_arm);
    }
    return std::make_unique<SyntheticEnv>(build_synthetic_env(config.layout));
}

JointKernelSpec resolve_kernels(const RunConfig& config, Environment& env) {
    const bool need_prompt = config.prompt_kernel.family == KernelFamily::gaussian && !config.prompt_kernel.sigma;
    const bool need_output = config.output_kernel.family == KernelFamily::gaussian && !config.output_kernel.sigma;
    double prompt_sigma = config.prompt_kernel.sigma.value_or(1.0);
    double output_sigma = config.output_kernel.sigma.value_or(1.0);
    if (need_prompt || need_output) {
        Rng probe(config.seed ^ 0x6b65726e656c73ULL);
        std::vector<Vector> prompts, outputs;
        for (std::size_t i = 0; i < config.bandwidth_samples; ++i) {
            const Prompt p = env.sample_prompt(probe);
            prompts.push_back(p.vec);
            outputs.push_back(env.generate(i % env.num_arms(), p, probe));
        }
        if (need_prompt) prompt_sigma = median_bandwidth(prompts);
        if (need_output) output_sigma = median_bandwidth(outputs);
    }
    JointKernelSpec jspec;
    jspec.text_kernel = to_spec(config.prompt_kernel, prompt_sigma);
    jspec.data_kernel = to_spec(config.output_kernel, output_sigma);
    jspec.squared = false;
    return jspec;
}

PolicyConfig resolve_policy_config(const RunConfig& config, Environment& env) {
    PolicyConfig pc = config.policy_config;
    pc.kernels = resolve_kernels(config, env);
    if (config.beta_mode == BetaMode::theory) {
        ConfidenceParams base;
        base.rkhs_bound = config.theory.rkhs_bound;
        base.failure_prob = config.theory.failure_prob;
        base.arms = static_cast<int>(env.num_arms());
        base.stages = config.policy == PolicyKind::sup_dakucb ? sup_stage_count(config.horizon) : 1;
        base.horizon = config.horizon;
        const Betas betas = theory_betas(base, config.theory.fidelity_noise, config.theory.diversity_noise, pc.ridge);
        pc.beta_s = betas.beta_s;
        pc.beta_d = betas.beta_d;
    }
    if (pc.diversity == DiversityPrimitive::neg_jkd) {
        if (!env.has_reference()) throw ValidationError({"policy.diversity: neg_jkd needs a reference arm"});
        Rng ref_rng(config.seed ^ 0x7265666572656eULL);
        auto reference = std::make_shared<PairedCorpus>();
        for (std::size_t i = 0; i < config.reference_size; ++i) {
            const Prompt p = env.sample_prompt(ref_rng);
            reference->add(p.vec, env.generate_reference(p, ref_rng));
        }
        pc.reference = std::move(reference);
    }
    pc.validate();
    return pc;
}

}  // namespace dak

#include "dak/env.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "json.hpp"

namespace dak {

namespace {

Vector gaussian_vector(Eigen::Index dim, Rng& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Vector v(dim);
    for (Eigen::Index i = 0; i < dim; ++i) v(i) = normal(rng);
    return v;
}

Vector draw_from_cluster(const PromptCluster& cluster, Rng& rng) {
    if (cluster.scale == 0.0) return cluster.mean;
    return cluster.mean + cluster.scale * gaussian_vector(cluster.mean.size(), rng);
}

}  // namespace

PromptSampler::PromptSampler(std::vector<PromptCluster> clusters, std::vector<double> weights)
    : clusters_(std::move(clusters)), weights_(std::move(weights)) {
    if (clusters_.empty()) throw std::invalid_argument("PromptSampler: no clusters");
    if (weights_.empty()) weights_.assign(clusters_.size(), 1.0 / static_cast<double>(clusters_.size()));
    if (weights_.size() != clusters_.size())
        throw std::invalid_argument("PromptSampler: weight count differs from cluster count");
    double total = 0.0;
    for (double w : weights_) {
        if (!(w >= 0.0) || !std::isfinite(w)) throw std::invalid_argument("PromptSampler: negative weight");
        total += w;
    }
    if (!(total > 0.0)) throw std::invalid_argument("PromptSampler: weights sum to zero");
    for (double& w : weights_) w /= total;
    for (const auto& c : clusters_) {
        if (c.mean.size() != clusters_.front().mean.size())
            throw std::invalid_argument("PromptSampler: inconsistent cluster dimensions");
        if (!(c.scale >= 0.0) || !c.mean.allFinite())
            throw std::invalid_argument("PromptSampler: invalid cluster");
    }
}

Prompt PromptSampler::sample(Rng& rng) const {
    std::discrete_distribution<int> pick(weights_.begin(), weights_.end());
    Prompt prompt;
    prompt.cluster = pick(rng);
    prompt.vec = draw_from_cluster(clusters_[static_cast<std::size_t>(prompt.cluster)], rng);
    return prompt;
}

std::string to_string(ModeSelection selection) {
    switch (selection) {
        case ModeSelection::collapsed: return "collapsed";
        case ModeSelection::uniform_over_modes: return "uniform";
        case ModeSelection::expert: return "expert";
    }
    return "unknown";
}

ModeSelection mode_selection_from_string(const std::string& name) {
    if (name == "collapsed") return ModeSelection::collapsed;
    if (name == "uniform" || name == "uniform_over_modes") return ModeSelection::uniform_over_modes;
    if (name == "expert") return ModeSelection::expert;
    throw std::invalid_argument("unknown mode selection '" + name + "'");
}

Vector SyntheticArm::generate(int cluster, const Vector& t, Rng& rng) const {
    if (cluster < 0 || static_cast<std::size_t>(cluster) >= modes.size())
        throw std::invalid_argument("SyntheticArm::generate: unknown cluster " + std::to_string(cluster));
    int source = cluster;
    const Vector* base = &t;
    if (selection == ModeSelection::expert && cluster != expert_cluster && modes.size() > 1) {
        std::uniform_int_distribution<int> wrong(0, static_cast<int>(modes.size()) - 2);
        source = wrong(rng);
        if (source >= cluster) ++source;
        base = &cluster_prompts.at(static_cast<std::size_t>(source));
    }
    const auto& anchors = modes[static_cast<std::size_t>(source)];
    if (anchors.empty()) throw std::invalid_argument("SyntheticArm::generate: cluster without modes");
    std::size_t mode = 0;
    if (selection != ModeSelection::collapsed && anchors.size() > 1) {
        std::uniform_int_distribution<std::size_t> pick(0, anchors.size() - 1);
        mode = pick(rng);
    }
    Vector x = alignment_map * (*base) + anchors[mode];
    if (noise_scale > 0.0) x += noise_scale * gaussian_vector(x.size(), rng);
    return x;
}

double FidelityScorer::score(const Vector& t, const Vector& x) const {
    if (t.size() != map_.cols() || x.size() != map_.rows())
        throw std::invalid_argument("fidelity: dimension mismatch");
    const Vector target = map_ * t;
    const double scale = target.norm() * x.norm();
    if (!(scale > 0.0)) throw std::invalid_argument("fidelity: zero vector");
    const double cosine = std::clamp(target.dot(x) / scale, -1.0, 1.0);
    return 0.5 * (1.0 + cosine);
}

Vector Environment::generate_reference(const Prompt&, Rng&) {
    throw std::logic_error("environment has no reference generator");
}

SyntheticEnv::SyntheticEnv(PromptSampler sampler, std::vector<SyntheticArm> arms, FidelityScorer scorer,
                           std::optional<SyntheticArm> reference)
    : sampler_(std::move(sampler)), arms_(std::move(arms)), scorer_(std::move(scorer)),
      reference_(std::move(reference)) {
    if (arms_.empty()) throw std::invalid_argument("SyntheticEnv: no arms");
    for (const auto& arm : arms_)
        if (arm.modes.size() != sampler_.num_clusters())
            throw std::invalid_argument("SyntheticEnv: arm " + std::to_string(arm.arm_id) +
                                        " does not cover every cluster");
}

Vector SyntheticEnv::generate(std::size_t arm, const Prompt& prompt, Rng& rng) {
    return arms_.at(arm).generate(prompt.cluster, prompt.vec, rng);
}

double SyntheticEnv::fidelity(const Prompt& prompt, std::size_t, const Vector& output) const {
    return scorer_.score(prompt.vec, output);
}

Vector SyntheticEnv::generate_reference(const Prompt& prompt, Rng& rng) {
    if (!reference_) return Environment::generate_reference(prompt, rng);
    return reference_->generate(prompt.cluster, prompt.vec, rng);
}

SyntheticEnv build_synthetic_env(const SyntheticLayout& layout) {
    if (layout.prompt_dim < 1 || layout.output_dim < 1 || layout.clusters < 1)
        throw std::invalid_argument("layout: dimensions and cluster count must be positive");
    if (layout.semantic_dim < 1 || layout.semantic_dim >= layout.output_dim)
        throw std::invalid_argument("layout: semantic_dim must lie in [1, output_dim)");
    if (layout.arms.empty()) throw std::invalid_argument("layout: no arms");

    Rng rng(layout.seed);
    std::vector<PromptCluster> clusters;
    for (int c = 0; c < layout.clusters; ++c) {
        Vector mean = gaussian_vector(layout.prompt_dim, rng);
        mean *= layout.cluster_separation / mean.norm();
        clusters.push_back({mean, layout.cluster_spread});
    }

    Matrix map = Matrix::Zero(layout.output_dim, layout.prompt_dim);
    const double map_scale = 1.0 / std::sqrt(static_cast<double>(layout.prompt_dim));
    for (Eigen::Index i = 0; i < layout.semantic_dim; ++i)
        map.row(i) = map_scale * gaussian_vector(layout.prompt_dim, rng).transpose();

    const Eigen::Index style_dim = layout.output_dim - layout.semantic_dim;
    auto style_direction = [&](Rng& r) {
        Vector v = Vector::Zero(layout.output_dim);
        Vector s = gaussian_vector(style_dim, r);
        v.tail(style_dim) = s / s.norm();
        return v;
    };

    // Unit anchor directions per group, grown on demand so the mode count can vary by arm.
    std::map<int, std::vector<std::vector<Vector>>> groups;
    auto anchors_for = [&](const ArmTemplate& recipe) {
        std::vector<std::vector<Vector>> dirs;
        const auto needed = static_cast<std::size_t>(std::max(recipe.modes_per_cluster, 1));
        if (recipe.anchor_group < 0) {
            dirs.resize(static_cast<std::size_t>(layout.clusters));
            for (auto& cluster_dirs : dirs)
                for (std::size_t m = 0; m < needed; ++m) cluster_dirs.push_back(style_direction(rng));
        } else {
            auto& shared = groups[recipe.anchor_group];
            shared.resize(static_cast<std::size_t>(layout.clusters));
            for (auto& cluster_dirs : shared)
                while (cluster_dirs.size() < needed) cluster_dirs.push_back(style_direction(rng));
            for (const auto& cluster_dirs : shared)
                dirs.emplace_back(cluster_dirs.begin(), cluster_dirs.begin() + static_cast<std::ptrdiff_t>(needed));
        }
        for (auto& cluster_dirs : dirs)
            for (auto& d : cluster_dirs) d *= recipe.style_radius;
        return dirs;
    };

    std::vector<Vector> cluster_prompts;
    for (const auto& c : clusters) cluster_prompts.push_back(c.mean);

    auto make_arm = [&](const ArmTemplate& recipe, int id) {
        if (recipe.modes_per_cluster < 1) throw std::invalid_argument("layout: modes_per_cluster must be >= 1");
        if (recipe.selection == ModeSelection::expert &&
            (recipe.expert_cluster < 0 || recipe.expert_cluster >= layout.clusters))
            throw std::invalid_argument("layout: expert arm needs a valid expert_cluster");
        SyntheticArm arm;
        arm.arm_id = id;
        arm.selection = recipe.selection;
        arm.modes = anchors_for(recipe);
        arm.noise_scale = recipe.noise_scale;
        arm.alignment_map = recipe.alignment_gain * map;
        arm.expert_cluster = recipe.expert_cluster;
        arm.cluster_prompts = cluster_prompts;
        return arm;
    };

    std::vector<SyntheticArm> arms;
    for (std::size_t g = 0; g < layout.arms.size(); ++g) arms.push_back(make_arm(layout.arms[g], static_cast<int>(g)));
    std::optional<SyntheticArm> reference;
    if (layout.reference) reference = make_arm(*layout.reference, -1);

    return SyntheticEnv(PromptSampler(std::move(clusters), layout.cluster_weights), std::move(arms),
                        FidelityScorer(std::move(map)), std::move(reference));
}

ObjectiveTable estimate_objective_table(SyntheticEnv& env, const JointKernelSpec& jspec, std::size_t samples,
                                        Rng& rng) {
    if (samples == 0) throw std::invalid_argument("estimate_objective_table: samples must be positive");
    const auto squared = jspec.with_squared(true);
    const std::size_t arms = env.num_arms();
    const std::size_t clusters = env.num_clusters();
    ObjectiveTable table;
    table.fidelity.assign(arms, std::vector<double>(clusters, 0.0));
    table.penalty.assign(arms, std::vector<double>(clusters, 0.0));
    for (std::size_t g = 0; g < arms; ++g) {
        std::vector<EmbeddedPair> reference;
        for (std::size_t i = 0; i < samples; ++i) {
            Prompt p = env.sample_prompt(rng);
            Vector x = env.generate(g, p, rng);
            reference.push_back({p.vec, x, {}, {}});
        }
        for (std::size_t c = 0; c < clusters; ++c) {
            double fid = 0.0;
            double pen = 0.0;
            for (std::size_t i = 0; i < samples; ++i) {
                Prompt p;
                p.cluster = static_cast<int>(c);
                p.vec = draw_from_cluster(env.sampler().clusters()[c], rng);
                Vector x = env.generate(g, p, rng);
                fid += env.fidelity(p, g, x);
                double inner = 0.0;
                for (const auto& ref : reference) inner += eval_joint(squared, p.vec, x, ref.prompt_vec, ref.output_vec);
                pen += inner / static_cast<double>(samples);
            }
            table.fidelity[g][c] = fid / static_cast<double>(samples);
            table.penalty[g][c] = pen / static_cast<double>(samples);
        }
    }
    return table;
}

// ---------------------------------------------------------------------------

std::size_t EmbeddingDataset::num_clusters() const {
    int top = 0;
    for (const auto& r : records) top = std::max(top, r.cluster);
    return records.empty() ? 0 : static_cast<std::size_t>(top) + 1;
}

namespace {

Vector to_vector(const nlohmann::json& arr, const std::string& what, std::size_t line) {
    if (!arr.is_array()) throw ParseError("line " + std::to_string(line) + ": " + what + " must be an array");
    Vector v(static_cast<Eigen::Index>(arr.size()));
    for (std::size_t i = 0; i < arr.size(); ++i) {
        if (!arr[i].is_number())
            throw ParseError("line " + std::to_string(line) + ": " + what + " holds a non-number");
        v(static_cast<Eigen::Index>(i)) = arr[i].get<double>();
    }
    if (!v.allFinite()) throw ParseError("line " + std::to_string(line) + ": " + what + " holds a non-finite value");
    return v;
}

bool arm_key_less(const std::string& a, const std::string& b) {
    long va = 0;
    long vb = 0;
    const auto ra = std::from_chars(a.data(), a.data() + a.size(), va);
    const auto rb = std::from_chars(b.data(), b.data() + b.size(), vb);
    const bool na = ra.ec == std::errc() && ra.ptr == a.data() + a.size();
    const bool nb = rb.ec == std::errc() && rb.ptr == b.data() + b.size();
    if (na && nb) return va < vb;
    if (na != nb) return na;
    return a < b;
}

nlohmann::json vector_json(const Vector& v) {
    nlohmann::json arr = nlohmann::json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
    return arr;
}

}  // namespace

EmbeddingDataset parse_embeddings(std::istream& in) {
    EmbeddingDataset dataset;
    std::string text;
    std::size_t line = 0;
    Eigen::Index prompt_dim = -1;
    Eigen::Index output_dim = -1;
    while (std::getline(in, text)) {
        ++line;
        if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(text);
        } catch (const nlohmann::json::parse_error& e) {
            throw ParseError("line " + std::to_string(line) + ": " + e.what());
        }
        if (!j.is_object()) throw ParseError("line " + std::to_string(line) + ": record must be an object");
        EmbeddingRecord record;
        try {
            record.id = j.at("id").is_string() ? j.at("id").get<std::string>() : j.at("id").dump();
            record.cluster = j.contains("cluster") ? j.at("cluster").get<int>() : 0;
            record.prompt_vec = to_vector(j.at("prompt_vec"), "prompt_vec", line);
            const auto& outputs = j.at("outputs");
            if (!outputs.is_object()) throw ParseError("line " + std::to_string(line) + ": outputs must be an object");
            for (const auto& [key, value] : outputs.items())
                record.outputs[key] = to_vector(value, "outputs." + key, line);
            if (j.contains("fidelity") && !j.at("fidelity").is_null()) {
                for (const auto& [key, value] : j.at("fidelity").items()) record.fidelity[key] = value.get<double>();
            }
        } catch (const nlohmann::json::exception& e) {
            throw ParseError("line " + std::to_string(line) + ": " + e.what());
        }
        if (record.cluster < 0) throw SchemaError("line " + std::to_string(line) + ": negative cluster");
        if (record.outputs.empty()) throw SchemaError("line " + std::to_string(line) + ": no arm outputs");

        if (prompt_dim < 0) prompt_dim = record.prompt_vec.size();
        if (record.prompt_vec.size() != prompt_dim || prompt_dim == 0)
            throw SchemaError("line " + std::to_string(line) + ": prompt_vec dimension mismatch");
        for (const auto& [key, v] : record.outputs) {
            if (output_dim < 0) output_dim = v.size();
            if (v.size() != output_dim || output_dim == 0)
                throw SchemaError("line " + std::to_string(line) + ": output '" + key + "' dimension mismatch");
        }
        std::vector<std::string> keys;
        for (const auto& [key, v] : record.outputs) keys.push_back(key);
        std::sort(keys.begin(), keys.end(), arm_key_less);
        if (dataset.records.empty()) {
            dataset.arm_ids = keys;
        } else if (keys != dataset.arm_ids) {
            throw SchemaError("line " + std::to_string(line) + ": arm columns differ from the first record");
        }
        for (const auto& [key, value] : record.fidelity)
            if (!record.outputs.contains(key))
                throw SchemaError("line " + std::to_string(line) + ": fidelity for unknown arm '" + key + "'");
        dataset.records.push_back(std::move(record));
    }
    if (dataset.records.empty()) throw SchemaError("embedding file holds no records");
    return dataset;
}

EmbeddingDataset load_embeddings(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open embedding file '" + path + "'");
    return parse_embeddings(in);
}

void write_embeddings(const EmbeddingDataset& dataset, std::ostream& out) {
    for (const auto& record : dataset.records) {
        nlohmann::ordered_json j;
        j["id"] = record.id;
        j["cluster"] = record.cluster;
        j["prompt_vec"] = vector_json(record.prompt_vec);
        nlohmann::ordered_json outputs = nlohmann::ordered_json::object();
        for (const auto& key : dataset.arm_ids) outputs[key] = vector_json(record.outputs.at(key));
        j["outputs"] = outputs;
        if (!record.fidelity.empty()) {
            nlohmann::ordered_json fid = nlohmann::ordered_json::object();
            for (const auto& key : dataset.arm_ids)
                if (auto it = record.fidelity.find(key); it != record.fidelity.end()) fid[key] = it->second;
            j["fidelity"] = fid;
        }
        out << j.dump() << '\n';
    }
}

void write_embeddings(const EmbeddingDataset& dataset, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write embedding file '" + path + "'");
    write_embeddings(dataset, out);
}

ReplayEnv::ReplayEnv(EmbeddingDataset dataset, std::optional<std::string> reference_arm)
    : dataset_(std::move(dataset)), reference_(std::move(reference_arm)) {
    if (dataset_.records.empty()) throw SchemaError("ReplayEnv: empty dataset");
    for (const auto& id : dataset_.arm_ids)
        if (!reference_ || id != *reference_) arm_columns_.push_back(id);
    if (reference_ && std::find(dataset_.arm_ids.begin(), dataset_.arm_ids.end(), *reference_) == dataset_.arm_ids.end())
        throw SchemaError("ReplayEnv: reference arm '" + *reference_ + "' not in dataset");
    if (arm_columns_.empty()) throw SchemaError("ReplayEnv: no selectable arm columns");
    clusters_ = std::max<std::size_t>(dataset_.num_clusters(), 1);
    order_.resize(dataset_.records.size());
    cursor_ = order_.size();
}

Prompt ReplayEnv::sample_prompt(Rng& rng) {
    if (cursor_ >= order_.size()) {
        std::iota(order_.begin(), order_.end(), std::size_t{0});
        std::shuffle(order_.begin(), order_.end(), rng);
        cursor_ = 0;
    }
    const std::size_t index = order_[cursor_++];
    const auto& record = dataset_.records[index];
    return {record.cluster, record.prompt_vec, index};
}

Vector ReplayEnv::generate(std::size_t arm, const Prompt& prompt, Rng&) {
    return dataset_.records.at(prompt.record).outputs.at(arm_columns_.at(arm));
}

double ReplayEnv::fidelity(const Prompt& prompt, std::size_t arm, const Vector& output) const {
    const auto& record = dataset_.records.at(prompt.record);
    if (auto it = record.fidelity.find(arm_columns_.at(arm)); it != record.fidelity.end()) return it->second;
    if (prompt.vec.size() != output.size())
        throw SchemaError("ReplayEnv: record '" + record.id +
                          "' lacks a fidelity value and prompt/output dimensions differ");
    const double scale = prompt.vec.norm() * output.norm();
    if (!(scale > 0.0)) throw std::invalid_argument("fidelity: zero vector");
    return 0.5 * (1.0 + std::clamp(prompt.vec.dot(output) / scale, -1.0, 1.0));
}

Vector ReplayEnv::generate_reference(const Prompt& prompt, Rng& rng) {
    if (!reference_) return Environment::generate_reference(prompt, rng);
    return dataset_.records.at(prompt.record).outputs.at(*reference_);
}

}  // namespace dak

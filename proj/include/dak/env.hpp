#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "dak/kernels.hpp"
#include "dak/types.hpp"

namespace dak {

/// One drawn prompt. `record` indexes the backing dataset row for replay environments.
struct Prompt {
    int cluster = 0;
    Vector vec;
    std::size_t record = 0;
};

struct PromptCluster {
    Vector mean;
    double scale = 0.0;  // isotropic standard deviation
};

class PromptSampler {
public:
    PromptSampler(std::vector<PromptCluster> clusters, std::vector<double> weights);

    Prompt sample(Rng& rng) const;

    std::size_t num_clusters() const { return clusters_.size(); }
    const std::vector<PromptCluster>& clusters() const { return clusters_; }
    const std::vector<double>& weights() const { return weights_; }
    Eigen::Index dim() const { return clusters_.front().mean.size(); }

private:
    std::vector<PromptCluster> clusters_;
    std::vector<double> weights_;
};

enum class ModeSelection { collapsed, uniform_over_modes, expert };

std::string to_string(ModeSelection selection);
ModeSelection mode_selection_from_string(const std::string& name);

/// Synthetic prompt-conditioned generator:
///   x = alignment_map * t + anchor + noise_scale * N(0, I).
/// collapsed uses mode 0 of the prompt's cluster; uniform draws a mode; an expert
/// behaves like uniform on its own cluster and otherwise answers a uniformly
/// chosen wrong cluster (its representative prompt and anchors).
struct SyntheticArm {
    int arm_id = 0;
    ModeSelection selection = ModeSelection::collapsed;
    std::vector<std::vector<Vector>> modes;  // [cluster][mode]
    double noise_scale = 0.0;
    Matrix alignment_map;                    // output_dim x prompt_dim
    int expert_cluster = -1;
    std::vector<Vector> cluster_prompts;     // representative prompt per cluster (expert only)

    Vector generate(int cluster, const Vector& t, Rng& rng) const;
};

/// (1 + cos(A t, x)) / 2.
class FidelityScorer {
public:
    explicit FidelityScorer(Matrix map) : map_(std::move(map)) {}
    double score(const Vector& t, const Vector& x) const;
    const Matrix& map() const { return map_; }

private:
    Matrix map_;
};

/// Source of prompts, arm outputs, and fidelity labels for a policy run.
class Environment {
public:
    virtual ~Environment() = default;

    virtual std::size_t num_arms() const = 0;
    virtual std::size_t num_clusters() const = 0;
    virtual Prompt sample_prompt(Rng& rng) = 0;
    virtual Vector generate(std::size_t arm, const Prompt& prompt, Rng& rng) = 0;
    virtual double fidelity(const Prompt& prompt, std::size_t arm, const Vector& output) const = 0;

    virtual bool has_reference() const { return false; }
    virtual Vector generate_reference(const Prompt& prompt, Rng& rng);
};

class SyntheticEnv final : public Environment {
public:
    SyntheticEnv(PromptSampler sampler, std::vector<SyntheticArm> arms, FidelityScorer scorer,
                 std::optional<SyntheticArm> reference = std::nullopt);

    std::size_t num_arms() const override { return arms_.size(); }
    std::size_t num_clusters() const override { return sampler_.num_clusters(); }
    Prompt sample_prompt(Rng& rng) override { return sampler_.sample(rng); }
    Vector generate(std::size_t arm, const Prompt& prompt, Rng& rng) override;
    double fidelity(const Prompt& prompt, std::size_t arm, const Vector& output) const override;
    bool has_reference() const override { return reference_.has_value(); }
    Vector generate_reference(const Prompt& prompt, Rng& rng) override;

    const PromptSampler& sampler() const { return sampler_; }
    const std::vector<SyntheticArm>& arms() const { return arms_; }
    const FidelityScorer& scorer() const { return scorer_; }

private:
    PromptSampler sampler_;
    std::vector<SyntheticArm> arms_;
    FidelityScorer scorer_;
    std::optional<SyntheticArm> reference_;
};

/// Arm recipe for the layout builder. Arms with the same `anchor_group` share anchors.
struct ArmTemplate {
    ModeSelection selection = ModeSelection::collapsed;
    int modes_per_cluster = 1;
    double style_radius = 0.7;
    double alignment_gain = 1.0;
    double noise_scale = 0.02;
    int expert_cluster = -1;
    int anchor_group = -1;  // -1: private anchors
};

/// Desk-scale embedding layout. Output space is split into a semantic block
/// (first `semantic_dim` coordinates, reached by the alignment map) and a style
/// block holding the anchors, so fidelity depends on the anchor only through its norm.
struct SyntheticLayout {
    Eigen::Index prompt_dim = 16;
    Eigen::Index output_dim = 16;
    Eigen::Index semantic_dim = 8;
    int clusters = 2;
    double cluster_separation = 1.0;
    double cluster_spread = 0.05;
    std::vector<double> cluster_weights;  // empty: uniform
    std::vector<ArmTemplate> arms;
    std::optional<ArmTemplate> reference;
    std::uint64_t seed = 1;
};

SyntheticEnv build_synthetic_env(const SyntheticLayout& layout);

/// Monte-Carlo estimates of per-(arm, cluster) fidelity s and I-JRKE penalty D,
/// with the reference prompt distribution P_T and each arm's own outputs.
struct ObjectiveTable {
    std::vector<std::vector<double>> fidelity;  // [arm][cluster]
    std::vector<std::vector<double>> penalty;   // [arm][cluster]

    double objective(std::size_t arm, std::size_t cluster, double lambda) const {
        return fidelity[arm][cluster] - lambda * penalty[arm][cluster];
    }
};

ObjectiveTable estimate_objective_table(SyntheticEnv& env, const JointKernelSpec& jspec,
                                        std::size_t samples, Rng& rng);

// ---------------------------------------------------------------------------
// Precomputed embedding datasets (JSON Lines).

class ParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class SchemaError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct EmbeddingRecord {
    std::string id;
    int cluster = 0;
    Vector prompt_vec;
    std::map<std::string, Vector> outputs;
    std::map<std::string, double> fidelity;
};

struct EmbeddingDataset {
    std::vector<EmbeddingRecord> records;
    std::vector<std::string> arm_ids;  // column order used as arm indices

    std::size_t num_clusters() const;
};

EmbeddingDataset load_embeddings(const std::string& path);
EmbeddingDataset parse_embeddings(std::istream& in);
void write_embeddings(const EmbeddingDataset& dataset, std::ostream& out);
void write_embeddings(const EmbeddingDataset& dataset, const std::string& path);

/// Serves dataset records in an order reshuffled at every pass through the data.
/// One arm column may be reserved as the JKD reference.
class ReplayEnv final : public Environment {
public:
    explicit ReplayEnv(EmbeddingDataset dataset, std::optional<std::string> reference_arm = std::nullopt);

    std::size_t num_arms() const override { return arm_columns_.size(); }
    std::size_t num_clusters() const override { return clusters_; }
    Prompt sample_prompt(Rng& rng) override;
    Vector generate(std::size_t arm, const Prompt& prompt, Rng& rng) override;
    double fidelity(const Prompt& prompt, std::size_t arm, const Vector& output) const override;
    bool has_reference() const override { return reference_.has_value(); }
    Vector generate_reference(const Prompt& prompt, Rng& rng) override;

    const EmbeddingDataset& dataset() const { return dataset_; }
    const std::vector<std::string>& arm_columns() const { return arm_columns_; }

private:
    EmbeddingDataset dataset_;
    std::vector<std::string> arm_columns_;
    std::optional<std::string> reference_;
    std::size_t clusters_ = 1;
    std::vector<std::size_t> order_;
    std::size_t cursor_ = 0;
};

}  // namespace dak

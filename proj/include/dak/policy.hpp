#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dak/env.hpp"
#include "dak/kernels.hpp"
#include "dak/krr.hpp"
#include "dak/scores.hpp"
#include "dak/types.hpp"

namespace dak {

enum class DiversityPrimitive { neg_ijrke, neg_jkd };

std::string to_string(DiversityPrimitive primitive);
DiversityPrimitive diversity_primitive_from_string(const std::string& name);

struct PolicyConfig {
    double lambda = 1.0;
    DiversityPrimitive diversity = DiversityPrimitive::neg_ijrke;
    double beta_s = 1.5;
    double beta_d = 1.5;
    double ridge = 1.0;
    double panel_rate = 0.2;
    double qp_tolerance = 1e-9;
    int qp_max_iterations = 10000;
    std::uint64_t seed = 0;
    std::size_t refactor_every = KrrState::kDefaultRefactorEvery;
    JointKernelSpec kernels;
    // Reference corpus Q for the neg_jkd primitive.
    std::shared_ptr<const PairedCorpus> reference;
    // When positive, diversity labels use random Fourier features of this dimension.
    std::size_t rff_features = 0;
    std::uint64_t rff_seed = 0;

    /// Throws std::invalid_argument naming the first violated field.
    void validate() const;
};

/// Radii B sqrt(ridge) + eta for fidelity and diversity targets.
struct Betas {
    double beta_s;
    double beta_d;
};
Betas theory_betas(const ConfidenceParams& base, double fidelity_noise, double diversity_noise, double ridge);

struct RoundRecord {
    long round = 0;  // 1-based
    int cluster = 0;
    std::size_t record = 0;  // dataset row for replay environments
    Vector prompt;
    Vector output;
    std::size_t arm = 0;
    std::vector<double> weights;  // sampling distribution used this round
    double y_fid = 0.0;
    double y_div = 0.0;
    std::vector<double> ucb;      // per-arm index (policy-specific)
    int stage = 0;                // Sup-DAK-UCB only
    bool explored = false;        // Sup-DAK-UCB only
    bool panel = false;           // Mixture-DAK-UCB only
};

/// (s + beta_s sigma_s) - lambda (D - beta_d sigma_d), with D the stored penalty.
double dakucb_score(double s_hat, double sigma_s, double d_hat, double sigma_d, const PolicyConfig& config);

/// Lowest index among the maxima.
std::size_t argmax_lowest(std::span<const double> values);

/// Per-arm live archives of (prompt, output) pairs plus immutable prefix snapshots.
class HistoryArchive {
public:
    struct Snapshot {
        int stage = 0;
        long round = 0;
        std::vector<std::size_t> sizes;  // per-arm archive length at freeze time
    };

    explicit HistoryArchive(std::size_t arms);

    void append(std::size_t arm, EmbeddedPair pair);
    std::span<const EmbeddedPair> live(std::size_t arm) const;

    /// Freezes every arm's archive; returns the snapshot id.
    std::size_t freeze(int stage, long round);
    const Snapshot& snapshot(std::size_t id) const { return snapshots_.at(id); }
    std::span<const EmbeddedPair> snapshot_view(std::size_t id, std::size_t arm) const;
    std::size_t snapshot_count() const { return snapshots_.size(); }

    std::size_t arms() const { return live_.size(); }
    std::size_t total() const;

private:
    std::vector<std::vector<EmbeddedPair>> live_;
    std::vector<Snapshot> snapshots_;
};

/// Computes per-sample diversity penalties (I-JRKE or JKD form) against an archive,
/// either with exact kernels or with random-feature approximations of them.
class DiversityLabeler {
public:
    DiversityLabeler(const PolicyConfig& config, std::size_t arms);

    /// Label for an output of `arm` against `history`, which must be a prefix of the
    /// pairs passed to record() for that arm.
    double label(std::size_t arm, const Vector& t, const Vector& x, std::span<const EmbeddedPair> history);

    /// Must be called for every pair appended to the arm's archive (feature cache).
    void record(std::size_t arm, const EmbeddedPair& pair);

private:
    struct Features {
        Vector text;
        Vector data;
    };
    void ensure_maps(const Vector& t, const Vector& x);

    DiversityPrimitive primitive_;
    JointKernelSpec kernels_;
    std::shared_ptr<const PairedCorpus> reference_;
    std::size_t rff_features_;
    std::uint64_t rff_seed_;
    std::optional<RffMap> text_map_;
    std::optional<RffMap> data_map_;
    std::vector<std::vector<Features>> cache_;
};

class Policy {
public:
    virtual ~Policy() = default;
    virtual std::string name() const = 0;
    virtual std::size_t num_arms() const = 0;
    /// Draw order: prompt, policy-internal randomness, generation, then any extra draws.
    virtual RoundRecord step(Environment& env, Rng& rng) = 0;
};

std::vector<RoundRecord> run_policy(Policy& policy, Environment& env, long horizon, Rng& rng);

/// Cumulative regret given per-round, per-arm oracle objective values.
std::vector<double> empirical_regret(std::span<const RoundRecord> records,
                                     const std::vector<std::vector<double>>& true_objective);

}  // namespace dak

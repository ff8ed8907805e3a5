#pragma once

#include <cstdint>
#include <vector>

#include "dak/config.hpp"

namespace dak {

struct EvalRow {
    int trial = 0;
    long round = 0;
    double rke = 0.0;
    double i_jrke = 0.0;
    double jkd = 0.0;  // NaN when the environment has no reference
    double vendi_proxy = 0.0;
    double mean_fid = 0.0;
};

struct RoundRow {
    int trial = 0;
    long round = 0;
    int cluster = 0;
    std::size_t arm = 0;
    std::vector<double> weights;
    double y_fid = 0.0;
    double y_div = 0.0;
    std::vector<double> ucb;
};

struct TrialResult {
    int trial = 0;
    std::uint64_t seed = 0;
    std::vector<RoundRow> rounds;
    std::vector<EvalRow> evals;
    std::vector<std::size_t> arm_counts;                  // [arm]
    std::vector<std::vector<std::size_t>> cluster_counts;  // [cluster][arm]
    std::optional<std::size_t> oracle_arm;
    double wall_seconds = 0.0;

    std::vector<double> selection_ratios() const;
};

struct MetricsLog {
    RunConfig config;
    std::size_t arms = 0;
    std::size_t clusters = 0;
    JointKernelSpec kernels;
    double beta_s = 0.0;
    double beta_d = 0.0;
    std::vector<TrialResult> trials;
};

/// Corpus scores over a growing history with incremental pair sums.
class HistoryScorer {
public:
    HistoryScorer(JointKernelSpec jspec, bool with_reference, std::size_t vendi_cap);

    void add(const Vector& prompt, const Vector& output, double fidelity, const Vector* reference = nullptr);
    EvalRow evaluate() const;
    std::size_t size() const { return corpus_.size(); }
    const PairedCorpus& corpus() const { return corpus_; }

private:
    JointKernelSpec jspec_;
    bool with_reference_;
    std::size_t vendi_cap_;
    PairedCorpus corpus_;
    PairedCorpus reference_;
    double sum_kx2_ = 0.0;
    double sum_joint2_ = 0.0;
    double sum_jkd_ = 0.0;
    double sum_fid_ = 0.0;
};

/// Scores computed from scratch on the last `window` pairs (or all when window is 0).
EvalRow evaluate_window(const PairedCorpus& corpus, const PairedCorpus* reference, std::span<const double> fidelity,
                        std::size_t window, const JointKernelSpec& jspec, std::size_t vendi_cap);

/// One trial with seed config.seed + trial.
TrialResult run_trial(const RunConfig& config, int trial, const PolicyConfig& policy_config,
                      const std::shared_ptr<const EmbeddingDataset>& dataset = nullptr);

/// All trials, run concurrently on `workers` threads (DAK_WORKERS overrides) and
/// merged in trial order.
MetricsLog run_experiment(const RunConfig& config);

/// Worker count after the DAK_WORKERS override.
int effective_workers(const RunConfig& config);

}  // namespace dak

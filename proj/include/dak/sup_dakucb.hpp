#pragma once

#include <vector>

#include "dak/policy.hpp"

namespace dak {

/// Per-round stage trace: the candidate set at every stage visited.
struct SupTrace {
    long round = 0;
    std::vector<std::vector<std::size_t>> candidates;  // candidates[m-1]
    std::vector<double> max_width;                     // per visited stage
    bool explored = false;
    bool capped = false;  // exploited because the last stage ran out
};

/// Phased variant of DAK-UCB with per-stage index sets and stage-frozen archives.
/// Only exploration rounds feed the KRR of the (arm, stage) that explored.
class SupDakUcb final : public Policy {
public:
    SupDakUcb(std::size_t arms, long horizon, PolicyConfig config);

    std::string name() const override { return "sup_dakucb"; }
    std::size_t num_arms() const override { return arms_; }
    RoundRecord step(Environment& env, Rng& rng) override;

    int stages() const { return stages_; }
    long horizon() const { return horizon_; }
    /// Rounds appended to the index set of (arm, stage), stage in 1..M.
    const std::vector<long>& index_set(std::size_t arm, int stage) const;
    const KrrState& state(std::size_t arm, int stage) const;
    const std::vector<SupTrace>& traces() const { return traces_; }
    const HistoryArchive& archive() const { return archive_; }

private:
    std::size_t slot(std::size_t arm, int stage) const;

    std::size_t arms_;
    long horizon_;
    int stages_;
    PolicyConfig config_;
    std::vector<KrrState> states_;           // [arm * M + (m-1)]
    std::vector<std::vector<long>> psi_;     // same layout
    HistoryArchive archive_;
    DiversityLabeler labeler_;
    std::vector<SupTrace> traces_;
    long round_ = 0;
};

/// Number of stages max(1, ceil(log2 T)).
int sup_stage_count(long horizon);

std::vector<RoundRecord> sup_dakucb_run(std::size_t arms, Environment& env, long horizon, const PolicyConfig& config,
                                        Rng& rng, std::vector<SupTrace>* traces = nullptr);

}  // namespace dak

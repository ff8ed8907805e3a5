#pragma once

#include <vector>

#include "dak/policy.hpp"

namespace dak {

/// Diversity-aware kernelized UCB. Each arm keeps one KRR over its prompts with
/// two label columns: fidelity and diversity penalty. Penalty labels are formed
/// against the arm's full live archive before the new pair is appended.
class DakUcb final : public Policy {
public:
    DakUcb(std::size_t arms, PolicyConfig config);

    std::string name() const override { return "dakucb"; }
    std::size_t num_arms() const override { return states_.size(); }
    RoundRecord step(Environment& env, Rng& rng) override;

    /// UCB index of every arm at `prompt`.
    std::vector<double> scores(const Vector& prompt) const;

    /// Labels (prompt, output) for `arm`, updates its KRR and appends to its archive.
    /// Returns the diversity label.
    double observe(std::size_t arm, const Vector& prompt, const Vector& output, double fidelity_label, long round = 0);

    const KrrState& state(std::size_t arm) const { return states_.at(arm); }
    const HistoryArchive& archive() const { return archive_; }
    const PolicyConfig& config() const { return config_; }

private:
    PolicyConfig config_;
    std::vector<KrrState> states_;
    HistoryArchive archive_;
    DiversityLabeler labeler_;
    long round_ = 0;
};

/// Fidelity-only kernelized UCB (the lambda = 0 baseline), kept separate from DakUcb.
class PakUcb final : public Policy {
public:
    PakUcb(std::size_t arms, PolicyConfig config);

    std::string name() const override { return "pakucb"; }
    std::size_t num_arms() const override { return states_.size(); }
    RoundRecord step(Environment& env, Rng& rng) override;
    std::vector<double> scores(const Vector& prompt) const;

private:
    PolicyConfig config_;
    std::vector<KrrState> states_;
    long round_ = 0;
};

class RandomPolicy final : public Policy {
public:
    explicit RandomPolicy(std::size_t arms);
    std::string name() const override { return "random"; }
    std::size_t num_arms() const override { return arms_; }
    RoundRecord step(Environment& env, Rng& rng) override;

private:
    std::size_t arms_;
    long round_ = 0;
};

/// Plays one arm for every prompt.
class FixedArmPolicy final : public Policy {
public:
    FixedArmPolicy(std::size_t arms, std::size_t arm);
    std::string name() const override { return "oracle"; }
    std::size_t num_arms() const override { return arms_; }
    RoundRecord step(Environment& env, Rng& rng) override;

private:
    std::size_t arms_;
    std::size_t arm_;
    long round_ = 0;
};

struct OracleChoice {
    std::size_t arm = 0;
    std::vector<double> objectives;   // mean fidelity - lambda * i_jrke, per arm
    std::vector<double> mean_fidelity;
    std::vector<double> ijrke;
};

/// Scores each arm on a validation prompt set and returns the best single arm.
OracleChoice one_arm_oracle(Environment& env, std::span<const Prompt> validation_prompts,
                            const PolicyConfig& config, Rng& rng);

}  // namespace dak

#pragma once

#include <map>
#include <vector>

#include "dak/policy.hpp"
#include "dak/qp.hpp"

namespace dak {

/// Cross-kernel label for the diversity matrix entry (g, g2):
/// mean over (t', x') in panel_archive[g2] of k_T(t,t')^2 k_X(x_g, x')^2, with x_g
/// the output of arm g at t. 0 on an empty archive. The archive passed in must
/// not contain pairs from the current round.
double pair_label(std::size_t g, std::size_t g2, const Vector& t, const std::map<std::size_t, Vector>& panel_outputs,
                  std::span<const PairedCorpus> panel_archive, const JointKernelSpec& jspec);

/// One KRR per ordered arm pair for the entries M_{gg'}(t).
class DiversityMatrixEstimate {
public:
    DiversityMatrixEstimate(std::size_t arms, const KernelSpec& prompt_kernel, double ridge,
                            std::size_t refactor_every = KrrState::kDefaultRefactorEvery);

    struct Estimate {
        Matrix mean;       // G x G point estimate
        Matrix deviation;  // G x G, nonnegative
    };
    Estimate predict(const Vector& t) const;
    void update(std::size_t g, std::size_t g2, const Vector& t, double label);
    const KrrState& state(std::size_t g, std::size_t g2) const { return states_.at(g * arms_ + g2); }
    std::size_t arms() const { return arms_; }

private:
    std::size_t arms_;
    std::vector<KrrState> states_;
};

/// Mixture variant: solves a simplex QP on fidelity UCBs and a PSD-projected
/// lower confidence estimate of the diversity matrix, then samples an arm from
/// the resulting mixture. With probability panel_rate every arm generates at
/// the prompt. Draw order per round: prompt, multinomial uniform, chosen-arm
/// generation, panel coin, remaining panel generations in arm order.
class MixtureDakUcb final : public Policy {
public:
    MixtureDakUcb(std::size_t arms, PolicyConfig config);

    std::string name() const override { return "mixture_dakucb"; }
    std::size_t num_arms() const override { return fidelity_.size(); }
    RoundRecord step(Environment& env, Rng& rng) override;

    /// Mixture weights the policy would use at `prompt` (no state change).
    QpResult mixture(const Vector& prompt, std::vector<double>* s_ucb = nullptr) const;

    const DiversityMatrixEstimate& matrix() const { return matrix_; }
    const std::vector<PairedCorpus>& panel_archive() const { return panel_archive_; }
    const HistoryArchive& archive() const { return archive_; }
    std::size_t panel_rounds() const { return panel_rounds_; }

private:
    PolicyConfig config_;
    std::vector<KrrState> fidelity_;
    DiversityMatrixEstimate matrix_;
    std::vector<PairedCorpus> panel_archive_;
    HistoryArchive archive_;
    std::size_t panel_rounds_ = 0;
    long round_ = 0;
};

/// Finite instance for checking the mixture proxy objectives: every arm emits a
/// fixed output per prompt, prompts are uniform over `prompts`.
struct MixtureInstance {
    std::vector<Vector> prompts;                // n
    std::vector<std::vector<Vector>> outputs;   // [arm][prompt]
    std::vector<Vector> reference;              // [prompt], JKD reference outputs
    std::vector<Vector> weights;                // [prompt], alpha(t) on the simplex
};

double mixture_ijrke_exact(const MixtureInstance& instance, const JointKernelSpec& jspec);
double mixture_ijrke_proxy(const MixtureInstance& instance, const JointKernelSpec& jspec);
double mixture_jkd_exact(const MixtureInstance& instance, const JointKernelSpec& jspec);
double mixture_jkd_proxy(const MixtureInstance& instance, const JointKernelSpec& jspec);

/// max_{t,t'} |k_T(t,t')| * |alpha(t) - alpha(t')|_1; alpha lies in A_eps iff this is <= eps.
double kernel_lipschitz_level(const MixtureInstance& instance, const KernelSpec& prompt_kernel);

}  // namespace dak

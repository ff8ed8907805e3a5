#pragma once

#include <span>
#include <string>
#include <vector>

#include "dak/kernels.hpp"
#include "dak/types.hpp"

namespace dak {

enum class Estimator { v_statistic, u_statistic };

/// Ordered list of (prompt, output) pairs.
struct PairedCorpus {
    std::vector<EmbeddedPair> pairs;

    std::size_t size() const { return pairs.size(); }
    bool empty() const { return pairs.empty(); }
    void push_back(EmbeddedPair pair) { pairs.push_back(std::move(pair)); }
    void add(Vector prompt, Vector output) { pairs.push_back({std::move(prompt), std::move(output), {}, {}}); }

    std::vector<Vector> prompts() const;
    std::vector<Vector> outputs() const;
    std::span<const EmbeddedPair> view() const { return pairs; }
};

struct ScoreReport {
    std::string name;
    double value = 0.0;
    std::size_t n = 0;
    Estimator estimator = Estimator::v_statistic;
};

/// Squared kernel distance (MMD^2) between two samples.
double kd_squared(std::span<const Vector> p, std::span<const Vector> q, const KernelSpec& spec,
                  Estimator estimator = Estimator::v_statistic);

/// ||K/n||_F^{-2}.
double rke(std::span<const Vector> samples, const KernelSpec& spec);
double rke_from_gram(const Matrix& gram);

/// Paired-design joint kernel distance; both corpora must share the prompt list.
double joint_kd(const PairedCorpus& p, const PairedCorpus& q, const JointKernelSpec& jspec);

/// (1/n^2) sum_ij k_T(t_i,t_j)^2 k_X(x_i,x_j)^2. The squared flag of `jspec` is ignored.
double i_jrke(const PairedCorpus& corpus, const JointKernelSpec& jspec);
double jrke(const PairedCorpus& corpus, const JointKernelSpec& jspec);

/// Per-sample diversity penalty of (t, x) against an archive; 0 for an empty archive.
double label_ijrke(const Vector& t, const Vector& x, std::span<const EmbeddedPair> history,
                   const JointKernelSpec& jspec);

/// Per-sample JKD label:
///   mean_{(t',x')∈same} k_T(t,t') k_X(x,x') - mean_{(t',y')∈ref} k_T(t,t') k_X(x,y').
/// An empty same-model archive contributes 0 for its term.
double label_jkd(const Vector& t, const Vector& x, std::span<const EmbeddedPair> same_model_history,
                 std::span<const EmbeddedPair> reference_history, const JointKernelSpec& jspec);

/// exp(-sum l ln l) over the eigenvalues of K/n, clipped at 0.
double vendi(std::span<const Vector> samples, const KernelSpec& spec);
double vendi_from_gram(const Matrix& gram);

/// Product-kernel Gram matrix of a paired corpus (squared per `jspec.squared`).
Matrix joint_gram(const PairedCorpus& corpus, const JointKernelSpec& jspec);

/// Vendi on the joint kernel. Stands in for the conditional Vendi score and is
/// reported as `vendi_joint_proxy`.
double vendi_joint_proxy(const PairedCorpus& corpus, const JointKernelSpec& jspec);

}  // namespace dak

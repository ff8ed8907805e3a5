#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

#include "dak/kernels.hpp"
#include "dak/types.hpp"

namespace dak {

struct KrrPrediction {
    double mean = 0.0;
    double deviation = 0.0;
};

/// Incremental kernel ridge regression over prompts.
///
/// Keeps the lower Cholesky factor L of (K + ridge I) and the whitened labels
/// L^{-1} y. Each update appends one row in O(n^2); every `refactor_every`
/// updates the factor is recomputed from scratch to cap drift.
///
/// One state may carry several label columns (targets) that share the same
/// prompt sequence and therefore the same factor.
class KrrState {
public:
    static constexpr std::size_t kDefaultRefactorEvery = 512;

    KrrState(KernelSpec spec, double ridge, std::size_t targets = 1,
             std::size_t refactor_every = kDefaultRefactorEvery);

    void update(const Vector& prompt, double label);
    void update(const Vector& prompt, std::span<const double> labels);

    KrrPrediction predict(const Vector& prompt, std::size_t target = 0) const;

    /// Means for every target plus the shared deviation.
    struct MultiPrediction {
        std::vector<double> means;
        double deviation = 0.0;
    };
    MultiPrediction predict_all(const Vector& prompt) const;

    /// 1/2 log det(I + K/ridge).
    double info_gain() const;

    std::size_t size() const { return prompts_.size(); }
    bool empty() const { return prompts_.empty(); }
    std::size_t targets() const { return targets_; }
    double ridge() const { return ridge_; }
    const KernelSpec& spec() const { return spec_; }
    std::size_t refactor_every() const { return refactor_every_; }
    std::size_t refactorizations() const { return refactorizations_; }
    const std::vector<Vector>& prompts() const { return prompts_; }
    Vector labels(std::size_t target = 0) const;

    /// Lower Cholesky factor of K + ridge I (n x n copy).
    Matrix factor() const;

    /// Recompute the factor from the stored prompts.
    void refactorize();

    /// Binary checkpoint: spec, ridge, prompts and labels. The factor is rebuilt on load.
    void save(std::ostream& out) const;
    static KrrState load(std::istream& in);

private:
    Vector kernel_column(const Vector& prompt) const;
    void reserve_capacity(Eigen::Index n);

    KernelSpec spec_;
    double ridge_;
    std::size_t targets_;
    std::size_t refactor_every_;
    std::size_t since_refactor_ = 0;
    std::size_t refactorizations_ = 0;

    std::vector<Vector> prompts_;
    Matrix labels_;      // capacity x targets
    Matrix factor_;      // capacity x capacity, lower triangle of the leading n x n block used
    Matrix whitened_;    // capacity x targets, L^{-1} y
};

struct ConfidenceParams {
    double rkhs_bound = 1.0;
    double noise_scale = 0.5;
    double failure_prob = 0.1;
    int arms = 1;
    int stages = 1;
    long horizon = 1;
};

/// B sqrt(ridge) + noise_scale sqrt(2 ln(2 G M T / delta)).
double confidence_radius(const ConfidenceParams& params, double ridge);

}  // namespace dak

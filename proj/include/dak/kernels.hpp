#pragma once

#include <cstdint>
#include <span>
#include <string>

#include "dak/types.hpp"

namespace dak {

enum class KernelFamily { gaussian, polynomial, cosine };

std::string to_string(KernelFamily family);
KernelFamily kernel_family_from_string(const std::string& name);

/// Kernel family plus parameters.
///
/// gaussian:   exp(-|x-y|^2 / (2 sigma^2))
/// polynomial: (gamma <x,y> + 1)^degree
/// cosine:     <x,y>
///
/// With `normalize` set, polynomial and cosine are divided by
/// sqrt(k(x,x) k(y,y)) so that k(x,x) = 1. Gaussian is always normalized.
struct KernelSpec {
    KernelFamily family = KernelFamily::gaussian;
    double sigma = 1.0;
    double gamma = 1.0;
    int degree = 2;
    bool normalize = true;

    static KernelSpec gaussian(double sigma);
    static KernelSpec polynomial(double gamma, int degree, bool normalize = true);
    static KernelSpec cosine(bool normalize = true);

    bool is_normalized() const { return family == KernelFamily::gaussian || normalize; }

    /// Throws std::invalid_argument on a non-positive sigma/gamma/degree.
    void validate() const;
};

double eval_kernel(const KernelSpec& spec, const Vector& x, const Vector& y);

/// k(x,y)^2. Gaussian uses sigma -> sigma/sqrt(2); other families square literally.
double eval_kernel_squared(const KernelSpec& spec, const Vector& x, const Vector& y);

/// Gaussian with bandwidth sigma/sqrt(2), whose value equals the square of `spec`.
KernelSpec squared_gaussian(const KernelSpec& spec);

/// Product kernel over (prompt, output) pairs.
struct JointKernelSpec {
    KernelSpec text_kernel;
    KernelSpec data_kernel;
    bool squared = false;

    JointKernelSpec with_squared(bool value) const {
        JointKernelSpec copy = *this;
        copy.squared = value;
        return copy;
    }
};

double eval_joint(const JointKernelSpec& jspec, const Vector& t, const Vector& x, const Vector& t2,
                  const Vector& x2);
double eval_joint(const JointKernelSpec& jspec, const EmbeddedPair& a, const EmbeddedPair& b);

Matrix gram_matrix(const KernelSpec& spec, std::span<const Vector> points);
Matrix cross_gram(const KernelSpec& spec, std::span<const Vector> rows, std::span<const Vector> cols);

/// Median of pairwise Euclidean distances; 1.0 when every pair coincides.
double median_bandwidth(std::span<const Vector> points);

/// Random Fourier feature map for a gaussian kernel:
/// z(x) = sqrt(2/d) [cos(w_i . x + b_i)], w_i ~ N(0, I/sigma^2), b_i ~ U[0, 2pi).
class RffMap {
public:
    RffMap(const KernelSpec& source, Eigen::Index input_dim, Eigen::Index feature_dim,
           std::uint64_t seed);

    Vector features(const Vector& x) const;
    double approx_kernel(const Vector& x, const Vector& y) const {
        return features(x).dot(features(y));
    }

    Eigen::Index feature_dim() const { return frequencies_.rows(); }
    Eigen::Index input_dim() const { return frequencies_.cols(); }
    const Matrix& frequencies() const { return frequencies_; }
    const Vector& phases() const { return phases_; }
    const KernelSpec& source() const { return source_; }
    std::uint64_t seed() const { return seed_; }

private:
    KernelSpec source_;
    Matrix frequencies_;
    Vector phases_;
    std::uint64_t seed_;
};

}  // namespace dak

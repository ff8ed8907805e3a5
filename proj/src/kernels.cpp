#include "dak/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace dak {

namespace {

void check_pair(const Vector& x, const Vector& y) {
    if (x.size() != y.size()) {
        throw std::invalid_argument("kernel: dimension mismatch (" + std::to_string(x.size()) +
                                    " vs " + std::to_string(y.size()) + ")");
    }
    if (!x.allFinite() || !y.allFinite()) {
        throw std::invalid_argument("kernel: non-finite input");
    }
}

double raw_polynomial(const KernelSpec& spec, const Vector& x, const Vector& y) {
    return std::pow(spec.gamma * x.dot(y) + 1.0, spec.degree);
}

double unchecked_eval(const KernelSpec& spec, const Vector& x, const Vector& y) {
    switch (spec.family) {
        case KernelFamily::gaussian:
            return std::exp(-(x - y).squaredNorm() / (2.0 * spec.sigma * spec.sigma));
        case KernelFamily::polynomial: {
            const double value = raw_polynomial(spec, x, y);
            if (!spec.normalize) return value;
            const double scale = std::sqrt(raw_polynomial(spec, x, x) * raw_polynomial(spec, y, y));
            if (!(scale > 0.0)) throw std::invalid_argument("kernel: zero self-similarity");
            return value / scale;
        }
        case KernelFamily::cosine: {
            const double value = x.dot(y);
            if (!spec.normalize) return value;
            const double scale = x.norm() * y.norm();
            if (!(scale > 0.0)) throw std::invalid_argument("kernel: cosine of a zero vector");
            return value / scale;
        }
    }
    throw std::invalid_argument("kernel: unknown family");
}

}  // namespace

std::string to_string(KernelFamily family) {
    switch (family) {
        case KernelFamily::gaussian: return "gaussian";
        case KernelFamily::polynomial: return "polynomial";
        case KernelFamily::cosine: return "cosine";
    }
    return "unknown";
}

KernelFamily kernel_family_from_string(const std::string& name) {
    if (name == "gaussian" || name == "rbf") return KernelFamily::gaussian;
    if (name == "polynomial") return KernelFamily::polynomial;
    if (name == "cosine") return KernelFamily::cosine;
    throw std::invalid_argument("unknown kernel family '" + name + "'");
}

KernelSpec KernelSpec::gaussian(double sigma) {
    KernelSpec spec;
    spec.family = KernelFamily::gaussian;
    spec.sigma = sigma;
    return spec;
}

KernelSpec KernelSpec::polynomial(double gamma, int degree, bool normalize) {
    KernelSpec spec;
    spec.family = KernelFamily::polynomial;
    spec.gamma = gamma;
    spec.degree = degree;
    spec.normalize = normalize;
    return spec;
}

KernelSpec KernelSpec::cosine(bool normalize) {
    KernelSpec spec;
    spec.family = KernelFamily::cosine;
    spec.normalize = normalize;
    return spec;
}

void KernelSpec::validate() const {
    switch (family) {
        case KernelFamily::gaussian:
            if (!(sigma > 0.0) || !std::isfinite(sigma))
                throw std::invalid_argument("gaussian kernel: sigma must be positive");
            break;
        case KernelFamily::polynomial:
            if (!(gamma > 0.0) || !std::isfinite(gamma))
                throw std::invalid_argument("polynomial kernel: gamma must be positive");
            if (degree < 1) throw std::invalid_argument("polynomial kernel: degree must be >= 1");
            break;
        case KernelFamily::cosine:
            break;
    }
}

double eval_kernel(const KernelSpec& spec, const Vector& x, const Vector& y) {
    check_pair(x, y);
    return unchecked_eval(spec, x, y);
}

KernelSpec squared_gaussian(const KernelSpec& spec) {
    if (spec.family != KernelFamily::gaussian)
        throw std::invalid_argument("squared_gaussian: gaussian kernel required");
    return KernelSpec::gaussian(spec.sigma / std::numbers::sqrt2);
}

double eval_kernel_squared(const KernelSpec& spec, const Vector& x, const Vector& y) {
    check_pair(x, y);
    if (spec.family == KernelFamily::gaussian) {
        return unchecked_eval(squared_gaussian(spec), x, y);
    }
    const double value = unchecked_eval(spec, x, y);
    return value * value;
}

double eval_joint(const JointKernelSpec& jspec, const Vector& t, const Vector& x, const Vector& t2,
                  const Vector& x2) {
    if (jspec.squared) {
        return eval_kernel_squared(jspec.text_kernel, t, t2) *
               eval_kernel_squared(jspec.data_kernel, x, x2);
    }
    return eval_kernel(jspec.text_kernel, t, t2) * eval_kernel(jspec.data_kernel, x, x2);
}

double eval_joint(const JointKernelSpec& jspec, const EmbeddedPair& a, const EmbeddedPair& b) {
    return eval_joint(jspec, a.prompt_vec, a.output_vec, b.prompt_vec, b.output_vec);
}

Matrix gram_matrix(const KernelSpec& spec, std::span<const Vector> points) {
    if (points.empty()) throw std::invalid_argument("gram_matrix: empty point list");
    const auto n = static_cast<Eigen::Index>(points.size());
    Matrix gram(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        gram(i, i) = eval_kernel(spec, points[i], points[i]);
        for (Eigen::Index j = 0; j < i; ++j) {
            const double value = eval_kernel(spec, points[i], points[j]);
            gram(i, j) = value;
            gram(j, i) = value;
        }
    }
    return gram;
}

Matrix cross_gram(const KernelSpec& spec, std::span<const Vector> rows, std::span<const Vector> cols) {
    Matrix out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < cols.size(); ++j)
            out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                eval_kernel(spec, rows[i], cols[j]);
    return out;
}

double median_bandwidth(std::span<const Vector> points) {
    std::vector<double> distances;
    distances.reserve(points.size() * (points.size() - (points.empty() ? 0 : 1)) / 2);
    for (std::size_t i = 0; i < points.size(); ++i)
        for (std::size_t j = 0; j < i; ++j) distances.push_back((points[i] - points[j]).norm());
    if (distances.empty()) return 1.0;
    auto mid = distances.begin() + static_cast<std::ptrdiff_t>(distances.size() / 2);
    std::nth_element(distances.begin(), mid, distances.end());
    const double median = *mid;
    return median > 0.0 ? median : 1.0;
}

RffMap::RffMap(const KernelSpec& source, Eigen::Index input_dim, Eigen::Index feature_dim,
               std::uint64_t seed)
    : source_(source), seed_(seed) {
    if (source.family != KernelFamily::gaussian)
        throw std::invalid_argument("RffMap: only gaussian kernels have a random feature map here");
    source.validate();
    if (input_dim < 1 || feature_dim < 1)
        throw std::invalid_argument("RffMap: dimensions must be positive");

    Rng rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0 / source.sigma);
    std::uniform_real_distribution<double> uniform(0.0, 2.0 * std::numbers::pi);
    frequencies_.resize(feature_dim, input_dim);
    for (Eigen::Index i = 0; i < feature_dim; ++i)
        for (Eigen::Index j = 0; j < input_dim; ++j) frequencies_(i, j) = normal(rng);
    phases_.resize(feature_dim);
    for (Eigen::Index i = 0; i < feature_dim; ++i) phases_(i) = uniform(rng);
}

Vector RffMap::features(const Vector& x) const {
    if (x.size() != frequencies_.cols())
        throw std::invalid_argument("RffMap::features: dimension mismatch");
    const double scale = std::sqrt(2.0 / static_cast<double>(frequencies_.rows()));
    Vector projected = frequencies_ * x + phases_;
    return scale * projected.array().cos().matrix();
}

}  // namespace dak

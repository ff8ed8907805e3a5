#include "dak/krr.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace dak {

KrrState::KrrState(KernelSpec spec, double ridge, std::size_t targets, std::size_t refactor_every)
    : spec_(spec), ridge_(ridge), targets_(targets), refactor_every_(refactor_every) {
    spec_.validate();
    if (!(ridge > 0.0) || !std::isfinite(ridge)) throw std::invalid_argument("KrrState: ridge must be positive");
    if (targets == 0) throw std::invalid_argument("KrrState: at least one target required");
    if (refactor_every == 0) throw std::invalid_argument("KrrState: refactor_every must be positive");
    reserve_capacity(16);
}

void KrrState::reserve_capacity(Eigen::Index n) {
    const Eigen::Index current = factor_.rows();
    if (n <= current) return;
    Eigen::Index capacity = std::max<Eigen::Index>(current, 16);
    while (capacity < n) capacity *= 2;
    const auto used = static_cast<Eigen::Index>(prompts_.size());
    const auto t = static_cast<Eigen::Index>(targets_);

    Matrix factor = Matrix::Zero(capacity, capacity);
    Matrix labels = Matrix::Zero(capacity, t);
    Matrix whitened = Matrix::Zero(capacity, t);
    if (used > 0) {
        factor.topLeftCorner(used, used) = factor_.topLeftCorner(used, used);
        labels.topRows(used) = labels_.topRows(used);
        whitened.topRows(used) = whitened_.topRows(used);
    }
    factor_ = std::move(factor);
    labels_ = std::move(labels);
    whitened_ = std::move(whitened);
}

Vector KrrState::kernel_column(const Vector& prompt) const {
    Vector column(static_cast<Eigen::Index>(prompts_.size()));
    for (std::size_t i = 0; i < prompts_.size(); ++i)
        column(static_cast<Eigen::Index>(i)) = eval_kernel(spec_, prompts_[i], prompt);
    return column;
}

void KrrState::update(const Vector& prompt, double label) {
    if (targets_ != 1) throw std::invalid_argument("KrrState::update: state carries several targets");
    update(prompt, std::span<const double>(&label, 1));
}

void KrrState::update(const Vector& prompt, std::span<const double> labels) {
    if (labels.size() != targets_) throw std::invalid_argument("KrrState::update: wrong label count");
    for (double y : labels)
        if (!std::isfinite(y)) throw std::invalid_argument("KrrState::update: non-finite label");
    if (!prompt.allFinite()) throw std::invalid_argument("KrrState::update: non-finite prompt");
    if (!prompts_.empty() && prompt.size() != prompts_.front().size())
        throw std::invalid_argument("KrrState::update: prompt dimension mismatch");

    const auto n = static_cast<Eigen::Index>(prompts_.size());
    reserve_capacity(n + 1);

    const Vector column = kernel_column(prompt);
    const double self = eval_kernel(spec_, prompt, prompt) + ridge_;
    Vector row = column;
    if (n > 0) factor_.topLeftCorner(n, n).triangularView<Eigen::Lower>().solveInPlace(row);
    const double pivot_sq = self - row.squaredNorm();
    // The ridge keeps the Schur complement >= ridge in exact arithmetic.
    const double pivot = std::sqrt(std::max(pivot_sq, ridge_ * 1e-12));

    factor_.block(n, 0, 1, n) = row.transpose();
    factor_(n, n) = pivot;
    for (std::size_t k = 0; k < targets_; ++k) {
        const auto kk = static_cast<Eigen::Index>(k);
        labels_(n, kk) = labels[k];
        const double partial = n > 0 ? row.dot(whitened_.col(kk).head(n)) : 0.0;
        whitened_(n, kk) = (labels[k] - partial) / pivot;
    }
    prompts_.push_back(prompt);

    if (++since_refactor_ >= refactor_every_) refactorize();
}

void KrrState::refactorize() {
    since_refactor_ = 0;
    const auto n = static_cast<Eigen::Index>(prompts_.size());
    if (n == 0) return;
    Matrix system = gram_matrix(spec_, prompts_);
    system.diagonal().array() += ridge_;
    Eigen::LLT<Matrix> llt(system);
    if (llt.info() != Eigen::Success) throw std::runtime_error("KrrState: refactorization failed");
    factor_.topLeftCorner(n, n) = llt.matrixL();
    const auto t = static_cast<Eigen::Index>(targets_);
    Matrix whitened = labels_.topRows(n);
    factor_.topLeftCorner(n, n).triangularView<Eigen::Lower>().solveInPlace(whitened);
    whitened_.topLeftCorner(n, t) = whitened;
    ++refactorizations_;
}

KrrPrediction KrrState::predict(const Vector& prompt, std::size_t target) const {
    if (target >= targets_) throw std::invalid_argument("KrrState::predict: target out of range");
    const double self = eval_kernel(spec_, prompt, prompt);
    const auto n = static_cast<Eigen::Index>(prompts_.size());
    if (n == 0) return {0.0, std::sqrt(self / ridge_)};
    Vector v = kernel_column(prompt);
    factor_.topLeftCorner(n, n).triangularView<Eigen::Lower>().solveInPlace(v);
    const double mean = v.dot(whitened_.col(static_cast<Eigen::Index>(target)).head(n));
    const double variance = std::max(self - v.squaredNorm(), 0.0) / ridge_;
    return {mean, std::sqrt(variance)};
}

KrrState::MultiPrediction KrrState::predict_all(const Vector& prompt) const {
    MultiPrediction out;
    out.means.assign(targets_, 0.0);
    const double self = eval_kernel(spec_, prompt, prompt);
    const auto n = static_cast<Eigen::Index>(prompts_.size());
    if (n == 0) {
        out.deviation = std::sqrt(self / ridge_);
        return out;
    }
    Vector v = kernel_column(prompt);
    factor_.topLeftCorner(n, n).triangularView<Eigen::Lower>().solveInPlace(v);
    for (std::size_t k = 0; k < targets_; ++k)
        out.means[k] = v.dot(whitened_.col(static_cast<Eigen::Index>(k)).head(n));
    out.deviation = std::sqrt(std::max(self - v.squaredNorm(), 0.0) / ridge_);
    return out;
}

double KrrState::info_gain() const {
    const auto n = static_cast<Eigen::Index>(prompts_.size());
    double total = 0.0;
    // det(K + aI) = prod L_ii^2, det(I + K/a) = det(K + aI) / a^n.
    for (Eigen::Index i = 0; i < n; ++i) total += std::log(factor_(i, i));
    return total - 0.5 * static_cast<double>(n) * std::log(ridge_);
}

Vector KrrState::labels(std::size_t target) const {
    if (target >= targets_) throw std::invalid_argument("KrrState::labels: target out of range");
    const auto n = static_cast<Eigen::Index>(prompts_.size());
    return labels_.col(static_cast<Eigen::Index>(target)).head(n);
}

Matrix KrrState::factor() const {
    const auto n = static_cast<Eigen::Index>(prompts_.size());
    return factor_.topLeftCorner(n, n).triangularView<Eigen::Lower>();
}

namespace {

constexpr std::array<char, 8> kMagic = {'D', 'A', 'K', 'K', 'R', 'R', '0', '1'};

template <typename T>
void write_pod(std::ostream& out, const T& value) {
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in) {
    T value{};
    in.read(reinterpret_cast<char*>(&value), sizeof(T));
    if (!in) throw std::runtime_error("KrrState::load: truncated checkpoint");
    return value;
}

}  // namespace

void KrrState::save(std::ostream& out) const {
    out.write(kMagic.data(), kMagic.size());
    write_pod(out, static_cast<std::int32_t>(spec_.family));
    write_pod(out, spec_.sigma);
    write_pod(out, spec_.gamma);
    write_pod(out, static_cast<std::int32_t>(spec_.degree));
    write_pod(out, static_cast<std::uint8_t>(spec_.normalize ? 1 : 0));
    write_pod(out, ridge_);
    write_pod(out, static_cast<std::uint64_t>(targets_));
    write_pod(out, static_cast<std::uint64_t>(refactor_every_));
    write_pod(out, static_cast<std::uint64_t>(prompts_.size()));
    const std::uint64_t dim = prompts_.empty() ? 0 : static_cast<std::uint64_t>(prompts_.front().size());
    write_pod(out, dim);
    for (const auto& p : prompts_)
        for (Eigen::Index j = 0; j < p.size(); ++j) write_pod(out, p(j));
    const auto n = static_cast<Eigen::Index>(prompts_.size());
    for (std::size_t k = 0; k < targets_; ++k)
        for (Eigen::Index i = 0; i < n; ++i) write_pod(out, labels_(i, static_cast<Eigen::Index>(k)));
    if (!out) throw std::runtime_error("KrrState::save: write failed");
}

KrrState KrrState::load(std::istream& in) {
    std::array<char, 8> magic{};
    in.read(magic.data(), magic.size());
    if (!in || magic != kMagic) throw std::runtime_error("KrrState::load: not a KRR checkpoint");
    KernelSpec spec;
    spec.family = static_cast<KernelFamily>(read_pod<std::int32_t>(in));
    spec.sigma = read_pod<double>(in);
    spec.gamma = read_pod<double>(in);
    spec.degree = read_pod<std::int32_t>(in);
    spec.normalize = read_pod<std::uint8_t>(in) != 0;
    const auto ridge = read_pod<double>(in);
    const auto targets = read_pod<std::uint64_t>(in);
    const auto refactor_every = read_pod<std::uint64_t>(in);
    const auto n = read_pod<std::uint64_t>(in);
    const auto dim = read_pod<std::uint64_t>(in);

    KrrState state(spec, ridge, targets, refactor_every);
    state.reserve_capacity(static_cast<Eigen::Index>(n));
    state.prompts_.reserve(n);
    for (std::uint64_t i = 0; i < n; ++i) {
        Vector p(static_cast<Eigen::Index>(dim));
        for (std::uint64_t j = 0; j < dim; ++j) p(static_cast<Eigen::Index>(j)) = read_pod<double>(in);
        state.prompts_.push_back(std::move(p));
    }
    for (std::uint64_t k = 0; k < targets; ++k)
        for (std::uint64_t i = 0; i < n; ++i)
            state.labels_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = read_pod<double>(in);
    state.refactorize();
    state.refactorizations_ = 0;
    return state;
}

double confidence_radius(const ConfidenceParams& params, double ridge) {
    if (!(params.failure_prob > 0.0 && params.failure_prob < 1.0))
        throw std::invalid_argument("confidence_radius: failure probability must lie in (0,1)");
    if (params.arms < 1 || params.stages < 1 || params.horizon < 1)
        throw std::invalid_argument("confidence_radius: arms, stages and horizon must be positive");
    if (params.rkhs_bound < 0.0 || params.noise_scale < 0.0 || !(ridge > 0.0))
        throw std::invalid_argument("confidence_radius: negative bound, noise, or ridge");
    const double count = 2.0 * params.arms * params.stages * static_cast<double>(params.horizon);
    return params.rkhs_bound * std::sqrt(ridge) +
           params.noise_scale * std::sqrt(2.0 * std::log(count / params.failure_prob));
}

}  // namespace dak

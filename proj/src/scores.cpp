#include "dak/scores.hpp"

#include <cmath>
#include <stdexcept>

namespace dak {

namespace {

double mean_gram(const KernelSpec& spec, std::span<const Vector> a, std::span<const Vector> b,
                 bool skip_diagonal) {
    double total = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < b.size(); ++j) {
            if (skip_diagonal && i == j) continue;
            total += eval_kernel(spec, a[i], b[j]);
        }
    const double n = static_cast<double>(a.size());
    const double m = static_cast<double>(b.size());
    return total / (skip_diagonal ? n * (n - 1.0) : n * m);
}

void require_same_prompts(const PairedCorpus& p, const PairedCorpus& q) {
    if (p.size() != q.size())
        throw std::invalid_argument("joint_kd: corpora must be paired (different sizes)");
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p.pairs[i].prompt_vec.size() != q.pairs[i].prompt_vec.size() ||
            (p.pairs[i].prompt_vec - q.pairs[i].prompt_vec).norm() > 0.0)
            throw std::invalid_argument("joint_kd: prompt lists differ at index " + std::to_string(i));
    }
}

}  // namespace

std::vector<Vector> PairedCorpus::prompts() const {
    std::vector<Vector> out;
    out.reserve(pairs.size());
    for (const auto& pair : pairs) out.push_back(pair.prompt_vec);
    return out;
}

std::vector<Vector> PairedCorpus::outputs() const {
    std::vector<Vector> out;
    out.reserve(pairs.size());
    for (const auto& pair : pairs) out.push_back(pair.output_vec);
    return out;
}

double kd_squared(std::span<const Vector> p, std::span<const Vector> q, const KernelSpec& spec,
                  Estimator estimator) {
    if (p.size() < 2 || q.size() < 2)
        throw std::invalid_argument("kd_squared: each sample needs at least 2 points");
    const bool unbiased = estimator == Estimator::u_statistic;
    const double value = mean_gram(spec, p, p, unbiased) + mean_gram(spec, q, q, unbiased) -
                         2.0 * mean_gram(spec, p, q, false);
    // The V-statistic is a squared RKHS norm; only rounding can push it below 0.
    return unbiased ? value : std::max(value, 0.0);
}

double rke_from_gram(const Matrix& gram) {
    if (gram.size() == 0) throw std::invalid_argument("rke: empty sample");
    const double n = static_cast<double>(gram.rows());
    return (n * n) / gram.squaredNorm();
}

double rke(std::span<const Vector> samples, const KernelSpec& spec) {
    if (samples.empty()) throw std::invalid_argument("rke: empty sample");
    return rke_from_gram(gram_matrix(spec, samples));
}

double joint_kd(const PairedCorpus& p, const PairedCorpus& q, const JointKernelSpec& jspec) {
    if (jspec.squared) throw std::invalid_argument("joint_kd: squared joint kernel not allowed");
    if (p.empty()) throw std::invalid_argument("joint_kd: empty corpus");
    require_same_prompts(p, q);
    const auto& kx = jspec.data_kernel;
    const std::size_t n = p.size();
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const auto& xi = p.pairs[i].output_vec;
        const auto& yi = q.pairs[i].output_vec;
        for (std::size_t j = 0; j < n; ++j) {
            const auto& xj = p.pairs[j].output_vec;
            const auto& yj = q.pairs[j].output_vec;
            const double kt = eval_kernel(jspec.text_kernel, p.pairs[i].prompt_vec, p.pairs[j].prompt_vec);
            total += kt * (eval_kernel(kx, xi, xj) + eval_kernel(kx, yi, yj) - eval_kernel(kx, xi, yj) -
                           eval_kernel(kx, xj, yi));
        }
    }
    return total / static_cast<double>(n * n);
}

double i_jrke(const PairedCorpus& corpus, const JointKernelSpec& jspec) {
    if (corpus.empty()) throw std::invalid_argument("i_jrke: empty corpus");
    const auto squared = jspec.with_squared(true);
    const std::size_t n = corpus.size();
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        total += eval_joint(squared, corpus.pairs[i], corpus.pairs[i]);
        for (std::size_t j = 0; j < i; ++j) total += 2.0 * eval_joint(squared, corpus.pairs[i], corpus.pairs[j]);
    }
    return total / static_cast<double>(n * n);
}

double jrke(const PairedCorpus& corpus, const JointKernelSpec& jspec) {
    return 1.0 / i_jrke(corpus, jspec);
}

double label_ijrke(const Vector& t, const Vector& x, std::span<const EmbeddedPair> history,
                   const JointKernelSpec& jspec) {
    if (history.empty()) return 0.0;
    const auto squared = jspec.with_squared(true);
    double total = 0.0;
    for (const auto& past : history) total += eval_joint(squared, t, x, past.prompt_vec, past.output_vec);
    return total / static_cast<double>(history.size());
}

double label_jkd(const Vector& t, const Vector& x, std::span<const EmbeddedPair> same_model_history,
                 std::span<const EmbeddedPair> reference_history, const JointKernelSpec& jspec) {
    if (reference_history.empty()) throw std::invalid_argument("label_jkd: empty reference corpus");
    const auto plain = jspec.with_squared(false);
    double same = 0.0;
    for (const auto& past : same_model_history) same += eval_joint(plain, t, x, past.prompt_vec, past.output_vec);
    if (!same_model_history.empty()) same /= static_cast<double>(same_model_history.size());
    double reference = 0.0;
    for (const auto& ref : reference_history) reference += eval_joint(plain, t, x, ref.prompt_vec, ref.output_vec);
    reference /= static_cast<double>(reference_history.size());
    return same - reference;
}

double vendi_from_gram(const Matrix& gram) {
    if (gram.size() == 0) throw std::invalid_argument("vendi: empty sample");
    const double n = static_cast<double>(gram.rows());
    Eigen::SelfAdjointEigenSolver<Matrix> solver(gram / n, Eigen::EigenvaluesOnly);
    if (solver.info() != Eigen::Success) throw std::runtime_error("vendi: eigendecomposition failed");
    double entropy = 0.0;
    for (Eigen::Index i = 0; i < solver.eigenvalues().size(); ++i) {
        const double l = std::max(solver.eigenvalues()(i), 0.0);
        if (l > 0.0) entropy -= l * std::log(l);
    }
    return std::exp(entropy);
}

double vendi(std::span<const Vector> samples, const KernelSpec& spec) {
    if (samples.empty()) throw std::invalid_argument("vendi: empty sample");
    return vendi_from_gram(gram_matrix(spec, samples));
}

Matrix joint_gram(const PairedCorpus& corpus, const JointKernelSpec& jspec) {
    if (corpus.empty()) throw std::invalid_argument("joint_gram: empty corpus");
    const auto n = static_cast<Eigen::Index>(corpus.size());
    Matrix gram(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j <= i; ++j) {
            const double value = eval_joint(jspec, corpus.pairs[i], corpus.pairs[j]);
            gram(i, j) = value;
            gram(j, i) = value;
        }
    return gram;
}

double vendi_joint_proxy(const PairedCorpus& corpus, const JointKernelSpec& jspec) {
    return vendi_from_gram(joint_gram(corpus, jspec));
}

}  // namespace dak

#include "dak/mixture.hpp"

#include <cmath>
#include <stdexcept>

namespace dak {

double pair_label(std::size_t g, std::size_t g2, const Vector& t, const std::map<std::size_t, Vector>& panel_outputs,
                  std::span<const PairedCorpus> panel_archive, const JointKernelSpec& jspec) {
    const auto it = panel_outputs.find(g);
    if (it == panel_outputs.end())
        throw std::invalid_argument("pair_label: missing output for arm " + std::to_string(g));
    if (!panel_outputs.contains(g2))
        throw std::invalid_argument("pair_label: missing output for arm " + std::to_string(g2));
    if (g2 >= panel_archive.size()) throw std::invalid_argument("pair_label: arm outside the panel archive");
    return label_ijrke(t, it->second, panel_archive[g2].view(), jspec);
}

DiversityMatrixEstimate::DiversityMatrixEstimate(std::size_t arms, const KernelSpec& prompt_kernel, double ridge,
                                                 std::size_t refactor_every)
    : arms_(arms) {
    if (arms == 0) throw std::invalid_argument("DiversityMatrixEstimate: no arms");
    states_.reserve(arms * arms);
    for (std::size_t i = 0; i < arms * arms; ++i) states_.emplace_back(prompt_kernel, ridge, 1, refactor_every);
}

DiversityMatrixEstimate::Estimate DiversityMatrixEstimate::predict(const Vector& t) const {
    const auto n = static_cast<Eigen::Index>(arms_);
    Estimate out{Matrix::Zero(n, n), Matrix::Zero(n, n)};
    for (std::size_t g = 0; g < arms_; ++g)
        for (std::size_t h = 0; h < arms_; ++h) {
            const auto pred = states_[g * arms_ + h].predict(t);
            out.mean(static_cast<Eigen::Index>(g), static_cast<Eigen::Index>(h)) = pred.mean;
            out.deviation(static_cast<Eigen::Index>(g), static_cast<Eigen::Index>(h)) = pred.deviation;
        }
    return out;
}

void DiversityMatrixEstimate::update(std::size_t g, std::size_t g2, const Vector& t, double label) {
    if (g >= arms_ || g2 >= arms_) throw std::invalid_argument("DiversityMatrixEstimate: arm out of range");
    states_[g * arms_ + g2].update(t, label);
}

MixtureDakUcb::MixtureDakUcb(std::size_t arms, PolicyConfig config)
    : config_(std::move(config)),
      matrix_(arms, config_.kernels.text_kernel, config_.ridge, config_.refactor_every),
      panel_archive_(arms),
      archive_(arms) {
    config_.validate();
    if (config_.diversity != DiversityPrimitive::neg_ijrke)
        throw std::invalid_argument("mixture_dakucb supports the neg_ijrke primitive only");
    for (std::size_t g = 0; g < arms; ++g)
        fidelity_.emplace_back(config_.kernels.text_kernel, config_.ridge, 1, config_.refactor_every);
}

QpResult MixtureDakUcb::mixture(const Vector& prompt, std::vector<double>* s_ucb) const {
    const auto g = static_cast<Eigen::Index>(fidelity_.size());
    Vector s(g);
    for (Eigen::Index i = 0; i < g; ++i) {
        const auto pred = fidelity_[static_cast<std::size_t>(i)].predict(prompt);
        s(i) = pred.mean + config_.beta_s * pred.deviation;
    }
    if (s_ucb) s_ucb->assign(s.data(), s.data() + g);
    const auto estimate = matrix_.predict(prompt);
    const Matrix lower = estimate.mean - config_.beta_d * estimate.deviation;
    const Matrix projected = psd_project(lower);
    return simplex_qp(s, projected, config_.lambda, config_.qp_tolerance, config_.qp_max_iterations);
}

RoundRecord MixtureDakUcb::step(Environment& env, Rng& rng) {
    const Prompt prompt = env.sample_prompt(rng);
    RoundRecord record;
    record.round = ++round_;
    record.cluster = prompt.cluster;
    record.record = prompt.record;
    record.prompt = prompt.vec;

    const QpResult qp = mixture(prompt.vec, &record.ucb);
    record.weights.assign(qp.weights.values.data(), qp.weights.values.data() + qp.weights.values.size());

    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double u = unit(rng);
    double cumulative = 0.0;
    std::size_t arm = record.weights.size() - 1;
    for (std::size_t g = 0; g < record.weights.size(); ++g) {
        cumulative += record.weights[g];
        if (u < cumulative && record.weights[g] > 0.0) {
            arm = g;
            break;
        }
    }
    while (record.weights[arm] <= 0.0 && arm > 0) --arm;
    record.arm = arm;
    record.output = env.generate(arm, prompt, rng);
    record.y_fid = env.fidelity(prompt, arm, record.output);

    const bool panel = unit(rng) < config_.panel_rate;
    record.panel = panel;
    std::map<std::size_t, Vector> outputs;
    outputs[arm] = record.output;
    if (panel) {
        for (std::size_t g = 0; g < fidelity_.size(); ++g)
            if (g != arm) outputs[g] = env.generate(g, prompt, rng);
    }

    fidelity_[arm].update(prompt.vec, record.y_fid);

    const std::span<const PairedCorpus> frozen(panel_archive_);
    record.y_div = 0.0;
    for (const auto& [g, x] : outputs) {
        for (std::size_t g2 = 0; g2 < fidelity_.size(); ++g2) {
            if (frozen[g2].empty()) continue;
            const double label = label_ijrke(prompt.vec, x, frozen[g2].view(), config_.kernels);
            matrix_.update(g, g2, prompt.vec, label);
            if (g == arm && g2 == arm) record.y_div = label;
        }
    }
    if (panel) {
        ++panel_rounds_;
        for (const auto& [g, x] : outputs) panel_archive_[g].push_back({prompt.vec, x, static_cast<int>(g), round_});
    }
    archive_.append(arm, {prompt.vec, record.output, static_cast<int>(arm), round_});
    return record;
}

// ---------------------------------------------------------------------------

namespace {

void check_instance(const MixtureInstance& inst, bool need_reference) {
    const std::size_t n = inst.prompts.size();
    if (n == 0) throw std::invalid_argument("MixtureInstance: no prompts");
    if (inst.outputs.empty()) throw std::invalid_argument("MixtureInstance: no arms");
    if (inst.weights.size() != n) throw std::invalid_argument("MixtureInstance: one weight vector per prompt");
    for (const auto& arm : inst.outputs)
        if (arm.size() != n) throw std::invalid_argument("MixtureInstance: one output per arm and prompt");
    for (const auto& w : inst.weights)
        if (static_cast<std::size_t>(w.size()) != inst.outputs.size())
            throw std::invalid_argument("MixtureInstance: weight length must equal arm count");
    if (need_reference && inst.reference.size() != n)
        throw std::invalid_argument("MixtureInstance: one reference output per prompt");
}

}  // namespace

double mixture_ijrke_exact(const MixtureInstance& inst, const JointKernelSpec& jspec) {
    check_instance(inst, false);
    const std::size_t n = inst.prompts.size();
    const std::size_t arms = inst.outputs.size();
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            const double kt2 = eval_kernel_squared(jspec.text_kernel, inst.prompts[i], inst.prompts[j]);
            double inner = 0.0;
            for (std::size_t g = 0; g < arms; ++g)
                for (std::size_t h = 0; h < arms; ++h)
                    inner += inst.weights[i](static_cast<Eigen::Index>(g)) * inst.weights[j](static_cast<Eigen::Index>(h)) *
                             eval_kernel_squared(jspec.data_kernel, inst.outputs[g][i], inst.outputs[h][j]);
            total += kt2 * inner;
        }
    return total / static_cast<double>(n * n);
}

double mixture_ijrke_proxy(const MixtureInstance& inst, const JointKernelSpec& jspec) {
    check_instance(inst, false);
    const std::size_t n = inst.prompts.size();
    const std::size_t arms = inst.outputs.size();
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        // M(t_i) then alpha(t_i)' M(t_i) alpha(t_i)
        const auto a = static_cast<Eigen::Index>(arms);
        Matrix m = Matrix::Zero(a, a);
        for (std::size_t j = 0; j < n; ++j) {
            const double kt2 = eval_kernel_squared(jspec.text_kernel, inst.prompts[i], inst.prompts[j]);
            for (std::size_t g = 0; g < arms; ++g)
                for (std::size_t h = 0; h < arms; ++h)
                    m(static_cast<Eigen::Index>(g), static_cast<Eigen::Index>(h)) +=
                        kt2 * eval_kernel_squared(jspec.data_kernel, inst.outputs[g][i], inst.outputs[h][j]);
        }
        m /= static_cast<double>(n);
        total += inst.weights[i].dot(m * inst.weights[i]);
    }
    return total / static_cast<double>(n);
}

namespace {

// K^JKD_{gh}(t_i, t_j)
double jkd_cross(const MixtureInstance& inst, const KernelSpec& kx, std::size_t g, std::size_t h, std::size_t i,
                 std::size_t j) {
    return eval_kernel(kx, inst.outputs[g][i], inst.outputs[h][j]) + eval_kernel(kx, inst.reference[i], inst.reference[j]) -
           eval_kernel(kx, inst.outputs[g][i], inst.reference[j]) - eval_kernel(kx, inst.outputs[h][j], inst.reference[i]);
}

double jkd_form(const MixtureInstance& inst, const JointKernelSpec& jspec, bool proxy) {
    check_instance(inst, true);
    const std::size_t n = inst.prompts.size();
    const std::size_t arms = inst.outputs.size();
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            const double kt = eval_kernel(jspec.text_kernel, inst.prompts[i], inst.prompts[j]);
            const Vector& right = proxy ? inst.weights[i] : inst.weights[j];
            double inner = 0.0;
            for (std::size_t g = 0; g < arms; ++g)
                for (std::size_t h = 0; h < arms; ++h)
                    inner += inst.weights[i](static_cast<Eigen::Index>(g)) * right(static_cast<Eigen::Index>(h)) *
                             jkd_cross(inst, jspec.data_kernel, g, h, i, j);
            total += kt * inner;
        }
    return total / static_cast<double>(n * n);
}

}  // namespace

double mixture_jkd_exact(const MixtureInstance& inst, const JointKernelSpec& jspec) {
    return jkd_form(inst, jspec, false);
}

double mixture_jkd_proxy(const MixtureInstance& inst, const JointKernelSpec& jspec) {
    return jkd_form(inst, jspec, true);
}

double kernel_lipschitz_level(const MixtureInstance& inst, const KernelSpec& prompt_kernel) {
    check_instance(inst, false);
    double level = 0.0;
    for (std::size_t i = 0; i < inst.prompts.size(); ++i)
        for (std::size_t j = 0; j < i; ++j) {
            const double k = std::abs(eval_kernel(prompt_kernel, inst.prompts[i], inst.prompts[j]));
            level = std::max(level, k * (inst.weights[i] - inst.weights[j]).lpNorm<1>());
        }
    return level;
}

}  // namespace dak

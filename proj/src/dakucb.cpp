#include "dak/dakucb.hpp"

#include <stdexcept>

namespace dak {

namespace {

RoundRecord base_record(long round, const Prompt& prompt, std::size_t arms) {
    RoundRecord record;
    record.round = round;
    record.cluster = prompt.cluster;
    record.record = prompt.record;
    record.prompt = prompt.vec;
    record.weights.assign(arms, 0.0);
    return record;
}

}  // namespace

DakUcb::DakUcb(std::size_t arms, PolicyConfig config)
    : config_(std::move(config)), archive_(arms), labeler_(config_, arms) {
    config_.validate();
    states_.reserve(arms);
    for (std::size_t g = 0; g < arms; ++g)
        states_.emplace_back(config_.kernels.text_kernel, config_.ridge, 2, config_.refactor_every);
}

std::vector<double> DakUcb::scores(const Vector& prompt) const {
    std::vector<double> out;
    out.reserve(states_.size());
    for (const auto& state : states_) {
        const auto pred = state.predict_all(prompt);
        out.push_back(dakucb_score(pred.means[0], pred.deviation, pred.means[1], pred.deviation, config_));
    }
    return out;
}

double DakUcb::observe(std::size_t arm, const Vector& prompt, const Vector& output, double fidelity_label,
                       long round) {
    const double penalty = labeler_.label(arm, prompt, output, archive_.live(arm));
    const double labels[2] = {fidelity_label, penalty};
    states_.at(arm).update(prompt, labels);
    EmbeddedPair pair{prompt, output, static_cast<int>(arm), round};
    labeler_.record(arm, pair);
    archive_.append(arm, std::move(pair));
    return penalty;
}

RoundRecord DakUcb::step(Environment& env, Rng& rng) {
    const Prompt prompt = env.sample_prompt(rng);
    RoundRecord record = base_record(++round_, prompt, states_.size());
    record.ucb = scores(prompt.vec);
    record.arm = argmax_lowest(record.ucb);
    record.weights[record.arm] = 1.0;
    record.output = env.generate(record.arm, prompt, rng);
    record.y_fid = env.fidelity(prompt, record.arm, record.output);
    record.y_div = observe(record.arm, prompt.vec, record.output, record.y_fid, round_);
    return record;
}

PakUcb::PakUcb(std::size_t arms, PolicyConfig config) : config_(std::move(config)) {
    if (arms == 0) throw std::invalid_argument("PakUcb: no arms");
    config_.kernels.text_kernel.validate();
    for (std::size_t g = 0; g < arms; ++g)
        states_.emplace_back(config_.kernels.text_kernel, config_.ridge, 1, config_.refactor_every);
}

std::vector<double> PakUcb::scores(const Vector& prompt) const {
    std::vector<double> out;
    for (const auto& state : states_) {
        const auto pred = state.predict(prompt);
        out.push_back(pred.mean + config_.beta_s * pred.deviation);
    }
    return out;
}

RoundRecord PakUcb::step(Environment& env, Rng& rng) {
    const Prompt prompt = env.sample_prompt(rng);
    RoundRecord record = base_record(++round_, prompt, states_.size());
    record.ucb = scores(prompt.vec);
    record.arm = argmax_lowest(record.ucb);
    record.weights[record.arm] = 1.0;
    record.output = env.generate(record.arm, prompt, rng);
    record.y_fid = env.fidelity(prompt, record.arm, record.output);
    states_[record.arm].update(prompt.vec, record.y_fid);
    return record;
}

RandomPolicy::RandomPolicy(std::size_t arms) : arms_(arms) {
    if (arms == 0) throw std::invalid_argument("RandomPolicy: no arms");
}

RoundRecord RandomPolicy::step(Environment& env, Rng& rng) {
    const Prompt prompt = env.sample_prompt(rng);
    RoundRecord record = base_record(++round_, prompt, arms_);
    std::uniform_int_distribution<std::size_t> pick(0, arms_ - 1);
    record.arm = pick(rng);
    record.weights.assign(arms_, 1.0 / static_cast<double>(arms_));
    record.ucb.assign(arms_, 0.0);
    record.output = env.generate(record.arm, prompt, rng);
    record.y_fid = env.fidelity(prompt, record.arm, record.output);
    return record;
}

FixedArmPolicy::FixedArmPolicy(std::size_t arms, std::size_t arm) : arms_(arms), arm_(arm) {
    if (arm >= arms) throw std::invalid_argument("FixedArmPolicy: arm out of range");
}

RoundRecord FixedArmPolicy::step(Environment& env, Rng& rng) {
    const Prompt prompt = env.sample_prompt(rng);
    RoundRecord record = base_record(++round_, prompt, arms_);
    record.arm = arm_;
    record.weights[arm_] = 1.0;
    record.ucb.assign(arms_, 0.0);
    record.output = env.generate(arm_, prompt, rng);
    record.y_fid = env.fidelity(prompt, arm_, record.output);
    return record;
}

OracleChoice one_arm_oracle(Environment& env, std::span<const Prompt> validation_prompts,
                            const PolicyConfig& config, Rng& rng) {
    if (validation_prompts.empty()) throw std::invalid_argument("one_arm_oracle: empty validation set");
    OracleChoice choice;
    for (std::size_t g = 0; g < env.num_arms(); ++g) {
        PairedCorpus corpus;
        double fidelity = 0.0;
        for (const auto& prompt : validation_prompts) {
            Vector x = env.generate(g, prompt, rng);
            fidelity += env.fidelity(prompt, g, x);
            corpus.add(prompt.vec, std::move(x));
        }
        fidelity /= static_cast<double>(validation_prompts.size());
        const double penalty = i_jrke(corpus, config.kernels);
        choice.mean_fidelity.push_back(fidelity);
        choice.ijrke.push_back(penalty);
        choice.objectives.push_back(fidelity - config.lambda * penalty);
    }
    choice.arm = argmax_lowest(choice.objectives);
    return choice;
}

}  // namespace dak

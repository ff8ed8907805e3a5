#include "dak/sup_dakucb.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace dak {

int sup_stage_count(long horizon) {
    if (horizon < 1) throw std::invalid_argument("sup_dakucb: horizon must be at least 1");
    int m = 0;
    long reach = 1;
    while (reach < horizon) {
        reach *= 2;
        ++m;
    }
    return std::max(1, m);
}

SupDakUcb::SupDakUcb(std::size_t arms, long horizon, PolicyConfig config)
    : arms_(arms),
      horizon_(horizon),
      stages_(sup_stage_count(horizon)),
      config_(std::move(config)),
      archive_(arms),
      labeler_(config_, arms) {
    if (arms == 0) throw std::invalid_argument("sup_dakucb: no arms");
    config_.validate();
    const std::size_t slots = arms * static_cast<std::size_t>(stages_);
    states_.reserve(slots);
    for (std::size_t i = 0; i < slots; ++i)
        states_.emplace_back(config_.kernels.text_kernel, config_.ridge, 2, config_.refactor_every);
    psi_.resize(slots);
}

std::size_t SupDakUcb::slot(std::size_t arm, int stage) const {
    if (arm >= arms_ || stage < 1 || stage > stages_) throw std::out_of_range("sup_dakucb: (arm, stage) out of range");
    return arm * static_cast<std::size_t>(stages_) + static_cast<std::size_t>(stage - 1);
}

const std::vector<long>& SupDakUcb::index_set(std::size_t arm, int stage) const { return psi_[slot(arm, stage)]; }

const KrrState& SupDakUcb::state(std::size_t arm, int stage) const { return states_[slot(arm, stage)]; }

RoundRecord SupDakUcb::step(Environment& env, Rng& rng) {
    const Prompt prompt = env.sample_prompt(rng);
    RoundRecord record;
    record.round = ++round_;
    record.cluster = prompt.cluster;
    record.record = prompt.record;
    record.prompt = prompt.vec;
    record.weights.assign(arms_, 0.0);

    SupTrace trace;
    trace.round = round_;
    const double exploit_width = 1.0 / std::sqrt(static_cast<double>(horizon_));
    std::vector<std::size_t> candidates(arms_);
    for (std::size_t g = 0; g < arms_; ++g) candidates[g] = g;
    std::size_t snapshot = archive_.freeze(1, round_);

    int m = 1;
    std::size_t chosen = 0;
    while (true) {
        trace.candidates.push_back(candidates);
        std::vector<double> optimistic(candidates.size());
        std::vector<double> width(candidates.size());
        for (std::size_t c = 0; c < candidates.size(); ++c) {
            const auto pred = states_[slot(candidates[c], m)].predict_all(prompt.vec);
            optimistic[c] = dakucb_score(pred.means[0], pred.deviation, pred.means[1], pred.deviation, config_);
            width[c] = config_.beta_s * pred.deviation + config_.lambda * config_.beta_d * pred.deviation;
        }
        if (m == 1) record.ucb = optimistic;
        double max_width = 0.0;
        for (double w : width) max_width = std::max(max_width, w);
        trace.max_width.push_back(max_width);
        const double stage_width = std::ldexp(1.0, 1 - m);

        if (max_width <= exploit_width) {
            chosen = candidates[argmax_lowest(optimistic)];
            break;
        }
        if (max_width <= stage_width) {
            if (m == stages_) {
                chosen = candidates[argmax_lowest(optimistic)];
                trace.capped = true;
                break;
            }
            double best = -std::numeric_limits<double>::infinity();
            for (double v : optimistic) best = std::max(best, v);
            const double threshold = best - std::ldexp(1.0, 2 - m);
            std::vector<std::size_t> kept;
            for (std::size_t c = 0; c < candidates.size(); ++c)
                if (optimistic[c] >= threshold) kept.push_back(candidates[c]);
            candidates = std::move(kept);
            ++m;
            snapshot = archive_.freeze(m, round_);
            continue;
        }
        std::size_t pick = 0;
        double widest = -1.0;
        for (std::size_t c = 0; c < candidates.size(); ++c)
            if (width[c] > stage_width && width[c] > widest) {
                widest = width[c];
                pick = c;
            }
        chosen = candidates[pick];
        trace.explored = true;
        break;
    }

    record.arm = chosen;
    record.stage = m;
    record.explored = trace.explored;
    record.weights[chosen] = 1.0;
    record.output = env.generate(chosen, prompt, rng);
    record.y_fid = env.fidelity(prompt, chosen, record.output);
    record.y_div = labeler_.label(chosen, prompt.vec, record.output, archive_.snapshot_view(snapshot, chosen));
    if (trace.explored) {
        const double labels[2] = {record.y_fid, record.y_div};
        states_[slot(chosen, m)].update(prompt.vec, labels);
        psi_[slot(chosen, m)].push_back(round_);
    }
    EmbeddedPair pair{prompt.vec, record.output, static_cast<int>(chosen), round_};
    labeler_.record(chosen, pair);
    archive_.append(chosen, std::move(pair));
    traces_.push_back(std::move(trace));
    return record;
}

std::vector<RoundRecord> sup_dakucb_run(std::size_t arms, Environment& env, long horizon, const PolicyConfig& config,
                                        Rng& rng, std::vector<SupTrace>* traces) {
    SupDakUcb policy(arms, horizon, config);
    auto records = run_policy(policy, env, horizon, rng);
    if (traces) *traces = policy.traces();
    return records;
}

}  // namespace dak

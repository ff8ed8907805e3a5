#include "dak/experiment.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <limits>
#include <mutex>
#include <thread>

#include "dak/dakucb.hpp"
#include "dak/mixture.hpp"
#include "dak/sup_dakucb.hpp"

namespace dak {

namespace {

constexpr std::uint64_t kEvalStream = 0x6576616c73747265ULL;
constexpr std::uint64_t kOracleStream = 0x6f7261636c657374ULL;

double square(double v) { return v * v; }

PairedCorpus evenly_spaced(const PairedCorpus& corpus, std::size_t begin, std::size_t cap) {
    const std::size_t n = corpus.size() - begin;
    PairedCorpus out;
    if (n <= cap) {
        out.pairs.assign(corpus.pairs.begin() + static_cast<long>(begin), corpus.pairs.end());
        return out;
    }
    for (std::size_t k = 0; k < cap; ++k) out.push_back(corpus.pairs[begin + k * n / cap]);
    return out;
}

std::unique_ptr<Policy> make_policy(const RunConfig& config, const PolicyConfig& pc, Environment& env,
                                    std::uint64_t trial_seed, std::optional<std::size_t>& oracle_arm) {
    const std::size_t arms = env.num_arms();
    switch (config.policy) {
        case PolicyKind::dakucb: return std::make_unique<DakUcb>(arms, pc);
        case PolicyKind::pakucb: return std::make_unique<PakUcb>(arms, pc);
        case PolicyKind::mixture_dakucb: return std::make_unique<MixtureDakUcb>(arms, pc);
        case PolicyKind::sup_dakucb: return std::make_unique<SupDakUcb>(arms, config.horizon, pc);
        case PolicyKind::random: return std::make_unique<RandomPolicy>(arms);
        case PolicyKind::oracle: {
            Rng oracle_rng(trial_seed ^ kOracleStream);
            std::vector<Prompt> validation;
            for (std::size_t i = 0; i < config.oracle_validation; ++i) validation.push_back(env.sample_prompt(oracle_rng));
            const auto choice = one_arm_oracle(env, validation, pc, oracle_rng);
            oracle_arm = choice.arm;
            return std::make_unique<FixedArmPolicy>(arms, choice.arm);
        }
    }
    throw std::logic_error("unhandled policy kind");
}

}  // namespace

std::vector<double> TrialResult::selection_ratios() const {
    std::size_t total = 0;
    for (auto c : arm_counts) total += c;
    std::vector<double> out(arm_counts.size(), 0.0);
    if (total == 0) return out;
    for (std::size_t g = 0; g < arm_counts.size(); ++g)
        out[g] = static_cast<double>(arm_counts[g]) / static_cast<double>(total);
    return out;
}

HistoryScorer::HistoryScorer(JointKernelSpec jspec, bool with_reference, std::size_t vendi_cap)
    : jspec_(jspec.with_squared(false)), with_reference_(with_reference), vendi_cap_(vendi_cap) {}

void HistoryScorer::add(const Vector& prompt, const Vector& output, double fidelity, const Vector* reference) {
    if (with_reference_ && !reference) throw std::invalid_argument("HistoryScorer: reference output required");
    const auto& kt = jspec_.text_kernel;
    const auto& kx = jspec_.data_kernel;
    double cross_kx2 = 0.0, cross_joint2 = 0.0, cross_jkd = 0.0;
    for (std::size_t j = 0; j < corpus_.size(); ++j) {
        const auto& pj = corpus_.pairs[j];
        const double t = eval_kernel(kt, prompt, pj.prompt_vec);
        const double x = eval_kernel(kx, output, pj.output_vec);
        cross_kx2 += square(x);
        cross_joint2 += square(t) * square(x);
        if (with_reference_) {
            const auto& yj = reference_.pairs[j].output_vec;
            cross_jkd += t * (x + eval_kernel(kx, *reference, yj) - eval_kernel(kx, output, yj) -
                              eval_kernel(kx, pj.output_vec, *reference));
        }
    }
    const double self_t = eval_kernel(kt, prompt, prompt);
    const double self_x = eval_kernel(kx, output, output);
    sum_kx2_ += 2.0 * cross_kx2 + square(self_x);
    sum_joint2_ += 2.0 * cross_joint2 + square(self_t) * square(self_x);
    if (with_reference_) {
        const double self_jkd = self_t * (self_x + eval_kernel(kx, *reference, *reference) -
                                          2.0 * eval_kernel(kx, output, *reference));
        sum_jkd_ += 2.0 * cross_jkd + self_jkd;
        reference_.add(prompt, *reference);
    }
    sum_fid_ += fidelity;
    corpus_.add(prompt, output);
}

EvalRow HistoryScorer::evaluate() const {
    EvalRow row;
    const double n = static_cast<double>(corpus_.size());
    if (corpus_.empty()) {
        row.rke = row.i_jrke = row.jkd = row.vendi_proxy = row.mean_fid = std::numeric_limits<double>::quiet_NaN();
        return row;
    }
    row.rke = n * n / sum_kx2_;
    row.i_jrke = sum_joint2_ / (n * n);
    row.jkd = with_reference_ ? std::max(0.0, sum_jkd_ / (n * n)) : std::numeric_limits<double>::quiet_NaN();
    row.vendi_proxy = vendi_joint_proxy(evenly_spaced(corpus_, 0, vendi_cap_), jspec_);
    row.mean_fid = sum_fid_ / n;
    return row;
}

EvalRow evaluate_window(const PairedCorpus& corpus, const PairedCorpus* reference, std::span<const double> fidelity,
                        std::size_t window, const JointKernelSpec& jspec, std::size_t vendi_cap) {
    const std::size_t n = corpus.size();
    const std::size_t begin = (window == 0 || window >= n) ? 0 : n - window;
    HistoryScorer scorer(jspec, reference != nullptr, vendi_cap);
    for (std::size_t i = begin; i < n; ++i)
        scorer.add(corpus.pairs[i].prompt_vec, corpus.pairs[i].output_vec, fidelity[i],
                   reference ? &reference->pairs[i].output_vec : nullptr);
    return scorer.evaluate();
}

TrialResult run_trial(const RunConfig& config, int trial, const PolicyConfig& policy_config,
                      const std::shared_ptr<const EmbeddingDataset>& dataset) {
    const auto start = std::chrono::steady_clock::now();
    TrialResult result;
    result.trial = trial;
    result.seed = config.seed + static_cast<std::uint64_t>(trial);
    auto env = make_environment(config, dataset);
    Rng rng(result.seed);
    Rng eval_rng(result.seed ^ kEvalStream);

    auto policy = make_policy(config, policy_config, *env, result.seed, result.oracle_arm);
    // The oracle's validation draws advance a replay cursor; the run starts from a fresh environment.
    if (result.oracle_arm) env = make_environment(config, dataset);

    const bool with_reference = env->has_reference();
    HistoryScorer scorer(policy_config.kernels, with_reference, config.vendi_cap);
    PairedCorpus reference_history;
    std::vector<double> fidelities;

    const std::size_t arms = env->num_arms();
    result.arm_counts.assign(arms, 0);
    result.cluster_counts.assign(std::max<std::size_t>(env->num_clusters(), 1), std::vector<std::size_t>(arms, 0));
    result.rounds.reserve(static_cast<std::size_t>(config.horizon));

    for (long i = 1; i <= config.horizon; ++i) {
        RoundRecord rec = policy->step(*env, rng);
        std::optional<Vector> ref;
        if (with_reference) ref = env->generate_reference(Prompt{rec.cluster, rec.prompt, rec.record}, eval_rng);
        scorer.add(rec.prompt, rec.output, rec.y_fid, ref ? &*ref : nullptr);
        if (config.eval_window > 0) {
            fidelities.push_back(rec.y_fid);
            if (ref) reference_history.add(rec.prompt, *ref);
        }

        ++result.arm_counts[rec.arm];
        const auto cluster = static_cast<std::size_t>(std::max(rec.cluster, 0));
        if (cluster >= result.cluster_counts.size()) result.cluster_counts.resize(cluster + 1, std::vector<std::size_t>(arms, 0));
        ++result.cluster_counts[cluster][rec.arm];

        if (i % config.eval_every == 0 || i == config.horizon) {
            EvalRow row = config.eval_window > 0
                              ? evaluate_window(scorer.corpus(), with_reference ? &reference_history : nullptr,
                                                fidelities, static_cast<std::size_t>(config.eval_window),
                                                policy_config.kernels, config.vendi_cap)
                              : scorer.evaluate();
            row.trial = trial;
            row.round = i;
            result.evals.push_back(row);
        }
        result.rounds.push_back(
            {trial, rec.round, rec.cluster, rec.arm, std::move(rec.weights), rec.y_fid, rec.y_div, std::move(rec.ucb)});
    }
    result.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return result;
}

int effective_workers(const RunConfig& config) {
    int workers = config.workers;
    if (const char* env = std::getenv("DAK_WORKERS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && v >= 1) workers = static_cast<int>(v);
    }
    return std::max(1, std::min(workers, config.trials));
}

MetricsLog run_experiment(const RunConfig& config) {
    std::shared_ptr<const EmbeddingDataset> dataset;
    if (config.env_type == "replay") dataset = std::make_shared<EmbeddingDataset>(load_embeddings(config.replay_path));

    MetricsLog log;
    log.config = config;
    {
        auto probe = make_environment(config, dataset);
        log.arms = probe->num_arms();
        log.clusters = probe->num_clusters();
        const PolicyConfig pc = resolve_policy_config(config, *probe);
        log.kernels = pc.kernels;
        log.beta_s = pc.beta_s;
        log.beta_d = pc.beta_d;
        log.config.policy_config = pc;
    }

    log.trials.resize(static_cast<std::size_t>(config.trials));
    std::atomic<int> next{0};
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(config.trials));
    auto worker = [&] {
        while (true) {
            const int trial = next.fetch_add(1);
            if (trial >= config.trials) return;
            try {
                log.trials[static_cast<std::size_t>(trial)] = run_trial(config, trial, log.config.policy_config, dataset);
            } catch (...) {
                errors[static_cast<std::size_t>(trial)] = std::current_exception();
            }
        }
    };
    const int workers = effective_workers(config);
    if (workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    return log;
}

}  // namespace dak

#include "dak/policy.hpp"

#include <cmath>
#include <stdexcept>

namespace dak {

std::string to_string(DiversityPrimitive primitive) {
    return primitive == DiversityPrimitive::neg_ijrke ? "neg_ijrke" : "neg_jkd";
}

DiversityPrimitive diversity_primitive_from_string(const std::string& name) {
    if (name == "neg_ijrke" || name == "ijrke") return DiversityPrimitive::neg_ijrke;
    if (name == "neg_jkd" || name == "jkd") return DiversityPrimitive::neg_jkd;
    throw std::invalid_argument("unknown diversity primitive '" + name + "'");
}

void PolicyConfig::validate() const {
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw std::invalid_argument("policy.lambda must be >= 0");
    if (!(beta_s >= 0.0) || !std::isfinite(beta_s)) throw std::invalid_argument("policy.beta_s must be >= 0");
    if (!(beta_d >= 0.0) || !std::isfinite(beta_d)) throw std::invalid_argument("policy.beta_d must be >= 0");
    if (!(ridge > 0.0) || !std::isfinite(ridge)) throw std::invalid_argument("policy.ridge must be > 0");
    if (!(panel_rate >= 0.0 && panel_rate <= 1.0)) throw std::invalid_argument("policy.panel_rate must lie in [0,1]");
    if (!(qp_tolerance > 0.0)) throw std::invalid_argument("policy.qp_tolerance must be > 0");
    if (qp_max_iterations < 1) throw std::invalid_argument("policy.qp_max_iterations must be >= 1");
    if (refactor_every == 0) throw std::invalid_argument("policy.refactor_every must be >= 1");
    kernels.text_kernel.validate();
    kernels.data_kernel.validate();
    if (diversity == DiversityPrimitive::neg_jkd && (!reference || reference->empty()))
        throw std::invalid_argument("policy.diversity=neg_jkd requires a nonempty reference corpus");
    if (rff_features > 0) {
        if (diversity != DiversityPrimitive::neg_ijrke)
            throw std::invalid_argument("policy.rff_features requires the neg_ijrke primitive");
        if (kernels.text_kernel.family != KernelFamily::gaussian ||
            kernels.data_kernel.family != KernelFamily::gaussian)
            throw std::invalid_argument("policy.rff_features requires gaussian kernels");
    }
}

Betas theory_betas(const ConfidenceParams& base, double fidelity_noise, double diversity_noise, double ridge) {
    ConfidenceParams fid = base;
    fid.noise_scale = fidelity_noise;
    ConfidenceParams div = base;
    div.noise_scale = diversity_noise;
    return {confidence_radius(fid, ridge), confidence_radius(div, ridge)};
}

double dakucb_score(double s_hat, double sigma_s, double d_hat, double sigma_d, const PolicyConfig& config) {
    return (s_hat + config.beta_s * sigma_s) - config.lambda * (d_hat - config.beta_d * sigma_d);
}

std::size_t argmax_lowest(std::span<const double> values) {
    if (values.empty()) throw std::invalid_argument("argmax_lowest: empty input");
    std::size_t best = 0;
    for (std::size_t i = 1; i < values.size(); ++i)
        if (values[i] > values[best]) best = i;
    return best;
}

// ---------------------------------------------------------------------------

HistoryArchive::HistoryArchive(std::size_t arms) : live_(arms) {
    if (arms == 0) throw std::invalid_argument("HistoryArchive: no arms");
}

void HistoryArchive::append(std::size_t arm, EmbeddedPair pair) { live_.at(arm).push_back(std::move(pair)); }

std::span<const EmbeddedPair> HistoryArchive::live(std::size_t arm) const { return live_.at(arm); }

std::size_t HistoryArchive::freeze(int stage, long round) {
    Snapshot snap;
    snap.stage = stage;
    snap.round = round;
    for (const auto& arm : live_) snap.sizes.push_back(arm.size());
    snapshots_.push_back(std::move(snap));
    return snapshots_.size() - 1;
}

std::span<const EmbeddedPair> HistoryArchive::snapshot_view(std::size_t id, std::size_t arm) const {
    const auto& snap = snapshots_.at(id);
    // Archives only grow, so a recorded prefix length is an immutable view.
    return std::span<const EmbeddedPair>(live_.at(arm)).first(snap.sizes.at(arm));
}

std::size_t HistoryArchive::total() const {
    std::size_t n = 0;
    for (const auto& arm : live_) n += arm.size();
    return n;
}

// ---------------------------------------------------------------------------

DiversityLabeler::DiversityLabeler(const PolicyConfig& config, std::size_t arms)
    : primitive_(config.diversity),
      kernels_(config.kernels),
      reference_(config.reference),
      rff_features_(config.rff_features),
      rff_seed_(config.rff_seed),
      cache_(arms) {}

void DiversityLabeler::ensure_maps(const Vector& t, const Vector& x) {
    if (text_map_) return;
    // Feature maps approximate the squared kernels used by the I-JRKE label.
    const auto d = static_cast<Eigen::Index>(rff_features_);
    text_map_.emplace(squared_gaussian(kernels_.text_kernel), t.size(), d, rff_seed_);
    data_map_.emplace(squared_gaussian(kernels_.data_kernel), x.size(), d, rff_seed_ + 0x9e3779b97f4a7c15ULL);
}

void DiversityLabeler::record(std::size_t arm, const EmbeddedPair& pair) {
    if (rff_features_ == 0) return;
    ensure_maps(pair.prompt_vec, pair.output_vec);
    cache_.at(arm).push_back({text_map_->features(pair.prompt_vec), data_map_->features(pair.output_vec)});
}

double DiversityLabeler::label(std::size_t arm, const Vector& t, const Vector& x,
                               std::span<const EmbeddedPair> history) {
    if (primitive_ == DiversityPrimitive::neg_jkd) return label_jkd(t, x, history, reference_->view(), kernels_);
    if (rff_features_ == 0) return label_ijrke(t, x, history, kernels_);
    if (history.empty()) return 0.0;
    ensure_maps(t, x);
    const auto& cached = cache_.at(arm);
    if (history.size() > cached.size())
        throw std::logic_error("DiversityLabeler: history longer than the feature cache");
    const Vector zt = text_map_->features(t);
    const Vector zx = data_map_->features(x);
    double total = 0.0;
    for (std::size_t i = 0; i < history.size(); ++i) total += zt.dot(cached[i].text) * zx.dot(cached[i].data);
    return total / static_cast<double>(history.size());
}

// ---------------------------------------------------------------------------

std::vector<RoundRecord> run_policy(Policy& policy, Environment& env, long horizon, Rng& rng) {
    if (horizon < 1) throw std::invalid_argument("run_policy: horizon must be >= 1");
    std::vector<RoundRecord> records;
    records.reserve(static_cast<std::size_t>(horizon));
    for (long i = 0; i < horizon; ++i) records.push_back(policy.step(env, rng));
    return records;
}

std::vector<double> empirical_regret(std::span<const RoundRecord> records,
                                     const std::vector<std::vector<double>>& true_objective) {
    if (records.size() != true_objective.size())
        throw std::invalid_argument("empirical_regret: record and oracle lengths differ");
    std::vector<double> cumulative;
    cumulative.reserve(records.size());
    double total = 0.0;
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& values = true_objective[i];
        if (records[i].arm >= values.size()) throw std::invalid_argument("empirical_regret: arm out of range");
        double best = values.front();
        for (double v : values) best = std::max(best, v);
        total += best - values[records[i].arm];
        cumulative.push_back(total);
    }
    return cumulative;
}

}  // namespace dak

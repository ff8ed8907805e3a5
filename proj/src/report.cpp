#include "dak/report.hpp"

#include <Eigen/Core>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace dak {

using nlohmann::json;

namespace {

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    out << content;
    out.flush();
    if (!out) throw std::runtime_error("failed writing '" + path + "'");
}

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json mean_std(const std::vector<double>& values) {
    double mean = 0.0;
    std::size_t n = 0;
    for (double v : values)
        if (std::isfinite(v)) {
            mean += v;
            ++n;
        }
    if (n == 0) return {{"mean", nullptr}, {"std", nullptr}};
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double v : values)
        if (std::isfinite(v)) var += (v - mean) * (v - mean);
    const double sd = n > 1 ? std::sqrt(var / static_cast<double>(n - 1)) : 0.0;
    return {{"mean", mean}, {"std", sd}};
}

json kernel_json(const KernelSpec& k) {
    return {{"family", to_string(k.family)}, {"sigma", k.sigma}, {"gamma", k.gamma}, {"degree", k.degree},
            {"normalize", k.normalize}};
}

}  // namespace

std::string format_number(double value) {
    if (std::isnan(value)) return "nan";
    if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, res.ptr);
}

std::string rounds_csv(const MetricsLog& log) {
    std::ostringstream out;
    out << "trial,round,cluster,arm";
    for (std::size_t g = 0; g < log.arms; ++g) out << ",alpha_" << g;
    out << ",y_fid,y_div";
    for (std::size_t g = 0; g < log.arms; ++g) out << ",ucb_" << g;
    out << '\n';
    for (const auto& trial : log.trials)
        for (const auto& r : trial.rounds) {
            out << r.trial << ',' << r.round << ',' << r.cluster << ',' << r.arm;
            for (std::size_t g = 0; g < log.arms; ++g) out << ',' << format_number(g < r.weights.size() ? r.weights[g] : 0.0);
            out << ',' << format_number(r.y_fid) << ',' << format_number(r.y_div);
            for (std::size_t g = 0; g < log.arms; ++g)
                out << ',' << format_number(g < r.ucb.size() ? r.ucb[g] : std::nan(""));
            out << '\n';
        }
    return out.str();
}

std::string evals_csv(const MetricsLog& log) {
    std::ostringstream out;
    out << "trial,round,rke,i_jrke,jkd,vendi_proxy,mean_fid\n";
    for (const auto& trial : log.trials)
        for (const auto& e : trial.evals)
            out << e.trial << ',' << e.round << ',' << format_number(e.rke) << ',' << format_number(e.i_jrke) << ','
                << format_number(e.jkd) << ',' << format_number(e.vendi_proxy) << ',' << format_number(e.mean_fid)
                << '\n';
    return out.str();
}

json summary_json(const MetricsLog& log) {
    json s;
    s["versions"] = {{"dakucb", DAK_VERSION},
                     {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                   std::to_string(EIGEN_MINOR_VERSION)},
                     {"json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                  std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                  std::to_string(NLOHMANN_JSON_VERSION_PATCH)}};
    s["policy"] = to_string(log.config.policy);
    s["horizon"] = log.config.horizon;
    s["trials"] = log.trials.size();
    s["arms"] = log.arms;
    s["clusters"] = log.clusters;
    s["kernels"] = {{"prompt", kernel_json(log.kernels.text_kernel)}, {"output", kernel_json(log.kernels.data_kernel)}};
    s["betas"] = {{"beta_s", log.beta_s}, {"beta_d", log.beta_d}};

    json per_trial = json::array();
    std::vector<double> mean_ratio(log.arms, 0.0);
    std::vector<std::vector<double>> mean_cluster(log.clusters, std::vector<double>(log.arms, 0.0));
    json cluster_trials = json::array();
    for (const auto& t : log.trials) {
        const auto ratios = t.selection_ratios();
        per_trial.push_back(ratios);
        for (std::size_t g = 0; g < log.arms && g < ratios.size(); ++g)
            mean_ratio[g] += ratios[g] / static_cast<double>(log.trials.size());
        json clusters = json::array();
        for (std::size_t c = 0; c < t.cluster_counts.size(); ++c) {
            std::size_t total = 0;
            for (auto v : t.cluster_counts[c]) total += v;
            std::vector<double> r(log.arms, 0.0);
            for (std::size_t g = 0; g < log.arms; ++g)
                if (total > 0) r[g] = static_cast<double>(t.cluster_counts[c][g]) / static_cast<double>(total);
            if (c < mean_cluster.size())
                for (std::size_t g = 0; g < log.arms; ++g) mean_cluster[c][g] += r[g] / static_cast<double>(log.trials.size());
            clusters.push_back(r);
        }
        cluster_trials.push_back(clusters);
    }
    s["selection_ratios"] = {{"mean", mean_ratio}, {"per_trial", per_trial}};
    s["cluster_ratios"] = {{"mean", mean_cluster}, {"per_trial", cluster_trials}};

    std::vector<double> rke, ijrke, jkd, vendi, fid, y_fid, y_div;
    for (const auto& t : log.trials) {
        if (!t.evals.empty()) {
            const auto& e = t.evals.back();
            rke.push_back(e.rke);
            ijrke.push_back(e.i_jrke);
            jkd.push_back(e.jkd);
            vendi.push_back(e.vendi_proxy);
            fid.push_back(e.mean_fid);
        }
        double sf = 0.0, sd = 0.0;
        for (const auto& r : t.rounds) {
            sf += r.y_fid;
            sd += r.y_div;
        }
        const double n = static_cast<double>(std::max<std::size_t>(t.rounds.size(), 1));
        y_fid.push_back(sf / n);
        y_div.push_back(sd / n);
    }
    s["final_scores"] = {{"rke", mean_std(rke)},          {"i_jrke", mean_std(ijrke)},
                         {"jkd", mean_std(jkd)},          {"vendi_proxy", mean_std(vendi)},
                         {"mean_fid", mean_std(fid)},     {"round_mean_y_fid", mean_std(y_fid)},
                         {"round_mean_y_div", mean_std(y_div)}};

    json oracle = json::array();
    for (const auto& t : log.trials)
        if (t.oracle_arm) oracle.push_back(*t.oracle_arm);
    if (!oracle.empty()) s["oracle_arms"] = oracle;
    if (log.config.record_timing) {
        json wall = json::array();
        for (const auto& t : log.trials) wall.push_back(number_or_null(t.wall_seconds));
        s["wall_seconds"] = wall;
    }
    s["config"] = log.config.source;
    return s;
}

ReportPaths emit_report(const MetricsLog& log, const std::string& directory) {
    std::error_code ec;
    std::filesystem::create_directories(directory, ec);
    if (ec) throw std::runtime_error("cannot create output directory '" + directory + "': " + ec.message());
    const std::filesystem::path dir(directory);
    ReportPaths paths{(dir / "rounds.csv").string(), (dir / "evals.csv").string(), (dir / "summary.json").string()};
    write_file(paths.rounds, rounds_csv(log));
    write_file(paths.evals, evals_csv(log));
    write_file(paths.summary, summary_json(log).dump(2) + "\n");
    return paths;
}

}  // namespace dak

#include "dak/cli.hpp"

#include <iostream>
#include <optional>

#include "CLI11.hpp"

#include "dak/config.hpp"
#include "dak/dakucb.hpp"
#include "dak/experiment.hpp"
#include "dak/report.hpp"
#include "dak/scores.hpp"

namespace dak {

namespace {

struct ScoreOptions {
    std::string path;
    std::string metric = "rke";
    std::string arm;
    std::string reference_arm;
    std::string kernel = "gaussian";
    std::optional<double> prompt_sigma;
    std::optional<double> output_sigma;
};

std::size_t arm_column(const EmbeddingDataset& data, const std::string& id) {
    for (std::size_t i = 0; i < data.arm_ids.size(); ++i)
        if (data.arm_ids[i] == id) return i;
    throw ValidationError({"arm '" + id + "' is not a column of the dataset"});
}

PairedCorpus column_corpus(const EmbeddingDataset& data, const std::string& id) {
    arm_column(data, id);
    PairedCorpus corpus;
    for (const auto& r : data.records) corpus.add(r.prompt_vec, r.outputs.at(id));
    return corpus;
}

int run_score(const ScoreOptions& o, std::ostream& out) {
    const EmbeddingDataset data = load_embeddings(o.path);
    const std::string arm = o.arm.empty() ? data.arm_ids.front() : o.arm;
    const PairedCorpus corpus = column_corpus(data, arm);
    const auto prompts = corpus.prompts();
    const auto outputs = corpus.outputs();

    const KernelFamily family = kernel_family_from_string(o.kernel);
    auto make = [&](const std::vector<Vector>& pts, const std::optional<double>& sigma) {
        KernelSpec spec;
        spec.family = family;
        spec.sigma = family == KernelFamily::gaussian ? sigma.value_or(median_bandwidth(pts)) : 1.0;
        return spec;
    };
    JointKernelSpec jspec;
    jspec.text_kernel = make(prompts, o.prompt_sigma);
    jspec.data_kernel = make(outputs, o.output_sigma);

    double value = 0.0;
    if (o.metric == "rke") {
        value = rke(outputs, jspec.data_kernel);
    } else if (o.metric == "vendi") {
        value = vendi(outputs, jspec.data_kernel);
    } else if (o.metric == "ijrke") {
        value = i_jrke(corpus, jspec);
    } else if (o.metric == "jkd" || o.metric == "kd") {
        if (o.reference_arm.empty()) throw ValidationError({"--reference-arm is required for --metric " + o.metric});
        const PairedCorpus reference = column_corpus(data, o.reference_arm);
        value = o.metric == "jkd" ? joint_kd(corpus, reference, jspec)
                                  : kd_squared(outputs, reference.outputs(), jspec.data_kernel);
    } else {
        throw ValidationError({"--metric must be one of rke, ijrke, jkd, vendi, kd"});
    }
    out << format_number(value) << '\n';
    return 0;
}

int run_oracle(const RunConfig& config, std::ostream& out) {
    std::shared_ptr<const EmbeddingDataset> dataset;
    if (config.env_type == "replay") dataset = std::make_shared<EmbeddingDataset>(load_embeddings(config.replay_path));
    auto probe = make_environment(config, dataset);
    const PolicyConfig pc = resolve_policy_config(config, *probe);
    auto env = make_environment(config, dataset);
    Rng rng(config.seed);
    std::vector<Prompt> validation;
    for (std::size_t i = 0; i < config.oracle_validation; ++i) validation.push_back(env->sample_prompt(rng));
    const OracleChoice choice = one_arm_oracle(*env, validation, pc, rng);
    nlohmann::json j = {{"arm", choice.arm},
                        {"objectives", choice.objectives},
                        {"mean_fidelity", choice.mean_fidelity},
                        {"i_jrke", choice.ijrke},
                        {"lambda", pc.lambda}};
    out << j.dump(2) << '\n';
    return 0;
}

}  // namespace

int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Diversity-aware kernelized bandits for prompt-conditioned generator selection", "dakucb"};
    app.set_version_flag("--version", std::string(DAK_VERSION));
    app.require_subcommand(1);

    std::string config_path;
    std::vector<std::string> overrides;
    std::string out_dir;

    auto* run = app.add_subcommand("run", "Run an experiment and write rounds.csv, evals.csv, summary.json");
    run->add_option("config", config_path, "Config file (JSON)")->required();
    run->add_option("--set", overrides, "Override a config key: dotted.key=value")->take_all();
    run->add_option("--out", out_dir, "Output directory (overrides output_dir)");

    ScoreOptions score;
    auto* sc = app.add_subcommand("score", "Score one arm column of an embedding file");
    sc->add_option("embeddings", score.path, "Embedding file (JSON Lines)")->required();
    sc->add_option("--metric", score.metric, "rke | ijrke | jkd | vendi | kd")
        ->check(CLI::IsMember({"rke", "ijrke", "jkd", "vendi", "kd"}));
    sc->add_option("--arm", score.arm, "Arm column (default: first)");
    sc->add_option("--reference-arm", score.reference_arm, "Reference column for jkd and kd");
    sc->add_option("--kernel", score.kernel, "gaussian | polynomial | cosine");
    sc->add_option("--prompt-sigma", score.prompt_sigma, "Prompt bandwidth (default: median heuristic)");
    sc->add_option("--output-sigma", score.output_sigma, "Output bandwidth (default: median heuristic)");

    auto* oracle = app.add_subcommand("oracle", "Select the best single arm on validation prompts");
    oracle->add_option("config", config_path, "Config file (JSON)")->required();
    oracle->add_option("--set", overrides, "Override a config key")->take_all();

    auto* validate = app.add_subcommand("validate", "Check a config file");
    validate->add_option("config", config_path, "Config file (JSON)")->required();
    validate->add_option("--set", overrides, "Override a config key")->take_all();

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    if (!reversed.empty()) reversed.pop_back();  // program name
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForVersion& e) {
        out << DAK_VERSION << '\n';
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n" << app.help();
        return 1;
    }

    try {
        if (*run) {
            RunConfig config = load_run_config(config_path, overrides);
            if (!out_dir.empty()) config.output_dir = out_dir;
            const MetricsLog log = run_experiment(config);
            const ReportPaths paths = emit_report(log, config.output_dir);
            out << paths.rounds << '\n' << paths.evals << '\n' << paths.summary << '\n';
            return 0;
        }
        if (*sc) return run_score(score, out);
        if (*oracle) return run_oracle(load_run_config(config_path, overrides), out);
        if (*validate) {
            load_run_config(config_path, overrides);
            out << "ok\n";
            return 0;
        }
    } catch (const ValidationError& e) {
        err << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    }
    err << app.help();
    return 1;
}

int cli_main(int argc, char** argv) {
    std::vector<std::string> args(argv, argv + argc);
    return cli_main(args, std::cout, std::cerr);
}

}  // namespace dak

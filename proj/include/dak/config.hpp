#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "dak/env.hpp"
#include "dak/policy.hpp"

namespace dak {

/// Raised when a configuration is rejected; carries every violated field.
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(std::vector<std::string> problems);
    const std::vector<std::string>& problems() const { return problems_; }

private:
    std::vector<std::string> problems_;
};

enum class PolicyKind { dakucb, mixture_dakucb, sup_dakucb, pakucb, random, oracle };

std::string to_string(PolicyKind kind);
PolicyKind policy_kind_from_string(const std::string& name);

enum class BetaMode { fixed, theory };

/// Kernel section entry. A missing sigma is set by the median heuristic.
struct KernelConfig {
    KernelFamily family = KernelFamily::gaussian;
    std::optional<double> sigma;
    double gamma = 1.0;
    int degree = 2;
    bool normalize = true;
};

struct TheoryConfig {
    double rkhs_bound = 1.0;
    double fidelity_noise = 0.5;
    double diversity_noise = 0.5;
    double failure_prob = 0.1;
};

struct RunConfig {
    std::string env_type = "synthetic";  // synthetic | replay
    SyntheticLayout layout;
    std::string replay_path;
    std::optional<std::string> reference_arm;

    KernelConfig prompt_kernel;
    KernelConfig output_kernel;
    std::size_t bandwidth_samples = 200;

    PolicyKind policy = PolicyKind::dakucb;
    PolicyConfig policy_config;
    BetaMode beta_mode = BetaMode::fixed;
    TheoryConfig theory;
    std::size_t reference_size = 200;
    std::size_t oracle_validation = 200;

    long horizon = 500;
    int trials = 1;
    long eval_every = 25;
    long eval_window = 0;  // 0: cumulative history
    std::size_t vendi_cap = 256;
    bool record_timing = false;
    int workers = 1;
    std::uint64_t seed = 0;
    std::string output_dir = "out";

    nlohmann::json source;  // parsed document after overrides
};

/// Parses and validates. Throws ValidationError listing every problem found.
RunConfig parse_run_config(const nlohmann::json& doc);
RunConfig load_run_config(const std::string& path, const std::vector<std::string>& overrides = {});

/// Applies `dotted.key=value` to a document; the value is parsed as JSON when
/// possible and kept as a string otherwise.
void apply_override(nlohmann::json& doc, const std::string& assignment);

/// Environment for one trial. Replay datasets are read once and cached by the caller.
std::unique_ptr<Environment> make_environment(const RunConfig& config,
                                              const std::shared_ptr<const EmbeddingDataset>& dataset = nullptr);

/// Fills kernel bandwidths left unset with the median heuristic over a probe sample
/// drawn with its own stream, so all trials share the same kernels.
JointKernelSpec resolve_kernels(const RunConfig& config, Environment& env);

/// Policy configuration with kernels, betas and any reference corpus filled in.
PolicyConfig resolve_policy_config(const RunConfig& config, Environment& env);

}  // namespace dak

#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include <Eigen/Dense>

namespace dak {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Every stochastic component draws from a caller-owned stream of this type.
using Rng = std::mt19937_64;

// A (prompt embedding, output embedding) datum.
struct EmbeddedPair {
    Vector prompt_vec;
    Vector output_vec;
    std::optional<int> arm_id;
    std::optional<long> round;
};

}  // namespace dak

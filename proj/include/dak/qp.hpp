#pragma once

#include <vector>

#include "dak/types.hpp"

namespace dak {

/// A point on the probability simplex.
struct MixtureWeights {
    Vector values;

    std::size_t size() const { return static_cast<std::size_t>(values.size()); }
    double operator[](std::size_t g) const { return values(static_cast<Eigen::Index>(g)); }
    bool valid(double tolerance = 1e-9) const;
};

/// Frobenius-nearest PSD matrix: symmetrize, zero the negative eigenvalues, rebuild.
Matrix psd_project(const Matrix& m);

/// Euclidean projection onto the simplex (sort-based).
Vector project_to_simplex(const Vector& v);

/// <a, s> - lambda a' M a.
double qp_objective(const Vector& s, const Matrix& m, double lambda, const Vector& a);

struct QpResult {
    MixtureWeights weights;
    int iterations = 0;
    std::vector<double> objective_trace;  // filled when requested
};

/// Maximizes <a, s> - lambda a' M a over the simplex by projected gradient ascent
/// with step 1/(2 lambda |M|_2 + 1), starting from the uniform mixture. Stops when
/// an iterate moves less than `tolerance` (max-norm) or after `max_iterations`.
/// lambda = 0 returns the vertex of the largest s (lowest index on ties).
QpResult simplex_qp(const Vector& s, const Matrix& m_psd, double lambda, double tolerance = 1e-9,
                    int max_iterations = 10000, bool keep_trace = false);

}  // namespace dak

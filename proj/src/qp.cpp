#include "dak/qp.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>

namespace dak {

bool MixtureWeights::valid(double tolerance) const {
    if (values.size() == 0) return false;
    if ((values.array() < 0.0).any()) return false;
    return std::abs(values.sum() - 1.0) <= tolerance;
}

Matrix psd_project(const Matrix& m) {
    if (m.rows() != m.cols()) throw std::invalid_argument("psd_project: matrix must be square");
    if (!m.allFinite()) throw std::invalid_argument("psd_project: non-finite entries");
    const Matrix sym = 0.5 * (m + m.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix> solver(sym);
    if (solver.info() != Eigen::Success) throw std::runtime_error("psd_project: eigendecomposition failed");
    if (solver.eigenvalues().minCoeff() >= 0.0) return sym;
    const Vector clipped = solver.eigenvalues().cwiseMax(0.0);
    Matrix out = solver.eigenvectors() * clipped.asDiagonal() * solver.eigenvectors().transpose();
    return 0.5 * (out + out.transpose());
}

Vector project_to_simplex(const Vector& v) {
    const Eigen::Index n = v.size();
    if (n == 0) throw std::invalid_argument("project_to_simplex: empty vector");
    std::vector<double> sorted(v.data(), v.data() + n);
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    double cumulative = 0.0;
    double theta = 0.0;
    for (Eigen::Index k = 0; k < n; ++k) {
        cumulative += sorted[static_cast<std::size_t>(k)];
        const double candidate = (cumulative - 1.0) / static_cast<double>(k + 1);
        if (sorted[static_cast<std::size_t>(k)] - candidate > 0.0) theta = candidate;
    }
    return (v.array() - theta).cwiseMax(0.0).matrix();
}

double qp_objective(const Vector& s, const Matrix& m, double lambda, const Vector& a) {
    return a.dot(s) - lambda * a.dot(m * a);
}

QpResult simplex_qp(const Vector& s, const Matrix& m_psd, double lambda, double tolerance, int max_iterations,
                    bool keep_trace) {
    const Eigen::Index g = s.size();
    if (g == 0) throw std::invalid_argument("simplex_qp: no arms");
    if (m_psd.rows() != g || m_psd.cols() != g) throw std::invalid_argument("simplex_qp: matrix size mismatch");
    if (!(lambda >= 0.0)) throw std::invalid_argument("simplex_qp: lambda must be nonnegative");
    if (!s.allFinite() || !m_psd.allFinite()) throw std::invalid_argument("simplex_qp: non-finite input");

    QpResult result;
    if (lambda == 0.0) {
        Eigen::Index best = 0;
        for (Eigen::Index i = 1; i < g; ++i)
            if (s(i) > s(best)) best = i;
        result.weights.values = Vector::Unit(g, best);
        if (keep_trace) result.objective_trace.push_back(s(best));
        return result;
    }

    const Matrix sym = 0.5 * (m_psd + m_psd.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix> solver(sym, Eigen::EigenvaluesOnly);
    const Vector& eig = solver.eigenvalues();
    const double scale = std::max(1.0, sym.cwiseAbs().maxCoeff());
    if (eig.minCoeff() < -1e-8 * scale) throw std::invalid_argument("simplex_qp: matrix is not PSD");
    const double spectral = std::max(eig.cwiseAbs().maxCoeff(), 0.0);
    const double step = 1.0 / (2.0 * lambda * spectral + 1.0);

    Vector a = Vector::Constant(g, 1.0 / static_cast<double>(g));
    if (keep_trace) result.objective_trace.push_back(qp_objective(s, sym, lambda, a));
    for (int it = 0; it < max_iterations; ++it) {
        const Vector gradient = s - 2.0 * lambda * (sym * a);
        Vector next = project_to_simplex(a + step * gradient);
        const double moved = (next - a).cwiseAbs().maxCoeff();
        a = std::move(next);
        result.iterations = it + 1;
        if (keep_trace) result.objective_trace.push_back(qp_objective(s, sym, lambda, a));
        if (moved < tolerance) break;
    }
    // Renormalize away rounding in the projection.
    a = a.cwiseMax(0.0);
    a /= a.sum();
    result.weights.values = std::move(a);
    return result;
}

}  // namespace dak

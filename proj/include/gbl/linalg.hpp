#pragma once

#include <Eigen/Dense>

namespace gbl {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

/// Column-major vectorization, vec(X) = (X_{:,1}; X_{:,2}; ...).
inline Vec vec(const Mat &m) { return m.reshaped(); }

inline Mat unvec(const Vec &v, Eigen::Index rows, Eigen::Index cols) {
    return v.reshaped(rows, cols);
}

/// Largest singular value by power iteration on AᵀA.
double sigma_max(const Mat &a, double tol = 1e-8, int max_iters = 1000);

/// Log-determinant of a symmetric positive definite matrix; throws if the
/// Cholesky factorization fails.
double logdet_spd(const Mat &a);

/// Inverse of a symmetric positive definite matrix, symmetrized.
Mat inverse_spd(const Mat &a);

double nuclear_norm(const Mat &a);

} // namespace gbl

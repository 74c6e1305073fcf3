#include "gbl/linalg.hpp"

#include <cmath>
#include <stdexcept>

namespace gbl {

double sigma_max(const Mat &a, double tol, int max_iters) {
    if (a.size() == 0)
        return 0.0;
    const Mat gram = a.transpose() * a;
    // Deterministic start with every coordinate excited.
    Vec v = Vec::LinSpaced(gram.cols(), 1.0, 2.0).normalized();
    double lambda = 0.0;
    for (int it = 0; it < max_iters; ++it) {
        Vec w = gram * v;
        const double norm = w.norm();
        if (norm == 0.0)
            return 0.0;
        w /= norm;
        const double next = w.dot(gram * w);
        const bool done = std::abs(next - lambda) <= tol * std::max(1.0, std::abs(next));
        lambda = next;
        v = std::move(w);
        if (done)
            break;
    }
    return std::sqrt(std::max(lambda, 0.0));
}

double logdet_spd(const Mat &a) {
    Eigen::LLT<Mat> llt(a);
    if (llt.info() != Eigen::Success)
        throw std::runtime_error("logdet_spd: matrix is not positive definite");
    return 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
}

Mat inverse_spd(const Mat &a) {
    Eigen::LLT<Mat> llt(a);
    if (llt.info() != Eigen::Success)
        throw std::runtime_error("inverse_spd: matrix is not positive definite");
    Mat inv = llt.solve(Mat::Identity(a.rows(), a.cols()));
    return 0.5 * (inv + inv.transpose());
}

double nuclear_norm(const Mat &a) {
    if (a.size() == 0)
        return 0.0;
    return Eigen::JacobiSVD<Mat>(a).singularValues().sum();
}

} // namespace gbl

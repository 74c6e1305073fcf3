#include "gbl/stage1.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace gbl {

double psi(double x) {
    if (x >= 0.0)
        return std::log1p(x + 0.5 * x * x);
    return -std::log1p(-x + 0.5 * x * x);
}

Mat psi_nu(const Mat &a, double nu) {
    if (!(nu > 0.0))
        throw InvalidParameter("psi_nu: nu must be positive");
    const Eigen::Index d1 = a.rows();
    const Eigen::Index d2 = a.cols();
    Mat dilation = Mat::Zero(d1 + d2, d1 + d2);
    dilation.topRightCorner(d1, d2) = nu * a;
    dilation.bottomLeftCorner(d2, d1) = nu * a.transpose();
    Eigen::SelfAdjointEigenSolver<Mat> eig(dilation);
    const Vec shrunk = eig.eigenvalues().unaryExpr([](double v) { return psi(v); });
    const Mat &h = eig.eigenvectors();
    const Mat full = h * shrunk.asDiagonal() * h.transpose();
    return full.topRightCorner(d1, d2) / nu;
}

TruncatedMoment truncated_moment(std::span<const Mat> actions, std::span<const double> rewards,
                                 const ExplorationScore &score, double nu) {
    if (actions.size() != rewards.size())
        throw InvalidParameter("truncated_moment: actions and rewards differ in length");
    if (actions.empty())
        throw InvalidParameter("truncated_moment: no exploration samples");
    TruncatedMoment m;
    m.nu = nu;
    m.t1 = actions.size();
    m.mbar = Mat::Zero(actions.front().rows(), actions.front().cols());
    for (std::size_t i = 0; i < actions.size(); ++i)
        m.mbar += psi_nu(rewards[i] * score.apply(actions[i]), nu);
    m.mbar /= static_cast<double>(actions.size());
    return m;
}

NuBeta default_nu_beta(std::size_t d1, std::size_t d2, std::size_t t1, double gamma, double omega,
                       double r_max, double delta, double zeta) {
    if (!(delta > 0.0 && delta < 1.0))
        throw InvalidParameter("default_nu_beta: delta must lie in (0, 1)");
    if (t1 == 0 || d1 == 0 || d2 == 0 || !(gamma > 0.0))
        throw InvalidParameter("default_nu_beta: sizes and gamma must be positive");
    const double dd1 = static_cast<double>(d1);
    const double dd2 = static_cast<double>(d2);
    const double tt = static_cast<double>(t1);
    const double spread = 4.0 * omega * omega + r_max * r_max;
    const double log_term = std::log(2.0 * (dd1 + dd2) / delta);
    NuBeta out;
    out.nu = std::sqrt(2.0 * log_term / (spread * gamma * tt * std::max(dd1, dd2)));
    out.beta = 4.0 * zeta * std::sqrt(2.0 * spread * gamma * dd1 * dd2 * log_term / tt);
    return out;
}

Mat svt(const Mat &m, double threshold) {
    if (!(threshold >= 0.0))
        throw InvalidParameter("svt: threshold must be non-negative");
    if (threshold == 0.0)
        return m;
    Eigen::JacobiSVD<Mat> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vec s = (svd.singularValues().array() - threshold).max(0.0);
    return svd.matrixU() * s.asDiagonal() * svd.matrixV().transpose();
}

double stage1_objective(const Mat &theta, const Mat &mbar, const LaplacianKernel &kernel, double lambda) {
    double value = (theta - mbar).squaredNorm();
    if (lambda != 0.0)
        value += lambda * nuclear_norm(theta);
    if (kernel.K.size() != 0)
        value += kernel.quad_form(vec(theta));
    return value;
}

Stage1Result estimate_theta_stage1(const TruncatedMoment &moment, const LaplacianKernel &kernel,
                                   const Stage1Config &cfg) {
    const Mat &mbar = moment.mbar;
    const auto dim = mbar.size();
    if (kernel.K.rows() != dim || kernel.K.cols() != dim)
        throw InvalidParameter("estimate_theta_stage1: kernel is " + std::to_string(kernel.K.rows()) +
                               "x" + std::to_string(kernel.K.cols()) + " for a " +
                               std::to_string(mbar.rows()) + "x" + std::to_string(mbar.cols()) + " parameter");
    if (!(cfg.lambda >= 0.0) || cfg.lambda > 1.0)
        throw InvalidParameter("estimate_theta_stage1: lambda must lie in [0, 1]");
    if (cfg.rank < 1)
        throw InvalidParameter("estimate_theta_stage1: rank must be at least 1");

    Stage1Result result;
    const double n_actions = static_cast<double>(kernel.L.rows());
    if (cfg.lambda > 0.0 && cfg.alpha > 0.0 && n_actions >= 2 &&
        kernel.alpha > alpha_max(cfg.lambda, kernel.a_mu, kernel.L.rows()))
        result.warnings.push_back("alpha=" + std::to_string(kernel.alpha) +
                                  " exceeds the admissible bound " +
                                  std::to_string(alpha_max(cfg.lambda, kernel.a_mu, kernel.L.rows())));

    const double lipschitz = 2.0 * (1.0 + sigma_max(kernel.K));
    const double step = 1.0 / lipschitz;
    const Eigen::Index rows = mbar.rows();
    const Eigen::Index cols = mbar.cols();

    Mat theta = mbar;
    double obj = stage1_objective(theta, mbar, kernel, cfg.lambda);
    result.objective.push_back(obj);
    Mat best = theta;
    double best_obj = obj;

    for (int it = 0; it < cfg.max_iters; ++it) {
        const Vec kv = kernel.K * vec(theta);
        const Mat grad = 2.0 * (theta - mbar) + 2.0 * unvec(kv, rows, cols);
        Mat next = svt(theta - step * grad, cfg.lambda * step);
        const double next_obj = stage1_objective(next, mbar, kernel, cfg.lambda);
        result.iterations = it + 1;
        const double decrease = obj - next_obj;
        const double moved = (next - theta).norm();
        theta = std::move(next);
        obj = next_obj;
        result.objective.push_back(obj);
        if (obj < best_obj) {
            best_obj = obj;
            best = theta;
        }
        // The objective alone cannot resolve iterate changes below ~1e-8
        // (its decrease is quadratic in the step), so the step must settle too.
        if (decrease / std::max(1.0, std::abs(obj)) < cfg.tol_rel_obj &&
            moved <= cfg.tol_step * std::max(1.0, theta.norm())) {
            result.converged = true;
            break;
        }
    }
    if (!result.converged)
        result.warnings.push_back("stage-1 solver hit max_iters=" + std::to_string(cfg.max_iters) +
                                  " before the objective settled");
    result.theta = result.converged ? std::move(theta) : std::move(best);
    return result;
}

std::vector<std::size_t> block_permutation(std::size_t d1, std::size_t d2, std::size_t r) {
    std::vector<std::size_t> perm;
    perm.reserve(d1 * d2);
    auto push_block = [&](std::size_t r0, std::size_t r1, std::size_t c0, std::size_t c1) {
        for (std::size_t c = c0; c < c1; ++c)
            for (std::size_t row = r0; row < r1; ++row)
                perm.push_back(row + c * d1);
    };
    push_block(0, r, 0, r);
    push_block(r, d1, 0, r);
    push_block(0, r, r, d2);
    push_block(r, d1, r, d2);
    return perm;
}

SubspaceTransform split_and_transform(const Mat &theta_hat, std::size_t r) {
    const auto d1 = static_cast<std::size_t>(theta_hat.rows());
    const auto d2 = static_cast<std::size_t>(theta_hat.cols());
    if (r < 1 || r > std::min(d1, d2))
        throw InvalidParameter("split_and_transform: rank must lie in [1, min(d1, d2)]");
    Eigen::JacobiSVD<Mat> svd(theta_hat, Eigen::ComputeFullU | Eigen::ComputeFullV);
    SubspaceTransform tr;
    tr.d1 = d1;
    tr.d2 = d2;
    tr.rank = r;
    tr.k = (d1 + d2 - r) * r;
    tr.u_full = svd.matrixU();
    tr.v_full = svd.matrixV();
    tr.singular_values = svd.singularValues();
    tr.perm = block_permutation(d1, d2, r);
    if (r < std::min(d1, d2)) {
        const auto ri = static_cast<Eigen::Index>(r);
        tr.degenerate = std::abs(tr.singular_values(ri - 1) - tr.singular_values(ri)) <= 1e-12;
    }
    return tr;
}

Vec rotate_and_rearrange(const Mat &x, const SubspaceTransform &tr) {
    if (static_cast<std::size_t>(x.rows()) != tr.d1 || static_cast<std::size_t>(x.cols()) != tr.d2)
        throw InvalidParameter("rotate_and_rearrange: shape mismatch");
    const Vec rotated = vec(tr.u_full.transpose() * x * tr.v_full);
    Vec out(rotated.size());
    for (std::size_t m = 0; m < tr.perm.size(); ++m)
        out(static_cast<Eigen::Index>(m)) = rotated(static_cast<Eigen::Index>(tr.perm[m]));
    return out;
}

Mat restore(const Vec &v, const SubspaceTransform &tr) {
    Vec rotated(v.size());
    for (std::size_t m = 0; m < tr.perm.size(); ++m)
        rotated(static_cast<Eigen::Index>(tr.perm[m])) = v(static_cast<Eigen::Index>(m));
    const Mat xr = unvec(rotated, static_cast<Eigen::Index>(tr.d1), static_cast<Eigen::Index>(tr.d2));
    return tr.u_full * xr * tr.v_full.transpose();
}

Mat transform_stack(const Mat &stack, const SubspaceTransform &tr) {
    Mat out(stack.rows(), stack.cols());
    const auto d1 = static_cast<Eigen::Index>(tr.d1);
    const auto d2 = static_cast<Eigen::Index>(tr.d2);
    for (Eigen::Index i = 0; i < stack.rows(); ++i)
        out.row(i) = rotate_and_rearrange(unvec(stack.row(i).transpose(), d1, d2), tr).transpose();
    return out;
}

double tail_norm(const Mat &theta_star, const SubspaceTransform &tr) {
    const Vec t = rotate_and_rearrange(theta_star, tr);
    return t.tail(t.size() - static_cast<Eigen::Index>(tr.k)).norm();
}

double subspace_misalignment(const TrueParameter &tp, const SubspaceTransform &tr) {
    return (tr.u_perp().transpose() * tp.U).norm() * (tr.v_perp().transpose() * tp.V).norm();
}

double tau_constant(double omega, double r_max) { return 36.0 * (4.0 * omega * omega + r_max * r_max); }

double tau_bound(const SubspaceTransform &tr, const TauInputs &in, std::optional<double> fallback) {
    const double c_r = tr.singular_values(static_cast<Eigen::Index>(tr.rank) - 1);
    if (c_r < 1e-10) {
        if (fallback)
            return *fallback;
        throw InvalidParameter("tau_bound: r-th singular value of the stage-1 estimate vanishes and no "
                               "tau override is configured");
    }
    const double d1 = static_cast<double>(tr.d1);
    const double d2 = static_cast<double>(tr.d2);
    const double value = tau_constant(in.omega, in.r_max) * in.zeta * in.zeta * d1 * d2 * in.gamma *
                         static_cast<double>(tr.rank) * std::log(2.0 * (d1 + d2) / in.delta) /
                         (static_cast<double>(in.t1) * c_r * c_r);
    return std::clamp(value, 1e-8, 1.0);
}

} // namespace gbl

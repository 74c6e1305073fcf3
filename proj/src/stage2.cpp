#include "gbl/stage2.hpp"

#include <cmath>
#include <limits>

namespace gbl {

Vec PenaltySpec::lambda_diagonal() const {
    const Eigen::Index d = dim();
    Vec diag = Vec::Constant(d, lambda_perp);
    diag.head(std::min<Eigen::Index>(static_cast<Eigen::Index>(k), d)).setConstant(lambda2);
    return diag;
}

Mat PenaltySpec::matrix() const {
    Mat m = kernel.K;
    m.diagonal() += lambda_diagonal();
    return m;
}

double lambda_perp_default(double c_mu, double horizon, std::size_t k, double lambda2) {
    if (!(c_mu > 0.0 && horizon > 0.0 && lambda2 > 0.0) || k == 0)
        throw InvalidParameter("lambda_perp_default: arguments must be positive");
    const double ct = c_mu * horizon;
    return ct / (static_cast<double>(k) * std::log1p(ct / lambda2));
}

Eigen::Index History::new_group(const Vec &x) {
    if (groups_ == group_x_.rows()) {
        const Eigen::Index cap = std::max<Eigen::Index>(16, 2 * groups_);
        group_x_.conservativeResize(cap, x.size());
        group_n_.conservativeResize(cap);
        group_s_.conservativeResize(cap);
    }
    group_x_.row(groups_) = x.transpose();
    group_n_(groups_) = 0.0;
    group_s_(groups_) = 0.0;
    return groups_++;
}

void History::add(const Vec &x, double y, std::size_t key) {
    if (!features_.empty() && x.size() != features_.front().size())
        throw InvalidParameter("History::add: feature dimension changed");
    features_.push_back(x);
    rewards_.push_back(y);
    Eigen::Index g = 0;
    if (key == kNoKey) {
        g = new_group(x);
    } else {
        if (key >= key_to_group_.size())
            key_to_group_.resize(key + 1, kNoKey);
        if (key_to_group_[key] == kNoKey)
            key_to_group_[key] = static_cast<std::size_t>(new_group(x));
        g = static_cast<Eigen::Index>(key_to_group_[key]);
    }
    group_n_(g) += 1.0;
    group_s_(g) += y;
}

void DesignState::refactor() {
    Vinv = inverse_spd(V);
    logdetV = logdet_spd(V);
    updates_since_refactor = 0;
}

DesignState init_design(const PenaltySpec &penalty, double c_mu, const std::vector<ExplorationRecord> &exploration) {
    if (!(c_mu > 0.0))
        throw InvalidParameter("init_design: c_mu must be positive");
    if (!(penalty.lambda2 > 0.0 && penalty.lambda_perp > 0.0))
        throw InvalidParameter("init_design: lambda2 and lambda_perp must be positive");
    DesignState s;
    const Mat v0 = penalty.matrix() / c_mu;
    Eigen::LLT<Mat> llt(v0);
    if (llt.info() != Eigen::Success)
        throw InvalidParameter("init_design: (Λ + K)/c_μ is not positive definite");
    s.logdetV0 = logdet_spd(v0);
    s.V = v0;
    for (const auto &rec : exploration) {
        if (rec.x.size() != v0.rows())
            throw InvalidParameter("init_design: exploration feature has the wrong dimension");
        s.V.noalias() += rec.x * rec.x.transpose();
        s.history.add(rec.x, rec.y, rec.key);
    }
    s.refactor();
    s.theta_hat = Vec::Zero(v0.rows());
    return s;
}

void update_design(DesignState &state, const Vec &x, double y, std::size_t key) {
    if (x.size() != state.dim())
        throw InvalidParameter("update_design: feature has the wrong dimension");
    state.history.add(x, y, key);
    if (x.isZero(0.0))
        return;
    state.V.noalias() += x * x.transpose();
    const Vec vx = state.Vinv * x;
    const double denom = 1.0 + x.dot(vx);
    ++state.updates_since_refactor;
    if (!(denom > 0.0) || !std::isfinite(denom) || state.updates_since_refactor >= state.refactor_every) {
        state.refactor();
        return;
    }
    state.Vinv.noalias() -= (vx * vx.transpose()) / denom;
    state.logdetV += std::log(denom);
}

namespace {

// Per-group linear predictors z_g = ⟨x_g, θ⟩.
Vec predictors(const History &h, const Vec &theta) { return h.group_features() * theta; }

} // namespace

double glm_objective(const History &h, const Mat &penalty_matrix, const LinkFamily &family, const Vec &theta) {
    double value = 0.5 * theta.dot(penalty_matrix * theta);
    if (h.empty())
        return value;
    const Vec z = predictors(h, theta);
    const auto n = h.group_counts();
    const auto s = h.group_reward_sums();
    for (Eigen::Index g = 0; g < z.size(); ++g)
        value += n(g) * family.b(z(g)) - s(g) * z(g);
    return value;
}

Vec glm_gradient(const History &h, const Mat &penalty_matrix, const LinkFamily &family, const Vec &theta) {
    Vec grad = penalty_matrix * theta;
    if (h.empty())
        return grad;
    const Vec z = predictors(h, theta);
    Vec resid(z.size());
    for (Eigen::Index g = 0; g < z.size(); ++g)
        resid(g) = h.group_counts()(g) * family.mu(z(g)) - h.group_reward_sums()(g);
    grad.noalias() += h.group_features().transpose() * resid;
    return grad;
}

GlmFit fit_glm(const History &h, const Mat &penalty_matrix, const LinkFamily &family, const Vec &start,
               double grad_tol, int max_iters) {
    GlmFit fit;
    fit.theta = start.size() == penalty_matrix.rows() ? start : Vec::Zero(penalty_matrix.rows());
    double obj = glm_objective(h, penalty_matrix, family, fit.theta);
    Vec grad = glm_gradient(h, penalty_matrix, family, fit.theta);
    fit.grad_norm = grad.norm();
    for (int it = 0; it < max_iters; ++it) {
        if (fit.grad_norm < grad_tol) {
            fit.converged = true;
            break;
        }
        Mat hess = penalty_matrix;
        if (!h.empty()) {
            const Vec z = predictors(h, fit.theta);
            Vec w(z.size());
            for (Eigen::Index g = 0; g < z.size(); ++g)
                w(g) = h.group_counts()(g) * family.mu_prime(z(g));
            const auto x = h.group_features();
            hess.noalias() += x.transpose() * w.asDiagonal() * x;
        }
        const Vec direction = hess.llt().solve(grad);
        // Once the predicted decrease is below the objective's rounding
        // level, comparisons are noise; take the full Newton step.
        if (0.5 * grad.dot(direction) <= 1e-13 * std::max(1.0, std::abs(obj))) {
            fit.theta -= direction;
            obj = glm_objective(h, penalty_matrix, family, fit.theta);
            fit.iterations = it + 1;
            grad = glm_gradient(h, penalty_matrix, family, fit.theta);
            fit.grad_norm = grad.norm();
            continue;
        }
        double scale = 1.0;
        bool accepted = false;
        for (int halving = 0; halving <= 30; ++halving) {
            const Vec trial = fit.theta - scale * direction;
            const double trial_obj = glm_objective(h, penalty_matrix, family, trial);
            if (trial_obj <= obj) {
                fit.theta = trial;
                obj = trial_obj;
                accepted = true;
                break;
            }
            scale *= 0.5;
        }
        fit.iterations = it + 1;
        grad = glm_gradient(h, penalty_matrix, family, fit.theta);
        fit.grad_norm = grad.norm();
        if (!accepted)
            break;
    }
    if (fit.grad_norm < grad_tol)
        fit.converged = true;
    return fit;
}

GlmFit fit_glm_penalized(DesignState &state, const PenaltySpec &penalty, const LinkFamily &family) {
    GlmFit fit = fit_glm(state.history, penalty.matrix(), family, state.theta_hat);
    state.theta_hat = fit.theta;
    return fit;
}

double noise_radius(const DesignState &state, double omega, double delta) {
    if (!(delta > 0.0 && delta <= 1.0))
        throw InvalidParameter("confidence radius: delta must lie in (0, 1]");
    const double inside = state.logdetV - state.logdetV0 + 2.0 * std::log(1.0 / delta);
    return omega * std::sqrt(std::max(inside, 0.0));
}

double confidence_radius(const DesignState &state, const PenaltySpec &penalty, double c_mu, double tau,
                         double omega, double delta) {
    return noise_radius(state, omega, delta) +
           std::sqrt(c_mu) * (std::sqrt(penalty.lambda2) + std::sqrt(penalty.lambda_perp) * tau + 1.0);
}

std::size_t select_ucb(const Mat &actions, const DesignState &state, double e_t, const LinkFamily &family) {
    if (actions.rows() == 0)
        throw InvalidParameter("select_ucb: empty action set");
    const double scale = family.k_mu / family.c_mu * e_t;
    const Vec z = actions * state.theta_hat;
    // Row-wise xᵀ V⁻¹ x.
    const Vec quad = (actions * state.Vinv).cwiseProduct(actions).rowwise().sum();
    std::size_t best = 0;
    double best_value = -std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < actions.rows(); ++i) {
        const double value = family.mu(z(i)) + scale * std::sqrt(std::max(quad(i), 0.0));
        if (value > best_value) {
            best_value = value;
            best = static_cast<std::size_t>(i);
        }
    }
    return best;
}

} // namespace gbl

#pragma once

// Penalized GLM-UCB machinery shared by every second-stage policy.

#include "gbl/envs.hpp"
#include "gbl/graphs.hpp"
#include "gbl/linalg.hpp"

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace gbl {

/// Λ = diag(λ₂ × k, λ⊥ × (d − k)) plus a Laplacian kernel in the same
/// coordinates as θ.
struct PenaltySpec {
    double lambda2 = 1.0;
    double lambda_perp = 1.0;
    std::size_t k = 0;
    LaplacianKernel kernel;

    Eigen::Index dim() const { return kernel.K.rows(); }
    Vec lambda_diagonal() const;
    /// Λ + K
    Mat matrix() const;
};

/// λ⊥ = c_μ T / (k log(1 + c_μ T / λ₂)).
double lambda_perp_default(double c_mu, double horizon, std::size_t k, double lambda2);

/// Observations for the GLM fit. Rows sharing a key (an action index) are
/// pooled into counts and reward sums; the fit only sees the pooled form,
/// which leaves the likelihood unchanged.
class History {
  public:
    static constexpr std::size_t kNoKey = static_cast<std::size_t>(-1);

    void add(const Vec &x, double y, std::size_t key = kNoKey);
    std::size_t size() const { return rewards_.size(); }
    bool empty() const { return rewards_.empty(); }

    const std::vector<Vec> &features() const { return features_; }
    const std::vector<double> &rewards() const { return rewards_; }

    /// Pooled design: one row per distinct key (or per unkeyed observation).
    auto group_features() const { return group_x_.topRows(groups_); }
    auto group_counts() const { return group_n_.head(groups_); }
    auto group_reward_sums() const { return group_s_.head(groups_); }

  private:
    std::vector<Vec> features_;
    std::vector<double> rewards_;
    std::vector<std::size_t> key_to_group_;
    Mat group_x_;
    Vec group_n_;
    Vec group_s_;
    Eigen::Index groups_ = 0;

    Eigen::Index new_group(const Vec &x);
};

/// Running V_t(c_μ), its inverse and log-determinants.
struct DesignState {
    Mat V;
    Mat Vinv;
    double logdetV = 0.0;
    double logdetV0 = 0.0;
    History history;
    Vec theta_hat;
    std::size_t updates_since_refactor = 0;
    std::size_t refactor_every = 256;

    Eigen::Index dim() const { return V.rows(); }
    /// ‖x‖_{V⁻¹}
    double inverse_norm(const Vec &x) const { return std::sqrt(std::max(x.dot(Vinv * x), 0.0)); }
    /// Recomputes Vinv and logdetV from V.
    void refactor();
};

struct ExplorationRecord {
    Vec x;
    double y = 0.0;
    std::size_t key = History::kNoKey;
};

/// V₀ = (Λ + K)/c_μ; V₁ = V₀ + Σ x xᵀ over the exploration data.
DesignState init_design(const PenaltySpec &penalty, double c_mu, const std::vector<ExplorationRecord> &exploration);

/// V += x xᵀ with Sherman–Morrison on the inverse and the determinant lemma
/// on the log-determinant; (x, y) joins the history.
void update_design(DesignState &state, const Vec &x, double y, std::size_t key = History::kNoKey);

struct GlmFit {
    Vec theta;
    int iterations = 0;
    double grad_norm = 0.0;
    bool converged = false;
};

/// Σ[b(⟨x,θ⟩) − y⟨x,θ⟩] + ½ θᵀ(Λ + K)θ.
double glm_objective(const History &h, const Mat &penalty_matrix, const LinkFamily &family, const Vec &theta);
Vec glm_gradient(const History &h, const Mat &penalty_matrix, const LinkFamily &family, const Vec &theta);

/// Damped Newton on glm_objective warm-started from `start`.
GlmFit fit_glm(const History &h, const Mat &penalty_matrix, const LinkFamily &family, const Vec &start,
               double grad_tol = 1e-8, int max_iters = 50);

/// Fits from the state's previous coefficients and stores the result there.
GlmFit fit_glm_penalized(DesignState &state, const PenaltySpec &penalty, const LinkFamily &family);

/// ω sqrt(log|V_t|/|V₀| + 2 log(1/δ)).
double noise_radius(const DesignState &state, double omega, double delta);

/// e_t = ω sqrt(log|V_t|/|V₀| + 2 log(1/δ)) + sqrt(c_μ)(sqrt(λ₂) + sqrt(λ⊥) τ + 1).
double confidence_radius(const DesignState &state, const PenaltySpec &penalty, double c_mu, double tau,
                         double omega, double delta);

/// argmax_i μ(⟨θ̂, x_i⟩) + (k_μ/c_μ) e_t ‖x_i‖_{V⁻¹}; ties go to the lower index.
std::size_t select_ucb(const Mat &actions, const DesignState &state, double e_t, const LinkFamily &family);

} // namespace gbl

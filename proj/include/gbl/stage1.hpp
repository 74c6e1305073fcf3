#pragma once

// Subspace estimation: truncated moment, nuclear-norm + Laplacian penalized
// least squares, and the rotate/rearrange transform into the almost
// low-dimensional coordinates.

#include "gbl/envs.hpp"
#include "gbl/graphs.hpp"
#include "gbl/linalg.hpp"

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace gbl {

/// ψ(x) = sign(x) log(1 + |x| + x²/2). Odd, increasing, |ψ(x)| <= |x|.
double psi(double x);

/// Spectral truncation of a rectangular matrix via its symmetric dilation
/// [[0, νA], [νAᵀ, 0]]: ψ is applied to the eigenvalues, the upper-right
/// block is extracted and divided by ν.
Mat psi_nu(const Mat &a, double nu);

struct TruncatedMoment {
    /// (1/T₁) Σ ψ_ν(y_i S(X_i))
    Mat mbar;
    double nu = 0.0;
    std::size_t t1 = 0;
};

TruncatedMoment truncated_moment(std::span<const Mat> actions, std::span<const double> rewards,
                                 const ExplorationScore &score, double nu);

struct NuBeta {
    double nu = 0.0;
    double beta = 0.0;
};

/// Theory-default truncation scale ν and atomic-norm weight β (β is reported
/// only; the solver uses λ and α directly).
NuBeta default_nu_beta(std::size_t d1, std::size_t d2, std::size_t t1, double gamma, double omega,
                       double r_max, double delta, double zeta = 1.0);

/// Singular value soft-thresholding, the proximal map of t‖·‖_*.
Mat svt(const Mat &m, double threshold);

struct Stage1Config {
    double lambda = 0.1;
    double alpha = 0.0;
    std::size_t rank = 1;
    std::size_t t1 = 0;
    int max_iters = 500;
    double tol_rel_obj = 1e-8;
    /// Largest iterate change (relative to max(1, ‖Θ‖)) accepted at convergence.
    double tol_step = 1e-10;
};

struct Stage1Result {
    Mat theta;
    /// Objective after every accepted iterate, starting from the initial point.
    std::vector<double> objective;
    int iterations = 0;
    bool converged = false;
    std::vector<std::string> warnings;
};

/// ‖Θ − M‖²_F + λ‖Θ‖_* + vec(Θ)ᵀ K vec(Θ).
double stage1_objective(const Mat &theta, const Mat &mbar, const LaplacianKernel &kernel, double lambda);

/// Proximal gradient on stage1_objective with step 1/(2(1 + σ_max(K))).
/// Starts from M̄; stops once the relative objective decrease is below
/// tol_rel_obj and the iterate moved less than tol_step, or after max_iters
/// iterations (flagged as not converged, best iterate returned).
Stage1Result estimate_theta_stage1(const TruncatedMoment &moment, const LaplacianKernel &kernel,
                                   const Stage1Config &cfg);

/// Rotation (Û, Û⊥), (V̂, V̂⊥) from the full SVD of the stage-1 estimate and
/// the block rearrangement placing the k = (d₁ + d₂ − r) r informative
/// coordinates first.
struct SubspaceTransform {
    std::size_t d1 = 0;
    std::size_t d2 = 0;
    std::size_t rank = 0;
    std::size_t k = 0;
    Mat u_full;
    Mat v_full;
    /// Rearranged position m holds entry perm[m] of vec(X′).
    std::vector<std::size_t> perm;
    Vec singular_values;
    double tau = 0.0;
    bool degenerate = false;

    auto u_hat() const { return u_full.leftCols(static_cast<Eigen::Index>(rank)); }
    auto u_perp() const { return u_full.rightCols(static_cast<Eigen::Index>(d1 - rank)); }
    auto v_hat() const { return v_full.leftCols(static_cast<Eigen::Index>(rank)); }
    auto v_perp() const { return v_full.rightCols(static_cast<Eigen::Index>(d2 - rank)); }
};

/// Permutation for the block order (1:r,1:r), (r+1:d₁,1:r), (1:r,r+1:d₂),
/// (r+1:d₁,r+1:d₂), each block vectorized column-major.
std::vector<std::size_t> block_permutation(std::size_t d1, std::size_t d2, std::size_t r);

SubspaceTransform split_and_transform(const Mat &theta_hat, std::size_t r);

/// π(vec((Û,Û⊥)ᵀ X (V̂,V̂⊥))). Applies equally to actions and parameters.
Vec rotate_and_rearrange(const Mat &x, const SubspaceTransform &tr);

/// Inverse of rotate_and_rearrange.
Mat restore(const Vec &v, const SubspaceTransform &tr);

/// Row-wise rotate_and_rearrange of an n × d₁d₂ stack of vectorized actions.
Mat transform_stack(const Mat &stack, const SubspaceTransform &tr);

/// ‖θ*_{k+1:d₁d₂}‖ of a true parameter in transformed coordinates.
double tail_norm(const Mat &theta_star, const SubspaceTransform &tr);

/// ‖Û⊥ᵀU*‖_F · ‖V̂⊥ᵀV*‖_F.
double subspace_misalignment(const TrueParameter &tp, const SubspaceTransform &tr);

struct TauInputs {
    double omega = 0.01;
    double r_max = 1.0;
    double gamma = 1.0;
    double delta = 0.01;
    double zeta = 1.0;
    std::size_t t1 = 1;
};

/// c₁ = 36 (4ω² + r_max²).
double tau_constant(double omega, double r_max);

/// τ = c₁ ζ² d₁d₂ γ r log(2(d₁+d₂)/δ) / (T₁ ĉ_r²) with ĉ_r the r-th singular
/// value of the stage-1 estimate, clamped to [1e-8, 1]. Falls back to
/// `fallback` when ĉ_r < 1e-10 and throws if none is given.
double tau_bound(const SubspaceTransform &tr, const TauInputs &in,
                 std::optional<double> fallback = std::nullopt);

} // namespace gbl

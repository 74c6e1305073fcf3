#pragma once

#include "gbl/graphs.hpp"
#include "gbl/linalg.hpp"
#include "gbl/rng.hpp"

#include <cstddef>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace gbl {

enum class FamilyKind { linear, logistic, poisson };

/// Canonical exponential-family reward model y = mu(<X, Θ>) + noise.
///
/// c_mu and k_mu bound mu' on [-1, 1]; a_mu scales the Laplacian penalty
/// (default k_mu²); r_max = |mu(0)| + k_mu. omega is the sub-Gaussian noise
/// scale used by the confidence widths.
struct LinkFamily {
    FamilyKind kind = FamilyKind::linear;
    std::string name;
    double omega = 0.0;
    double phi = 1.0;
    double c_mu = 1.0;
    double k_mu = 1.0;
    double a_mu = 1.0;
    double r_max = 1.0;

    double b(double z) const;
    double mu(double z) const;
    double mu_prime(double z) const;
    /// Draws a reward with linear predictor z.
    double sample(double z, Rng &rng) const;
};

LinkFamily family_linear(double omega);
LinkFamily family_logistic();
LinkFamily family_poisson();
/// "linear" | "logistic" | "poisson"; omega applies to the linear family.
LinkFamily family_by_name(std::string_view name, double omega = 0.01);

/// Rank-r true parameter with its truncated SVD factors.
struct TrueParameter {
    Mat theta;
    std::size_t rank = 0;
    Mat U;
    Vec S;
    Mat V;
    double c_r = 0.0;
};

/// Builds the factorization record for an arbitrary matrix with the given
/// rank (singular values past `rank` are reported, not removed).
TrueParameter factor_true_parameter(const Mat &theta, std::size_t rank);

/// Standard-normal score S(x) = x, entrywise.
Mat score_standard_normal(const Mat &x);

/// Gaussian score for the exploration density that samples actions uniformly
/// from a finite set: the set is matched to N(0, Σ̂) with Σ̂ = X̃ᵀX̃ / n and
/// S(x) = Σ̂⁺ x. For Σ̂ = I this is the standard-normal score.
struct ExplorationScore {
    Mat precision;
    /// Bound on E[S_ij²], the largest diagonal entry of the precision.
    double gamma = 1.0;

    Mat apply(const Mat &x) const;
    static ExplorationScore standard_normal(Eigen::Index dim);
    static ExplorationScore uniform_over(const Mat &action_stack);
};

struct BanditInstance {
    std::size_t d1 = 0;
    std::size_t d2 = 0;
    std::vector<Mat> actions;
    /// n × d1d2, row i = vec(actions[i]).
    Mat stack;
    TrueParameter true_param;
    Graph graph;
    LinkFamily family;
    /// Exploration score density used by stage 1.
    ExplorationScore score;
    double sampling_gamma = 1.0;
    Vec expected;
    std::size_t optimal_index = 0;

    std::size_t size() const { return actions.size(); }
    double linear_predictor(std::size_t i) const;
};

/// Assembles an instance, stacking the actions and caching expected rewards.
/// Throws InvalidParameter if any action has Frobenius norm above 1.
BanditInstance make_instance(std::vector<Mat> actions, TrueParameter true_param, Graph graph,
                             LinkFamily family);

/// n Gaussian matrices scaled to unit Frobenius norm.
std::vector<Mat> make_actions_gaussian(std::size_t n, std::size_t d1, std::size_t d2, Rng &rng);

/// n1·n2 normalized outer products p_i q_jᵀ; action (i, j) sits at i·n2 + j.
std::vector<Mat> make_actions_outer(std::size_t n1, std::size_t n2, std::size_t d1, std::size_t d2,
                                    Rng &rng);

/// Θ* = A M Bᵀ normalized to unit Frobenius norm, M = U Vᵀ Gaussian rank r,
/// A and B the (eps-floored) inverse square roots of the row and column graph
/// Laplacians.
TrueParameter make_theta(std::size_t d1, std::size_t d2, std::size_t r, const Graph &row_graph,
                         const Graph &col_graph, double eps, Rng &rng);

double expected_reward(const Mat &x, const BanditInstance &inst);
double sample_reward(const Mat &x, const BanditInstance &inst, Rng &rng);
double instant_regret(std::size_t chosen, const BanditInstance &inst);

class IngestionError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Parses a comma-separated dense numeric table. Empty cells and NA/NaN are
/// missing; they become 0 when `impute_missing` is set and are an error
/// otherwise.
Mat read_matrix_csv(const std::filesystem::path &path, bool skip_header, bool impute_missing);

struct IngestOptions {
    std::string family = "linear";
    double omega = 0.01;
    bool skip_header = false;
    bool impute_missing = false;
    std::size_t knn = 5;
};

/// Reward matrix R = F1 Σ F2ᵀ becomes the instance with Θ* = Σ/‖Σ‖_F and
/// actions F1[i,:]ᵀ F2[j,:] at index i·n2 + j, over a k-NN action graph.
BanditInstance instance_from_reward_matrix(const Mat &r, const IngestOptions &opts);
BanditInstance ingest_reward_matrix(const std::filesystem::path &path, const IngestOptions &opts);

} // namespace gbl

#pragma once

#include "gbl/envs.hpp"
#include "gbl/stage1.hpp"
#include "gbl/stage2.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace gbl {

enum class PolicyKind { gg_estt, gg_oful, nograph, ucb_glm };

std::string_view policy_name(PolicyKind kind);
/// Throws InvalidParameter for unknown names.
PolicyKind policy_from_name(std::string_view name);

struct PolicyConfig {
    PolicyKind kind = PolicyKind::gg_estt;
    std::size_t horizon = 1000;
    /// Exploration rounds; 0 selects t1_default.
    std::size_t t1 = 0;
    Stage1Config stage1;
    /// Laplacian weight of the stage-2 penalty; unset reuses stage1.alpha.
    std::optional<double> alpha2;
    double lambda2 = 1.0;
    /// 0 selects lambda_perp_default.
    double lambda_perp = 0.0;
    std::optional<double> tau;
    double delta = 0.01;
    double zeta = 1.0;
    /// Overrides the family's a_mu when set.
    std::optional<double> a_mu;
    /// Multiplier on the exploration bonus (1 = theory width).
    double width_scale = 1.0;
    /// ĉ_r used by t1_default before any estimate exists.
    double c_r_prior = 1.0;
    double hit_percentile = 5.0;

    double stage2_alpha() const { return alpha2 ? *alpha2 : stage1.alpha; }
};

struct RunSeeds {
    /// Drives the uniform exploration draws.
    std::uint64_t explore = 1;
    /// Per-round reward noise; round t uses derive_seed(noise, t).
    std::uint64_t noise = 2;
};

struct StepRecord {
    std::size_t t = 0;
    std::size_t action = 0;
    double reward = 0.0;
    double instant_regret = 0.0;
    bool hit = false;
    double elapsed = 0.0;
};

struct RunResult {
    PolicyKind kind = PolicyKind::gg_estt;
    std::vector<StepRecord> records;
    bool complete = true;
    std::string error;
    std::vector<std::string> warnings;
    std::size_t t1 = 0;
    std::size_t k = 0;
    double tau = 0.0;
    double lambda_perp = 0.0;
    /// Stage-1 estimate (empty for policies without a stage 1).
    Mat theta_hat;
};

/// ceil(ζ sqrt(d₁d₂ γ r T)/ĉ_r) clamped to [r(d₁+d₂), T/2].
std::size_t t1_default(std::size_t d1, std::size_t d2, std::size_t r, double gamma, std::size_t horizon,
                       double c_r_hat, double zeta = 1.0);

/// Indices of the top ceil(x% · n) expected rewards, ties to the lower index.
std::vector<std::size_t> top_set(const Vec &expected, double percentile);

RunResult run_gg_estt(const BanditInstance &inst, const PolicyConfig &cfg, const RunSeeds &seeds);
RunResult run_gg_oful(const BanditInstance &inst, const PolicyConfig &cfg, const RunSeeds &seeds);
RunResult run_ablation_nograph(const BanditInstance &inst, const PolicyConfig &cfg, const RunSeeds &seeds);
RunResult run_ucb_glm(const BanditInstance &inst, const PolicyConfig &cfg, const RunSeeds &seeds);

/// Dispatches on cfg.kind.
RunResult run_policy(const BanditInstance &inst, const PolicyConfig &cfg, const RunSeeds &seeds);

// Building blocks exposed for tracing and tests.

struct ExplorationPhase {
    std::vector<std::size_t> actions;
    std::vector<double> rewards;
};

/// T₁ uniform draws from the action set with per-round rewards.
ExplorationPhase explore_uniform(const BanditInstance &inst, std::size_t t1, const RunSeeds &seeds);

/// Reward for the round-t pull of action i under the common noise stream.
double round_reward(const BanditInstance &inst, std::size_t action, std::size_t t, const RunSeeds &seeds);

/// Stage-1 pipeline: truncated moment with theory ν, penalized estimate and
/// transform (τ left at zero).
struct Stage1Outcome {
    TruncatedMoment moment;
    Stage1Result estimate;
    SubspaceTransform transform;
};
Stage1Outcome run_stage1(const BanditInstance &inst, const ExplorationPhase &phase, const PolicyConfig &cfg);

} // namespace gbl

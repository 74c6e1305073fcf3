#include "gbl/policies.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <string>

namespace gbl {

std::string_view policy_name(PolicyKind kind) {
    switch (kind) {
    case PolicyKind::gg_estt:
        return "gg_estt";
    case PolicyKind::gg_oful:
        return "gg_oful";
    case PolicyKind::nograph:
        return "nograph";
    case PolicyKind::ucb_glm:
        return "ucb_glm";
    }
    return "unknown";
}

PolicyKind policy_from_name(std::string_view name) {
    for (auto k : {PolicyKind::gg_estt, PolicyKind::gg_oful, PolicyKind::nograph, PolicyKind::ucb_glm})
        if (policy_name(k) == name)
            return k;
    throw InvalidParameter("unknown policy '" + std::string(name) + "'");
}

std::size_t t1_default(std::size_t d1, std::size_t d2, std::size_t r, double gamma, std::size_t horizon,
                       double c_r_hat, double zeta) {
    if (d1 == 0 || d2 == 0 || r == 0 || horizon == 0 || !(gamma > 0.0) || !(c_r_hat > 0.0) || !(zeta > 0.0))
        throw InvalidParameter("t1_default: inputs must be positive");
    const double raw = std::ceil(zeta *
                                 std::sqrt(static_cast<double>(d1 * d2 * r) * gamma * static_cast<double>(horizon)) /
                                 c_r_hat);
    const std::size_t floor_v = r * (d1 + d2);
    const std::size_t ceil_v = horizon / 2;
    auto v = static_cast<std::size_t>(raw);
    v = std::max(v, floor_v);
    // The ceiling wins when the two bounds cross (tiny horizons).
    return std::max<std::size_t>(1, std::min(v, ceil_v));
}

std::vector<std::size_t> top_set(const Vec &expected, double percentile) {
    if (!(percentile > 0.0 && percentile < 100.0))
        throw InvalidParameter("top_set: percentile must lie in (0, 100)");
    const auto n = static_cast<std::size_t>(expected.size());
    const auto m = std::min<std::size_t>(
        n, static_cast<std::size_t>(std::ceil(percentile / 100.0 * static_cast<double>(n) - 1e-12)));
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        return expected(static_cast<Eigen::Index>(a)) > expected(static_cast<Eigen::Index>(b));
    });
    idx.resize(m);
    std::sort(idx.begin(), idx.end());
    return idx;
}

double round_reward(const BanditInstance &inst, std::size_t action, std::size_t t, const RunSeeds &seeds) {
    Rng rng(derive_seed(seeds.noise, static_cast<std::uint64_t>(t)));
    return inst.family.sample(inst.linear_predictor(action), rng);
}

ExplorationPhase explore_uniform(const BanditInstance &inst, std::size_t t1, const RunSeeds &seeds) {
    if (inst.size() == 0)
        throw InvalidParameter("explore_uniform: empty action set");
    Rng rng(seeds.explore);
    std::uniform_int_distribution<std::size_t> pick(0, inst.size() - 1);
    ExplorationPhase phase;
    phase.actions.reserve(t1);
    phase.rewards.reserve(t1);
    for (std::size_t t = 1; t <= t1; ++t) {
        const std::size_t a = pick(rng);
        phase.actions.push_back(a);
        phase.rewards.push_back(round_reward(inst, a, t, seeds));
    }
    return phase;
}

namespace {

double effective_a_mu(const BanditInstance &inst, const PolicyConfig &cfg) {
    return cfg.a_mu ? *cfg.a_mu : inst.family.a_mu;
}

std::size_t resolve_t1(const BanditInstance &inst, const PolicyConfig &cfg) {
    if (cfg.horizon < 2)
        throw InvalidParameter("horizon must be at least 2");
    const std::size_t t1 = cfg.t1 != 0 ? cfg.t1
                                       : t1_default(inst.d1, inst.d2, cfg.stage1.rank, inst.score.gamma,
                                                    cfg.horizon, cfg.c_r_prior, cfg.zeta);
    if (t1 < 1 || t1 > cfg.horizon)
        throw InvalidParameter("t1=" + std::to_string(t1) + " must lie in [1, T=" + std::to_string(cfg.horizon) +
                               "]");
    return t1;
}

/// Records the exploration rounds and prepares the hit set.
struct RunContext {
    const BanditInstance &inst;
    const PolicyConfig &cfg;
    const RunSeeds &seeds;
    std::vector<char> in_top;
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();

    RunContext(const BanditInstance &i, const PolicyConfig &c, const RunSeeds &s)
        : inst(i), cfg(c), seeds(s), in_top(i.size(), 0) {
        for (auto a : top_set(i.expected, c.hit_percentile))
            in_top[a] = 1;
    }

    void record(RunResult &out, std::size_t t, std::size_t action, double reward) const {
        StepRecord rec;
        rec.t = t;
        rec.action = action;
        rec.reward = reward;
        rec.instant_regret = instant_regret(action, inst);
        rec.hit = in_top[action] != 0;
        rec.elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        out.records.push_back(rec);
    }
};

std::vector<ExplorationRecord> exploration_records(const ExplorationPhase &phase, const Mat &features) {
    std::vector<ExplorationRecord> recs;
    recs.reserve(phase.actions.size());
    for (std::size_t i = 0; i < phase.actions.size(); ++i)
        recs.push_back({features.row(static_cast<Eigen::Index>(phase.actions[i])).transpose(), phase.rewards[i],
                        phase.actions[i]});
    return recs;
}

/// Rounds T₁+1..T of penalized GLM-UCB over `features` (one row per action).
void ucb_phase(const RunContext &ctx, RunResult &out, const Mat &features, const PenaltySpec &penalty,
               const ExplorationPhase &phase, double width_constant) {
    const auto &fam = ctx.inst.family;
    DesignState state = init_design(penalty, fam.c_mu, exploration_records(phase, features));
    const Mat pmat = penalty.matrix();
    for (std::size_t t = phase.actions.size() + 1; t <= ctx.cfg.horizon; ++t) {
        const GlmFit fit = fit_glm(state.history, pmat, fam, state.theta_hat);
        state.theta_hat = fit.theta;
        const double e_t = ctx.cfg.width_scale * (noise_radius(state, fam.omega, ctx.cfg.delta) + width_constant);
        const std::size_t a = select_ucb(features, state, e_t, fam);
        const double y = round_reward(ctx.inst, a, t, ctx.seeds);
        ctx.record(out, t, a, y);
        update_design(state, features.row(static_cast<Eigen::Index>(a)).transpose(), y, a);
    }
}

/// Runs `body` after the exploration phase; any exception leaves the records
/// gathered so far and marks the run incomplete.
template <class Body>
RunResult guarded_run(PolicyKind kind, const BanditInstance &inst, const PolicyConfig &cfg,
                      const RunSeeds &seeds, Body body) {
    RunResult out;
    out.kind = kind;
    try {
        const RunContext ctx(inst, cfg, seeds);
        out.t1 = resolve_t1(inst, cfg);
        out.records.reserve(cfg.horizon);
        const ExplorationPhase phase = explore_uniform(inst, out.t1, seeds);
        for (std::size_t t = 1; t <= out.t1; ++t)
            ctx.record(out, t, phase.actions[t - 1], phase.rewards[t - 1]);
        if (out.t1 < cfg.horizon)
            body(ctx, out, phase);
    } catch (const std::exception &e) {
        out.complete = false;
        out.error = e.what();
    }
    if (out.complete && out.records.size() != cfg.horizon) {
        out.complete = false;
        out.error = "run produced " + std::to_string(out.records.size()) + " of " + std::to_string(cfg.horizon) +
                    " rounds";
    }
    return out;
}

RunResult run_two_stage(PolicyKind kind, const BanditInstance &inst, const PolicyConfig &cfg,
                        const RunSeeds &seeds) {
    return guarded_run(kind, inst, cfg, seeds, [&](const RunContext &ctx, RunResult &out,
                                                   const ExplorationPhase &phase) {
        const Stage1Outcome s1 = run_stage1(inst, phase, cfg);
        out.warnings.insert(out.warnings.end(), s1.estimate.warnings.begin(), s1.estimate.warnings.end());
        out.theta_hat = s1.estimate.theta;
        const SubspaceTransform &tr = s1.transform;
        if (tr.degenerate)
            out.warnings.push_back("stage-1 estimate has a repeated r-th singular value; subspace split is "
                                   "not unique");
        out.k = tr.k;

        const auto &fam = inst.family;
        const std::size_t r = tr.rank;
        const Vec &sv = tr.singular_values;
        const bool exact = sv.size() <= static_cast<Eigen::Index>(r) ||
                           sv.tail(sv.size() - static_cast<Eigen::Index>(r)).maxCoeff() < 1e-10;
        if (cfg.tau)
            out.tau = *cfg.tau;
        else if (exact)
            out.tau = 0.0;
        else
            out.tau = tau_bound(tr, TauInputs{fam.omega, fam.r_max, inst.score.gamma, cfg.delta, cfg.zeta, out.t1});

        const Mat features = transform_stack(inst.stack, tr);
        PenaltySpec penalty;
        penalty.lambda2 = cfg.lambda2;
        penalty.k = tr.k;
        penalty.lambda_perp = cfg.lambda_perp > 0.0
                                  ? cfg.lambda_perp
                                  : lambda_perp_default(fam.c_mu, static_cast<double>(cfg.horizon), tr.k, cfg.lambda2);
        out.lambda_perp = penalty.lambda_perp;
        penalty.kernel = quad_kernel(features, laplacian(inst.graph), effective_a_mu(inst, cfg), cfg.stage2_alpha());
        const double width = std::sqrt(fam.c_mu) *
                             (std::sqrt(penalty.lambda2) + std::sqrt(penalty.lambda_perp) * out.tau + 1.0);
        ucb_phase(ctx, out, features, penalty, phase, width);
    });
}

} // namespace

Stage1Outcome run_stage1(const BanditInstance &inst, const ExplorationPhase &phase, const PolicyConfig &cfg) {
    const auto &fam = inst.family;
    std::vector<Mat> xs;
    xs.reserve(phase.actions.size());
    for (auto a : phase.actions)
        xs.push_back(inst.actions[a]);
    const NuBeta nb = default_nu_beta(inst.d1, inst.d2, phase.actions.size(), inst.score.gamma, fam.omega,
                                      fam.r_max, cfg.delta, cfg.zeta);
    Stage1Outcome out;
    out.moment = truncated_moment(xs, phase.rewards, inst.score, nb.nu);
    const LaplacianKernel kernel =
        quad_kernel(inst.stack, laplacian(inst.graph), effective_a_mu(inst, cfg), cfg.stage1.alpha);
    Stage1Config s1 = cfg.stage1;
    s1.t1 = phase.actions.size();
    out.estimate = estimate_theta_stage1(out.moment, kernel, s1);
    out.transform = split_and_transform(out.estimate.theta, s1.rank);
    return out;
}

RunResult run_gg_estt(const BanditInstance &inst, const PolicyConfig &cfg, const RunSeeds &seeds) {
    return run_two_stage(PolicyKind::gg_estt, inst, cfg, seeds);
}

RunResult run_ablation_nograph(const BanditInstance &inst, const PolicyConfig &cfg, const RunSeeds &seeds) {
    PolicyConfig c = cfg;
    c.stage1.alpha = 0.0;
    c.alpha2 = 0.0;
    return run_two_stage(PolicyKind::nograph, inst, c, seeds);
}

RunResult run_gg_oful(const BanditInstance &inst, const PolicyConfig &cfg, const RunSeeds &seeds) {
    return guarded_run(PolicyKind::gg_oful, inst, cfg, seeds, [&](const RunContext &ctx, RunResult &out,
                                                                  const ExplorationPhase &phase) {
        const auto &fam = inst.family;
        const auto d = inst.stack.cols();
        PenaltySpec penalty;
        penalty.lambda2 = 1.0;
        penalty.lambda_perp = 1.0;
        penalty.k = static_cast<std::size_t>(d);
        const double alpha = cfg.stage2_alpha();
        penalty.kernel = quad_kernel(inst.stack, laplacian(inst.graph), effective_a_mu(inst, cfg), alpha);
        out.k = penalty.k;
        const double width = std::sqrt(fam.c_mu) * (1.0 + std::sqrt(alpha * penalty.kernel.sigma_max_K));
        ucb_phase(ctx, out, inst.stack, penalty, phase, width);
    });
}

RunResult run_ucb_glm(const BanditInstance &inst, const PolicyConfig &cfg, const RunSeeds &seeds) {
    return guarded_run(PolicyKind::ucb_glm, inst, cfg, seeds, [&](const RunContext &ctx, RunResult &out,
                                                                  const ExplorationPhase &phase) {
        const auto &fam = inst.family;
        const auto d = inst.stack.cols();
        PenaltySpec penalty;
        penalty.lambda2 = cfg.lambda2;
        penalty.lambda_perp = cfg.lambda2;
        penalty.k = static_cast<std::size_t>(d);
        penalty.kernel = quad_kernel(inst.stack, laplacian(inst.graph), 1.0, 0.0);
        out.k = penalty.k;
        ucb_phase(ctx, out, inst.stack, penalty, phase, std::sqrt(fam.c_mu * cfg.lambda2));
    });
}

RunResult run_policy(const BanditInstance &inst, const PolicyConfig &cfg, const RunSeeds &seeds) {
    switch (cfg.kind) {
    case PolicyKind::gg_estt:
        return run_gg_estt(inst, cfg, seeds);
    case PolicyKind::gg_oful:
        return run_gg_oful(inst, cfg, seeds);
    case PolicyKind::nograph:
        return run_ablation_nograph(inst, cfg, seeds);
    case PolicyKind::ucb_glm:
        return run_ucb_glm(inst, cfg, seeds);
    }
    throw InvalidParameter("run_policy: unknown policy kind");
}

} // namespace gbl

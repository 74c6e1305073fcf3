#include "gbl/stage1.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

using namespace gbl;
using gbl::testing::random_matrix;

namespace {

double op_norm(const Mat &m) { return Eigen::JacobiSVD<Mat>(m).singularValues()(0); }

/// Random stage-1 problem: moment plus a kernel over a random action stack.
struct Problem {
    TruncatedMoment moment;
    LaplacianKernel kernel;
};

Problem random_problem(std::uint64_t seed, double alpha) {
    Rng rng(seed);
    Problem p;
    p.moment.mbar = random_matrix(4, 3, rng);
    p.moment.nu = 1.0;
    p.moment.t1 = 1;
    const Mat stack = random_matrix(15, 12, rng) / 4.0;
    p.kernel = quad_kernel(stack, laplacian(er_graph(15, 0.4, rng)), 1.0, alpha);
    return p;
}

} // namespace

TEST_SUITE("stage1") {

TEST_CASE("psi closed form and shape") {
    CHECK(psi(0.0) == 0.0);
    CHECK(psi(1.0) == doctest::Approx(std::log(2.5)));
    CHECK(psi(1.0) == doctest::Approx(0.916291).epsilon(1e-6));
    double prev = psi(-50.0);
    for (int i = 1; i <= 10000; ++i) {
        const double x = -50.0 + 0.01 * i;
        CHECK(psi(-x) == -psi(x));
        CHECK(std::abs(psi(x)) <= std::abs(x));
        CHECK(psi(x) > prev);
        prev = psi(x);
    }
}

TEST_CASE("psi_nu") {
    Mat a(1, 1);
    a(0, 0) = 2.7;
    const double nu = 0.3;
    CHECK(psi_nu(a, nu)(0, 0) == doctest::Approx(psi(nu * 2.7) / nu).epsilon(1e-12));
    a(0, 0) = -1.4;
    CHECK(psi_nu(a, nu)(0, 0) == doctest::Approx(psi(nu * -1.4) / nu).epsilon(1e-12));

    CHECK(psi_nu(Mat::Zero(3, 2), 0.5).norm() <= 1e-15);
    CHECK_THROWS_AS(psi_nu(Mat::Zero(2, 2), 0.0), InvalidParameter);

    Rng rng(3);
    for (int rep = 0; rep < 20; ++rep) {
        const Mat m = random_matrix(4, 6, rng);
        const double scale = 1.0 / op_norm(m);
        const Mat t = psi_nu(m, scale);
        CHECK(t.allFinite());
        CHECK(op_norm(t) <= op_norm(m) + 1e-12);
        // Singular vectors are kept; singular values go through psi.
        Eigen::JacobiSVD<Mat> sm(m), st(t);
        for (Eigen::Index i = 0; i < 4; ++i)
            CHECK(st.singularValues()(i) ==
                  doctest::Approx(psi(scale * sm.singularValues()(i)) / scale).epsilon(1e-9));
    }
}

TEST_CASE("truncated moment averages psi_nu of y S(X)") {
    Rng rng(4);
    std::vector<Mat> xs;
    std::vector<double> ys;
    for (int i = 0; i < 7; ++i) {
        xs.push_back(random_matrix(3, 2, rng));
        ys.push_back(0.5 * i - 1.0);
    }
    const auto score = ExplorationScore::standard_normal(6);
    const TruncatedMoment m = truncated_moment(xs, ys, score, 0.4);
    Mat expect = Mat::Zero(3, 2);
    for (int i = 0; i < 7; ++i)
        expect += psi_nu(ys[i] * xs[i], 0.4);
    expect /= 7.0;
    CHECK((m.mbar - expect).norm() < 1e-14);
    CHECK(m.t1 == 7);
    CHECK_THROWS_AS(truncated_moment(xs, std::vector<double>(3, 0.0), score, 0.4), InvalidParameter);
}

TEST_CASE("default_nu_beta") {
    const NuBeta a = default_nu_beta(8, 8, 100, 1.0, 0.01, 2.0, 0.01);
    CHECK(a.nu == doctest::Approx(std::sqrt(2.0 * std::log(3200.0) / (4.0004 * 800.0))));
    CHECK(a.nu == doctest::Approx(0.0710198).epsilon(1e-6));
    const NuBeta b = default_nu_beta(8, 8, 200, 1.0, 0.01, 2.0, 0.01);
    CHECK(a.nu / b.nu == doctest::Approx(std::sqrt(2.0)));
    const NuBeta c = default_nu_beta(8, 8, 100, 1.0, 0.01, 2.0, 0.01, 3.0);
    CHECK(c.beta == doctest::Approx(3.0 * a.beta));
    CHECK_THROWS_AS(default_nu_beta(8, 8, 100, 1.0, 0.01, 2.0, 1.0), InvalidParameter);
}

TEST_CASE("svt") {
    Rng rng(5);
    const Mat m = random_matrix(4, 3, rng);
    CHECK(svt(m, 0.0) == m);
    Mat d = Mat::Zero(2, 2);
    d.diagonal() << 3, 1;
    Mat expect = Mat::Zero(2, 2);
    expect(0, 0) = 1;
    CHECK((svt(d, 2.0) - expect).norm() < 1e-12);
    CHECK(svt(m, op_norm(m)).norm() < 1e-12);
    CHECK_THROWS_AS(svt(m, -1.0), InvalidParameter);
}

TEST_CASE("stage-1 solver") {
    Stage1Config cfg;
    cfg.rank = 2;

    SUBCASE("no penalty returns the moment") {
        const Problem p = random_problem(1, 0.0);
        cfg.lambda = 0.0;
        CHECK(estimate_theta_stage1(p.moment, p.kernel, cfg).theta == p.moment.mbar);
    }
    SUBCASE("alpha = 0 matches the closed-form prox") {
        for (std::uint64_t seed = 1; seed <= 10; ++seed) {
            const Problem p = random_problem(seed, 0.0);
            cfg.lambda = 0.1 * static_cast<double>(seed % 10 + 1);
            const Stage1Result r = estimate_theta_stage1(p.moment, p.kernel, cfg);
            CHECK((r.theta - svt(p.moment.mbar, cfg.lambda / 2.0)).norm() <= 1e-6);
        }
    }
    SUBCASE("objective never increases and the fixed point holds") {
        cfg.lambda = 0.5;
        for (std::uint64_t seed = 1; seed <= 20; ++seed) {
            const Problem p = random_problem(seed, 0.05);
            const Stage1Result r = estimate_theta_stage1(p.moment, p.kernel, cfg);
            CHECK(r.converged);
            for (std::size_t i = 1; i < r.objective.size(); ++i)
                CHECK(r.objective[i] <= r.objective[i - 1] + 1e-12);
            const double step = 1.0 / (2.0 * (1.0 + sigma_max(p.kernel.K)));
            const Mat grad = 2.0 * (r.theta - p.moment.mbar) + 2.0 * unvec(p.kernel.K * vec(r.theta), 4, 3);
            CHECK((svt(r.theta - step * grad, cfg.lambda * step) - r.theta).norm() <= 1e-8);
            CHECK(r.objective.back() == doctest::Approx(stage1_objective(r.theta, p.moment.mbar, p.kernel,
                                                                         cfg.lambda)));
        }
    }
    SUBCASE("alpha above the admissible bound warns") {
        const Problem p = random_problem(2, 1.0);
        cfg.lambda = 0.5;
        cfg.alpha = 1.0;
        const Stage1Result r = estimate_theta_stage1(p.moment, p.kernel, cfg);
        CHECK_FALSE(r.warnings.empty());
    }
    SUBCASE("iteration cap is flagged") {
        const Problem p = random_problem(3, 0.05);
        cfg.lambda = 0.5;
        cfg.max_iters = 1;
        cfg.tol_rel_obj = 0.0;
        const Stage1Result r = estimate_theta_stage1(p.moment, p.kernel, cfg);
        CHECK_FALSE(r.converged);
        CHECK_FALSE(r.warnings.empty());
    }
}

TEST_CASE("block permutation follows the rearranged block order") {
    // 2×2, r = 1: (Θ′₁₁; Θ′₂₁; Θ′₁₂; Θ′₂₂)
    CHECK(block_permutation(2, 2, 1) == std::vector<std::size_t>{0, 1, 2, 3});
    // 3×3, r = 1: (1,1); (2:3,1); (1,2:3); (2:3,2:3)
    CHECK(block_permutation(3, 3, 1) == std::vector<std::size_t>{0, 1, 2, 3, 6, 4, 5, 7, 8});
    const SubspaceTransform tr = split_and_transform(Mat::Identity(2, 2) + Mat::Ones(2, 2), 1);
    CHECK(tr.k == 3);
}

TEST_CASE("transform is an isometric bijection") {
    Rng rng(6);
    for (int rep = 0; rep < 20; ++rep) {
        const Mat th = random_matrix(5, 4, rng);
        const std::size_t r = 1 + static_cast<std::size_t>(rep) % 4;
        const SubspaceTransform tr = split_and_transform(th, r);
        CHECK(tr.k == (5 + 4 - r) * r);
        CHECK((tr.u_full.transpose() * tr.u_full - Mat::Identity(5, 5)).norm() <= 1e-10);
        CHECK((tr.v_full.transpose() * tr.v_full - Mat::Identity(4, 4)).norm() <= 1e-10);

        std::vector<std::size_t> sorted = tr.perm;
        std::sort(sorted.begin(), sorted.end());
        std::vector<std::size_t> iota(20);
        std::iota(iota.begin(), iota.end(), 0);
        CHECK(sorted == iota);

        for (int pair = 0; pair < 5; ++pair) {
            const Mat x = random_matrix(5, 4, rng);
            const Mat t = random_matrix(5, 4, rng);
            const Vec xr = rotate_and_rearrange(x, tr);
            CHECK(std::abs(xr.dot(rotate_and_rearrange(t, tr)) - (x.array() * t.array()).sum()) <= 1e-10);
            CHECK(std::abs(xr.norm() - x.norm()) <= 1e-12);
            CHECK((restore(xr, tr) - x).norm() <= 1e-12);
        }
    }
}

TEST_CASE("identity transform leaves vec(X) unchanged") {
    Mat d = Mat::Zero(3, 3);
    d.diagonal() << 3, 2, 1;
    const SubspaceTransform tr = split_and_transform(d, 3);
    REQUIRE((tr.u_full.cwiseAbs() - Mat::Identity(3, 3)).norm() < 1e-12);
    // fix the sign convention of the decomposition
    Rng rng(7);
    const Mat x = random_matrix(3, 3, rng);
    const Mat signs = (tr.u_full.diagonal() * tr.v_full.diagonal().transpose());
    CHECK((rotate_and_rearrange(x, tr) - vec(x.cwiseProduct(signs))).norm() < 1e-12);
}

TEST_CASE("transform_stack applies the transform row by row") {
    const auto inst = gbl::testing::small_instance(8, 10, 3, 4, 2);
    const SubspaceTransform tr = split_and_transform(inst.true_param.theta, 2);
    const Mat ts = transform_stack(inst.stack, tr);
    for (std::size_t i = 0; i < inst.size(); ++i)
        CHECK((ts.row(static_cast<Eigen::Index>(i)).transpose() - rotate_and_rearrange(inst.actions[i], tr)).norm() <
              1e-14);
}

TEST_CASE("exact subspace gives a zero tail") {
    const auto inst = gbl::testing::small_instance(9, 10, 4, 4, 2);
    const SubspaceTransform tr = split_and_transform(inst.true_param.theta, 2);
    CHECK(tail_norm(inst.true_param.theta, tr) < 1e-12);
    CHECK(subspace_misalignment(inst.true_param, tr) < 1e-10);
}

TEST_CASE("tail inequality on random instances") {
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
        Rng rng(seed);
        const std::size_t r = 1 + seed % 3;
        const TrueParameter tp = make_theta(5, 6, r, Graph(5, {}), Graph(6, {}), 1.0, rng);
        const double noise = 0.05 * static_cast<double>(seed % 10);
        const Mat est = tp.theta + noise * random_matrix(5, 6, rng);
        const SubspaceTransform tr = split_and_transform(est, r);
        const double tail = tail_norm(tp.theta, tr);
        const double bound = subspace_misalignment(tp, tr);
        CHECK(tail * tail <= bound * bound + 1e-10);
    }
}

TEST_CASE("tau_bound") {
    CHECK(tau_constant(0.01, 1.0) == doctest::Approx(36.0144));
    Mat d = Mat::Zero(4, 4);
    d.diagonal() << 1.0, 0.9, 0.01, 0.0;
    const SubspaceTransform tr = split_and_transform(d, 2);
    TauInputs in;
    in.t1 = 1000000;
    const double a = tau_bound(tr, in);
    in.t1 = 2000000;
    const double b = tau_bound(tr, in);
    CHECK(a < 1.0);
    CHECK(a / b == doctest::Approx(2.0));
    in.t1 = 1;
    CHECK(tau_bound(tr, in) == 1.0);

    Mat low = Mat::Zero(3, 3);
    low(0, 0) = 1.0;
    const SubspaceTransform flat = split_and_transform(low, 2);
    CHECK(tau_bound(flat, in, 0.25) == 0.25);
    CHECK_THROWS_AS(tau_bound(flat, in), InvalidParameter);
}

TEST_CASE("repeated singular values are flagged") {
    const SubspaceTransform tr = split_and_transform(Mat::Identity(3, 3), 1);
    CHECK(tr.degenerate);
    const SubspaceTransform ok = split_and_transform(Mat::Identity(3, 3), 3);
    CHECK_FALSE(ok.degenerate);
}

}

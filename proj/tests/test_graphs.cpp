#include "gbl/graphs.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <cmath>
#include <vector>

using namespace gbl;
using gbl::testing::random_matrix;
using gbl::testing::random_vector;

namespace {

/// (1/2) Σ_ij W_ij (⟨x_i,θ⟩ − ⟨x_j,θ⟩)², straight from the adjacency.
double pairwise_smoothness(const Mat &stack, const Graph &g, const Vec &theta) {
    const Mat w = g.adjacency();
    const Vec f = stack * theta;
    double s = 0.0;
    for (Eigen::Index i = 0; i < w.rows(); ++i)
        for (Eigen::Index j = 0; j < w.cols(); ++j)
            s += w(i, j) * (f(i) - f(j)) * (f(i) - f(j));
    return 0.5 * s;
}

std::vector<Graph> generated_graphs() {
    std::vector<Graph> out;
    for (std::uint64_t seed = 1; seed <= 4; ++seed) {
        Rng rng(seed);
        out.push_back(er_graph(25, 0.1 * static_cast<double>(seed), rng));
        out.push_back(ba_graph(25, seed, rng));
        out.push_back(knn_graph(random_matrix(25, 3, rng), seed + 1));
    }
    return out;
}

} // namespace

TEST_SUITE("graphs") {

TEST_CASE("er_graph extremes and edge count") {
    Rng rng(1);
    const Graph empty = er_graph(4, 0.0, rng);
    CHECK(empty.edge_count() == 0);
    CHECK(laplacian(empty).isZero(0.0));
    CHECK(er_graph(4, 1.0, rng).edge_count() == 6);

    // Binomial(4950, 0.3): mean 1485, sd sqrt(4950·0.3·0.7).
    const Graph g = er_graph(100, 0.3, rng);
    const double sd = std::sqrt(4950 * 0.3 * 0.7);
    CHECK(std::abs(static_cast<double>(g.edge_count()) - 1485.0) <= 4 * sd);

    CHECK_THROWS_AS(er_graph(4, 1.5, rng), InvalidParameter);
    CHECK_THROWS_AS(er_graph(4, -0.1, rng), InvalidParameter);
}

TEST_CASE("ba_graph structure") {
    Rng rng(2);
    const Graph k3 = ba_graph(3, 2, rng);
    CHECK(k3.edge_count() == 3);
    CHECK(k3.has_edge(0, 1));
    CHECK(k3.has_edge(0, 2));
    CHECK(k3.has_edge(1, 2));

    // initial edge plus m per added node
    CHECK(ba_graph(10, 2, rng).edge_count() == 17);
    CHECK(ba_graph(5, 4, rng).edge_count() == 10);
    CHECK_THROWS_AS(ba_graph(4, 4, rng), InvalidParameter);

    const Graph g = ba_graph(40, 3, rng);
    for (std::size_t v = 3; v < 40; ++v)
        CHECK(g.degrees()[v] >= 3);
}

TEST_CASE("knn_graph") {
    SUBCASE("collinear points give a path") {
        Mat pts(3, 1);
        pts << 0.0, 1.0, 2.0;
        const Graph g = knn_graph(pts, 1);
        CHECK(g.edge_count() == 2);
        CHECK(g.has_edge(0, 1));
        CHECK(g.has_edge(1, 2));
        CHECK_FALSE(g.has_edge(0, 2));
    }
    SUBCASE("k = n - 1 is complete") {
        Rng rng(5);
        const Graph g = knn_graph(random_matrix(6, 2, rng), 5);
        CHECK(g.edge_count() == 15);
    }
    SUBCASE("duplicates resolve to the lower index") {
        const Mat pts = Mat::Zero(3, 2);
        const Graph g = knn_graph(pts, 1);
        CHECK(g.has_edge(0, 1));
        CHECK(g.has_edge(0, 2));
        CHECK_FALSE(g.has_edge(1, 2));
    }
    SUBCASE("k >= n rejected") {
        CHECK_THROWS_AS(knn_graph(Mat::Zero(3, 2), 3), InvalidParameter);
    }
}

TEST_CASE("laplacian by definition") {
    const Graph path(3, {{0, 1}, {1, 2}});
    Mat expect(3, 3);
    expect << 1, -1, 0, -1, 2, -1, 0, -1, 1;
    CHECK(laplacian(path) == expect);
    CHECK(laplacian(Graph(5, {})).isZero(0.0));

    Rng rng(1);
    const Mat lk = laplacian(er_graph(6, 1.0, rng));
    for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 6; ++j)
            CHECK(lk(i, j) == (i == j ? 5.0 : -1.0));
}

TEST_CASE("graphs reject self-loops and out-of-range nodes") {
    CHECK_THROWS_AS(Graph(3, {{1, 1}}), InvalidParameter);
    CHECK_THROWS_AS(Graph(3, {{0, 3}}), InvalidParameter);
}

TEST_CASE("quad_kernel examples") {
    Rng rng(7);
    const Mat x = random_matrix(5, 3, rng);
    const Graph g = er_graph(5, 0.5, rng);
    const LaplacianKernel k0 = quad_kernel(x, laplacian(g), 1.0, 0.0);
    CHECK(k0.K.isZero(0.0));
    CHECK(k0.quad_form(random_vector(3, rng)) == 0.0);

    const Mat two = Mat::Identity(2, 2);
    const LaplacianKernel k2 = quad_kernel(two, laplacian(Graph(2, {{0, 1}})), 1.0, 1.0);
    Mat expect(2, 2);
    expect << 1, -1, -1, 1;
    CHECK((k2.K - expect).norm() < 1e-15);
    CHECK(k2.quad_form(Vec::Ones(2)) == 0.0);

    CHECK_THROWS_AS(quad_kernel(x, Mat::Zero(4, 4), 1.0, 1.0), InvalidParameter);
}

TEST_CASE("quad_kernel agrees with the pairwise double sum") {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        Rng rng(seed);
        const auto n = static_cast<Eigen::Index>(5 + seed % 16);
        const Mat x = random_matrix(n, 6, rng);
        const Graph g = er_graph(static_cast<std::size_t>(n), 0.4, rng);
        const double a_mu = 0.25 + 0.1 * static_cast<double>(seed);
        const double alpha = 0.3;
        const LaplacianKernel k = quad_kernel(x, laplacian(g), a_mu, alpha);
        for (int rep = 0; rep < 5; ++rep) {
            const Vec th = random_vector(6, rng);
            const double oracle = a_mu * alpha * pairwise_smoothness(x, g, th);
            CHECK(std::abs(k.quad_form(th) - oracle) <= 1e-10 * std::max(1.0, std::abs(oracle)));
        }
    }
}

TEST_CASE("quad_kernel is PSD and caches sigma_max") {
    Rng rng(9);
    const Mat x = random_matrix(30, 8, rng);
    const Graph g = ba_graph(30, 3, rng);
    const LaplacianKernel k = quad_kernel(x, laplacian(g), 2.0, 0.1);
    CHECK((k.K - k.K.transpose()).norm() == 0.0);
    for (int rep = 0; rep < 100; ++rep)
        CHECK(k.quad_form(random_vector(8, rng)) >= -1e-12);
    const Mat raw = x.transpose() * laplacian(g) * x;
    Eigen::JacobiSVD<Mat> svd(raw);
    CHECK(k.sigma_max_K == doctest::Approx(svd.singularValues()(0)).epsilon(1e-6));
    Eigen::JacobiSVD<Mat> svd_l(k.L);
    CHECK(k.sigma_max_L == doctest::Approx(svd_l.singularValues()(0)).epsilon(1e-6));
}

TEST_CASE("alpha_max") {
    CHECK(alpha_max(1.0, 3.0, 10) == 0.0);
    CHECK(alpha_max(0.5, 1.0, 10) == doctest::Approx(1.3889e-3).epsilon(1e-4));
    CHECK(alpha_max(0.9, 4.0, 100) == doctest::Approx(6.3131e-7).epsilon(1e-4));
    CHECK_THROWS_AS(alpha_max(1.5, 1.0, 10), InvalidParameter);
}

TEST_CASE("generated graphs satisfy the adjacency and Laplacian invariants") {
    for (const Graph &g : generated_graphs()) {
        const Mat w = g.adjacency();
        CHECK(w == w.transpose());
        CHECK(w.diagonal().isZero(0.0));

        const Mat l = laplacian(g);
        CHECK(l.rowwise().sum().cwiseAbs().maxCoeff() == 0.0);
        Eigen::SelfAdjointEigenSolver<Mat> es(l);
        CHECK(es.eigenvalues().minCoeff() >= -1e-10);
        CHECK(std::abs(es.eigenvalues()(0)) <= 1e-10);

        const double n = static_cast<double>(g.node_count());
        const double smax = es.eigenvalues().cwiseAbs().maxCoeff();
        CHECK(smax <= 2.0 * static_cast<double>(g.max_degree()) + 1e-9);
        CHECK(2.0 * static_cast<double>(g.max_degree()) <= 2.0 * (n - 1));
    }
}

TEST_CASE("generators are deterministic given the seed") {
    for (std::uint64_t seed : {1u, 2u, 99u}) {
        Rng a(seed), b(seed);
        CHECK(er_graph(30, 0.2, a) == er_graph(30, 0.2, b));
        CHECK(ba_graph(30, 2, a) == ba_graph(30, 2, b));
        const Mat pa = random_matrix(20, 3, a);
        const Mat pb = random_matrix(20, 3, b);
        CHECK(knn_graph(pa, 4) == knn_graph(pb, 4));
    }
}

}

#include "gbl/graphs.hpp"

#include <algorithm>
#include <numeric>
#include <string>

namespace gbl {

Graph::Graph(std::size_t n, std::vector<Edge> edges) : n_{n}, degree_(n, 0) {
    for (auto &[i, j] : edges) {
        if (i >= n || j >= n)
            throw InvalidParameter("Graph: edge (" + std::to_string(i) + "," + std::to_string(j) +
                                   ") outside [0, " + std::to_string(n) + ")");
        if (i == j)
            throw InvalidParameter("Graph: self-loop at node " + std::to_string(i));
        if (i > j)
            std::swap(i, j);
    }
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
    for (const auto &[i, j] : edges) {
        ++degree_[i];
        ++degree_[j];
    }
    edges_ = std::move(edges);
}

std::size_t Graph::max_degree() const {
    return degree_.empty() ? 0 : *std::max_element(degree_.begin(), degree_.end());
}

bool Graph::has_edge(std::size_t i, std::size_t j) const {
    if (i > j)
        std::swap(i, j);
    return std::binary_search(edges_.begin(), edges_.end(), Edge{i, j});
}

Mat Graph::adjacency() const {
    Mat w = Mat::Zero(static_cast<Eigen::Index>(n_), static_cast<Eigen::Index>(n_));
    for (const auto &[i, j] : edges_) {
        w(i, j) = 1.0;
        w(j, i) = 1.0;
    }
    return w;
}

Graph er_graph(std::size_t n, double p, Rng &rng) {
    if (!(p >= 0.0 && p <= 1.0))
        throw InvalidParameter("er_graph: p must lie in [0, 1], got " + std::to_string(p));
    if (n < 1)
        throw InvalidParameter("er_graph: n must be at least 1");
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<Edge> edges;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (unif(rng) < p)
                edges.emplace_back(i, j);
    return Graph(n, std::move(edges));
}

Graph ba_graph(std::size_t n, std::size_t m, Rng &rng) {
    if (m < 1 || m >= n)
        throw InvalidParameter("ba_graph: need 1 <= m < n, got m=" + std::to_string(m) +
                               ", n=" + std::to_string(n));
    std::vector<Edge> edges;
    std::vector<double> degree(n, 0.0);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = i + 1; j < m; ++j) {
            edges.emplace_back(i, j);
            degree[i] += 1.0;
            degree[j] += 1.0;
        }

    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (std::size_t node = m; node < n; ++node) {
        // Weights are the degrees before this node's edges are added.
        std::vector<double> weight(degree.begin(), degree.begin() + static_cast<std::ptrdiff_t>(node));
        std::vector<std::size_t> targets;
        for (std::size_t pick = 0; pick < m; ++pick) {
            double total = std::accumulate(weight.begin(), weight.end(), 0.0);
            std::size_t chosen = 0;
            if (total <= 0.0) {
                // No degree mass left (e.g. m = 1 seed node): uniform over unpicked nodes.
                std::vector<std::size_t> free;
                for (std::size_t v = 0; v < node; ++v)
                    if (std::find(targets.begin(), targets.end(), v) == targets.end())
                        free.push_back(v);
                chosen = free[static_cast<std::size_t>(unif(rng) * static_cast<double>(free.size())) %
                              free.size()];
            } else {
                double u = unif(rng) * total;
                chosen = node - 1;
                for (std::size_t v = 0; v < node; ++v) {
                    if (weight[v] <= 0.0)
                        continue;
                    if (u < weight[v]) {
                        chosen = v;
                        break;
                    }
                    u -= weight[v];
                }
                while (weight[chosen] <= 0.0) // guard against rounding past the last mass
                    --chosen;
            }
            targets.push_back(chosen);
            weight[chosen] = 0.0;
        }
        for (std::size_t t : targets) {
            edges.emplace_back(t, node);
            degree[t] += 1.0;
            degree[node] += 1.0;
        }
    }
    return Graph(n, std::move(edges));
}

Graph knn_graph(const Mat &points, std::size_t k) {
    const auto n = static_cast<std::size_t>(points.rows());
    if (k >= n)
        throw InvalidParameter("knn_graph: k must be < number of points (k=" + std::to_string(k) +
                               ", n=" + std::to_string(n) + ")");
    std::vector<Edge> edges;
    std::vector<std::pair<double, std::size_t>> dist;
    for (std::size_t i = 0; i < n; ++i) {
        dist.clear();
        for (std::size_t j = 0; j < n; ++j)
            if (j != i)
                dist.emplace_back((points.row(static_cast<Eigen::Index>(i)) -
                                   points.row(static_cast<Eigen::Index>(j)))
                                      .squaredNorm(),
                                  j);
        std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());
        for (std::size_t q = 0; q < k; ++q)
            edges.emplace_back(i, dist[q].second);
    }
    return Graph(n, std::move(edges));
}

Mat laplacian(const Graph &g) {
    Mat l = -g.adjacency();
    for (std::size_t i = 0; i < g.node_count(); ++i)
        l(i, i) = static_cast<double>(g.degrees()[i]);
    return l;
}

LaplacianKernel quad_kernel(const Mat &action_stack, const Mat &L, double a_mu, double alpha) {
    if (L.rows() != L.cols() || L.rows() != action_stack.rows())
        throw InvalidParameter("quad_kernel: Laplacian is " + std::to_string(L.rows()) + "x" +
                               std::to_string(L.cols()) + " but the action stack has " +
                               std::to_string(action_stack.rows()) + " rows");
    if (!(a_mu > 0.0))
        throw InvalidParameter("quad_kernel: a_mu must be positive");
    if (!(alpha >= 0.0))
        throw InvalidParameter("quad_kernel: alpha must be non-negative");
    LaplacianKernel kernel;
    kernel.L = L;
    kernel.a_mu = a_mu;
    kernel.alpha = alpha;
    Mat xlx = action_stack.transpose() * L * action_stack;
    xlx = (0.5 * (xlx + xlx.transpose())).eval();
    kernel.sigma_max_L = sigma_max(L);
    kernel.sigma_max_K = sigma_max(xlx);
    kernel.K = (a_mu * alpha) * xlx;
    return kernel;
}

double alpha_max(double lambda, double a_mu, std::size_t n) {
    if (!(lambda > 0.0 && lambda <= 1.0))
        throw InvalidParameter("alpha_max: lambda must lie in (0, 1], got " + std::to_string(lambda));
    if (!(a_mu > 0.0) || n < 2)
        throw InvalidParameter("alpha_max: need a_mu > 0 and n >= 2");
    const double nn = static_cast<double>(n);
    return (1.0 - lambda) / (4.0 * a_mu * nn * (nn - 1.0));
}

} // namespace gbl

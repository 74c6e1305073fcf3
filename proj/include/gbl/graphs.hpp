#pragma once

#include "gbl/linalg.hpp"
#include "gbl/rng.hpp"

#include <cstddef>
#include <stdexcept>
#include <utility>
#include <vector>

namespace gbl {

/// Thrown when a constructor or operation receives arguments outside its
/// admissible range.
class InvalidParameter : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

using Edge = std::pair<std::size_t, std::size_t>;

/// Undirected, unit-weight graph over nodes [0, n). Edges are stored once
/// with first < second, sorted; self-loops are rejected.
class Graph {
  public:
    Graph() = default;
    Graph(std::size_t n, std::vector<Edge> edges);

    std::size_t node_count() const { return n_; }
    std::size_t edge_count() const { return edges_.size(); }
    const std::vector<Edge> &edges() const { return edges_; }
    const std::vector<std::size_t> &degrees() const { return degree_; }
    std::size_t max_degree() const;
    bool has_edge(std::size_t i, std::size_t j) const;

    /// Dense symmetric 0/1 adjacency matrix W.
    Mat adjacency() const;

    friend bool operator==(const Graph &, const Graph &) = default;

  private:
    std::size_t n_ = 0;
    std::vector<Edge> edges_;
    std::vector<std::size_t> degree_;
};

/// Erdős–Rényi G(n, p).
Graph er_graph(std::size_t n, double p, Rng &rng);

/// Barabási–Albert preferential attachment seeded with the complete graph on
/// m nodes; every later node attaches to m distinct existing nodes.
Graph ba_graph(std::size_t n, std::size_t m, Rng &rng);

/// Symmetrized k-nearest-neighbour graph over the rows of `points`
/// (Euclidean distance, ties to the lower index, union of neighbour sets).
Graph knn_graph(const Mat &points, std::size_t k);

/// L = D - W.
Mat laplacian(const Graph &g);

/// Laplacian quadratic-form kernel K = a_mu * alpha * X̃ᵀ L X̃ over an n×d
/// stack of vectorized actions.
struct LaplacianKernel {
    Mat L;
    Mat K;
    double a_mu = 0.0;
    double alpha = 0.0;
    double sigma_max_L = 0.0;
    /// Largest singular value of the unscaled X̃ᵀ L X̃.
    double sigma_max_K = 0.0;

    /// θᵀ K θ.
    double quad_form(const Vec &theta) const { return theta.dot(K * theta); }
};

LaplacianKernel quad_kernel(const Mat &action_stack, const Mat &L, double a_mu, double alpha);

/// Largest Laplacian weight admissible for the stage-1 error bound:
/// (1 - lambda) / (4 a_mu n (n - 1)).
double alpha_max(double lambda, double a_mu, std::size_t n);

} // namespace gbl

#pragma once

#include "gbl/envs.hpp"
#include "gbl/graphs.hpp"
#include "gbl/rng.hpp"

#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>

#include <unistd.h>

namespace gbl::testing {

/// Small Gaussian instance with an ER action graph; Θ* built without row or
/// column graphs.
inline BanditInstance small_instance(std::uint64_t seed, std::size_t n = 30, std::size_t d1 = 4,
                                     std::size_t d2 = 4, std::size_t r = 1, LinkFamily fam = family_linear(0.01),
                                     double p = 0.3) {
    Rng rng(seed);
    auto actions = make_actions_gaussian(n, d1, d2, rng);
    auto theta = make_theta(d1, d2, r, Graph(d1, {}), Graph(d2, {}), 1.0, rng);
    Graph g = er_graph(n, p, rng);
    return make_instance(std::move(actions), std::move(theta), std::move(g), std::move(fam));
}

inline Mat random_matrix(Eigen::Index rows, Eigen::Index cols, Rng &rng) {
    std::normal_distribution<double> nd;
    Mat m(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
        for (Eigen::Index i = 0; i < rows; ++i)
            m(i, j) = nd(rng);
    return m;
}

inline Vec random_vector(Eigen::Index n, Rng &rng) { return random_matrix(n, 1, rng).col(0); }

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string &name) {
    auto dir = std::filesystem::temp_directory_path() / ("gbl_" + name + "_" + std::to_string(::getpid()));
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

inline std::string slurp(const std::filesystem::path &p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

} // namespace gbl::testing

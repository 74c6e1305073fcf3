#include "gbl/envs.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>

namespace gbl {
namespace {

constexpr double kPoissonClip = 20.0;

double clip_poisson(double z) { return std::clamp(z, -kPoissonClip, kPoissonClip); }

double sigmoid(double z) {
    if (z >= 0.0) {
        const double e = std::exp(-z);
        return 1.0 / (1.0 + e);
    }
    const double e = std::exp(z);
    return e / (1.0 + e);
}

} // namespace

double LinkFamily::b(double z) const {
    switch (kind) {
    case FamilyKind::linear:
        return 0.5 * z * z;
    case FamilyKind::logistic:
        // log(1 + e^z) without overflow.
        return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
    case FamilyKind::poisson:
        return std::exp(clip_poisson(z));
    }
    return 0.0;
}

double LinkFamily::mu(double z) const {
    switch (kind) {
    case FamilyKind::linear:
        return z;
    case FamilyKind::logistic:
        return sigmoid(z);
    case FamilyKind::poisson:
        return std::exp(clip_poisson(z));
    }
    return 0.0;
}

double LinkFamily::mu_prime(double z) const {
    switch (kind) {
    case FamilyKind::linear:
        return 1.0;
    case FamilyKind::logistic: {
        const double s = sigmoid(z);
        return s * (1.0 - s);
    }
    case FamilyKind::poisson:
        return std::exp(clip_poisson(z));
    }
    return 0.0;
}

double LinkFamily::sample(double z, Rng &rng) const {
    switch (kind) {
    case FamilyKind::linear: {
        std::normal_distribution<double> noise(0.0, 1.0);
        return z + omega * noise(rng);
    }
    case FamilyKind::logistic: {
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        return unif(rng) < mu(z) ? 1.0 : 0.0;
    }
    case FamilyKind::poisson: {
        std::poisson_distribution<long> draw(mu(z));
        return static_cast<double>(draw(rng));
    }
    }
    return 0.0;
}

LinkFamily family_linear(double omega) {
    if (!(omega > 0.0))
        throw InvalidParameter("family_linear: omega must be positive");
    LinkFamily f;
    f.kind = FamilyKind::linear;
    f.name = "linear";
    f.omega = omega;
    f.c_mu = 1.0;
    f.k_mu = 1.0;
    f.a_mu = f.k_mu * f.k_mu;
    f.r_max = std::abs(f.mu(0.0)) + f.k_mu;
    return f;
}

LinkFamily family_logistic() {
    LinkFamily f;
    f.kind = FamilyKind::logistic;
    f.name = "logistic";
    // Bernoulli noise is sub-Gaussian with scale 1/2.
    f.omega = 0.5;
    f.c_mu = f.mu_prime(1.0);
    f.k_mu = 0.25;
    f.a_mu = f.k_mu * f.k_mu;
    f.r_max = std::abs(f.mu(0.0)) + f.k_mu;
    return f;
}

LinkFamily family_poisson() {
    LinkFamily f;
    f.kind = FamilyKind::poisson;
    f.name = "poisson";
    f.c_mu = std::exp(-1.0);
    f.k_mu = std::exp(1.0);
    // Standard deviation at the largest mean reachable with |z| <= 1.
    f.omega = std::sqrt(f.k_mu);
    f.a_mu = f.k_mu * f.k_mu;
    f.r_max = std::abs(f.mu(0.0)) + f.k_mu;
    return f;
}

LinkFamily family_by_name(std::string_view name, double omega) {
    if (name == "linear")
        return family_linear(omega);
    if (name == "logistic")
        return family_logistic();
    if (name == "poisson")
        return family_poisson();
    throw InvalidParameter("unknown reward family '" + std::string(name) + "'");
}

TrueParameter factor_true_parameter(const Mat &theta, std::size_t rank) {
    const auto r = static_cast<Eigen::Index>(rank);
    if (r < 1 || r > std::min(theta.rows(), theta.cols()))
        throw InvalidParameter("factor_true_parameter: rank out of range");
    Eigen::JacobiSVD<Mat> svd(theta, Eigen::ComputeThinU | Eigen::ComputeThinV);
    TrueParameter tp;
    tp.theta = theta;
    tp.rank = rank;
    tp.U = svd.matrixU().leftCols(r);
    tp.V = svd.matrixV().leftCols(r);
    tp.S = svd.singularValues().head(r);
    tp.c_r = tp.S(r - 1);
    return tp;
}

Mat score_standard_normal(const Mat &x) { return x; }

Mat ExplorationScore::apply(const Mat &x) const {
    const Vec s = precision * vec(x);
    return unvec(s, x.rows(), x.cols());
}

ExplorationScore ExplorationScore::standard_normal(Eigen::Index dim) {
    ExplorationScore s;
    s.precision = Mat::Identity(dim, dim);
    s.gamma = 1.0;
    return s;
}

ExplorationScore ExplorationScore::uniform_over(const Mat &action_stack) {
    const Mat second = action_stack.transpose() * action_stack / static_cast<double>(action_stack.rows());
    Eigen::SelfAdjointEigenSolver<Mat> eig(second);
    const Vec &ev = eig.eigenvalues();
    const double cutoff = 1e-8 * std::max(ev.maxCoeff(), 0.0);
    Vec inv = Vec::Zero(ev.size());
    for (Eigen::Index i = 0; i < ev.size(); ++i)
        if (ev(i) > cutoff)
            inv(i) = 1.0 / ev(i);
    ExplorationScore s;
    s.precision = eig.eigenvectors() * inv.asDiagonal() * eig.eigenvectors().transpose();
    s.gamma = s.precision.diagonal().maxCoeff();
    return s;
}

double BanditInstance::linear_predictor(std::size_t i) const {
    return stack.row(static_cast<Eigen::Index>(i)).dot(vec(true_param.theta));
}

BanditInstance make_instance(std::vector<Mat> actions, TrueParameter true_param, Graph graph,
                             LinkFamily family) {
    if (actions.empty())
        throw InvalidParameter("make_instance: empty action set");
    if (graph.node_count() != actions.size())
        throw InvalidParameter("make_instance: graph has " + std::to_string(graph.node_count()) +
                               " nodes for " + std::to_string(actions.size()) + " actions");
    BanditInstance inst;
    inst.d1 = static_cast<std::size_t>(actions.front().rows());
    inst.d2 = static_cast<std::size_t>(actions.front().cols());
    if (true_param.theta.rows() != actions.front().rows() || true_param.theta.cols() != actions.front().cols())
        throw InvalidParameter("make_instance: Θ* shape does not match the actions");
    const auto n = static_cast<Eigen::Index>(actions.size());
    inst.stack.resize(n, static_cast<Eigen::Index>(inst.d1 * inst.d2));
    for (Eigen::Index i = 0; i < n; ++i) {
        const Mat &x = actions[static_cast<std::size_t>(i)];
        if (x.rows() != actions.front().rows() || x.cols() != actions.front().cols())
            throw InvalidParameter("make_instance: action " + std::to_string(i) + " has a different shape");
        if (x.norm() > 1.0 + 1e-9)
            throw InvalidParameter("make_instance: action " + std::to_string(i) + " has Frobenius norm above 1");
        inst.stack.row(i) = vec(x).transpose();
    }
    inst.actions = std::move(actions);
    inst.true_param = std::move(true_param);
    inst.graph = std::move(graph);
    inst.family = std::move(family);
    inst.score = ExplorationScore::uniform_over(inst.stack);
    inst.sampling_gamma = inst.score.gamma;

    inst.expected.resize(n);
    for (Eigen::Index i = 0; i < n; ++i)
        inst.expected(i) = inst.family.mu(inst.linear_predictor(static_cast<std::size_t>(i)));
    Eigen::Index best = 0;
    for (Eigen::Index i = 1; i < n; ++i)
        if (inst.expected(i) > inst.expected(best))
            best = i;
    inst.optimal_index = static_cast<std::size_t>(best);
    return inst;
}

std::vector<Mat> make_actions_gaussian(std::size_t n, std::size_t d1, std::size_t d2, Rng &rng) {
    if (n < 1 || d1 < 1 || d2 < 1)
        throw InvalidParameter("make_actions_gaussian: sizes must be positive");
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<Mat> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        Mat x(static_cast<Eigen::Index>(d1), static_cast<Eigen::Index>(d2));
        for (Eigen::Index c = 0; c < x.cols(); ++c)
            for (Eigen::Index r = 0; r < x.rows(); ++r)
                x(r, c) = normal(rng);
        out.push_back(x / x.norm());
    }
    return out;
}

std::vector<Mat> make_actions_outer(std::size_t n1, std::size_t n2, std::size_t d1, std::size_t d2,
                                    Rng &rng) {
    if (n1 < 1 || n2 < 1 || d1 < 1 || d2 < 1)
        throw InvalidParameter("make_actions_outer: sizes must be positive");
    std::normal_distribution<double> normal(0.0, 1.0);
    auto draw = [&](std::size_t d) {
        Vec v(static_cast<Eigen::Index>(d));
        for (Eigen::Index i = 0; i < v.size(); ++i)
            v(i) = normal(rng);
        return v;
    };
    std::vector<Vec> left, right;
    for (std::size_t i = 0; i < n1; ++i)
        left.push_back(draw(d1));
    for (std::size_t j = 0; j < n2; ++j)
        right.push_back(draw(d2));
    std::vector<Mat> out;
    out.reserve(n1 * n2);
    for (std::size_t i = 0; i < n1; ++i)
        for (std::size_t j = 0; j < n2; ++j) {
            Mat x = left[i] * right[j].transpose();
            out.push_back(x / x.norm());
        }
    return out;
}

namespace {

Mat inverse_sqrt_whitener(const Graph &g, double eps) {
    Eigen::SelfAdjointEigenSolver<Mat> eig(laplacian(g));
    const Vec scale = (eig.eigenvalues().array().max(0.0) + eps).rsqrt();
    return eig.eigenvectors() * scale.asDiagonal();
}

} // namespace

TrueParameter make_theta(std::size_t d1, std::size_t d2, std::size_t r, const Graph &row_graph,
                         const Graph &col_graph, double eps, Rng &rng) {
    if (r < 1 || r > std::min(d1, d2))
        throw InvalidParameter("make_theta: rank must lie in [1, min(d1, d2)]");
    if (!(eps > 0.0))
        throw InvalidParameter("make_theta: eps must be positive");
    if (row_graph.node_count() != d1 || col_graph.node_count() != d2)
        throw InvalidParameter("make_theta: row/column graphs must have d1/d2 nodes");
    std::normal_distribution<double> normal(0.0, 1.0);
    Mat u(static_cast<Eigen::Index>(d1), static_cast<Eigen::Index>(r));
    Mat v(static_cast<Eigen::Index>(d2), static_cast<Eigen::Index>(r));
    for (Eigen::Index c = 0; c < u.cols(); ++c)
        for (Eigen::Index i = 0; i < u.rows(); ++i)
            u(i, c) = normal(rng);
    for (Eigen::Index c = 0; c < v.cols(); ++c)
        for (Eigen::Index i = 0; i < v.rows(); ++i)
            v(i, c) = normal(rng);
    const Mat a = inverse_sqrt_whitener(row_graph, eps);
    const Mat b = inverse_sqrt_whitener(col_graph, eps);
    Mat theta = a * (u * v.transpose()) * b.transpose();
    theta /= theta.norm();
    return factor_true_parameter(theta, r);
}

double expected_reward(const Mat &x, const BanditInstance &inst) {
    return inst.family.mu(vec(x).dot(vec(inst.true_param.theta)));
}

double sample_reward(const Mat &x, const BanditInstance &inst, Rng &rng) {
    return inst.family.sample(vec(x).dot(vec(inst.true_param.theta)), rng);
}

double instant_regret(std::size_t chosen, const BanditInstance &inst) {
    if (chosen >= inst.size())
        throw InvalidParameter("instant_regret: action index out of range");
    const double gap = inst.expected(static_cast<Eigen::Index>(inst.optimal_index)) -
                       inst.expected(static_cast<Eigen::Index>(chosen));
    return std::max(gap, 0.0);
}

Mat read_matrix_csv(const std::filesystem::path &path, bool skip_header, bool impute_missing) {
    std::ifstream in(path);
    if (!in)
        throw IngestionError("cannot open reward matrix '" + path.string() + "'");
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (skip_header && line_no == 1)
            continue;
        if (line.find_first_not_of(" \t") == std::string::npos)
            continue;
        std::vector<double> row;
        std::size_t col = 0;
        std::size_t pos = 0;
        while (true) {
            const auto comma = line.find(',', pos);
            const std::string cell = line.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
            ++col;
            const auto first = cell.find_first_not_of(" \t");
            const auto last = cell.find_last_not_of(" \t");
            const std::string token = first == std::string::npos ? "" : cell.substr(first, last - first + 1);
            const bool missing = token.empty() || token == "NA" || token == "na" || token == "NaN" ||
                                 token == "nan";
            if (missing) {
                if (!impute_missing)
                    throw IngestionError(path.string() + ": missing value at row " + std::to_string(line_no) +
                                         ", column " + std::to_string(col) + " (use imputation to fill with 0)");
                row.push_back(0.0);
            } else {
                double value = 0.0;
                const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
                if (ec != std::errc() || ptr != token.data() + token.size() || !std::isfinite(value))
                    throw IngestionError(path.string() + ": non-numeric value '" + token + "' at row " +
                                         std::to_string(line_no) + ", column " + std::to_string(col));
                row.push_back(value);
            }
            if (comma == std::string::npos)
                break;
            pos = comma + 1;
        }
        if (!rows.empty() && row.size() != rows.front().size())
            throw IngestionError(path.string() + ": row " + std::to_string(line_no) + " has " +
                                 std::to_string(row.size()) + " columns, expected " +
                                 std::to_string(rows.front().size()));
        rows.push_back(std::move(row));
    }
    if (rows.empty())
        throw IngestionError(path.string() + ": no data rows");
    Mat m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < rows[i].size(); ++j)
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    return m;
}

BanditInstance instance_from_reward_matrix(const Mat &r, const IngestOptions &opts) {
    if (r.rows() < 1 || r.cols() < 1)
        throw IngestionError("reward matrix is empty");
    const double frob = r.norm();
    if (!(frob > 0.0))
        throw IngestionError("reward matrix is identically zero");
    const Eigen::Index n1 = r.rows();
    const Eigen::Index n2 = r.cols();
    Eigen::JacobiSVD<Mat> svd(r, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Mat &f1 = svd.matrixU();
    const Mat &f2 = svd.matrixV();
    const Vec &sv = svd.singularValues();

    Mat theta = Mat::Zero(n1, n2);
    for (Eigen::Index i = 0; i < sv.size(); ++i)
        theta(i, i) = sv(i);
    // Rows of orthogonal F1, F2 are unit vectors, so every action already has
    // unit norm; only Θ* needs rescaling.
    theta /= frob;

    std::size_t rank = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i)
        if (sv(i) > 1e-10 * sv(0))
            ++rank;
    rank = std::max<std::size_t>(rank, 1);

    std::vector<Mat> actions;
    actions.reserve(static_cast<std::size_t>(n1 * n2));
    for (Eigen::Index i = 0; i < n1; ++i)
        for (Eigen::Index j = 0; j < n2; ++j)
            actions.push_back(f1.row(i).transpose() * f2.row(j));

    Mat stack(n1 * n2, n1 * n2);
    for (std::size_t l = 0; l < actions.size(); ++l)
        stack.row(static_cast<Eigen::Index>(l)) = vec(actions[l]).transpose();
    if (opts.knn >= actions.size())
        throw IngestionError("reward matrix has " + std::to_string(actions.size()) +
                             " entries; the k-NN graph needs more than k=" + std::to_string(opts.knn));
    Graph graph = knn_graph(stack, opts.knn);
    return make_instance(std::move(actions), factor_true_parameter(theta, rank), std::move(graph),
                         family_by_name(opts.family, opts.omega));
}

BanditInstance ingest_reward_matrix(const std::filesystem::path &path, const IngestOptions &opts) {
    return instance_from_reward_matrix(read_matrix_csv(path, opts.skip_header, opts.impute_missing), opts);
}

} // namespace gbl

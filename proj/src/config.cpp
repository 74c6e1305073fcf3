#include "gbl/harness.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

namespace gbl {

namespace pt = boost::property_tree;

namespace {

std::string trim(std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos)
        return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

double parse_double(const std::string &key, const std::string &raw) {
    const std::string s = trim(raw);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
        throw ConfigError("config key '" + key + "': expected a number, got '" + raw + "'", key);
    return v;
}

std::uint64_t parse_uint(const std::string &key, const std::string &raw) {
    const std::string s = trim(raw);
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
        throw ConfigError("config key '" + key + "': expected a non-negative integer, got '" + raw + "'", key);
    return v;
}

bool parse_bool(const std::string &key, const std::string &raw) {
    const std::string s = trim(raw);
    if (s == "true" || s == "1" || s == "yes")
        return true;
    if (s == "false" || s == "0" || s == "no")
        return false;
    throw ConfigError("config key '" + key + "': expected true/false, got '" + raw + "'", key);
}

std::vector<std::string> split_list(const std::string &raw) {
    std::vector<std::string> out;
    std::stringstream ss(raw);
    std::string item;
    while (std::getline(ss, item, ','))
        if (auto t = trim(item); !t.empty())
            out.push_back(t);
    return out;
}

void apply_policy_key(PolicyConfig &p, const std::string &full, const std::string &key, const std::string &v) {
    if (key == "t1")
        p.t1 = parse_uint(full, v);
    else if (key == "lambda")
        p.stage1.lambda = parse_double(full, v);
    else if (key == "alpha")
        p.stage1.alpha = parse_double(full, v);
    else if (key == "alpha2")
        p.alpha2 = parse_double(full, v);
    else if (key == "rank")
        p.stage1.rank = parse_uint(full, v);
    else if (key == "max_iters")
        p.stage1.max_iters = static_cast<int>(parse_uint(full, v));
    else if (key == "tol")
        p.stage1.tol_rel_obj = parse_double(full, v);
    else if (key == "tol_step")
        p.stage1.tol_step = parse_double(full, v);
    else if (key == "lambda2")
        p.lambda2 = parse_double(full, v);
    else if (key == "lambda_perp")
        p.lambda_perp = parse_double(full, v);
    else if (key == "tau")
        p.tau = parse_double(full, v);
    else if (key == "delta")
        p.delta = parse_double(full, v);
    else if (key == "zeta")
        p.zeta = parse_double(full, v);
    else if (key == "a_mu")
        p.a_mu = parse_double(full, v);
    else if (key == "width_scale")
        p.width_scale = parse_double(full, v);
    else if (key == "c_r_prior")
        p.c_r_prior = parse_double(full, v);
    else
        throw ConfigError("unknown config key '" + full + "'", full);
}

} // namespace

void ExperimentConfig::validate() const {
    if (reps < 1)
        throw ConfigError("experiment.reps must be at least 1", "experiment.reps");
    if (horizon < 2)
        throw ConfigError("experiment.T must be at least 2", "experiment.T");
    if (policies.empty())
        throw ConfigError("experiment.policies is empty", "experiment.policies");
    if (!(hit_percentile > 0.0 && hit_percentile < 100.0))
        throw ConfigError("experiment.hit_percentile must lie in (0, 100)", "experiment.hit_percentile");
    if (instance.source != "synthetic" && instance.source != "matrix")
        throw ConfigError("instance.source must be synthetic or matrix", "instance.source");
    if (instance.source == "matrix" && instance.matrix.empty())
        throw ConfigError("instance.matrix is required for source = matrix", "instance.matrix");
    if (instance.action_model != "gaussian" && instance.action_model != "outer")
        throw ConfigError("instance.action_model must be gaussian or outer", "instance.action_model");
    if (instance.theta_graphs != "none" && instance.theta_graphs != "er")
        throw ConfigError("instance.theta_graphs must be none or er", "instance.theta_graphs");
    if (graph.model != "er" && graph.model != "ba" && graph.model != "knn" && graph.model != "none")
        throw ConfigError("graph.model must be er, ba, knn or none", "graph.model");
    if (graph.model == "er" && !(graph.p >= 0.0 && graph.p <= 1.0))
        throw ConfigError("graph.p must lie in [0, 1]", "graph.p");
    if (family != "linear" && family != "logistic" && family != "poisson")
        throw ConfigError("family.name must be linear, logistic or poisson", "family.name");
}

PolicyConfig ExperimentConfig::policy_config(PolicyKind kind) const {
    PolicyConfig p;
    p.stage1.rank = 0;
    if (auto it = policy.find(kind); it != policy.end())
        p = it->second;
    p.kind = kind;
    p.horizon = horizon;
    p.hit_percentile = hit_percentile;
    return p;
}

ExperimentConfig parse_config_text(const std::string &text) {
    pt::ptree tree;
    std::istringstream in(text);
    try {
        pt::read_ini(in, tree);
    } catch (const pt::ini_parser_error &e) {
        throw ConfigError("config syntax error at line " + std::to_string(e.line()) + ": " + e.message(), {},
                          e.line());
    }

    ExperimentConfig cfg;
    PolicyConfig shared;
    std::map<PolicyKind, std::vector<std::pair<std::string, std::string>>> overrides;
    // Rank 0 defers to the instance rank.
    shared.stage1.rank = 0;

    for (const auto &[section, body] : tree) {
        if (body.empty() && !body.data().empty())
            throw ConfigError("config key '" + section + "' must sit inside a section", section);
        for (const auto &[key, node] : body) {
            const std::string full = section + "." + key;
            const std::string v = node.data();
            if (section == "experiment") {
                if (key == "T")
                    cfg.horizon = parse_uint(full, v);
                else if (key == "reps")
                    cfg.reps = parse_uint(full, v);
                else if (key == "seed")
                    cfg.base_seed = parse_uint(full, v);
                else if (key == "out")
                    cfg.out_dir = trim(v);
                else if (key == "hit_percentile")
                    cfg.hit_percentile = parse_double(full, v);
                else if (key == "workers")
                    cfg.workers = parse_uint(full, v);
                else if (key == "policies") {
                    cfg.policies.clear();
                    for (const auto &name : split_list(v)) {
                        try {
                            cfg.policies.push_back(policy_from_name(name));
                        } catch (const InvalidParameter &e) {
                            throw ConfigError("config key '" + full + "': " + e.what(), full);
                        }
                    }
                } else
                    throw ConfigError("unknown config key '" + full + "'", full);
            } else if (section == "instance") {
                auto &s = cfg.instance;
                if (key == "source")
                    s.source = trim(v);
                else if (key == "d1")
                    s.d1 = parse_uint(full, v);
                else if (key == "d2")
                    s.d2 = parse_uint(full, v);
                else if (key == "rank")
                    s.rank = parse_uint(full, v);
                else if (key == "actions")
                    s.n_actions = parse_uint(full, v);
                else if (key == "action_model")
                    s.action_model = trim(v);
                else if (key == "n_rows")
                    s.n_rows = parse_uint(full, v);
                else if (key == "n_cols")
                    s.n_cols = parse_uint(full, v);
                else if (key == "theta_graphs")
                    s.theta_graphs = trim(v);
                else if (key == "theta_graph_p")
                    s.theta_graph_p = parse_double(full, v);
                else if (key == "theta_eps")
                    s.theta_eps = parse_double(full, v);
                else if (key == "matrix")
                    s.matrix = trim(v);
                else if (key == "skip_header")
                    s.skip_header = parse_bool(full, v);
                else if (key == "impute_missing")
                    s.impute_missing = parse_bool(full, v);
                else
                    throw ConfigError("unknown config key '" + full + "'", full);
            } else if (section == "graph") {
                if (key == "model")
                    cfg.graph.model = trim(v);
                else if (key == "p")
                    cfg.graph.p = parse_double(full, v);
                else if (key == "m")
                    cfg.graph.m = parse_uint(full, v);
                else if (key == "k")
                    cfg.graph.k = parse_uint(full, v);
                else
                    throw ConfigError("unknown config key '" + full + "'", full);
            } else if (section == "family") {
                if (key == "name")
                    cfg.family = trim(v);
                else if (key == "omega")
                    cfg.omega = parse_double(full, v);
                else
                    throw ConfigError("unknown config key '" + full + "'", full);
            } else if (section == "policy") {
                apply_policy_key(shared, full, key, v);
            } else if (section.rfind("policy.", 0) == 0) {
                PolicyKind kind;
                try {
                    kind = policy_from_name(section.substr(7));
                } catch (const InvalidParameter &) {
                    throw ConfigError("unknown policy section '[" + section + "]'", section);
                }
                overrides[kind].emplace_back(key, v);
            } else {
                throw ConfigError("unknown config section '[" + section + "]'", section);
            }
        }
    }

    for (auto kind : {PolicyKind::gg_estt, PolicyKind::gg_oful, PolicyKind::nograph, PolicyKind::ucb_glm}) {
        PolicyConfig p = shared;
        for (const auto &[key, v] : overrides[kind])
            apply_policy_key(p, "policy." + std::string(policy_name(kind)) + "." + key, key, v);
        cfg.policy[kind] = p;
    }
    cfg.validate();
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path &path) {
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open config file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

} // namespace gbl

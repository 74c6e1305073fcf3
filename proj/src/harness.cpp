#include "gbl/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <sstream>
#include <system_error>
#include <thread>

namespace gbl {

RepSeeds rep_seeds(std::uint64_t base_seed, std::size_t rep) {
    RepSeeds s;
    s.rep_seed = base_seed + rep;
    s.instance = derive_seed(s.rep_seed, "instance");
    s.graph = derive_seed(s.rep_seed, "graph");
    s.run.noise = derive_seed(s.rep_seed, "noise");
    s.run.explore = derive_seed(s.rep_seed, "explore");
    return s;
}

namespace {

LinkFamily make_family(const ExperimentConfig &cfg) { return family_by_name(cfg.family, cfg.omega); }

Graph action_graph(const GraphSpec &g, const Mat &stack, Rng &rng) {
    const auto n = static_cast<std::size_t>(stack.rows());
    if (g.model == "er")
        return er_graph(n, g.p, rng);
    if (g.model == "ba")
        return ba_graph(n, g.m, rng);
    if (g.model == "knn")
        return knn_graph(stack, g.k);
    return Graph(n, {});
}

} // namespace

BanditInstance build_instance(const ExperimentConfig &cfg, const RepSeeds &seeds) {
    const auto &s = cfg.instance;
    if (s.source == "matrix") {
        IngestOptions opts;
        opts.family = cfg.family;
        opts.omega = cfg.omega;
        opts.skip_header = s.skip_header;
        opts.impute_missing = s.impute_missing;
        opts.knn = cfg.graph.k;
        return ingest_reward_matrix(s.matrix, opts);
    }
    Rng inst_rng(seeds.instance);
    std::vector<Mat> actions = s.action_model == "outer"
                                   ? make_actions_outer(s.n_rows, s.n_cols, s.d1, s.d2, inst_rng)
                                   : make_actions_gaussian(s.n_actions, s.d1, s.d2, inst_rng);
    Graph row_graph(s.d1, {});
    Graph col_graph(s.d2, {});
    if (s.theta_graphs == "er") {
        row_graph = er_graph(s.d1, s.theta_graph_p, inst_rng);
        col_graph = er_graph(s.d2, s.theta_graph_p, inst_rng);
    }
    TrueParameter theta = make_theta(s.d1, s.d2, s.rank, row_graph, col_graph, s.theta_eps, inst_rng);

    Mat stack(static_cast<Eigen::Index>(actions.size()), static_cast<Eigen::Index>(s.d1 * s.d2));
    for (std::size_t i = 0; i < actions.size(); ++i)
        stack.row(static_cast<Eigen::Index>(i)) = vec(actions[i]).transpose();
    Rng graph_rng(seeds.graph);
    Graph g = action_graph(cfg.graph, stack, graph_rng);
    return make_instance(std::move(actions), std::move(theta), std::move(g), make_family(cfg));
}

std::vector<double> cumulative_regret(const std::vector<StepRecord> &records) {
    std::vector<double> out(records.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < records.size(); ++i) {
        acc += records[i].instant_regret;
        out[i] = acc;
    }
    return out;
}

std::vector<double> hit_rate(const std::vector<StepRecord> &records, const std::vector<std::size_t> &optimal_set) {
    std::vector<double> out(records.size());
    std::size_t hits = 0;
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (std::find(optimal_set.begin(), optimal_set.end(), records[i].action) != optimal_set.end())
            ++hits;
        out[i] = static_cast<double>(hits) / static_cast<double>(i + 1);
    }
    return out;
}

void aggregate(PolicySeries &s) {
    const std::size_t reps = s.cum_regret.size();
    const std::size_t len = reps == 0 ? 0 : s.cum_regret.front().size();
    s.mean_cum_regret.assign(len, 0.0);
    s.std_cum_regret.assign(len, 0.0);
    s.mean_hit_rate.assign(len, 0.0);
    if (reps == 0)
        return;
    for (std::size_t t = 0; t < len; ++t) {
        double sum = 0.0;
        double hit = 0.0;
        for (std::size_t r = 0; r < reps; ++r) {
            sum += s.cum_regret[r][t];
            hit += s.hit_rate[r][t];
        }
        const double mean = sum / static_cast<double>(reps);
        double ss = 0.0;
        for (std::size_t r = 0; r < reps; ++r)
            ss += (s.cum_regret[r][t] - mean) * (s.cum_regret[r][t] - mean);
        s.mean_cum_regret[t] = mean;
        s.std_cum_regret[t] = reps > 1 ? std::sqrt(ss / static_cast<double>(reps - 1)) : 0.0;
        s.mean_hit_rate[t] = hit / static_cast<double>(reps);
    }
}

const PolicySeries &MetricSeries::at(const std::string &policy) const {
    for (const auto &p : policies)
        if (p.policy == policy)
            return p;
    throw InvalidParameter("no metric series for policy '" + policy + "'");
}

std::vector<AggregateRow> MetricSeries::aggregate_rows() const {
    std::vector<AggregateRow> rows;
    for (const auto &p : policies)
        for (std::size_t t = 0; t < p.mean_cum_regret.size(); ++t)
            rows.push_back({p.policy, t + 1, p.mean_cum_regret[t], p.std_cum_regret[t], p.mean_hit_rate[t]});
    return rows;
}

std::size_t effective_workers(std::size_t configured) {
    if (const char *env = std::getenv("GBL_WORKERS")) {
        char *end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && v > 0)
            return static_cast<std::size_t>(v);
    }
    if (configured > 0)
        return configured;
    return std::max(1u, std::thread::hardware_concurrency());
}

ExperimentResult run_experiment(const ExperimentConfig &cfg) {
    cfg.validate();
    const std::size_t reps = cfg.reps;
    ExperimentResult result;
    result.runs.assign(reps, {});
    std::vector<std::string> rep_errors(reps);
    std::vector<std::vector<std::size_t>> top_sets(reps);

    auto run_rep = [&](std::size_t rep) {
        try {
            const RepSeeds seeds = rep_seeds(cfg.base_seed, rep);
            const BanditInstance inst = build_instance(cfg, seeds);
            top_sets[rep] = top_set(inst.expected, cfg.hit_percentile);
            for (auto kind : cfg.policies) {
                PolicyConfig p = cfg.policy_config(kind);
                if (p.stage1.rank == 0)
                    p.stage1.rank = inst.true_param.rank;
                result.runs[rep].push_back(run_policy(inst, p, seeds.run));
            }
        } catch (const std::exception &e) {
            rep_errors[rep] = e.what();
        }
    };

    const std::size_t workers = std::min(effective_workers(cfg.workers), reps);
    if (workers <= 1) {
        for (std::size_t rep = 0; rep < reps; ++rep)
            run_rep(rep);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w)
            pool.emplace_back([&] {
                for (std::size_t rep = next++; rep < reps; rep = next++)
                    run_rep(rep);
            });
        for (auto &th : pool)
            th.join();
    }

    // With no rep left there is nothing to report; surface the cause.
    if (reps > 0 && std::all_of(rep_errors.begin(), rep_errors.end(), [](const auto &e) { return !e.empty(); }))
        throw std::runtime_error(rep_errors.front());

    // Single-threaded reduction.
    for (auto kind : cfg.policies) {
        PolicySeries series;
        series.policy = std::string(policy_name(kind));
        result.series.policies.push_back(std::move(series));
    }
    for (std::size_t rep = 0; rep < reps; ++rep) {
        const std::uint64_t seed = cfg.base_seed + rep;
        if (!rep_errors[rep].empty()) {
            result.warnings.push_back("rep " + std::to_string(rep) + " failed: " + rep_errors[rep]);
            continue;
        }
        for (std::size_t pi = 0; pi < result.runs[rep].size(); ++pi) {
            const RunResult &run = result.runs[rep][pi];
            const std::string name(policy_name(run.kind));
            for (const auto &w : run.warnings)
                result.warnings.push_back(name + " rep " + std::to_string(rep) + ": " + w);
            const auto cum = cumulative_regret(run.records);
            for (std::size_t i = 0; i < run.records.size(); ++i) {
                const auto &r = run.records[i];
                result.raw.push_back({name, rep, seed, r.t, r.action, r.reward, r.instant_regret, cum[i], r.hit});
            }
            if (!run.complete) {
                result.warnings.push_back(name + " rep " + std::to_string(rep) +
                                          " incomplete and excluded from aggregates: " + run.error);
                continue;
            }
            PolicySeries &s = result.series.policies[pi];
            s.cum_regret.push_back(cum);
            s.hit_rate.push_back(hit_rate(run.records, top_sets[rep]));
            s.reps.push_back(rep);
        }
    }
    for (auto &s : result.series.policies)
        aggregate(s);
    return result;
}

std::string format_number(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

namespace {

void atomic_write(const std::filesystem::path &file, const std::string &content) {
    std::filesystem::path tmp = file;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out)
            throw std::filesystem::filesystem_error("cannot write results file", tmp,
                                                    std::make_error_code(std::errc::permission_denied));
        out << content;
        out.flush();
        if (!out)
            throw std::filesystem::filesystem_error("failed writing results file", tmp,
                                                    std::make_error_code(std::errc::io_error));
    }
    std::filesystem::rename(tmp, file);
}

std::vector<std::string> split_csv(const std::string &line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(',', start);
        out.push_back(line.substr(start, pos == std::string::npos ? std::string::npos : pos - start));
        if (pos == std::string::npos)
            break;
        start = pos + 1;
    }
    return out;
}

std::vector<std::vector<std::string>> read_csv(const std::filesystem::path &file, const char *header,
                                               std::size_t fields) {
    std::ifstream in(file);
    if (!in)
        throw std::filesystem::filesystem_error("cannot open results file", file,
                                                std::make_error_code(std::errc::no_such_file_or_directory));
    std::string line;
    if (!std::getline(in, line) || line != header)
        throw std::runtime_error(file.string() + ": unexpected header");
    std::vector<std::vector<std::string>> rows;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty())
            continue;
        auto cells = split_csv(line);
        if (cells.size() != fields)
            throw std::runtime_error(file.string() + ":" + std::to_string(lineno) + ": expected " +
                                     std::to_string(fields) + " fields");
        rows.push_back(std::move(cells));
    }
    return rows;
}

} // namespace

void write_aggregate(const std::vector<AggregateRow> &rows, const std::filesystem::path &file) {
    std::ostringstream out;
    out << kAggregateHeader << '\n';
    for (const auto &r : rows)
        out << r.policy << ',' << r.t << ',' << format_number(r.mean_cum_regret) << ','
            << format_number(r.std_cum_regret) << ',' << format_number(r.mean_hit_rate) << '\n';
    atomic_write(file, out.str());
}

void write_results(const MetricSeries &series, const std::vector<RawRow> &raw, const std::filesystem::path &dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec)
        throw std::filesystem::filesystem_error("cannot create output directory", dir, ec);
    std::ostringstream out;
    out << kRawHeader << '\n';
    for (const auto &r : raw)
        out << r.policy << ',' << r.rep << ',' << r.seed << ',' << r.t << ',' << r.action << ','
            << format_number(r.reward) << ',' << format_number(r.instant_regret) << ','
            << format_number(r.cum_regret) << ',' << (r.hit ? 1 : 0) << '\n';
    atomic_write(dir / "raw.csv", out.str());
    write_aggregate(series.aggregate_rows(), dir / "aggregate.csv");
}

StoredResults read_results(const std::filesystem::path &dir) {
    StoredResults s;
    for (const auto &c : read_csv(dir / "raw.csv", kRawHeader, 9))
        s.raw.push_back({c[0], std::stoul(c[1]), std::stoull(c[2]), std::stoul(c[3]), std::stoul(c[4]),
                         std::stod(c[5]), std::stod(c[6]), std::stod(c[7]), c[8] == "1"});
    for (const auto &c : read_csv(dir / "aggregate.csv", kAggregateHeader, 5))
        s.aggregate.push_back({c[0], std::stoul(c[1]), std::stod(c[2]), std::stod(c[3]), std::stod(c[4])});
    return s;
}

std::vector<SweepPoint> run_sweep(const ExperimentConfig &cfg, const std::string &param,
                                  const std::vector<std::string> &values, bool write) {
    if (param != "graph_p" && param != "graph_m")
        throw ConfigError("sweep parameter must be graph_p or graph_m", "sweep.param");
    if (values.empty())
        throw ConfigError("sweep needs at least one value", "sweep.values");
    std::vector<SweepPoint> out;
    for (const auto &v : values) {
        ExperimentConfig c = cfg;
        try {
            if (param == "graph_p") {
                c.graph.model = "er";
                std::size_t pos = 0;
                c.graph.p = std::stod(v, &pos);
                if (pos != v.size())
                    throw std::invalid_argument(v);
            } else {
                c.graph.model = "ba";
                std::size_t pos = 0;
                c.graph.m = std::stoul(v, &pos);
                if (pos != v.size())
                    throw std::invalid_argument(v);
            }
        } catch (const std::logic_error &) {
            throw ConfigError("sweep value '" + v + "' is not valid for " + param, "sweep.values");
        }
        SweepPoint p{v, run_experiment(c)};
        if (write)
            write_results(p.result.series, p.result.raw, cfg.out_dir / (param + "_" + v));
        out.push_back(std::move(p));
    }
    return out;
}

} // namespace gbl

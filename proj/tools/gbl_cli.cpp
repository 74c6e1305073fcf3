// gbl: simulate | ingest | sweep

#include "gbl/harness.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <optional>

namespace {

struct Overrides {
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> reps;
    std::optional<std::string> out;

    void apply(gbl::ExperimentConfig &cfg) const {
        if (seed)
            cfg.base_seed = *seed;
        if (reps)
            cfg.reps = *reps;
        if (out)
            cfg.out_dir = *out;
        cfg.validate();
    }
};

void report(const gbl::ExperimentResult &r, const std::filesystem::path &dir) {
    for (const auto &w : r.warnings)
        std::cerr << "warning: " << w << '\n';
    for (const auto &p : r.series.policies) {
        if (p.mean_cum_regret.empty()) {
            std::cout << p.policy << ": no complete reps\n";
            continue;
        }
        std::cout << p.policy << ": final mean cum regret " << gbl::format_number(p.mean_cum_regret.back())
                  << " (std " << gbl::format_number(p.std_cum_regret.back()) << "), hit rate "
                  << gbl::format_number(p.mean_hit_rate.back()) << '\n';
    }
    std::cout << "results written to " << dir.string() << '\n';
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"Graph-informed low-rank GLM bandit laboratory"};
    app.require_subcommand(1);

    Overrides ov;
    auto add_overrides = [&](CLI::App *sub) {
        sub->add_option("--seed", ov.seed, "Base seed (rep i uses seed + i)");
        sub->add_option("--reps", ov.reps, "Number of repetitions");
        sub->add_option("--out", ov.out, "Output directory");
    };

    std::string config_path;
    auto *simulate = app.add_subcommand("simulate", "Run a full experiment from a config file");
    simulate->add_option("--config", config_path, "Config file")->required();
    add_overrides(simulate);

    std::string matrix_path;
    std::string family = "linear";
    double omega = 0.01;
    std::size_t horizon = 300;
    std::size_t knn = 5;
    std::size_t t1 = 0;
    bool skip_header = false;
    bool impute = false;
    auto *ingest = app.add_subcommand("ingest", "Run the policies on a reward matrix file");
    ingest->add_option("--matrix", matrix_path, "Comma-separated reward matrix")->required();
    ingest->add_option("--family", family, "linear | logistic | poisson")
        ->check(CLI::IsMember({"linear", "logistic", "poisson"}));
    ingest->add_option("--omega", omega, "Noise scale for the linear family");
    ingest->add_option("--config", config_path, "Optional config supplying policy settings");
    ingest->add_option("--T", horizon, "Horizon");
    ingest->add_option("--t1", t1, "Exploration rounds (0 = default)");
    ingest->add_option("--knn", knn, "Neighbours in the action graph");
    ingest->add_flag("--skip-header", skip_header, "First line is a header");
    ingest->add_flag("--impute-missing", impute, "Treat missing cells as 0");
    add_overrides(ingest);

    std::string param;
    std::vector<std::string> values;
    auto *sweep = app.add_subcommand("sweep", "Repeat an experiment over graph parameters");
    sweep->add_option("--config", config_path, "Config file (defaults to built-in settings)");
    sweep->add_option("--param", param, "graph_p | graph_m")
        ->required()
        ->check(CLI::IsMember({"graph_p", "graph_m"}));
    sweep->add_option("--values", values, "Comma-separated values")->required()->delimiter(',');
    add_overrides(sweep);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp &e) {
        return app.exit(e);
    } catch (const CLI::ParseError &e) {
        app.exit(e);
        return 2;
    }

    try {
        if (*simulate) {
            gbl::ExperimentConfig cfg = gbl::load_config(config_path);
            ov.apply(cfg);
            const auto result = gbl::run_experiment(cfg);
            gbl::write_results(result.series, result.raw, cfg.out_dir);
            report(result, cfg.out_dir);
        } else if (*ingest) {
            gbl::ExperimentConfig cfg = config_path.empty() ? gbl::ExperimentConfig{} : gbl::load_config(config_path);
            cfg.instance.source = "matrix";
            cfg.instance.matrix = matrix_path;
            cfg.instance.skip_header = skip_header;
            cfg.instance.impute_missing = impute;
            cfg.family = family;
            cfg.omega = omega;
            cfg.graph.model = "knn";
            cfg.graph.k = knn;
            if (config_path.empty()) {
                cfg.horizon = horizon;
                cfg.reps = 1;
                cfg.out_dir = "ingest_results";
            }
            if (t1 != 0)
                for (auto &[kind, p] : cfg.policy)
                    p.t1 = t1;
            ov.apply(cfg);
            const auto result = gbl::run_experiment(cfg);
            gbl::write_results(result.series, result.raw, cfg.out_dir);
            report(result, cfg.out_dir);
        } else if (*sweep) {
            gbl::ExperimentConfig cfg = config_path.empty() ? gbl::ExperimentConfig{} : gbl::load_config(config_path);
            ov.apply(cfg);
            for (const auto &point : gbl::run_sweep(cfg, param, values, true)) {
                std::cout << "[" << param << " = " << point.value << "]\n";
                report(point.result, cfg.out_dir / (param + "_" + point.value));
            }
        }
    } catch (const gbl::ConfigError &e) {
        std::cerr << "config error";
        if (!e.key().empty())
            std::cerr << " (key " << e.key() << ")";
        if (e.line() != 0)
            std::cerr << " (line " << e.line() << ")";
        std::cerr << ": " << e.what() << '\n';
        return 3;
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}

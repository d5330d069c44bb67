#include "tnnswap/config.hpp"
#include "tnnswap/experiment.hpp"
#include "tnnswap/io.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <optional>

using namespace tnnswap;

namespace {

struct Overrides {
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> runs;
    std::optional<std::string> method;
    std::optional<std::size_t> degree;
    std::optional<std::string> arch;
    std::optional<std::size_t> chi;
    std::optional<std::size_t> epochs;
    std::optional<std::size_t> paths;
};

void add_override_flags(CLI::App* app, Overrides& o) {
    app->add_option("--seed", o.seed, "Master seed");
    app->add_option("--runs", o.runs, "Independent training runs");
    app->add_option("--method", o.method, "mc | ls | bsde-dense | bsde-tnn");
    app->add_option("--degree", o.degree, "Longstaff-Schwartz regression degree");
    app->add_option("--arch", o.arch, "Network, e.g. tnn:2x64 or dnn:24,27");
    app->add_option("--chi", o.chi, "MPO bond dimension");
    app->add_option("--epochs", o.epochs, "Training epochs");
    app->add_option("--paths", o.paths, "Monte Carlo / regression paths");
}

ExperimentConfig configure(const std::string& name, const Overrides& o) {
    ExperimentConfig cfg = load_config(name);
    if (o.seed) cfg.training.seed = *o.seed;
    if (o.runs) cfg.training.runs = *o.runs;
    if (o.method) cfg.method.name = parse_method(*o.method);
    if (o.degree) cfg.method.degree = *o.degree;
    if (o.chi) cfg.arch.chi = *o.chi;
    if (o.epochs) {
        // --epochs is the total; a Bermudan run splits it evenly over the networks.
        cfg.training.epochs = *o.epochs;
        cfg.training.epochs_per_network = 0;
    }
    if (o.paths) cfg.method.paths = *o.paths;
    if (o.arch) {
        nn::ArchSpec a;
        try {
            a = nn::ArchSpec::parse(*o.arch, cfg.arch.chi, 2 * cfg.model.factors + 1);
        } catch (const std::exception& e) {
            throw ConfigError("--arch", e.what());
        }
        cfg.arch.widths = a.hidden;
        cfg.method.name = a.family == nn::ArchFamily::tnn ? Method::bsde_tnn : Method::bsde_dense;
    }
    cfg.validate();
    return cfg;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Swaption pricing with deep-BSDE solvers on dense and tensorized networks"};
    app.require_subcommand(1);
    RunOptions opts;
    for (int i = 0; i < argc; ++i) opts.command_line.emplace_back(argv[i]);
    std::string out_dir = "out";
    bool quiet = false;

    std::string sim_config;
    std::size_t sim_paths = 10;
    Overrides sim_over;
    auto* sim = app.add_subcommand("simulate", "Dump simulated factor paths to paths.csv");
    sim->add_option("--config", sim_config, "Config file or bundled experiment name")->required()->envname("TNNSWAP_CONFIG");
    sim->add_option("--n-paths", sim_paths, "Number of paths")->check(CLI::PositiveNumber);
    sim->add_option("--seed", sim_over.seed, "Master seed");
    sim->add_option("--out-dir", out_dir, "Output directory")->envname("TNNSWAP_OUT_DIR");

    std::string price_config;
    Overrides price_over;
    auto* price = app.add_subcommand("price", "Price one configuration");
    price->add_option("--config", price_config, "Config file or bundled experiment name")->required()->envname("TNNSWAP_CONFIG");
    price->add_option("--out-dir", out_dir, "Output directory")->envname("TNNSWAP_OUT_DIR");
    price->add_flag("--quiet", quiet, "No progress output");
    add_override_flags(price, price_over);

    std::vector<std::string> bench_configs;
    Overrides bench_over;
    auto* bench = app.add_subcommand("bench", "Price a set of configurations and tabulate them");
    bench->add_option("--config,configs", bench_configs, "Config files or bundled experiment names");
    bench->add_option("--out-dir", out_dir, "Output directory")->envname("TNNSWAP_OUT_DIR");
    bench->add_flag("--quiet", quiet, "No progress output");
    bench->add_option("--seed", bench_over.seed, "Master seed");
    bench->add_option("--runs", bench_over.runs, "Independent training runs");
    bench->add_option("--epochs", bench_over.epochs, "Training epochs");

    std::optional<std::string> params_arch;
    std::size_t params_chi = 2;
    std::size_t params_input = 7;
    auto* params = app.add_subcommand("params", "Trainable parameter counts");
    params->add_option("--arch", params_arch, "Network, e.g. tnn:2x64; omit for the benchmark table");
    params->add_option("--chi", params_chi, "MPO bond dimension")->check(CLI::PositiveNumber);
    params->add_option("--input-width", params_input, "Network input width (2d+1)")->check(CLI::PositiveNumber);

    CLI11_PARSE(app, argc, argv);
    opts.out_dir = out_dir;

    try {
        if (*sim) {
            opts.log = quiet ? nullptr : &std::cerr;
            const ExperimentConfig cfg = configure(sim_config, sim_over);
            run_simulate(cfg, sim_paths, opts);
            std::cout << "wrote " << (opts.out_dir / "paths.csv").string() << '\n';
        } else if (*price) {
            opts.log = quiet ? nullptr : &std::cerr;
            const ExperimentConfig cfg = configure(price_config, price_over);
            const PriceOutcome o = run_price(cfg, opts);
            std::cout << "method=" << to_string(o.method) << " price=" << format_double(o.summary.mean)
                      << " stderr=" << format_double(o.summary.std_error) << " runs=" << o.runs
                      << " n_paths=" << o.n_paths << " seed=" << o.seed << '\n';
        } else if (*bench) {
            opts.log = quiet ? nullptr : &std::cerr;
            if (bench_configs.empty()) throw ConfigError("bench", "at least one config is required");
            std::vector<ExperimentConfig> cfgs;
            for (const auto& c : bench_configs) cfgs.push_back(configure(c, bench_over));
            const auto rows = run_bench(cfgs, opts);
            std::size_t failed = 0;
            for (const auto& r : rows) failed += r.error.empty() ? 0 : 1;
            std::cout << "wrote " << (opts.out_dir / "bench.csv").string() << " (" << rows.size() << " rows, "
                      << failed << " failed)\n";
            return failed == rows.size() ? 1 : 0;
        } else if (*params) {
            if (params_arch) {
                nn::ArchSpec a;
                try {
                    a = nn::ArchSpec::parse(*params_arch, params_chi, params_input);
                } catch (const std::invalid_argument& e) {
                    throw ConfigError("--arch", e.what());
                }
                std::cout << param_count(a) << '\n';
            } else {
                std::cout << "layers_x_neurons,dense,tensor\n";
                for (const auto& row : parameter_table())
                    std::cout << row.label << ',' << param_count(row.dense) << ',' << param_count(row.tensor) << '\n';
            }
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}

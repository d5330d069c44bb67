#include "tnnswap/experiment.hpp"

#include "tnnswap/io.hpp"

#include <Eigen/Core>

#include <chrono>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

namespace tnnswap {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::ofstream open_out(const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    return out;
}

std::string utc_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    std::ostringstream s;
    s << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return s.str();
}

void write_manifest(const ExperimentConfig& cfg, const RunOptions& opts, const std::string& kind) {
    const json manifest{
        {"tool", "tnnswap"},
        {"version", TNNSWAP_VERSION},
        {"command", kind},
        {"argv", opts.command_line},
        {"config_hash", config_hash(cfg)},
        {"seed", cfg.training.seed},
        {"config", cfg.to_json()},
        {"compiler", __VERSION__},
        {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                      std::to_string(EIGEN_MINOR_VERSION)},
        {"timestamp", utc_timestamp()},
    };
    auto out = open_out(opts.out_dir / "manifest.json");
    out << manifest.dump(2) << '\n';
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
    return q + "\"";
}

template <typename T>
std::string opt_field(const std::optional<T>& v) {
    if (!v) return "";
    if constexpr (std::is_floating_point_v<T>) return format_double(*v);
    else return std::to_string(*v);
}

void write_results_row(std::ostream& out, const PriceOutcome& o) {
    out << to_string(o.method) << ',' << (o.method == Method::ls ? std::to_string(o.degree) : "") << ','
        << o.n_paths << ',' << format_double(o.summary.mean) << ',' << format_double(o.summary.std_error) << ','
        << o.seed << '\n';
}

} // namespace

void write_trace_csv(const TrainTrace& trace, const fs::path& path) {
    auto out = open_out(path);
    out << "epoch,price,loss,lr\n";
    for (const auto& r : trace.records)
        out << r.epoch << ',' << format_double(r.price) << ',' << format_double(r.loss) << ',' << format_double(r.lr)
            << '\n';
}

PriceOutcome run_price(const ExperimentConfig& cfg, const RunOptions& opts) {
    fs::create_directories(opts.out_dir);
    const auto start = std::chrono::steady_clock::now();
    const CheyetteParams params = cfg.make_params();
    const TimeGrid grid = cfg.make_grid();
    const SwaptionSpec spec = cfg.make_spec();

    PriceOutcome o;
    o.method = cfg.method.name;
    o.seed = cfg.training.seed;
    switch (cfg.method.name) {
    case Method::mc: {
        const auto e = mc_price_european(params, grid, spec, cfg.method.paths, RngSpec{cfg.training.seed, 0});
        o.n_paths = e.n_paths;
        o.summary = {1, e.price, e.std_error, 1.96 * e.std_error};
        break;
    }
    case Method::ls: {
        const auto e = ls_price_bermudan(params, grid, spec, cfg.make_ls_config(), RngSpec{cfg.training.seed, 0});
        o.degree = cfg.method.degree;
        o.n_paths = e.estimate.n_paths;
        o.summary = {1, e.estimate.price, e.estimate.std_error, 1.96 * e.estimate.std_error};
        break;
    }
    case Method::bsde_dense:
    case Method::bsde_tnn: {
        const nn::ArchSpec arch = cfg.make_arch();
        o.n_paths = cfg.training.batch;
        o.runs = cfg.training.runs;
        auto summary = open_out(opts.out_dir / "summary.csv");
        summary << "run_id,final_price,final_loss,seed\n";
        for (std::size_t r = 0; r < cfg.training.runs; ++r) {
            const std::uint64_t seed = RngSpec::derive_seed(cfg.training.seed, r);
            const TrainConfig tc = cfg.make_train_config(seed);
            EpochCallback progress;
            if (opts.log) {
                const std::size_t every = std::max<std::size_t>(1, cfg.training.epochs / 10);
                progress = [&, r](const EpochRecord& rec) {
                    if ((rec.epoch + 1) % every == 0)
                        *opts.log << "run " << r << " epoch " << rec.epoch + 1 << " price "
                                  << format_double(rec.price) << " loss " << format_double(rec.loss) << std::endl;
                };
            }
            const std::string tag = "run" + std::to_string(r);
            TrainTrace trace;
            if (spec.style == ExerciseStyle::european) {
                auto res = train_european(params, grid, spec, arch, tc, progress);
                nn::save_checkpoint(res.network, arch, seed, opts.out_dir / ("network_" + tag + ".ckpt"));
                trace = std::move(res.trace);
            } else {
                auto res = train_bermudan(params, grid, spec, arch, tc, progress);
                for (std::size_t m = 0; m < res.networks.size(); ++m)
                    nn::save_checkpoint(res.networks[m], arch, seed,
                                        opts.out_dir / ("network_" + tag + "_m" + std::to_string(m) + ".ckpt"));
                trace = std::move(res.trace);
            }
            write_trace_csv(trace, opts.out_dir / ("trace_" + tag + ".csv"));
            summary << r << ',' << format_double(trace.price) << ',' << format_double(trace.final_loss) << ','
                    << seed << '\n';
            if (opts.log) *opts.log << "run " << r << " final price " << format_double(trace.price) << std::endl;
            o.traces.push_back(std::move(trace));
        }
        o.summary = price_from_trace(o.traces);
        break;
    }
    }
    o.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    auto results = open_out(opts.out_dir / "results.csv");
    results << "method,degree,n_paths,price,stderr,seed\n";
    write_results_row(results, o);
    write_manifest(cfg, opts, "price");
    return o;
}

void run_simulate(const ExperimentConfig& cfg, std::size_t n_paths, const RunOptions& opts) {
    fs::create_directories(opts.out_dir);
    const CheyetteParams params = cfg.make_params();
    const PathBatch batch = simulate_paths(params, cfg.make_grid(), n_paths, RngSpec{cfg.training.seed, 0});
    write_paths_csv(batch, opts.out_dir / "paths.csv");
    write_manifest(cfg, opts, "simulate");
}

std::optional<std::size_t> epochs_to_threshold(std::span<const TrainTrace> traces, std::size_t segment_epochs,
                                               double threshold) {
    if (traces.empty()) return std::nullopt;
    const std::size_t len = traces.front().records.size();
    const std::size_t first = len > segment_epochs ? len - segment_epochs : 0;
    for (std::size_t e = first; e < len; ++e) {
        double mean = 0.0;
        for (const auto& t : traces) mean += t.records.at(e).price;
        mean /= static_cast<double>(traces.size());
        if (mean >= threshold) return traces.front().records[e].epoch + 1;
    }
    return std::nullopt;
}

std::vector<BenchRow> run_bench(const std::vector<ExperimentConfig>& configs, const RunOptions& opts) {
    if (configs.empty()) throw std::invalid_argument("bench: no configs given");
    fs::create_directories(opts.out_dir);
    std::vector<BenchRow> rows;
    for (const auto& cfg : configs) {
        BenchRow row;
        row.config = cfg.name;
        row.method = to_string(cfg.method.name);
        const bool bsde = cfg.method.name == Method::bsde_dense || cfg.method.name == Method::bsde_tnn;
        try {
            if (bsde) {
                const auto arch = cfg.make_arch();
                row.arch = arch.to_string();
                row.params = param_count(arch);
            }
            RunOptions sub = opts;
            sub.out_dir = opts.out_dir / cfg.name;
            if (opts.log) *opts.log << "bench: " << cfg.name << std::endl;
            row.outcome = run_price(cfg, sub);
            row.runs = row.outcome->runs;
            if (bsde && cfg.instrument.style == ExerciseStyle::bermudan) {
                const std::size_t segment = cfg.training.epochs_per_network
                                                ? cfg.training.epochs_per_network
                                                : cfg.training.epochs / cfg.instrument.tenor.size();
                for (std::size_t i = 0; i < kBenchThresholds.size(); ++i)
                    row.epochs_to_threshold[i] = epochs_to_threshold(row.outcome->traces, segment, kBenchThresholds[i]);
            }
        } catch (const std::exception& e) {
            row.error = e.what();
            if (opts.log) *opts.log << "bench: " << cfg.name << " failed: " << e.what() << std::endl;
        }
        rows.push_back(std::move(row));
    }

    auto out = open_out(opts.out_dir / "bench.csv");
    out << "config,method,arch,params,runs,price,stderr,ci_low,ci_high,wall_seconds,epochs_to_0.110,epochs_to_0.120,"
           "status,error\n";
    for (const auto& r : rows) {
        out << csv_field(r.config) << ',' << r.method << ',' << r.arch << ',' << opt_field(r.params) << ',';
        if (r.outcome) {
            const auto& s = r.outcome->summary;
            out << r.runs << ',' << format_double(s.mean) << ',' << format_double(s.std_error) << ','
                << (s.half_width_95 ? format_double(s.mean - *s.half_width_95) : "") << ','
                << (s.half_width_95 ? format_double(s.mean + *s.half_width_95) : "") << ','
                << format_double(r.outcome->wall_seconds);
        } else {
            out << ",,,,,";
        }
        out << ',' << opt_field(r.epochs_to_threshold[0]) << ',' << opt_field(r.epochs_to_threshold[1]) << ','
            << (r.error.empty() ? "ok" : "failed") << ',' << csv_field(r.error) << '\n';
    }
    return rows;
}

std::vector<ParamRow> parameter_table() {
    std::vector<ParamRow> rows;
    const std::pair<std::size_t, std::size_t> shapes[] = {{2, 16}, {2, 64}, {4, 64}, {10, 64}, {20, 256}};
    for (auto [layers, width] : shapes) {
        nn::ArchSpec d{nn::ArchFamily::dnn, std::vector<std::size_t>(layers, width), 2, 7};
        nn::ArchSpec t{nn::ArchFamily::tnn, std::vector<std::size_t>(layers, width), 2, 7};
        rows.push_back({std::to_string(layers) + "x" + std::to_string(width), d, t});
    }
    return rows;
}

} // namespace tnnswap

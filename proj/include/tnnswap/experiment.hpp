#pragma once

#include "tnnswap/bsde.hpp"
#include "tnnswap/config.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace tnnswap {

struct RunOptions {
    std::filesystem::path out_dir = "out";
    std::vector<std::string> command_line;  // recorded in the manifest
    std::ostream* log = nullptr;            // progress messages; null for silence
};

struct PriceOutcome {
    Method method = Method::mc;
    std::size_t degree = 0;   // ls only
    std::size_t n_paths = 0;  // mc/ls paths, or batch size for bsde
    std::size_t runs = 1;
    std::uint64_t seed = 0;
    RunSummary summary;       // for mc/ls: one run, std_error from the MC sample
    std::vector<TrainTrace> traces;
    double wall_seconds = 0.0;
};

/// Prices one config and writes results.csv, manifest.json and, for BSDE
/// methods, summary.csv, trace_run<r>.csv and network checkpoints.
PriceOutcome run_price(const ExperimentConfig& cfg, const RunOptions& opts);

/// Writes paths.csv with `n_paths` simulated paths over the whole grid.
void run_simulate(const ExperimentConfig& cfg, std::size_t n_paths, const RunOptions& opts);

/// Bermudan price thresholds reported by bench.
inline constexpr std::array<double, 2> kBenchThresholds{0.110, 0.120};

struct BenchRow {
    std::string config;
    std::string method;
    std::string arch;
    std::optional<std::size_t> params;
    std::size_t runs = 0;
    std::optional<PriceOutcome> outcome;
    std::array<std::optional<std::size_t>, 2> epochs_to_threshold;
    std::string error;  // empty on success
};

/// First epoch at which the run-mean price of the final network's segment
/// reaches `threshold`.
std::optional<std::size_t> epochs_to_threshold(std::span<const TrainTrace> traces, std::size_t segment_epochs,
                                               double threshold);

/// Runs every config into out_dir/<config name>/ and writes out_dir/bench.csv.
/// A failing config is recorded in its row and the rest still run.
std::vector<BenchRow> run_bench(const std::vector<ExperimentConfig>& configs, const RunOptions& opts);

void write_trace_csv(const TrainTrace& trace, const std::filesystem::path& path);

/// Architectures and parameter counts of the benchmark parameter table.
struct ParamRow {
    std::string label;
    nn::ArchSpec dense;
    nn::ArchSpec tensor;
};
std::vector<ParamRow> parameter_table();

} // namespace tnnswap

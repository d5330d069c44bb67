#pragma once

#include "tnnswap/cheyette.hpp"
#include "tnnswap/nn/adam.hpp"
#include "tnnswap/nn/network.hpp"
#include "tnnswap/simulate.hpp"

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

namespace tnnswap {

using nn::Matrix;

enum class ExerciseStyle { european, bermudan };

/// Payer swaption on tenor T_0 < ... < T_n with fixed rate K.
struct SwaptionSpec {
    std::vector<double> tenor;
    double fixed_rate = 0.0;
    ExerciseStyle style = ExerciseStyle::european;

    SwaptionSpec(std::vector<double> tenor, double fixed_rate, ExerciseStyle style);

    std::size_t n() const { return tenor.size() - 1; }
    /// T_m - T_{m-1}, for m >= 1.
    double accrual(std::size_t m) const { return tenor[m] - tenor[m - 1]; }
};

/// Grid indices k_m with t_{k_m} = T_m; throws if a tenor date is off grid.
std::vector<std::size_t> tenor_indices(const SwaptionSpec& spec, const TimeGrid& grid);

/// (1 - P(T_m,T_n) - K sum_{l>m} P(T_m,T_l) dT_l)_+ for factors (x, y) at T_m.
double exercise_value(const CheyetteParams& params, const SwaptionSpec& spec, std::size_t m,
                      std::span<const double> x, std::span<const double> y);

/// European terminal condition per path, from the factors at T_0.
std::vector<double> european_terminal(const CheyetteParams& params, const SwaptionSpec& spec,
                                      const PathBatch& paths);

/// Exercise values [paths x (n+1)], column m from the factors at T_m.
Matrix bermudan_payoffs(const CheyetteParams& params, const SwaptionSpec& spec, const PathBatch& paths);

enum class InputScaling {
    raw,     // (X, Y, t) as simulated
    factor,  // X_i / (eta_i sqrt(t_end)), Y_i / (eta_i^2 t_end), t / t_end
};

/// Per-column input factors for the given scaling mode; ones for raw.
nn::Vector input_scale_vector(const CheyetteParams& params, const TimeGrid& grid, InputScaling mode);

struct TrainConfig {
    std::size_t epochs = 1000;
    std::size_t batch = 100;
    /// Adam steps per epoch, each on its own path batch.
    std::size_t steps_per_epoch = 1;
    std::array<double, 4> rates{1e-2, 1e-3, 1e-4, 1e-5};
    std::uint64_t seed = 0;
    /// Off: the same steps_per_epoch batches are reused every epoch.
    bool fresh_paths = true;
    InputScaling input_scaling = InputScaling::raw;
    /// Bermudan only; 0 splits `epochs` evenly over the n+1 networks.
    std::size_t epochs_per_network = 0;
    /// Bermudan only; start network m from the trained network m+1.
    bool warm_start = false;

    void validate() const;
};

struct EpochRecord;
/// Optional per-epoch observer (progress reporting); not part of the result.
using EpochCallback = std::function<void(const EpochRecord&)>;

struct EpochRecord {
    std::size_t epoch;
    double price;
    double loss;
    double lr;
};

/// Training history plus the terminal estimate. For Bermudan runs the epoch
/// counter runs over all networks in training order (n down to 0) and the
/// price column is the mean estimate at the left end of the interval being
/// trained, which for the last network is the option price.
struct TrainTrace {
    std::vector<EpochRecord> records;
    double price = 0.0;
    double price_stderr = 0.0;  // across the batch at t = 0
    double final_loss = 0.0;
};

/// Network inputs, tangents and recursion data for one path batch on grid
/// interval [k_start, k_end]. Rows are path-major: row j*L + (k - k_start).
struct IntervalBatch {
    Matrix input;    // [M*L x (2d+1)] = (X, Y, t)
    Matrix tangent;  // same shape; eta . dW^{j,k} in the X columns for k < k_end, zero elsewhere
    Matrix rate_dt;  // [M*(L-1) x 1]: r^{j,k} dt for k in [k_start, k_end)
    Matrix target;   // [M x 1] terminal condition at k_end
    std::vector<Eigen::Index> prev_rows, next_rows, terminal_rows, start_rows;
};

IntervalBatch make_interval_batch(const CheyetteParams& params, const PathBatch& paths, std::size_t k_start,
                                  std::size_t k_end, std::span<const double> target);

struct LossEvaluation {
    double loss = 0.0;
    double recursion = 0.0;
    double terminal = 0.0;
    double start_mean = 0.0;    // batch mean of the estimate at k_start
    double start_stderr = 0.0;
    std::vector<Matrix> grads;  // in Network::parameters() order
};

/// Deep-BSDE loss: sum over paths and k of (V^{k+1} - [V^k (1 + r^k dt) + grad_X V^k . eta dW^k])^2
/// plus sum over paths of (V^{k_end} - target)^2, with exact parameter gradients
/// (the input-gradient term is differentiated through as well).
LossEvaluation bsde_loss(const nn::Network& net, const IntervalBatch& batch, bool with_grad = true);

struct EuropeanResult {
    TrainTrace trace;
    nn::Network network;
};

struct BermudanResult {
    TrainTrace trace;
    std::vector<nn::Network> networks;     // index m: continuation on [T_{m-1}, T_m]
    std::vector<TrainTrace> network_traces;
};

EuropeanResult train_european(const CheyetteParams& params, const TimeGrid& grid, const SwaptionSpec& spec,
                              const nn::ArchSpec& arch, const TrainConfig& cfg, const EpochCallback& on_epoch = {});

BermudanResult train_bermudan(const CheyetteParams& params, const TimeGrid& grid, const SwaptionSpec& spec,
                              const nn::ArchSpec& arch, const TrainConfig& cfg, const EpochCallback& on_epoch = {});

/// Mean over R independent runs with a 1.96 stderr band; the band is absent for R < 2.
struct RunSummary {
    std::size_t runs = 0;
    double mean = 0.0;
    double std_error = 0.0;
    std::optional<double> half_width_95;
};

RunSummary summarize_prices(std::span<const double> prices);
RunSummary price_from_trace(std::span<const TrainTrace> traces);

} // namespace tnnswap

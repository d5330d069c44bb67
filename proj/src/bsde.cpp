#include "tnnswap/bsde.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace tnnswap {

SwaptionSpec::SwaptionSpec(std::vector<double> tenor_, double fixed_rate_, ExerciseStyle style_)
    : tenor(std::move(tenor_)), fixed_rate(fixed_rate_), style(style_) {
    if (tenor.size() < 2) throw std::invalid_argument("SwaptionSpec: tenor needs at least two dates");
    if (!(tenor.front() > 0.0)) throw std::invalid_argument("SwaptionSpec: T_0 must be positive");
    for (std::size_t i = 1; i < tenor.size(); ++i)
        if (!(tenor[i] > tenor[i - 1])) throw std::invalid_argument("SwaptionSpec: tenor must be strictly increasing");
    if (!(fixed_rate >= 0.0) || !std::isfinite(fixed_rate))
        throw std::invalid_argument("SwaptionSpec: fixed rate must be finite and non-negative");
}

std::vector<std::size_t> tenor_indices(const SwaptionSpec& spec, const TimeGrid& grid) {
    std::vector<std::size_t> ks;
    ks.reserve(spec.tenor.size());
    for (double t : spec.tenor) {
        try {
            ks.push_back(grid.index_of(t));
        } catch (const std::invalid_argument&) {
            throw std::invalid_argument("tenor date " + std::to_string(t) + " does not lie on the time grid");
        }
    }
    return ks;
}

double exercise_value(const CheyetteParams& params, const SwaptionSpec& spec, std::size_t m,
                      std::span<const double> x, std::span<const double> y) {
    if (m > spec.n()) throw std::out_of_range("exercise_value: exercise index beyond tenor");
    const double tm = spec.tenor[m];
    const double p0m = params.curve.discount(tm);
    auto bond = [&](std::size_t l) {
        const double tl = spec.tenor[l];
        return params.curve.discount(tl) / p0m * std::exp(-zcb_exponent(params, tm, tl, x.data(), y.data()));
    };
    double annuity = 0.0;
    for (std::size_t l = m + 1; l <= spec.n(); ++l) annuity += bond(l) * spec.accrual(l);
    const double pn = m == spec.n() ? 1.0 : bond(spec.n());
    return std::max(0.0, 1.0 - pn - spec.fixed_rate * annuity);
}

std::vector<double> european_terminal(const CheyetteParams& params, const SwaptionSpec& spec,
                                      const PathBatch& paths) {
    const std::size_t k0 = tenor_indices(spec, paths.grid())[0];
    if (k0 > paths.last_step()) throw std::invalid_argument("european_terminal: paths stop before T_0");
    std::vector<double> phi(paths.paths());
    for (std::size_t j = 0; j < paths.paths(); ++j)
        phi[j] = exercise_value(params, spec, 0, paths.x(j, k0), paths.y(j, k0));
    return phi;
}

Matrix bermudan_payoffs(const CheyetteParams& params, const SwaptionSpec& spec, const PathBatch& paths) {
    const auto ks = tenor_indices(spec, paths.grid());
    if (ks.back() > paths.last_step()) throw std::invalid_argument("bermudan_payoffs: paths stop before T_n");
    Matrix out(static_cast<Eigen::Index>(paths.paths()), static_cast<Eigen::Index>(ks.size()));
    for (std::size_t j = 0; j < paths.paths(); ++j)
        for (std::size_t m = 0; m < ks.size(); ++m)
            out(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(m)) =
                exercise_value(params, spec, m, paths.x(j, ks[m]), paths.y(j, ks[m]));
    return out;
}

nn::Vector input_scale_vector(const CheyetteParams& params, const TimeGrid& grid, InputScaling mode) {
    const std::size_t d = params.factors();
    nn::Vector s = nn::Vector::Ones(static_cast<Eigen::Index>(2 * d + 1));
    if (mode == InputScaling::raw) return s;
    const double horizon = grid.t_end();
    for (std::size_t i = 0; i < d; ++i) {
        const double e = params.eta[i];
        if (e > 0.0) {
            s(static_cast<Eigen::Index>(i)) = 1.0 / (e * std::sqrt(horizon));
            s(static_cast<Eigen::Index>(d + i)) = 1.0 / (e * e * horizon);
        }
    }
    s(static_cast<Eigen::Index>(2 * d)) = 1.0 / horizon;
    return s;
}

void TrainConfig::validate() const {
    if (epochs == 0 || epochs % 4 != 0)
        throw std::invalid_argument("TrainConfig: epochs must be a positive multiple of 4");
    if (batch == 0) throw std::invalid_argument("TrainConfig: batch must be positive");
    if (steps_per_epoch == 0) throw std::invalid_argument("TrainConfig: steps_per_epoch must be positive");
    if (epochs_per_network % 4 != 0)
        throw std::invalid_argument("TrainConfig: epochs_per_network must be a multiple of 4");
    for (double r : rates)
        if (!(r > 0.0)) throw std::invalid_argument("TrainConfig: learning rates must be positive");
}

IntervalBatch make_interval_batch(const CheyetteParams& params, const PathBatch& paths, std::size_t k_start,
                                  std::size_t k_end, std::span<const double> target) {
    if (!(k_start < k_end) || k_end > paths.last_step())
        throw std::invalid_argument("make_interval_batch: invalid interval");
    if (target.size() != paths.paths()) throw std::invalid_argument("make_interval_batch: one target per path");
    const std::size_t d = paths.factors();
    const std::size_t m = paths.paths();
    const std::size_t len = k_end - k_start + 1;
    const auto width = static_cast<Eigen::Index>(2 * d + 1);
    const double dt = paths.grid().dt();

    std::vector<double> fwd(len);
    for (std::size_t k = k_start; k < k_end; ++k) fwd[k - k_start] = params.curve.forward_rate(paths.grid().point(k));

    IntervalBatch b;
    b.input.resize(static_cast<Eigen::Index>(m * len), width);
    b.tangent = Matrix::Zero(static_cast<Eigen::Index>(m * len), width);
    b.rate_dt.resize(static_cast<Eigen::Index>(m * (len - 1)), 1);
    b.target.resize(static_cast<Eigen::Index>(m), 1);
    for (std::size_t j = 0; j < m; ++j) {
        for (std::size_t k = k_start; k <= k_end; ++k) {
            const auto row = static_cast<Eigen::Index>(j * len + (k - k_start));
            const auto x = paths.x(j, k);
            const auto y = paths.y(j, k);
            for (std::size_t i = 0; i < d; ++i) {
                b.input(row, static_cast<Eigen::Index>(i)) = x[i];
                b.input(row, static_cast<Eigen::Index>(d + i)) = y[i];
            }
            b.input(row, width - 1) = paths.grid().point(k);
            if (k < k_end) {
                const auto dw = paths.dw(j, k);
                double r = fwd[k - k_start];
                for (std::size_t i = 0; i < d; ++i) {
                    b.tangent(row, static_cast<Eigen::Index>(i)) = params.eta[i] * dw[i];
                    r += x[i];
                }
                b.rate_dt(static_cast<Eigen::Index>(b.prev_rows.size()), 0) = r * dt;
                b.prev_rows.push_back(row);
                b.next_rows.push_back(row + 1);
            }
        }
        b.start_rows.push_back(static_cast<Eigen::Index>(j * len));
        b.terminal_rows.push_back(static_cast<Eigen::Index>(j * len + len - 1));
        b.target(static_cast<Eigen::Index>(j), 0) = target[j];
    }
    return b;
}

LossEvaluation bsde_loss(const nn::Network& net, const IntervalBatch& batch, bool with_grad) {
    nn::Tape tape;
    const auto binding = net.bind(tape);
    const auto input = tape.constant(batch.input);
    const auto tangent = tape.constant(batch.tangent);
    const auto [value, jvp] = net.forward_dual(tape, binding, input, tangent);

    const auto v_prev = tape.gather_rows(value, batch.prev_rows);
    const auto v_next = tape.gather_rows(value, batch.next_rows);
    const auto j_prev = tape.gather_rows(jvp, batch.prev_rows);
    const auto v_tilde = tape.add(tape.add(v_prev, tape.mul(v_prev, tape.constant(batch.rate_dt))), j_prev);
    const auto recursion = tape.sum_squares(tape.sub(v_next, v_tilde));
    const auto v_term = tape.gather_rows(value, batch.terminal_rows);
    const auto terminal = tape.sum_squares(tape.sub(v_term, tape.constant(batch.target)));
    const auto loss = tape.add(recursion, terminal);

    LossEvaluation ev;
    ev.loss = tape.value(loss)(0, 0);
    ev.recursion = tape.value(recursion)(0, 0);
    ev.terminal = tape.value(terminal)(0, 0);
    const Matrix& v = tape.value(value);
    double sum = 0.0, sum_sq = 0.0;
    for (auto r : batch.start_rows) {
        sum += v(r, 0);
        sum_sq += v(r, 0) * v(r, 0);
    }
    const auto n = static_cast<double>(batch.start_rows.size());
    ev.start_mean = sum / n;
    ev.start_stderr = n > 1 ? std::sqrt(std::max(0.0, (sum_sq - n * ev.start_mean * ev.start_mean) / (n - 1)) / n) : 0.0;
    if (with_grad) {
        tape.backward(loss);
        ev.grads = nn::gradients(tape, binding);
    }
    return ev;
}

namespace {

// Training allocates and frees the same large tape buffers every step; keep
// them on the heap instead of round-tripping through mmap.
void keep_large_allocations() {
#if defined(__GLIBC__)
    static const bool once = [] {
        mallopt(M_MMAP_THRESHOLD, 1 << 30);
        mallopt(M_TRIM_THRESHOLD, 1 << 30);
        return true;
    }();
    (void)once;
#endif
}

void check_arch(const CheyetteParams& params, const nn::ArchSpec& arch) {
    if (arch.input_width != 2 * params.factors() + 1)
        throw std::invalid_argument("network input width must be 2d+1 = " + std::to_string(2 * params.factors() + 1));
}

Matrix state_rows(const PathBatch& paths, std::size_t k) {
    const std::size_t d = paths.factors();
    Matrix in(static_cast<Eigen::Index>(paths.paths()), static_cast<Eigen::Index>(2 * d + 1));
    for (std::size_t j = 0; j < paths.paths(); ++j) {
        const auto row = static_cast<Eigen::Index>(j);
        for (std::size_t i = 0; i < d; ++i) {
            in(row, static_cast<Eigen::Index>(i)) = paths.x(j, k)[i];
            in(row, static_cast<Eigen::Index>(d + i)) = paths.y(j, k)[i];
        }
        in(row, static_cast<Eigen::Index>(2 * d)) = paths.grid().point(k);
    }
    return in;
}

template <typename TargetFn>
TrainTrace train_interval(nn::Network& net, const CheyetteParams& params, const TimeGrid& grid,
                          std::size_t k_start, std::size_t k_end, std::size_t epochs, std::size_t epoch_offset,
                          const TrainConfig& cfg, std::uint64_t path_seed, const EpochCallback& on_epoch,
                          TargetFn&& target_fn) {
    keep_large_allocations();
    nn::AdamState adam;
    const nn::LrSchedule schedule{epochs, cfg.rates};
    TrainTrace trace;
    trace.records.reserve(epochs);
    auto params_ptrs = net.parameters();
    for (std::size_t e = 0; e < epochs; ++e) {
        const double lr = schedule.rate(e);
        double loss_sum = 0.0;
        double price = 0.0;
        for (std::size_t s = 0; s < cfg.steps_per_epoch; ++s) {
            const auto stream = static_cast<std::uint32_t>(cfg.fresh_paths ? e * cfg.steps_per_epoch + s : s);
            const PathBatch paths = simulate_paths(params, grid, cfg.batch, RngSpec{path_seed, stream}, k_end);
            const std::vector<double> target = target_fn(paths);
            const IntervalBatch batch = make_interval_batch(params, paths, k_start, k_end, target);
            const LossEvaluation ev = bsde_loss(net, batch);
            if (!std::isfinite(ev.loss))
                throw std::runtime_error("BSDE training diverged: non-finite loss at epoch " +
                                         std::to_string(epoch_offset + e) + " (recursion " +
                                         std::to_string(ev.recursion) + ", terminal " + std::to_string(ev.terminal) +
                                         ")");
            nn::adam_step(adam, params_ptrs, ev.grads, lr);
            loss_sum += ev.loss;
            price = ev.start_mean;
        }
        trace.records.push_back({epoch_offset + e, price, loss_sum / static_cast<double>(cfg.steps_per_epoch), lr});
        if (on_epoch) on_epoch(trace.records.back());
    }
    return trace;
}

} // namespace

EuropeanResult train_european(const CheyetteParams& params, const TimeGrid& grid, const SwaptionSpec& spec,
                              const nn::ArchSpec& arch, const TrainConfig& cfg,
                              const EpochCallback& on_epoch) {
    if (spec.style != ExerciseStyle::european) throw std::invalid_argument("train_european: swaption is not European");
    cfg.validate();
    check_arch(params, arch);
    const std::size_t k0 = tenor_indices(spec, grid)[0];

    nn::Network net = nn::Network::init(arch, RngSpec::derive_seed(cfg.seed, 0));
    net.set_input_scale(input_scale_vector(params, grid, cfg.input_scaling));
    const std::uint64_t path_seed = RngSpec::derive_seed(cfg.seed, 1);
    auto terminal = [&](const PathBatch& paths) { return european_terminal(params, spec, paths); };
    TrainTrace trace = train_interval(net, params, grid, 0, k0, cfg.epochs, 0, cfg, path_seed, on_epoch, terminal);

    // Terminal estimate from the trained network on an unseen batch.
    const PathBatch check = simulate_paths(params, grid, cfg.batch, RngSpec{path_seed, 0xFFFFFFFFu}, k0);
    const LossEvaluation ev = bsde_loss(net, make_interval_batch(params, check, 0, k0, terminal(check)), false);
    trace.price = ev.start_mean;
    trace.price_stderr = ev.start_stderr;
    trace.final_loss = trace.records.back().loss;
    return {std::move(trace), std::move(net)};
}

BermudanResult train_bermudan(const CheyetteParams& params, const TimeGrid& grid, const SwaptionSpec& spec,
                              const nn::ArchSpec& arch, const TrainConfig& cfg,
                              const EpochCallback& on_epoch) {
    if (spec.style != ExerciseStyle::bermudan) throw std::invalid_argument("train_bermudan: swaption is not Bermudan");
    cfg.validate();
    check_arch(params, arch);
    const auto ks = tenor_indices(spec, grid);
    const std::size_t n = spec.n();
    const std::size_t per_net = cfg.epochs_per_network ? cfg.epochs_per_network : cfg.epochs / (n + 1);
    if (!cfg.epochs_per_network && cfg.epochs % (n + 1) != 0)
        throw std::invalid_argument("train_bermudan: epochs must split evenly over the " + std::to_string(n + 1) +
                                    " networks");
    if (per_net == 0 || per_net % 4 != 0)
        throw std::invalid_argument("train_bermudan: epochs per network (" + std::to_string(per_net) +
                                    ") must be a positive multiple of 4");

    std::vector<std::optional<nn::Network>> nets(n + 1);
    std::vector<TrainTrace> traces(n + 1);
    TrainTrace combined;
    std::size_t epoch_offset = 0;
    for (std::size_t step = 0; step <= n; ++step) {
        const std::size_t m = n - step;
        const std::size_t k_start = m == 0 ? 0 : ks[m - 1];
        const std::size_t k_end = ks[m];
        nn::Network net = (cfg.warm_start && m < n) ? *nets[m + 1]
                                                    : nn::Network::init(arch, RngSpec::derive_seed(cfg.seed, 100 + m));
        net.set_input_scale(input_scale_vector(params, grid, cfg.input_scaling));
        const nn::Network* next = m < n ? &*nets[m + 1] : nullptr;
        auto target = [&](const PathBatch& paths) {
            std::vector<double> v(paths.paths());
            for (std::size_t j = 0; j < paths.paths(); ++j)
                v[j] = exercise_value(params, spec, m, paths.x(j, k_end), paths.y(j, k_end));
            if (next) {
                const Matrix cont = next->evaluate(state_rows(paths, k_end));
                for (std::size_t j = 0; j < v.size(); ++j) v[j] = std::max(v[j], cont(static_cast<Eigen::Index>(j), 0));
            }
            return v;
        };
        traces[m] = train_interval(net, params, grid, k_start, k_end, per_net, epoch_offset, cfg,
                                   RngSpec::derive_seed(cfg.seed, 1000 + m), on_epoch, target);
        epoch_offset += per_net;
        traces[m].final_loss = traces[m].records.back().loss;
        traces[m].price = traces[m].records.back().price;
        combined.records.insert(combined.records.end(), traces[m].records.begin(), traces[m].records.end());
        nets[m] = std::move(net);
    }

    // All paths start at X = Y = 0, so C^0 at t = 0 is a single network evaluation.
    const Matrix origin = Matrix::Zero(1, static_cast<Eigen::Index>(arch.input_width));
    combined.price = nets[0]->evaluate(origin)(0, 0);
    combined.price_stderr = 0.0;
    combined.final_loss = traces[0].final_loss;

    BermudanResult out{std::move(combined), {}, std::move(traces)};
    for (auto& net : nets) out.networks.push_back(std::move(*net));
    return out;
}

RunSummary summarize_prices(std::span<const double> prices) {
    RunSummary s;
    s.runs = prices.size();
    if (prices.empty()) return s;
    double sum = 0.0;
    for (double p : prices) sum += p;
    s.mean = sum / static_cast<double>(s.runs);
    if (s.runs >= 2) {
        double ss = 0.0;
        for (double p : prices) ss += (p - s.mean) * (p - s.mean);
        s.std_error = std::sqrt(ss / static_cast<double>(s.runs - 1) / static_cast<double>(s.runs));
        s.half_width_95 = 1.96 * s.std_error;
    }
    return s;
}

RunSummary price_from_trace(std::span<const TrainTrace> traces) {
    std::vector<double> prices;
    prices.reserve(traces.size());
    for (const auto& t : traces) prices.push_back(t.price);
    return summarize_prices(prices);
}

} // namespace tnnswap

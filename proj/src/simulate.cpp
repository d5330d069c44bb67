#include "tnnswap/simulate.hpp"

#include "tnnswap/io.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>
#include <string>

namespace tnnswap {

TimeGrid::TimeGrid(double t_end, std::size_t n_steps) : t_end_(t_end), n_steps_(n_steps) {
    if (!(t_end > 0.0) || !std::isfinite(t_end)) throw std::invalid_argument("TimeGrid: t_end must be positive");
    if (n_steps == 0) throw std::invalid_argument("TimeGrid: n_steps must be positive");
    dt_ = t_end / static_cast<double>(n_steps);
}

std::size_t TimeGrid::index_of(double t) const {
    const double pos = t / dt_;
    const double k = std::round(pos);
    if (k < 0.0 || k > static_cast<double>(n_steps_) || std::abs(pos - k) > 1e-9 * std::max(1.0, k))
        throw std::invalid_argument("TimeGrid: t=" + std::to_string(t) + " is not a grid point (dt=" +
                                    std::to_string(dt_) + ")");
    return static_cast<std::size_t>(k);
}

PathBatch::PathBatch(TimeGrid grid, std::size_t m_paths, std::size_t factors, std::size_t last_step)
    : grid_(grid), m_(m_paths), d_(factors), last_(last_step) {
    if (m_paths == 0) throw std::invalid_argument("PathBatch: need at least one path");
    if (last_step > grid_.n_steps()) throw std::invalid_argument("PathBatch: last_step beyond grid");
    x_.assign(m_ * (last_ + 1) * d_, 0.0);
    y_.assign(m_ * (last_ + 1) * d_, 0.0);
    dw_.assign(m_ * last_ * d_, 0.0);
}

void euler_step(const CheyetteParams& params, double dt, std::span<double> x, std::span<double> y,
                std::span<const double> dw) {
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double k = params.kappa[i];
        const double e = params.eta[i];
        const double x0 = x[i];
        const double y0 = y[i];
        x[i] = x0 + (y0 - k * x0) * dt + e * dw[i];
        y[i] = y0 + (e * e - 2.0 * k * y0) * dt;
    }
}

std::vector<double> gaussian_increments(const RngSpec& rng, std::size_t paths, std::size_t steps,
                                        std::size_t coords) {
    std::vector<double> z(paths * steps * coords);
    for (std::size_t j = 0; j < paths; ++j)
        for (std::size_t k = 0; k < steps; ++k)
            rng.fill_normals(static_cast<std::uint32_t>(j), static_cast<std::uint32_t>(k),
                             std::span<double>(&z[(j * steps + k) * coords], coords));
    return z;
}

PathBatch simulate_paths_with_increments(const CheyetteParams& params, const TimeGrid& grid,
                                         std::size_t m_paths, std::size_t last_step,
                                         std::span<const double> dw) {
    const std::size_t d = params.factors();
    PathBatch batch(grid, m_paths, d, last_step);
    if (dw.size() != m_paths * last_step * d)
        throw std::invalid_argument("simulate_paths: increment array has the wrong size");
    const double dt = grid.dt();
    std::size_t idx = 0;
    for (std::size_t j = 0; j < m_paths; ++j) {
        for (std::size_t k = 0; k < last_step; ++k) {
            auto inc = batch.dw_mut(j, k);
            for (std::size_t i = 0; i < d; ++i) inc[i] = dw[idx++];
            auto x = batch.x_mut(j, k + 1);
            auto y = batch.y_mut(j, k + 1);
            const auto xp = batch.x(j, k);
            const auto yp = batch.y(j, k);
            std::copy(xp.begin(), xp.end(), x.begin());
            std::copy(yp.begin(), yp.end(), y.begin());
            euler_step(params, dt, x, y, inc);
        }
    }
    return batch;
}

PathBatch simulate_paths(const CheyetteParams& params, const TimeGrid& grid, std::size_t m_paths,
                         const RngSpec& rng, std::size_t last_step) {
    if (last_step == 0) last_step = grid.n_steps();
    auto dw = gaussian_increments(rng, m_paths, last_step, params.factors());
    const double sqrt_dt = std::sqrt(grid.dt());
    for (double& v : dw) v *= sqrt_dt;
    return simulate_paths_with_increments(params, grid, m_paths, last_step, dw);
}

void write_paths_csv(const PathBatch& batch, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    const std::size_t d = batch.factors();
    out << "path_id,k,t";
    for (std::size_t i = 1; i <= d; ++i) out << ",x_" << i;
    for (std::size_t i = 1; i <= d; ++i) out << ",y_" << i;
    out << '\n';
    for (std::size_t j = 0; j < batch.paths(); ++j) {
        for (std::size_t k = 0; k <= batch.last_step(); ++k) {
            out << j << ',' << k << ',' << format_double(batch.grid().point(k));
            for (double v : batch.x(j, k)) out << ',' << format_double(v);
            for (double v : batch.y(j, k)) out << ',' << format_double(v);
            out << '\n';
        }
    }
}

} // namespace tnnswap

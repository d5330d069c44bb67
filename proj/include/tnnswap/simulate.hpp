#pragma once

#include "tnnswap/cheyette.hpp"
#include "tnnswap/rng.hpp"

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

namespace tnnswap {

/// Uniform partition 0 = t_0 < ... < t_N = t_end.
class TimeGrid {
public:
    TimeGrid(double t_end, std::size_t n_steps);

    double t_end() const { return t_end_; }
    std::size_t n_steps() const { return n_steps_; }
    double dt() const { return dt_; }
    double point(std::size_t k) const { return static_cast<double>(k) * dt_; }

    /// Grid index k with t_k == t. Throws std::invalid_argument when t is not a
    /// grid point; nothing is snapped.
    std::size_t index_of(double t) const;

private:
    double t_end_;
    std::size_t n_steps_;
    double dt_;
};

/// M simulated factor paths over grid points 0..last_step.
/// x, y have layout [path][step][factor]; dw has [path][step][factor] with
/// dw(j,k) the increment driving step k -> k+1.
class PathBatch {
public:
    PathBatch(TimeGrid grid, std::size_t m_paths, std::size_t factors, std::size_t last_step);

    const TimeGrid& grid() const { return grid_; }
    std::size_t paths() const { return m_; }
    std::size_t factors() const { return d_; }
    std::size_t last_step() const { return last_; }

    std::span<const double> x(std::size_t j, std::size_t k) const { return {&x_[offset(j, k)], d_}; }
    std::span<const double> y(std::size_t j, std::size_t k) const { return {&y_[offset(j, k)], d_}; }
    std::span<const double> dw(std::size_t j, std::size_t k) const { return {&dw_[dw_offset(j, k)], d_}; }

    std::span<double> x_mut(std::size_t j, std::size_t k) { return {&x_[offset(j, k)], d_}; }
    std::span<double> y_mut(std::size_t j, std::size_t k) { return {&y_[offset(j, k)], d_}; }
    std::span<double> dw_mut(std::size_t j, std::size_t k) { return {&dw_[dw_offset(j, k)], d_}; }

private:
    std::size_t offset(std::size_t j, std::size_t k) const { return (j * (last_ + 1) + k) * d_; }
    std::size_t dw_offset(std::size_t j, std::size_t k) const { return (j * last_ + k) * d_; }

    TimeGrid grid_;
    std::size_t m_, d_, last_;
    std::vector<double> x_, y_, dw_;
};

/// One Euler step of the factor SDE, in place.
void euler_step(const CheyetteParams& params, double dt, std::span<double> x, std::span<double> y,
                std::span<const double> dw);

/// i.i.d. standard normals, layout [path][step][coord]. Identical for equal
/// (rng, shape) regardless of call order or threading.
std::vector<double> gaussian_increments(const RngSpec& rng, std::size_t paths, std::size_t steps,
                                        std::size_t coords);

/// Euler-Maruyama simulation from X = Y = 0 up to grid index `last_step`
/// (defaults to the whole grid).
PathBatch simulate_paths(const CheyetteParams& params, const TimeGrid& grid, std::size_t m_paths,
                         const RngSpec& rng, std::size_t last_step = 0);

/// Same as simulate_paths but with caller-supplied increments (layout as in PathBatch::dw).
PathBatch simulate_paths_with_increments(const CheyetteParams& params, const TimeGrid& grid,
                                         std::size_t m_paths, std::size_t last_step,
                                         std::span<const double> dw);

/// CSV dump `path_id,k,t,x_1..x_d,y_1..y_d`.
void write_paths_csv(const PathBatch& batch, const std::filesystem::path& path);

} // namespace tnnswap

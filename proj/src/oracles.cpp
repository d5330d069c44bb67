#include "tnnswap/oracles.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <iostream>
#include <stdexcept>
#include <vector>

namespace tnnswap {

namespace {

// Streams one path at a time; calls visit(k, x, y, integrated_rate) at every
// grid point k <= last, with integrated_rate = sum_{i<k} r^i dt.
template <typename Visit>
void walk_path(const CheyetteParams& params, const TimeGrid& grid, const RngSpec& rng, std::uint32_t path,
               std::size_t last, std::span<const double> fwd, std::vector<double>& x, std::vector<double>& y,
               std::vector<double>& z, Visit&& visit) {
    const std::size_t d = params.factors();
    const double dt = grid.dt();
    const double sqrt_dt = std::sqrt(dt);
    std::fill(x.begin(), x.end(), 0.0);
    std::fill(y.begin(), y.end(), 0.0);
    double integral = 0.0;
    for (std::size_t k = 0;; ++k) {
        visit(k, std::span<const double>(x), std::span<const double>(y), integral);
        if (k == last) break;
        double r = fwd[k];
        for (std::size_t i = 0; i < d; ++i) r += x[i];
        integral += r * dt;
        rng.fill_normals(path, static_cast<std::uint32_t>(k), z);
        for (double& v : z) v *= sqrt_dt;
        euler_step(params, dt, x, y, z);
    }
}

std::vector<double> forwards(const CheyetteParams& params, const TimeGrid& grid, std::size_t last) {
    std::vector<double> f(last);
    for (std::size_t k = 0; k < last; ++k) f[k] = params.curve.forward_rate(grid.point(k));
    return f;
}

McEstimate finish(double sum, double sum_sq, std::size_t n) {
    McEstimate e;
    e.n_paths = n;
    const auto nd = static_cast<double>(n);
    e.price = sum / nd;
    if (n > 1) e.std_error = std::sqrt(std::max(0.0, (sum_sq - nd * e.price * e.price) / (nd - 1.0)) / nd);
    return e;
}

// Monomials in x of total degree 1..degree, in graded lexicographic order.
void basis_row(std::span<const double> x, std::size_t degree, double* out) {
    std::size_t c = 0;
    out[c++] = 1.0;
    std::vector<std::size_t> idx;
    for (std::size_t deg = 1; deg <= degree; ++deg) {
        idx.assign(deg, 0);
        while (true) {
            double v = 1.0;
            for (std::size_t i : idx) v *= x[i];
            out[c++] = v;
            // Next non-decreasing index tuple.
            std::size_t p = deg;
            while (p > 0 && idx[p - 1] == x.size() - 1) --p;
            if (p == 0) break;
            ++idx[p - 1];
            for (std::size_t q = p; q < deg; ++q) idx[q] = idx[p - 1];
        }
    }
}

} // namespace

McEstimate mc_price_european(const CheyetteParams& params, const TimeGrid& grid, const SwaptionSpec& spec,
                             std::size_t n_paths, const RngSpec& rng) {
    if (spec.style != ExerciseStyle::european) throw std::invalid_argument("mc_price_european: swaption is not European");
    if (n_paths == 0) throw std::invalid_argument("mc_price_european: need at least one path");
    const std::size_t k0 = tenor_indices(spec, grid)[0];
    const auto fwd = forwards(params, grid, k0);
    const std::size_t d = params.factors();
    std::vector<double> x(d), y(d), z(d);
    double sum = 0.0, sum_sq = 0.0;
    for (std::size_t j = 0; j < n_paths; ++j) {
        walk_path(params, grid, rng, static_cast<std::uint32_t>(j), k0, fwd, x, y, z,
                  [&](std::size_t k, std::span<const double> xs, std::span<const double> ys, double integral) {
                      if (k != k0) return;
                      const double v = std::exp(-integral) * exercise_value(params, spec, 0, xs, ys);
                      sum += v;
                      sum_sq += v * v;
                  });
    }
    return finish(sum, sum_sq, n_paths);
}

void LsConfig::validate(std::size_t factors) const {
    if (degree < 1) throw std::invalid_argument("LsConfig: degree must be at least 1");
    if (n_paths < 10 * ls_basis_size(factors, degree))
        throw std::invalid_argument("LsConfig: n_paths must be at least 10x the basis size");
}

std::size_t ls_basis_size(std::size_t factors, std::size_t degree) {
    // C(factors + degree, degree)
    std::size_t c = 1;
    for (std::size_t i = 1; i <= degree; ++i) c = c * (factors + i) / i;
    return c;
}

LsEstimate ls_price_bermudan(const CheyetteParams& params, const TimeGrid& grid, const SwaptionSpec& spec,
                             const LsConfig& cfg, const RngSpec& rng) {
    if (spec.style != ExerciseStyle::bermudan) throw std::invalid_argument("ls_price_bermudan: swaption is not Bermudan");
    const std::size_t d = params.factors();
    cfg.validate(d);
    const auto ks = tenor_indices(spec, grid);
    const std::size_t n = spec.n();
    const std::size_t paths = cfg.n_paths;
    const auto fwd = forwards(params, grid, ks.back());

    // Per path and exercise date: factors, exercise value and discount factor to 0.
    std::vector<double> xs(paths * (n + 1) * d);
    std::vector<double> phi(paths * (n + 1));
    std::vector<double> disc(paths * (n + 1));
    std::vector<double> x(d), y(d), z(d);
    for (std::size_t j = 0; j < paths; ++j) {
        std::size_t m = 0;
        walk_path(params, grid, rng, static_cast<std::uint32_t>(j), ks.back(), fwd, x, y, z,
                  [&](std::size_t k, std::span<const double> xv, std::span<const double> yv, double integral) {
                      if (m > n || k != ks[m]) return;
                      std::copy(xv.begin(), xv.end(), xs.begin() + static_cast<std::ptrdiff_t>((j * (n + 1) + m) * d));
                      phi[j * (n + 1) + m] = exercise_value(params, spec, m, xv, yv);
                      disc[j * (n + 1) + m] = std::exp(-integral);
                      ++m;
                  });
    }

    // cash[j]: discounted-to-0 cash flow under the current exercise policy.
    std::vector<double> cash(paths);
    for (std::size_t j = 0; j < paths; ++j) cash[j] = disc[j * (n + 1) + n] * phi[j * (n + 1) + n];

    const std::size_t nb = ls_basis_size(d, cfg.degree);
    LsEstimate out;
    std::vector<std::size_t> rows;
    for (std::size_t step = 1; step <= n; ++step) {
        const std::size_t m = n - step;
        rows.clear();
        for (std::size_t j = 0; j < paths; ++j)
            if (!cfg.itm_only || phi[j * (n + 1) + m] > 0.0) rows.push_back(j);
        if (rows.empty()) continue;

        Eigen::MatrixXd a(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(nb));
        Eigen::VectorXd b(static_cast<Eigen::Index>(rows.size()));
        Eigen::Matrix<double, 1, Eigen::Dynamic> row(static_cast<Eigen::Index>(nb));
        for (std::size_t r = 0; r < rows.size(); ++r) {
            const std::size_t j = rows[r];
            basis_row(std::span<const double>(&xs[(j * (n + 1) + m) * d], d), cfg.degree, row.data());
            a.row(static_cast<Eigen::Index>(r)) = row;
            b(static_cast<Eigen::Index>(r)) = cash[j] / disc[j * (n + 1) + m];
        }
        Eigen::VectorXd beta;
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
        if (qr.rank() == a.cols()) {
            beta = qr.solve(b);
        } else {
            if (!out.rank_deficient)
                std::cerr << "warning: Longstaff-Schwartz regression at T_" << m
                          << " is rank deficient; using the minimum-norm solution\n";
            out.rank_deficient = true;
            beta = Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd>(a).solve(b);
        }
        const Eigen::VectorXd fitted = a * beta;
        for (std::size_t r = 0; r < rows.size(); ++r) {
            const std::size_t j = rows[r];
            const double ex = phi[j * (n + 1) + m];
            if (ex > 0.0 && ex >= fitted(static_cast<Eigen::Index>(r))) cash[j] = disc[j * (n + 1) + m] * ex;
        }
    }

    double sum = 0.0, sum_sq = 0.0;
    for (double c : cash) {
        sum += c;
        sum_sq += c * c;
    }
    out.estimate = finish(sum, sum_sq, paths);
    return out;
}

double analytic_k0_price(const DiscountCurve& curve, double t0, double tn) {
    if (tn < t0) throw std::invalid_argument("analytic_k0_price: T_n before T_0");
    return curve.discount(t0) - curve.discount(tn);
}

double analytic_k0_price(const DiscountCurve& curve, const SwaptionSpec& spec) {
    if (spec.fixed_rate != 0.0) throw std::invalid_argument("analytic_k0_price: only defined for K = 0");
    return analytic_k0_price(curve, spec.tenor.front(), spec.tenor.back());
}

} // namespace tnnswap

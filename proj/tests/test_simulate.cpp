#include "tnnswap/simulate.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <sstream>

using namespace tnnswap;

namespace {

CheyetteParams base(double eta = 0.0065) { return CheyetteParams::uniform(3, -0.02, eta, DiscountCurve::reference()); }

// RK4 for dx/dt = y(t) - kappa x with y in closed form.
double mean_x_oracle(double kappa, double eta, double t_end) {
    auto y = [&](double t) { return eta * eta * (1.0 - std::exp(-2.0 * kappa * t)) / (2.0 * kappa); };
    auto f = [&](double t, double x) { return y(t) - kappa * x; };
    const int n = 10000;
    const double h = t_end / n;
    double x = 0.0;
    for (int i = 0; i < n; ++i) {
        const double t = i * h;
        const double k1 = f(t, x), k2 = f(t + h / 2, x + h / 2 * k1), k3 = f(t + h / 2, x + h / 2 * k2),
                     k4 = f(t + h, x + h * k3);
        x += h / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
    }
    return x;
}

double max_y_error(double dt) {
    const auto p = base();
    const auto n = static_cast<std::size_t>(std::llround(1.0 / dt));
    const TimeGrid grid(1.0, n);
    const auto b = simulate_paths(p, grid, 1, RngSpec{1, 0});
    double err = 0.0;
    for (std::size_t k = 0; k <= n; ++k) err = std::max(err, std::abs(b.y(0, k)[0] - y_closed_form(p, grid.point(k))[0]));
    return err;
}

} // namespace

TEST(TimeGrid, IndexOf) {
    const TimeGrid g(5.0, 500);
    EXPECT_DOUBLE_EQ(g.dt(), 0.01);
    EXPECT_EQ(g.index_of(1.0), 100u);
    EXPECT_EQ(g.index_of(5.0), 500u);
    EXPECT_EQ(g.index_of(0.0), 0u);
    EXPECT_THROW((void)g.index_of(1.005), std::invalid_argument);
    EXPECT_THROW((void)g.index_of(5.01), std::invalid_argument);
    EXPECT_THROW(TimeGrid(0.0, 10), std::invalid_argument);
    EXPECT_THROW(TimeGrid(1.0, 0), std::invalid_argument);
}

TEST(Simulate, SingleStepWithZeroIncrement) {
    const auto p = base();
    const TimeGrid g(5.0, 500);
    const std::vector<double> dw(3, 0.0);
    const auto b = simulate_paths_with_increments(p, g, 1, 1, dw);
    for (std::size_t i = 0; i < 3; ++i) {
        EXPECT_EQ(b.x(0, 1)[i], 0.0);
        EXPECT_NEAR(b.y(0, 1)[i], 4.225e-7, 1e-20);
    }
}

TEST(Simulate, ZeroVolatilityStaysAtZero) {
    const auto p = base(0.0);
    const auto b = simulate_paths(p, TimeGrid(5.0, 500), 4, RngSpec{3, 0});
    for (std::size_t j = 0; j < 4; ++j)
        for (std::size_t k = 0; k <= 500; ++k)
            for (std::size_t i = 0; i < 3; ++i) {
                EXPECT_EQ(b.x(j, k)[i], 0.0);
                EXPECT_EQ(b.y(j, k)[i], 0.0);
            }
}

TEST(Simulate, BatchInvariants) {
    const auto p = base();
    const auto b = simulate_paths(p, TimeGrid(5.0, 500), 50, RngSpec{5, 0});
    for (std::size_t j = 0; j < 50; ++j) {
        for (std::size_t i = 0; i < 3; ++i) {
            EXPECT_EQ(b.x(j, 0)[i], 0.0);
            EXPECT_EQ(b.y(j, 0)[i], 0.0);
        }
        for (std::size_t k = 0; k <= 500; ++k)
            for (std::size_t i = 0; i < 3; ++i) {
                EXPECT_GE(b.y(j, k)[i], 0.0);
                EXPECT_EQ(b.y(j, k)[i], b.y(0, k)[i]);
            }
    }
}

TEST(Simulate, IncrementsDriveTheScheme) {
    const auto p = base();
    const TimeGrid g(1.0, 100);
    const auto b = simulate_paths(p, g, 3, RngSpec{8, 0});
    for (std::size_t j = 0; j < 3; ++j)
        for (std::size_t k = 0; k < 100; ++k)
            for (std::size_t i = 0; i < 3; ++i) {
                const double x0 = b.x(j, k)[i], y0 = b.y(j, k)[i];
                EXPECT_NEAR(b.x(j, k + 1)[i], x0 + (y0 + 0.02 * x0) * 0.01 + 0.0065 * b.dw(j, k)[i], 1e-18);
            }
}

TEST(Simulate, DeterministicForSeed) {
    const auto p = base();
    const TimeGrid g(5.0, 500);
    const auto a = simulate_paths(p, g, 10, RngSpec{77, 0});
    const auto b = simulate_paths(p, g, 10, RngSpec{77, 0});
    for (std::size_t j = 0; j < 10; ++j)
        for (std::size_t k = 0; k <= 500; ++k) EXPECT_EQ(a.x(j, k)[1], b.x(j, k)[1]);
    // A path does not depend on how many others are simulated with it.
    const auto c = simulate_paths(p, g, 3, RngSpec{77, 0});
    EXPECT_EQ(a.x(2, 500)[0], c.x(2, 500)[0]);
}

TEST(Simulate, PartialHorizon) {
    const auto p = base();
    const auto full = simulate_paths(p, TimeGrid(5.0, 500), 4, RngSpec{12, 0});
    const auto part = simulate_paths(p, TimeGrid(5.0, 500), 4, RngSpec{12, 0}, 100);
    EXPECT_EQ(part.last_step(), 100u);
    EXPECT_EQ(part.x(3, 100)[2], full.x(3, 100)[2]);
}

TEST(SimulateProperty, EulerYMatchesClosedForm) {
    const auto p = base();
    const auto b = simulate_paths(p, TimeGrid(1.0, 100), 1, RngSpec{1, 0});
    EXPECT_NEAR(b.y(0, 100)[0], y_closed_form(p, 1.0)[0], 5e-8);
}

TEST(SimulateProperty, EulerYFirstOrder) {
    const double e4 = max_y_error(0.04), e2 = max_y_error(0.02), e1 = max_y_error(0.01);
    EXPECT_NEAR(e4 / e2, 2.0, 0.1);
    EXPECT_NEAR(e2 / e1, 2.0, 0.1);
}

TEST(SimulateProperty, XMeanAndVariance) {
    const auto p = base();
    const std::size_t m = 100000;
    const auto b = simulate_paths(p, TimeGrid(1.0, 100), m, RngSpec{99, 0});
    const double target_mean = mean_x_oracle(-0.02, 0.0065, 1.0);
    const double target_var = y_closed_form(p, 1.0)[0];
    for (std::size_t i = 0; i < 3; ++i) {
        double sum = 0.0;
        for (std::size_t j = 0; j < m; ++j) sum += b.x(j, 100)[i];
        const double mean = sum / m;
        double ss = 0.0, s4 = 0.0;
        for (std::size_t j = 0; j < m; ++j) {
            const double c = b.x(j, 100)[i] - mean;
            ss += c * c;
            s4 += c * c * c * c;
        }
        const double var = ss / (m - 1);
        const double mean_se = std::sqrt(var / m);
        const double var_se = std::sqrt((s4 / m - var * var) / m);
        EXPECT_LT(std::abs(mean - target_mean), 4.0 * mean_se) << "factor " << i;
        EXPECT_LT(std::abs(var - target_var), 4.0 * var_se) << "factor " << i;
    }
}

TEST(Simulate, PathCsvSchema) {
    const auto p = base();
    const auto b = simulate_paths(p, TimeGrid(0.02, 2), 2, RngSpec{4, 0});
    const auto path = std::filesystem::temp_directory_path() / "tnnswap_paths.csv";
    write_paths_csv(b, path);
    std::ifstream in(path);
    std::string header, line;
    std::getline(in, header);
    EXPECT_EQ(header, "path_id,k,t,x_1,x_2,x_3,y_1,y_2,y_3");
    std::size_t rows = 0;
    while (std::getline(in, line)) ++rows;
    EXPECT_EQ(rows, 6u);
}

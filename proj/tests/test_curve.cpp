#include "tnnswap/curve.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

using tnnswap::CurvePillar;
using tnnswap::DiscountCurve;

TEST(Curve, PillarValuesAreExact) {
    const auto c = DiscountCurve::reference();
    EXPECT_EQ(c.discount(0.0), 1.0);
    EXPECT_EQ(c.discount(5.0), 0.88232);
    EXPECT_EQ(c.discount(38.0), 0.46721);
}

TEST(Curve, LogLinearBetweenPillars) {
    const auto c = DiscountCurve::reference();
    EXPECT_NEAR(c.discount(1.5), 0.98263725, 5e-9);
    EXPECT_NEAR(c.discount(1.5), std::sqrt(0.99005 * 0.97528), 1e-15);
}

TEST(Curve, ForwardRates) {
    const auto c = DiscountCurve::reference();
    EXPECT_NEAR(c.forward_rate(1.3), 0.01503083765, 1e-11);
    EXPECT_NEAR(c.forward_rate(0.5), 0.00999983208, 1e-11);
    // Right-continuous at a pillar.
    EXPECT_DOUBLE_EQ(c.forward_rate(1.0), c.forward_rate(1.3));
    const auto flat = DiscountCurve::flat(0.02);
    for (double t : {0.0, 0.7, 3.0, 12.5, 39.9}) EXPECT_NEAR(flat.forward_rate(t), 0.02, 1e-12);
}

TEST(Curve, RangeErrors) {
    const auto c = DiscountCurve::reference();
    EXPECT_THROW((void)c.discount(-0.1), std::out_of_range);
    EXPECT_THROW((void)c.discount(38.01), std::out_of_range);
    EXPECT_THROW((void)c.forward_rate(38.0), std::out_of_range);
    EXPECT_THROW((void)c.forward_rate(-1e-9), std::out_of_range);
}

TEST(Curve, RejectsMalformedPillars) {
    EXPECT_THROW(DiscountCurve({{0.0, 0.9}, {1.0, 0.8}}), std::invalid_argument);
    EXPECT_THROW(DiscountCurve({{0.0, 1.0}, {1.0, 0.9}, {1.0, 0.8}}), std::invalid_argument);
    EXPECT_THROW(DiscountCurve({{0.0, 1.0}, {1.0, -0.2}}), std::invalid_argument);
    EXPECT_THROW(DiscountCurve({{0.0, 1.0}}), std::invalid_argument);
}

TEST(Curve, ReferenceIsNonIncreasing) {
    const auto c = DiscountCurve::reference();
    const auto p = c.pillars();
    for (std::size_t i = 1; i < p.size(); ++i) EXPECT_LE(p[i].price, p[i - 1].price);
}

// Exact piecewise integration of the forward curve reproduces discount().
TEST(CurveProperty, ForwardIntegratesToDiscount) {
    const auto c = DiscountCurve::reference();
    const auto p = c.pillars();
    for (double t = 0.0; t <= 38.0; t += 0.173) {
        double integral = 0.0;
        for (std::size_t a = 0; a + 1 < p.size() && p[a].maturity < t; ++a) {
            const double hi = std::min(t, p[a + 1].maturity);
            integral += c.forward_rate(p[a].maturity) * (hi - p[a].maturity);
        }
        EXPECT_NEAR(std::exp(-integral), c.discount(t), 1e-12) << "t=" << t;
        EXPECT_NEAR(c.integrated_forward(t), integral, 1e-12);
    }
}

TEST(CurveProperty, DiscountIsContinuousAtPillars) {
    const auto c = DiscountCurve::reference();
    for (const auto& p : c.pillars()) {
        if (p.maturity == 0.0 || p.maturity == c.last_maturity()) continue;
        EXPECT_NEAR(c.discount(p.maturity - 1e-10), p.price, 1e-10);
        EXPECT_NEAR(c.discount(p.maturity + 1e-10), p.price, 1e-10);
    }
}

TEST(Curve, CsvRoundTrip) {
    const auto dir = std::filesystem::temp_directory_path() / "tnnswap_curve_test";
    std::filesystem::create_directories(dir);
    const auto c = DiscountCurve::reference();
    c.write_csv(dir / "c.csv");
    const auto back = DiscountCurve::from_csv(dir / "c.csv");
    ASSERT_EQ(back.pillars().size(), c.pillars().size());
    for (std::size_t i = 0; i < c.pillars().size(); ++i) {
        EXPECT_EQ(back.pillars()[i].maturity, c.pillars()[i].maturity);
        EXPECT_EQ(back.pillars()[i].price, c.pillars()[i].price);
    }
    const auto bundled = DiscountCurve::from_csv(std::filesystem::path(TNNSWAP_SOURCE_DIR) / "data/reference_curve.csv");
    EXPECT_EQ(bundled.discount(5.0), 0.88232);

    std::ofstream(dir / "bad.csv") << "t,p\n0,1\n1,0.9\n";
    EXPECT_THROW(DiscountCurve::from_csv(dir / "bad.csv"), std::runtime_error);
}

#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace tnnswap {

/// Pillar of the initial zero-coupon curve: P(0, maturity) = price.
struct CurvePillar {
    double maturity;
    double price;
};

/// Initial discount curve T -> P(0,T).
///
/// Interpolation is linear in log P, so the implied instantaneous forward
/// f(0,t) is piecewise constant between pillars and right-continuous at them.
/// The curve never extrapolates: queries past the last pillar throw
/// std::out_of_range.
class DiscountCurve {
public:
    explicit DiscountCurve(std::vector<CurvePillar> pillars);

    /// Bundled zero-coupon bond prices used by the benchmark experiments
    /// (maturities 0..38 years).
    static DiscountCurve reference();

    /// P(0,T) = exp(-rate * T) sampled on a pillar grid reaching `horizon`.
    static DiscountCurve flat(double rate, double horizon = 40.0);

    /// Reads a `maturity,price` CSV with a header row.
    static DiscountCurve from_csv(const std::filesystem::path& path);

    double discount(double t) const;
    double forward_rate(double t) const;

    /// -log P(0,t): the integral of f(0,s) over [0,t].
    double integrated_forward(double t) const;

    double last_maturity() const { return pillars_.back().maturity; }
    std::span<const CurvePillar> pillars() const { return pillars_; }

    void write_csv(const std::filesystem::path& path) const;

private:
    // Index a of the interval [T_a, T_{a+1}) containing t.
    std::size_t interval(double t) const;

    std::vector<CurvePillar> pillars_;
    std::vector<double> log_price_;
};

} // namespace tnnswap

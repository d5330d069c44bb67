#pragma once

#include "tnnswap/curve.hpp"

#include <vector>

namespace tnnswap {

/// Multi-factor Cheyette model with constant mean reversion and volatility.
/// Factor Brownian drivers are uncorrelated.
struct CheyetteParams {
    std::vector<double> kappa;  // 1/years, each nonzero
    std::vector<double> eta;    // 1/years, each >= 0
    DiscountCurve curve;

    CheyetteParams(std::vector<double> kappa, std::vector<double> eta, DiscountCurve curve);

    /// d identical factors.
    static CheyetteParams uniform(std::size_t factors, double kappa, double eta, DiscountCurve curve);

    std::size_t factors() const { return kappa.size(); }
};

struct FactorState {
    double t = 0.0;
    std::vector<double> x;
    std::vector<double> y;
};

/// G_i(t,T) = (1 - exp(-kappa_i (T - t))) / kappa_i.
std::vector<double> g_function(const CheyetteParams& params, double t, double T);

/// X.G + 0.5 Y.G^2 for one state, i.e. minus the log of the bond's stochastic factor.
double zcb_exponent(const CheyetteParams& params, double t, double T,
                    const double* x, const double* y);

/// P(t,T) = P(0,T)/P(0,t) exp(-X.G(t,T) - 0.5 Y.G(t,T)^2).
double zcb_price(const CheyetteParams& params, const FactorState& state, double T);

/// r(t) = f(0,t) + sum_i x_i.
double short_rate(const CheyetteParams& params, const FactorState& state);

/// Y_i(t) = eta_i^2 (1 - exp(-2 kappa_i t)) / (2 kappa_i).
std::vector<double> y_closed_form(const CheyetteParams& params, double t);

} // namespace tnnswap

#include "tnnswap/cheyette.hpp"

#include <cmath>
#include <stdexcept>

namespace tnnswap {

CheyetteParams::CheyetteParams(std::vector<double> kappa_, std::vector<double> eta_, DiscountCurve curve_)
    : kappa(std::move(kappa_)), eta(std::move(eta_)), curve(std::move(curve_)) {
    if (kappa.empty()) throw std::invalid_argument("CheyetteParams: need at least one factor");
    if (kappa.size() != eta.size())
        throw std::invalid_argument("CheyetteParams: kappa and eta must have the same length");
    for (std::size_t i = 0; i < kappa.size(); ++i) {
        if (kappa[i] == 0.0 || !std::isfinite(kappa[i]))
            throw std::invalid_argument("CheyetteParams: kappa must be finite and nonzero");
        if (!(eta[i] >= 0.0) || !std::isfinite(eta[i]))
            throw std::invalid_argument("CheyetteParams: eta must be finite and non-negative");
    }
}

CheyetteParams CheyetteParams::uniform(std::size_t factors, double kappa, double eta, DiscountCurve curve) {
    return CheyetteParams(std::vector<double>(factors, kappa), std::vector<double>(factors, eta),
                          std::move(curve));
}

namespace {

double g_single(double kappa, double tau) {
    // expm1 keeps full precision when |kappa tau| is tiny.
    return -std::expm1(-kappa * tau) / kappa;
}

void check_order(double t, double T) {
    if (!(t <= T)) throw std::invalid_argument("g_function: requires t <= T");
}

} // namespace

std::vector<double> g_function(const CheyetteParams& params, double t, double T) {
    check_order(t, T);
    std::vector<double> g(params.factors());
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = g_single(params.kappa[i], T - t);
    return g;
}

double zcb_exponent(const CheyetteParams& params, double t, double T, const double* x, const double* y) {
    check_order(t, T);
    double e = 0.0;
    for (std::size_t i = 0; i < params.factors(); ++i) {
        const double g = g_single(params.kappa[i], T - t);
        e += x[i] * g + 0.5 * y[i] * g * g;
    }
    return e;
}

double zcb_price(const CheyetteParams& params, const FactorState& state, double T) {
    if (state.x.size() != params.factors() || state.y.size() != params.factors())
        throw std::invalid_argument("zcb_price: state dimension does not match factor count");
    const double ratio = params.curve.discount(T) / params.curve.discount(state.t);
    return ratio * std::exp(-zcb_exponent(params, state.t, T, state.x.data(), state.y.data()));
}

double short_rate(const CheyetteParams& params, const FactorState& state) {
    double r = params.curve.forward_rate(state.t);
    for (double xi : state.x) r += xi;
    return r;
}

std::vector<double> y_closed_form(const CheyetteParams& params, double t) {
    if (!(t >= 0.0)) throw std::invalid_argument("y_closed_form: requires t >= 0");
    std::vector<double> y(params.factors());
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double k = params.kappa[i];
        y[i] = params.eta[i] * params.eta[i] * (-std::expm1(-2.0 * k * t)) / (2.0 * k);
    }
    return y;
}

} // namespace tnnswap

#pragma once

#include "tnnswap/bsde.hpp"
#include "tnnswap/cheyette.hpp"
#include "tnnswap/rng.hpp"
#include "tnnswap/simulate.hpp"

#include <cstddef>

namespace tnnswap {

struct McEstimate {
    double price = 0.0;
    double std_error = 0.0;
    std::size_t n_paths = 0;
};

/// Plain Monte Carlo for a European swaption: sample mean of
/// exp(-sum_{k<k0} r^k dt) * payoff over paths simulated one at a time.
McEstimate mc_price_european(const CheyetteParams& params, const TimeGrid& grid, const SwaptionSpec& spec,
                             std::size_t n_paths, const RngSpec& rng);

struct LsConfig {
    std::size_t degree = 1;  // monomials in X up to this total degree, plus intercept
    bool itm_only = true;
    std::size_t n_paths = 100000;

    void validate(std::size_t factors) const;
};

/// Number of regressors for `degree` in `factors` variables, intercept included.
std::size_t ls_basis_size(std::size_t factors, std::size_t degree);

struct LsEstimate {
    McEstimate estimate;
    bool rank_deficient = false;  // some regression fell back to the pseudo-inverse
};

/// Longstaff-Schwartz lower-bound price of a Bermudan swaption.
LsEstimate ls_price_bermudan(const CheyetteParams& params, const TimeGrid& grid, const SwaptionSpec& spec,
                             const LsConfig& cfg, const RngSpec& rng);

/// P(0,T_0) - P(0,T_n): the model-free value of the K = 0 payer swaption.
double analytic_k0_price(const DiscountCurve& curve, double t0, double tn);
double analytic_k0_price(const DiscountCurve& curve, const SwaptionSpec& spec);

} // namespace tnnswap

#pragma once

#include "tnnswap/nn/tape.hpp"

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace tnnswap::nn {

struct AdamState {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::int64_t step = 0;
    std::vector<Matrix> m;
    std::vector<Matrix> v;
};

/// One bias-corrected Adam update. Moments are zero-initialized on first use.
/// Throws std::runtime_error on a non-finite gradient and leaves params untouched.
void adam_step(AdamState& state, std::span<Matrix* const> params, std::span<const Matrix> grads, double lr);

/// Piecewise-constant rate by quarter of the epoch budget: epoch e uses
/// rates[floor(4 e / total_epochs)].
struct LrSchedule {
    std::size_t total_epochs = 4;
    std::array<double, 4> rates{1e-2, 1e-3, 1e-4, 1e-5};

    double rate(std::size_t epoch) const;
};

} // namespace tnnswap::nn

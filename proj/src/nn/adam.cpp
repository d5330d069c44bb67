#include "tnnswap/nn/adam.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace tnnswap::nn {

void adam_step(AdamState& state, std::span<Matrix* const> params, std::span<const Matrix> grads, double lr) {
    if (params.size() != grads.size()) throw std::invalid_argument("adam_step: parameter/gradient count mismatch");
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (params[i]->rows() != grads[i].rows() || params[i]->cols() != grads[i].cols())
            throw std::invalid_argument("adam_step: gradient " + std::to_string(i) + " has the wrong shape");
        if (!grads[i].allFinite())
            throw std::runtime_error("adam_step: non-finite gradient in parameter " + std::to_string(i));
    }
    if (state.m.empty()) {
        for (const Matrix* p : params) {
            state.m.push_back(Matrix::Zero(p->rows(), p->cols()));
            state.v.push_back(Matrix::Zero(p->rows(), p->cols()));
        }
    }
    if (state.m.size() != params.size()) throw std::invalid_argument("adam_step: state belongs to another network");

    ++state.step;
    const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto m = state.m[i].array();
        auto v = state.v[i].array();
        const auto g = grads[i].array();
        m = state.beta1 * m + (1.0 - state.beta1) * g;
        v = state.beta2 * v + (1.0 - state.beta2) * g.square();
        params[i]->array() -= lr * (m / c1) / ((v / c2).sqrt() + state.eps);
    }
}

double LrSchedule::rate(std::size_t epoch) const {
    if (total_epochs == 0) throw std::invalid_argument("LrSchedule: total_epochs must be positive");
    const std::size_t quarter = std::min<std::size_t>(3, (4 * epoch) / total_epochs);
    return rates[quarter];
}

} // namespace tnnswap::nn

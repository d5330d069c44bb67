#include "tnnswap/nn/tape.hpp"

#include "fd_check.hpp"

#include <gtest/gtest.h>

using namespace tnnswap::nn;
using fdcheck::expect_matches;
using fdcheck::random_matrix;

namespace {

// Builds a scalar from x through `op` and a fixed random projection, so every
// output entry contributes to the gradient with a distinct weight.
using Op = std::function<Tape::Var(Tape&, Tape::Var)>;

double scalar_of(const Op& op, const Matrix& x, const Matrix& proj) {
    Tape t;
    const auto y = op(t, t.variable(x));
    return t.value(t.sum(t.mul(y, t.constant(proj))))(0, 0);
}

void check_op(const Op& op, const Matrix& x, const char* what) {
    Tape probe;
    const Matrix out = probe.value(op(probe, probe.variable(x)));
    const Matrix proj = random_matrix(out.rows(), out.cols(), 17);
    Tape t;
    const auto xv = t.variable(x);
    t.backward(t.sum(t.mul(op(t, xv), t.constant(proj))));
    expect_matches([&](const Matrix& m) { return scalar_of(op, m, proj); }, x, t.grad(xv), 1e-5, 1e-5, what);
}

} // namespace

TEST(Tape, ElementwiseOpGradients) {
    const Matrix x = random_matrix(4, 3, 1);
    const Matrix c = random_matrix(4, 3, 2);
    check_op([](Tape& t, Tape::Var v) { return t.tanh(v); }, x, "tanh");
    check_op([](Tape& t, Tape::Var v) { return t.one_minus_square(v); }, x, "one_minus_square");
    check_op([&](Tape& t, Tape::Var v) { return t.mul(v, t.constant(c)); }, x, "mul");
    check_op([](Tape& t, Tape::Var v) { return t.mul(v, v); }, x, "mul self");
    check_op([&](Tape& t, Tape::Var v) { return t.add(v, t.constant(c)); }, x, "add");
    check_op([&](Tape& t, Tape::Var v) { return t.sub(t.constant(c), v); }, x, "sub");
    check_op([](Tape& t, Tape::Var v) { return t.scale(v, -2.5); }, x, "scale");
    check_op([](Tape& t, Tape::Var v) { return t.scale_cols(v, Vector::LinSpaced(3, 0.5, 2.0)); }, x, "scale_cols");
    check_op([](Tape& t, Tape::Var v) { return t.gather_rows(v, {3, 0, 0, 2}); }, x, "gather_rows");
    check_op([](Tape& t, Tape::Var v) { return t.sum_squares(v); }, x, "sum_squares");
}

TEST(Tape, MatmulAndBiasGradients) {
    const Matrix x = random_matrix(5, 3, 3);
    const Matrix w = random_matrix(4, 3, 4);
    const Matrix b = random_matrix(4, 1, 5);
    check_op([&](Tape& t, Tape::Var v) { return t.matmul_t(v, t.constant(w)); }, x, "matmul_t input");
    check_op([&](Tape& t, Tape::Var v) { return t.matmul_t(t.constant(x), v); }, w, "matmul_t weight");
    check_op([&](Tape& t, Tape::Var v) { return t.add_bias(t.constant(x * w.transpose()), v); }, b, "add_bias");
}

TEST(Tape, MpoContractGradients) {
    const std::size_t d = 3, chi = 2;
    const Matrix w1 = random_matrix(3, 6, 6);
    const Matrix w2 = random_matrix(3, 6, 7);
    check_op([&](Tape& t, Tape::Var v) { return t.mpo_contract(v, t.constant(w2), d, chi); }, w1, "mpo w1");
    check_op([&](Tape& t, Tape::Var v) { return t.mpo_contract(t.constant(w1), v, d, chi); }, w2, "mpo w2");
}

TEST(Tape, LinearLeastSquaresGradient) {
    // loss = 1/2 |x W^T|^2 has dL/dW = out^T x.
    const Matrix x = random_matrix(6, 3, 8);
    const Matrix w = random_matrix(2, 3, 9);
    Tape t;
    const auto wv = t.variable(w);
    const auto out = t.matmul_t(t.constant(x), wv);
    t.backward(t.scale(t.sum_squares(out), 0.5));
    const Matrix expected = t.value(out).transpose() * x;
    EXPECT_LT((t.grad(wv) - expected).cwiseAbs().maxCoeff(), 1e-13);
}

TEST(Tape, StaleTapeAndRootShape) {
    Tape t;
    const auto x = t.variable(Matrix::Ones(2, 2));
    EXPECT_THROW((void)t.grad(x), std::logic_error);
    EXPECT_THROW(t.backward(x), std::invalid_argument);
    const auto s = t.sum(x);
    t.backward(s);
    EXPECT_THROW(t.backward(s), std::logic_error);
    EXPECT_EQ(t.grad(x), Matrix::Ones(2, 2));
}

TEST(Tape, UnusedVariableHasZeroGradient) {
    Tape t;
    const auto used = t.variable(Matrix::Constant(1, 1, 2.0));
    const auto unused = t.variable(Matrix::Ones(3, 2));
    t.backward(t.sum_squares(used));
    EXPECT_EQ(t.grad(unused), Matrix::Zero(3, 2));
    EXPECT_DOUBLE_EQ(t.grad(used)(0, 0), 4.0);
}

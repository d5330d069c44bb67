#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <functional>
#include <vector>

namespace tnnswap::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Reverse-mode autodiff over dense matrices.
///
/// Every operation appends a node holding its value and a closure that
/// pushes the node's adjoint to its inputs. Nodes are only ever appended, so
/// the node order is a valid topological order for the reverse sweep.
/// A tape is single use: after backward() it is spent.
class Tape {
public:
    struct Var {
        std::size_t id;
    };

    Var constant(Matrix value);
    Var variable(Matrix value);

    const Matrix& value(Var v) const { return nodes_[v.id].value; }
    const Matrix& grad(Var v) const;
    bool requires_grad(Var v) const { return nodes_[v.id].requires_grad; }
    std::size_t size() const { return nodes_.size(); }

    /// x * w^T: x is [batch x in], w is [out x in].
    Var matmul_t(Var x, Var w);
    /// x + 1 b^T: b is a column vector [width x 1] broadcast across rows.
    Var add_bias(Var x, Var b);
    Var tanh(Var x);
    /// 1 - x^2 elementwise; the derivative of tanh written in terms of its output.
    Var one_minus_square(Var x);
    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var mul(Var a, Var b);
    Var scale(Var a, double s);
    /// Multiplies column c by s[c]; s is a constant.
    Var scale_cols(Var a, const Vector& s);
    Var gather_rows(Var a, std::vector<Eigen::Index> rows);
    Var sum(Var a);
    Var sum_squares(Var a);
    /// W = sum_alpha A_alpha (x) B_alpha, see MpoLayer for the core layout.
    Var mpo_contract(Var w1, Var w2, std::size_t phys, std::size_t chi);

    /// Seeds d(root)/d(root) = 1 and sweeps in reverse. root must be 1x1.
    void backward(Var root);

private:
    struct Node {
        Matrix value;
        Matrix grad;
        bool requires_grad = false;
        std::function<void(Tape&, std::size_t)> backprop;
    };

    Var push(Matrix value, bool requires_grad, std::function<void(Tape&, std::size_t)> backprop);
    bool any_grad(std::initializer_list<Var> vars) const;
    Matrix& grad_slot(std::size_t id);
    const Matrix& upstream(std::size_t id) const { return nodes_[id].grad; }

    std::vector<Node> nodes_;
    bool spent_ = false;
};

/// Dense weight from 2-node MPO cores; the same map the tape op uses.
Matrix contract_mpo(const Matrix& w1, const Matrix& w2, std::size_t phys, std::size_t chi);

} // namespace tnnswap::nn

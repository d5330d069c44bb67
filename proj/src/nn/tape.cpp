#include "tnnswap/nn/tape.hpp"

#include <stdexcept>

namespace tnnswap::nn {

Tape::Var Tape::push(Matrix value, bool requires_grad, std::function<void(Tape&, std::size_t)> backprop) {
    if (spent_) throw std::logic_error("Tape: cannot record on a spent tape");
    nodes_.push_back(Node{std::move(value), Matrix(), requires_grad, std::move(backprop)});
    return Var{nodes_.size() - 1};
}

bool Tape::any_grad(std::initializer_list<Var> vars) const {
    for (Var v : vars)
        if (nodes_[v.id].requires_grad) return true;
    return false;
}

Matrix& Tape::grad_slot(std::size_t id) {
    Node& n = nodes_[id];
    if (n.grad.size() == 0) n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
    return n.grad;
}

const Matrix& Tape::grad(Var v) const {
    if (!spent_) throw std::logic_error("Tape: gradients requested before backward()");
    const Node& n = nodes_[v.id];
    if (!n.requires_grad) throw std::logic_error("Tape: node does not require gradients");
    return n.grad;
}

Tape::Var Tape::constant(Matrix value) { return push(std::move(value), false, nullptr); }

Tape::Var Tape::variable(Matrix value) { return push(std::move(value), true, nullptr); }

Tape::Var Tape::matmul_t(Var x, Var w) {
    if (value(x).cols() != value(w).cols())
        throw std::invalid_argument("Tape::matmul_t: width mismatch (" + std::to_string(value(x).cols()) +
                                    " vs " + std::to_string(value(w).cols()) + ")");
    Matrix out = value(x) * value(w).transpose();
    return push(std::move(out), any_grad({x, w}), [x, w](Tape& t, std::size_t self) {
        const Matrix& g = t.upstream(self);
        if (t.requires_grad(x)) t.grad_slot(x.id).noalias() += g * t.value(w);
        if (t.requires_grad(w)) t.grad_slot(w.id).noalias() += g.transpose() * t.value(x);
    });
}

Tape::Var Tape::add_bias(Var x, Var b) {
    if (value(b).cols() != 1 || value(b).rows() != value(x).cols())
        throw std::invalid_argument("Tape::add_bias: bias must be a column of the input width");
    Matrix out = value(x);
    out.rowwise() += value(b).col(0).transpose();
    return push(std::move(out), any_grad({x, b}), [x, b](Tape& t, std::size_t self) {
        const Matrix& g = t.upstream(self);
        if (t.requires_grad(x)) t.grad_slot(x.id) += g;
        if (t.requires_grad(b)) t.grad_slot(b.id) += g.colwise().sum().transpose();
    });
}

Tape::Var Tape::tanh(Var x) {
    Matrix out = value(x).array().tanh().matrix();
    return push(std::move(out), any_grad({x}), [x](Tape& t, std::size_t self) {
        if (!t.requires_grad(x)) return;
        const Matrix& y = t.nodes_[self].value;
        t.grad_slot(x.id).array() += t.upstream(self).array() * (1.0 - y.array().square());
    });
}

Tape::Var Tape::one_minus_square(Var x) {
    Matrix out = (1.0 - value(x).array().square()).matrix();
    return push(std::move(out), any_grad({x}), [x](Tape& t, std::size_t self) {
        if (!t.requires_grad(x)) return;
        t.grad_slot(x.id).array() += -2.0 * t.upstream(self).array() * t.value(x).array();
    });
}

namespace {

void check_same_shape(const Matrix& a, const Matrix& b, const char* op) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw std::invalid_argument(std::string("Tape::") + op + ": shape mismatch");
}

} // namespace

Tape::Var Tape::add(Var a, Var b) {
    check_same_shape(value(a), value(b), "add");
    Matrix out = value(a) + value(b);
    return push(std::move(out), any_grad({a, b}), [a, b](Tape& t, std::size_t self) {
        if (t.requires_grad(a)) t.grad_slot(a.id) += t.upstream(self);
        if (t.requires_grad(b)) t.grad_slot(b.id) += t.upstream(self);
    });
}

Tape::Var Tape::sub(Var a, Var b) {
    check_same_shape(value(a), value(b), "sub");
    Matrix out = value(a) - value(b);
    return push(std::move(out), any_grad({a, b}), [a, b](Tape& t, std::size_t self) {
        if (t.requires_grad(a)) t.grad_slot(a.id) += t.upstream(self);
        if (t.requires_grad(b)) t.grad_slot(b.id) -= t.upstream(self);
    });
}

Tape::Var Tape::mul(Var a, Var b) {
    check_same_shape(value(a), value(b), "mul");
    Matrix out = value(a).cwiseProduct(value(b));
    return push(std::move(out), any_grad({a, b}), [a, b](Tape& t, std::size_t self) {
        const Matrix& g = t.upstream(self);
        if (t.requires_grad(a)) t.grad_slot(a.id).array() += g.array() * t.value(b).array();
        if (t.requires_grad(b)) t.grad_slot(b.id).array() += g.array() * t.value(a).array();
    });
}

Tape::Var Tape::scale(Var a, double s) {
    Matrix out = value(a) * s;
    return push(std::move(out), any_grad({a}), [a, s](Tape& t, std::size_t self) {
        if (t.requires_grad(a)) t.grad_slot(a.id) += s * t.upstream(self);
    });
}

Tape::Var Tape::scale_cols(Var a, const Vector& s) {
    if (s.size() != value(a).cols()) throw std::invalid_argument("Tape::scale_cols: width mismatch");
    Matrix out = value(a) * s.asDiagonal();
    return push(std::move(out), any_grad({a}), [a, s](Tape& t, std::size_t self) {
        if (t.requires_grad(a)) t.grad_slot(a.id) += t.upstream(self) * s.asDiagonal();
    });
}

Tape::Var Tape::gather_rows(Var a, std::vector<Eigen::Index> rows) {
    const Matrix& src = value(a);
    Matrix out(static_cast<Eigen::Index>(rows.size()), src.cols());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r] < 0 || rows[r] >= src.rows()) throw std::out_of_range("Tape::gather_rows: row out of range");
        out.row(static_cast<Eigen::Index>(r)) = src.row(rows[r]);
    }
    return push(std::move(out), any_grad({a}), [a, rows = std::move(rows)](Tape& t, std::size_t self) {
        if (!t.requires_grad(a)) return;
        const Matrix& g = t.upstream(self);
        Matrix& dst = t.grad_slot(a.id);
        for (std::size_t r = 0; r < rows.size(); ++r) dst.row(rows[r]) += g.row(static_cast<Eigen::Index>(r));
    });
}

Tape::Var Tape::sum(Var a) {
    Matrix out(1, 1);
    out(0, 0) = value(a).sum();
    return push(std::move(out), any_grad({a}), [a](Tape& t, std::size_t self) {
        if (t.requires_grad(a)) t.grad_slot(a.id).array() += t.upstream(self)(0, 0);
    });
}

Tape::Var Tape::sum_squares(Var a) {
    Matrix out(1, 1);
    out(0, 0) = value(a).squaredNorm();
    return push(std::move(out), any_grad({a}), [a](Tape& t, std::size_t self) {
        if (t.requires_grad(a)) t.grad_slot(a.id) += (2.0 * t.upstream(self)(0, 0)) * t.value(a);
    });
}

Matrix contract_mpo(const Matrix& w1, const Matrix& w2, std::size_t phys, std::size_t chi) {
    const auto d = static_cast<Eigen::Index>(phys);
    const auto c = static_cast<Eigen::Index>(chi);
    if (w1.rows() != d || w1.cols() != d * c || w2.rows() != d || w2.cols() != d * c)
        throw std::invalid_argument("contract_mpo: cores must be [d x chi*d]");
    Matrix w = Matrix::Zero(d * d, d * d);
    for (Eigen::Index a = 0; a < c; ++a)
        for (Eigen::Index i1 = 0; i1 < d; ++i1)
            for (Eigen::Index j1 = 0; j1 < d; ++j1) {
                const double av = w1(i1, a * d + j1);
                for (Eigen::Index i2 = 0; i2 < d; ++i2)
                    for (Eigen::Index j2 = 0; j2 < d; ++j2) w(i1 * d + i2, j1 * d + j2) += av * w2(i2, a * d + j2);
            }
    return w;
}

Tape::Var Tape::mpo_contract(Var w1, Var w2, std::size_t phys, std::size_t chi) {
    Matrix out = contract_mpo(value(w1), value(w2), phys, chi);
    return push(std::move(out), any_grad({w1, w2}), [w1, w2, phys, chi](Tape& t, std::size_t self) {
        const auto d = static_cast<Eigen::Index>(phys);
        const auto c = static_cast<Eigen::Index>(chi);
        const Matrix& g = t.upstream(self);
        const Matrix& a = t.value(w1);
        const Matrix& b = t.value(w2);
        const bool ga = t.requires_grad(w1), gb = t.requires_grad(w2);
        Matrix da = Matrix::Zero(d, d * c), db = Matrix::Zero(d, d * c);
        for (Eigen::Index al = 0; al < c; ++al)
            for (Eigen::Index i1 = 0; i1 < d; ++i1)
                for (Eigen::Index j1 = 0; j1 < d; ++j1) {
                    const double av = a(i1, al * d + j1);
                    double acc = 0.0;
                    for (Eigen::Index i2 = 0; i2 < d; ++i2)
                        for (Eigen::Index j2 = 0; j2 < d; ++j2) {
                            const double gv = g(i1 * d + i2, j1 * d + j2);
                            acc += gv * b(i2, al * d + j2);
                            db(i2, al * d + j2) += gv * av;
                        }
                    da(i1, al * d + j1) = acc;
                }
        if (ga) t.grad_slot(w1.id) += da;
        if (gb) t.grad_slot(w2.id) += db;
    });
}

void Tape::backward(Var root) {
    if (spent_) throw std::logic_error("Tape: stale tape, backward() already ran");
    if (value(root).rows() != 1 || value(root).cols() != 1)
        throw std::invalid_argument("Tape::backward: root must be a scalar");
    spent_ = true;
    if (nodes_[root.id].requires_grad) grad_slot(root.id)(0, 0) = 1.0;
    for (std::size_t i = root.id + 1; i-- > 0;) {
        Node& n = nodes_[i];
        if (!n.requires_grad || !n.backprop || n.grad.size() == 0) continue;
        n.backprop(*this, i);
    }
    // Variables not reached from the root get an explicit zero gradient.
    for (std::size_t i = 0; i < nodes_.size(); ++i)
        if (nodes_[i].requires_grad) grad_slot(i);
}

} // namespace tnnswap::nn

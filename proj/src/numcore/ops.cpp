#include "marc/numcore/ops.hpp"

#include "marc/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace marc::ops {
namespace {

using NodePtr = std::shared_ptr<TensorNode>;

bool needs_tape(std::initializer_list<const Tensor*> inputs) {
    if (active_tape() == nullptr) return false;
    return std::any_of(inputs.begin(), inputs.end(),
                       [](const Tensor* t) { return t->requires_grad(); });
}

Tensor finish(std::string_view op, Matrix value, std::vector<NodePtr> inputs, bool track,
              Tape::BackwardFn fn) {
    check_finite(value, op);
    Tensor out(std::move(value), track);
    if (track) active_tape()->record(op, std::move(inputs), out, std::move(fn));
    return out;
}

void accumulate(const NodePtr& node, const Matrix& contribution) {
    if (node->requires_grad) node->ensure_grad() += contribution;
}

[[noreturn]] void shape_error(std::string_view op, const Tensor& a, const Tensor& b) {
    throw ShapeError(std::string(op) + ": incompatible shapes " + shape_string(a) + " and " +
                     shape_string(b));
}

Index broadcast_dim(Index x, Index y, bool& ok) {
    if (x == y) return x;
    if (x == 1) return y;
    if (y == 1) return x;
    ok = false;
    return 0;
}

Matrix expand(const Matrix& m, Index rows, Index cols) {
    if (m.rows() == rows && m.cols() == cols) return m;
    return m.replicate(rows / m.rows(), cols / m.cols());
}

/// Sums a broadcast gradient back down to `rows` x `cols`.
Matrix reduce_to(const Matrix& g, Index rows, Index cols) {
    if (g.rows() == rows && g.cols() == cols) return g;
    if (rows == 1 && cols == 1) return Matrix::Constant(1, 1, g.sum());
    if (rows == 1) return g.colwise().sum();
    return g.rowwise().sum();
}

template <typename Fwd, typename Bwd>
Tensor binary(std::string_view op, const Tensor& a, const Tensor& b, Fwd fwd, Bwd bwd) {
    bool ok = true;
    const Index rows = broadcast_dim(a.rows(), b.rows(), ok);
    const Index cols = broadcast_dim(a.cols(), b.cols(), ok);
    if (!ok) shape_error(op, a, b);
    Matrix av = expand(a.value(), rows, cols);
    Matrix bv = expand(b.value(), rows, cols);
    Matrix out = fwd(av, bv);
    const bool track = needs_tape({&a, &b});
    if (!track) return finish(op, std::move(out), {}, false, {});
    NodePtr an = a.node(), bn = b.node();
    return finish(op, std::move(out), {an, bn}, track,
                  [an, bn, av = std::move(av), bv = std::move(bv), bwd](const Matrix& g) {
                      Matrix ga, gb;
                      bwd(g, av, bv, ga, gb);
                      if (an->requires_grad)
                          accumulate(an, reduce_to(ga, an->value.rows(), an->value.cols()));
                      if (bn->requires_grad)
                          accumulate(bn, reduce_to(gb, bn->value.rows(), bn->value.cols()));
                  });
}

template <typename Fwd, typename Bwd>
Tensor unary(std::string_view op, const Tensor& x, Fwd fwd, Bwd bwd) {
    Matrix out = fwd(x.value());
    const bool track = needs_tape({&x});
    NodePtr xn = x.node();
    if (!track) return finish(op, std::move(out), {}, false, {});
    Matrix saved = out;
    return finish(op, std::move(out), {xn}, true,
                  [xn, saved = std::move(saved), bwd](const Matrix& g) {
                      accumulate(xn, bwd(g, xn->value, saved));
                  });
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.cols() != b.rows()) shape_error("matmul", a, b);
    Matrix out(a.rows(), b.cols());
    out.noalias() = a.value() * b.value();
    const bool track = needs_tape({&a, &b});
    NodePtr an = a.node(), bn = b.node();
    return finish("matmul", std::move(out), {an, bn}, track, [an, bn](const Matrix& g) {
        if (an->requires_grad) an->ensure_grad().noalias() += g * bn->value.transpose();
        if (bn->requires_grad) bn->ensure_grad().noalias() += an->value.transpose() * g;
    });
}

Tensor add(const Tensor& a, const Tensor& b) {
    return binary(
        "add", a, b, [](const Matrix& x, const Matrix& y) -> Matrix { return x + y; },
        [](const Matrix& g, const Matrix&, const Matrix&, Matrix& ga, Matrix& gb) {
            ga = g;
            gb = g;
        });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    return binary(
        "sub", a, b, [](const Matrix& x, const Matrix& y) -> Matrix { return x - y; },
        [](const Matrix& g, const Matrix&, const Matrix&, Matrix& ga, Matrix& gb) {
            ga = g;
            gb = -g;
        });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    return binary(
        "mul", a, b,
        [](const Matrix& x, const Matrix& y) -> Matrix { return x.cwiseProduct(y); },
        [](const Matrix& g, const Matrix& x, const Matrix& y, Matrix& ga, Matrix& gb) {
            ga = g.cwiseProduct(y);
            gb = g.cwiseProduct(x);
        });
}

Tensor div(const Tensor& a, const Tensor& b) {
    return binary(
        "div", a, b,
        [](const Matrix& x, const Matrix& y) -> Matrix { return x.cwiseQuotient(y); },
        [](const Matrix& g, const Matrix& x, const Matrix& y, Matrix& ga, Matrix& gb) {
            ga = g.cwiseQuotient(y);
            gb = -(g.cwiseProduct(x)).cwiseQuotient(y.cwiseProduct(y));
        });
}

Tensor abs(const Tensor& x) {
    return unary(
        "abs", x, [](const Matrix& v) -> Matrix { return v.cwiseAbs(); },
        [](const Matrix& g, const Matrix& in, const Matrix&) -> Matrix {
            return g.cwiseProduct(in.unaryExpr([](double v) {
                return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0);
            }));
        });
}

Tensor relu(const Tensor& x) {
    return unary(
        "relu", x, [](const Matrix& v) -> Matrix { return v.cwiseMax(0.0); },
        [](const Matrix& g, const Matrix& in, const Matrix&) -> Matrix {
            return g.cwiseProduct(in.unaryExpr([](double v) { return v > 0.0 ? 1.0 : 0.0; }));
        });
}

Tensor sigmoid(const Tensor& x) {
    return unary(
        "sigmoid", x,
        [](const Matrix& v) -> Matrix {
            return v.unaryExpr([](double z) {
                if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
                const double e = std::exp(z);
                return e / (1.0 + e);
            });
        },
        [](const Matrix& g, const Matrix&, const Matrix& out) -> Matrix {
            return g.cwiseProduct(out.cwiseProduct((1.0 - out.array()).matrix()));
        });
}

Tensor exp(const Tensor& x) {
    return unary(
        "exp", x, [](const Matrix& v) -> Matrix { return v.array().exp().matrix(); },
        [](const Matrix& g, const Matrix&, const Matrix& out) -> Matrix {
            return g.cwiseProduct(out);
        });
}

Tensor log(const Tensor& x) {
    return unary(
        "log", x, [](const Matrix& v) -> Matrix { return v.array().log().matrix(); },
        [](const Matrix& g, const Matrix& in, const Matrix&) -> Matrix {
            return g.cwiseQuotient(in);
        });
}

Tensor sqrt(const Tensor& x) {
    return unary(
        "sqrt", x, [](const Matrix& v) -> Matrix { return v.cwiseSqrt(); },
        [](const Matrix& g, const Matrix&, const Matrix& out) -> Matrix {
            return (0.5 * g.array() / out.array()).matrix();
        });
}

Tensor scale(const Tensor& x, double factor) {
    return unary(
        "scale", x, [factor](const Matrix& v) -> Matrix { return v * factor; },
        [factor](const Matrix& g, const Matrix&, const Matrix&) -> Matrix { return g * factor; });
}

Tensor add_scalar(const Tensor& x, double value) {
    return unary(
        "add_scalar", x,
        [value](const Matrix& v) -> Matrix { return (v.array() + value).matrix(); },
        [](const Matrix& g, const Matrix&, const Matrix&) -> Matrix { return g; });
}

Tensor clamp(const Tensor& x, double lo, double hi) {
    if (!(lo <= hi)) throw InvalidArgument("clamp: lo > hi");
    return unary(
        "clamp", x, [lo, hi](const Matrix& v) -> Matrix { return v.cwiseMax(lo).cwiseMin(hi); },
        [lo, hi](const Matrix& g, const Matrix& in, const Matrix&) -> Matrix {
            return g.cwiseProduct(
                in.unaryExpr([lo, hi](double v) { return (v >= lo && v <= hi) ? 1.0 : 0.0; }));
        });
}

Tensor concat_rows(std::span<const Tensor> parts) {
    if (parts.empty()) throw InvalidArgument("concat_rows: no inputs");
    const Index cols = parts.front().cols();
    Index rows = 0;
    bool track = false;
    std::vector<NodePtr> nodes;
    for (const auto& p : parts) {
        if (p.cols() != cols) shape_error("concat_rows", parts.front(), p);
        rows += p.rows();
        track = track || p.requires_grad();
        nodes.push_back(p.node());
    }
    track = track && active_tape() != nullptr;
    Matrix out(rows, cols);
    Index r = 0;
    for (const auto& p : parts) {
        out.middleRows(r, p.rows()) = p.value();
        r += p.rows();
    }
    return finish("concat_rows", std::move(out), nodes, track, [nodes](const Matrix& g) {
        Index at = 0;
        for (const auto& n : nodes) {
            const Index h = n->value.rows();
            if (n->requires_grad) n->ensure_grad() += g.middleRows(at, h);
            at += h;
        }
    });
}

Tensor concat_cols(std::span<const Tensor> parts) {
    if (parts.empty()) throw InvalidArgument("concat_cols: no inputs");
    const Index rows = parts.front().rows();
    Index cols = 0;
    bool track = false;
    std::vector<NodePtr> nodes;
    for (const auto& p : parts) {
        if (p.rows() != rows) shape_error("concat_cols", parts.front(), p);
        cols += p.cols();
        track = track || p.requires_grad();
        nodes.push_back(p.node());
    }
    track = track && active_tape() != nullptr;
    Matrix out(rows, cols);
    Index c = 0;
    for (const auto& p : parts) {
        out.middleCols(c, p.cols()) = p.value();
        c += p.cols();
    }
    return finish("concat_cols", std::move(out), nodes, track, [nodes](const Matrix& g) {
        Index at = 0;
        for (const auto& n : nodes) {
            const Index w = n->value.cols();
            if (n->requires_grad) n->ensure_grad() += g.middleCols(at, w);
            at += w;
        }
    });
}

Tensor concat_cols(std::initializer_list<Tensor> parts) {
    return concat_cols(std::span<const Tensor>(parts.begin(), parts.size()));
}

Tensor transpose(const Tensor& x) {
    return unary(
        "transpose", x, [](const Matrix& v) -> Matrix { return v.transpose(); },
        [](const Matrix& g, const Matrix&, const Matrix&) -> Matrix { return g.transpose(); });
}

Tensor slice_cols(const Tensor& x, Index begin, Index count) {
    if (begin < 0 || count < 0 || begin + count > x.cols()) {
        throw ShapeError("slice_cols: range [" + std::to_string(begin) + ", " +
                         std::to_string(begin + count) + ") outside " + shape_string(x));
    }
    return unary(
        "slice_cols", x,
        [begin, count](const Matrix& v) -> Matrix { return v.middleCols(begin, count); },
        [begin, count](const Matrix& g, const Matrix& in, const Matrix&) -> Matrix {
            Matrix full = Matrix::Zero(in.rows(), in.cols());
            full.middleCols(begin, count) = g;
            return full;
        });
}

Tensor gather_rows(const Tensor& table, std::span<const Index> rows) {
    Matrix out(static_cast<Index>(rows.size()), table.cols());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r] < 0 || rows[r] >= table.rows()) {
            throw ShapeError("gather_rows: row " + std::to_string(rows[r]) + " outside " +
                             shape_string(table));
        }
        out.row(static_cast<Index>(r)) = table.value().row(rows[r]);
    }
    const bool track = needs_tape({&table});
    NodePtr tn = table.node();
    std::vector<Index> idx(rows.begin(), rows.end());
    return finish("gather_rows", std::move(out), {tn}, track,
                  [tn, idx = std::move(idx)](const Matrix& g) {
                      Matrix& acc = tn->ensure_grad();
                      for (std::size_t r = 0; r < idx.size(); ++r) {
                          acc.row(idx[r]) += g.row(static_cast<Index>(r));
                      }
                  });
}

Tensor sum(const Tensor& x) {
    return unary(
        "sum", x, [](const Matrix& v) -> Matrix { return Matrix::Constant(1, 1, v.sum()); },
        [](const Matrix& g, const Matrix& in, const Matrix&) -> Matrix {
            return Matrix::Constant(in.rows(), in.cols(), g(0, 0));
        });
}

Tensor mean(const Tensor& x) {
    const double n = static_cast<double>(x.size());
    return unary(
        "mean", x, [n](const Matrix& v) -> Matrix { return Matrix::Constant(1, 1, v.sum() / n); },
        [n](const Matrix& g, const Matrix& in, const Matrix&) -> Matrix {
            return Matrix::Constant(in.rows(), in.cols(), g(0, 0) / n);
        });
}

Tensor sum_rows(const Tensor& x) {
    return unary(
        "sum_rows", x, [](const Matrix& v) -> Matrix { return v.rowwise().sum(); },
        [](const Matrix& g, const Matrix& in, const Matrix&) -> Matrix {
            return g.replicate(1, in.cols());
        });
}

Tensor trace(const Tensor& x) {
    if (x.rows() != x.cols()) {
        throw ShapeError("trace: matrix must be square, got " + shape_string(x));
    }
    return unary(
        "trace", x, [](const Matrix& v) -> Matrix { return Matrix::Constant(1, 1, v.trace()); },
        [](const Matrix& g, const Matrix& in, const Matrix&) -> Matrix {
            Matrix out = Matrix::Zero(in.rows(), in.cols());
            out.diagonal().setConstant(g(0, 0));
            return out;
        });
}

Tensor pairwise_sq_dists(const Tensor& x) {
    return unary(
        "pairwise_sq_dists", x,
        [](const Matrix& v) -> Matrix {
            const Index n = v.rows();
            Matrix d = Matrix::Zero(n, n);
            for (Index i = 0; i < n; ++i) {
                for (Index j = i + 1; j < n; ++j) {
                    const double s = (v.row(i) - v.row(j)).squaredNorm();
                    d(i, j) = s;
                    d(j, i) = s;
                }
            }
            return d;
        },
        [](const Matrix& g, const Matrix& in, const Matrix&) -> Matrix {
            // dD_ij/dx_i = 2 (x_i - x_j), so grad_x = 2 (diag(rowsum(S)) X - S X), S = G + G^T.
            Matrix s = g + g.transpose();
            Eigen::VectorXd rs = s.rowwise().sum();
            Matrix out = 2.0 * (rs.asDiagonal() * in - s * in);
            return out;
        });
}

Tensor softmax_rows(const Tensor& x) {
    return unary(
        "softmax_rows", x,
        [](const Matrix& v) -> Matrix {
            Matrix out = v;
            for (Index r = 0; r < v.rows(); ++r) {
                out.row(r).array() -= v.row(r).maxCoeff();
                out.row(r) = out.row(r).array().exp().matrix();
                out.row(r) /= out.row(r).sum();
            }
            return out;
        },
        [](const Matrix& g, const Matrix&, const Matrix& out) -> Matrix {
            Eigen::VectorXd dots = g.cwiseProduct(out).rowwise().sum();
            Matrix centered = g;
            centered.colwise() -= dots;
            return out.cwiseProduct(centered);
        });
}

Tensor log_softmax_rows(const Tensor& x) {
    return unary(
        "log_softmax_rows", x,
        [](const Matrix& v) -> Matrix {
            Matrix out = v;
            for (Index r = 0; r < v.rows(); ++r) {
                const double m = v.row(r).maxCoeff();
                const double lse = m + std::log((v.row(r).array() - m).exp().sum());
                out.row(r).array() -= lse;
            }
            return out;
        },
        [](const Matrix& g, const Matrix&, const Matrix& out) -> Matrix {
            Matrix p = out.array().exp().matrix();
            Eigen::VectorXd gs = g.rowwise().sum();
            Matrix res = g;
            res -= p.cwiseProduct(gs.replicate(1, p.cols()));
            return res;
        });
}

Tensor center(const Tensor& k) {
    if (k.rows() != k.cols()) {
        throw ShapeError("center: matrix must be square, got " + shape_string(k));
    }
    auto apply = [](const Matrix& m) -> Matrix {
        Eigen::RowVectorXd col_means = m.colwise().mean();
        Eigen::VectorXd row_means = m.rowwise().mean();
        const double grand = m.mean();
        Matrix out = m;
        out.rowwise() -= col_means;
        out.colwise() -= row_means;
        out.array() += grand;
        return out;
    };
    // J is symmetric, so the adjoint of K -> JKJ is G -> JGJ.
    return unary(
        "center", k, apply,
        [apply](const Matrix& g, const Matrix&, const Matrix&) -> Matrix { return apply(g); });
}

}  // namespace marc::ops

#include "marc/baselines.hpp"

#include "marc/error.hpp"
#include "marc/numcore/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace marc {

SymmetricEigen jacobi_eigen(const Matrix& symmetric, double tol, int max_sweeps) {
    const Index n = symmetric.rows();
    if (n != symmetric.cols()) throw ShapeError("jacobi_eigen: matrix must be square");
    Matrix a = 0.5 * (symmetric + symmetric.transpose());
    Matrix v = Matrix::Identity(n, n);
    const double total = std::max(a.norm(), 1e-300);

    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        double off = 0.0;
        for (Index p = 0; p < n; ++p)
            for (Index q = p + 1; q < n; ++q) off += 2.0 * a(p, q) * a(p, q);
        if (std::sqrt(off) <= tol * total) break;

        for (Index p = 0; p < n - 1; ++p) {
            for (Index q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (apq == 0.0) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (Index k = 0; k < n; ++k) {
                    const double akp = a(k, p), akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (Index k = 0; k < n; ++k) {
                    const double apk = a(p, k), aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
                for (Index k = 0; k < n; ++k) {
                    const double vkp = v(k, p), vkq = v(k, q);
                    v(k, p) = c * vkp - s * vkq;
                    v(k, q) = s * vkp + c * vkq;
                }
            }
        }
    }

    std::vector<Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](Index i, Index j) { return a(i, i) > a(j, j); });
    SymmetricEigen out;
    out.values.resize(n);
    out.vectors.resize(n, n);
    for (Index j = 0; j < n; ++j) {
        out.values(j) = a(order[j], order[j]);
        out.vectors.col(j) = v.col(order[j]);
    }
    return out;
}

PcaModel pca_fit(const Matrix& x, Index k) {
    const Index n = x.rows(), d = x.cols();
    if (k < 1) throw InvalidArgument("pca_fit: k must be >= 1");
    if (k >= d) {
        throw InvalidArgument("pca_fit: k (" + std::to_string(k) + ") must be smaller than d_o (" +
                              std::to_string(d) + ")");
    }
    if (n <= k) throw InvalidArgument("pca_fit: need more rows than components");
    PcaModel model;
    model.mean = x.colwise().mean();
    Matrix centered = x.rowwise() - model.mean;
    Matrix cov = (centered.transpose() * centered) / static_cast<double>(n - 1);
    SymmetricEigen eig = jacobi_eigen(cov);
    Eigen::VectorXd values = eig.values.cwiseMax(0.0);
    model.components = eig.vectors.leftCols(k);
    model.eigenvalues = values.head(k);
    model.discarded_eigenvalues = values.tail(d - k);
    return model;
}

Matrix pca_transform(const Matrix& x, const PcaModel& model) {
    if (x.cols() != model.input_dim()) {
        throw ShapeError("pca_transform: expected " + std::to_string(model.input_dim()) +
                         " columns, got " + shape_string(x));
    }
    return (x.rowwise() - model.mean) * model.components;
}

Matrix pca_inverse(const Matrix& z, const PcaModel& model) {
    if (z.cols() != model.output_dim()) {
        throw ShapeError("pca_inverse: expected " + std::to_string(model.output_dim()) +
                         " columns, got " + shape_string(z));
    }
    Matrix out = z * model.components.transpose();
    out.rowwise() += model.mean;
    return out;
}

double pca_reconstruction_error(const Matrix& x, const PcaModel& model) {
    if (x.rows() < 2) throw InvalidArgument("pca_reconstruction_error: need at least 2 rows");
    Matrix residual = x - pca_inverse(pca_transform(x, model), model);
    return residual.squaredNorm() / static_cast<double>(x.rows() - 1);
}

Tensor cs_proxy_loss(const Tensor& r_user, const Tensor& r_item, std::span<const double> labels) {
    Tensor y = label_tensor(labels);
    if (y.rows() != r_user.rows()) {
        throw ShapeError("cs_proxy_loss: " + std::to_string(labels.size()) + " labels for " +
                         shape_string(r_user));
    }
    Tensor target(2.0 * y.value().array() - 1.0);
    Tensor diff = ops::sub(row_cosine(r_user, r_item), target);
    return ops::mean(ops::mul(diff, diff));
}

namespace {

Tensor normalize_rows(const Tensor& x) {
    Tensor norms = ops::sqrt(ops::sum_rows(ops::mul(x, x)));
    for (Index r = 0; r < x.rows(); ++r) {
        if (norms.value()(r, 0) == 0.0) {
            throw InvalidArgument("cosine: zero-norm vector at row " + std::to_string(r));
        }
    }
    return ops::div(x, norms);
}

}  // namespace

Tensor cl_proxy_loss(const Tensor& r_user, const Tensor& r_item, double temperature) {
    if (r_user.rows() != r_item.rows() || r_user.cols() != r_item.cols()) {
        throw ShapeError("cl_proxy_loss: incompatible shapes " + shape_string(r_user) + " and " +
                         shape_string(r_item));
    }
    if (r_user.rows() < 2) throw InvalidArgument("cl_proxy_loss: need at least 2 rows");
    if (!(temperature > 0.0)) throw InvalidArgument("cl_proxy_loss: temperature must be > 0");
    const Index n = r_user.rows();
    Tensor sims = ops::scale(
        ops::matmul(normalize_rows(r_user), ops::transpose(normalize_rows(r_item))),
        1.0 / temperature);
    Tensor log_p = ops::log_softmax_rows(sims);
    Tensor diag = ops::trace(log_p);
    return ops::scale(diag, -1.0 / static_cast<double>(n));
}

NestedHeads::NestedHeads(std::vector<Index> prefixes, Index compressed_dim, Rng& rng,
                         const std::vector<Index>& hidden)
    : prefixes_(std::move(prefixes)), compressed_dim_(compressed_dim) {
    if (prefixes_.empty()) throw InvalidArgument("nested heads: no prefixes");
    for (std::size_t i = 0; i < prefixes_.size(); ++i) {
        if (prefixes_[i] < 1 || prefixes_[i] > compressed_dim) {
            throw InvalidArgument("nested heads: prefix " + std::to_string(prefixes_[i]) +
                                  " exceeds d_c " + std::to_string(compressed_dim));
        }
        if (i > 0 && prefixes_[i] <= prefixes_[i - 1]) {
            throw InvalidArgument("nested heads: prefixes must be strictly increasing");
        }
        heads_.emplace_back(prefixes_[i], true, rng, hidden,
                            "mrl.head" + std::to_string(prefixes_[i]));
    }
}

std::vector<Index> NestedHeads::prefixes_for(Index compressed_dim) {
    std::vector<Index> out;
    for (Index p : kDefaultPrefixes)
        if (p <= compressed_dim) out.push_back(p);
    if (out.empty()) out.push_back(compressed_dim);
    return out;
}

std::vector<Tensor> NestedHeads::parameters() const {
    std::vector<Tensor> out;
    for (const auto& h : heads_) {
        auto p = h.parameters();
        out.insert(out.end(), p.begin(), p.end());
    }
    return out;
}

Tensor mrl_loss(const Tensor& c_user, const Tensor& c_item, std::span<const double> labels,
                const NestedHeads& heads) {
    Tensor total;
    for (std::size_t m = 0; m < heads.prefixes().size(); ++m) {
        const Index width = heads.prefixes()[m];
        if (width > c_user.cols() || width > c_item.cols()) {
            throw InvalidArgument("mrl_loss: prefix " + std::to_string(width) +
                                  " exceeds d_c " + std::to_string(c_user.cols()));
        }
        Tensor term = match_loss(predict_match(ops::slice_cols(c_user, 0, width),
                                               ops::slice_cols(c_item, 0, width),
                                               heads.heads()[m]),
                                 labels);
        total = total.defined() ? ops::add(total, term) : term;
    }
    return total;
}

Tensor ae_loss(const Tensor& r, const Mlp& encoder, const Mlp& decoder) {
    if (decoder.out_dim() != r.cols()) {
        throw ShapeError("ae_loss: decoder outputs " + std::to_string(decoder.out_dim()) +
                         " columns for input " + shape_string(r));
    }
    Tensor diff = ops::sub(r, decoder.forward(encoder.forward(r)));
    return ops::mean(ops::mul(diff, diff));
}

}  // namespace marc

#include "marc/matching.hpp"

#include "marc/error.hpp"
#include "marc/numcore/ops.hpp"

#include <cmath>

namespace marc {

std::string to_string(ProxyOverride p) { return p == ProxyOverride::none ? "none" : "cosine"; }

ProxyOverride proxy_override_from_string(const std::string& s) {
    if (s == "none") return ProxyOverride::none;
    if (s == "cosine") return ProxyOverride::cosine;
    throw InvalidArgument("unknown proxy override '" + s + "'");
}

void MarcLossConfig::validate() const {
    if (!(alpha >= 0.0)) throw InvalidArgument("alpha must be >= 0");
    kernel.validate();
}

MatchingNet::MatchingNet(Index compressed_dim, bool explicit_interactions, Rng& rng,
                         const std::vector<Index>& hidden, const std::string& name)
    : compressed_dim_(compressed_dim), explicit_interactions_(explicit_interactions),
      hidden_(hidden) {
    if (compressed_dim < 1) throw InvalidArgument("matching: d_c must be positive");
    const Index in = (explicit_interactions ? 4 : 2) * compressed_dim;
    mlp_ = Mlp(in, hidden, 1, rng, name);
}

Tensor explicit_features(const Tensor& c_user, const Tensor& c_item) {
    if (c_user.rows() != c_item.rows() || c_user.cols() != c_item.cols()) {
        throw ShapeError("explicit_features: incompatible shapes " + shape_string(c_item) +
                         " and " + shape_string(c_user));
    }
    return ops::concat_cols({c_item, c_user, ops::abs(ops::sub(c_item, c_user)),
                             ops::mul(c_item, c_user)});
}

Tensor predict_match(const Tensor& c_user, const Tensor& c_item, const MatchingNet& net) {
    if (c_user.cols() != net.compressed_dim() || c_item.cols() != net.compressed_dim() ||
        c_user.rows() != c_item.rows()) {
        throw ShapeError("predict_match: expected two n x " +
                         std::to_string(net.compressed_dim()) + " inputs, got " +
                         shape_string(c_user) + " and " + shape_string(c_item));
    }
    Tensor features = net.explicit_interactions() ? explicit_features(c_user, c_item)
                                                  : ops::concat_cols({c_item, c_user});
    return ops::sigmoid(net.mlp().forward(features));
}

Tensor label_tensor(std::span<const double> labels) {
    Matrix y(static_cast<Index>(labels.size()), 1);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] != 0.0 && labels[i] != 1.0) {
            throw InvalidArgument("label " + std::to_string(labels[i]) + " at row " +
                                  std::to_string(i) + " is not 0 or 1");
        }
        y(static_cast<Index>(i), 0) = labels[i];
    }
    return Tensor(std::move(y));
}

Tensor match_loss(const Tensor& y_hat, std::span<const double> labels) {
    if (y_hat.cols() != 1 || y_hat.rows() != static_cast<Index>(labels.size())) {
        throw ShapeError("match_loss: predictions " + shape_string(y_hat) + " vs " +
                         std::to_string(labels.size()) + " labels");
    }
    Tensor y = label_tensor(labels);
    Tensor one_minus_y(Matrix::Ones(y.rows(), 1) - y.value());
    Tensor p = ops::clamp(y_hat, kProbabilityClamp, 1.0 - kProbabilityClamp);
    Tensor one_minus_p = ops::add_scalar(ops::scale(p, -1.0), 1.0);
    Tensor ll = ops::add(ops::mul(y, ops::log(p)), ops::mul(one_minus_y, ops::log(one_minus_p)));
    return ops::scale(ops::mean(ll), -1.0);
}

Tensor row_cosine(const Tensor& a, const Tensor& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw ShapeError("cosine: incompatible shapes " + shape_string(a) + " and " +
                         shape_string(b));
    }
    Tensor na = ops::sum_rows(ops::mul(a, a));
    Tensor nb = ops::sum_rows(ops::mul(b, b));
    for (Index r = 0; r < a.rows(); ++r) {
        if (na.value()(r, 0) == 0.0 || nb.value()(r, 0) == 0.0) {
            throw InvalidArgument("cosine: zero-norm vector at row " + std::to_string(r));
        }
    }
    Tensor dot = ops::sum_rows(ops::mul(a, b));
    return ops::div(dot, ops::sqrt(ops::mul(na, nb)));
}

Tensor cosine_match_loss(const Tensor& c_user, const Tensor& c_item,
                         std::span<const double> labels) {
    Tensor y = label_tensor(labels);
    if (y.rows() != c_user.rows()) {
        throw ShapeError("cosine_match_loss: " + std::to_string(labels.size()) + " labels for " +
                         shape_string(c_user));
    }
    const double n_pos = y.value().sum();
    const double n_neg = static_cast<double>(y.rows()) - n_pos;
    Tensor cos = row_cosine(c_user, c_item);
    Tensor loss = Tensor::scalar(0.0);
    if (n_pos > 0) {
        Tensor pos_mean = ops::scale(ops::sum(ops::mul(cos, y)), 1.0 / n_pos);
        loss = ops::add_scalar(ops::scale(pos_mean, -1.0), 1.0);
    }
    if (n_neg > 0) {
        Tensor neg_mask(Matrix::Ones(y.rows(), 1) - y.value());
        loss = ops::add(loss, ops::scale(ops::sum(ops::mul(cos, neg_mask)), 1.0 / n_neg));
    }
    return loss;
}

}  // namespace marc

#include "marc/backbone.hpp"

#include "marc/error.hpp"
#include "marc/numcore/nn.hpp"
#include "marc/numcore/ops.hpp"

#include <cmath>

namespace marc {

std::string to_string(BackboneMode mode) {
    return mode == BackboneMode::trainable ? "trainable" : "frozen-identity";
}

BackboneMode backbone_mode_from_string(const std::string& s) {
    if (s == "trainable") return BackboneMode::trainable;
    if (s == "frozen-identity") return BackboneMode::frozen_identity;
    throw InvalidArgument("unknown backbone mode '" + s + "'");
}

Index EncoderConfig::resolved_output_dim() const {
    if (mode == BackboneMode::frozen_identity) return input_dim;
    return output_dim == 0 ? hidden_dim : output_dim;
}

void EncoderConfig::validate() const {
    if (input_dim < 1) throw InvalidArgument("encoder: input_dim must be >= 1");
    if (mode == BackboneMode::frozen_identity) return;
    if (hidden_dim < 1) throw InvalidArgument("encoder: hidden_dim must be >= 1");
    if (num_layers < 1) throw InvalidArgument("encoder: num_layers must be >= 1");
    if (resolved_output_dim() != hidden_dim) {
        throw InvalidArgument("encoder: output_dim must equal hidden_dim (residual stack)");
    }
}

EncoderStack::EncoderStack(const EncoderConfig& cfg, Rng& rng) : cfg_(cfg) {
    cfg_.validate();
    if (cfg_.mode == BackboneMode::frozen_identity) return;
    input_proj_ = Tensor(glorot_uniform(cfg_.input_dim, cfg_.hidden_dim, rng), true,
                         "backbone.input_proj");
    // Residual output projections start scaled by 1/sqrt(2L) so the stack is
    // close to the identity at initialization.
    const double residual_scale = 1.0 / std::sqrt(2.0 * static_cast<double>(cfg_.num_layers));
    for (Index l = 0; l < cfg_.num_layers; ++l) {
        const std::string prefix = "backbone.block" + std::to_string(l + 1);
        Block b;
        b.w1 = Tensor(glorot_uniform(cfg_.hidden_dim, cfg_.hidden_dim, rng), true, prefix + ".w1");
        b.w2 = Tensor(residual_scale * glorot_uniform(cfg_.hidden_dim, cfg_.hidden_dim, rng), true,
                      prefix + ".w2");
        blocks_.push_back(std::move(b));
    }
}

void EncoderStack::check_input(const Tensor& x) const {
    if (x.cols() != cfg_.input_dim) {
        throw ShapeError("encode: expected " + std::to_string(cfg_.input_dim) +
                         " input columns, got " + shape_string(x));
    }
}

std::vector<Tensor> EncoderStack::encode_all_layers(const Tensor& x) const {
    check_input(x);
    if (cfg_.mode == BackboneMode::frozen_identity) return {x};
    std::vector<Tensor> outs;
    outs.reserve(blocks_.size() + 1);
    outs.push_back(ops::matmul(x, input_proj_));
    for (const auto& b : blocks_) {
        const Tensor& h = outs.back();
        outs.push_back(ops::add(h, ops::matmul(ops::relu(ops::matmul(h, b.w1)), b.w2)));
    }
    return outs;
}

Tensor EncoderStack::encode(const Tensor& x) const {
    check_input(x);
    if (cfg_.mode == BackboneMode::frozen_identity) return x;
    Tensor h = ops::matmul(x, input_proj_);
    for (const auto& b : blocks_) {
        h = ops::add(h, ops::matmul(ops::relu(ops::matmul(h, b.w1)), b.w2));
    }
    return h;
}

Index EncoderStack::num_layer_outputs() const {
    return cfg_.mode == BackboneMode::frozen_identity ? 1 : cfg_.num_layers + 1;
}

Index EncoderStack::output_dim() const { return cfg_.resolved_output_dim(); }

std::vector<Tensor> EncoderStack::parameters() const {
    std::vector<Tensor> out;
    if (cfg_.mode == BackboneMode::frozen_identity) return out;
    out.push_back(input_proj_);
    for (const auto& b : blocks_) {
        out.push_back(b.w1);
        out.push_back(b.w2);
    }
    return out;
}

std::vector<double> pool_user_input(std::span<const double> user_features,
                                    std::span<const std::vector<double>> history, Index item_dim) {
    std::vector<double> out(user_features.begin(), user_features.end());
    std::vector<double> mean(static_cast<std::size_t>(item_dim), 0.0);
    for (const auto& h : history) {
        if (static_cast<Index>(h.size()) != item_dim) {
            throw ShapeError("pool_user_input: history vector has dim " + std::to_string(h.size()) +
                             ", expected " + std::to_string(item_dim));
        }
        for (std::size_t j = 0; j < h.size(); ++j) mean[j] += h[j];
    }
    if (!history.empty()) {
        for (auto& v : mean) v /= static_cast<double>(history.size());
    }
    out.insert(out.end(), mean.begin(), mean.end());
    return out;
}

}  // namespace marc

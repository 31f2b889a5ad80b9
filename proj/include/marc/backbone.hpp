#pragma once

#include "marc/numcore/tensor.hpp"
#include "marc/rng.hpp"

#include <span>
#include <string>
#include <vector>

namespace marc {

enum class BackboneMode { trainable, frozen_identity };

std::string to_string(BackboneMode mode);
BackboneMode backbone_mode_from_string(const std::string& s);

struct EncoderConfig {
    Index input_dim = 0;
    Index hidden_dim = 64;
    Index num_layers = 6;
    Index output_dim = 0;  // 0 means hidden_dim; residual blocks require output_dim == hidden_dim
    BackboneMode mode = BackboneMode::trainable;

    Index resolved_output_dim() const;
    void validate() const;
};

/// Residual feed-forward encoder standing in for the language model.
///
/// Layer 0 is the input projection; layer l >= 1 is
///   h_l = h_{l-1} + relu(h_{l-1} W1_l) W2_l.
/// In frozen-identity mode there are no weights and the single layer is the
/// input itself (externally produced embeddings passed through).
class EncoderStack {
public:
    struct Block {
        Tensor w1;
        Tensor w2;
    };

    EncoderStack() = default;
    EncoderStack(const EncoderConfig& cfg, Rng& rng);

    /// Outputs of every layer, index 0..L. The last one is the original representation.
    std::vector<Tensor> encode_all_layers(const Tensor& x) const;
    Tensor encode(const Tensor& x) const;

    const EncoderConfig& config() const { return cfg_; }
    Index num_layer_outputs() const;
    Index output_dim() const;

    Tensor& input_projection() { return input_proj_; }
    std::vector<Block>& blocks() { return blocks_; }
    std::vector<Tensor> parameters() const;

private:
    void check_input(const Tensor& x) const;

    EncoderConfig cfg_;
    Tensor input_proj_;  // input_dim x hidden_dim
    std::vector<Block> blocks_;
};

/// Concatenates user features with the mean of the history item vectors.
/// An empty history contributes a zero vector of width `item_dim`.
std::vector<double> pool_user_input(std::span<const double> user_features,
                                    std::span<const std::vector<double>> history, Index item_dim);

}  // namespace marc

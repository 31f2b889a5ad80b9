#pragma once

#include "marc/compression.hpp"
#include "marc/numcore/nn.hpp"
#include "marc/numcore/tensor.hpp"

#include <span>
#include <string>
#include <vector>

namespace marc {

enum class ProxyOverride { none, cosine };

std::string to_string(ProxyOverride p);
ProxyOverride proxy_override_from_string(const std::string& s);

/// Loss weights and the ablation switches of the MARC objective.
struct MarcLossConfig {
    double alpha = 0.01;
    bool use_hsic = true;
    bool use_explicit_interactions = true;
    bool use_matching_net = true;
    ProxyOverride proxy_override = ProxyOverride::none;
    KernelConfig kernel;

    void validate() const;
};

/// f(.): MLP over the pair features with a sigmoid output.
class MatchingNet {
public:
    static inline const std::vector<Index> kDefaultHidden{128};

    MatchingNet() = default;
    MatchingNet(Index compressed_dim, bool explicit_interactions, Rng& rng,
                const std::vector<Index>& hidden = kDefaultHidden,
                const std::string& name = "matching");

    Index compressed_dim() const { return compressed_dim_; }
    bool explicit_interactions() const { return explicit_interactions_; }
    const std::vector<Index>& hidden() const { return hidden_; }
    Mlp& mlp() { return mlp_; }
    const Mlp& mlp() const { return mlp_; }
    std::vector<Tensor> parameters() const { return mlp_.parameters(); }

private:
    Index compressed_dim_ = 0;
    bool explicit_interactions_ = true;
    std::vector<Index> hidden_;
    Mlp mlp_;
};

/// [c_i, c_u, |c_i - c_u|, c_i * c_u], row-wise.
Tensor explicit_features(const Tensor& c_user, const Tensor& c_item);

/// Match probability per row, n x 1. Without explicit interactions the input
/// is [c_i, c_u].
Tensor predict_match(const Tensor& c_user, const Tensor& c_item, const MatchingNet& net);

inline constexpr double kProbabilityClamp = 1e-12;

/// Labels as an n x 1 constant tensor; throws if a label is not 0 or 1.
Tensor label_tensor(std::span<const double> labels);

/// Mean binary cross-entropy with predictions clamped to [eps, 1 - eps].
Tensor match_loss(const Tensor& y_hat, std::span<const double> labels);

/// Row-wise cosine similarity, n x 1. Throws on a zero-norm row.
Tensor row_cosine(const Tensor& a, const Tensor& b);

/// Loss used when the matching network is removed:
/// (1 - mean cos over positives) + mean cos over negatives; an absent class
/// contributes zero.
Tensor cosine_match_loss(const Tensor& c_user, const Tensor& c_item,
                         std::span<const double> labels);

}  // namespace marc

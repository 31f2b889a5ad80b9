#pragma once

#include "marc/backbone.hpp"
#include "marc/baselines.hpp"
#include "marc/compression.hpp"
#include "marc/config.hpp"
#include "marc/matching.hpp"

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace marc {

/// Backbone plus whichever heads the configured method needs.
///
///   marc  backbone -> compression -> matching (or cosine when no_mn)
///   cs    backbone, cosine proxy on the final layer
///   cl    backbone, in-batch contrastive proxy on the final layer
///   mrl   backbone -> compression -> nested heads
///   ae    frozen backbone, compression as encoder plus a decoder
///   pca   frozen backbone, PCA to d_c
struct MarcModel {
    RunConfig config;
    EncoderStack backbone;
    std::optional<CompressionNet> compression;
    std::optional<MatchingNet> matching;
    std::optional<NestedHeads> heads;
    std::optional<Mlp> decoder;
    std::optional<PcaModel> pca;
    bool trained = false;

    static MarcModel create(const RunConfig& cfg, Index input_dim);

    /// Parameters updated by the method's training loop.
    std::vector<Tensor> trainable_parameters() const;
    /// Every tensor with a stable name, in serialization order.
    std::vector<std::pair<std::string, Tensor>> named_tensors() const;

    /// Whether the method owns a compressor (so compressed() differs from r).
    bool has_compressor() const;
    /// Width of compressed() outputs.
    Index compressed_dim() const;
    Index original_dim() const { return backbone.output_dim(); }

    /// Maps original representations to compressed ones (identity for cs/cl).
    Tensor compress_representation(const Tensor& r) const;

    /// Rounds all parameters to float32 precision so the model file
    /// reproduces it exactly; marks the model trained.
    void freeze();
};

struct Batch {
    Tensor user_inputs;
    Tensor item_inputs;
    std::vector<double> labels;
};

struct LossParts {
    Tensor total;
    double match = 0.0;
    double hsic = 0.0;  // L_HSIC as added to the total (already negated)
    bool defined = true;  // false when the batch cannot form the loss (cl without two positives)
};

/// The method's training objective evaluated on given original
/// representations. Used for training (final layer) and for the per-layer
/// proxy analysis, so both read the same code.
LossParts method_loss(const MarcModel& model, const Tensor& r_user, const Tensor& r_item,
                      std::span<const double> labels);

/// Backbone -> method_loss. For MARC this is L_match + alpha * L_HSIC.
LossParts total_loss(const Batch& batch, const MarcModel& model);

}  // namespace marc

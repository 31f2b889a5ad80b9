#pragma once

#include "marc/config.hpp"
#include "marc/dataio.hpp"
#include "marc/numcore/nn.hpp"

#include <json.hpp>

#include <cstdint>
#include <span>
#include <vector>

namespace marc {

/// Softmax-gated mixture of MLP experts over one frozen representation.
class MoeAdapter {
public:
    MoeAdapter() = default;
    MoeAdapter(Index in, Index experts, const std::vector<Index>& layout, Rng& rng,
               const std::string& name);

    Tensor forward(const Tensor& rep) const;
    /// Gate weights, n x experts; each row sums to 1.
    Tensor gate(const Tensor& rep) const;
    Index out_dim() const { return experts_.front().out_dim(); }
    std::vector<Tensor> parameters() const;

private:
    Linear gate_;
    std::vector<Mlp> experts_;
};

/// Frozen per-entity inputs of the probe, standardized column-wise.
struct ProbeFeatures {
    Matrix users;  // n_users x d (may have zero columns)
    Matrix items;  // n_items x d
};

/// Column standardization with a guard for constant columns.
Matrix standardize_columns(const Matrix& m);
ProbeFeatures make_probe_features(const Matrix& user_reps, const Matrix& item_reps);

/// DCN-lite CTR model: id embeddings, MoE adapters over the frozen
/// representations, one cross layer and an output MLP with a sigmoid.
class CtrProbe {
public:
    CtrProbe() = default;
    CtrProbe(Index num_users, Index num_items, Index rep_dim, const ProbeConfig& cfg);

    /// Click probabilities for the given (user, item) rows, n x 1.
    Tensor forward(std::span<const Index> users, std::span<const Index> items,
                   const ProbeFeatures& features) const;
    std::vector<Tensor> parameters() const;
    bool uses_representations() const { return use_reps_; }
    const MoeAdapter& user_adapter() const { return user_adapter_; }

private:
    bool use_reps_ = false;
    Tensor user_emb_;
    Tensor item_emb_;
    MoeAdapter user_adapter_;
    MoeAdapter item_adapter_;
    Linear cross_;
    Mlp output_;
};

struct ProbeResult {
    double auc = 0.0;
    double logloss = 0.0;
    int epochs = 0;
    int best_epoch = 0;
    std::vector<double> train_losses;
    std::vector<double> validation_losses;
};

/// Trains a fresh probe on the train-user records (minus the validation
/// users, see ProbeConfig) and scores test-user records. Representation rows
/// are constants; no gradient reaches them. Representations that are
/// constant across all users and items yield the id-only probe. Throws
/// InvalidArgument on shape mismatch or single-class labels.
ProbeResult train_ctr_probe(const InteractionDataset& ds, const Matrix& user_reps,
                            const Matrix& item_reps, const ProbeConfig& cfg);

// ---------------------------------------------------------------- metrics

/// Probability a random positive outscores a random negative, ties = 1/2.
double auc(std::span<const double> scores, std::span<const double> labels);
/// Mean clamped binary cross-entropy.
double logloss(std::span<const double> scores, std::span<const double> labels);

/// Binary relevance in ranked order (index 0 is the top result).
using RankedList = std::vector<int>;

struct RankMetrics {
    std::vector<Index> ks;
    std::vector<double> ndcg;
    std::vector<double> map;
    std::vector<double> hitrate;
    double mrr = 0.0;
    Index lists = 0;
};

/// Averages over lists. Every K must be <= every list length and each list
/// must hold at least one relevant item.
RankMetrics rank_metrics(const std::vector<RankedList>& lists, const std::vector<Index>& ks);

/// Per test user: all items ranked by cosine similarity of representations,
/// relevant = the user's positive test records. Users without positives are skipped.
std::vector<RankedList> cosine_ranked_lists(const InteractionDataset& ds, const Matrix& user_reps,
                                            const Matrix& item_reps);

struct StorageEntry {
    Index dim = 0;
    std::uint64_t bytes = 0;
    double ratio = 0.0;  // bytes / bytes of the smallest dim
};

/// float32 storage of one vector per user and item for each dim.
std::vector<StorageEntry> storage_report(Index num_users, Index num_items,
                                         const std::vector<Index>& dims);

nlohmann::json to_json(const RankMetrics& m);
nlohmann::json to_json(const std::vector<StorageEntry>& s);

}  // namespace marc

#pragma once

#include "marc/numcore/tensor.hpp"
#include "marc/rng.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace marc {

struct SyntheticConfig {
    Index num_users = 2000;
    Index num_items = 1000;
    Index num_interactions = 50000;
    Index latent_dim = 8;         // k
    Index observable_dim = 64;    // width of the item vectors
    Index user_feature_dim = 16;  // width of the user attribute vectors
    double temperature = 1.0;     // tau in P(y=1) = sigmoid(z_u . z_i / tau)
    double user_feature_noise = 1.0;
    Index history_draws = 40;     // candidate items drawn per user for the history
    Index history_cap = 30;
    std::uint64_t seed = 0;

    void validate() const;
};

struct Interaction {
    Index user = 0;
    Index item = 0;
    double label = 0.0;
    std::int64_t timestamp = 0;
};

/// Users, items, labeled pairs, histories and a user-disjoint split.
struct InteractionDataset {
    std::vector<std::string> user_ids;
    std::vector<std::string> item_ids;
    Matrix user_features;  // n_users x d_u
    Matrix item_vectors;   // n_items x d_in
    std::vector<Interaction> records;
    std::vector<std::vector<Index>> histories;  // per user, oldest first
    std::vector<bool> test_user;                // per user

    // Generator latents; empty for ingested data.
    Matrix user_latents;
    Matrix item_latents;

    Index num_users() const { return static_cast<Index>(user_ids.size()); }
    Index num_items() const { return static_cast<Index>(item_ids.size()); }
    Index user_feature_dim() const { return user_features.cols(); }
    Index item_dim() const { return item_vectors.cols(); }
    /// Backbone input width: user features plus pooled item vector.
    Index input_dim() const { return user_feature_dim() + item_dim(); }

    /// pool_user_input for every user, n_users x input_dim.
    Matrix user_inputs() const;
    /// [0 (d_u), item vector] for every item, n_items x input_dim.
    Matrix item_inputs() const;

    std::vector<Index> records_for(bool test) const;

    /// Checks the structural invariants (binary labels, ids in range,
    /// history references, split shape). Throws InvalidArgument.
    void validate() const;
};

InteractionDataset gen_synthetic(const SyntheticConfig& cfg);

/// Marks round((1 - train_ratio) * n) users as test, chosen by a seeded shuffle.
std::vector<bool> split_by_user(Index num_users, double train_ratio, std::uint64_t seed);

/// Picks up to `count` distinct indices from `pool` (order randomized).
std::vector<Index> sample_without_replacement(const std::vector<Index>& pool, Index count,
                                              Rng& rng);

// ---------------------------------------------------------------- files

/// Row-major float32 table with optional row identifiers.
struct EmbeddingTable {
    std::uint64_t count = 0;
    std::uint32_t dim = 0;
    std::vector<float> values;
    std::vector<std::string> ids;  // empty or `count` entries

    Matrix to_matrix() const;
    static EmbeddingTable from_matrix(const Matrix& m, std::vector<std::string> ids = {});
};

inline constexpr char kEmbeddingMagic[8] = {'M', 'A', 'R', 'C', 'E', 'M', 'B', '1'};
inline constexpr std::uint32_t kEmbeddingVersion = 1;

/// Writes `path` and, when ids are present, `path` + ".ids".
void save_embeddings(const EmbeddingTable& table, const std::filesystem::path& path);
/// Reads `path` and its ".ids" sidecar if it exists. Throws FormatError.
EmbeddingTable load_embeddings(const std::filesystem::path& path);

/// `user_id,item_id,label[,timestamp]` rows.
void save_interactions_csv(const InteractionDataset& ds, const std::filesystem::path& path);

/// Writes users.emb/.ids, items.emb/.ids, interactions.csv, history.csv and
/// split.csv into `dir`.
void save_dataset(const InteractionDataset& ds, const std::filesystem::path& dir);

/// Reads a dataset directory. When split.csv is absent the user split is
/// drawn with `split_seed`; when history.csv is absent histories are the
/// users' positive items ordered by timestamp.
InteractionDataset load_dataset(const std::filesystem::path& dir, std::uint64_t split_seed = 0,
                                Index history_cap = 30);

/// Rounds every entry to the nearest float32 value.
void round_to_float(Matrix& m);

}  // namespace marc

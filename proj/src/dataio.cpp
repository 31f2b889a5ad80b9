#include "marc/dataio.hpp"

#include "marc/backbone.hpp"
#include "marc/error.hpp"
#include "byte_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace marc {

namespace fs = std::filesystem;
using detail::get_le;
using detail::put_le;
using detail::read_file;
using detail::write_file;

void SyntheticConfig::validate() const {
    if (num_users < 1 || num_items < 1 || num_interactions < 1) {
        throw InvalidArgument("synthetic: counts must be positive");
    }
    if (latent_dim < 1 || observable_dim < 1 || user_feature_dim < 1) {
        throw InvalidArgument("synthetic: dimensions must be positive");
    }
    if (observable_dim < latent_dim) {
        throw InvalidArgument("synthetic: observable_dim must be >= latent_dim");
    }
    if (!(temperature > 0.0)) throw InvalidArgument("synthetic: temperature must be positive");
    if (history_cap < 0 || history_draws < 0) {
        throw InvalidArgument("synthetic: history sizes must be >= 0");
    }
    if (num_interactions > num_users * num_items) {
        throw InvalidArgument("synthetic: " + std::to_string(num_interactions) +
                              " interactions exceed users x items = " +
                              std::to_string(num_users * num_items));
    }
}

void round_to_float(Matrix& m) {
    for (Index i = 0; i < m.size(); ++i) {
        m.data()[i] = static_cast<double>(static_cast<float>(m.data()[i]));
    }
}

namespace {

Matrix normal_matrix(Index rows, Index cols, Rng& rng, double scale = 1.0) {
    Matrix m(rows, cols);
    for (Index i = 0; i < m.size(); ++i) m.data()[i] = scale * rng.normal();
    return m;
}

/// tanh(z A) B with Gaussian A, B scaled to keep unit-order activations.
Matrix nonlinear_expansion(const Matrix& z, Index out_dim, Rng& rng) {
    const Index k = z.cols();
    const Index hidden = 2 * out_dim;
    Matrix a = normal_matrix(k, hidden, rng, 1.0 / std::sqrt(static_cast<double>(k)));
    Matrix b = normal_matrix(hidden, out_dim, rng, 1.0 / std::sqrt(static_cast<double>(hidden)));
    Matrix h = (z * a).array().tanh().matrix();
    return h * b;
}

double logistic(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

std::vector<std::string> make_ids(const std::string& prefix, Index n) {
    std::vector<std::string> ids;
    ids.reserve(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) ids.push_back(prefix + std::to_string(i));
    return ids;
}

}  // namespace

InteractionDataset gen_synthetic(const SyntheticConfig& cfg) {
    cfg.validate();
    const Rng root = Rng(cfg.seed).split(streams::kSynthetic);
    Rng latent_rng = root.split(1);
    Rng item_map_rng = root.split(2);
    Rng user_map_rng = root.split(3);
    Rng pair_rng = root.split(4);
    Rng label_rng = root.split(5);
    Rng history_rng = root.split(6);
    Rng noise_rng = root.split(7);

    InteractionDataset ds;
    ds.user_ids = make_ids("u", cfg.num_users);
    ds.item_ids = make_ids("i", cfg.num_items);
    ds.user_latents = normal_matrix(cfg.num_users, cfg.latent_dim, latent_rng);
    ds.item_latents = normal_matrix(cfg.num_items, cfg.latent_dim, latent_rng);

    ds.item_vectors = nonlinear_expansion(ds.item_latents, cfg.observable_dim, item_map_rng);
    Matrix noisy = ds.user_latents +
                   normal_matrix(cfg.num_users, cfg.latent_dim, noise_rng, cfg.user_feature_noise);
    ds.user_features = nonlinear_expansion(noisy, cfg.user_feature_dim, user_map_rng);
    round_to_float(ds.item_vectors);
    round_to_float(ds.user_features);

    auto prob = [&](Index u, Index i) {
        return logistic(ds.user_latents.row(u).dot(ds.item_latents.row(i)) / cfg.temperature);
    };

    // Distinct (user, item) pairs.
    const auto n_items = static_cast<std::uint64_t>(cfg.num_items);
    std::vector<std::uint64_t> pairs;
    const std::uint64_t total = static_cast<std::uint64_t>(cfg.num_users) * n_items;
    const auto wanted = static_cast<std::uint64_t>(cfg.num_interactions);
    if (wanted * 2 > total) {
        pairs.resize(total);
        for (std::uint64_t p = 0; p < total; ++p) pairs[p] = p;
        pair_rng.shuffle(std::span<std::uint64_t>(pairs));
        pairs.resize(wanted);
    } else {
        std::unordered_set<std::uint64_t> seen;
        seen.reserve(wanted * 2);
        while (pairs.size() < wanted) {
            const std::uint64_t p = pair_rng.below(total);
            if (seen.insert(p).second) pairs.push_back(p);
        }
    }

    std::vector<std::unordered_set<Index>> user_items(static_cast<std::size_t>(cfg.num_users));
    ds.records.reserve(pairs.size());
    for (std::size_t r = 0; r < pairs.size(); ++r) {
        const auto u = static_cast<Index>(pairs[r] / n_items);
        const auto i = static_cast<Index>(pairs[r] % n_items);
        Interaction rec;
        rec.user = u;
        rec.item = i;
        rec.label = label_rng.bernoulli(prob(u, i)) ? 1.0 : 0.0;
        rec.timestamp = static_cast<std::int64_t>(r);
        ds.records.push_back(rec);
        user_items[static_cast<std::size_t>(u)].insert(i);
    }

    // Histories come from a separate draw so that a user's representation
    // never sees the labels it is evaluated on.
    ds.histories.resize(static_cast<std::size_t>(cfg.num_users));
    const Index draws = std::min(cfg.history_draws, cfg.num_items);
    for (Index u = 0; u < cfg.num_users; ++u) {
        const auto& taken = user_items[static_cast<std::size_t>(u)];
        std::unordered_set<Index> drawn;
        std::vector<Index> positives;
        Index attempts = 0;
        while (static_cast<Index>(drawn.size()) < draws && attempts < 20 * draws) {
            ++attempts;
            const auto i = static_cast<Index>(history_rng.below(n_items));
            if (taken.count(i) || !drawn.insert(i).second) continue;
            if (history_rng.bernoulli(prob(u, i))) positives.push_back(i);
        }
        if (static_cast<Index>(positives.size()) > cfg.history_cap) {
            positives.erase(positives.begin(),
                            positives.end() - static_cast<std::ptrdiff_t>(cfg.history_cap));
        }
        ds.histories[static_cast<std::size_t>(u)] = std::move(positives);
    }

    ds.test_user = split_by_user(cfg.num_users, 0.9, cfg.seed);
    return ds;
}

std::vector<bool> split_by_user(Index num_users, double train_ratio, std::uint64_t seed) {
    if (num_users < 10) {
        throw InvalidArgument("split_by_user: need at least 10 users, got " +
                              std::to_string(num_users));
    }
    if (!(train_ratio > 0.0 && train_ratio < 1.0)) {
        throw InvalidArgument("split_by_user: train ratio must lie in (0, 1)");
    }
    std::vector<Index> order(static_cast<std::size_t>(num_users));
    for (Index u = 0; u < num_users; ++u) order[static_cast<std::size_t>(u)] = u;
    Rng rng = Rng(seed).split(streams::kSplit);
    rng.shuffle(std::span<Index>(order));
    const auto n_train = static_cast<Index>(std::llround(train_ratio * static_cast<double>(num_users)));
    std::vector<bool> test(static_cast<std::size_t>(num_users), false);
    for (Index r = n_train; r < num_users; ++r) test[static_cast<std::size_t>(order[r])] = true;
    return test;
}

std::vector<Index> sample_without_replacement(const std::vector<Index>& pool, Index count,
                                              Rng& rng) {
    std::vector<Index> copy = pool;
    rng.shuffle(std::span<Index>(copy));
    if (count < static_cast<Index>(copy.size())) copy.resize(static_cast<std::size_t>(count));
    return copy;
}

Matrix InteractionDataset::user_inputs() const {
    Matrix out(num_users(), input_dim());
    std::vector<std::vector<double>> hist;
    for (Index u = 0; u < num_users(); ++u) {
        hist.clear();
        for (Index i : histories[static_cast<std::size_t>(u)]) {
            hist.emplace_back(item_vectors.row(i).data(), item_vectors.row(i).data() + item_dim());
        }
        std::vector<double> row = pool_user_input(
            std::span<const double>(user_features.row(u).data(),
                                    static_cast<std::size_t>(user_feature_dim())),
            hist, item_dim());
        out.row(u) = Eigen::Map<const Eigen::RowVectorXd>(row.data(), input_dim());
    }
    return out;
}

Matrix InteractionDataset::item_inputs() const {
    Matrix out = Matrix::Zero(num_items(), input_dim());
    out.rightCols(item_dim()) = item_vectors;
    return out;
}

std::vector<Index> InteractionDataset::records_for(bool test) const {
    std::vector<Index> out;
    for (std::size_t r = 0; r < records.size(); ++r) {
        if (test_user[static_cast<std::size_t>(records[r].user)] == test) {
            out.push_back(static_cast<Index>(r));
        }
    }
    return out;
}

void InteractionDataset::validate() const {
    if (user_features.rows() != num_users()) throw InvalidArgument("dataset: user table size");
    if (item_vectors.rows() != num_items()) throw InvalidArgument("dataset: item table size");
    if (static_cast<Index>(histories.size()) != num_users()) {
        throw InvalidArgument("dataset: history list count");
    }
    if (static_cast<Index>(test_user.size()) != num_users()) {
        throw InvalidArgument("dataset: split size");
    }
    for (const auto& r : records) {
        if (r.user < 0 || r.user >= num_users() || r.item < 0 || r.item >= num_items()) {
            throw InvalidArgument("dataset: record references unknown user/item");
        }
        if (r.label != 0.0 && r.label != 1.0) throw InvalidArgument("dataset: non-binary label");
    }
    for (const auto& h : histories) {
        for (Index i : h) {
            if (i < 0 || i >= num_items()) throw InvalidArgument("dataset: history item unknown");
        }
    }
}

// ---------------------------------------------------------------- embeddings

Matrix EmbeddingTable::to_matrix() const {
    Matrix m(static_cast<Index>(count), static_cast<Index>(dim));
    for (std::size_t i = 0; i < values.size(); ++i) m.data()[i] = static_cast<double>(values[i]);
    return m;
}

EmbeddingTable EmbeddingTable::from_matrix(const Matrix& m, std::vector<std::string> ids) {
    EmbeddingTable t;
    t.count = static_cast<std::uint64_t>(m.rows());
    t.dim = static_cast<std::uint32_t>(m.cols());
    t.values.resize(static_cast<std::size_t>(m.size()));
    for (Index i = 0; i < m.size(); ++i) t.values[static_cast<std::size_t>(i)] = static_cast<float>(m.data()[i]);
    t.ids = std::move(ids);
    return t;
}

namespace {

fs::path ids_path(const fs::path& path) { return fs::path(path.string() + ".ids"); }

std::vector<std::string> read_lines(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path.string());
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(line);
    }
    return lines;
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

}  // namespace

void save_embeddings(const EmbeddingTable& table, const fs::path& path) {
    if (table.values.size() != table.count * table.dim) {
        throw InvalidArgument("save_embeddings: value count does not match count x dim");
    }
    if (!table.ids.empty() && table.ids.size() != table.count) {
        throw InvalidArgument("save_embeddings: id count does not match row count");
    }
    std::string bytes(kEmbeddingMagic, sizeof(kEmbeddingMagic));
    put_le<std::uint32_t>(bytes, kEmbeddingVersion);
    put_le<std::uint64_t>(bytes, table.count);
    put_le<std::uint32_t>(bytes, table.dim);
    bytes.reserve(bytes.size() + table.values.size() * 4);
    for (float v : table.values) put_le<std::uint32_t>(bytes, std::bit_cast<std::uint32_t>(v));
    write_file(path, bytes);
    if (!table.ids.empty()) {
        std::string text;
        for (const auto& id : table.ids) text += id + "\n";
        write_file(ids_path(path), text);
    }
}

EmbeddingTable load_embeddings(const fs::path& path) {
    const std::string bytes = read_file(path);
    constexpr std::size_t header = 8 + 4 + 8 + 4;
    if (bytes.size() < 8 || std::memcmp(bytes.data(), kEmbeddingMagic, 8) != 0) {
        throw FormatError(FormatErrc::bad_magic, path.string() + ": bad magic");
    }
    if (bytes.size() < header) {
        throw FormatError(FormatErrc::truncated, path.string() + ": truncated header");
    }
    const auto version = get_le<std::uint32_t>(bytes, 8);
    if (version != kEmbeddingVersion) {
        throw FormatError(FormatErrc::bad_version,
                          path.string() + ": unsupported version " + std::to_string(version));
    }
    EmbeddingTable t;
    t.count = get_le<std::uint64_t>(bytes, 12);
    t.dim = get_le<std::uint32_t>(bytes, 20);
    const std::uint64_t payload = bytes.size() - header;
    const std::uint64_t expected = t.count * t.dim * 4;
    if (payload < expected) {
        throw FormatError(FormatErrc::truncated,
                          path.string() + ": truncated payload (" + std::to_string(payload) +
                              " of " + std::to_string(expected) + " bytes)");
    }
    if (payload > expected) {
        throw FormatError(FormatErrc::count_mismatch,
                          path.string() + ": payload larger than count x dim");
    }
    t.values.resize(t.count * t.dim);
    for (std::size_t i = 0; i < t.values.size(); ++i) {
        t.values[i] = std::bit_cast<float>(get_le<std::uint32_t>(bytes, header + 4 * i));
    }
    if (fs::exists(ids_path(path))) {
        t.ids = read_lines(ids_path(path));
        if (t.ids.size() != t.count) {
            throw FormatError(FormatErrc::count_mismatch,
                              path.string() + ".ids: " + std::to_string(t.ids.size()) +
                                  " ids for " + std::to_string(t.count) + " rows");
        }
    }
    return t;
}

// ---------------------------------------------------------------- dataset dir

void save_interactions_csv(const InteractionDataset& ds, const fs::path& path) {
    std::string text = "user_id,item_id,label,timestamp\n";
    for (const auto& r : ds.records) {
        text += ds.user_ids[static_cast<std::size_t>(r.user)] + "," +
                ds.item_ids[static_cast<std::size_t>(r.item)] + "," +
                (r.label == 1.0 ? "1" : "0") + "," + std::to_string(r.timestamp) + "\n";
    }
    write_file(path, text);
}

void save_dataset(const InteractionDataset& ds, const fs::path& dir) {
    fs::create_directories(dir);
    save_embeddings(EmbeddingTable::from_matrix(ds.user_features, ds.user_ids), dir / "users.emb");
    save_embeddings(EmbeddingTable::from_matrix(ds.item_vectors, ds.item_ids), dir / "items.emb");
    save_interactions_csv(ds, dir / "interactions.csv");

    std::string hist = "user_id,item_id,timestamp\n";
    for (Index u = 0; u < ds.num_users(); ++u) {
        const auto& h = ds.histories[static_cast<std::size_t>(u)];
        for (std::size_t k = 0; k < h.size(); ++k) {
            hist += ds.user_ids[static_cast<std::size_t>(u)] + "," +
                    ds.item_ids[static_cast<std::size_t>(h[k])] + "," + std::to_string(k) + "\n";
        }
    }
    write_file(dir / "history.csv", hist);

    std::string split = "user_id,split\n";
    for (Index u = 0; u < ds.num_users(); ++u) {
        split += ds.user_ids[static_cast<std::size_t>(u)] +
                 (ds.test_user[static_cast<std::size_t>(u)] ? ",test\n" : ",train\n");
    }
    write_file(dir / "split.csv", split);
}

namespace {

std::unordered_map<std::string, Index> index_of(const std::vector<std::string>& ids,
                                                const std::string& what) {
    std::unordered_map<std::string, Index> out;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (!out.emplace(ids[i], static_cast<Index>(i)).second) {
            throw FormatError(FormatErrc::malformed, what + ": duplicate id '" + ids[i] + "'");
        }
    }
    return out;
}

Index lookup(const std::unordered_map<std::string, Index>& map, const std::string& id,
             const std::string& where) {
    auto it = map.find(id);
    if (it == map.end()) {
        throw FormatError(FormatErrc::malformed, where + ": unknown id '" + id + "'");
    }
    return it->second;
}

std::vector<std::string> default_ids(const EmbeddingTable& t, const std::string& prefix) {
    if (!t.ids.empty()) return t.ids;
    return make_ids(prefix, static_cast<Index>(t.count));
}

}  // namespace

InteractionDataset load_dataset(const fs::path& dir, std::uint64_t split_seed, Index history_cap) {
    InteractionDataset ds;
    EmbeddingTable users = load_embeddings(dir / "users.emb");
    EmbeddingTable items = load_embeddings(dir / "items.emb");
    ds.user_ids = default_ids(users, "u");
    ds.item_ids = default_ids(items, "i");
    ds.user_features = users.to_matrix();
    ds.item_vectors = items.to_matrix();
    const auto user_index = index_of(ds.user_ids, "users.emb.ids");
    const auto item_index = index_of(ds.item_ids, "items.emb.ids");

    const auto lines = read_lines(dir / "interactions.csv");
    if (lines.empty()) throw FormatError(FormatErrc::malformed, "interactions.csv: empty");
    const auto header = split_csv(lines.front());
    auto column = [&](const std::string& name) -> int {
        for (std::size_t c = 0; c < header.size(); ++c)
            if (header[c] == name) return static_cast<int>(c);
        return -1;
    };
    const int cu = column("user_id"), ci = column("item_id"), cl = column("label"),
              ct = column("timestamp");
    if (cu < 0 || ci < 0 || cl < 0) {
        throw FormatError(FormatErrc::malformed,
                          "interactions.csv: header must contain user_id,item_id,label");
    }
    for (std::size_t ln = 1; ln < lines.size(); ++ln) {
        if (lines[ln].empty()) continue;
        const auto cells = split_csv(lines[ln]);
        const std::string where = "interactions.csv:" + std::to_string(ln + 1);
        if (static_cast<int>(cells.size()) < static_cast<int>(header.size())) {
            throw FormatError(FormatErrc::malformed, where + ": too few columns");
        }
        Interaction r;
        r.user = lookup(user_index, cells[static_cast<std::size_t>(cu)], where);
        r.item = lookup(item_index, cells[static_cast<std::size_t>(ci)], where);
        const std::string& label = cells[static_cast<std::size_t>(cl)];
        if (label != "0" && label != "1") {
            throw FormatError(FormatErrc::malformed, where + ": label must be 0 or 1");
        }
        r.label = label == "1" ? 1.0 : 0.0;
        r.timestamp = ct >= 0 ? std::stoll(cells[static_cast<std::size_t>(ct)])
                              : static_cast<std::int64_t>(ln);
        ds.records.push_back(r);
    }

    ds.histories.assign(static_cast<std::size_t>(ds.num_users()), {});
    if (fs::exists(dir / "history.csv")) {
        const auto hl = read_lines(dir / "history.csv");
        std::vector<std::vector<std::pair<std::int64_t, Index>>> stamped(ds.histories.size());
        for (std::size_t ln = 1; ln < hl.size(); ++ln) {
            if (hl[ln].empty()) continue;
            const auto cells = split_csv(hl[ln]);
            const std::string where = "history.csv:" + std::to_string(ln + 1);
            if (cells.size() < 3) throw FormatError(FormatErrc::malformed, where + ": too few columns");
            const Index u = lookup(user_index, cells[0], where);
            stamped[static_cast<std::size_t>(u)].emplace_back(std::stoll(cells[2]),
                                                              lookup(item_index, cells[1], where));
        }
        for (std::size_t u = 0; u < stamped.size(); ++u) {
            std::stable_sort(stamped[u].begin(), stamped[u].end(),
                             [](const auto& a, const auto& b) { return a.first < b.first; });
            for (const auto& [ts, item] : stamped[u]) ds.histories[u].push_back(item);
        }
    } else {
        std::vector<Index> order(ds.records.size());
        for (std::size_t r = 0; r < order.size(); ++r) order[r] = static_cast<Index>(r);
        std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
            return ds.records[static_cast<std::size_t>(a)].timestamp <
                   ds.records[static_cast<std::size_t>(b)].timestamp;
        });
        for (Index r : order) {
            const auto& rec = ds.records[static_cast<std::size_t>(r)];
            if (rec.label == 1.0) ds.histories[static_cast<std::size_t>(rec.user)].push_back(rec.item);
        }
    }
    for (auto& h : ds.histories) {
        if (static_cast<Index>(h.size()) > history_cap) {
            h.erase(h.begin(), h.end() - static_cast<std::ptrdiff_t>(history_cap));
        }
    }

    if (fs::exists(dir / "split.csv")) {
        ds.test_user.assign(static_cast<std::size_t>(ds.num_users()), false);
        const auto sl = read_lines(dir / "split.csv");
        for (std::size_t ln = 1; ln < sl.size(); ++ln) {
            if (sl[ln].empty()) continue;
            const auto cells = split_csv(sl[ln]);
            const std::string where = "split.csv:" + std::to_string(ln + 1);
            if (cells.size() < 2 || (cells[1] != "train" && cells[1] != "test")) {
                throw FormatError(FormatErrc::malformed, where + ": expected user_id,train|test");
            }
            ds.test_user[static_cast<std::size_t>(lookup(user_index, cells[0], where))] =
                cells[1] == "test";
        }
    } else {
        ds.test_user = split_by_user(ds.num_users(), 0.9, split_seed);
    }
    ds.validate();
    return ds;
}

}  // namespace marc

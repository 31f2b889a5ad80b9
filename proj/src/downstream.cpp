#include "marc/downstream.hpp"

#include "marc/error.hpp"
#include "marc/matching.hpp"
#include "marc/numcore/ops.hpp"
#include "marc/numcore/optim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace marc {

using nlohmann::json;

MoeAdapter::MoeAdapter(Index in, Index experts, const std::vector<Index>& layout, Rng& rng,
                       const std::string& name) {
    if (experts < 1) throw InvalidArgument("experts: must be >= 1");
    if (layout.empty()) throw InvalidArgument("expert_layout: must not be empty");
    gate_ = Linear(in, experts, rng, name + ".gate");
    const std::vector<Index> hidden(layout.begin(), layout.end() - 1);
    for (Index e = 0; e < experts; ++e) {
        experts_.emplace_back(in, hidden, layout.back(), rng, name + ".expert" + std::to_string(e));
    }
}

Tensor MoeAdapter::gate(const Tensor& rep) const { return ops::softmax_rows(gate_.forward(rep)); }

Tensor MoeAdapter::forward(const Tensor& rep) const {
    const Tensor g = gate(rep);
    Tensor out;
    for (std::size_t e = 0; e < experts_.size(); ++e) {
        Tensor part = ops::mul(experts_[e].forward(rep), ops::slice_cols(g, static_cast<Index>(e), 1));
        out = e == 0 ? part : ops::add(out, part);
    }
    return out;
}

std::vector<Tensor> MoeAdapter::parameters() const {
    std::vector<Tensor> out{gate_.weight, gate_.bias};
    for (const auto& e : experts_) {
        auto ps = e.parameters();
        out.insert(out.end(), ps.begin(), ps.end());
    }
    return out;
}

Matrix standardize_columns(const Matrix& m) {
    Matrix out = m;
    if (m.rows() == 0) return out;
    for (Index c = 0; c < m.cols(); ++c) {
        const double mu = m.col(c).mean();
        const double var = (m.col(c).array() - mu).square().mean();
        const double sd = std::sqrt(var);
        out.col(c).array() -= mu;
        if (sd > 1e-12) out.col(c) /= sd;
    }
    return out;
}

ProbeFeatures make_probe_features(const Matrix& user_reps, const Matrix& item_reps) {
    return ProbeFeatures{standardize_columns(user_reps), standardize_columns(item_reps)};
}

CtrProbe::CtrProbe(Index num_users, Index num_items, Index rep_dim, const ProbeConfig& cfg)
    : use_reps_(cfg.use_representations && rep_dim > 0) {
    cfg.validate();
    const Rng root(cfg.seed);
    Rng rng = root.split(streams::kProbe);
    user_emb_ = Tensor(glorot_uniform(num_users, cfg.id_dim, rng), true, "probe.user_emb");
    item_emb_ = Tensor(glorot_uniform(num_items, cfg.id_dim, rng), true, "probe.item_emb");
    Index width = 2 * cfg.id_dim;
    if (use_reps_) {
        Rng adapter_rng = root.split(streams::kProbeAdapters);
        user_adapter_ = MoeAdapter(rep_dim, cfg.experts, cfg.expert_layout, adapter_rng, "probe.user_moe");
        item_adapter_ = MoeAdapter(rep_dim, cfg.experts, cfg.expert_layout, adapter_rng, "probe.item_moe");
        width += user_adapter_.out_dim() + item_adapter_.out_dim();
    }
    cross_ = Linear(width, width, rng, "probe.cross");
    output_ = Mlp(width, cfg.output_hidden, 1, rng, "probe.output");
}

namespace {

Tensor rows_of(const Matrix& table, std::span<const Index> rows) {
    Matrix out(static_cast<Index>(rows.size()), table.cols());
    for (std::size_t r = 0; r < rows.size(); ++r) out.row(static_cast<Index>(r)) = table.row(rows[r]);
    return Tensor(std::move(out));
}

}  // namespace

Tensor CtrProbe::forward(std::span<const Index> users, std::span<const Index> items,
                         const ProbeFeatures& features) const {
    if (users.size() != items.size()) throw ShapeError("CtrProbe: user and item counts differ");
    std::vector<Tensor> parts{ops::gather_rows(user_emb_, users), ops::gather_rows(item_emb_, items)};
    if (use_reps_) {
        parts.push_back(user_adapter_.forward(rows_of(features.users, users)));
        parts.push_back(item_adapter_.forward(rows_of(features.items, items)));
    }
    const Tensor x0 = ops::concat_cols(parts);
    const Tensor crossed = ops::add(ops::mul(x0, cross_.forward(x0)), x0);
    return ops::sigmoid(output_.forward(crossed));
}

std::vector<Tensor> CtrProbe::parameters() const {
    std::vector<Tensor> out{user_emb_, item_emb_};
    auto append = [&](const std::vector<Tensor>& ps) { out.insert(out.end(), ps.begin(), ps.end()); };
    if (use_reps_) {
        append(user_adapter_.parameters());
        append(item_adapter_.parameters());
    }
    append({cross_.weight, cross_.bias});
    append(output_.parameters());
    return out;
}

namespace {

struct RowBatch {
    std::vector<Index> users;
    std::vector<Index> items;
    std::vector<double> labels;

    void fill(const InteractionDataset& ds, std::span<const Index> records) {
        users.clear();
        items.clear();
        labels.clear();
        for (Index r : records) {
            const auto& rec = ds.records[r];
            users.push_back(rec.user);
            items.push_back(rec.item);
            labels.push_back(rec.label);
        }
    }
};

bool single_class(const InteractionDataset& ds, const std::vector<Index>& records) {
    bool pos = false, neg = false;
    for (Index r : records) (ds.records[r].label == 1.0 ? pos : neg) = true;
    return !(pos && neg);
}

/// Scores and labels of `records` under the current probe, without a tape.
std::pair<std::vector<double>, std::vector<double>> score_records(const CtrProbe& probe,
                                                                  const InteractionDataset& ds,
                                                                  const std::vector<Index>& records,
                                                                  const ProbeFeatures& features) {
    constexpr std::size_t kChunk = 4096;
    std::vector<double> scores, labels;
    scores.reserve(records.size());
    labels.reserve(records.size());
    RowBatch rows;
    for (std::size_t start = 0; start < records.size(); start += kChunk) {
        const std::size_t end = std::min(records.size(), start + kChunk);
        rows.fill(ds, std::span<const Index>(records).subspan(start, end - start));
        const Tensor p = probe.forward(rows.users, rows.items, features);
        for (Index r = 0; r < p.rows(); ++r) scores.push_back(p.value()(r, 0));
        labels.insert(labels.end(), rows.labels.begin(), rows.labels.end());
    }
    return {std::move(scores), std::move(labels)};
}

}  // namespace

ProbeResult train_ctr_probe(const InteractionDataset& ds, const Matrix& user_reps,
                            const Matrix& item_reps, const ProbeConfig& cfg) {
    cfg.validate();
    if (user_reps.rows() != ds.num_users() || item_reps.rows() != ds.num_items()) {
        std::string missing;
        if (user_reps.rows() < ds.num_users()) {
            missing += " users " + std::to_string(user_reps.rows()) + ".." + std::to_string(ds.num_users() - 1);
        }
        if (item_reps.rows() < ds.num_items()) {
            missing += " items " + std::to_string(item_reps.rows()) + ".." + std::to_string(ds.num_items() - 1);
        }
        throw InvalidArgument("train_ctr_probe: representation rows do not match the dataset;" +
                              (missing.empty() ? std::string(" extra rows present") : " missing" + missing));
    }
    if (user_reps.cols() != item_reps.cols()) {
        throw ShapeError("train_ctr_probe: user and item representation widths differ");
    }

    const Rng root(cfg.seed);
    std::vector<Index> fit = ds.records_for(false);
    const std::vector<Index> test = ds.records_for(true);
    if (fit.empty() || single_class(ds, fit)) {
        throw InvalidArgument("train_ctr_probe: training labels are single-class");
    }
    if (test.empty() || single_class(ds, test)) {
        throw InvalidArgument("train_ctr_probe: test labels are single-class; AUC undefined");
    }

    std::vector<Index> holdout;
    const bool use_validation = cfg.early_stopping == EarlyStopping::validation;
    if (use_validation) {
        std::vector<Index> train_users;
        for (Index u = 0; u < ds.num_users(); ++u)
            if (!ds.test_user[static_cast<std::size_t>(u)]) train_users.push_back(u);
        Rng val_rng = root.split(streams::kProbeValidation);
        val_rng.shuffle(std::span<Index>(train_users));
        const auto n_val = static_cast<std::size_t>(
            std::llround(cfg.validation_fraction * static_cast<double>(train_users.size())));
        std::vector<char> is_val(static_cast<std::size_t>(ds.num_users()), 0);
        for (std::size_t k = 0; k < n_val; ++k) is_val[train_users[k]] = 1;
        std::vector<Index> kept;
        for (Index r : fit) (is_val[ds.records[r].user] ? holdout : kept).push_back(r);
        fit = std::move(kept);
        if (holdout.empty() || fit.empty() || single_class(ds, fit)) {
            throw InvalidArgument("train_ctr_probe: validation split leaves no usable training or holdout rows");
        }
    }

    const ProbeFeatures features = make_probe_features(user_reps, item_reps);
    // Constant representations carry no signal; the adapters would only add
    // constant channels, so the probe is built as the id-only model.
    ProbeConfig probe_cfg = cfg;
    if (features.users.isZero(0.0) && features.items.isZero(0.0)) probe_cfg.use_representations = false;
    CtrProbe probe(ds.num_users(), ds.num_items(), user_reps.cols(), probe_cfg);
    const std::vector<Tensor> params = probe.parameters();
    Adam adam(params, AdamConfig{cfg.lr});
    Rng order_rng = root.split(streams::kProbeOrder);

    ProbeResult result;
    std::vector<Matrix> best_params;
    double best = std::numeric_limits<double>::infinity();
    int stale = 0;
    RowBatch rows;
    const auto batch = static_cast<std::size_t>(cfg.batch_size);
    for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        order_rng.shuffle(std::span<Index>(fit));
        double total = 0.0;
        for (std::size_t start = 0; start < fit.size(); start += batch) {
            const std::size_t end = std::min(fit.size(), start + batch);
            rows.fill(ds, std::span<const Index>(fit).subspan(start, end - start));
            Tape tape;
            TapeScope scope(tape);
            Tensor loss = match_loss(probe.forward(rows.users, rows.items, features), rows.labels);
            tape.backward(loss);
            adam.step();
            total += loss.item() * static_cast<double>(end - start);
        }
        result.train_losses.push_back(total / static_cast<double>(fit.size()));
        result.epochs = epoch + 1;

        double monitored = result.train_losses.back();
        if (use_validation) {
            const auto [scores, labels] = score_records(probe, ds, holdout, features);
            monitored = logloss(scores, labels);
            result.validation_losses.push_back(monitored);
        }
        if (best - monitored > cfg.min_improvement) {
            best = monitored;
            stale = 0;
            result.best_epoch = epoch + 1;
            if (use_validation) {
                best_params.clear();
                for (const auto& p : params) best_params.push_back(p.value());
            }
        } else if (++stale >= cfg.patience) {
            break;
        }
    }
    if (!best_params.empty()) {
        for (std::size_t k = 0; k < params.size(); ++k) {
            Tensor p = params[k];
            p.mutable_value() = best_params[k];
        }
    }

    const auto [scores, labels] = score_records(probe, ds, test, features);
    result.auc = auc(scores, labels);
    result.logloss = logloss(scores, labels);
    return result;
}

// ---------------------------------------------------------------- metrics

double auc(std::span<const double> scores, std::span<const double> labels) {
    if (scores.size() != labels.size()) throw ShapeError("auc: scores and labels differ in length");
    std::vector<std::size_t> idx(scores.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    double pos = 0.0, neg = 0.0, rank_sum = 0.0;
    for (std::size_t i = 0; i < idx.size();) {
        std::size_t j = i;
        while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) ++j;
        const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1..j
        for (std::size_t k = i; k < j; ++k) {
            const double y = labels[idx[k]];
            if (y == 1.0) {
                pos += 1.0;
                rank_sum += avg_rank;
            } else if (y == 0.0) {
                neg += 1.0;
            } else {
                throw InvalidArgument("auc: labels must be 0 or 1");
            }
        }
        i = j;
    }
    if (pos == 0.0 || neg == 0.0) throw InvalidArgument("auc: needs at least one positive and one negative");
    return (rank_sum - pos * (pos + 1.0) / 2.0) / (pos * neg);
}

double logloss(std::span<const double> scores, std::span<const double> labels) {
    if (scores.size() != labels.size()) throw ShapeError("logloss: scores and labels differ in length");
    if (scores.empty()) throw InvalidArgument("logloss: empty input");
    double total = 0.0;
    for (std::size_t k = 0; k < scores.size(); ++k) {
        const double p = std::clamp(scores[k], kProbabilityClamp, 1.0 - kProbabilityClamp);
        if (labels[k] == 1.0) {
            total -= std::log(p);
        } else if (labels[k] == 0.0) {
            total -= std::log(1.0 - p);
        } else {
            throw InvalidArgument("logloss: labels must be 0 or 1");
        }
    }
    return total / static_cast<double>(scores.size());
}

RankMetrics rank_metrics(const std::vector<RankedList>& lists, const std::vector<Index>& ks) {
    if (lists.empty()) throw InvalidArgument("rank_metrics: no lists");
    RankMetrics m;
    m.ks = ks;
    m.ndcg.assign(ks.size(), 0.0);
    m.map.assign(ks.size(), 0.0);
    m.hitrate.assign(ks.size(), 0.0);
    for (const auto& list : lists) {
        const Index len = static_cast<Index>(list.size());
        const Index relevant = std::count(list.begin(), list.end(), 1);
        if (relevant == 0) throw InvalidArgument("rank_metrics: list without a relevant item");
        for (std::size_t q = 0; q < ks.size(); ++q) {
            const Index k = ks[q];
            if (k < 1) throw InvalidArgument("rank_metrics: K must be >= 1");
            if (k > len) {
                throw InvalidArgument("rank_metrics: K=" + std::to_string(k) + " exceeds list length " +
                                      std::to_string(len));
            }
            double dcg = 0.0, idcg = 0.0, precision_sum = 0.0;
            Index hits = 0;
            for (Index r = 0; r < k; ++r) {
                const double discount = 1.0 / std::log2(static_cast<double>(r) + 2.0);
                if (r < relevant) idcg += discount;
                if (list[r] == 1) {
                    ++hits;
                    dcg += discount;
                    precision_sum += static_cast<double>(hits) / static_cast<double>(r + 1);
                }
            }
            m.ndcg[q] += dcg / idcg;
            m.map[q] += precision_sum / static_cast<double>(std::min(relevant, k));
            m.hitrate[q] += hits > 0 ? 1.0 : 0.0;
        }
        const auto first = std::find(list.begin(), list.end(), 1);
        m.mrr += 1.0 / static_cast<double>(first - list.begin() + 1);
    }
    const double n = static_cast<double>(lists.size());
    for (std::size_t q = 0; q < ks.size(); ++q) {
        m.ndcg[q] /= n;
        m.map[q] /= n;
        m.hitrate[q] /= n;
    }
    m.mrr /= n;
    m.lists = static_cast<Index>(lists.size());
    return m;
}

std::vector<RankedList> cosine_ranked_lists(const InteractionDataset& ds, const Matrix& user_reps,
                                            const Matrix& item_reps) {
    if (user_reps.rows() != ds.num_users() || item_reps.rows() != ds.num_items() ||
        user_reps.cols() != item_reps.cols()) {
        throw ShapeError("cosine_ranked_lists: representation tables do not match the dataset");
    }
    std::vector<std::vector<Index>> positives(static_cast<std::size_t>(ds.num_users()));
    for (Index r : ds.records_for(true)) {
        const auto& rec = ds.records[r];
        if (rec.label == 1.0) positives[rec.user].push_back(rec.item);
    }
    Matrix items = item_reps;
    for (Index i = 0; i < items.rows(); ++i) {
        const double n = items.row(i).norm();
        if (n > 0.0) items.row(i) /= n;
    }
    std::vector<RankedList> lists;
    std::vector<Index> order(static_cast<std::size_t>(ds.num_items()));
    for (Index u = 0; u < ds.num_users(); ++u) {
        if (positives[u].empty()) continue;
        Eigen::VectorXd scores = items * user_reps.row(u).transpose();
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return scores(a) > scores(b); });
        std::vector<char> rel(static_cast<std::size_t>(ds.num_items()), 0);
        for (Index i : positives[u]) rel[i] = 1;
        RankedList list(order.size());
        for (std::size_t k = 0; k < order.size(); ++k) list[k] = rel[order[k]];
        lists.push_back(std::move(list));
    }
    return lists;
}

std::vector<StorageEntry> storage_report(Index num_users, Index num_items, const std::vector<Index>& dims) {
    if (num_users < 0 || num_items < 0 || num_users + num_items < 1) {
        throw InvalidArgument("storage_report: entity counts must be positive");
    }
    std::vector<StorageEntry> out;
    if (dims.empty()) return out;
    const Index smallest = *std::min_element(dims.begin(), dims.end());
    if (smallest < 1) throw InvalidArgument("storage_report: dims must be positive");
    const auto bytes_for = [&](Index d) {
        return static_cast<std::uint64_t>(num_users + num_items) * static_cast<std::uint64_t>(d) * 4u;
    };
    for (Index d : dims) {
        out.push_back(StorageEntry{d, bytes_for(d),
                                   static_cast<double>(bytes_for(d)) / static_cast<double>(bytes_for(smallest))});
    }
    return out;
}

json to_json(const RankMetrics& m) {
    json j{{"lists", m.lists}, {"mrr", m.mrr}};
    for (std::size_t q = 0; q < m.ks.size(); ++q) {
        const std::string k = std::to_string(m.ks[q]);
        j["ndcg@" + k] = m.ndcg[q];
        j["map@" + k] = m.map[q];
        j["hitrate@" + k] = m.hitrate[q];
    }
    return j;
}

json to_json(const std::vector<StorageEntry>& s) {
    json arr = json::array();
    for (const auto& e : s) arr.push_back({{"dim", e.dim}, {"bytes", e.bytes}, {"ratio", e.ratio}});
    return arr;
}

}  // namespace marc

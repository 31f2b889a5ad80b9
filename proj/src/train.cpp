#include "marc/train.hpp"

#include "marc/error.hpp"
#include "marc/numcore/optim.hpp"

#include <spdlog/spdlog.h>

namespace marc {

using nlohmann::json;

json to_json(const TrainLog& log) {
    json epochs = json::array();
    for (const auto& e : log.epochs) {
        epochs.push_back({{"epoch", e.epoch},
                          {"loss", e.loss},
                          {"match", e.match},
                          {"hsic", e.hsic},
                          {"steps", e.steps}});
    }
    return json{{"method", log.method_id}, {"seed", log.seed}, {"samples", log.samples}, {"epochs", epochs}};
}

namespace {

Matrix rows_of(const Matrix& table, const std::vector<Index>& rows) {
    Matrix out(static_cast<Index>(rows.size()), table.cols());
    for (std::size_t r = 0; r < rows.size(); ++r) out.row(static_cast<Index>(r)) = table.row(rows[r]);
    return out;
}

void fit_pca(MarcModel& model, const InteractionDataset& ds) {
    std::vector<Index> train_users;
    for (Index u = 0; u < ds.num_users(); ++u)
        if (!ds.test_user[static_cast<std::size_t>(u)]) train_users.push_back(u);
    const Matrix users = model.backbone.encode(Tensor(rows_of(ds.user_inputs(), train_users))).value();
    const Matrix items = model.backbone.encode(Tensor(ds.item_inputs())).value();
    Matrix both(users.rows() + items.rows(), users.cols());
    both << users, items;
    model.pca = pca_fit(both, model.config.d_c);
}

}  // namespace

MarcModel train_model(const RunConfig& cfg, const InteractionDataset& ds, TrainLog* log) {
    ds.validate();
    MarcModel model = MarcModel::create(cfg, ds.input_dim());
    if (log != nullptr) {
        log->method_id = cfg.method_id();
        log->seed = cfg.seed;
        log->epochs.clear();
    }
    if (cfg.method == Method::pca) {
        fit_pca(model, ds);
        model.freeze();
        return model;
    }

    const Rng root(cfg.seed);
    Rng sample_rng = root.split(streams::kSample);
    Rng order_rng = root.split(streams::kTrainOrder);
    std::vector<Index> pool = sample_without_replacement(ds.records_for(false), cfg.train_samples, sample_rng);
    if (log != nullptr) log->samples = static_cast<Index>(pool.size());

    const Matrix user_inputs = ds.user_inputs();
    const Matrix item_inputs = ds.item_inputs();
    Adam adam(model.trainable_parameters(), AdamConfig{cfg.lr});
    const auto batch = static_cast<std::size_t>(cfg.batch_size);

    std::vector<Index> users, items;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        order_rng.shuffle(std::span<Index>(pool));
        EpochLog entry;
        entry.epoch = epoch + 1;
        // A trailing batch smaller than 2 rows cannot form a kernel matrix.
        for (std::size_t start = 0; start + 2 <= pool.size(); start += batch) {
            const std::size_t end = std::min(pool.size(), start + batch);
            Batch b;
            users.clear();
            items.clear();
            for (std::size_t k = start; k < end; ++k) {
                const auto& rec = ds.records[pool[k]];
                users.push_back(rec.user);
                items.push_back(rec.item);
                b.labels.push_back(rec.label);
            }
            b.user_inputs = Tensor(rows_of(user_inputs, users));
            b.item_inputs = Tensor(rows_of(item_inputs, items));

            Tape tape;
            TapeScope scope(tape);
            LossParts parts = total_loss(b, model);
            if (!parts.defined) continue;
            tape.backward(parts.total);
            adam.step();
            entry.loss += parts.total.item();
            entry.match += parts.match;
            entry.hsic += parts.hsic;
            ++entry.steps;
        }
        if (entry.steps > 0) {
            const double n = static_cast<double>(entry.steps);
            entry.loss /= n;
            entry.match /= n;
            entry.hsic /= n;
        }
        spdlog::debug("{} epoch {} loss {:.6f} match {:.6f} hsic {:.6f}", cfg.method_id(), entry.epoch,
                      entry.loss, entry.match, entry.hsic);
        if (log != nullptr) log->epochs.push_back(entry);
    }
    model.freeze();
    return model;
}

LayerTables encode_entities(const MarcModel& model, const InteractionDataset& ds) {
    LayerTables t;
    for (const auto& layer : model.backbone.encode_all_layers(Tensor(ds.user_inputs()))) {
        t.users.push_back(layer.value());
    }
    for (const auto& layer : model.backbone.encode_all_layers(Tensor(ds.item_inputs()))) {
        t.items.push_back(layer.value());
    }
    return t;
}

std::pair<Matrix, Matrix> compressed_entities(const MarcModel& model, const LayerTables& layers) {
    return {model.compress_representation(Tensor(layers.users.back())).value(),
            model.compress_representation(Tensor(layers.items.back())).value()};
}

}  // namespace marc

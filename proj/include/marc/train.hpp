#pragma once

#include "marc/dataio.hpp"
#include "marc/model.hpp"

#include <json.hpp>

#include <string>
#include <vector>

namespace marc {

struct EpochLog {
    int epoch = 0;
    double loss = 0.0;
    double match = 0.0;
    double hsic = 0.0;
    Index steps = 0;
};

struct TrainLog {
    std::string method_id;
    std::uint64_t seed = 0;
    Index samples = 0;
    std::vector<EpochLog> epochs;
};

nlohmann::json to_json(const TrainLog& log);

/// Trains `cfg.method` on up to `cfg.train_samples` interactions of train
/// users and freezes the result. pca fits on the frozen backbone's outputs
/// for train users plus all items; ae trains only the encoder/decoder.
MarcModel train_model(const RunConfig& cfg, const InteractionDataset& ds, TrainLog* log = nullptr);

/// Backbone outputs for every user and item, one matrix per layer.
struct LayerTables {
    std::vector<Matrix> users;
    std::vector<Matrix> items;
};

LayerTables encode_entities(const MarcModel& model, const InteractionDataset& ds);

/// Final-layer tables passed through the model's compressor.
std::pair<Matrix, Matrix> compressed_entities(const MarcModel& model, const LayerTables& layers);

}  // namespace marc

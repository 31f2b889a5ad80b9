#pragma once

#include "marc/config.hpp"
#include "marc/dataio.hpp"
#include "marc/model.hpp"
#include "marc/train.hpp"

#include <json.hpp>

#include <string>
#include <vector>

namespace marc {

struct LayerEntry {
    Index layer = 0;
    double auc = 0.0;
    double logloss = 0.0;
    double proxy_loss = 0.0;
};

struct LayerProbeReport {
    std::string method_id;
    std::uint64_t seed = 0;
    Index d_c = 0;
    std::vector<LayerEntry> layers;  // one per backbone layer 0..L
    Index mra_peak_layer = 0;        // argmax auc, ties toward the deepest layer
    double final_layer_gap = 0.0;    // auc(final) - max over the other layers
};

/// Mean of method_loss over the train-user interactions evaluated on one
/// layer's representations, in chunks of the training batch size.
double layer_proxy_loss(const MarcModel& model, const InteractionDataset& ds, const Matrix& user_layer,
                        const Matrix& item_layer);

/// Trains a fresh probe on every layer's representations (same probe seed
/// for every layer) and evaluates the method's loss on each layer.
/// `jobs` bounds the worker threads; results do not depend on it.
LayerProbeReport layer_sweep(const MarcModel& model, const InteractionDataset& ds, const ProbeConfig& cfg,
                             int jobs = 1);

/// Fills mra_peak_layer and final_layer_gap from the entries.
void summarize_layers(LayerProbeReport& report);

struct MraRow {
    std::string method_id;
    std::uint64_t seed = 0;
    Index peak_layer = 0;
    double final_gap = 0.0;
    double best_auc = 0.0;
    double final_auc = 0.0;
};

std::vector<MraRow> mra_summary(const std::vector<LayerProbeReport>& reports);

nlohmann::json to_json(const LayerProbeReport& r);
LayerProbeReport layer_report_from_json(const nlohmann::json& j);
/// `layer,auc,logloss,proxy_loss` rows.
std::string layer_curve_csv(const LayerProbeReport& r);

}  // namespace marc

#pragma once

#include "marc/probe.hpp"

#include <json.hpp>

#include <string>
#include <vector>

namespace marc {

inline constexpr int kReportSchemaVersion = 1;

/// Adds "schema_version" and "kind" to a report body.
nlohmann::json envelope(const std::string& kind, nlohmann::json body);

/// Consolidated view over eval, rank, layer-probe and training reports.
struct ReportBundle {
    nlohmann::json summary;
    std::string metrics_csv;   // method,d_c,seed,representation,auc,logloss
    std::string rank_csv;      // method,d_c,seed,representation,metric,value
    std::string curves_csv;    // method,d_c,seed,layer,auc,logloss,proxy_loss
    std::string mra_csv;       // method,d_c,seed,peak_layer,final_gap,best_auc,final_auc
    std::string mra_votes_csv; // method,d_c,seeds,peak_layer_mode,median_final_gap,final_peak_seeds
};

/// Merges report files keyed by (method, d_c, seed). Throws InvalidArgument
/// when inputs disagree on schema_version or carry an unknown kind.
ReportBundle merge_reports(const std::vector<nlohmann::json>& inputs);

}  // namespace marc

#include "marc/report.hpp"

#include "marc/error.hpp"

#include <algorithm>
#include <map>
#include <sstream>
#include <tuple>

namespace marc {

using nlohmann::json;

json envelope(const std::string& kind, json body) {
    json out{{"schema_version", kReportSchemaVersion}, {"kind", kind}};
    for (auto& [k, v] : body.items()) out[k] = v;
    return out;
}

namespace {

using Key = std::tuple<std::string, Index, std::uint64_t>;
using Entries = std::vector<std::pair<Key, json>>;

Key key_of(const json& j) {
    return {j.at("method").get<std::string>(), j.at("d_c").get<Index>(), j.at("seed").get<std::uint64_t>()};
}

std::string num(double v) {
    std::ostringstream s;
    s.precision(17);
    s << v;
    return s.str();
}

std::string key_cells(const Key& k) {
    return std::get<0>(k) + "," + std::to_string(std::get<1>(k)) + "," + std::to_string(std::get<2>(k));
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

ReportBundle build_bundle(const Entries& evals, const Entries& ranks, const Entries& probes,
                          const Entries& logs) {
    ReportBundle out;
    out.metrics_csv = "method,d_c,seed,representation,auc,logloss\n";
    for (const auto& [k, j] : evals) {
        out.metrics_csv += key_cells(k) + "," + j.at("representation").get<std::string>() + "," +
                           num(j.at("auc").get<double>()) + "," + num(j.at("logloss").get<double>()) + "\n";
    }
    out.rank_csv = "method,d_c,seed,representation,metric,value\n";
    for (const auto& [k, j] : ranks) {
        for (const auto& [metric, value] : j.at("metrics").items()) {
            if (!value.is_number_float()) continue;
            out.rank_csv += key_cells(k) + "," + j.at("representation").get<std::string>() + "," + metric + "," +
                            num(value.get<double>()) + "\n";
        }
    }

    out.curves_csv = "method,d_c,seed,layer,auc,logloss,proxy_loss\n";
    out.mra_csv = "method,d_c,seed,peak_layer,final_gap,best_auc,final_auc\n";
    std::vector<LayerProbeReport> reports;
    for (const auto& [k, j] : probes) {
        LayerProbeReport r = layer_report_from_json(j);
        for (const auto& e : r.layers) {
            out.curves_csv += key_cells(k) + "," + std::to_string(e.layer) + "," + num(e.auc) + "," +
                              num(e.logloss) + "," + num(e.proxy_loss) + "\n";
        }
        reports.push_back(std::move(r));
    }
    const auto rows = mra_summary(reports);
    json mra_rows = json::array();
    std::map<std::pair<std::string, Index>, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& r = rows[i];
        out.mra_csv += r.method_id + "," + std::to_string(reports[i].d_c) + "," + std::to_string(r.seed) + "," +
                       std::to_string(r.peak_layer) + "," + num(r.final_gap) + "," + num(r.best_auc) + "," +
                       num(r.final_auc) + "\n";
        mra_rows.push_back({{"method", r.method_id},
                            {"d_c", reports[i].d_c},
                            {"seed", r.seed},
                            {"peak_layer", r.peak_layer},
                            {"final_gap", r.final_gap},
                            {"best_auc", r.best_auc},
                            {"final_auc", r.final_auc}});
        groups[{r.method_id, reports[i].d_c}].push_back(i);
    }

    out.mra_votes_csv = "method,d_c,seeds,peak_layer_mode,median_final_gap,final_peak_seeds\n";
    json votes = json::array();
    for (const auto& [g, members] : groups) {
        std::map<Index, int> counts;
        std::vector<double> gaps;
        int final_peaks = 0;
        for (std::size_t i : members) {
            ++counts[rows[i].peak_layer];
            gaps.push_back(rows[i].final_gap);
            if (rows[i].peak_layer == reports[i].layers.back().layer) ++final_peaks;
        }
        // Mode with ties toward the deepest layer, matching the peak rule.
        Index mode = counts.begin()->first;
        for (const auto& [layer, c] : counts)
            if (c >= counts[mode]) mode = layer;
        const double med = median(gaps);
        out.mra_votes_csv += g.first + "," + std::to_string(g.second) + "," + std::to_string(members.size()) + "," +
                             std::to_string(mode) + "," + num(med) + "," + std::to_string(final_peaks) + "\n";
        votes.push_back({{"method", g.first},
                         {"d_c", g.second},
                         {"seeds", members.size()},
                         {"peak_layer_mode", mode},
                         {"median_final_gap", med},
                         {"final_peak_seeds", final_peaks}});
    }

    auto bodies = [](const std::vector<std::pair<Key, json>>& v) {
        json arr = json::array();
        for (const auto& [k, j] : v) arr.push_back(j);
        return arr;
    };
    out.summary = envelope("summary", json{{"evals", bodies(evals)},
                                           {"rankings", bodies(ranks)},
                                           {"layer_probes", bodies(probes)},
                                           {"training", bodies(logs)},
                                           {"mra_rows", mra_rows},
                                           {"mra_votes", votes}});
    return out;
}

}  // namespace

ReportBundle merge_reports(const std::vector<json>& inputs) {
    if (inputs.empty()) throw InvalidArgument("report: no inputs");
    int version = -1;
    Entries evals, ranks, probes, logs;
    for (const auto& j : inputs) {
        if (!j.is_object() || !j.contains("schema_version") || !j.contains("kind")) {
            throw InvalidArgument("report: input lacks schema_version/kind");
        }
        const int v = j.at("schema_version").get<int>();
        if (version == -1) version = v;
        if (v != version) {
            throw InvalidArgument("report: conflicting schema versions " + std::to_string(version) + " and " +
                                  std::to_string(v));
        }
        if (v != kReportSchemaVersion) {
            throw InvalidArgument("report: unsupported schema_version " + std::to_string(v));
        }
        const auto kind = j.at("kind").get<std::string>();
        try {
            if (kind == "eval_ctr") {
                evals.emplace_back(key_of(j), j);
            } else if (kind == "eval_rank") {
                ranks.emplace_back(key_of(j), j);
            } else if (kind == "layer_probe") {
                probes.emplace_back(key_of(j), j);
            } else if (kind == "train_log") {
                logs.emplace_back(key_of(j), j);
            } else {
                throw InvalidArgument("report: unknown kind '" + kind + "'");
            }
        } catch (const json::exception& e) {
            throw InvalidArgument("report: malformed " + kind + " input: " + e.what());
        }
    }
    auto by_key = [](const auto& a, const auto& b) { return a.first < b.first; };
    std::stable_sort(evals.begin(), evals.end(), by_key);
    std::stable_sort(ranks.begin(), ranks.end(), by_key);
    std::stable_sort(probes.begin(), probes.end(), by_key);
    std::stable_sort(logs.begin(), logs.end(), by_key);

    try {
        return build_bundle(evals, ranks, probes, logs);
    } catch (const json::exception& e) {
        throw InvalidArgument(std::string("report: malformed input: ") + e.what());
    }
}

}  // namespace marc

#include "marc/probe.hpp"

#include "marc/downstream.hpp"
#include "marc/error.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <exception>
#include <sstream>
#include <thread>

namespace marc {

using nlohmann::json;

double layer_proxy_loss(const MarcModel& model, const InteractionDataset& ds, const Matrix& user_layer,
                        const Matrix& item_layer) {
    const auto records = ds.records_for(false);
    const auto batch = static_cast<std::size_t>(model.config.batch_size);
    double total = 0.0;
    Index chunks = 0;
    std::vector<double> labels;
    for (std::size_t start = 0; start + 2 <= records.size(); start += batch) {
        const std::size_t end = std::min(records.size(), start + batch);
        const auto n = static_cast<Index>(end - start);
        Matrix u(n, user_layer.cols()), i(n, item_layer.cols());
        labels.clear();
        for (std::size_t k = start; k < end; ++k) {
            const auto& rec = ds.records[records[k]];
            u.row(static_cast<Index>(k - start)) = user_layer.row(rec.user);
            i.row(static_cast<Index>(k - start)) = item_layer.row(rec.item);
            labels.push_back(rec.label);
        }
        const LossParts parts = method_loss(model, Tensor(std::move(u)), Tensor(std::move(i)), labels);
        if (!parts.defined) continue;
        total += parts.total.item();
        ++chunks;
    }
    if (chunks == 0) throw InvalidArgument("layer_proxy_loss: no usable training batches");
    return total / static_cast<double>(chunks);
}

void summarize_layers(LayerProbeReport& report) {
    if (report.layers.empty()) throw InvalidArgument("layer report has no entries");
    Index peak = 0;
    for (std::size_t l = 0; l < report.layers.size(); ++l) {
        if (report.layers[l].auc >= report.layers[static_cast<std::size_t>(peak)].auc) peak = static_cast<Index>(l);
    }
    report.mra_peak_layer = report.layers[static_cast<std::size_t>(peak)].layer;
    if (report.layers.size() < 2) {
        report.final_layer_gap = 0.0;
        return;
    }
    double best_other = report.layers.front().auc;
    for (std::size_t l = 0; l + 1 < report.layers.size(); ++l) best_other = std::max(best_other, report.layers[l].auc);
    report.final_layer_gap = report.layers.back().auc - best_other;
}

LayerProbeReport layer_sweep(const MarcModel& model, const InteractionDataset& ds, const ProbeConfig& cfg,
                             int jobs) {
    if (!model.trained) throw InvalidArgument("layer_sweep: model is not trained");
    const LayerTables tables = encode_entities(model, ds);
    const auto layers = tables.users.size();

    LayerProbeReport report;
    report.method_id = model.config.method_id();
    report.seed = model.config.seed;
    report.d_c = model.compressed_dim();
    report.layers.resize(layers);

    std::vector<std::exception_ptr> errors(layers);
    auto run = [&](std::size_t l) {
        try {
            LayerEntry& e = report.layers[l];
            e.layer = static_cast<Index>(l);
            const ProbeResult r = train_ctr_probe(ds, tables.users[l], tables.items[l], cfg);
            e.auc = r.auc;
            e.logloss = r.logloss;
            e.proxy_loss = layer_proxy_loss(model, ds, tables.users[l], tables.items[l]);
            spdlog::info("{} seed {} layer {} auc {:.5f} logloss {:.5f} proxy {:.5f} ({} epochs)",
                         report.method_id, report.seed, l, e.auc, e.logloss, e.proxy_loss, r.epochs);
        } catch (...) {
            errors[l] = std::current_exception();
        }
    };
    const auto workers = static_cast<std::size_t>(std::clamp(jobs, 1, static_cast<int>(layers)));
    if (workers == 1) {
        for (std::size_t l = 0; l < layers; ++l) run(l);
    } else {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&, w] {
                for (std::size_t l = w; l < layers; l += workers) run(l);
            });
        }
        for (auto& t : pool) t.join();
    }
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);
    summarize_layers(report);
    return report;
}

std::vector<MraRow> mra_summary(const std::vector<LayerProbeReport>& reports) {
    std::vector<MraRow> rows;
    for (const auto& r : reports) {
        if (r.layers.empty()) throw InvalidArgument("mra_summary: report without layers");
        MraRow row;
        row.method_id = r.method_id;
        row.seed = r.seed;
        row.peak_layer = r.mra_peak_layer;
        row.final_gap = r.final_layer_gap;
        row.final_auc = r.layers.back().auc;
        row.best_auc = row.final_auc;
        for (const auto& e : r.layers) row.best_auc = std::max(row.best_auc, e.auc);
        rows.push_back(row);
    }
    return rows;
}

json to_json(const LayerProbeReport& r) {
    json layers = json::array();
    for (const auto& e : r.layers) {
        layers.push_back({{"layer", e.layer}, {"auc", e.auc}, {"logloss", e.logloss}, {"proxy_loss", e.proxy_loss}});
    }
    return json{{"method", r.method_id},     {"seed", r.seed},
                {"d_c", r.d_c},              {"layers", layers},
                {"mra_peak_layer", r.mra_peak_layer}, {"final_layer_gap", r.final_layer_gap}};
}

LayerProbeReport layer_report_from_json(const json& j) {
    LayerProbeReport r;
    try {
        r.method_id = j.at("method").get<std::string>();
        r.seed = j.at("seed").get<std::uint64_t>();
        r.d_c = j.at("d_c").get<Index>();
        for (const auto& e : j.at("layers")) {
            r.layers.push_back(LayerEntry{e.at("layer").get<Index>(), e.at("auc").get<double>(),
                                          e.at("logloss").get<double>(), e.at("proxy_loss").get<double>()});
        }
    } catch (const json::exception& e) {
        throw InvalidArgument(std::string("layer report: ") + e.what());
    }
    summarize_layers(r);
    return r;
}

std::string layer_curve_csv(const LayerProbeReport& r) {
    std::ostringstream out;
    out.precision(17);
    out << "layer,auc,logloss,proxy_loss\n";
    for (const auto& e : r.layers) out << e.layer << ',' << e.auc << ',' << e.logloss << ',' << e.proxy_loss << '\n';
    return out.str();
}

}  // namespace marc

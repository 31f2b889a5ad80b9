#include "marc/cli.hpp"

#include "marc/dataio.hpp"
#include "marc/downstream.hpp"
#include "marc/error.hpp"
#include "marc/model_io.hpp"
#include "marc/probe.hpp"
#include "marc/report.hpp"
#include "marc/train.hpp"

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <unordered_map>

namespace marc {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

void configure_logging() {
    auto logger = spdlog::stderr_color_mt("marc");
    spdlog::set_default_logger(logger);
    spdlog::set_level(spdlog::level::info);
    if (const char* env = std::getenv("MARC_LOG")) {
        const std::string level = env;
        if (level == "error") {
            spdlog::set_level(spdlog::level::err);
        } else if (level == "info") {
            spdlog::set_level(spdlog::level::info);
        } else if (level == "debug") {
            spdlog::set_level(spdlog::level::debug);
        } else if (!level.empty()) {
            throw InvalidArgument("MARC_LOG: expected error, info or debug, got '" + level + "'");
        }
    }
}

json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw InvalidArgument(path.string() + ": invalid JSON");
    }
}

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    out << text;
    if (!out) throw Error("write failed for " + path.string());
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

fs::path with_suffix(const fs::path& p, const std::string& suffix) { return fs::path(p.string() + suffix); }

// ---------------------------------------------------------------- gen-data

struct GenArgs {
    std::string out;
    SyntheticConfig cfg;
};

void run_gen(const GenArgs& a) {
    const InteractionDataset ds = gen_synthetic(a.cfg);
    save_dataset(ds, a.out);
    spdlog::info("wrote {} users, {} items, {} interactions to {}", ds.num_users(), ds.num_items(),
                 ds.records.size(), a.out);
}

// ---------------------------------------------------------------- train

struct TrainArgs {
    std::string config;
    std::string data;
    std::string out;
    std::string log;
    json overrides = json::object();
};

RunConfig resolve_config(const std::string& file, const json& overrides) {
    json j = file.empty() ? json::object() : read_json(file);
    if (!j.is_object()) throw InvalidArgument("config: expected a JSON object");
    for (const auto& [k, v] : overrides.items()) {
        if (k == "probe") {
            if (!j.contains("probe")) j["probe"] = json::object();
            for (const auto& [pk, pv] : v.items()) j["probe"][pk] = pv;
        } else {
            j[k] = v;
        }
    }
    return run_config_from_json(j);
}

void run_train(const TrainArgs& a) {
    const RunConfig cfg = resolve_config(a.config, a.overrides);
    const InteractionDataset ds = load_dataset(a.data, cfg.seed);
    TrainLog log;
    const MarcModel model = train_model(cfg, ds, &log);
    save_model(model, a.out);
    json body = to_json(log);
    body["d_c"] = model.compressed_dim();
    body["config"] = to_json(cfg);
    write_json(a.log.empty() ? with_suffix(a.out, ".log.json") : fs::path(a.log), envelope("train_log", body));
    spdlog::info("trained {} (d_o={}, d_c={}) -> {}", cfg.method_id(), model.original_dim(),
                 model.compressed_dim(), a.out);
}

// ---------------------------------------------------------------- compress

struct CompressArgs {
    std::string model;
    std::string embeddings;
    std::string out;
};

void run_compress(const CompressArgs& a) {
    const MarcModel model = load_model(a.model);
    const EmbeddingTable in = load_embeddings(a.embeddings);
    if (static_cast<Index>(in.dim) != model.original_dim()) {
        throw InvalidArgument("compress: embeddings have dim " + std::to_string(in.dim) + ", model expects " +
                              std::to_string(model.original_dim()));
    }
    if (!model.has_compressor()) throw InvalidArgument("compress: method " + model.config.method_id() + " has no compressor");
    Matrix c = in.count == 0 ? Matrix(0, model.compressed_dim())
                             : model.compress_representation(Tensor(in.to_matrix())).value();
    save_embeddings(EmbeddingTable::from_matrix(c, in.ids), a.out);
    spdlog::info("compressed {} rows from {} to {} dims", in.count, in.dim, c.cols());
}

// ---------------------------------------------------------------- representations

struct Representations {
    Matrix users;
    Matrix items;
    std::string name;
};

Matrix align_to_ids(const EmbeddingTable& t, const std::vector<std::string>& ids, const std::string& what) {
    if (t.ids.empty()) {
        if (t.count != ids.size()) {
            throw InvalidArgument(what + ": " + std::to_string(t.count) + " rows for " + std::to_string(ids.size()) +
                                  " entities and no id sidecar");
        }
        return t.to_matrix();
    }
    std::unordered_map<std::string, Index> row_of;
    for (std::size_t r = 0; r < t.ids.size(); ++r) row_of.emplace(t.ids[r], static_cast<Index>(r));
    const Matrix all = t.to_matrix();
    Matrix out(static_cast<Index>(ids.size()), all.cols());
    std::string missing;
    std::size_t n_missing = 0;
    for (std::size_t k = 0; k < ids.size(); ++k) {
        auto it = row_of.find(ids[k]);
        if (it == row_of.end()) {
            if (n_missing++ < 10) missing += (missing.empty() ? "" : ",") + ids[k];
            continue;
        }
        out.row(static_cast<Index>(k)) = all.row(it->second);
    }
    if (n_missing > 0) {
        throw InvalidArgument(what + ": missing representation ids " + missing +
                              (n_missing > 10 ? " (+" + std::to_string(n_missing - 10) + " more)" : ""));
    }
    return out;
}

Representations select_representations(const MarcModel* model, const InteractionDataset& ds,
                                       const std::string& which, const std::string& user_emb,
                                       const std::string& item_emb) {
    if (!user_emb.empty() || !item_emb.empty()) {
        if (user_emb.empty() || item_emb.empty()) {
            throw InvalidArgument("--user-emb and --item-emb must be given together");
        }
        return {align_to_ids(load_embeddings(user_emb), ds.user_ids, "user embeddings"),
                align_to_ids(load_embeddings(item_emb), ds.item_ids, "item embeddings"), "external"};
    }
    if (model == nullptr) throw InvalidArgument("either --model or --user-emb/--item-emb is required");
    const LayerTables tables = encode_entities(*model, ds);
    std::string name = which;
    if (name.empty()) name = model->has_compressor() ? "compressed" : "original";
    if (name == "compressed") {
        auto [u, i] = compressed_entities(*model, tables);
        return {std::move(u), std::move(i), name};
    }
    if (name == "original") return {tables.users.back(), tables.items.back(), name};
    if (name.rfind("layer:", 0) == 0) {
        const Index l = std::stol(name.substr(6));
        if (l < 0 || l >= static_cast<Index>(tables.users.size())) {
            throw InvalidArgument("--rep: layer " + std::to_string(l) + " out of range 0.." +
                                  std::to_string(tables.users.size() - 1));
        }
        return {tables.users[l], tables.items[l], name};
    }
    throw InvalidArgument("--rep: expected compressed, original or layer:N, got '" + name + "'");
}

// ---------------------------------------------------------------- probe / eval

struct EvalArgs {
    std::string model;
    std::string data;
    std::string out;
    std::string curve;
    std::string rep;
    std::string user_emb;
    std::string item_emb;
    std::string probe_config;
    std::optional<std::uint64_t> probe_seed;
    std::optional<Index> experts;
    std::vector<Index> ks{1, 5, 10, 20};
    std::vector<Index> storage_dims;
    std::uint64_t split_seed = 0;
    int jobs = 1;
};

ProbeConfig resolve_probe(const ProbeConfig& base, const EvalArgs& a) {
    ProbeConfig p = a.probe_config.empty() ? base : probe_config_from_json(read_json(a.probe_config), base);
    if (a.probe_seed) p.seed = *a.probe_seed;
    if (a.experts) p.experts = *a.experts;
    p.validate();
    return p;
}

void run_probe_layers(const EvalArgs& a) {
    const MarcModel model = load_model(a.model);
    const InteractionDataset ds = load_dataset(a.data, model.config.seed);
    const ProbeConfig probe = resolve_probe(model.config.probe, a);
    const LayerProbeReport report = layer_sweep(model, ds, probe, a.jobs);
    json body = to_json(report);
    body["probe"] = to_json(probe);
    write_json(a.out, envelope("layer_probe", body));
    const fs::path curve = a.curve.empty() ? fs::path(a.out).replace_extension(".csv") : fs::path(a.curve);
    write_text(curve, layer_curve_csv(report));
    spdlog::info("{}: peak layer {}, final-layer gap {:.5f}", report.method_id, report.mra_peak_layer,
                 report.final_layer_gap);
}

struct LoadedInputs {
    std::optional<MarcModel> model;
    InteractionDataset ds;
    Representations reps;
};

LoadedInputs load_inputs(const EvalArgs& a) {
    LoadedInputs in;
    if (!a.model.empty()) in.model = load_model(a.model);
    const std::uint64_t split_seed = in.model ? in.model->config.seed : a.split_seed;
    in.ds = load_dataset(a.data, split_seed);
    in.reps = select_representations(in.model ? &*in.model : nullptr, in.ds, a.rep, a.user_emb, a.item_emb);
    return in;
}

json identity_fields(const LoadedInputs& in) {
    if (in.model) {
        return json{{"method", in.model->config.method_id()},
                    {"d_c", in.model->compressed_dim()},
                    {"d_o", in.model->original_dim()},
                    {"seed", in.model->config.seed}};
    }
    return json{{"method", "external"}, {"d_c", in.reps.users.cols()}, {"d_o", in.reps.users.cols()}, {"seed", 0}};
}

void run_eval_ctr(const EvalArgs& a) {
    const LoadedInputs in = load_inputs(a);
    const ProbeConfig probe = resolve_probe(in.model ? in.model->config.probe : ProbeConfig{}, a);
    const ProbeResult r = train_ctr_probe(in.ds, in.reps.users, in.reps.items, probe);
    json body = identity_fields(in);
    std::vector<Index> dims{in.reps.users.cols()};
    if (in.model) dims.push_back(in.model->original_dim());
    dims.insert(dims.end(), a.storage_dims.begin(), a.storage_dims.end());
    std::sort(dims.begin(), dims.end());
    dims.erase(std::unique(dims.begin(), dims.end()), dims.end());
    body["representation"] = in.reps.name;
    body["dim"] = in.reps.users.cols();
    body["auc"] = r.auc;
    body["logloss"] = r.logloss;
    body["probe_epochs"] = r.epochs;
    body["probe_best_epoch"] = r.best_epoch;
    body["storage"] = to_json(storage_report(in.ds.num_users(), in.ds.num_items(), dims));
    body["probe"] = to_json(probe);
    write_json(a.out, envelope("eval_ctr", body));
    spdlog::info("{} [{}]: auc {:.5f} logloss {:.5f}", body["method"].get<std::string>(), in.reps.name, r.auc,
                 r.logloss);
}

void run_eval_rank(const EvalArgs& a) {
    const LoadedInputs in = load_inputs(a);
    const auto lists = cosine_ranked_lists(in.ds, in.reps.users, in.reps.items);
    if (lists.empty()) throw InvalidArgument("eval-rank: no test user has a positive interaction");
    const RankMetrics m = rank_metrics(lists, a.ks);
    json body = identity_fields(in);
    body["representation"] = in.reps.name;
    body["metrics"] = to_json(m);
    write_json(a.out, envelope("eval_rank", body));
    spdlog::info("ranked {} test users, mrr {:.5f}", m.lists, m.mrr);
}

// ---------------------------------------------------------------- report

struct ReportArgs {
    std::vector<std::string> inputs;
    std::string out_dir;
};

void run_report(const ReportArgs& a) {
    std::vector<json> inputs;
    for (const auto& p : a.inputs) inputs.push_back(read_json(p));
    const ReportBundle b = merge_reports(inputs);
    const fs::path dir(a.out_dir);
    fs::create_directories(dir);
    write_json(dir / "summary.json", b.summary);
    write_text(dir / "metrics.csv", b.metrics_csv);
    write_text(dir / "rank_metrics.csv", b.rank_csv);
    write_text(dir / "layer_curves.csv", b.curves_csv);
    write_text(dir / "mra_rows.csv", b.mra_csv);
    write_text(dir / "mra_votes.csv", b.mra_votes_csv);
    spdlog::info("merged {} reports into {}", inputs.size(), a.out_dir);
}

/// Flags that override config keys; applied after parsing, only when given.
class Overrides {
public:
    template <typename T>
    void add(CLI::App* app, const std::string& name, const std::string& key, const std::string& help, T* storage) {
        CLI::Option* opt = app->add_option(name, *storage, help);
        entries_.push_back({opt, [key, storage](json& j) { j[key] = *storage; }});
    }
    void add_flag(CLI::App* app, const std::string& name, const std::string& key, const std::string& help) {
        CLI::Option* opt = app->add_flag(name, help);
        entries_.push_back({opt, [key](json& j) { j[key] = true; }});
    }
    void apply(json& j) const {
        for (const auto& [opt, set] : entries_)
            if (opt->count() > 0) set(j);
    }

private:
    std::vector<std::pair<CLI::Option*, std::function<void(json&)>>> entries_;
};

}  // namespace

int run_cli(int argc, const char* const* argv) {
    CLI::App app{"marc: representation training, compression and layer probes"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "Show help for every subcommand");

    GenArgs gen;
    auto* gen_cmd = app.add_subcommand("gen-data", "Generate a synthetic recommendation dataset");
    gen_cmd->add_option("--out", gen.out, "Output directory")->required();
    gen_cmd->add_option("--users", gen.cfg.num_users, "Number of users")->capture_default_str();
    gen_cmd->add_option("--items", gen.cfg.num_items, "Number of items")->capture_default_str();
    gen_cmd->add_option("--interactions", gen.cfg.num_interactions, "Labeled (user, item) pairs")
        ->capture_default_str();
    gen_cmd->add_option("--latent-dim", gen.cfg.latent_dim, "Latent dimension k")->capture_default_str();
    gen_cmd->add_option("--item-dim", gen.cfg.observable_dim, "Observable item vector width")
        ->capture_default_str();
    gen_cmd->add_option("--user-dim", gen.cfg.user_feature_dim, "User feature width")->capture_default_str();
    gen_cmd->add_option("--temperature", gen.cfg.temperature, "Label temperature tau")->capture_default_str();
    gen_cmd->add_option("--user-noise", gen.cfg.user_feature_noise, "Noise added to user latents before expansion")
        ->capture_default_str();
    gen_cmd->add_option("--history-cap", gen.cfg.history_cap, "Maximum history length")->capture_default_str();
    gen_cmd->add_option("--seed", gen.cfg.seed, "Generator seed")->capture_default_str();

    TrainArgs train;
    RunConfig tf;  // flag storage; only flags actually given reach the config
    std::string method, proxy, backbone, sigma_policy;
    Index experts = 0;
    auto* train_cmd = app.add_subcommand("train", "Train a method and write a model file plus a training log");
    train_cmd->add_option("--config", train.config, "JSON config file (flags override its values)");
    train_cmd->add_option("--data", train.data, "Dataset directory")->required();
    train_cmd->add_option("--out", train.out, "Output model file")->required();
    train_cmd->add_option("--log", train.log, "Training log JSON (default: <out>.log.json)");
    Overrides ov;
    ov.add(train_cmd, "--method", "method", "marc, cs, cl, mrl, ae or pca", &method);
    ov.add(train_cmd, "--d-c", "d_c", "Compressed dimension", &tf.d_c);
    ov.add(train_cmd, "--alpha", "alpha", "HSIC weight", &tf.alpha);
    ov.add(train_cmd, "--sigma-policy", "sigma_policy", "Kernel bandwidth policy: median or fixed", &sigma_policy);
    ov.add(train_cmd, "--sigma", "sigma", "Kernel bandwidth for the fixed policy", &tf.sigma);
    ov.add(train_cmd, "--proxy", "proxy", "Matching proxy override: none or cosine", &proxy);
    ov.add(train_cmd, "--backbone", "backbone", "trainable or frozen-identity", &backbone);
    ov.add(train_cmd, "--layers", "num_layers", "Residual blocks L", &tf.num_layers);
    ov.add(train_cmd, "--hidden", "hidden_dim", "Backbone width d_h (= d_o)", &tf.hidden_dim);
    ov.add(train_cmd, "--batch-size", "batch_size", "Training batch size", &tf.batch_size);
    ov.add(train_cmd, "--lr", "lr", "Adam learning rate", &tf.lr);
    ov.add(train_cmd, "--epochs", "epochs", "Training epochs", &tf.epochs);
    ov.add(train_cmd, "--train-samples", "train_samples", "Interactions sampled for training", &tf.train_samples);
    ov.add(train_cmd, "--seed", "seed", "Run seed", &tf.seed);
    ov.add_flag(train_cmd, "--no-hsic", "no_hsic", "Drop the HSIC term");
    ov.add_flag(train_cmd, "--no-ei", "no_ei", "Drop the explicit interaction features");
    ov.add_flag(train_cmd, "--no-mn", "no_mn", "Replace the matching network by cosine matching");
    auto* experts_opt = train_cmd->add_option("--experts", experts, "Probe MoE expert count stored with the model");

    CompressArgs comp;
    auto* comp_cmd = app.add_subcommand("compress", "Compress an embedding file with a trained model");
    comp_cmd->add_option("--model", comp.model, "Model file")->required();
    comp_cmd->add_option("--embeddings", comp.embeddings, "Input embeddings (width d_o)")->required();
    comp_cmd->add_option("--out", comp.out, "Output embeddings (width d_c)")->required();

    auto add_eval_common = [](CLI::App* cmd, EvalArgs& a, bool model_required) {
        auto* m = cmd->add_option("--model", a.model, "Model file");
        if (model_required) m->required();
        cmd->add_option("--data", a.data, "Dataset directory")->required();
        cmd->add_option("--out", a.out, "Output report JSON")->required();
        cmd->add_option("--probe-config", a.probe_config, "JSON file with probe settings");
    };
    auto add_rep = [](CLI::App* cmd, EvalArgs& a) {
        cmd->add_option("--rep", a.rep, "Representation: compressed, original or layer:N");
        cmd->add_option("--user-emb", a.user_emb, "External user embeddings (instead of --model)");
        cmd->add_option("--item-emb", a.item_emb, "External item embeddings (instead of --model)");
        cmd->add_option("--split-seed", a.split_seed, "Split seed when the dataset has no split.csv and no model")
            ->capture_default_str();
    };

    EvalArgs probe;
    auto* probe_cmd = app.add_subcommand("probe-layers", "Train a CTR probe on every backbone layer");
    add_eval_common(probe_cmd, probe, true);
    probe_cmd->add_option("--curve", probe.curve, "Curve CSV (default: <out> with .csv)");
    probe_cmd->add_option("--jobs", probe.jobs, "Worker threads for per-layer probes")->capture_default_str();
    probe_cmd->add_option("--probe-seed", probe.probe_seed, "Probe seed (default: from the model config)");
    probe_cmd->add_option("--experts", probe.experts, "MoE expert count");

    EvalArgs ctr;
    auto* ctr_cmd = app.add_subcommand("eval-ctr", "Train a CTR probe on one representation and report AUC/Logloss");
    add_eval_common(ctr_cmd, ctr, false);
    add_rep(ctr_cmd, ctr);
    ctr_cmd->add_option("--probe-seed", ctr.probe_seed, "Probe seed");
    ctr_cmd->add_option("--experts", ctr.experts, "MoE expert count");
    ctr_cmd->add_option("--storage-dims", ctr.storage_dims, "Extra dims for the storage table")->delimiter(',');

    EvalArgs rank;
    auto* rank_cmd = app.add_subcommand("eval-rank", "Rank all items per test user by cosine similarity");
    rank_cmd->add_option("--model", rank.model, "Model file");
    rank_cmd->add_option("--data", rank.data, "Dataset directory")->required();
    rank_cmd->add_option("--out", rank.out, "Output report JSON")->required();
    add_rep(rank_cmd, rank);
    rank_cmd->add_option("--ks", rank.ks, "Cutoffs K")->delimiter(',')->capture_default_str();

    ReportArgs rep;
    auto* rep_cmd = app.add_subcommand("report", "Merge report files into tables and curves");
    rep_cmd->add_option("--inputs", rep.inputs, "Report JSON files")->required()->expected(1, -1);
    rep_cmd->add_option("--out-dir", rep.out_dir, "Output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        const CLI::App* sub = nullptr;
        for (const auto* s : app.get_subcommands()) sub = s;
        std::cerr << (sub != nullptr ? sub->help() : app.help());
        return e.get_exit_code() == 0 ? 2 : e.get_exit_code();
    }

    try {
        configure_logging();
        ov.apply(train.overrides);
        if (experts_opt->count() > 0) train.overrides["probe"] = json{{"experts", experts}};
        if (*gen_cmd) run_gen(gen);
        if (*train_cmd) run_train(train);
        if (*comp_cmd) run_compress(comp);
        if (*probe_cmd) run_probe_layers(probe);
        if (*ctr_cmd) run_eval_ctr(ctr);
        if (*rank_cmd) run_eval_rank(rank);
        if (*rep_cmd) run_report(rep);
    } catch (const std::exception& e) {
        std::string msg = e.what();
        std::replace(msg.begin(), msg.end(), '\n', ' ');
        std::cerr << "error: " << msg << "\n";
        spdlog::drop("marc");
        return 1;
    }
    spdlog::drop("marc");
    return 0;
}

}  // namespace marc

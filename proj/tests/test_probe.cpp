#include "doctest.h"
#include "test_util.hpp"

#include "marc/dataio.hpp"
#include "marc/error.hpp"
#include "marc/model_io.hpp"
#include "marc/probe.hpp"
#include "marc/train.hpp"

#include <cmath>
#include <string>
#include <vector>

using namespace marc;
using marc::testing::TempDir;
using marc::testing::tiny_run_config;

namespace {

InteractionDataset small_data(std::uint64_t seed) {
    SyntheticConfig cfg;
    cfg.num_users = 120;
    cfg.num_items = 50;
    cfg.num_interactions = 3000;
    cfg.observable_dim = 12;
    cfg.user_feature_dim = 6;
    cfg.latent_dim = 4;
    cfg.history_draws = 10;
    cfg.history_cap = 5;
    cfg.seed = seed;
    return gen_synthetic(cfg);
}

ProbeConfig small_probe() {
    ProbeConfig cfg;
    cfg.id_dim = 8;
    cfg.expert_layout = {16, 8};
    cfg.output_hidden = {16, 8};
    cfg.batch_size = 128;
    cfg.max_epochs = 4;
    cfg.seed = 3;
    return cfg;
}

RunConfig small_run(Method method) {
    RunConfig cfg = tiny_run_config(method, 2);
    cfg.epochs = 2;
    cfg.train_samples = 600;
    cfg.batch_size = 64;
    return cfg;
}

LayerProbeReport report_with(std::vector<double> aucs) {
    LayerProbeReport r;
    r.method_id = "x";
    for (std::size_t l = 0; l < aucs.size(); ++l) r.layers.push_back({static_cast<Index>(l), aucs[l], 0.5, 1.0});
    summarize_layers(r);
    return r;
}

}  // namespace

TEST_CASE("summarize_layers") {
    SUBCASE("mid-layer peak") {
        const auto r = report_with({0.70, 0.75, 0.72});
        CHECK(r.mra_peak_layer == 1);
        CHECK(r.final_layer_gap == doctest::Approx(-0.03));
    }
    SUBCASE("ties go to the deepest layer") {
        const auto r = report_with({0.75, 0.70, 0.75});
        CHECK(r.mra_peak_layer == 2);
        CHECK(r.final_layer_gap == 0.0);
    }
    SUBCASE("final-layer peak") {
        const auto r = report_with({0.60, 0.65, 0.70});
        CHECK(r.mra_peak_layer == 2);
        CHECK(r.final_layer_gap == doctest::Approx(0.05));
    }
    LayerProbeReport empty;
    CHECK_THROWS_AS(summarize_layers(empty), InvalidArgument);
}

TEST_CASE("mra_summary") {
    const auto a = report_with({0.70, 0.75, 0.72});
    const auto rows = mra_summary({a});
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].peak_layer == 1);
    CHECK(rows[0].final_gap == a.final_layer_gap);
    CHECK(rows[0].best_auc == 0.75);
    CHECK(rows[0].final_auc == 0.72);
    const auto twice = mra_summary({a, a});
    REQUIRE(twice.size() == 2);
    CHECK(twice[0].peak_layer == twice[1].peak_layer);
    CHECK(twice[0].final_gap == twice[1].final_gap);
    CHECK(twice[0].best_auc == twice[1].best_auc);
}

TEST_CASE("layer report serialization") {
    LayerProbeReport r = report_with({0.7, 0.8});
    r.seed = 4;
    r.d_c = 16;
    const LayerProbeReport back = layer_report_from_json(to_json(r));
    CHECK(back.method_id == r.method_id);
    CHECK(back.seed == 4);
    CHECK(back.d_c == 16);
    REQUIRE(back.layers.size() == 2);
    CHECK(back.layers[1].auc == 0.8);
    CHECK(back.mra_peak_layer == 1);
    const std::string csv = layer_curve_csv(r);
    CHECK(csv.rfind("layer,auc,logloss,proxy_loss\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
    CHECK_THROWS_AS(layer_report_from_json(nlohmann::json{{"method", "x"}}), InvalidArgument);
}

TEST_CASE("layer_sweep") {
    const InteractionDataset ds = small_data(1);
    const MarcModel model = train_model(small_run(Method::marc), ds);
    const LayerProbeReport a = layer_sweep(model, ds, small_probe(), 1);

    SUBCASE("one entry per layer with a consistent summary") {
        REQUIRE(a.layers.size() == 3);
        for (std::size_t l = 0; l < 3; ++l) {
            CHECK(a.layers[l].layer == static_cast<Index>(l));
            CHECK(a.layers[l].auc > 0.0);
            CHECK(a.layers[l].auc < 1.0);
            CHECK(std::isfinite(a.layers[l].proxy_loss));
        }
        LayerProbeReport copy = a;
        summarize_layers(copy);
        CHECK(copy.mra_peak_layer == a.mra_peak_layer);
        CHECK(a.method_id == "marc");
        CHECK(a.d_c == 4);
    }
    SUBCASE("deterministic and independent of the worker count") {
        const LayerProbeReport b = layer_sweep(model, ds, small_probe(), 1);
        const LayerProbeReport c = layer_sweep(model, ds, small_probe(), 3);
        CHECK(to_json(a).dump() == to_json(b).dump());
        CHECK(to_json(a).dump() == to_json(c).dump());
    }
    SUBCASE("a reloaded model gives the same report") {
        TempDir dir("probe_reload");
        save_model(model, dir / "m.bin");
        const LayerProbeReport b = layer_sweep(load_model(dir / "m.bin"), ds, small_probe(), 2);
        CHECK(to_json(a).dump() == to_json(b).dump());
    }
    SUBCASE("proxy loss reuses the training objective") {
        const LayerTables t = encode_entities(model, ds);
        CHECK(a.layers.back().proxy_loss == layer_proxy_loss(model, ds, t.users.back(), t.items.back()));
    }
    SUBCASE("untrained models are refused") {
        const MarcModel fresh = MarcModel::create(small_run(Method::marc), ds.input_dim());
        CHECK_THROWS_AS(layer_sweep(fresh, ds, small_probe()), InvalidArgument);
    }
}

TEST_CASE("layer_sweep over the proxy baselines") {
    const InteractionDataset ds = small_data(2);
    for (Method method : {Method::cs, Method::cl, Method::mrl}) {
        CAPTURE(to_string(method));
        const MarcModel model = train_model(small_run(method), ds);
        const LayerProbeReport r = layer_sweep(model, ds, small_probe(), 2);
        CHECK(r.layers.size() == 3);
        CHECK(r.method_id == to_string(method));
        for (const auto& e : r.layers) CHECK(std::isfinite(e.proxy_loss));
    }
}

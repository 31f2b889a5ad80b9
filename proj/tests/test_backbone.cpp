#include "doctest.h"
#include "test_util.hpp"

#include "marc/backbone.hpp"
#include "marc/error.hpp"
#include "marc/numcore/ops.hpp"

#include <vector>

using namespace marc;
using marc::testing::random_matrix;

namespace {

EncoderConfig small_config(Index input_dim = 5, Index hidden = 4, Index layers = 3) {
    EncoderConfig cfg;
    cfg.input_dim = input_dim;
    cfg.hidden_dim = hidden;
    cfg.num_layers = layers;
    return cfg;
}

}  // namespace

TEST_CASE("pool_user_input examples") {
    const std::vector<double> user{0.5, -1.0};

    SUBCASE("empty history contributes zeros") {
        const std::vector<std::vector<double>> history;
        CHECK(pool_user_input(user, history, 3) == std::vector<double>{0.5, -1.0, 0.0, 0.0, 0.0});
    }
    SUBCASE("single history vector is copied") {
        const std::vector<std::vector<double>> history{{4.0, 5.0, 6.0}};
        CHECK(pool_user_input(user, history, 3) == std::vector<double>{0.5, -1.0, 4.0, 5.0, 6.0});
    }
    SUBCASE("two vectors are averaged") {
        const std::vector<std::vector<double>> history{{1.0, 1.0}, {3.0, 3.0}};
        CHECK(pool_user_input(user, history, 2) == std::vector<double>{0.5, -1.0, 2.0, 2.0});
    }
    SUBCASE("inconsistent history dims") {
        const std::vector<std::vector<double>> history{{1.0, 1.0}, {3.0}};
        CHECK_THROWS_AS(pool_user_input(user, history, 2), ShapeError);
    }
}

TEST_CASE("zero block weights give the residual identity exactly") {
    Rng rng(11);
    EncoderStack enc(small_config(), rng);
    for (auto& b : enc.blocks()) {
        b.w1.mutable_value().setZero();
        b.w2.mutable_value().setZero();
    }
    const Tensor x(random_matrix(7, 5, rng));
    const auto outs = enc.encode_all_layers(x);
    REQUIRE(outs.size() == 4);
    const Matrix projected = x.value() * enc.input_projection().value();
    for (const auto& o : outs) CHECK(o.value() == projected);
}

TEST_CASE("hand-set single block") {
    Rng rng(0);
    EncoderStack enc(small_config(2, 2, 1), rng);
    enc.input_projection().mutable_value() = Matrix::Identity(2, 2);
    enc.blocks()[0].w1.mutable_value() << 1.0, 0.0, 0.0, -1.0;
    enc.blocks()[0].w2.mutable_value() << 2.0, 0.0, 0.0, 3.0;

    Matrix x(2, 2);
    x << 1.0, 0.0, 0.0, 1.0;
    const auto outs = enc.encode_all_layers(Tensor(x));
    REQUIRE(outs.size() == 2);
    CHECK(outs[0].value() == x);
    // (1,0): relu((1,0)) W2 = (2,0), plus residual -> (3,0).
    // (0,1): relu((0,-1)) = 0, residual only -> (0,1).
    Matrix expected(2, 2);
    expected << 3.0, 0.0, 0.0, 1.0;
    CHECK(outs[1].value() == expected);
    CHECK(enc.encode(Tensor(x)).value() == expected);
}

TEST_CASE("layer outputs keep the batch size and width") {
    Rng rng(2);
    EncoderStack enc(small_config(5, 6, 4), rng);
    for (Index n : {1, 3, 17}) {
        const auto outs = enc.encode_all_layers(Tensor(random_matrix(n, 5, rng)));
        REQUIRE(static_cast<Index>(outs.size()) == enc.num_layer_outputs());
        for (const auto& o : outs) {
            CHECK(o.rows() == n);
            CHECK(o.cols() == 6);
        }
    }
    CHECK(enc.output_dim() == 6);
}

TEST_CASE("input width mismatch") {
    Rng rng(2);
    EncoderStack enc(small_config(), rng);
    CHECK_THROWS_AS(enc.encode_all_layers(Tensor::zeros(3, 4)), ShapeError);
    CHECK_THROWS_AS(enc.encode(Tensor::zeros(3, 6)), ShapeError);
}

TEST_CASE("encoding is deterministic bit-for-bit") {
    Rng a(9);
    Rng b(9);
    EncoderStack e1(small_config(), a);
    EncoderStack e2(small_config(), b);
    Rng data(4);
    const Tensor x(random_matrix(10, 5, data));
    const auto o1 = e1.encode_all_layers(x);
    const auto o2 = e2.encode_all_layers(x);
    const auto o3 = e1.encode_all_layers(x);
    REQUIRE(o1.size() == o2.size());
    for (std::size_t l = 0; l < o1.size(); ++l) {
        CHECK(o1[l].value() == o2[l].value());
        CHECK(o1[l].value() == o3[l].value());
    }
}

TEST_CASE("final-layer loss reaches every block") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        Rng rng(seed);
        EncoderStack enc(small_config(5, 8, 6), rng);
        const Tensor x(random_matrix(16, 5, rng));
        Tape tape;
        TapeScope scope(tape);
        const Tensor h = enc.encode(x);
        backward(ops::sum(ops::mul(h, h)));
        CHECK(enc.input_projection().grad().norm() > 0.0);
        for (auto& b : enc.blocks()) {
            CHECK(b.w1.grad().norm() > 0.0);
            CHECK(b.w2.grad().norm() > 0.0);
        }
    }
}

TEST_CASE("frozen-identity mode passes inputs through") {
    EncoderConfig cfg;
    cfg.input_dim = 4;
    cfg.mode = BackboneMode::frozen_identity;
    Rng rng(1);
    EncoderStack enc(cfg, rng);
    CHECK(enc.parameters().empty());
    CHECK(enc.num_layer_outputs() == 1);
    CHECK(enc.output_dim() == 4);
    const Tensor x(random_matrix(3, 4, rng));
    const auto outs = enc.encode_all_layers(x);
    REQUIRE(outs.size() == 1);
    CHECK(outs[0].value() == x.value());
}

TEST_CASE("encoder config errors") {
    Rng rng(1);
    EncoderConfig cfg = small_config();
    cfg.num_layers = 0;
    CHECK_THROWS_AS(EncoderStack(cfg, rng), InvalidArgument);
    cfg = small_config();
    cfg.input_dim = 0;
    CHECK_THROWS_AS(EncoderStack(cfg, rng), InvalidArgument);
    cfg = small_config();
    cfg.output_dim = 3;
    CHECK_THROWS_AS(EncoderStack(cfg, rng), InvalidArgument);
    CHECK(backbone_mode_from_string(to_string(BackboneMode::frozen_identity)) ==
          BackboneMode::frozen_identity);
    CHECK_THROWS_AS(backbone_mode_from_string("lora"), InvalidArgument);
}

#include "doctest.h"
#include "test_util.hpp"

#include "marc/error.hpp"
#include "marc/matching.hpp"
#include "marc/model.hpp"
#include "marc/numcore/gradcheck.hpp"
#include "marc/numcore/ops.hpp"

#include <cmath>
#include <vector>

using namespace marc;
using marc::testing::random_batch;
using marc::testing::random_matrix;
using marc::testing::tiny_run_config;

namespace {

Tensor row_of(std::initializer_list<double> v) { return Tensor::row(v); }

Matrix block(const Matrix& m, Index which, Index d) { return m.middleCols(which * d, d); }

}  // namespace

TEST_CASE("explicit_features examples") {
    SUBCASE("hand evaluation") {
        const Matrix f = explicit_features(row_of({3.0, 4.0}), row_of({1.0, -2.0})).value();
        Matrix expected(1, 8);
        expected << 1.0, -2.0, 3.0, 4.0, 2.0, 6.0, 3.0, -8.0;
        CHECK(f == expected);
    }
    SUBCASE("identical vectors") {
        const Tensor v = row_of({0.5, -1.5, 2.0});
        const Matrix f = explicit_features(v, v).value();
        CHECK(block(f, 0, 3) == v.value());
        CHECK(block(f, 1, 3) == v.value());
        CHECK(block(f, 2, 3) == Matrix::Zero(1, 3));
        CHECK(block(f, 3, 3) == Matrix(v.value().cwiseProduct(v.value())));
    }
    SUBCASE("zero item vector") {
        const Tensor u = row_of({-1.0, 2.0});
        const Matrix f = explicit_features(u, row_of({0.0, 0.0})).value();
        CHECK(block(f, 0, 2) == Matrix::Zero(1, 2));
        CHECK(block(f, 1, 2) == u.value());
        CHECK(block(f, 2, 2) == Matrix(u.value().cwiseAbs()));
        CHECK(block(f, 3, 2) == Matrix::Zero(1, 2));
    }
    SUBCASE("swapping arguments permutes the first two blocks") {
        Rng rng(4);
        const Tensor a(random_matrix(5, 3, rng));
        const Tensor b(random_matrix(5, 3, rng));
        const Matrix ab = explicit_features(a, b).value();
        const Matrix ba = explicit_features(b, a).value();
        CHECK(block(ab, 0, 3) == block(ba, 1, 3));
        CHECK(block(ab, 1, 3) == block(ba, 0, 3));
        CHECK(block(ab, 2, 3) == block(ba, 2, 3));
        CHECK(block(ab, 3, 3) == block(ba, 3, 3));
    }
    CHECK_THROWS_AS(explicit_features(Tensor::zeros(2, 3), Tensor::zeros(2, 4)), ShapeError);
}

TEST_CASE("predict_match") {
    Rng rng(6);
    MatchingNet net(3, true, rng, {4});
    const Tensor cu(random_matrix(5, 3, rng));
    const Tensor ci(random_matrix(5, 3, rng));
    SUBCASE("shape and range") {
        const Matrix p = predict_match(cu, ci, net).value();
        CHECK(p.rows() == 5);
        CHECK(p.cols() == 1);
        CHECK(p.minCoeff() > 0.0);
        CHECK(p.maxCoeff() < 1.0);
    }
    SUBCASE("zero weights give one half") {
        for (auto& p : net.parameters()) p.mutable_value().setZero();
        CHECK(predict_match(cu, ci, net).value() == Matrix::Constant(5, 1, 0.5));
    }
    SUBCASE("hand-set single layer") {
        MatchingNet lin(1, true, rng, {});
        auto& layer = lin.mlp().layers().front();
        // features of (c_u, c_i) = (2, 1): [1, 2, 1, 2]
        layer.weight.mutable_value() << 0.5, -0.25, 1.0, 0.0;
        layer.bias.mutable_value() << -0.5;
        const double logit = 0.5 * 1.0 - 0.25 * 2.0 + 1.0 * 1.0 - 0.5;
        const double y = predict_match(row_of({2.0}), row_of({1.0}), lin).item();
        CHECK(y == doctest::Approx(1.0 / (1.0 + std::exp(-logit))).epsilon(1e-15));
    }
    SUBCASE("without explicit interactions the input is [c_i, c_u]") {
        MatchingNet plain(3, false, rng, {4});
        CHECK(plain.mlp().in_dim() == 6);
        CHECK(net.mlp().in_dim() == 12);
        CHECK(predict_match(cu, ci, plain).rows() == 5);
    }
    CHECK_THROWS_AS(predict_match(Tensor::zeros(5, 2), Tensor::zeros(5, 2), net), ShapeError);
}

TEST_CASE("match_loss examples") {
    const std::vector<double> labels{1.0, 0.0};
    CHECK(match_loss(Tensor(Matrix::Constant(2, 1, 0.5)), labels).item() ==
          doctest::Approx(std::log(2.0)).epsilon(1e-15));
    Matrix exact(2, 1);
    exact << 1.0, 0.0;
    const double at_labels = match_loss(Tensor(exact), labels).item();
    CHECK(at_labels >= 0.0);
    CHECK(at_labels < 1e-11);
    Matrix mixed(2, 1);
    mixed << 0.9, 0.2;
    const double expected = 0.5 * (-std::log(0.9) - std::log(0.8));
    CHECK(match_loss(Tensor(mixed), labels).item() == doctest::Approx(expected).epsilon(1e-14));
    CHECK(std::abs(expected - 0.164252) < 1e-6);

    const std::vector<double> bad{1.0, 0.5};
    CHECK_THROWS_AS(match_loss(Tensor(mixed), bad), InvalidArgument);
    CHECK_THROWS_AS(match_loss(Tensor(mixed), std::vector<double>{1.0}), ShapeError);
}

TEST_CASE("match_loss is positive away from the labels") {
    Rng rng(1);
    const std::vector<double> labels{1.0, 0.0, 1.0};
    for (int t = 0; t < 20; ++t) {
        Matrix p(3, 1);
        for (Index i = 0; i < 3; ++i) p(i, 0) = 0.01 + 0.98 * rng.uniform();
        CHECK(match_loss(Tensor(p), labels).item() > 0.0);
    }
}

TEST_CASE("cosine_match_loss") {
    Matrix u(3, 2);
    u << 1.0, 0.0, 0.0, 1.0, 1.0, 1.0;
    Matrix i(3, 2);
    i << 1.0, 0.0, 1.0, 0.0, -1.0, -1.0;
    // cos = (1, 0, -1); positives rows 0 and 1, negative row 2.
    const std::vector<double> labels{1.0, 1.0, 0.0};
    const double expected = (1.0 - 0.5 * (1.0 + 0.0)) + (-1.0);
    CHECK(cosine_match_loss(Tensor(u), Tensor(i), labels).item() ==
          doctest::Approx(expected).epsilon(1e-14));
    const std::vector<double> all_pos{1.0, 1.0, 1.0};
    CHECK(cosine_match_loss(Tensor(u), Tensor(i), all_pos).item() ==
          doctest::Approx(1.0 - 0.0).epsilon(1e-14));
    CHECK_THROWS_AS(row_cosine(Tensor::zeros(1, 2), Tensor(Matrix::Ones(1, 2))), InvalidArgument);
}

TEST_CASE("total_loss composition") {
    Rng rng(21);
    const Index input_dim = 7;
    const Batch batch = random_batch(8, input_dim, rng);

    SUBCASE("alpha changes only the HSIC term") {
        RunConfig cfg = tiny_run_config(Method::marc, 3);
        cfg.sigma_policy = SigmaPolicy::median;
        const MarcModel with = MarcModel::create(cfg, input_dim);
        cfg.alpha = 0.0;
        MarcModel without = MarcModel::create(cfg, input_dim);
        const LossParts a = total_loss(batch, with);
        const LossParts b = total_loss(batch, without);
        CHECK(b.hsic == 0.0);
        CHECK(b.total.item() == b.match);
        CHECK(std::abs((a.total.item() - b.total.item()) - 0.01 * a.hsic) < 1e-10);
        CHECK(a.hsic < 0.0);

        const Tensor ru = with.backbone.encode(batch.user_inputs);
        const Tensor ri = with.backbone.encode(batch.item_inputs);
        const Tensor cu = compress(ru, *with.compression);
        const Tensor ci = compress(ri, *with.compression);
        const double l_hsic = hsic_loss(ru, cu, ri, ci, cfg.kernel_config()).item();
        CHECK(std::abs((a.total.item() - b.total.item()) - 0.01 * l_hsic) < 1e-10);
        CHECK(b.total.item() ==
              match_loss(predict_match(cu, ci, *without.matching), batch.labels).item());
    }
    SUBCASE("without the matching network the cosine loss is used") {
        RunConfig cfg = tiny_run_config(Method::marc, 3);
        cfg.no_mn = true;
        cfg.no_hsic = true;
        cfg.compression_hidden = {16};
        const MarcModel m = MarcModel::create(cfg, input_dim);
        CHECK_FALSE(m.matching.has_value());
        const Tensor cu = compress(m.backbone.encode(batch.user_inputs), *m.compression);
        const Tensor ci = compress(m.backbone.encode(batch.item_inputs), *m.compression);
        const Matrix cos = row_cosine(cu, ci).value();
        double pos = 0.0;
        double neg = 0.0;
        for (Index r = 0; r < 8; ++r) (r % 2 == 0 ? pos : neg) += cos(r, 0) / 4.0;
        CHECK(total_loss(batch, m).total.item() == doctest::Approx(1.0 - pos + neg).epsilon(1e-13));
    }
    SUBCASE("row count mismatch") {
        const MarcModel m = MarcModel::create(tiny_run_config(Method::marc, 1), input_dim);
        Batch bad = batch;
        bad.labels.pop_back();
        CHECK_THROWS_AS(total_loss(bad, m), ShapeError);
    }
}

TEST_CASE("total_loss gradients match finite differences") {
    for (Index rows : {4, 8}) {
        for (std::uint64_t seed = 1; seed <= 3; ++seed) {
            Rng rng(seed * 10 + static_cast<std::uint64_t>(rows));
            const MarcModel m = MarcModel::create(tiny_run_config(Method::marc, seed), 7);
            const Batch batch = random_batch(rows, 7, rng);
            auto report = finite_diff_check([&] { return total_loss(batch, m).total; },
                                            m.trainable_parameters(), 1e-5, 1e-4);
            CHECK(report.passed);
            CHECK(report.max_relative_error < 1e-4);
        }
    }
}

TEST_CASE("every parameter group receives gradient") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        Rng rng(seed);
        const MarcModel m = MarcModel::create(tiny_run_config(Method::marc, seed), 7);
        const Batch batch = random_batch(16, 7, rng);
        Tape tape;
        TapeScope scope(tape);
        backward(total_loss(batch, m).total);
        auto group_norm = [](const std::vector<Tensor>& ps) {
            double s = 0.0;
            for (const auto& p : ps) s += p.grad().squaredNorm();
            return s;
        };
        CHECK(group_norm(m.backbone.parameters()) > 0.0);
        CHECK(group_norm(m.compression->parameters()) > 0.0);
        CHECK(group_norm(m.matching->parameters()) > 0.0);
    }
}

TEST_CASE("loss config validation") {
    MarcLossConfig cfg;
    cfg.alpha = -1.0;
    CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
    CHECK(proxy_override_from_string(to_string(ProxyOverride::cosine)) == ProxyOverride::cosine);
    CHECK_THROWS_AS(proxy_override_from_string("dot"), InvalidArgument);
}

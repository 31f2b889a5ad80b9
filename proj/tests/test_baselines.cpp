#include "doctest.h"
#include "test_util.hpp"

#include "marc/baselines.hpp"
#include "marc/error.hpp"
#include "marc/numcore/gradcheck.hpp"
#include "marc/numcore/ops.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include <cmath>
#include <vector>

using namespace marc;
using marc::testing::random_matrix;
using marc::testing::random_param;

namespace {

Matrix covariance(const Matrix& x) {
    const Matrix c = x.rowwise() - x.colwise().mean();
    return c.transpose() * c / static_cast<double>(x.rows() - 1);
}

/// Reconstruction error of projecting centered data onto an orthonormal frame.
double frame_error(const Matrix& x, const Matrix& frame) {
    const Matrix c = x.rowwise() - x.colwise().mean();
    const Matrix residual = c - c * frame * frame.transpose();
    return residual.squaredNorm() / static_cast<double>(x.rows() - 1);
}

Matrix random_frame(Index d, Index k, Rng& rng) {
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(Eigen::MatrixXd(random_matrix(d, k, rng)));
    return Matrix(qr.householderQ() * Eigen::MatrixXd::Identity(d, k));
}

}  // namespace

TEST_CASE("jacobi_eigen agrees with a dense solver") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        Rng rng(seed);
        const Matrix a = random_matrix(8, 8, rng);
        const Matrix s = a + a.transpose();
        const SymmetricEigen eig = jacobi_eigen(s);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ref{Eigen::MatrixXd(s)};
        const Eigen::VectorXd ref_values = ref.eigenvalues().reverse();
        CHECK((eig.values - ref_values).cwiseAbs().maxCoeff() < 1e-10);
        CHECK((s * eig.vectors - eig.vectors * eig.values.asDiagonal()).cwiseAbs().maxCoeff() < 1e-10);
        CHECK((eig.vectors.transpose() * eig.vectors - Matrix::Identity(8, 8)).cwiseAbs().maxCoeff() < 1e-12);
    }
    CHECK_THROWS_AS(jacobi_eigen(Matrix::Zero(2, 3)), ShapeError);
}

TEST_CASE("pca_fit examples") {
    SUBCASE("points on a line have zero error at k=1") {
        Matrix x(6, 2);
        for (Index i = 0; i < 6; ++i) x.row(i) << 1.0 + 0.5 * i, -2.0 + 1.5 * i;
        const PcaModel m = pca_fit(x, 1);
        CHECK(pca_reconstruction_error(x, m) < 1e-24);
        CHECK(std::abs(m.discarded_eigenvalues(0)) < 1e-12);
    }
    SUBCASE("isotropic data drops the smallest eigenvalue") {
        Rng rng(2);
        const Matrix x = random_matrix(400, 5, rng);
        const PcaModel m = pca_fit(x, 4);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ref{Eigen::MatrixXd(covariance(x))};
        const double smallest = ref.eigenvalues()(0);
        CHECK(pca_reconstruction_error(x, m) == doctest::Approx(smallest).epsilon(1e-10));
    }
    SUBCASE("random 50x8 at k=3 matches a dense eigendecomposition up to sign") {
        Rng rng(3);
        const Matrix x = random_matrix(50, 8, rng);
        const PcaModel m = pca_fit(x, 3);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ref{Eigen::MatrixXd(covariance(x))};
        for (Index j = 0; j < 3; ++j) {
            const Eigen::VectorXd r = ref.eigenvectors().col(7 - j);
            const Eigen::VectorXd c = m.components.col(j);
            const double sign = r.dot(c) < 0.0 ? -1.0 : 1.0;
            CHECK((sign * c - r).cwiseAbs().maxCoeff() < 1e-8);
            CHECK(m.eigenvalues(j) == doctest::Approx(ref.eigenvalues()(7 - j)).epsilon(1e-10));
        }
    }
    SUBCASE("errors") {
        Rng rng(4);
        const Matrix x = random_matrix(10, 4, rng);
        CHECK_THROWS_AS(pca_fit(x, 4), InvalidArgument);
        CHECK_THROWS_AS(pca_fit(x, 0), InvalidArgument);
        CHECK_THROWS_AS(pca_fit(random_matrix(3, 6, rng), 3), InvalidArgument);
        const PcaModel m = pca_fit(x, 2);
        CHECK_THROWS_AS(pca_transform(Matrix::Zero(2, 3), m), ShapeError);
        CHECK_THROWS_AS(pca_inverse(Matrix::Zero(2, 3), m), ShapeError);
    }
    SUBCASE("degenerate covariance is allowed") {
        const Matrix x = Matrix::Constant(5, 3, 2.0);
        const PcaModel m = pca_fit(x, 1);
        CHECK(m.eigenvalues.minCoeff() >= 0.0);
        CHECK(pca_transform(x, m).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("pca identities") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        Rng rng(seed);
        const Matrix x = random_matrix(30, 6, rng) * random_matrix(6, 6, rng);
        double previous = std::numeric_limits<double>::infinity();
        for (Index k = 1; k < 6; ++k) {
            const PcaModel m = pca_fit(x, k);
            const double err = pca_reconstruction_error(x, m);
            const double discarded = m.discarded_eigenvalues.sum();
            CHECK(std::abs(err - discarded) <= 1e-8 * std::max(discarded, 1e-300) + 1e-14);
            CHECK((m.components.transpose() * m.components - Matrix::Identity(k, k)).cwiseAbs().maxCoeff() <
                  1e-8);
            for (Index j = 1; j < k; ++j) CHECK(m.eigenvalues(j) <= m.eigenvalues(j - 1));
            CHECK(m.eigenvalues.minCoeff() >= 0.0);
            CHECK(err <= previous);
            previous = err;
        }
    }
}

TEST_CASE("pca_transform") {
    Rng rng(5);
    const Matrix x = random_matrix(20, 4, rng);
    const PcaModel m = pca_fit(x, 2);
    SUBCASE("the mean maps to zero") {
        const Matrix means = m.mean.replicate(3, 1);
        CHECK(pca_transform(means, m).cwiseAbs().maxCoeff() == 0.0);
    }
    SUBCASE("identity components give centered data") {
        PcaModel id = m;
        id.components = Matrix::Identity(4, 4);
        CHECK(pca_transform(x, id) == Matrix(x.rowwise() - m.mean));
    }
    SUBCASE("matches direct projection") {
        Matrix expected(20, 2);
        for (Index i = 0; i < 20; ++i) {
            for (Index j = 0; j < 2; ++j) {
                double s = 0.0;
                for (Index c = 0; c < 4; ++c) s += (x(i, c) - m.mean(c)) * m.components(c, j);
                expected(i, j) = s;
            }
        }
        CHECK((pca_transform(x, m) - expected).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("pca beats random orthonormal frames") {
    Rng rng(77);
    const Matrix x = random_matrix(12, 4, rng) * random_matrix(4, 4, rng);
    const PcaModel m = pca_fit(x, 2);
    const double best = pca_reconstruction_error(x, m);
    CHECK(std::abs(best - frame_error(x, m.components)) < 1e-10);
    int beaten = 0;
    for (int t = 0; t < 100; ++t) {
        if (frame_error(x, random_frame(4, 2, rng)) < best) ++beaten;
    }
    CHECK(beaten == 0);
}

TEST_CASE("cs_proxy_loss examples") {
    const Tensor a = Tensor::row({1.0, 2.0, -0.5});
    const std::vector<double> pos{1.0};
    const std::vector<double> neg{0.0};
    CHECK(cs_proxy_loss(a, a, pos).item() == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(std::abs(cs_proxy_loss(a, ops::scale(a, -1.0), neg).item()) < 1e-15);
    CHECK(cs_proxy_loss(Tensor::row({1.0, 0.0}), Tensor::row({0.0, 3.0}), pos).item() == 1.0);
    CHECK_THROWS_AS(cs_proxy_loss(Tensor::row({0.0, 0.0}), Tensor::row({1.0, 0.0}), pos), InvalidArgument);
}

TEST_CASE("cl_proxy_loss examples") {
    SUBCASE("orthogonal unit rows at tau 1") {
        const Tensor r(Matrix::Identity(2, 2));
        const double expected = std::log(1.0 + std::exp(-1.0));
        CHECK(cl_proxy_loss(r, r, 1.0).item() == doctest::Approx(expected).epsilon(1e-14));
        CHECK(std::abs(expected - 0.313262) < 1e-6);
    }
    SUBCASE("identical rows give ln n") {
        const Tensor r(Matrix::Constant(5, 3, 0.7));
        CHECK(cl_proxy_loss(r, r, 0.07).item() == doctest::Approx(std::log(5.0)).epsilon(1e-12));
    }
    SUBCASE("random batch matches a direct softmax") {
        Rng rng(9);
        const Matrix u = random_matrix(8, 4, rng);
        const Matrix v = random_matrix(8, 4, rng);
        const double tau = 0.2;
        double expected = 0.0;
        for (Index i = 0; i < 8; ++i) {
            std::vector<double> logits;
            for (Index j = 0; j < 8; ++j) {
                logits.push_back(u.row(i).dot(v.row(j)) / (u.row(i).norm() * v.row(j).norm()) / tau);
            }
            double denom = 0.0;
            for (double l : logits) denom += std::exp(l);
            expected += -(logits[static_cast<std::size_t>(i)] - std::log(denom)) / 8.0;
        }
        const double got = cl_proxy_loss(Tensor(u), Tensor(v), tau).item();
        CHECK(std::abs(got - expected) < 1e-10);
        CHECK(got >= 0.0);
    }
    SUBCASE("gradients") {
        Rng rng(10);
        Tensor u = random_param(6, 3, rng);
        Tensor v = random_param(6, 3, rng);
        CHECK(finite_diff_check([&] { return cl_proxy_loss(u, v, 0.5); }, {u, v}).passed);
    }
    CHECK_THROWS_AS(cl_proxy_loss(Tensor::zeros(1, 2), Tensor::zeros(1, 2), 0.1), InvalidArgument);
    CHECK_THROWS_AS(cl_proxy_loss(Tensor(Matrix::Ones(2, 2)), Tensor(Matrix::Ones(2, 2)), 0.0),
                    InvalidArgument);
}

TEST_CASE("mrl_loss") {
    Rng rng(12);
    const Tensor cu(random_matrix(6, 8, rng));
    const Tensor ci(random_matrix(6, 8, rng));
    const std::vector<double> y{1.0, 0.0, 1.0, 1.0, 0.0, 0.0};

    SUBCASE("one full-width prefix is plain match_loss") {
        Rng a(1);
        NestedHeads heads({8}, 8, a, {5});
        const double direct = match_loss(predict_match(cu, ci, heads.heads()[0]), y).item();
        CHECK(mrl_loss(cu, ci, y, heads).item() == direct);
    }
    SUBCASE("zero heads give count times ln 2") {
        Rng a(2);
        NestedHeads heads({2, 4, 8}, 8, a, {5});
        for (auto& p : heads.parameters()) p.mutable_value().setZero();
        CHECK(mrl_loss(cu, ci, y, heads).item() == doctest::Approx(3.0 * std::log(2.0)).epsilon(1e-14));
    }
    SUBCASE("two prefixes sum their heads") {
        Rng a(3);
        NestedHeads heads({2, 8}, 8, a, {});
        const double first =
            match_loss(predict_match(ops::slice_cols(cu, 0, 2), ops::slice_cols(ci, 0, 2), heads.heads()[0]), y)
                .item();
        const double second = match_loss(predict_match(cu, ci, heads.heads()[1]), y).item();
        CHECK(mrl_loss(cu, ci, y, heads).item() == doctest::Approx(first + second).epsilon(1e-14));
    }
    SUBCASE("prefix ladder and errors") {
        CHECK(NestedHeads::prefixes_for(128) == std::vector<Index>{16, 32, 64, 128});
        CHECK(NestedHeads::prefixes_for(32) == std::vector<Index>{16, 32});
        CHECK(NestedHeads::prefixes_for(8) == std::vector<Index>{8});
        Rng a(4);
        CHECK_THROWS_AS(NestedHeads({4, 16}, 8, a), InvalidArgument);
        CHECK_THROWS_AS(NestedHeads({4, 4}, 8, a), InvalidArgument);
        NestedHeads wide({16}, 16, a, {4});
        CHECK_THROWS_AS(mrl_loss(cu, ci, y, wide), InvalidArgument);
    }
}

TEST_CASE("ae_loss") {
    Rng rng(13);
    const Tensor r(random_matrix(5, 4, rng));
    SUBCASE("identity encoder and decoder") {
        Mlp enc(4, {}, 4, rng, "enc");
        Mlp dec(4, {}, 4, rng, "dec");
        enc.layers()[0].weight.mutable_value() = Matrix::Identity(4, 4);
        enc.layers()[0].bias.mutable_value().setZero();
        dec.layers()[0].weight.mutable_value() = Matrix::Identity(4, 4);
        dec.layers()[0].bias.mutable_value().setZero();
        CHECK(ae_loss(r, enc, dec).item() == 0.0);
    }
    SUBCASE("zero decoder") {
        Mlp enc(4, {3}, 2, rng, "enc");
        Mlp dec(2, {3}, 4, rng, "dec");
        for (auto& p : dec.parameters()) p.mutable_value().setZero();
        const double expected = r.value().rowwise().squaredNorm().mean() / 4.0;
        CHECK(ae_loss(r, enc, dec).item() == doctest::Approx(expected).epsilon(1e-14));
    }
    SUBCASE("random nets match direct evaluation") {
        Mlp enc(4, {3}, 2, rng, "enc");
        Mlp dec(2, {3}, 4, rng, "dec");
        auto mlp = [](const Mlp& m, Matrix x) {
            for (std::size_t l = 0; l < m.layers().size(); ++l) {
                x = (x * m.layers()[l].weight.value()).rowwise() + Eigen::RowVectorXd(m.layers()[l].bias.value());
                if (l + 1 < m.layers().size()) x = x.cwiseMax(0.0);
            }
            return x;
        };
        const Matrix rec = mlp(dec, mlp(enc, r.value()));
        const double expected = (r.value() - rec).squaredNorm() / (5.0 * 4.0);
        CHECK(ae_loss(r, enc, dec).item() == doctest::Approx(expected).epsilon(1e-13));
        Mlp bad(2, {3}, 3, rng, "bad");
        CHECK_THROWS_AS(ae_loss(r, enc, bad), ShapeError);
    }
}

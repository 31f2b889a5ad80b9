#pragma once

#include "marc/matching.hpp"
#include "marc/numcore/nn.hpp"
#include "marc/numcore/tensor.hpp"

#include <span>
#include <vector>

namespace marc {

// ---------------------------------------------------------------- PCA

struct SymmetricEigen {
    Eigen::VectorXd values;  // descending
    Matrix vectors;          // column j pairs with values[j]
};

/// Cyclic Jacobi rotations on a symmetric matrix. Sweeps until the
/// off-diagonal Frobenius norm drops below `tol` times the total norm.
SymmetricEigen jacobi_eigen(const Matrix& symmetric, double tol = 1e-14, int max_sweeps = 100);

struct PcaModel {
    Eigen::RowVectorXd mean;   // 1 x d_o
    Matrix components;         // d_o x k, orthonormal columns
    Eigen::VectorXd eigenvalues;  // k, nonincreasing
    Eigen::VectorXd discarded_eigenvalues;  // d_o - k

    Index input_dim() const { return components.rows(); }
    Index output_dim() const { return components.cols(); }
};

/// Top-k eigenvectors of the sample covariance (1/(n-1) normalization).
PcaModel pca_fit(const Matrix& x, Index k);
/// (X - mean) * components.
Matrix pca_transform(const Matrix& x, const PcaModel& model);
/// mean + Z * components^T.
Matrix pca_inverse(const Matrix& z, const PcaModel& model);
/// sum_i ||x_i - reconstruct(x_i)||^2 / (n - 1); equals the discarded
/// eigenvalue mass for the fitting data.
double pca_reconstruction_error(const Matrix& x, const PcaModel& model);

// ---------------------------------------------------------------- proxies

/// mean_i (cos(r_u, r_i) - (2 y - 1))^2.
Tensor cs_proxy_loss(const Tensor& r_user, const Tensor& r_item, std::span<const double> labels);

inline constexpr double kDefaultClTemperature = 0.07;

/// In-batch contrastive loss: row i of R_u is the positive for row i of
/// R_i, every other row a negative. Cross-entropy over cosine / tau.
Tensor cl_proxy_loss(const Tensor& r_user, const Tensor& r_item,
                     double temperature = kDefaultClTemperature);

// ---------------------------------------------------------------- MRL

/// One matching head per nested prefix of the compressed vector.
class NestedHeads {
public:
    static inline const std::vector<Index> kDefaultPrefixes{16, 32, 64, 128};

    NestedHeads() = default;
    NestedHeads(std::vector<Index> prefixes, Index compressed_dim, Rng& rng,
                const std::vector<Index>& hidden = MatchingNet::kDefaultHidden);

    /// Default ladder restricted to d_c (or {d_c} when d_c < 16).
    static std::vector<Index> prefixes_for(Index compressed_dim);

    const std::vector<Index>& prefixes() const { return prefixes_; }
    std::vector<MatchingNet>& heads() { return heads_; }
    const std::vector<MatchingNet>& heads() const { return heads_; }
    Index compressed_dim() const { return compressed_dim_; }
    std::vector<Tensor> parameters() const;

private:
    std::vector<Index> prefixes_;
    std::vector<MatchingNet> heads_;
    Index compressed_dim_ = 0;
};

/// sum over prefixes m of match_loss(head_m(c_u[:m], c_i[:m]), y).
Tensor mrl_loss(const Tensor& c_user, const Tensor& c_item, std::span<const double> labels,
                const NestedHeads& heads);

// ---------------------------------------------------------------- AE

/// mean over rows of ||r - dec(enc(r))||^2 / d_o.
Tensor ae_loss(const Tensor& r, const Mlp& encoder, const Mlp& decoder);

}  // namespace marc

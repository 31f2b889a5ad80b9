#pragma once

#include "marc/numcore/nn.hpp"
#include "marc/numcore/tensor.hpp"
#include "marc/rng.hpp"

#include <string>
#include <vector>

namespace marc {

/// g(.): maps original representations (d_o) to compressed ones (d_c < d_o).
class CompressionNet {
public:
    static inline const std::vector<Index> kDefaultHidden{256, 128};

    CompressionNet() = default;
    CompressionNet(Index input_dim, Index output_dim, Rng& rng,
                   const std::vector<Index>& hidden = kDefaultHidden);

    Index input_dim() const { return mlp_.in_dim(); }
    Index output_dim() const { return mlp_.out_dim(); }
    const std::vector<Index>& hidden() const { return hidden_; }
    Mlp& mlp() { return mlp_; }
    const Mlp& mlp() const { return mlp_; }
    std::vector<Tensor> parameters() const { return mlp_.parameters(); }

private:
    std::vector<Index> hidden_;
    Mlp mlp_;
};

/// c = g(r), row-wise.
Tensor compress(const Tensor& r, const CompressionNet& net);

enum class SigmaPolicy { fixed, median };

std::string to_string(SigmaPolicy p);
SigmaPolicy sigma_policy_from_string(const std::string& s);

struct KernelConfig {
    SigmaPolicy policy = SigmaPolicy::median;
    double sigma = 1.0;  // used when policy == fixed

    void validate() const;
};

/// K(i,j) = exp(-||x_i - x_j||^2 / (2 sigma^2)).
Tensor gaussian_kernel_matrix(const Tensor& x, double sigma);

/// sqrt(median of nonzero pairwise squared distances / 2); 1.0 when every
/// distance is zero. The median of an even count is the mean of the two
/// middle values. Pairs are unordered (i < j).
double median_sigma(const Matrix& x);

/// Bandwidth chosen by `cfg` for the sample `x` (never differentiated).
double resolve_sigma(const Matrix& x, const KernelConfig& cfg);

/// HSIC(X, Y) = Tr(K_X J K_Y J) / (n - 1)^2 with Gaussian kernels. X and Y may
/// have different widths but must share the row count n >= 2.
Tensor hsic(const Tensor& x, const Tensor& y, const KernelConfig& cfg);

/// -(HSIC(R_u, C_u) + HSIC(R_i, C_i)) / 2. Negated so that minimizing the
/// total loss maximizes dependence between original and compressed views.
Tensor hsic_loss(const Tensor& r_user, const Tensor& c_user, const Tensor& r_item,
                 const Tensor& c_item, const KernelConfig& cfg);

}  // namespace marc

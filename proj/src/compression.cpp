#include "marc/compression.hpp"

#include "marc/error.hpp"
#include "marc/numcore/ops.hpp"

#include <algorithm>
#include <cmath>

namespace marc {

CompressionNet::CompressionNet(Index input_dim, Index output_dim, Rng& rng,
                               const std::vector<Index>& hidden)
    : hidden_(hidden) {
    if (output_dim < 1 || input_dim < 1) {
        throw InvalidArgument("compression: dimensions must be positive");
    }
    if (output_dim >= input_dim) {
        throw InvalidArgument("compression: d_c (" + std::to_string(output_dim) +
                              ") must be smaller than d_o (" + std::to_string(input_dim) + ")");
    }
    mlp_ = Mlp(input_dim, hidden, output_dim, rng, "compression");
}

Tensor compress(const Tensor& r, const CompressionNet& net) {
    if (r.cols() != net.input_dim()) {
        throw ShapeError("compress: expected " + std::to_string(net.input_dim()) +
                         " columns, got " + shape_string(r));
    }
    return net.mlp().forward(r);
}

std::string to_string(SigmaPolicy p) { return p == SigmaPolicy::fixed ? "fixed" : "median"; }

SigmaPolicy sigma_policy_from_string(const std::string& s) {
    if (s == "fixed") return SigmaPolicy::fixed;
    if (s == "median") return SigmaPolicy::median;
    throw InvalidArgument("unknown sigma policy '" + s + "'");
}

void KernelConfig::validate() const {
    if (policy == SigmaPolicy::fixed && !(sigma > 0.0)) {
        throw InvalidArgument("kernel: fixed sigma must be positive");
    }
}

Tensor gaussian_kernel_matrix(const Tensor& x, double sigma) {
    if (!(sigma > 0.0)) throw InvalidArgument("gaussian_kernel_matrix: sigma must be positive");
    if (x.rows() < 2) throw InvalidArgument("gaussian_kernel_matrix: need at least 2 rows");
    return ops::exp(ops::scale(ops::pairwise_sq_dists(x), -1.0 / (2.0 * sigma * sigma)));
}

double median_sigma(const Matrix& x) {
    std::vector<double> d;
    const Index n = x.rows();
    d.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
    for (Index i = 0; i < n; ++i) {
        for (Index j = i + 1; j < n; ++j) {
            const double s = (x.row(i) - x.row(j)).squaredNorm();
            if (s > 0.0) d.push_back(s);
        }
    }
    if (d.empty()) return 1.0;
    const std::size_t mid = d.size() / 2;
    std::nth_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(mid), d.end());
    double med = d[mid];
    if (d.size() % 2 == 0) {
        const double lower = *std::max_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(mid));
        med = 0.5 * (med + lower);
    }
    return std::sqrt(med / 2.0);
}

double resolve_sigma(const Matrix& x, const KernelConfig& cfg) {
    cfg.validate();
    return cfg.policy == SigmaPolicy::fixed ? cfg.sigma : median_sigma(x);
}

Tensor hsic(const Tensor& x, const Tensor& y, const KernelConfig& cfg) {
    if (x.rows() != y.rows()) {
        throw ShapeError("hsic: row counts differ, " + shape_string(x) + " vs " + shape_string(y));
    }
    const Index n = x.rows();
    if (n < 2) throw InvalidArgument("hsic: need at least 2 samples");
    Tensor kx = gaussian_kernel_matrix(x, resolve_sigma(x.value(), cfg));
    Tensor ky = gaussian_kernel_matrix(y, resolve_sigma(y.value(), cfg));
    // Tr(Kx J Ky J) = <J Kx J, J Ky J> since J is symmetric and idempotent.
    // Centering both sides makes a constant input on either side exactly zero.
    const double norm = 1.0 / static_cast<double>((n - 1) * (n - 1));
    return ops::scale(ops::sum(ops::mul(ops::center(kx), ops::center(ky))), norm);
}

Tensor hsic_loss(const Tensor& r_user, const Tensor& c_user, const Tensor& r_item,
                 const Tensor& c_item, const KernelConfig& cfg) {
    Tensor total = ops::add(hsic(r_user, c_user, cfg), hsic(r_item, c_item, cfg));
    return ops::scale(total, -0.5);
}

}  // namespace marc

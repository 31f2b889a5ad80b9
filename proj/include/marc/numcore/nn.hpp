#pragma once

#include "marc/numcore/tensor.hpp"
#include "marc/rng.hpp"

#include <string>
#include <vector>

namespace marc {

/// Uniform Glorot init in [-a, a], a = sqrt(6 / (fan_in + fan_out)).
Matrix glorot_uniform(Index fan_in, Index fan_out, Rng& rng);

/// Fully connected layer, y = x W + b (row-vector convention).
struct Linear {
    Tensor weight;  // in x out
    Tensor bias;    // 1 x out

    Linear() = default;
    Linear(Index in, Index out, Rng& rng, const std::string& name);

    Tensor forward(const Tensor& x) const;
    Index in_dim() const { return weight.rows(); }
    Index out_dim() const { return weight.cols(); }
};

/// ReLU MLP with a linear output layer.
class Mlp {
public:
    Mlp() = default;
    Mlp(Index in, const std::vector<Index>& hidden, Index out, Rng& rng, const std::string& name);

    Tensor forward(const Tensor& x) const;

    Index in_dim() const { return layers_.front().in_dim(); }
    Index out_dim() const { return layers_.back().out_dim(); }
    std::vector<Linear>& layers() { return layers_; }
    const std::vector<Linear>& layers() const { return layers_; }
    std::vector<Tensor> parameters() const;

private:
    std::vector<Linear> layers_;
};

}  // namespace marc

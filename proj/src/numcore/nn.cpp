#include "marc/numcore/nn.hpp"

#include "marc/error.hpp"
#include "marc/numcore/ops.hpp"

#include <cmath>

namespace marc {

Matrix glorot_uniform(Index fan_in, Index fan_out, Rng& rng) {
    const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    Matrix w(fan_in, fan_out);
    for (Index i = 0; i < w.size(); ++i) w.data()[i] = rng.uniform(-a, a);
    return w;
}

Linear::Linear(Index in, Index out, Rng& rng, const std::string& name)
    : weight(glorot_uniform(in, out, rng), true, name + ".weight"),
      bias(Matrix::Zero(1, out), true, name + ".bias") {}

Tensor Linear::forward(const Tensor& x) const {
    return ops::add(ops::matmul(x, weight), bias);
}

Mlp::Mlp(Index in, const std::vector<Index>& hidden, Index out, Rng& rng,
         const std::string& name) {
    if (in < 1 || out < 1) throw InvalidArgument("mlp: dimensions must be positive");
    Index prev = in;
    for (std::size_t i = 0; i < hidden.size(); ++i) {
        if (hidden[i] < 1) throw InvalidArgument("mlp: hidden sizes must be positive");
        layers_.emplace_back(prev, hidden[i], rng, name + "." + std::to_string(i));
        prev = hidden[i];
    }
    layers_.emplace_back(prev, out, rng, name + "." + std::to_string(hidden.size()));
}

Tensor Mlp::forward(const Tensor& x) const {
    if (x.cols() != in_dim()) {
        throw ShapeError("mlp: expected " + std::to_string(in_dim()) + " input columns, got " +
                         shape_string(x));
    }
    Tensor h = x;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        h = layers_[i].forward(h);
        if (i + 1 < layers_.size()) h = ops::relu(h);
    }
    return h;
}

std::vector<Tensor> Mlp::parameters() const {
    std::vector<Tensor> out;
    for (const auto& l : layers_) {
        out.push_back(l.weight);
        out.push_back(l.bias);
    }
    return out;
}

}  // namespace marc

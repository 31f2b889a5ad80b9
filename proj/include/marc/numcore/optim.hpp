#pragma once

#include "marc/numcore/tensor.hpp"

#include <cstdint>
#include <vector>

namespace marc {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Adam with bias correction. Moment buffers are shaped like their parameters.
class Adam {
public:
    Adam(std::vector<Tensor> params, AdamConfig cfg = {});

    /// Applies one update from the accumulated grads, then zeroes them.
    /// Throws NonFiniteError (naming the parameter) before touching any
    /// parameter if a gradient is NaN/Inf.
    void step();
    void zero_grad();

    std::int64_t step_count() const { return step_; }
    const AdamConfig& config() const { return cfg_; }
    void set_lr(double lr) { cfg_.lr = lr; }
    const std::vector<Tensor>& params() const { return params_; }
    const Matrix& first_moment(std::size_t i) const { return m_[i]; }
    const Matrix& second_moment(std::size_t i) const { return v_[i]; }

private:
    std::vector<Tensor> params_;
    std::vector<Matrix> m_;
    std::vector<Matrix> v_;
    AdamConfig cfg_;
    std::int64_t step_ = 0;
};

}  // namespace marc

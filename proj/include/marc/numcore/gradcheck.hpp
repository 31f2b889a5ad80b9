#pragma once

#include "marc/numcore/tensor.hpp"

#include <functional>
#include <vector>

namespace marc {

struct GradCheckReport {
    /// ||analytic - numeric|| / max(||analytic||, ||numeric||), per parameter.
    std::vector<double> relative_errors;
    double max_relative_error = 0.0;
    double tolerance = 0.0;
    bool passed = false;
};

/// Compares tape gradients of `f` against central differences.
///
/// `f` must be deterministic and return a 1x1 tensor. Parameters are
/// perturbed in place and restored. Throws NonFiniteError naming the
/// parameter index if any evaluation is non-finite.
GradCheckReport finite_diff_check(const std::function<Tensor()>& f, std::vector<Tensor> params,
                                  double step = 1e-5, double tol = 1e-4);

}  // namespace marc

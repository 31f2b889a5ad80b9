#pragma once

#include "test_util.hpp"

#include "marc/numcore/gradcheck.hpp"
#include "marc/numcore/ops.hpp"

#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace marc::testing {

using Builder = std::function<Tensor(const std::vector<Tensor>&)>;

struct PrimitiveCase {
    std::string name;
    std::vector<std::pair<Index, Index>> shapes;
    Builder build;
    bool positive = false;  // inputs shifted away from zero (log/sqrt/div)
};

inline Tensor weighted_sum(const Tensor& t, const Matrix& w) { return ops::sum(ops::mul(t, Tensor(w))); }

inline std::vector<PrimitiveCase> primitive_cases() {
    using V = const std::vector<Tensor>&;
    return {
        {"matmul", {{3, 4}, {4, 2}}, [](V in) { return ops::matmul(in[0], in[1]); }},
        {"add", {{3, 4}, {1, 4}}, [](V in) { return ops::add(in[0], in[1]); }},
        {"sub", {{3, 4}, {3, 1}}, [](V in) { return ops::sub(in[0], in[1]); }},
        {"mul", {{3, 4}, {3, 4}}, [](V in) { return ops::mul(in[0], in[1]); }},
        {"div", {{3, 4}, {3, 4}}, [](V in) { return ops::div(in[0], in[1]); }, true},
        {"abs", {{3, 4}}, [](V in) { return ops::abs(in[0]); }},
        {"relu", {{3, 4}}, [](V in) { return ops::relu(in[0]); }},
        {"sigmoid", {{3, 4}}, [](V in) { return ops::sigmoid(in[0]); }},
        {"exp", {{3, 4}}, [](V in) { return ops::exp(in[0]); }},
        {"log", {{3, 4}}, [](V in) { return ops::log(in[0]); }, true},
        {"sqrt", {{3, 4}}, [](V in) { return ops::sqrt(in[0]); }, true},
        {"scale", {{3, 4}}, [](V in) { return ops::scale(in[0], -1.7); }},
        {"add_scalar", {{3, 4}}, [](V in) { return ops::add_scalar(in[0], 0.3); }},
        {"clamp", {{3, 4}}, [](V in) { return ops::clamp(in[0], -0.6, 0.6); }},
        {"concat_rows", {{2, 3}, {3, 3}},
         [](V in) { return ops::concat_rows(std::span<const Tensor>(in.data(), 2)); }},
        {"concat_cols", {{3, 2}, {3, 3}}, [](V in) { return ops::concat_cols({in[0], in[1]}); }},
        {"transpose", {{3, 4}}, [](V in) { return ops::transpose(in[0]); }},
        {"slice_cols", {{3, 5}}, [](V in) { return ops::slice_cols(in[0], 1, 3); }},
        {"sum", {{3, 4}}, [](V in) { return ops::sum(in[0]); }},
        {"mean", {{3, 4}}, [](V in) { return ops::mean(in[0]); }},
        {"sum_rows", {{3, 4}}, [](V in) { return ops::sum_rows(in[0]); }},
        {"trace", {{4, 4}}, [](V in) { return ops::trace(in[0]); }},
        {"pairwise_sq_dists", {{5, 3}}, [](V in) { return ops::pairwise_sq_dists(in[0]); }},
        {"softmax_rows", {{3, 4}}, [](V in) { return ops::softmax_rows(in[0]); }},
        {"log_softmax_rows", {{3, 4}}, [](V in) { return ops::log_softmax_rows(in[0]); }},
        {"center", {{4, 4}}, [](V in) { return ops::center(in[0]); }},
        {"gather_rows", {{4, 3}},
         [](V in) {
             const std::vector<Index> rows{2, 0, 2, 3};
             return ops::gather_rows(in[0], rows);
         }},
    };
}

/// Largest relative error between the tape gradient and central differences
/// of a random weighted sum of the primitive's output.
inline double primitive_gradient_error(const PrimitiveCase& pc, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<Tensor> inputs;
    for (auto [r, c] : pc.shapes) {
        Matrix m = random_matrix(r, c, rng);
        if (pc.positive) m = m.cwiseAbs().array() + 0.5;
        // keep relu/abs/clamp kinks away from the finite-difference stencil
        for (Index i = 0; i < m.size(); ++i) {
            double& v = m.data()[i];
            if (std::abs(v) < 1e-3) v = 0.1;
            if (std::abs(std::abs(v) - 0.6) < 1e-3) v *= 0.9;
        }
        inputs.emplace_back(m, true);
    }
    const Tensor probe = pc.build(inputs);
    const Matrix weights = random_matrix(probe.rows(), probe.cols(), rng);
    const auto report =
        finite_diff_check([&] { return weighted_sum(pc.build(inputs), weights); }, inputs, 1e-5, 1e-4);
    return report.max_relative_error;
}

}  // namespace marc::testing

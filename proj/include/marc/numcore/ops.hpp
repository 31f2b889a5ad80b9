#pragma once

#include "marc/numcore/tensor.hpp"

#include <span>
#include <vector>

/// Differentiable primitives.
///
/// Every function records itself on the active tape when a tape is active and
/// at least one input requires grad. Binary elementwise ops broadcast any
/// dimension of size 1 (so a 1xC bias adds to every row of an NxC batch).
namespace marc::ops {

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);

Tensor abs(const Tensor& x);
Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor exp(const Tensor& x);
Tensor log(const Tensor& x);
Tensor sqrt(const Tensor& x);
Tensor scale(const Tensor& x, double factor);
Tensor add_scalar(const Tensor& x, double value);
/// Elementwise clamp; gradient is zero where the bound is active.
Tensor clamp(const Tensor& x, double lo, double hi);

/// Stacks vertically; all parts share a column count.
Tensor concat_rows(std::span<const Tensor> parts);
/// Stacks horizontally; all parts share a row count.
Tensor concat_cols(std::span<const Tensor> parts);
Tensor concat_cols(std::initializer_list<Tensor> parts);
Tensor transpose(const Tensor& x);
Tensor slice_cols(const Tensor& x, Index begin, Index count);
/// Row lookup (embedding tables); backward scatter-adds.
Tensor gather_rows(const Tensor& table, std::span<const Index> rows);

/// Sum of all entries, 1x1.
Tensor sum(const Tensor& x);
/// Mean of all entries, 1x1.
Tensor mean(const Tensor& x);
/// Per-row sum, Nx1.
Tensor sum_rows(const Tensor& x);
/// Trace of a square matrix, 1x1.
Tensor trace(const Tensor& x);
/// D(i,j) = ||x_i - x_j||^2 for rows of x; symmetric with an exactly zero diagonal.
Tensor pairwise_sq_dists(const Tensor& x);
Tensor softmax_rows(const Tensor& x);
Tensor log_softmax_rows(const Tensor& x);
/// J K J with J = I - (1/n) 1 1^T, for square K. O(n^2).
Tensor center(const Tensor& k);

}  // namespace marc::ops

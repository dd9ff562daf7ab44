#pragma once

#include <span>
#include <vector>

#include "prefalign/nn/tensor.hpp"

namespace prefalign::nn {

// Differentiable operations. Shapes are (rows, cols); sequences are laid out
// one position per row.

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
/// Broadcasts a 1 x cols row over every row of a.
Tensor add_row(const Tensor& a, const Tensor& row);
Tensor scale(const Tensor& a, double s);
Tensor add_scalar(const Tensor& a, double s);
Tensor neg(const Tensor& a);

Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor square(const Tensor& a);
/// tanh approximation of GELU; smooth everywhere.
Tensor gelu(const Tensor& a);
/// log(sigmoid(x)) evaluated without overflow.
Tensor log_sigmoid(const Tensor& a);

/// Sum of all entries, as a 1x1 tensor.
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
/// Per-row sums, rows x 1.
Tensor row_sum(const Tensor& a);

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps = 1e-5);

/// Gathers rows of `table` selected by `ids`.
Tensor embedding(const Tensor& table, std::span<const int> ids);

/// Multi-head scaled dot-product attention. q is Tq x d, k and v are Tk x d.
/// With `causal`, query i attends to keys 0..i (requires Tq == Tk).
Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v, int heads, bool causal);

/// Row-wise log-softmax of `logits` evaluated at `targets`, rows x 1.
/// Rows whose target is negative are skipped (value 0, no gradient).
Tensor log_softmax_pick(const Tensor& logits, std::span<const int> targets);

Tensor concat_cols(const Tensor& a, const Tensor& b);
Tensor slice_cols(const Tensor& a, int start, int count);
Tensor slice_rows(const Tensor& a, int start, int count);

/// Non-differentiable helper: row-wise softmax of a value matrix.
std::vector<double> softmax_row(std::span<const double> logits, double temperature = 1.0);

}  // namespace prefalign::nn

#pragma once

// Differentiable primitives. Every op records a backward closure when any
// operand requires grad.
//
// Broadcasting is limited to two forms:
//   - scalar: the second operand has shape [] (one element)
//   - row:    a is [..., m, n] and b is [..., n] (b drops a's second-to-last
//             axis); b is added/multiplied onto every row of the matching
//             matrix. For a rank-2 `a` this is the classic bias vector.

#include <vector>

#include "bysgnn/tensor.hpp"

namespace bysgnn::ops {

// a: [..., m, k]; b: [k, n] (shared) or [B, m... ] batched as [B, k, n]
// against a [B, m, k].
Tensor matmul(const Tensor& a, const Tensor& b);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor add_scalar(const Tensor& a, double value);

Tensor tanh(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor exp(const Tensor& a);
// One GRU update from gate pre-activations laid out [reset | update | candidate]:
//   r = σ(x_r + p_r), z = σ(x_z + p_z), n = tanh(x_n + r ⊙ p_n)
//   h' = h + z ⊙ (n − h)
// x_proj, h_proj: [..., 3m]; h: [..., m] with matching leading axes.
Tensor gru_cell(const Tensor& x_proj, const Tensor& h_proj, const Tensor& h);
// Elementwise a^p. Non-integer p requires a > 0.
Tensor pow(const Tensor& a, double p);
Tensor abs(const Tensor& a);
Tensor square(const Tensor& a);
// max(a, lo); gradient passes where a > lo.
Tensor clamp_min(const Tensor& a, double lo);

Tensor concat_last(const std::vector<Tensor>& parts);
Tensor slice_last(const Tensor& a, std::size_t begin, std::size_t end);
// Slice along the second-to-last axis.
Tensor slice_rows(const Tensor& a, std::size_t begin, std::size_t end);
// Swap the last two axes.
Tensor transpose(const Tensor& a);
// Rank-3 only: [A, B, C] -> [B, A, C].
Tensor swap_leading(const Tensor& a);
Tensor reshape(const Tensor& a, Shape shape);
// [m, n] -> [batch, m, n]; gradient sums over the new axis.
Tensor broadcast_batch(const Tensor& a, std::size_t batch);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
Tensor sum_last(const Tensor& a);
Tensor mean_last(const Tensor& a);
// Row maximum along the last axis; gradient flows to the first arg-max.
Tensor max_last(const Tensor& a);

// Numerically stabilized softmax along the last axis.
Tensor softmax_last(const Tensor& a);

// gain ⊙ (x − mean)/sqrt(var + eps) + bias along the last axis (population
// variance). gain and bias have shape [d].
Tensor layer_norm_last(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps = 1e-5);

// a ⊙ mask, with the mask treated as a constant (no gradient through the
// decision that produced it). mask.size() == a.numel().
Tensor apply_mask(const Tensor& a, const std::vector<double>& mask);

// Pairwise cosine similarity between the rows of a [n, d]. Rows with zero
// norm are similar to nothing (0, including their own diagonal entry).
Tensor cosine_similarity_rows(const Tensor& a);

Tensor mae_loss(const Tensor& pred, const Tensor& target);
Tensor mse_loss(const Tensor& pred, const Tensor& target);

}  // namespace bysgnn::ops

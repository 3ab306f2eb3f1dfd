#pragma once

#include <vector>

#include "uprompt/tensor.hpp"

namespace uprompt {

// Differentiable building blocks. All functions record the backward pass on
// the returned tensor unless grad is globally disabled (NoGradGuard) or no
// input requires grad. Rank-1 tensors act as a single row where that makes
// sense (softmax, cross_entropy, matvec results).

template <class T> Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <class T> Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <class T> Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <class T> Tensor<T> scale(const Tensor<T>& a, T c);
/// Adds a width-C vector to every row of an R x C matrix.
template <class T> Tensor<T> add_rowvec(const Tensor<T>& a, const Tensor<T>& v);

/// (m x k) . (k x n)
template <class T> Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);
/// (m x k) . (n x k)^T — the form used for attention scores and tied output
/// projections, so no explicit transpose op is needed.
template <class T> Tensor<T> matmul_nt(const Tensor<T>& a, const Tensor<T>& b);
/// (R x C) . (C) -> (R)
template <class T> Tensor<T> matvec(const Tensor<T>& m, const Tensor<T>& v);

template <class T> Tensor<T> relu(const Tensor<T>& a);
/// tanh-approximation gelu.
template <class T> Tensor<T> gelu(const Tensor<T>& a);

template <class T> Tensor<T> softmax_rows(const Tensor<T>& a);
/// Row r is normalized over its first valid[r] columns only; the rest of the
/// row is exactly zero. This is how causal attention masks future keys.
template <class T> Tensor<T> softmax_rows_masked(const Tensor<T>& a, const std::vector<int>& valid);
template <class T> Tensor<T> log_softmax_rows(const Tensor<T>& a);

/// Per-row normalization with learned gain/bias vectors of the row width.
template <class T> Tensor<T> layer_norm_rows(const Tensor<T>& a, const Tensor<T>& gain,
                                             const Tensor<T>& bias, T eps = T(1e-5));

/// Stacks table rows selected by id (embedding lookup); backward scatters.
template <class T> Tensor<T> gather_rows(const Tensor<T>& table, const std::vector<int>& ids);

/// Vertical stack (same column count).
template <class T> Tensor<T> concat_rows(const Tensor<T>& a, const Tensor<T>& b);
/// Horizontal stack (same row count).
template <class T> Tensor<T> concat_cols(const Tensor<T>& a, const Tensor<T>& b);
/// Rank-1 concatenation.
template <class T> Tensor<T> concat_vec(const Tensor<T>& a, const Tensor<T>& b);

/// Half-open row range [r0, r1).
template <class T> Tensor<T> slice_rows(const Tensor<T>& a, int r0, int r1);
template <class T> Tensor<T> slice_cols(const Tensor<T>& a, int c0, int c1);
template <class T> Tensor<T> slice_vec(const Tensor<T>& a, int i0, int i1);

template <class T> Tensor<T> sum(const Tensor<T>& a);
template <class T> Tensor<T> mean(const Tensor<T>& a);

/// Inverted dropout; identity when p == 0 or grad is disabled (inference).
template <class T> Tensor<T> dropout(const Tensor<T>& a, double p, Rng& rng);

/// Mean negative log-likelihood of targets[r] under row-r logits. Rows whose
/// target equals ignore_index contribute nothing; at least one row must be
/// scored. Fused with softmax for stability.
template <class T> Tensor<T> cross_entropy_rows(const Tensor<T>& logits, const std::vector<int>& targets,
                                                int ignore_index = -1);
/// Single-distribution form: rank-1 logits against one target id.
template <class T> Tensor<T> cross_entropy(const Tensor<T>& logits, int target);

/// Index of the largest value; ties break toward the lowest index.
template <class T> int argmax(const std::vector<T>& v);

/// log(sum(exp(v))) computed stably.
template <class T> T logsumexp(const std::vector<T>& v);

}  // namespace uprompt

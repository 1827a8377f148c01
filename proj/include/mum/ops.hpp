// Copyright 2026 The MuM Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mum/tensor.hpp"

// Differentiable array operations. Every function here records a backward rule
// when any input requires a gradient and grad mode is on.

namespace mum {

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> transpose(const Tensor<T>& a);
template <typename T>
Tensor<T> reshape(const Tensor<T>& a, Shape shape);

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
// x(..., D) + bias(D), broadcast over leading axes.
template <typename T>
Tensor<T> add_bias(const Tensor<T>& x, const Tensor<T>& bias);
template <typename T>
Tensor<T> scale(const Tensor<T>& x, T factor);
template <typename T>
Tensor<T> square(const Tensor<T>& x);
template <typename T>
Tensor<T> abs(const Tensor<T>& x);
template <typename T>
Tensor<T> sum(const Tensor<T>& x);
template <typename T>
Tensor<T> mean(const Tensor<T>& x);

template <typename T>
Tensor<T> gelu(const Tensor<T>& x);

// Max-subtracted softmax along `axis`.
template <typename T>
Tensor<T> softmax(const Tensor<T>& x, std::size_t axis);
template <typename T>
Tensor<T> log_softmax(const Tensor<T>& x, std::size_t axis);

// Normalizes over the last axis, then applies gain and bias of that length.
template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gain, const Tensor<T>& bias,
                     T eps = T(1e-6));

// Row gather for 2-D x: out[r] = x[rows[r]].
template <typename T>
Tensor<T> select_rows(const Tensor<T>& x, std::span<const std::int64_t> rows);
// out[r] = source[slot[r]] when slot[r] >= 0, else the single row of `fill`.
template <typename T>
Tensor<T> fill_rows(const Tensor<T>& source, const Tensor<T>& fill,
                    std::span<const std::int64_t> slot);
// Columns [begin, end) of a 2-D tensor.
template <typename T>
Tensor<T> slice_cols(const Tensor<T>& x, std::size_t begin, std::size_t end);

// Mean over rows with weight[r] != 0 of -logp[r, target[r]]; rows with zero
// weight contribute nothing. logp is (R, C).
template <typename T>
Tensor<T> nll_rows(const Tensor<T>& logp, std::span<const std::int64_t> target,
                   std::span<const std::uint8_t> valid);

/// Grid position of a token on the patch grid.
struct GridPos {
  int row = 0;
  int col = 0;
};

// Axial rotary embedding on x(T, heads*head_dim). Within each head the first
// half of the channels is rotated by row angles and the second half by column
// angles, in adjacent pairs with frequency base^(-2j/(head_dim/2)).
template <typename T>
Tensor<T> rope_rotate(const Tensor<T>& x, std::size_t heads, std::span<const GridPos> pos,
                      double base);

/// Head-averaged attention row of one query token, filled in by attention().
struct AttentionCapture {
  std::size_t query = 0;
  std::vector<double> weights;  // one entry per token; zero outside the query's group
};

// Multi-head scaled dot-product attention on q, k, v of shape (T, heads*head_dim).
// Token i attends to token j iff group[i] == group[j].
template <typename T>
Tensor<T> attention(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v, std::size_t heads,
                    std::span<const int> group, AttentionCapture* capture = nullptr);

}  // namespace mum

// Copyright 2026 The MuM Authors
// SPDX-License-Identifier: Apache-2.0

#include "mum/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "mum/kernels.hpp"

namespace mum {
namespace {

template <typename T>
using NodePtr = std::shared_ptr<TensorNode<T>>;

template <typename T>
void require_rank(const Tensor<T>& x, std::size_t r, const char* op) {
  if (x.rank() != r)
    throw DimensionError(std::string(op) + ": expected rank " + std::to_string(r) + ", got " +
                         shape_str(x.shape()));
}

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  if (a.shape() != b.shape())
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
}

// Applies f(out_grad_i, i) -> contribution to parent grad, elementwise.
template <typename T, typename F>
Tensor<T> unary_elementwise(const Tensor<T>& x, F forward, auto derivative) {
  std::vector<T> out(x.numel());
  const auto xv = x.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = forward(xv[i]);
  return detail::make_result<T>(x.shape(), std::move(out), {x.node_ptr()},
                                [derivative](TensorNode<T>& self) {
                                  auto& p = *self.parents[0];
                                  if (!p.requires_grad) return;
                                  auto& g = p.grad_buffer();
                                  for (std::size_t i = 0; i < g.size(); ++i)
                                    g[i] += self.grad[i] * derivative(p.value[i], self.value[i]);
                                });
}

}  // namespace

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0))
    throw DimensionError("matmul: inner dimensions disagree: " + shape_str(a.shape()) + " x " +
                         shape_str(b.shape()));
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<T> out(m * n, T(0));
  kernels::gemm_nn<T>(m, n, k, a.values().data(), b.values().data(), out.data());
  return detail::make_result<T>({m, n}, std::move(out), {a.node_ptr(), b.node_ptr()},
                                [m, k, n](TensorNode<T>& self) {
                                  auto& pa = *self.parents[0];
                                  auto& pb = *self.parents[1];
                                  if (pa.requires_grad)
                                    kernels::gemm_nt<T>(m, k, n, self.grad.data(), pb.value.data(),
                                                        pa.grad_buffer().data());
                                  if (pb.requires_grad)
                                    kernels::gemm_tn<T>(k, n, m, pa.value.data(), self.grad.data(),
                                                        pb.grad_buffer().data());
                                });
}

template <typename T>
Tensor<T> transpose(const Tensor<T>& a) {
  require_rank(a, 2, "transpose");
  const std::size_t r = a.dim(0), c = a.dim(1);
  std::vector<T> out(r * c);
  const auto av = a.values();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = av[i * c + j];
  return detail::make_result<T>({c, r}, std::move(out), {a.node_ptr()}, [r, c](TensorNode<T>& self) {
    auto& p = *self.parents[0];
    if (!p.requires_grad) return;
    auto& g = p.grad_buffer();
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) g[i * c + j] += self.grad[j * r + i];
  });
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& a, Shape shape) {
  if (shape_numel(shape) != a.numel())
    throw DimensionError("reshape: cannot view " + shape_str(a.shape()) + " as " + shape_str(shape));
  std::vector<T> out(a.values().begin(), a.values().end());
  return detail::make_result<T>(std::move(shape), std::move(out), {a.node_ptr()},
                                [](TensorNode<T>& self) {
                                  auto& p = *self.parents[0];
                                  if (!p.requires_grad) return;
                                  auto& g = p.grad_buffer();
                                  for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
                                });
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "add");
  std::vector<T> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] + b.values()[i];
  return detail::make_result<T>(a.shape(), std::move(out), {a.node_ptr(), b.node_ptr()},
                                [](TensorNode<T>& self) {
                                  for (auto& pp : self.parents) {
                                    if (!pp->requires_grad) continue;
                                    auto& g = pp->grad_buffer();
                                    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
                                  }
                                });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "sub");
  std::vector<T> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] - b.values()[i];
  return detail::make_result<T>(a.shape(), std::move(out), {a.node_ptr(), b.node_ptr()},
                                [](TensorNode<T>& self) {
                                  auto& pa = *self.parents[0];
                                  auto& pb = *self.parents[1];
                                  if (pa.requires_grad) {
                                    auto& g = pa.grad_buffer();
                                    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
                                  }
                                  if (pb.requires_grad) {
                                    auto& g = pb.grad_buffer();
                                    for (std::size_t i = 0; i < g.size(); ++i) g[i] -= self.grad[i];
                                  }
                                });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "mul");
  std::vector<T> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] * b.values()[i];
  return detail::make_result<T>(a.shape(), std::move(out), {a.node_ptr(), b.node_ptr()},
                                [](TensorNode<T>& self) {
                                  auto& pa = *self.parents[0];
                                  auto& pb = *self.parents[1];
                                  if (pa.requires_grad) {
                                    auto& g = pa.grad_buffer();
                                    for (std::size_t i = 0; i < g.size(); ++i)
                                      g[i] += self.grad[i] * pb.value[i];
                                  }
                                  if (pb.requires_grad) {
                                    auto& g = pb.grad_buffer();
                                    for (std::size_t i = 0; i < g.size(); ++i)
                                      g[i] += self.grad[i] * pa.value[i];
                                  }
                                });
}

template <typename T>
Tensor<T> add_bias(const Tensor<T>& x, const Tensor<T>& bias) {
  if (x.rank() == 0 || bias.rank() != 1 || bias.dim(0) != x.shape().back())
    throw DimensionError("add_bias: bias " + shape_str(bias.shape()) + " does not match last axis of " +
                         shape_str(x.shape()));
  const std::size_t d = bias.dim(0), rows = x.numel() / std::max<std::size_t>(d, 1);
  std::vector<T> out(x.values().begin(), x.values().end());
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < d; ++j) out[r * d + j] += bias.values()[j];
  return detail::make_result<T>(x.shape(), std::move(out), {x.node_ptr(), bias.node_ptr()},
                                [rows, d](TensorNode<T>& self) {
                                  auto& px = *self.parents[0];
                                  auto& pb = *self.parents[1];
                                  if (px.requires_grad) {
                                    auto& g = px.grad_buffer();
                                    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
                                  }
                                  if (pb.requires_grad) {
                                    auto& g = pb.grad_buffer();
                                    for (std::size_t r = 0; r < rows; ++r)
                                      for (std::size_t j = 0; j < d; ++j) g[j] += self.grad[r * d + j];
                                  }
                                });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& x, T factor) {
  return unary_elementwise(
      x, [factor](T v) { return v * factor; }, [factor](T, T) { return factor; });
}

template <typename T>
Tensor<T> square(const Tensor<T>& x) {
  return unary_elementwise(
      x, [](T v) { return v * v; }, [](T in, T) { return T(2) * in; });
}

template <typename T>
Tensor<T> abs(const Tensor<T>& x) {
  return unary_elementwise(
      x, [](T v) { return std::abs(v); },
      [](T in, T) { return in > T(0) ? T(1) : (in < T(0) ? T(-1) : T(0)); });
}

template <typename T>
Tensor<T> sum(const Tensor<T>& x) {
  T acc = 0;
  for (T v : x.values()) acc += v;
  return detail::make_result<T>({}, {acc}, {x.node_ptr()}, [](TensorNode<T>& self) {
    auto& p = *self.parents[0];
    if (!p.requires_grad) return;
    auto& g = p.grad_buffer();
    for (auto& gi : g) gi += self.grad[0];
  });
}

template <typename T>
Tensor<T> mean(const Tensor<T>& x) {
  if (x.numel() == 0) throw ContractError("mean of an empty tensor");
  return scale(sum(x), T(1) / static_cast<T>(x.numel()));
}

template <typename T>
Tensor<T> gelu(const Tensor<T>& x) {
  constexpr T kInvSqrt2 = T(0.70710678118654752440);
  constexpr T kInvSqrt2Pi = T(0.39894228040143267794);
  return unary_elementwise(
      x, [=](T v) { return T(0.5) * v * (T(1) + std::erf(v * kInvSqrt2)); },
      [=](T in, T) {
        const T cdf = T(0.5) * (T(1) + std::erf(in * kInvSqrt2));
        return cdf + in * kInvSqrt2Pi * std::exp(T(-0.5) * in * in);
      });
}

namespace {

struct AxisLayout {
  std::size_t outer, len, inner;
};

template <typename T>
AxisLayout axis_layout(const Tensor<T>& x, std::size_t axis, const char* op) {
  if (axis >= x.rank())
    throw DimensionError(std::string(op) + ": axis " + std::to_string(axis) + " invalid for shape " +
                         shape_str(x.shape()));
  AxisLayout l{1, x.dim(axis), 1};
  for (std::size_t i = 0; i < axis; ++i) l.outer *= x.dim(i);
  for (std::size_t i = axis + 1; i < x.rank(); ++i) l.inner *= x.dim(i);
  return l;
}

}  // namespace

template <typename T>
Tensor<T> softmax(const Tensor<T>& x, std::size_t axis) {
  const AxisLayout l = axis_layout(x, axis, "softmax");
  const auto xv = x.values();
  std::vector<T> out(x.numel());
  for (std::size_t o = 0; o < l.outer; ++o)
    for (std::size_t in = 0; in < l.inner; ++in) {
      const std::size_t base = o * l.len * l.inner + in;
      T mx = -std::numeric_limits<T>::infinity();
      for (std::size_t a = 0; a < l.len; ++a) mx = std::max(mx, xv[base + a * l.inner]);
      T z = 0;
      for (std::size_t a = 0; a < l.len; ++a) {
        const T e = std::exp(xv[base + a * l.inner] - mx);
        out[base + a * l.inner] = e;
        z += e;
      }
      for (std::size_t a = 0; a < l.len; ++a) out[base + a * l.inner] /= z;
    }
  return detail::make_result<T>(x.shape(), std::move(out), {x.node_ptr()}, [l](TensorNode<T>& self) {
    auto& p = *self.parents[0];
    if (!p.requires_grad) return;
    auto& g = p.grad_buffer();
    for (std::size_t o = 0; o < l.outer; ++o)
      for (std::size_t in = 0; in < l.inner; ++in) {
        const std::size_t base = o * l.len * l.inner + in;
        T dotp = 0;
        for (std::size_t a = 0; a < l.len; ++a)
          dotp += self.grad[base + a * l.inner] * self.value[base + a * l.inner];
        for (std::size_t a = 0; a < l.len; ++a) {
          const std::size_t i = base + a * l.inner;
          g[i] += self.value[i] * (self.grad[i] - dotp);
        }
      }
  });
}

template <typename T>
Tensor<T> log_softmax(const Tensor<T>& x, std::size_t axis) {
  const AxisLayout l = axis_layout(x, axis, "log_softmax");
  const auto xv = x.values();
  std::vector<T> out(x.numel());
  for (std::size_t o = 0; o < l.outer; ++o)
    for (std::size_t in = 0; in < l.inner; ++in) {
      const std::size_t base = o * l.len * l.inner + in;
      T mx = -std::numeric_limits<T>::infinity();
      for (std::size_t a = 0; a < l.len; ++a) mx = std::max(mx, xv[base + a * l.inner]);
      T z = 0;
      for (std::size_t a = 0; a < l.len; ++a) z += std::exp(xv[base + a * l.inner] - mx);
      const T lse = mx + std::log(z);
      for (std::size_t a = 0; a < l.len; ++a) out[base + a * l.inner] = xv[base + a * l.inner] - lse;
    }
  return detail::make_result<T>(x.shape(), std::move(out), {x.node_ptr()}, [l](TensorNode<T>& self) {
    auto& p = *self.parents[0];
    if (!p.requires_grad) return;
    auto& g = p.grad_buffer();
    for (std::size_t o = 0; o < l.outer; ++o)
      for (std::size_t in = 0; in < l.inner; ++in) {
        const std::size_t base = o * l.len * l.inner + in;
        T gsum = 0;
        for (std::size_t a = 0; a < l.len; ++a) gsum += self.grad[base + a * l.inner];
        for (std::size_t a = 0; a < l.len; ++a) {
          const std::size_t i = base + a * l.inner;
          g[i] += self.grad[i] - std::exp(self.value[i]) * gsum;
        }
      }
  });
}

template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gain, const Tensor<T>& bias, T eps) {
  if (x.rank() == 0 || gain.rank() != 1 || bias.rank() != 1 || gain.dim(0) != x.shape().back() ||
      bias.dim(0) != x.shape().back())
    throw DimensionError("layer_norm: gain " + shape_str(gain.shape()) + " / bias " +
                         shape_str(bias.shape()) + " do not match last axis of " + shape_str(x.shape()));
  const std::size_t d = x.shape().back();
  const std::size_t rows = x.numel() / d;
  const auto xv = x.values();
  const auto gv = gain.values();
  const auto bv = bias.values();
  std::vector<T> out(x.numel()), xhat(x.numel()), rstd(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const T* row = xv.data() + r * d;
    T shift = 0;
    for (std::size_t j = 0; j < d; ++j) shift += row[j] - row[0];
    const T mu = row[0] + shift / static_cast<T>(d);
    T var = 0;
    for (std::size_t j = 0; j < d; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= static_cast<T>(d);
    rstd[r] = T(1) / std::sqrt(var + eps);
    for (std::size_t j = 0; j < d; ++j) {
      const T h = (row[j] - mu) * rstd[r];
      xhat[r * d + j] = h;
      out[r * d + j] = h * gv[j] + bv[j];
    }
  }
  return detail::make_result<T>(
      x.shape(), std::move(out), {x.node_ptr(), gain.node_ptr(), bias.node_ptr()},
      [rows, d, xhat = std::move(xhat), rstd = std::move(rstd)](TensorNode<T>& self) {
        auto& px = *self.parents[0];
        auto& pg = *self.parents[1];
        auto& pb = *self.parents[2];
        if (pg.requires_grad) {
          auto& g = pg.grad_buffer();
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t j = 0; j < d; ++j) g[j] += self.grad[r * d + j] * xhat[r * d + j];
        }
        if (pb.requires_grad) {
          auto& g = pb.grad_buffer();
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t j = 0; j < d; ++j) g[j] += self.grad[r * d + j];
        }
        if (px.requires_grad) {
          auto& g = px.grad_buffer();
          const T inv_d = T(1) / static_cast<T>(d);
          for (std::size_t r = 0; r < rows; ++r) {
            T mean_dh = 0, mean_dh_h = 0;
            for (std::size_t j = 0; j < d; ++j) {
              const T dh = self.grad[r * d + j] * pg.value[j];
              mean_dh += dh;
              mean_dh_h += dh * xhat[r * d + j];
            }
            mean_dh *= inv_d;
            mean_dh_h *= inv_d;
            for (std::size_t j = 0; j < d; ++j) {
              const T dh = self.grad[r * d + j] * pg.value[j];
              g[r * d + j] += rstd[r] * (dh - mean_dh - xhat[r * d + j] * mean_dh_h);
            }
          }
        }
      });
}

template <typename T>
Tensor<T> select_rows(const Tensor<T>& x, std::span<const std::int64_t> rows) {
  require_rank(x, 2, "select_rows");
  const std::size_t n = x.dim(0), d = x.dim(1);
  std::vector<std::int64_t> idx(rows.begin(), rows.end());
  std::vector<T> out(idx.size() * d);
  for (std::size_t r = 0; r < idx.size(); ++r) {
    if (idx[r] < 0 || static_cast<std::size_t>(idx[r]) >= n)
      throw DimensionError("select_rows: row index " + std::to_string(idx[r]) + " out of range for " +
                           shape_str(x.shape()));
    std::copy_n(x.values().data() + idx[r] * d, d, out.data() + r * d);
  }
  Shape shape{idx.size(), d};
  return detail::make_result<T>(std::move(shape), std::move(out), {x.node_ptr()},
                                [idx = std::move(idx), d](TensorNode<T>& self) {
                                  auto& p = *self.parents[0];
                                  if (!p.requires_grad) return;
                                  auto& g = p.grad_buffer();
                                  for (std::size_t r = 0; r < idx.size(); ++r)
                                    for (std::size_t j = 0; j < d; ++j)
                                      g[idx[r] * d + j] += self.grad[r * d + j];
                                });
}

template <typename T>
Tensor<T> fill_rows(const Tensor<T>& source, const Tensor<T>& fill,
                    std::span<const std::int64_t> slot) {
  require_rank(source, 2, "fill_rows");
  const std::size_t d = source.dim(1);
  if (fill.numel() != d)
    throw DimensionError("fill_rows: fill " + shape_str(fill.shape()) + " does not match source " +
                         shape_str(source.shape()));
  std::vector<std::int64_t> map(slot.begin(), slot.end());
  std::vector<T> out(map.size() * d);
  for (std::size_t r = 0; r < map.size(); ++r) {
    if (map[r] >= static_cast<std::int64_t>(source.dim(0)))
      throw DimensionError("fill_rows: slot " + std::to_string(map[r]) + " out of range for " +
                           shape_str(source.shape()));
    const T* src = map[r] >= 0 ? source.values().data() + map[r] * d : fill.values().data();
    std::copy_n(src, d, out.data() + r * d);
  }
  Shape shape{map.size(), d};
  return detail::make_result<T>(std::move(shape), std::move(out), {source.node_ptr(), fill.node_ptr()},
                                [map = std::move(map), d](TensorNode<T>& self) {
                                  auto& ps = *self.parents[0];
                                  auto& pf = *self.parents[1];
                                  for (std::size_t r = 0; r < map.size(); ++r) {
                                    const T* gr = self.grad.data() + r * d;
                                    if (map[r] >= 0) {
                                      if (!ps.requires_grad) continue;
                                      T* dst = ps.grad_buffer().data() + map[r] * d;
                                      for (std::size_t j = 0; j < d; ++j) dst[j] += gr[j];
                                    } else if (pf.requires_grad) {
                                      T* dst = pf.grad_buffer().data();
                                      for (std::size_t j = 0; j < d; ++j) dst[j] += gr[j];
                                    }
                                  }
                                });
}

template <typename T>
Tensor<T> slice_cols(const Tensor<T>& x, std::size_t begin, std::size_t end) {
  require_rank(x, 2, "slice_cols");
  const std::size_t rows = x.dim(0), cols = x.dim(1);
  if (begin > end || end > cols)
    throw DimensionError("slice_cols: [" + std::to_string(begin) + "," + std::to_string(end) +
                         ") invalid for " + shape_str(x.shape()));
  const std::size_t w = end - begin;
  std::vector<T> out(rows * w);
  for (std::size_t r = 0; r < rows; ++r)
    std::copy_n(x.values().data() + r * cols + begin, w, out.data() + r * w);
  return detail::make_result<T>({rows, w}, std::move(out), {x.node_ptr()},
                                [rows, cols, begin, w](TensorNode<T>& self) {
                                  auto& p = *self.parents[0];
                                  if (!p.requires_grad) return;
                                  auto& g = p.grad_buffer();
                                  for (std::size_t r = 0; r < rows; ++r)
                                    for (std::size_t j = 0; j < w; ++j)
                                      g[r * cols + begin + j] += self.grad[r * w + j];
                                });
}

template <typename T>
Tensor<T> nll_rows(const Tensor<T>& logp, std::span<const std::int64_t> target,
                   std::span<const std::uint8_t> valid) {
  require_rank(logp, 2, "nll_rows");
  const std::size_t rows = logp.dim(0), cols = logp.dim(1);
  if (target.size() != rows || valid.size() != rows)
    throw DimensionError("nll_rows: " + std::to_string(target.size()) + " targets / " +
                         std::to_string(valid.size()) + " flags for " + shape_str(logp.shape()));
  std::vector<std::int64_t> tgt(target.begin(), target.end());
  std::vector<std::uint8_t> ok(valid.begin(), valid.end());
  std::size_t count = 0;
  T acc = 0;
  for (std::size_t r = 0; r < rows; ++r) {
    if (!ok[r]) continue;
    if (tgt[r] < 0 || static_cast<std::size_t>(tgt[r]) >= cols)
      throw DimensionError("nll_rows: target " + std::to_string(tgt[r]) + " out of range");
    acc -= logp.values()[r * cols + tgt[r]];
    ++count;
  }
  if (count == 0) throw ContractError("nll_rows: no valid rows");
  const T inv = T(1) / static_cast<T>(count);
  return detail::make_result<T>({}, {acc * inv}, {logp.node_ptr()},
                                [tgt = std::move(tgt), ok = std::move(ok), cols, inv](TensorNode<T>& self) {
                                  auto& p = *self.parents[0];
                                  if (!p.requires_grad) return;
                                  auto& g = p.grad_buffer();
                                  for (std::size_t r = 0; r < tgt.size(); ++r)
                                    if (ok[r]) g[r * cols + tgt[r]] -= self.grad[0] * inv;
                                });
}

namespace {

// Per (token, head, pair): cos/sin of the rotation angle.
struct RopeTable {
  std::vector<double> cos, sin;
};

RopeTable rope_table(std::span<const GridPos> pos, std::size_t head_dim, double base) {
  const std::size_t half = head_dim / 2;
  const std::size_t pairs = half / 2;
  RopeTable t;
  t.cos.resize(pos.size() * 2 * pairs);
  t.sin.resize(pos.size() * 2 * pairs);
  for (std::size_t i = 0; i < pos.size(); ++i)
    for (std::size_t axis = 0; axis < 2; ++axis) {
      const double p = axis == 0 ? pos[i].row : pos[i].col;
      for (std::size_t j = 0; j < pairs; ++j) {
        const double freq = std::pow(base, -2.0 * static_cast<double>(j) / static_cast<double>(half));
        const double angle = p * freq;
        t.cos[(i * 2 + axis) * pairs + j] = std::cos(angle);
        t.sin[(i * 2 + axis) * pairs + j] = std::sin(angle);
      }
    }
  return t;
}

template <typename T>
void rope_apply(const T* in, T* out, std::size_t tokens, std::size_t heads, std::size_t head_dim,
                const RopeTable& t, bool inverse) {
  const std::size_t pairs = head_dim / 4;
  const std::size_t width = heads * head_dim;
  for (std::size_t i = 0; i < tokens; ++i)
    for (std::size_t h = 0; h < heads; ++h)
      for (std::size_t axis = 0; axis < 2; ++axis)
        for (std::size_t j = 0; j < pairs; ++j) {
          const std::size_t c0 = i * width + h * head_dim + axis * (head_dim / 2) + 2 * j;
          const T c = static_cast<T>(t.cos[(i * 2 + axis) * pairs + j]);
          const T s = static_cast<T>(inverse ? -t.sin[(i * 2 + axis) * pairs + j]
                                             : t.sin[(i * 2 + axis) * pairs + j]);
          const T x0 = in[c0], x1 = in[c0 + 1];
          out[c0] = x0 * c - x1 * s;
          out[c0 + 1] = x0 * s + x1 * c;
        }
}

}  // namespace

template <typename T>
Tensor<T> rope_rotate(const Tensor<T>& x, std::size_t heads, std::span<const GridPos> pos,
                      double base) {
  require_rank(x, 2, "rope_rotate");
  if (heads == 0 || x.dim(1) % heads != 0)
    throw DimensionError("rope_rotate: width " + std::to_string(x.dim(1)) + " not divisible by " +
                         std::to_string(heads) + " heads");
  const std::size_t head_dim = x.dim(1) / heads;
  if (head_dim % 4 != 0)
    throw ContractError("rope_rotate: head_dim " + std::to_string(head_dim) +
                        " must be divisible by 4 for axial rotary embedding");
  if (pos.size() != x.dim(0))
    throw DimensionError("rope_rotate: " + std::to_string(pos.size()) + " positions for " +
                         shape_str(x.shape()));
  const std::size_t tokens = x.dim(0);
  auto table = std::make_shared<RopeTable>(rope_table(pos, head_dim, base));
  std::vector<T> out(x.numel());
  rope_apply(x.values().data(), out.data(), tokens, heads, head_dim, *table, false);
  return detail::make_result<T>(x.shape(), std::move(out), {x.node_ptr()},
                                [table, tokens, heads, head_dim](TensorNode<T>& self) {
                                  auto& p = *self.parents[0];
                                  if (!p.requires_grad) return;
                                  std::vector<T> back(self.grad.size());
                                  rope_apply(self.grad.data(), back.data(), tokens, heads, head_dim,
                                             *table, true);
                                  auto& g = p.grad_buffer();
                                  for (std::size_t i = 0; i < g.size(); ++i) g[i] += back[i];
                                });
}

template <typename T>
Tensor<T> attention(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v, std::size_t heads,
                    std::span<const int> group, AttentionCapture* capture) {
  require_rank(q, 2, "attention");
  require_same_shape(q, k, "attention");
  require_same_shape(q, v, "attention");
  const std::size_t tokens = q.dim(0), width = q.dim(1);
  if (heads == 0 || width % heads != 0)
    throw DimensionError("attention: width " + std::to_string(width) + " not divisible by " +
                         std::to_string(heads) + " heads");
  if (group.size() != tokens)
    throw DimensionError("attention: " + std::to_string(group.size()) + " group ids for " +
                         std::to_string(tokens) + " tokens");
  const std::size_t hd = width / heads;
  const T scale_factor = T(1) / std::sqrt(static_cast<T>(hd));

  std::map<int, std::vector<std::size_t>> by_group;
  for (std::size_t i = 0; i < tokens; ++i) by_group[group[i]].push_back(i);
  auto members = std::make_shared<std::vector<std::vector<std::size_t>>>();
  for (auto& [id, list] : by_group) members->push_back(std::move(list));

  // probs[g][h] is the (m x m) attention matrix of group g, head h.
  auto probs = std::make_shared<std::vector<std::vector<std::vector<T>>>>(members->size());
  std::vector<T> out(tokens * width, T(0));
  if (capture) capture->weights.assign(tokens, 0.0);

  const auto qv = q.values(), kv = k.values(), vv = v.values();
  std::vector<T> qg, kg, vg, og;
  for (std::size_t gi = 0; gi < members->size(); ++gi) {
    const auto& mem = (*members)[gi];
    const std::size_t m = mem.size();
    (*probs)[gi].resize(heads);
    qg.resize(m * hd);
    kg.resize(m * hd);
    vg.resize(m * hd);
    std::ptrdiff_t capture_row = -1;
    if (capture)
      for (std::size_t a = 0; a < m; ++a)
        if (mem[a] == capture->query) capture_row = static_cast<std::ptrdiff_t>(a);
    for (std::size_t h = 0; h < heads; ++h) {
      for (std::size_t a = 0; a < m; ++a) {
        std::copy_n(qv.data() + mem[a] * width + h * hd, hd, qg.data() + a * hd);
        std::copy_n(kv.data() + mem[a] * width + h * hd, hd, kg.data() + a * hd);
        std::copy_n(vv.data() + mem[a] * width + h * hd, hd, vg.data() + a * hd);
      }
      auto& p = (*probs)[gi][h];
      p.assign(m * m, T(0));
      kernels::gemm_nt<T>(m, m, hd, qg.data(), kg.data(), p.data());
      for (std::size_t a = 0; a < m; ++a) {
        T* row = p.data() + a * m;
        T mx = -std::numeric_limits<T>::infinity();
        for (std::size_t b = 0; b < m; ++b) {
          row[b] *= scale_factor;
          mx = std::max(mx, row[b]);
        }
        T z = 0;
        for (std::size_t b = 0; b < m; ++b) {
          row[b] = std::exp(row[b] - mx);
          z += row[b];
        }
        for (std::size_t b = 0; b < m; ++b) row[b] /= z;
      }
      og.assign(m * hd, T(0));
      kernels::gemm_nn<T>(m, hd, m, p.data(), vg.data(), og.data());
      for (std::size_t a = 0; a < m; ++a)
        std::copy_n(og.data() + a * hd, hd, out.data() + mem[a] * width + h * hd);
      if (capture_row >= 0)
        for (std::size_t b = 0; b < m; ++b)
          capture->weights[mem[b]] += static_cast<double>(p[capture_row * m + b]) / heads;
    }
  }

  return detail::make_result<T>(
      q.shape(), std::move(out), {q.node_ptr(), k.node_ptr(), v.node_ptr()},
      [members, probs, heads, hd, width, scale_factor](TensorNode<T>& self) {
        auto& pq = *self.parents[0];
        auto& pk = *self.parents[1];
        auto& pv = *self.parents[2];
        std::vector<T> qg, kg, vg, dog, dp, dq, dk, dv;
        for (std::size_t gi = 0; gi < members->size(); ++gi) {
          const auto& mem = (*members)[gi];
          const std::size_t m = mem.size();
          qg.resize(m * hd);
          kg.resize(m * hd);
          vg.resize(m * hd);
          dog.resize(m * hd);
          for (std::size_t h = 0; h < heads; ++h) {
            for (std::size_t a = 0; a < m; ++a) {
              const std::size_t off = mem[a] * width + h * hd;
              std::copy_n(pq.value.data() + off, hd, qg.data() + a * hd);
              std::copy_n(pk.value.data() + off, hd, kg.data() + a * hd);
              std::copy_n(pv.value.data() + off, hd, vg.data() + a * hd);
              std::copy_n(self.grad.data() + off, hd, dog.data() + a * hd);
            }
            const auto& p = (*probs)[gi][h];
            if (pv.requires_grad) {
              dv.assign(m * hd, T(0));
              kernels::gemm_tn<T>(m, hd, m, p.data(), dog.data(), dv.data());
              auto& g = pv.grad_buffer();
              for (std::size_t a = 0; a < m; ++a)
                for (std::size_t j = 0; j < hd; ++j) g[mem[a] * width + h * hd + j] += dv[a * hd + j];
            }
            if (!pq.requires_grad && !pk.requires_grad) continue;
            dp.assign(m * m, T(0));
            kernels::gemm_nt<T>(m, m, hd, dog.data(), vg.data(), dp.data());
            for (std::size_t a = 0; a < m; ++a) {
              T* row = dp.data() + a * m;
              const T* prow = p.data() + a * m;
              T rs = 0;
              for (std::size_t b = 0; b < m; ++b) rs += row[b] * prow[b];
              for (std::size_t b = 0; b < m; ++b) row[b] = prow[b] * (row[b] - rs) * scale_factor;
            }
            if (pq.requires_grad) {
              dq.assign(m * hd, T(0));
              kernels::gemm_nn<T>(m, hd, m, dp.data(), kg.data(), dq.data());
              auto& g = pq.grad_buffer();
              for (std::size_t a = 0; a < m; ++a)
                for (std::size_t j = 0; j < hd; ++j) g[mem[a] * width + h * hd + j] += dq[a * hd + j];
            }
            if (pk.requires_grad) {
              dk.assign(m * hd, T(0));
              kernels::gemm_tn<T>(m, hd, m, dp.data(), qg.data(), dk.data());
              auto& g = pk.grad_buffer();
              for (std::size_t a = 0; a < m; ++a)
                for (std::size_t j = 0; j < hd; ++j) g[mem[a] * width + h * hd + j] += dk[a * hd + j];
            }
          }
        }
      });
}

#define MUM_INSTANTIATE_OPS(T)                                                                      \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);                                    \
  template Tensor<T> transpose(const Tensor<T>&);                                                   \
  template Tensor<T> reshape(const Tensor<T>&, Shape);                                              \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                       \
  template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);                                       \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                                       \
  template Tensor<T> add_bias(const Tensor<T>&, const Tensor<T>&);                                  \
  template Tensor<T> scale(const Tensor<T>&, T);                                                    \
  template Tensor<T> square(const Tensor<T>&);                                                      \
  template Tensor<T> abs(const Tensor<T>&);                                                         \
  template Tensor<T> sum(const Tensor<T>&);                                                         \
  template Tensor<T> mean(const Tensor<T>&);                                                        \
  template Tensor<T> gelu(const Tensor<T>&);                                                        \
  template Tensor<T> softmax(const Tensor<T>&, std::size_t);                                        \
  template Tensor<T> log_softmax(const Tensor<T>&, std::size_t);                                    \
  template Tensor<T> layer_norm(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, T);           \
  template Tensor<T> select_rows(const Tensor<T>&, std::span<const std::int64_t>);                  \
  template Tensor<T> fill_rows(const Tensor<T>&, const Tensor<T>&, std::span<const std::int64_t>);  \
  template Tensor<T> slice_cols(const Tensor<T>&, std::size_t, std::size_t);                        \
  template Tensor<T> nll_rows(const Tensor<T>&, std::span<const std::int64_t>,                      \
                              std::span<const std::uint8_t>);                                       \
  template Tensor<T> rope_rotate(const Tensor<T>&, std::size_t, std::span<const GridPos>, double);  \
  template Tensor<T> attention(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, std::size_t,   \
                               std::span<const int>, AttentionCapture*);

MUM_INSTANTIATE_OPS(float)
MUM_INSTANTIATE_OPS(double)

#undef MUM_INSTANTIATE_OPS

}  // namespace mum

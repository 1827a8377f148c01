// Copyright 2026 The MuM Authors
// SPDX-License-Identifier: Apache-2.0

// AVX2/FMA variants. This translation unit is compiled with -mavx2 -mfma and
// must only be entered after cpu_has_avx2() returned true.

#include <immintrin.h>

#include "mum/kernels.hpp"

namespace mum::kernels {
namespace {

template <typename T>
struct Vec;

template <>
struct Vec<float> {
  using reg = __m256;
  static constexpr std::size_t kWidth = 8;
  static reg zero() { return _mm256_setzero_ps(); }
  static reg set1(float v) { return _mm256_set1_ps(v); }
  static reg load(const float* p) { return _mm256_loadu_ps(p); }
  static void store(float* p, reg v) { _mm256_storeu_ps(p, v); }
  static reg add(reg a, reg b) { return _mm256_add_ps(a, b); }
  static reg fma(reg a, reg b, reg c) { return _mm256_fmadd_ps(a, b, c); }
  static float hsum(reg v) {
    __m128 lo = _mm256_castps256_ps128(v);
    __m128 hi = _mm256_extractf128_ps(v, 1);
    lo = _mm_add_ps(lo, hi);
    __m128 shuf = _mm_movehdup_ps(lo);
    __m128 sums = _mm_add_ps(lo, shuf);
    shuf = _mm_movehl_ps(shuf, sums);
    sums = _mm_add_ss(sums, shuf);
    return _mm_cvtss_f32(sums);
  }
};

template <>
struct Vec<double> {
  using reg = __m256d;
  static constexpr std::size_t kWidth = 4;
  static reg zero() { return _mm256_setzero_pd(); }
  static reg set1(double v) { return _mm256_set1_pd(v); }
  static reg load(const double* p) { return _mm256_loadu_pd(p); }
  static void store(double* p, reg v) { _mm256_storeu_pd(p, v); }
  static reg add(reg a, reg b) { return _mm256_add_pd(a, b); }
  static reg fma(reg a, reg b, reg c) { return _mm256_fmadd_pd(a, b, c); }
  static double hsum(reg v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d high64 = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_add_sd(lo, high64));
  }
};

template <typename T>
T dot_avx2(const T* a, const T* b, std::size_t n) {
  using V = Vec<T>;
  constexpr std::size_t w = V::kWidth;
  auto acc0 = V::zero();
  auto acc1 = V::zero();
  std::size_t i = 0;
  for (; i + 2 * w <= n; i += 2 * w) {
    acc0 = V::fma(V::load(a + i), V::load(b + i), acc0);
    acc1 = V::fma(V::load(a + i + w), V::load(b + i + w), acc1);
  }
  for (; i + w <= n; i += w) acc0 = V::fma(V::load(a + i), V::load(b + i), acc0);
  T acc = V::hsum(V::add(acc0, acc1));
  for (; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

template <typename T>
void axpy_avx2(T alpha, const T* x, T* y, std::size_t n) {
  using V = Vec<T>;
  constexpr std::size_t w = V::kWidth;
  const auto va = V::set1(alpha);
  std::size_t i = 0;
  for (; i + w <= n; i += w) V::store(y + i, V::fma(va, V::load(x + i), V::load(y + i)));
  for (; i < n; ++i) y[i] += alpha * x[i];
}

// 4-row by 2-vector register tile; columns left over after the vector loop
// fall back to scalar accumulation in the same k order.
template <typename T>
void gemm_nn_avx2(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c) {
  using V = Vec<T>;
  constexpr std::size_t w = V::kWidth;
  std::size_t i = 0;
  for (; i + 4 <= m; i += 4) {
    const T* a0 = a + i * k;
    const T* a1 = a0 + k;
    const T* a2 = a1 + k;
    const T* a3 = a2 + k;
    std::size_t j = 0;
    for (; j + 2 * w <= n; j += 2 * w) {
      auto c00 = V::zero(), c01 = V::zero(), c10 = V::zero(), c11 = V::zero();
      auto c20 = V::zero(), c21 = V::zero(), c30 = V::zero(), c31 = V::zero();
      for (std::size_t p = 0; p < k; ++p) {
        const auto b0 = V::load(b + p * n + j);
        const auto b1 = V::load(b + p * n + j + w);
        auto av = V::set1(a0[p]);
        c00 = V::fma(av, b0, c00);
        c01 = V::fma(av, b1, c01);
        av = V::set1(a1[p]);
        c10 = V::fma(av, b0, c10);
        c11 = V::fma(av, b1, c11);
        av = V::set1(a2[p]);
        c20 = V::fma(av, b0, c20);
        c21 = V::fma(av, b1, c21);
        av = V::set1(a3[p]);
        c30 = V::fma(av, b0, c30);
        c31 = V::fma(av, b1, c31);
      }
      T* cr = c + i * n + j;
      V::store(cr, V::add(V::load(cr), c00));
      V::store(cr + w, V::add(V::load(cr + w), c01));
      cr += n;
      V::store(cr, V::add(V::load(cr), c10));
      V::store(cr + w, V::add(V::load(cr + w), c11));
      cr += n;
      V::store(cr, V::add(V::load(cr), c20));
      V::store(cr + w, V::add(V::load(cr + w), c21));
      cr += n;
      V::store(cr, V::add(V::load(cr), c30));
      V::store(cr + w, V::add(V::load(cr + w), c31));
    }
    for (; j + w <= n; j += w) {
      auto c0 = V::zero(), c1 = V::zero(), c2 = V::zero(), c3 = V::zero();
      for (std::size_t p = 0; p < k; ++p) {
        const auto b0 = V::load(b + p * n + j);
        c0 = V::fma(V::set1(a0[p]), b0, c0);
        c1 = V::fma(V::set1(a1[p]), b0, c1);
        c2 = V::fma(V::set1(a2[p]), b0, c2);
        c3 = V::fma(V::set1(a3[p]), b0, c3);
      }
      T* cr = c + i * n + j;
      V::store(cr, V::add(V::load(cr), c0));
      V::store(cr + n, V::add(V::load(cr + n), c1));
      V::store(cr + 2 * n, V::add(V::load(cr + 2 * n), c2));
      V::store(cr + 3 * n, V::add(V::load(cr + 3 * n), c3));
    }
    for (; j < n; ++j) {
      T s0 = 0, s1 = 0, s2 = 0, s3 = 0;
      for (std::size_t p = 0; p < k; ++p) {
        const T bv = b[p * n + j];
        s0 += a0[p] * bv;
        s1 += a1[p] * bv;
        s2 += a2[p] * bv;
        s3 += a3[p] * bv;
      }
      c[i * n + j] += s0;
      c[(i + 1) * n + j] += s1;
      c[(i + 2) * n + j] += s2;
      c[(i + 3) * n + j] += s3;
    }
  }
  for (; i < m; ++i) {
    const T* ar = a + i * k;
    std::size_t j = 0;
    for (; j + w <= n; j += w) {
      auto acc = V::zero();
      for (std::size_t p = 0; p < k; ++p) acc = V::fma(V::set1(ar[p]), V::load(b + p * n + j), acc);
      T* cr = c + i * n + j;
      V::store(cr, V::add(V::load(cr), acc));
    }
    for (; j < n; ++j) {
      T s = 0;
      for (std::size_t p = 0; p < k; ++p) s += ar[p] * b[p * n + j];
      c[i * n + j] += s;
    }
  }
}

template <typename T>
void gemm_nt_avx2(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c) {
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) c[i * n + j] += dot_avx2(a + i * k, b + j * k, k);
}

template <typename T>
void gemm_tn_avx2(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c) {
  for (std::size_t p = 0; p < k; ++p) {
    const T* arow = a + p * m;
    const T* brow = b + p * n;
    for (std::size_t i = 0; i < m; ++i) axpy_avx2(arow[i], brow, c + i * n, n);
  }
}

}  // namespace

template <typename T>
const KernelTable<T>* avx2_table() {
  static const KernelTable<T> table{&dot_avx2<T>, &axpy_avx2<T>, &gemm_nn_avx2<T>,
                                    &gemm_nt_avx2<T>, &gemm_tn_avx2<T>};
  return &table;
}

template const KernelTable<float>* avx2_table<float>();
template const KernelTable<double>* avx2_table<double>();

}  // namespace mum::kernels

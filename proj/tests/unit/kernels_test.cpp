// Copyright 2026 The MuM Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "mum/kernels.hpp"

namespace {

using mum::kernels::KernelTable;

template <typename T>
std::vector<T> rand_vec(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  std::vector<T> v(n);
  for (auto& x : v) x = static_cast<T>(d(rng));
  return v;
}

template <typename T>
double max_abs_diff(const std::vector<T>& a, const std::vector<T>& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(double(a[i]) - double(b[i])));
  return m;
}

// Compares every AVX2 routine with the scalar reference on shapes that hit the
// vector body, the 4-row tile, and every remainder path.
template <typename T>
void check_equivalence(double tol) {
  const KernelTable<T>* fast = mum::kernels::avx2_table<T>();
  if (!fast || !mum::kernels::cpu_has_avx2()) {
    MESSAGE("AVX2 kernels unavailable; equivalence check skipped");
    return;
  }
  const KernelTable<T>& ref = mum::kernels::scalar_table<T>();
  std::mt19937_64 rng(42);
  const std::size_t sizes[] = {1, 3, 4, 5, 7, 8, 9, 15, 16, 17, 31, 33, 64};
  for (std::size_t n : sizes) {
    auto a = rand_vec<T>(n, rng), b = rand_vec<T>(n, rng);
    CHECK(std::abs(double(ref.dot(a.data(), b.data(), n)) - double(fast->dot(a.data(), b.data(), n))) <
          tol * n);
    auto y1 = rand_vec<T>(n, rng);
    auto y2 = y1;
    ref.axpy(T(0.37), a.data(), y1.data(), n);
    fast->axpy(T(0.37), a.data(), y2.data(), n);
    CHECK(max_abs_diff(y1, y2) < tol);
  }
  for (std::size_t m : {1, 2, 4, 5, 9}) {
    for (std::size_t n : sizes) {
      for (std::size_t k : {1, 3, 8, 13}) {
        auto a = rand_vec<T>(m * k, rng), b = rand_vec<T>(k * n, rng), bt = rand_vec<T>(n * k, rng);
        auto at = rand_vec<T>(k * m, rng);
        auto c0 = rand_vec<T>(m * n, rng);
        auto c1 = c0, c2 = c0;
        ref.gemm_nn(m, n, k, a.data(), b.data(), c1.data());
        fast->gemm_nn(m, n, k, a.data(), b.data(), c2.data());
        CHECK(max_abs_diff(c1, c2) < tol * k);
        c1 = c0;
        c2 = c0;
        ref.gemm_nt(m, n, k, a.data(), bt.data(), c1.data());
        fast->gemm_nt(m, n, k, a.data(), bt.data(), c2.data());
        CHECK(max_abs_diff(c1, c2) < tol * k);
        c1 = c0;
        c2 = c0;
        ref.gemm_tn(m, n, k, at.data(), b.data(), c1.data());
        fast->gemm_tn(m, n, k, at.data(), b.data(), c2.data());
        CHECK(max_abs_diff(c1, c2) < tol * k);
      }
    }
  }
}

}  // namespace

TEST_CASE("scalar and AVX2 kernels agree (double)") { check_equivalence<double>(1e-13); }
TEST_CASE("scalar and AVX2 kernels agree (float)") { check_equivalence<float>(1e-5); }

TEST_CASE("scalar gemm matches the textbook triple loop") {
  const auto& ref = mum::kernels::scalar_table<double>();
  const std::vector<double> a{1, 2, 3, 4, 5, 6};  // 2x3
  const std::vector<double> b{7, 8, 9, 10, 11, 12};  // 3x2
  std::vector<double> c(4, 0.0);
  ref.gemm_nn(2, 2, 3, a.data(), b.data(), c.data());
  CHECK(c == std::vector<double>{58, 64, 139, 154});
}

TEST_CASE("backend can be forced and restored") {
  const auto before = mum::kernels::active_backend();
  mum::kernels::set_backend(mum::kernels::Backend::kScalar);
  CHECK(mum::kernels::active_backend() == mum::kernels::Backend::kScalar);
  if (!mum::kernels::cpu_has_avx2())
    CHECK_THROWS(mum::kernels::set_backend(mum::kernels::Backend::kAvx2));
  mum::kernels::set_backend(before);
}

// Copyright 2026 The MuM Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <string_view>

// Dense inner-loop kernels. Every routine has a scalar reference version and,
// where the CPU supports it, an AVX2/FMA version. The variant is chosen once at
// first use (or forced through set_backend / the MUM_KERNELS environment
// variable) and stays fixed for the life of the process, so results are
// reproducible run to run on the same machine.
//
// All matrices are dense row-major. The gemm routines accumulate into C.

namespace mum::kernels {

enum class Backend { kScalar, kAvx2 };

template <typename T>
struct KernelTable {
  T (*dot)(const T* a, const T* b, std::size_t n);
  // y += alpha * x
  void (*axpy)(T alpha, const T* x, T* y, std::size_t n);
  // C(MxN) += A(MxK) * B(KxN)
  void (*gemm_nn)(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c);
  // C(MxN) += A(MxK) * B(NxK)^T
  void (*gemm_nt)(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c);
  // C(MxN) += A(KxM)^T * B(KxN)
  void (*gemm_tn)(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c);
};

template <typename T>
const KernelTable<T>& scalar_table();

// Returns nullptr when the variant was not compiled in.
template <typename T>
const KernelTable<T>* avx2_table();

bool cpu_has_avx2();

// Variant in use by the free functions below.
Backend active_backend();
// Forces a backend. Requesting kAvx2 on a machine without it is an error.
void set_backend(Backend b);
std::string_view backend_name(Backend b);

template <typename T>
const KernelTable<T>& active_table();

template <typename T>
inline T dot(const T* a, const T* b, std::size_t n) {
  return active_table<T>().dot(a, b, n);
}
template <typename T>
inline void axpy(T alpha, const T* x, T* y, std::size_t n) {
  active_table<T>().axpy(alpha, x, y, n);
}
template <typename T>
inline void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c) {
  active_table<T>().gemm_nn(m, n, k, a, b, c);
}
template <typename T>
inline void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c) {
  active_table<T>().gemm_nt(m, n, k, a, b, c);
}
template <typename T>
inline void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c) {
  active_table<T>().gemm_tn(m, n, k, a, b, c);
}

}  // namespace mum::kernels

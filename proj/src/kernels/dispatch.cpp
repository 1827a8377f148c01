// Copyright 2026 The MuM Authors
// SPDX-License-Identifier: Apache-2.0

#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

#include "mum/kernels.hpp"

namespace mum::kernels {

#ifndef MUM_HAVE_AVX2
template <typename T>
const KernelTable<T>* avx2_table() {
  return nullptr;
}
template const KernelTable<float>* avx2_table<float>();
template const KernelTable<double>* avx2_table<double>();
#endif

bool cpu_has_avx2() {
#if defined(MUM_HAVE_AVX2) && (defined(__x86_64__) || defined(__i386__))
  static const bool has = [] {
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  }();
  return has;
#else
  return false;
#endif
}

namespace {

Backend detect_backend() {
  if (const char* env = std::getenv("MUM_KERNELS")) {
    const std::string v(env);
    if (v == "scalar") return Backend::kScalar;
    if (v == "avx2" && !cpu_has_avx2())
      throw std::runtime_error("MUM_KERNELS=avx2 requested but the CPU or build lacks AVX2/FMA");
  }
  return cpu_has_avx2() ? Backend::kAvx2 : Backend::kScalar;
}

std::atomic<int>& backend_slot() {
  static std::atomic<int> slot{static_cast<int>(detect_backend())};
  return slot;
}

}  // namespace

Backend active_backend() { return static_cast<Backend>(backend_slot().load(std::memory_order_relaxed)); }

void set_backend(Backend b) {
  if (b == Backend::kAvx2 && !cpu_has_avx2())
    throw std::runtime_error("AVX2 kernels are not available on this machine");
  backend_slot().store(static_cast<int>(b), std::memory_order_relaxed);
}

std::string_view backend_name(Backend b) { return b == Backend::kAvx2 ? "avx2" : "scalar"; }

template <typename T>
const KernelTable<T>& active_table() {
  if (active_backend() == Backend::kAvx2) return *avx2_table<T>();
  return scalar_table<T>();
}

template const KernelTable<float>& active_table<float>();
template const KernelTable<double>& active_table<double>();

}  // namespace mum::kernels

// Copyright 2026 The MuM Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "mum/tensor.hpp"

namespace mum {

/// Outcome of comparing reverse-mode gradients against central differences.
///
/// Error for entry i of an input is |analytic - numeric| divided by
/// max(|analytic|, |numeric|, floor), where floor is 1e-2 times the largest
/// gradient magnitude seen on that input. Entries more than two orders of
/// magnitude below the input's gradient scale are therefore judged relative
/// to that scale rather than to their own (noise-dominated) size.
///
/// An entry whose one-sided slopes disagree (a kink or jump at that point) is
/// reported in `non_checkable` and excluded from the error.
struct GradCheckReport {
  std::vector<double> max_rel_error;                  // per input
  std::vector<std::vector<std::size_t>> non_checkable;  // per input, flat indices
  double worst() const;
  bool passed(double tolerance) const { return worst() < tolerance; }
};

/// `fn` must read the given inputs (which are perturbed in place) and return a
/// scalar. Throws ContractError if it does not.
GradCheckReport grad_check(const std::function<Tensor<double>()>& fn,
                           std::vector<Tensor<double>> inputs, double eps = 1e-6);

}  // namespace mum

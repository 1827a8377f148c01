// Copyright 2026 The MuM Authors
// SPDX-License-Identifier: Apache-2.0

#include "mum/grad_check.hpp"

#include <algorithm>
#include <cmath>

namespace mum {

double GradCheckReport::worst() const {
  double w = 0.0;
  for (double e : max_rel_error) w = std::max(w, e);
  return w;
}

GradCheckReport grad_check(const std::function<Tensor<double>()>& fn,
                           std::vector<Tensor<double>> inputs, double eps) {
  if (!(eps > 0.0)) throw ContractError("grad_check: eps must be positive");
  for (auto& in : inputs) {
    in.set_requires_grad(true);
    in.zero_grad();
  }
  const Tensor<double> out = fn();
  if (out.numel() != 1)
    throw ContractError("grad_check: function output must be scalar, got shape " +
                        shape_str(out.shape()));
  out.backward();

  GradCheckReport report;
  NoGradGuard no_grad;
  const auto eval = [&] { return fn().item(); };
  const double f0 = eval();
  for (auto& in : inputs) {
    const std::vector<double> analytic = in.grad();
    std::vector<double> numeric(in.numel());
    std::vector<std::size_t> kinks;
    auto values = in.mutable_values();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double x0 = values[i];
      values[i] = x0 + eps;
      const double fp = eval();
      values[i] = x0 - eps;
      const double fm = eval();
      values[i] = x0;
      numeric[i] = (fp - fm) / (2.0 * eps);
      const double fwd = (fp - f0) / eps;
      const double bwd = (f0 - fm) / eps;
      if (std::abs(fwd - bwd) > 1e-3 * std::max({1.0, std::abs(fwd), std::abs(bwd)}))
        kinks.push_back(i);
    }
    double scale = 0.0;
    for (std::size_t i = 0; i < numeric.size(); ++i)
      scale = std::max({scale, std::abs(analytic[i]), std::abs(numeric[i])});
    const double floor = std::max(1e-2 * scale, 1e-12);
    double worst = 0.0;
    for (std::size_t i = 0; i < numeric.size(); ++i) {
      if (std::binary_search(kinks.begin(), kinks.end(), i)) continue;
      const double denom = std::max({std::abs(analytic[i]), std::abs(numeric[i]), floor});
      worst = std::max(worst, std::abs(analytic[i] - numeric[i]) / denom);
    }
    report.max_rel_error.push_back(worst);
    report.non_checkable.push_back(std::move(kinks));
  }
  return report;
}

}  // namespace mum

// Copyright 2026 The MuM Authors
// SPDX-License-Identifier: Apache-2.0

#include "mum/probe.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "mum/errors.hpp"
#include "mum/ops.hpp"
#include "mum/rng.hpp"
#include "mum/training.hpp"

namespace mum {

std::vector<std::string> ProbeConfig::problems() const {
  std::vector<std::string> out;
  if (!(temperature > 0.0)) out.push_back("probe.temperature must be positive");
  if (!(probe_lr >= 0.0)) out.push_back("probe.probe_lr must be non-negative");
  if (!(weight_decay >= 0.0)) out.push_back("probe.weight_decay must be non-negative");
  if (eval_interval == 0) out.push_back("probe.eval_interval must be positive");
  if (batch_pairs == 0) out.push_back("probe.batch_pairs must be positive");
  return out;
}

void ProbeConfig::validate() const {
  const auto p = problems();
  if (p.empty()) return;
  std::string msg;
  for (const auto& s : p) msg += (msg.empty() ? "" : "; ") + s;
  throw ConfigError(msg);
}

std::vector<std::array<double, 2>> patch_centers(const PatchGrid& grid) {
  std::vector<std::array<double, 2>> c;
  c.reserve(grid.num_patches());
  const double half = static_cast<double>(grid.patch_size / 2);
  for (std::size_t r = 0; r < grid.grid_h; ++r)
    for (std::size_t k = 0; k < grid.grid_w; ++k)
      c.push_back({static_cast<double>(k * grid.patch_size) + half, static_cast<double>(r * grid.patch_size) + half});
  return c;
}

namespace {

void check_features(const Tensor<double>& a, const Tensor<double>& b, const PatchGrid& grid) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(1))
    throw DimensionError("match: features " + shape_str(a.shape()) + " and " + shape_str(b.shape()) +
                         " must be (N, width) with equal widths");
  if (a.dim(0) != grid.num_patches() || b.dim(0) != grid.num_patches())
    throw DimensionError("match: feature rows do not match the " + std::to_string(grid.num_patches()) +
                         "-patch grid");
}

WarpEstimate empty_estimate(const PatchGrid& grid, MatchMode mode) {
  WarpEstimate est;
  est.grid_h = grid.grid_h;
  est.grid_w = grid.grid_w;
  est.coords.assign(grid.num_patches() * 2, 0.0);
  est.valid.assign(grid.num_patches(), 1);
  est.mode = mode;
  return est;
}

Tensor<double> similarity_logits(const Tensor<double>& a, const Tensor<double>& b, const Tensor<double>& p,
                                 double temperature) {
  const Tensor<double> pa = matmul(a, p);
  const Tensor<double> pb = matmul(b, p);
  return scale(matmul(pa, transpose(pb)), 1.0 / temperature);
}

}  // namespace

WarpEstimate kernel_match(const Tensor<double>& feat_a, const Tensor<double>& feat_b,
                          const Tensor<double>& projection, double temperature, const PatchGrid& grid,
                          MatchMode mode) {
  check_features(feat_a, feat_b, grid);
  if (projection.rank() != 2 || projection.dim(0) != feat_a.dim(1) || projection.dim(0) != projection.dim(1))
    throw DimensionError("kernel_match: projection " + shape_str(projection.shape()) + " must be square of width " +
                         std::to_string(feat_a.dim(1)));
  if (!(temperature > 0.0)) throw ContractError("kernel_match: temperature must be positive");
  NoGradGuard guard;
  const std::size_t n = grid.num_patches();
  const auto centers = patch_centers(grid);
  WarpEstimate est = empty_estimate(grid, mode);
  const Tensor<double> logits = similarity_logits(feat_a, feat_b, projection, temperature);
  if (mode == MatchMode::hard) {
    const auto s = logits.values();
    for (std::size_t i = 0; i < n; ++i) {
      const auto row = s.subspan(i * n, n);
      const std::size_t j = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
      est.coords[2 * i] = centers[j][0];
      est.coords[2 * i + 1] = centers[j][1];
    }
  } else {
    const Tensor<double> w = softmax(logits, 1);
    const auto wv = w.values();
    for (std::size_t i = 0; i < n; ++i) {
      double x = 0.0, y = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        x += wv[i * n + j] * centers[j][0];
        y += wv[i * n + j] * centers[j][1];
      }
      est.coords[2 * i] = x;
      est.coords[2 * i + 1] = y;
    }
  }
  return est;
}

WarpEstimate cosine_match(const Tensor<double>& feat_a, const Tensor<double>& feat_b, const PatchGrid& grid,
                          bool apply_norm) {
  check_features(feat_a, feat_b, grid);
  const std::size_t n = grid.num_patches(), w = feat_a.dim(1);
  auto prepare = [&](const Tensor<double>& f) {
    std::vector<double> out(f.values().begin(), f.values().end());
    std::vector<std::uint8_t> ok(n, 1);
    for (std::size_t i = 0; i < n; ++i) {
      double* row = out.data() + i * w;
      if (apply_norm) {
        double mean = 0.0;
        for (std::size_t k = 0; k < w; ++k) mean += row[k] - row[0];
        mean = row[0] + mean / static_cast<double>(w);
        double var = 0.0;
        for (std::size_t k = 0; k < w; ++k) var += (row[k] - mean) * (row[k] - mean);
        const double sd = std::sqrt(var / static_cast<double>(w));
        for (std::size_t k = 0; k < w; ++k) row[k] = sd > 0.0 ? (row[k] - mean) / sd : 0.0;
      }
      double norm = 0.0;
      for (std::size_t k = 0; k < w; ++k) norm += row[k] * row[k];
      norm = std::sqrt(norm);
      if (norm == 0.0) {
        ok[i] = 0;
        continue;
      }
      for (std::size_t k = 0; k < w; ++k) row[k] /= norm;
    }
    return std::make_pair(out, ok);
  };
  const auto [a, a_ok] = prepare(feat_a);
  const auto [b, b_ok] = prepare(feat_b);
  const auto centers = patch_centers(grid);
  WarpEstimate est = empty_estimate(grid, MatchMode::hard);
  for (std::size_t i = 0; i < n; ++i) {
    double best = -std::numeric_limits<double>::infinity();
    std::size_t arg = n;
    if (a_ok[i]) {
      for (std::size_t j = 0; j < n; ++j) {
        if (!b_ok[j]) continue;
        double s = 0.0;
        for (std::size_t k = 0; k < w; ++k) s += a[i * w + k] * b[j * w + k];
        if (s > best) {
          best = s;
          arg = j;
        }
      }
    }
    if (arg == n) {
      est.valid[i] = 0;
      continue;
    }
    est.coords[2 * i] = centers[arg][0];
    est.coords[2 * i + 1] = centers[arg][1];
  }
  return est;
}

namespace {

// Ground truth at the pixel holding each patch center.
void gt_at_center(const GroundTruthWarp& gt, const PatchGrid& grid, std::size_t i, double& x, double& y, bool& ok) {
  const std::size_t ps = grid.patch_size;
  const std::size_t px = (i % grid.grid_w) * ps + ps / 2;
  const std::size_t py = (i / grid.grid_w) * ps + ps / 2;
  ok = gt.is_valid(py, px);
  x = gt.x(py, px);
  y = gt.y(py, px);
}

void check_gt(const GroundTruthWarp& gt, const PatchGrid& grid) {
  if (gt.height != grid.height() || gt.width != grid.width())
    throw DimensionError("ground truth is " + std::to_string(gt.height) + "x" + std::to_string(gt.width) +
                         " but the grid covers " + std::to_string(grid.height()) + "x" + std::to_string(grid.width()));
}

}  // namespace

MatchMetrics match_metrics(const WarpEstimate& est, const GroundTruthWarp& gt, const PatchGrid& grid) {
  check_gt(gt, grid);
  if (est.grid_h != grid.grid_h || est.grid_w != grid.grid_w)
    throw DimensionError("match_metrics: estimate grid does not match");
  MatchMetrics m;
  double total = 0.0;
  std::size_t robust = 0;
  for (std::size_t i = 0; i < est.size(); ++i) {
    double x, y;
    bool ok;
    gt_at_center(gt, grid, i, x, y, ok);
    if (!ok || !est.valid[i]) continue;
    const double e = std::hypot(est.coords[2 * i] - x, est.coords[2 * i + 1] - y);
    total += e;
    robust += e < 32.0;
    ++m.n_valid;
  }
  if (m.n_valid == 0) throw EvaluationError("match_metrics: no valid points for " + gt.source_id + " -> " + gt.target_id);
  m.epe = total / static_cast<double>(m.n_valid);
  m.robustness = static_cast<double>(robust) / static_cast<double>(m.n_valid);
  return m;
}

MatchMetrics pool_metrics(std::span<const MatchMetrics> parts) {
  MatchMetrics m;
  double epe = 0.0, rob = 0.0;
  for (const auto& p : parts) {
    epe += p.epe * static_cast<double>(p.n_valid);
    rob += p.robustness * static_cast<double>(p.n_valid);
    m.n_valid += p.n_valid;
  }
  if (m.n_valid == 0) throw EvaluationError("no valid points to pool");
  m.epe = epe / static_cast<double>(m.n_valid);
  m.robustness = rob / static_cast<double>(m.n_valid);
  return m;
}

GroundTruthWarp to_ground_truth_layout(const WarpEstimate& est, std::string source_id, std::string target_id) {
  GroundTruthWarp g;
  g.source_id = std::move(source_id);
  g.target_id = std::move(target_id);
  g.height = est.grid_h;
  g.width = est.grid_w;
  g.warp = est.coords;
  g.valid = est.valid;
  return g;
}

std::vector<std::int64_t> nearest_target_patch(const GroundTruthWarp& gt, const PatchGrid& grid) {
  check_gt(gt, grid);
  const auto centers = patch_centers(grid);
  std::vector<std::int64_t> out(grid.num_patches(), -1);
  for (std::size_t i = 0; i < out.size(); ++i) {
    double x, y;
    bool ok;
    gt_at_center(gt, grid, i, x, y, ok);
    if (!ok) continue;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < centers.size(); ++j) {
      const double d = std::hypot(centers[j][0] - x, centers[j][1] - y);
      if (d < best) {
        best = d;
        out[i] = static_cast<std::int64_t>(j);
      }
    }
  }
  return out;
}

Tensor<double> initial_projection(std::size_t width, std::uint64_t seed) {
  Rng rng = derive_rng(seed, {0x70726f6265ULL});
  std::normal_distribution<double> n(0.0, 1.0 / static_cast<double>(width));
  std::vector<double> v(width * width);
  for (auto& x : v) x = n(rng);
  return Tensor<double>::from({width, width}, std::move(v));
}

namespace {

struct Supervision {
  std::vector<std::int64_t> target;
  std::vector<std::uint8_t> valid;
  bool any = false;
};

Supervision supervise(const ProbePair& p, const PatchGrid& grid) {
  Supervision s;
  s.target = nearest_target_patch(p.gt, grid);
  s.valid.resize(s.target.size());
  for (std::size_t i = 0; i < s.target.size(); ++i) {
    s.valid[i] = s.target[i] >= 0;
    s.any |= s.valid[i] != 0;
    if (s.target[i] < 0) s.target[i] = 0;
  }
  return s;
}

std::vector<MatchMetrics> evaluate(std::span<const ProbePair> pairs, const Tensor<double>& p, const PatchGrid& grid,
                                   const ProbeConfig& cfg) {
  std::vector<MatchMetrics> out;
  for (const auto& pair : pairs)
    out.push_back(match_metrics(kernel_match(pair.feat_a, pair.feat_b, p, cfg.temperature, grid, cfg.eval_mode),
                                pair.gt, grid));
  return out;
}

}  // namespace

ProbeResult train_probe(std::span<const ProbePair> train_pairs, std::span<const ProbePair> eval_pairs,
                        const PatchGrid& grid, const ProbeConfig& cfg) {
  cfg.validate();
  if (train_pairs.empty() && cfg.train_steps > 0) throw EvaluationError("train_probe: no training pairs");
  if (eval_pairs.empty()) eval_pairs = train_pairs;
  if (eval_pairs.empty()) throw EvaluationError("train_probe: no evaluation pairs");
  const std::size_t width = eval_pairs[0].feat_a.dim(1);

  std::vector<Supervision> sup;
  std::vector<std::size_t> usable;
  for (std::size_t i = 0; i < train_pairs.size(); ++i) {
    sup.push_back(supervise(train_pairs[i], grid));
    if (sup.back().any) usable.push_back(i);
  }
  if (cfg.train_steps > 0 && usable.empty()) throw EvaluationError("train_probe: no valid supervision in any pair");

  Tensor<double> proj = initial_projection(width, cfg.seed);
  TrainConfig opt_cfg;
  opt_cfg.weight_decay = cfg.weight_decay;
  const std::vector<NamedParam<double>> params{{"probe.projection", proj, cfg.weight_decay > 0.0}};
  auto state = OptimizerState<double>::for_params(params);
  Rng rng = derive_rng(cfg.seed, {0x6261746368ULL});
  std::uniform_int_distribution<std::size_t> pick(0, usable.empty() ? 0 : usable.size() - 1);

  ProbeResult result;
  auto record = [&](std::size_t step) {
    const auto per_pair = evaluate(eval_pairs, proj, grid, cfg);
    const MatchMetrics pooled = pool_metrics(per_pair);
    result.evaluations.push_back({step, pooled});
    if (result.evaluations.size() == 1 || pooled.epe < result.best.epe) {
      result.best = pooled;
      result.best_step = step;
      result.per_pair = per_pair;
      result.projection = Tensor<double>::from(proj.shape(), {proj.values().begin(), proj.values().end()});
    }
  };

  record(0);
  for (std::size_t step = 1; step <= cfg.train_steps; ++step) {
    proj.set_requires_grad(true);
    proj.zero_grad();
    Tensor<double> total;
    for (std::size_t b = 0; b < cfg.batch_pairs; ++b) {
      const std::size_t idx = usable[pick(rng)];
      const ProbePair& pair = train_pairs[idx];
      const Tensor<double> logp = log_softmax(similarity_logits(pair.feat_a, pair.feat_b, proj, cfg.temperature), 1);
      const Tensor<double> l = nll_rows(logp, sup[idx].target, sup[idx].valid);
      total = total.defined() ? add(total, l) : l;
    }
    const Tensor<double> loss = scale(total, 1.0 / static_cast<double>(cfg.batch_pairs));
    loss.backward();
    const std::vector<std::vector<double>> grads{proj.grad()};
    adamw_step<double>(params, grads, state, cfg.probe_lr, opt_cfg);
    proj.set_requires_grad(false);
    if (step % cfg.eval_interval == 0 || step == cfg.train_steps) record(step);
  }
  return result;
}

void write_probe_csv(const std::filesystem::path& path, std::span<const ProbePair> pairs,
                     std::span<const MatchMetrics> per_pair) {
  if (pairs.size() != per_pair.size()) throw ContractError("write_probe_csv: one metrics row per pair expected");
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw EvaluationError("cannot write " + path.string());
  auto fmt = [](double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return std::string(buf);
  };
  os << "pair_id,epe,robustness,n_valid\n";
  for (std::size_t i = 0; i < pairs.size(); ++i)
    os << pairs[i].pair_id << "," << fmt(per_pair[i].epe) << "," << fmt(per_pair[i].robustness) << ","
       << per_pair[i].n_valid << "\n";
  const MatchMetrics all = pool_metrics(per_pair);
  os << "summary," << fmt(all.epe) << "," << fmt(all.robustness) << "," << all.n_valid << "\n";
}

}  // namespace mum

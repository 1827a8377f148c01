// Copyright 2026 The MuM Authors
// SPDX-License-Identifier: Apache-2.0

#include "mum/training.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>

#include "mum/config_io.hpp"
#include "mum/errors.hpp"

namespace mum {

std::vector<std::string> TrainConfig::problems() const {
  std::vector<std::string> out;
  if (!(base_lr > 0.0)) out.push_back("train.base_lr must be positive");
  if (batch_size_for_scaling == 0) out.push_back("train.batch_size_for_scaling must be positive");
  if (warmup_steps > total_steps) out.push_back("train.warmup_steps must not exceed train.total_steps");
  if (!(weight_decay >= 0.0)) out.push_back("train.weight_decay must be non-negative");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) out.push_back("train.beta1 must lie in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) out.push_back("train.beta2 must lie in [0, 1)");
  if (!(adam_eps > 0.0)) out.push_back("train.adam_eps must be positive");
  if (!(min_lr >= 0.0)) out.push_back("train.min_lr must be non-negative");
  if (base_lr > 0.0 && min_lr > peak_lr()) out.push_back("train.min_lr must not exceed the peak learning rate");
  if (grad_clip && !(*grad_clip > 0.0)) out.push_back("train.grad_clip must be positive when set");
  if (!(mask_ratio >= 0.0 && mask_ratio <= 1.0)) out.push_back("train.mask_ratio must lie in [0, 1]");
  if (log_interval == 0) out.push_back("train.log_interval must be positive");
  return out;
}

void TrainConfig::validate() const {
  const auto p = problems();
  if (p.empty()) return;
  std::string msg;
  for (const auto& s : p) msg += (msg.empty() ? "" : "; ") + s;
  throw ConfigError(msg);
}

template <typename T>
Tensor<T> mum_loss(const Tensor<T>& preds, const Tensor<T>& targets, std::span<const PatchMask> masks) {
  if (preds.shape() != targets.shape() || preds.rank() != 3)
    throw ContractError("mum_loss: predictions " + shape_str(preds.shape()) + " and targets " +
                        shape_str(targets.shape()) + " must share a (V, N, patch_dim) shape");
  const std::size_t v = preds.dim(0), n = preds.dim(1), d = preds.dim(2);
  if (masks.size() != v) throw ContractError("mum_loss: expected " + std::to_string(v) + " masks");
  std::vector<std::int64_t> rows;
  for (std::size_t i = 0; i < v; ++i) {
    if (masks[i].size() != n) throw ContractError("mum_loss: mask size does not match N");
    for (std::size_t k = 0; k < n; ++k)
      if (masks[i].bits[k]) rows.push_back(static_cast<std::int64_t>(i * n + k));
  }
  const Tensor<T> p2 = reshape(preds, {v * n, d});
  if (rows.empty()) return scale(sum(p2), T(0));
  const Tensor<T> t2 = reshape(targets, {v * n, d});
  return mean(square(sub(select_rows(p2, rows), select_rows(t2, rows))));
}

template <typename T>
Tensor<T> distill_loss(const DistillTriple<T>& s, const DistillTriple<T>& t) {
  auto term = [](const Tensor<T>& a, const Tensor<T>& b, const char* what) {
    if (a.shape() != b.shape())
      throw ContractError(std::string("distill_loss: ") + what + " shapes " + shape_str(a.shape()) + " and " +
                          shape_str(b.shape()) + " differ");
    return sum(square(sub(b, a)));
  };
  return add(add(term(s.points, t.points, "points"), term(s.cameras, t.cameras, "cameras")),
             term(s.depths, t.depths, "depths"));
}

double lr_at(std::size_t step, const TrainConfig& cfg) {
  if (step > cfg.total_steps)
    throw ContractError("lr_at: step " + std::to_string(step) + " beyond total_steps " +
                        std::to_string(cfg.total_steps));
  const double peak = cfg.peak_lr();
  if (step < cfg.warmup_steps)
    return peak * static_cast<double>(step) / static_cast<double>(cfg.warmup_steps);
  if (cfg.total_steps == cfg.warmup_steps) return peak;
  const double progress =
      static_cast<double>(step - cfg.warmup_steps) / static_cast<double>(cfg.total_steps - cfg.warmup_steps);
  return cfg.min_lr + (peak - cfg.min_lr) * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

template <typename T>
OptimizerState<T> OptimizerState<T>::for_params(std::span<const NamedParam<T>> params) {
  OptimizerState s;
  for (const auto& p : params) {
    s.m.emplace_back(p.tensor.numel(), T(0));
    s.v.emplace_back(p.tensor.numel(), T(0));
  }
  return s;
}

template <typename T>
void adamw_step(std::span<const NamedParam<T>> params, std::span<const std::vector<T>> grads,
                OptimizerState<T>& state, double lr, const TrainConfig& cfg) {
  if (grads.size() != params.size() || state.m.size() != params.size() || state.v.size() != params.size())
    throw ContractError("adamw_step: parameter, gradient and state counts differ");
  for (std::size_t i = 0; i < params.size(); ++i) {
    const std::size_t n = params[i].tensor.numel();
    if (grads[i].size() != n || state.m[i].size() != n || state.v[i].size() != n)
      throw ContractError("adamw_step: size mismatch for " + params[i].name);
    for (T g : grads[i])
      if (!std::isfinite(static_cast<double>(g)))
        throw TrainingError("non-finite gradient in parameter '" + params[i].name + "'");
  }
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(cfg.beta1, t);
  const double bc2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor<T> handle = params[i].tensor;
    auto w = handle.mutable_values();
    auto& m = state.m[i];
    auto& v = state.v[i];
    const double decay = params[i].decay ? lr * cfg.weight_decay : 0.0;
    for (std::size_t k = 0; k < w.size(); ++k) {
      const double g = static_cast<double>(grads[i][k]);
      m[k] = static_cast<T>(cfg.beta1 * static_cast<double>(m[k]) + (1.0 - cfg.beta1) * g);
      v[k] = static_cast<T>(cfg.beta2 * static_cast<double>(v[k]) + (1.0 - cfg.beta2) * g * g);
      const double mhat = static_cast<double>(m[k]) / bc1;
      const double vhat = static_cast<double>(v[k]) / bc2;
      double x = static_cast<double>(w[k]);
      x -= decay * x;
      x -= lr * mhat / (std::sqrt(vhat) + cfg.adam_eps);
      w[k] = static_cast<T>(x);
    }
  }
}

template <typename T>
double clip_grad_norm(std::span<std::vector<T>> grads, double max_norm) {
  double sq = 0.0;
  for (const auto& g : grads)
    for (T x : g) sq += static_cast<double>(x) * static_cast<double>(x);
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const double f = max_norm / norm;
    for (auto& g : grads)
      for (T& x : g) x = static_cast<T>(static_cast<double>(x) * f);
  }
  return norm;
}

PreparedBatch prepare_batch(const MultiViewBatch& batch, const ModelConfig& model_cfg, const TrainConfig& cfg,
                            Rng& rng) {
  const PatchGrid grid = PatchGrid::for_image(batch.image_size, batch.image_size, model_cfg.patch_size);
  const std::size_t n = grid.num_patches();
  PreparedBatch out;
  out.views_per_sequence = batch.views;
  std::vector<float> targets;
  targets.reserve(batch.batch * batch.views * n * grid.patch_dim());
  for (std::size_t b = 0; b < batch.batch; ++b) {
    std::vector<PatchMask> masks;
    for (std::size_t s = 0; s < batch.views; ++s) masks.push_back(sample_mask(n, cfg.mask_ratio, rng));
    // A lone view has nothing to reference; it keeps its mask.
    masks = apply_reference_view(std::move(masks), cfg.reference_view && batch.views > 1);
    for (std::size_t s = 0; s < batch.views; ++s) {
      auto mv = make_masked_view<float>(batch.frame(b, s), grid, masks[s], cfg.normalize_target);
      const auto t = mv.target.values();
      targets.insert(targets.end(), t.begin(), t.end());
      out.masks.push_back(masks[s]);
      out.views.push_back(std::move(mv));
    }
  }
  out.targets = Tensor<float>::from({out.views.size(), n, grid.patch_dim()}, std::move(targets));
  return out;
}

namespace {

constexpr std::uint64_t kInitTag = 0x696e6974;  // "init"
constexpr std::uint64_t kMaskTag = 0x6d61736b;  // "mask"

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

std::filesystem::path checkpoint_name(const std::filesystem::path& root, std::uint64_t step) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "step_%08llu", static_cast<unsigned long long>(step));
  return root / buf;
}

std::filesystem::path write_checkpoint(const std::filesystem::path& root, const TrainState& st,
                                       const TrainConfig& cfg, const SamplerConfig& scfg) {
  const auto dir = checkpoint_name(root, st.step);
  save_checkpoint(dir, st, cfg, scfg);
  std::ofstream(root / "latest") << dir.filename().string() << "\n";
  return dir;
}

}  // namespace

ModelParams<float> initial_params(const ModelConfig& model_cfg, std::uint64_t seed) {
  Rng init = derive_rng(seed, {kInitTag});
  return init_params<float>(model_cfg, init);
}

TrainResult train(const std::vector<WeightedPool>& pools, const std::vector<FrameRecord>& single_view_pool,
                  const TrainConfig& cfg, const ModelConfig& model_cfg, const SamplerConfig& sampler_cfg,
                  const TrainOptions& opts) {
  std::vector<std::string> problems = cfg.problems();
  for (auto& p : model_cfg.problems()) problems.push_back(std::move(p));
  for (auto& p : sampler_cfg.problems()) problems.push_back(std::move(p));
  if (model_cfg.patch_size > 0 && sampler_cfg.image_size % model_cfg.patch_size != 0)
    problems.push_back("sampler.image_size must be a multiple of model.patch_size");
  if (!problems.empty()) {
    std::string msg;
    for (const auto& s : problems) msg += (msg.empty() ? "" : "; ") + s;
    throw ConfigError(msg);
  }

  TrainResult result;
  TrainState& st = result.state;
  if (opts.resume_from) {
    st = load_checkpoint(*opts.resume_from);
    if (to_json(st.params.cfg) != to_json(model_cfg))
      throw ConfigError("resume: checkpoint model config " + to_json(st.params.cfg).dump() +
                        " differs from the requested " + to_json(model_cfg).dump());
  } else {
    st.params = initial_params(model_cfg, cfg.seed);
    st.optimizer = OptimizerState<float>::for_params(st.params.named());
  }
  const auto named = st.params.named();
  st.params.set_requires_grad(true);

  std::ofstream metrics;
  if (!opts.metrics_path.empty()) {
    if (opts.resume_from) {
      metrics.open(opts.metrics_path, std::ios::app);
    } else {
      metrics.open(opts.metrics_path, std::ios::trunc);
      metrics << "step,loss,lr\n";
    }
    if (!metrics) throw TrainingError("cannot write metrics to " + opts.metrics_path.string());
  }

  const BatchStream stream(pools, single_view_pool, sampler_cfg);
  double interval_loss = 0.0;
  std::size_t interval_count = 0;
  for (std::uint64_t step = st.step; step < cfg.total_steps; ++step) {
    if (opts.interrupt && opts.interrupt->load()) {
      result.interrupted = true;
      break;
    }
    if (opts.stop_after && step >= *opts.stop_after) break;

    const MultiViewBatch batch = stream.batch_at(step);
    Rng mask_rng = derive_rng(cfg.seed, {kMaskTag, step});
    const PreparedBatch pb = prepare_batch(batch, model_cfg, cfg, mask_rng);

    for (const auto& p : named) Tensor<float>(p.tensor).zero_grad();
    double loss_value = 0.0;
    std::vector<std::vector<float>> grads;
    {
      const Tensor<float> pred = forward<float>(pb.views, pb.views_per_sequence, st.params);
      const Tensor<float> loss = mum_loss<float>(pred, pb.targets, pb.masks);
      loss_value = static_cast<double>(loss.item());
      if (!std::isfinite(loss_value)) {
        std::string where = "(no checkpoint directory configured)";
        if (!opts.checkpoint_dir.empty()) {
          const auto diag = opts.checkpoint_dir / ("diagnostic_step_" + std::to_string(step));
          save_checkpoint(diag, st, cfg, sampler_cfg);
          where = diag.string();
        }
        throw TrainingError("non-finite loss at step " + std::to_string(step) + "; diagnostic checkpoint: " + where);
      }
      loss.backward();
    }
    grads.reserve(named.size());
    for (const auto& p : named) grads.push_back(p.tensor.grad());
    if (cfg.grad_clip) clip_grad_norm<float>(grads, *cfg.grad_clip);
    const double lr = lr_at(static_cast<std::size_t>(step), cfg);
    adamw_step<float>(named, grads, st.optimizer, lr, cfg);
    st.step = step + 1;

    const StepRecord rec{st.step, loss_value, lr, batch.views, batch.batch};
    result.history.push_back(rec);
    if (opts.on_step) opts.on_step(rec);
    interval_loss += loss_value;
    ++interval_count;
    if (st.step % cfg.log_interval == 0) {
      if (metrics.is_open())
        metrics << st.step << "," << format_double(interval_loss / static_cast<double>(interval_count)) << ","
                << format_double(lr) << "\n"
                << std::flush;
      interval_loss = 0.0;
      interval_count = 0;
    }
    if (!opts.checkpoint_dir.empty() && cfg.checkpoint_interval > 0 && st.step % cfg.checkpoint_interval == 0 &&
        st.step < cfg.total_steps)
      write_checkpoint(opts.checkpoint_dir, st, cfg, sampler_cfg);
  }
  st.params.set_requires_grad(false);
  if (!opts.checkpoint_dir.empty()) result.final_checkpoint = write_checkpoint(opts.checkpoint_dir, st, cfg, sampler_cfg);
  return result;
}

#define MUM_INSTANTIATE_TRAINING(T)                                                                          \
  template Tensor<T> mum_loss<T>(const Tensor<T>&, const Tensor<T>&, std::span<const PatchMask>);           \
  template Tensor<T> distill_loss<T>(const DistillTriple<T>&, const DistillTriple<T>&);                     \
  template struct OptimizerState<T>;                                                                        \
  template void adamw_step<T>(std::span<const NamedParam<T>>, std::span<const std::vector<T>>,              \
                              OptimizerState<T>&, double, const TrainConfig&);                              \
  template double clip_grad_norm<T>(std::span<std::vector<T>>, double);

MUM_INSTANTIATE_TRAINING(float)
MUM_INSTANTIATE_TRAINING(double)

}  // namespace mum

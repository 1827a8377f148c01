// Copyright 2026 The MuM Authors
// SPDX-License-Identifier: Apache-2.0

// Acceptance suite: one PASS/FAIL line per criterion. Every reference value
// is recomputed here from first principles rather than taken from the library.
//
//   mum_acceptance            run all criteria
//   mum_acceptance 3 9        run a subset
//   mum_acceptance --keep     leave the work directory in place

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstring>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

#include <json.hpp>

#include "mum/cli.hpp"
#include "mum/config_io.hpp"
#include "mum/grad_check.hpp"
#include "mum/kernels.hpp"
#include "mum/masking.hpp"
#include "mum/model.hpp"
#include "mum/pipeline.hpp"
#include "mum/probe.hpp"
#include "mum/sampler.hpp"
#include "mum/training.hpp"

using namespace mum;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

// P(X >= k) for X ~ Binomial(n, 1/2).
double sign_test_p(std::size_t k, std::size_t n) {
  double total = 0.0;
  for (std::size_t j = k; j <= n; ++j) {
    double c = 1.0;
    for (std::size_t i = 0; i < j; ++i) c = c * static_cast<double>(n - i) / static_cast<double>(i + 1);
    total += c;
  }
  return total / std::ldexp(1.0, static_cast<int>(n));
}

Image random_image(std::size_t size, Rng& rng) {
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  Image img(3, size, size);
  for (auto& v : img.data) v = u(rng);
  return img;
}

std::vector<MaskedViewTokens<double>> random_views(std::size_t count, std::size_t size, std::size_t patch,
                                                   std::vector<double> gammas, Rng& rng) {
  const PatchGrid grid = PatchGrid::for_image(size, size, patch);
  std::vector<MaskedViewTokens<double>> views;
  for (std::size_t i = 0; i < count; ++i)
    views.push_back(make_masked_view<double>(random_image(size, rng), grid,
                                             sample_mask(grid.num_patches(), gammas[i % gammas.size()], rng)));
  return views;
}

ModelConfig tiny_model(std::size_t patch) {
  ModelConfig c;
  c.enc_width = 16;
  c.enc_depth = 2;
  c.enc_heads = 2;
  c.dec_width = 16;
  c.dec_depth = 2;
  c.dec_heads = 2;
  c.patch_size = patch;
  return c;
}

// ---------------------------------------------------------------- 1

Verdict gradient_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  double worst = 0.0;
  for (const PosMode pm : {PosMode::rope, PosMode::absolute}) {
    ModelConfig c = tiny_model(4);
    c.pos_mode = pm;
    c.max_grid = 2;
    Rng rng(101);
    const auto p = init_params<double>(c, rng);
    const auto views = random_views(2, 8, 4, {0.75}, rng);  // N = 4
    std::vector<PatchMask> masks;
    std::vector<double> tv;
    for (const auto& v : views) {
      masks.push_back(v.mask);
      tv.insert(tv.end(), v.target.values().begin(), v.target.values().end());
    }
    const auto targets = Tensor<double>::from({2, 4, 48}, tv);
    std::vector<Tensor<double>> inputs;
    for (const auto& np : p.named()) inputs.push_back(np.tensor);
    const auto report =
        grad_check([&] { return mum_loss<double>(forward<double>(views, 2, p), targets, masks); }, inputs,
                   1e-5);  // near cbrt(machine epsilon) for an O(1) loss
    worst = std::max(worst, report.worst());
  }
  const double secs = seconds_since(t0);
  return {worst < 1e-4 && secs < 60.0,
          fmt("max relative error %.3g over all parameters (rope and absolute), %.1f s", worst, secs)};
}

// ---------------------------------------------------------------- 2

Verdict loss_structure() {
  Rng rng(202);
  const std::size_t n = 64, d = 12;
  std::normal_distribution<double> normal(0.0, 1.0);
  bool grads_zero = true, perfect_zero = true, unmasked_view_inert = true, matches_oracle = true;
  std::size_t checked = 0;
  for (int trial = 0; trial < 50; ++trial) {
    // Two views with gamma 0.9 and 0: the asymmetric cross-view setting.
    std::vector<PatchMask> masks{sample_mask(n, 0.9, rng), sample_mask(n, 0.0, rng)};
    std::vector<double> pv(2 * n * d), tv(2 * n * d);
    for (auto& v : pv) v = normal(rng);
    for (auto& v : tv) v = normal(rng);
    auto preds = Tensor<double>::from({2, n, d}, pv, true);
    const auto targets = Tensor<double>::from({2, n, d}, tv);
    const auto loss = mum_loss<double>(preds, targets, masks);
    loss.backward();
    const auto g = preds.grad();
    for (std::size_t v = 0; v < 2; ++v)
      for (std::size_t k = 0; k < n; ++k)
        if (!masks[v].bits[k])
          for (std::size_t j = 0; j < d; ++j) {
            grads_zero &= g[(v * n + k) * d + j] == 0.0;
            ++checked;
          }

    // Oracle: mean squared error over masked patches of all views.
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t v = 0; v < 2; ++v)
      for (std::size_t k = 0; k < n; ++k)
        if (masks[v].bits[k]) {
          for (std::size_t j = 0; j < d; ++j) {
            const double e = pv[(v * n + k) * d + j] - tv[(v * n + k) * d + j];
            sum += e * e;
          }
          ++count;
        }
    const double oracle = sum / static_cast<double>(count * d);
    matches_oracle &= std::abs(loss.item() - oracle) <= 1e-12 * oracle;

    perfect_zero &= mum_loss<double>(Tensor<double>::from({2, n, d}, tv), targets, masks).item() == 0.0;

    std::vector<double> pv2 = pv;
    for (std::size_t i = n * d; i < 2 * n * d; ++i) pv2[i] += 1e3 * normal(rng);
    unmasked_view_inert &= mum_loss<double>(Tensor<double>::from({2, n, d}, pv2), targets, masks).item() ==
                           mum_loss<double>(Tensor<double>::from({2, n, d}, pv), targets, masks).item();
  }
  return {grads_zero && perfect_zero && unmasked_view_inert && matches_oracle,
          fmt("unmasked grads exactly 0 (%zu entries): %s; perfect prediction 0: %s; gamma=0 view inert: %s; "
              "oracle MSE: %s",
              checked, grads_zero ? "yes" : "no", perfect_zero ? "yes" : "no", unmasked_view_inert ? "yes" : "no",
              matches_oracle ? "yes" : "no")};
}

// ---------------------------------------------------------------- 3

Verdict mask_cardinality() {
  // Ratios as exact percentages so the expected count is integer arithmetic:
  // nearest integer to pct * n / 100.
  const std::vector<std::size_t> ns{4, 64, 256};
  const std::vector<std::size_t> pcts{0, 65, 75, 85, 100};
  Rng rng(303);
  std::size_t mismatches = 0, total = 0;
  std::size_t n256_75 = 0;
  for (std::size_t n : ns)
    for (std::size_t pct : pcts) {
      const std::size_t q = pct * n;
      const std::size_t expected = q / 100 + (q % 100 > 50 ? 1 : 0);
      for (int i = 0; i < 10000; ++i) {
        const PatchMask m = sample_mask(n, static_cast<double>(pct) / 100.0, rng);
        const std::size_t got = static_cast<std::size_t>(std::count(m.bits.begin(), m.bits.end(), 1));
        mismatches += got != expected || m.bits.size() != n;
        ++total;
        if (n == 256 && pct == 75) n256_75 = got;
      }
    }
  return {mismatches == 0 && n256_75 == 192,
          fmt("%zu masks over N in {4,64,256} x gamma in {0,.65,.75,.85,1}: %zu mismatches; N=256, gamma=.75 -> %zu",
              total, mismatches, n256_75)};
}

// ---------------------------------------------------------------- 4

SceneSequence flat_sequence(const std::string& scene, std::size_t frames, std::size_t size) {
  SceneSequence seq;
  seq.scene_id = scene;
  for (std::size_t i = 0; i < frames; ++i)
    seq.frames.push_back(FrameRecord::in_memory(scene + "/" + std::to_string(i), scene, i,
                                                Image(3, size, size, static_cast<float>(i) / frames)));
  return seq;
}

Verdict batch_shape() {
  const std::vector<SceneSequence> pool{flat_sequence("a", 30, 4), flat_sequence("b", 24, 4)};
  std::vector<FrameRecord> singles;
  for (std::size_t i = 0; i < 8; ++i)
    singles.push_back(FrameRecord::in_memory("s/" + std::to_string(i), "s", i, Image(3, 4, 4, 0.5f)));

  bool shapes_ok = true;
  std::size_t b24 = 0;
  for (std::size_t s = 2; s <= 24; ++s) {
    SamplerConfig cfg;
    cfg.image_size = 4;
    cfg.min_len = cfg.max_len = s;
    cfg.single_view_prob = 0.0;
    Rng rng(400 + s);
    const auto batch = compose_batch(pool, singles, cfg, rng);
    shapes_ok &= batch.views == s && batch.batch == 96 / s;
    if (s == 24) b24 = batch.batch;
  }

  SamplerConfig cfg;
  cfg.image_size = 4;
  Rng rng(404);
  std::size_t hits = 0;
  const std::size_t batches = 10000;
  bool single_shape_ok = true;
  for (std::size_t i = 0; i < batches; ++i) {
    const auto b = compose_batch(pool, singles, cfg, rng);
    if (b.single_view()) {
      ++hits;
      single_shape_ok &= b.batch == 96 && b.views == 1;
    }
  }
  const double freq = static_cast<double>(hits) / batches;
  return {shapes_ok && b24 == 4 && single_shape_ok && std::abs(freq - 0.10) <= 0.01,
          fmt("B = floor(96/S) for S in [2,24]: %s (S=24 -> B=%zu); single-view frequency %.4f over %zu batches",
              shapes_ok ? "yes" : "no", b24, freq, batches)};
}

// ---------------------------------------------------------------- 5

Verdict schedule_constants() {
  TrainConfig c;
  c.base_lr = 1e-4;
  c.batch_size_for_scaling = 6144;
  c.warmup_steps = 25000;
  c.total_steps = 500000;
  c.min_lr = 0.0;
  const double peak = lr_at(25000, c);
  const bool peak_exact = peak == 2.4e-3;
  const bool start_exact = lr_at(0, c) == 0.0;
  const bool end_exact = lr_at(500000, c) == c.min_lr;

  // Continuity on a 1e3-point grid: no jump larger than the steepest slope of
  // either phase times the grid spacing (with 1% slack for rounding).
  const double spacing = 500.0;
  const double warm_slope = 2.4e-3 / 25000.0;
  const double cos_slope = 2.4e-3 * M_PI / (2.0 * 475000.0);
  const double bound = 1.01 * std::max(warm_slope, cos_slope) * spacing;
  double worst_jump = 0.0, prev = lr_at(0, c);
  for (int i = 1; i <= 1000; ++i) {
    const double lr = lr_at(static_cast<std::size_t>(i * spacing), c);
    worst_jump = std::max(worst_jump, std::abs(lr - prev));
    prev = lr;
  }
  const bool continuous = worst_jump <= bound;
  return {peak_exact && start_exact && end_exact && continuous,
          fmt("peak %.17g (%s 2.4e-3, %+.0f ulp); start 0: %s; end min_lr: %s; max grid jump %.3g <= %.3g",
              peak, peak_exact ? "==" : "!=", (peak - 2.4e-3) / (std::nextafter(2.4e-3, 1.0) - 2.4e-3),
              start_exact ? "yes" : "no", end_exact ? "yes" : "no", worst_jump, bound)};
}

// ---------------------------------------------------------------- 6

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) return std::numeric_limits<double>::infinity();
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

Verdict symmetry() {
  double worst_perm = 0.0;
  for (const PosMode pm : {PosMode::rope, PosMode::absolute})
    for (const CommSite cs : {CommSite::decoder, CommSite::encoder}) {
      ModelConfig c = tiny_model(4);
      c.pos_mode = pm;
      c.comm_site = cs;
      Rng rng(606);
      const auto p = init_params<double>(c, rng);
      for (std::size_t s : {2u, 3u, 5u}) {
        const auto views = random_views(s, 12, 4, {0.75}, rng);
        std::vector<std::size_t> perm(s);
        std::iota(perm.begin(), perm.end(), 0);
        do std::shuffle(perm.begin(), perm.end(), rng);
        while (std::is_sorted(perm.begin(), perm.end()));
        std::vector<MaskedViewTokens<double>> permuted;
        for (std::size_t i : perm) permuted.push_back(views[i]);
        const Tensor<double> a = forward<double>(views, s, p);
        const Tensor<double> b = forward<double>(permuted, s, p);
        const std::size_t block = a.numel() / s;
        for (std::size_t i = 0; i < s; ++i)
          worst_perm = std::max(worst_perm, max_abs_diff(b.values().subspan(i * block, block),
                                                         a.values().subspan(perm[i] * block, block)));
      }
    }

  ModelConfig c = tiny_model(4);
  c.dec_depth = 4;
  Rng rng(607);
  const auto p = init_params<double>(c, rng);
  const auto one = random_views(1, 12, 4, {0.75}, rng);
  ForwardOptions global;
  global.decoder_global = std::vector<bool>(c.dec_depth, true);
  const double single = max_abs_diff(forward<double>(one, 1, p).values(), forward<double>(one, 1, p, global).values());
  return {worst_perm <= 1e-9 && single <= 1e-9,
          fmt("permutation max |diff| %.3g for S in {2,3,5}; S=1 alternating vs all-global %.3g", worst_perm,
              single)};
}

// ---------------------------------------------------------------- 7

Verdict rope_properties() {
  Rng rng(707);
  std::normal_distribution<double> normal(0.0, 1.0);
  const std::size_t heads = 2, hd = 16, tokens = 8, width = heads * hd;
  std::vector<double> xv(tokens * width);
  for (auto& v : xv) v = normal(rng);
  const auto x = Tensor<double>::from({tokens, width}, xv);

  const std::vector<GridPos> origin(tokens, GridPos{0, 0});
  const double identity_err = max_abs_diff(rope_rotate(x, heads, origin, 100.0).values(), x.values());

  std::uniform_int_distribution<int> coord(0, 31);
  double norm_err = 0.0, rel_err = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<GridPos> pos;
    for (std::size_t t = 0; t < tokens; ++t) pos.push_back({coord(rng), coord(rng)});
    const auto y = rope_rotate(x, heads, pos, 100.0);
    for (std::size_t t = 0; t < tokens; ++t)
      for (std::size_t h = 0; h < heads; ++h) {
        double a = 0.0, b = 0.0;
        for (std::size_t k = 0; k < hd; ++k) {
          const std::size_t i = t * width + h * hd + k;
          a += x.at(i) * x.at(i);
          b += y.at(i) * y.at(i);
        }
        norm_err = std::max(norm_err, std::abs(std::sqrt(a) - std::sqrt(b)));
      }
    // Shift every position by the same offset: q.k per head is unchanged.
    const GridPos shift{coord(rng), coord(rng)};
    std::vector<GridPos> moved;
    for (const auto& q : pos) moved.push_back({q.row + shift.row, q.col + shift.col});
    const auto z = rope_rotate(x, heads, moved, 100.0);
    for (std::size_t t = 1; t < tokens; ++t)
      for (std::size_t h = 0; h < heads; ++h) {
        double dy = 0.0, dz = 0.0;
        for (std::size_t k = 0; k < hd; ++k) {
          dy += y.at(h * hd + k) * y.at(t * width + h * hd + k);
          dz += z.at(h * hd + k) * z.at(t * width + h * hd + k);
        }
        rel_err = std::max(rel_err, std::abs(dy - dz));
      }
  }
  return {identity_err == 0.0 && norm_err <= 1e-6 && rel_err <= 1e-5,
          fmt("origin identity error %.3g; norm change %.3g; relative-offset q.k change %.3g", identity_err,
              norm_err, rel_err)};
}

// ---------------------------------------------------------------- 9

GroundTruthWarp identity_warp(const PatchGrid& grid) {
  GroundTruthWarp gt;
  gt.height = grid.height();
  gt.width = grid.width();
  gt.warp.resize(gt.height * gt.width * 2);
  gt.valid.assign(gt.height * gt.width, 1);
  for (std::size_t y = 0; y < gt.height; ++y)
    for (std::size_t x = 0; x < gt.width; ++x) {
      gt.warp[(y * gt.width + x) * 2] = static_cast<double>(x);
      gt.warp[(y * gt.width + x) * 2 + 1] = static_cast<double>(y);
    }
  return gt;
}

Verdict matching_oracle() {
  Rng rng(909);
  std::uniform_int_distribution<std::size_t> side(1, 8), width(1, 12);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  auto random = [&](std::size_t r, std::size_t c) {
    std::vector<double> v(r * c);
    for (auto& e : v) e = u(rng);
    return Tensor<double>::from({r, c}, v);
  };
  std::size_t disagreements = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const PatchGrid grid{4, side(rng), side(rng)};
    const std::size_t n = grid.num_patches(), w = width(rng);
    const auto a = random(n, w), b = random(n, w), p = random(w, w);
    const auto est = kernel_match(a, b, p, 0.07, grid, MatchMode::hard);
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> pa(w, 0.0);
      for (std::size_t c = 0; c < w; ++c)
        for (std::size_t k = 0; k < w; ++k) pa[c] += a.at(i * w + k) * p.at(k * w + c);
      double best = -std::numeric_limits<double>::infinity();
      std::size_t arg = 0;
      for (std::size_t j = 0; j < n; ++j) {
        double s = 0.0;
        for (std::size_t c = 0; c < w; ++c) {
          double pb = 0.0;
          for (std::size_t k = 0; k < w; ++k) pb += b.at(j * w + k) * p.at(k * w + c);
          s += pa[c] * pb;
        }
        if (s > best) {
          best = s;
          arg = j;
        }
      }
      const double cx = static_cast<double>((arg % grid.grid_w) * 4 + 2);
      const double cy = static_cast<double>((arg / grid.grid_w) * 4 + 2);
      disagreements += est.coords[2 * i] != cx || est.coords[2 * i + 1] != cy;
    }
  }

  // Two source patches 16 px wide; centers at x = 8 and x = 24, y = 8.
  const PatchGrid grid{16, 1, 2};
  const GroundTruthWarp gt = identity_warp(grid);
  WarpEstimate est;
  est.grid_h = 1;
  est.grid_w = 2;
  est.valid = {1, 1};
  est.coords = {8, 8, 24, 8};
  const MatchMetrics same = match_metrics(est, gt, grid);
  est.coords = {8, 8, 24, 48};
  const MatchMetrics half = match_metrics(est, gt, grid);
  est.coords = {8 + 32, 8, 24, 8 + 31.999};
  const MatchMetrics edge = match_metrics(est, gt, grid);
  const bool ok = disagreements == 0 && same.epe == 0.0 && same.robustness == 1.0 && half.epe == 20.0 &&
                  half.robustness == 0.5 && edge.robustness == 0.5;
  return {ok, fmt("hard match vs brute force on 100 instances: %zu disagreements; est=gt -> (%g, %g); "
                  "{0,40} -> (%g, %g); errors {32, 31.999} -> robustness %g",
                  disagreements, same.epe, same.robustness, half.epe, half.robustness, edge.robustness)};
}

// ---------------------------------------------------------------- 8, 10, 11

class Workspace {
 public:
  explicit Workspace(bool keep) : keep_(keep) {
    root_ = fs::temp_directory_path() / ("mum_acceptance_" + std::to_string(::getpid()));
    fs::remove_all(root_);
    fs::create_directories(root_);
  }
  ~Workspace() {
    if (keep_) {
      std::printf("work directory kept: %s\n", root_.c_str());
    } else {
      std::error_code ec;
      fs::remove_all(root_, ec);
    }
  }
  const fs::path& root() const { return root_; }

 private:
  fs::path root_;
  bool keep_;
};

constexpr std::uint64_t kRunSeed = 1;

struct SmokeRuns {
  fs::path run_a, run_b;
  double seconds_a = 0.0;
  int code_a = -1, code_b = -1;
  std::string err;
};

int cli(std::vector<std::string> args, std::string& err_text) {
  args.insert(args.begin(), "mum");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  err_text += err.str();
  return code;
}

// Two identical desk-scale pretraining runs on 4 scenes x 6 views (seed 7).
const SmokeRuns& smoke_runs(const Workspace& ws) {
  static std::optional<SmokeRuns> cached;
  if (cached) return *cached;
  SmokeRuns r;
  const fs::path data = ws.root() / "scenes";
  std::string err;
  if (cli({"gen-data", "--out", data.string(), "--scenes", "4", "--views", "6", "--size", "64", "--seed", "7"}, err) !=
      0)
    throw std::runtime_error("gen-data failed: " + err);
  r.run_a = ws.root() / "run_a";
  r.run_b = ws.root() / "run_b";
  auto pretrain = [&](const fs::path& out) {
    return cli({"pretrain", "--data", data.string(), "--out", out.string(), "--seed", std::to_string(kRunSeed),
                "--steps", "500", "--log-interval", "1", "--deterministic", "--quiet"},
               r.err);
  };
  const auto t0 = std::chrono::steady_clock::now();
  r.code_a = pretrain(r.run_a);
  r.seconds_a = seconds_since(t0);
  r.code_b = pretrain(r.run_b);
  cached = r;
  return *cached;
}

std::vector<double> read_losses(const fs::path& csv) {
  std::ifstream is(csv);
  std::string line;
  std::getline(is, line);
  std::vector<double> out;
  while (std::getline(is, line)) {
    const auto a = line.find(','), b = line.find(',', a + 1);
    out.push_back(std::stod(line.substr(a + 1, b - a - 1)));
  }
  return out;
}

fs::path final_checkpoint(const fs::path& run) {
  std::ifstream is(run / "checkpoints" / "latest");
  std::string name;
  std::getline(is, name);
  return run / "checkpoints" / name;
}

Verdict smoke_training(const Workspace& ws) {
  const SmokeRuns& r = smoke_runs(ws);
  if (r.code_a != 0) return {false, "pretrain exited " + std::to_string(r.code_a) + ": " + r.err};
  const std::vector<double> loss = read_losses(r.run_a / "metrics.csv");
  if (loss.size() != 500) return {false, fmt("expected 500 per-step losses, found %zu", loss.size())};
  std::vector<double> blocks(10, 0.0);
  for (std::size_t i = 0; i < 500; ++i) blocks[i / 50] += loss[i] / 50.0;
  const double ratio = blocks.back() / blocks.front();
  std::size_t decreases = 0;
  for (std::size_t i = 1; i < blocks.size(); ++i) decreases += blocks[i] < blocks[i - 1];
  const double p = sign_test_p(decreases, blocks.size() - 1);
  std::string trail;
  for (double b : blocks) trail += fmt("%.3f ", b);
  trail.pop_back();
  return {ratio < 0.7 && p < 0.05 && r.seconds_a < 600.0,
          fmt("trailing/leading 50-step mean %.3f; 50-step block means [%s]; %zu/9 decreases, sign-test p=%.4f; "
              "%.1f s",
              ratio, trail.c_str(), decreases, p, r.seconds_a)};
}

Verdict probe_end_to_end(const Workspace& ws) {
  const SmokeRuns& r = smoke_runs(ws);
  if (r.code_a != 0) return {false, "pretrain exited " + std::to_string(r.code_a) + ": " + r.err};
  DatasetSpec train_spec;
  train_spec.scenes = 8;
  train_spec.views = 2;
  train_spec.seed = 11;
  DatasetSpec held_spec;
  held_spec.scenes = 24;
  held_spec.views = 2;
  held_spec.seed = 13;
  const auto train_pairs = image_pairs(load_manifest_scenes(write_synthetic_dataset(ws.root() / "probe_train", train_spec)));
  const auto held_pairs = image_pairs(load_manifest_scenes(write_synthetic_dataset(ws.root() / "probe_held", held_spec)));

  const ModelParams<float> trained = load_checkpoint_params(final_checkpoint(r.run_a));
  const ModelParams<float> untrained = initial_params(trained.cfg, kRunSeed);
  const PatchGrid grid = PatchGrid::for_image(64, 64, trained.cfg.patch_size);
  ProbeConfig pc;
  pc.seed = kRunSeed;
  const std::size_t layer = trained.cfg.enc_depth;
  auto evaluate = [&](const ModelParams<float>& p) {
    return train_probe(probe_pairs(train_pairs, p, layer), probe_pairs(held_pairs, p, layer), grid, pc);
  };
  const ProbeResult a = evaluate(untrained);
  const ProbeResult b = evaluate(trained);
  std::size_t wins = 0, losses = 0;
  for (std::size_t i = 0; i < a.per_pair.size(); ++i) {
    wins += b.per_pair[i].epe < a.per_pair[i].epe;
    losses += b.per_pair[i].epe > a.per_pair[i].epe;
  }
  const std::size_t n = wins + losses;
  const double p = sign_test_p(wins, n);
  return {held_pairs.size() >= 20 && b.best.epe < a.best.epe && p < 0.05,
          fmt("held-out EPE random-init %.2f vs trained %.2f over %zu pairs; trained better on %zu/%zu, "
              "sign-test p=%.3g",
              a.best.epe, b.best.epe, held_pairs.size(), wins, n, p)};
}

Verdict reproducibility(const Workspace& ws) {
  const SmokeRuns& r = smoke_runs(ws);
  if (r.code_a != 0 || r.code_b != 0) return {false, "pretrain failed: " + r.err};
  const std::string csv_a = slurp(r.run_a / "metrics.csv"), csv_b = slurp(r.run_b / "metrics.csv");
  const bool csv_same = !csv_a.empty() && csv_a == csv_b;
  const fs::path ck_a = final_checkpoint(r.run_a), ck_b = final_checkpoint(r.run_b);
  bool ckpt_same = true;
  std::size_t files = 0;
  for (const auto& e : fs::recursive_directory_iterator(ck_a))
    if (e.is_regular_file()) {
      ckpt_same &= slurp(e.path()) == slurp(ck_b / fs::relative(e.path(), ck_a));
      ++files;
    }

  // Round trip: load, save elsewhere, compare bytes and reloaded values.
  const TrainState st = load_checkpoint(ck_a);
  const auto manifest = nlohmann::json::parse(slurp(ck_a / "manifest.json"));
  TrainConfig tc;
  SamplerConfig sc;
  std::vector<std::string> problems;
  read_json(manifest.at("train_config"), tc, problems);
  read_json(manifest.at("sampler_config"), sc, problems);
  const fs::path copy = ws.root() / "roundtrip";
  save_checkpoint(copy, st, tc, sc);
  bool bytes_same = problems.empty();
  for (const auto& e : fs::recursive_directory_iterator(ck_a))
    if (e.is_regular_file()) bytes_same &= slurp(e.path()) == slurp(copy / fs::relative(e.path(), ck_a));
  const TrainState back = load_checkpoint(copy);
  bool values_same = back.step == st.step && back.optimizer.step == st.optimizer.step;
  const auto pa = st.params.named(), pb = back.params.named();
  values_same &= pa.size() == pb.size();
  for (std::size_t i = 0; values_same && i < pa.size(); ++i) {
    const auto va = pa[i].tensor.values(), vb = pb[i].tensor.values();
    values_same &= va.size() == vb.size() && std::memcmp(va.data(), vb.data(), va.size() * sizeof(float)) == 0;
    const auto& ma = st.optimizer.m[i];
    const auto& mb = back.optimizer.m[i];
    const auto& wa = st.optimizer.v[i];
    const auto& wb = back.optimizer.v[i];
    values_same &= ma.size() == mb.size() && std::memcmp(ma.data(), mb.data(), ma.size() * sizeof(float)) == 0;
    values_same &= wa.size() == wb.size() && std::memcmp(wa.data(), wb.data(), wa.size() * sizeof(float)) == 0;
  }
  return {csv_same && ckpt_same && bytes_same && values_same,
          fmt("metrics CSVs byte-identical: %s (%zu bytes); final checkpoints identical: %s (%zu files); "
              "save/load round trip bit-exact: %s",
              csv_same ? "yes" : "no", csv_a.size(), ckpt_same ? "yes" : "no", files,
              bytes_same && values_same ? "yes" : "no")};
}

}  // namespace

int main(int argc, char** argv) {
  bool keep = false;
  std::set<int> only;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--keep") keep = true;
    else only.insert(std::atoi(a.c_str()));
  }
  Workspace ws(keep);

  const std::vector<std::pair<const char*, std::function<Verdict()>>> criteria{
      {"gradient oracle", gradient_oracle},
      {"loss structure", loss_structure},
      {"masking cardinality", mask_cardinality},
      {"batch shape", batch_shape},
      {"schedule constants", schedule_constants},
      {"view-permutation symmetry", symmetry},
      {"rope properties", rope_properties},
      {"smoke training", [&] { return smoke_training(ws); }},
      {"matching oracle", matching_oracle},
      {"probe end-to-end", [&] { return probe_end_to_end(ws); }},
      {"reproducibility", [&] { return reproducibility(ws); }},
  };

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && !only.count(id)) continue;
    Verdict v;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    failures += !v.pass;
    std::printf("%s %2d %s: %s [%.1f s]\n", v.pass ? "PASS" : "FAIL", id, criteria[i].first, v.detail.c_str(),
                seconds_since(t0));
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}

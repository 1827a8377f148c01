// Copyright 2026 The MuM Authors
// SPDX-License-Identifier: Apache-2.0

#include "mum/model.hpp"

#include <cmath>
#include <numeric>

#include "mum/errors.hpp"

namespace mum {

std::string to_string(PosMode m) { return m == PosMode::rope ? "rope" : "absolute"; }
std::string to_string(CommSite c) { return c == CommSite::decoder ? "decoder" : "encoder"; }

PosMode parse_pos_mode(const std::string& s) {
  if (s == "rope") return PosMode::rope;
  if (s == "absolute") return PosMode::absolute;
  throw ConfigError("pos_mode must be 'rope' or 'absolute', got '" + s + "'");
}

CommSite parse_comm_site(const std::string& s) {
  if (s == "decoder") return CommSite::decoder;
  if (s == "encoder") return CommSite::encoder;
  throw ConfigError("comm_site must be 'decoder' or 'encoder', got '" + s + "'");
}

std::size_t ModelConfig::enc_mlp() const {
  return static_cast<std::size_t>(std::lround(mlp_ratio * static_cast<double>(enc_width)));
}
std::size_t ModelConfig::dec_mlp() const {
  return static_cast<std::size_t>(std::lround(mlp_ratio * static_cast<double>(dec_width)));
}

std::vector<std::string> ModelConfig::problems() const {
  std::vector<std::string> out;
  auto check_attn = [&](const char* part, std::size_t width, std::size_t heads) {
    const std::string p(part);
    if (width == 0) out.push_back("model." + p + "_width must be positive");
    if (heads == 0) {
      out.push_back("model." + p + "_heads must be positive");
      return;
    }
    if (width % heads != 0) {
      out.push_back("model." + p + "_width must be divisible by model." + p + "_heads");
    } else if ((width / heads) % 4 != 0) {
      out.push_back("model." + p + " head dimension (" + std::to_string(width / heads) +
                    ") must be divisible by 4");
    }
  };
  check_attn("enc", enc_width, enc_heads);
  check_attn("dec", dec_width, dec_heads);
  if (enc_depth == 0) out.push_back("model.enc_depth must be positive");
  if (comm_site == CommSite::decoder && dec_depth % 2 != 0)
    out.push_back("model.dec_depth must be even when comm_site is 'decoder'");
  if (patch_size == 0) out.push_back("model.patch_size must be positive");
  if (!(rope_base > 0.0)) out.push_back("model.rope_base must be positive");
  if (!(mlp_ratio > 0.0)) out.push_back("model.mlp_ratio must be positive");
  if (pos_mode == PosMode::absolute && max_grid == 0) out.push_back("model.max_grid must be positive");
  return out;
}

void ModelConfig::validate() const {
  const auto p = problems();
  if (p.empty()) return;
  std::string msg;
  for (const auto& s : p) msg += (msg.empty() ? "" : "; ") + s;
  throw ConfigError(msg);
}

template <typename T>
std::vector<NamedParam<T>> ModelParams<T>::named() const {
  std::vector<NamedParam<T>> out;
  auto add = [&](std::string name, const Tensor<T>& t, bool decay) {
    if (t.defined()) out.push_back({std::move(name), t, decay});
  };
  auto add_block = [&](const std::string& prefix, const BlockParams<T>& b) {
    add(prefix + ".norm1.gain", b.norm1_gain, false);
    add(prefix + ".norm1.bias", b.norm1_bias, false);
    add(prefix + ".attn.qkv.weight", b.qkv_weight, true);
    add(prefix + ".attn.qkv.bias", b.qkv_bias, false);
    add(prefix + ".attn.proj.weight", b.proj_weight, true);
    add(prefix + ".attn.proj.bias", b.proj_bias, false);
    add(prefix + ".norm2.gain", b.norm2_gain, false);
    add(prefix + ".norm2.bias", b.norm2_bias, false);
    add(prefix + ".mlp.fc1.weight", b.fc1_weight, true);
    add(prefix + ".mlp.fc1.bias", b.fc1_bias, false);
    add(prefix + ".mlp.fc2.weight", b.fc2_weight, true);
    add(prefix + ".mlp.fc2.bias", b.fc2_bias, false);
  };
  add("patch_embed.weight", patch_weight, true);
  add("patch_embed.bias", patch_bias, false);
  add("encoder.pos_embed", enc_pos, false);
  for (std::size_t i = 0; i < enc_blocks.size(); ++i) add_block("encoder.blocks." + std::to_string(i), enc_blocks[i]);
  add("encoder.norm.gain", enc_norm_gain, false);
  add("encoder.norm.bias", enc_norm_bias, false);
  add("decoder.embed.weight", dec_embed_weight, true);
  add("decoder.embed.bias", dec_embed_bias, false);
  add("decoder.mask_token", mask_token, false);
  add("decoder.pos_embed", dec_pos, false);
  for (std::size_t i = 0; i < dec_blocks.size(); ++i) add_block("decoder.blocks." + std::to_string(i), dec_blocks[i]);
  add("decoder.norm.gain", dec_norm_gain, false);
  add("decoder.norm.bias", dec_norm_bias, false);
  add("head.weight", head_weight, true);
  add("head.bias", head_bias, false);
  return out;
}

template <typename T>
std::size_t ModelParams<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : named()) n += p.tensor.numel();
  return n;
}

template <typename T>
void ModelParams<T>::set_requires_grad(bool on) const {
  for (const auto& p : named()) Tensor<T>(p.tensor).set_requires_grad(on);
}

namespace {

template <typename T>
Tensor<T> trunc_normal(Shape shape, double std, Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<T> v(shape_numel(shape));
  for (auto& x : v) {
    double z = n(rng);
    while (std::abs(z) > 2.0) z = n(rng);
    x = static_cast<T>(z * std);
  }
  return Tensor<T>::from(std::move(shape), std::move(v));
}

template <typename T>
Tensor<T> xavier(std::size_t in, std::size_t out, Rng& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(in + out));
  std::uniform_real_distribution<double> u(-a, a);
  std::vector<T> v(in * out);
  for (auto& x : v) x = static_cast<T>(u(rng));
  return Tensor<T>::from({in, out}, std::move(v));
}

template <typename T>
BlockParams<T> init_block(std::size_t width, std::size_t hidden, Rng& rng) {
  BlockParams<T> b;
  b.norm1_gain = Tensor<T>::full({width}, T(1));
  b.norm1_bias = Tensor<T>::zeros({width});
  b.qkv_weight = xavier<T>(width, 3 * width, rng);
  b.qkv_bias = Tensor<T>::zeros({3 * width});
  b.proj_weight = xavier<T>(width, width, rng);
  b.proj_bias = Tensor<T>::zeros({width});
  b.norm2_gain = Tensor<T>::full({width}, T(1));
  b.norm2_bias = Tensor<T>::zeros({width});
  b.fc1_weight = xavier<T>(width, hidden, rng);
  b.fc1_bias = Tensor<T>::zeros({hidden});
  b.fc2_weight = xavier<T>(hidden, width, rng);
  b.fc2_bias = Tensor<T>::zeros({width});
  return b;
}

template <typename U, typename T>
Tensor<U> cast_tensor(const Tensor<T>& t) {
  if (!t.defined()) return {};
  const auto v = t.values();
  return Tensor<U>::from(t.shape(), std::vector<U>(v.begin(), v.end()));
}

template <typename U, typename T>
BlockParams<U> cast_block(const BlockParams<T>& b) {
  return {cast_tensor<U>(b.norm1_gain), cast_tensor<U>(b.norm1_bias), cast_tensor<U>(b.qkv_weight),
          cast_tensor<U>(b.qkv_bias),   cast_tensor<U>(b.proj_weight), cast_tensor<U>(b.proj_bias),
          cast_tensor<U>(b.norm2_gain), cast_tensor<U>(b.norm2_bias), cast_tensor<U>(b.fc1_weight),
          cast_tensor<U>(b.fc1_bias),   cast_tensor<U>(b.fc2_weight),  cast_tensor<U>(b.fc2_bias)};
}

template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
  Tensor<T> y = matmul(x, w);
  return b.defined() ? add_bias(y, b) : y;
}

struct BlockContext {
  std::size_t heads = 1;
  bool rope = true;
  double rope_base = 100.0;
  std::span<const GridPos> positions;
  std::span<const int> group;
  AttentionCapture* capture = nullptr;
};

template <typename T>
Tensor<T> run_block(const Tensor<T>& x, const BlockParams<T>& p, const BlockContext& ctx) {
  const std::size_t width = x.dim(1);
  const Tensor<T> h = layer_norm(x, p.norm1_gain, p.norm1_bias);
  const Tensor<T> qkv = linear(h, p.qkv_weight, p.qkv_bias);
  Tensor<T> q = slice_cols(qkv, 0, width);
  Tensor<T> k = slice_cols(qkv, width, 2 * width);
  const Tensor<T> v = slice_cols(qkv, 2 * width, 3 * width);
  if (ctx.rope) {
    q = rope_rotate(q, ctx.heads, ctx.positions, ctx.rope_base);
    k = rope_rotate(k, ctx.heads, ctx.positions, ctx.rope_base);
  }
  const Tensor<T> a = attention(q, k, v, ctx.heads, ctx.group, ctx.capture);
  const Tensor<T> x1 = add(x, linear(a, p.proj_weight, p.proj_bias));
  const Tensor<T> h2 = layer_norm(x1, p.norm2_gain, p.norm2_bias);
  const Tensor<T> m = linear(gelu(linear(h2, p.fc1_weight, p.fc1_bias)), p.fc2_weight, p.fc2_bias);
  return add(x1, m);
}

template <typename T>
void check_views(std::span<const MaskedViewTokens<T>> views, std::size_t s) {
  if (views.empty()) throw ContractError("model: no views");
  if (s == 0 || views.size() % s != 0)
    throw ContractError("model: " + std::to_string(views.size()) + " views do not form sequences of " +
                        std::to_string(s));
  for (const auto& v : views) {
    if (!(v.grid == views[0].grid)) throw ContractError("model: views do not share one patch grid");
    if (v.mask.size() != v.grid.num_patches())
      throw ContractError("model: mask size does not match the patch grid");
  }
}

std::vector<std::int64_t> pos_rows(std::span<const GridPos> pos, std::size_t max_grid) {
  std::vector<std::int64_t> rows(pos.size());
  for (std::size_t i = 0; i < pos.size(); ++i)
    rows[i] = static_cast<std::int64_t>(pos[i].row) * static_cast<std::int64_t>(max_grid) + pos[i].col;
  return rows;
}

void check_grid_fits(const PatchGrid& g, const ModelConfig& cfg) {
  if (cfg.pos_mode == PosMode::absolute && (g.grid_h > cfg.max_grid || g.grid_w > cfg.max_grid))
    throw ContractError("model: grid " + std::to_string(g.grid_h) + "x" + std::to_string(g.grid_w) +
                        " exceeds max_grid " + std::to_string(cfg.max_grid));
}

// Encoder over the given tokens; stops after `depth` blocks and applies the
// final encoder norm.
template <typename T>
Tensor<T> run_encoder(Tensor<T> x, const ModelParams<T>& params, std::span<const GridPos> pos,
                      std::span<const int> view, std::span<const int> sequence, std::size_t depth) {
  const ModelConfig& cfg = params.cfg;
  if (cfg.pos_mode == PosMode::absolute) {
    const auto rows = pos_rows(pos, cfg.max_grid);
    x = add(x, select_rows(params.enc_pos, rows));
  }
  const auto schedule = encoder_schedule(cfg);
  BlockContext ctx;
  ctx.heads = cfg.enc_heads;
  ctx.rope = cfg.pos_mode == PosMode::rope;
  ctx.rope_base = cfg.rope_base;
  ctx.positions = pos;
  for (std::size_t i = 0; i < depth; ++i) {
    ctx.group = schedule[i] ? sequence : view;
    x = run_block(x, params.enc_blocks[i], ctx);
  }
  return layer_norm(x, params.enc_norm_gain, params.enc_norm_bias);
}

}  // namespace

template <typename T>
ModelParams<T> init_params(const ModelConfig& cfg, Rng& rng) {
  cfg.validate();
  ModelParams<T> p;
  p.cfg = cfg;
  const std::size_t pd = cfg.patch_dim();
  p.patch_weight = trunc_normal<T>({pd, cfg.enc_width}, 0.02, rng);
  p.patch_bias = Tensor<T>::zeros({cfg.enc_width});
  if (cfg.pos_mode == PosMode::absolute)
    p.enc_pos = trunc_normal<T>({cfg.max_grid * cfg.max_grid, cfg.enc_width}, 0.02, rng);
  for (std::size_t i = 0; i < cfg.enc_depth; ++i) p.enc_blocks.push_back(init_block<T>(cfg.enc_width, cfg.enc_mlp(), rng));
  p.enc_norm_gain = Tensor<T>::full({cfg.enc_width}, T(1));
  p.enc_norm_bias = Tensor<T>::zeros({cfg.enc_width});
  p.dec_embed_weight = xavier<T>(cfg.enc_width, cfg.dec_width, rng);
  p.dec_embed_bias = Tensor<T>::zeros({cfg.dec_width});
  p.mask_token = trunc_normal<T>({1, cfg.dec_width}, 0.02, rng);
  if (cfg.pos_mode == PosMode::absolute)
    p.dec_pos = trunc_normal<T>({cfg.max_grid * cfg.max_grid, cfg.dec_width}, 0.02, rng);
  for (std::size_t i = 0; i < cfg.dec_depth; ++i) p.dec_blocks.push_back(init_block<T>(cfg.dec_width, cfg.dec_mlp(), rng));
  p.dec_norm_gain = Tensor<T>::full({cfg.dec_width}, T(1));
  p.dec_norm_bias = Tensor<T>::zeros({cfg.dec_width});
  p.head_weight = trunc_normal<T>({cfg.dec_width, pd}, 0.02, rng);
  if (cfg.head_bias) p.head_bias = Tensor<T>::zeros({pd});
  return p;
}

template <typename U, typename T>
ModelParams<U> cast_params(const ModelParams<T>& p) {
  ModelParams<U> out;
  out.cfg = p.cfg;
  out.patch_weight = cast_tensor<U>(p.patch_weight);
  out.patch_bias = cast_tensor<U>(p.patch_bias);
  out.enc_pos = cast_tensor<U>(p.enc_pos);
  for (const auto& b : p.enc_blocks) out.enc_blocks.push_back(cast_block<U>(b));
  out.enc_norm_gain = cast_tensor<U>(p.enc_norm_gain);
  out.enc_norm_bias = cast_tensor<U>(p.enc_norm_bias);
  out.dec_embed_weight = cast_tensor<U>(p.dec_embed_weight);
  out.dec_embed_bias = cast_tensor<U>(p.dec_embed_bias);
  out.mask_token = cast_tensor<U>(p.mask_token);
  out.dec_pos = cast_tensor<U>(p.dec_pos);
  for (const auto& b : p.dec_blocks) out.dec_blocks.push_back(cast_block<U>(b));
  out.dec_norm_gain = cast_tensor<U>(p.dec_norm_gain);
  out.dec_norm_bias = cast_tensor<U>(p.dec_norm_bias);
  out.head_weight = cast_tensor<U>(p.head_weight);
  out.head_bias = cast_tensor<U>(p.head_bias);
  return out;
}

std::vector<bool> decoder_schedule(const ModelConfig& cfg) {
  std::vector<bool> s(cfg.dec_depth, false);
  if (cfg.comm_site == CommSite::decoder)
    for (std::size_t i = 0; i < s.size(); ++i) s[i] = i % 2 == 1;
  return s;
}

std::vector<bool> encoder_schedule(const ModelConfig& cfg) {
  std::vector<bool> s(cfg.enc_depth, false);
  if (cfg.comm_site == CommSite::encoder)
    for (std::size_t i = 0; i < s.size(); ++i) s[i] = i % 2 == 1;
  return s;
}

template <typename T>
TokenSet<T> encode(std::span<const MaskedViewTokens<T>> views, std::size_t views_per_sequence,
                   const ModelParams<T>& params) {
  check_views(views, views_per_sequence);
  const PatchGrid& grid = views[0].grid;
  check_grid_fits(grid, params.cfg);
  const std::size_t pd = grid.patch_dim();
  if (pd != params.cfg.patch_dim()) throw ContractError("encode: patch size does not match the model");

  TokenSet<T> out;
  std::vector<T> data;
  for (std::size_t v = 0; v < views.size(); ++v) {
    const auto& mv = views[v];
    if (mv.visible_patches.dim(0) != mv.visible_indices.size())
      throw ContractError("encode: visible patches and indices disagree");
    const auto vals = mv.visible_patches.values();
    data.insert(data.end(), vals.begin(), vals.end());
    for (std::int64_t k : mv.visible_indices) {
      out.positions.push_back({static_cast<int>(k / static_cast<std::int64_t>(grid.grid_w)),
                               static_cast<int>(k % static_cast<std::int64_t>(grid.grid_w))});
      out.view.push_back(static_cast<int>(v));
      out.sequence.push_back(static_cast<int>(v / views_per_sequence));
    }
  }
  const std::size_t n = out.positions.size();
  if (n == 0) throw ContractError("encode: every patch is masked");
  const Tensor<T> x = Tensor<T>::from({n, pd}, std::move(data));
  const Tensor<T> emb = linear(x, params.patch_weight, params.patch_bias);
  out.tokens = run_encoder(emb, params, out.positions, out.view, out.sequence, params.cfg.enc_depth);
  return out;
}

template <typename T>
Tensor<T> decode(const TokenSet<T>& encoded, std::span<const MaskedViewTokens<T>> views,
                 std::size_t views_per_sequence, const ModelParams<T>& params, const ForwardOptions& opts) {
  check_views(views, views_per_sequence);
  const ModelConfig& cfg = params.cfg;
  const PatchGrid& grid = views[0].grid;
  const std::size_t n = grid.num_patches();

  // slot[t] is the encoded row feeding full token t, or -1 for a mask token.
  std::vector<std::int64_t> slot(views.size() * n, -1);
  std::vector<GridPos> pos(views.size() * n);
  std::vector<int> view(views.size() * n), sequence(views.size() * n);
  std::int64_t next = 0;
  for (std::size_t v = 0; v < views.size(); ++v) {
    for (std::size_t k = 0; k < n; ++k) {
      const std::size_t t = v * n + k;
      pos[t] = {static_cast<int>(k / grid.grid_w), static_cast<int>(k % grid.grid_w)};
      view[t] = static_cast<int>(v);
      sequence[t] = static_cast<int>(v / views_per_sequence);
      if (!views[v].mask.bits[k]) slot[t] = next++;
    }
  }
  if (static_cast<std::size_t>(next) != encoded.tokens.dim(0))
    throw ContractError("decode: masks leave " + std::to_string(next) + " visible tokens but " +
                        std::to_string(encoded.tokens.dim(0)) + " were encoded");

  Tensor<T> x = linear(encoded.tokens, params.dec_embed_weight, params.dec_embed_bias);
  x = fill_rows(x, params.mask_token, slot);
  if (cfg.pos_mode == PosMode::absolute) x = add(x, select_rows(params.dec_pos, pos_rows(pos, cfg.max_grid)));

  const std::vector<bool> schedule = opts.decoder_global.value_or(decoder_schedule(cfg));
  if (schedule.size() != params.dec_blocks.size())
    throw ContractError("decode: schedule length does not match decoder depth");
  BlockContext ctx;
  ctx.heads = cfg.dec_heads;
  ctx.rope = cfg.pos_mode == PosMode::rope;
  ctx.rope_base = cfg.rope_base;
  ctx.positions = pos;
  for (std::size_t i = 0; i < params.dec_blocks.size(); ++i) {
    ctx.group = schedule[i] ? std::span<const int>(sequence) : std::span<const int>(view);
    ctx.capture = (opts.capture && opts.capture_block == i) ? opts.capture : nullptr;
    x = run_block(x, params.dec_blocks[i], ctx);
  }
  x = layer_norm(x, params.dec_norm_gain, params.dec_norm_bias);
  const Tensor<T> y = linear(x, params.head_weight, params.head_bias);
  return reshape(y, {views.size(), n, cfg.patch_dim()});
}

template <typename T>
Tensor<T> forward(std::span<const MaskedViewTokens<T>> views, std::size_t views_per_sequence,
                  const ModelParams<T>& params, const ForwardOptions& opts) {
  return decode(encode(views, views_per_sequence, params), views, views_per_sequence, params, opts);
}

namespace {

template <typename T>
std::vector<MaskedViewTokens<T>> full_views(std::span<const Image> images, const ModelConfig& cfg) {
  if (images.empty()) throw ContractError("model: no images");
  const PatchGrid grid = PatchGrid::for_image(images[0].height, images[0].width, cfg.patch_size);
  std::vector<MaskedViewTokens<T>> views;
  for (const auto& img : images) views.push_back(make_masked_view<T>(img, grid, PatchMask::none(grid.num_patches())));
  return views;
}

}  // namespace

template <typename T>
Tensor<T> extract_features(std::span<const Image> images, std::size_t layer, const ModelParams<T>& params) {
  const ModelConfig& cfg = params.cfg;
  if (layer < 1 || layer > cfg.enc_depth)
    throw ContractError("extract_features: layer " + std::to_string(layer) + " outside [1, " +
                        std::to_string(cfg.enc_depth) + "]");
  const auto views = full_views<T>(images, cfg);
  const PatchGrid& grid = views[0].grid;
  check_grid_fits(grid, cfg);
  const std::size_t n = grid.num_patches();
  std::vector<T> data;
  std::vector<GridPos> pos;
  std::vector<int> view;
  for (std::size_t v = 0; v < views.size(); ++v) {
    const auto vals = views[v].visible_patches.values();
    data.insert(data.end(), vals.begin(), vals.end());
    for (std::size_t k = 0; k < n; ++k) {
      pos.push_back({static_cast<int>(k / grid.grid_w), static_cast<int>(k % grid.grid_w)});
      view.push_back(static_cast<int>(v));
    }
  }
  const std::vector<int> sequence(view.size(), 0);
  const Tensor<T> x = Tensor<T>::from({view.size(), cfg.patch_dim()}, std::move(data));
  const Tensor<T> emb = linear(x, params.patch_weight, params.patch_bias);
  const Tensor<T> f = run_encoder(emb, params, pos, view, sequence, layer);
  return reshape(f, {views.size(), n, cfg.enc_width});
}

template <typename T>
AttentionMap attention_map(std::span<const Image> images, AttentionQuery query, std::size_t block,
                           const ModelParams<T>& params) {
  const auto schedule = decoder_schedule(params.cfg);
  if (block >= schedule.size())
    throw ContractError("attention_map: block " + std::to_string(block) + " outside the decoder (depth " +
                        std::to_string(schedule.size()) + ")");
  if (!schedule[block]) throw ContractError("attention_map: block " + std::to_string(block) + " is frame-wise");
  auto views = full_views<T>(images, params.cfg);
  const PatchGrid grid = views[0].grid;
  if (query.view >= views.size() || query.row >= grid.grid_h || query.col >= grid.grid_w)
    throw ContractError("attention_map: query outside the input");
  const std::size_t n = grid.num_patches();
  if (query.masked) {
    PatchMask mask = PatchMask::none(n);
    mask.bits[query.row * grid.grid_w + query.col] = 1;
    mask.ratio = 1.0 / static_cast<double>(n);
    views[query.view] = make_masked_view<T>(images[query.view], grid, std::move(mask));
  }
  AttentionCapture cap;
  cap.query = query.view * n + query.row * grid.grid_w + query.col;
  ForwardOptions opts;
  opts.capture = &cap;
  opts.capture_block = block;
  {
    NoGradGuard guard;
    forward<T>(views, views.size(), params, opts);
  }
  AttentionMap out;
  out.views = views.size();
  out.patches = n;
  out.weights = cap.weights;
  out.per_view = cap.weights;
  for (std::size_t v = 0; v < out.views; ++v) {
    const auto first = out.per_view.begin() + static_cast<std::ptrdiff_t>(v * n);
    const double total = std::accumulate(first, first + static_cast<std::ptrdiff_t>(n), 0.0);
    if (total > 0)
      for (auto it = first; it != first + static_cast<std::ptrdiff_t>(n); ++it) *it /= total;
  }
  return out;
}

#define MUM_INSTANTIATE_MODEL(T)                                                                             \
  template struct ModelParams<T>;                                                                           \
  template ModelParams<T> init_params<T>(const ModelConfig&, Rng&);                                         \
  template TokenSet<T> encode<T>(std::span<const MaskedViewTokens<T>>, std::size_t, const ModelParams<T>&); \
  template Tensor<T> decode<T>(const TokenSet<T>&, std::span<const MaskedViewTokens<T>>, std::size_t,       \
                               const ModelParams<T>&, const ForwardOptions&);                               \
  template Tensor<T> forward<T>(std::span<const MaskedViewTokens<T>>, std::size_t, const ModelParams<T>&,   \
                                const ForwardOptions&);                                                     \
  template Tensor<T> extract_features<T>(std::span<const Image>, std::size_t, const ModelParams<T>&);       \
  template AttentionMap attention_map<T>(std::span<const Image>, AttentionQuery, std::size_t,               \
                                         const ModelParams<T>&);

MUM_INSTANTIATE_MODEL(float)
MUM_INSTANTIATE_MODEL(double)

template ModelParams<double> cast_params<double, float>(const ModelParams<float>&);
template ModelParams<float> cast_params<float, double>(const ModelParams<double>&);
template ModelParams<float> cast_params<float, float>(const ModelParams<float>&);
template ModelParams<double> cast_params<double, double>(const ModelParams<double>&);

}  // namespace mum

// Copyright 2026 The MuM Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <map>
#include <random>

#include "doctest.h"
#include "mum/masking.hpp"
#include "test_util.hpp"

namespace {

mum::Image random_image(std::size_t h, std::size_t w, std::mt19937_64& rng) {
  mum::Image img(3, h, w);
  std::uniform_real_distribution<float> u(0, 1);
  for (auto& v : img.data) v = u(rng);
  return img;
}

unsigned mask_code(const mum::PatchMask& m) {
  unsigned code = 0;
  for (std::size_t i = 0; i < m.size(); ++i) code |= static_cast<unsigned>(m.bits[i]) << i;
  return code;
}

}  // namespace

TEST_CASE("mask cardinality") {
  mum::Rng rng(1);
  CHECK(mum::sample_mask(256, 0.75, rng).masked_count() == 192);
  CHECK(mum::sample_mask(256, 0.0, rng).masked_count() == 0);
  CHECK(mum::sample_mask(256, 1.0, rng).masked_count() == 256);
  CHECK(mum::sample_mask(8, 0.75, rng).masked_count() == 6);
  // Exact halves round down: 0.5 * 5 = 2.5 -> 2.
  CHECK(mum::masked_count_for(5, 0.5) == 2);
  CHECK(mum::masked_count_for(64, 0.65) == 42);
  CHECK_THROWS_AS(mum::sample_mask(4, 1.5, rng), mum::ContractError);
  CHECK_THROWS_AS(mum::sample_mask(4, -0.1, rng), mum::ContractError);
}

TEST_CASE("N=8, gamma=0.75: every 6-subset is equally likely") {
  mum::Rng rng(2024);
  std::map<unsigned, int> counts;
  const int draws = 100000;
  for (int i = 0; i < draws; ++i) counts[mask_code(mum::sample_mask(8, 0.75, rng))]++;
  REQUIRE(counts.size() == 28);
  const double expected = draws / 28.0;
  double chi2 = 0;
  for (const auto& [code, c] : counts) chi2 += (c - expected) * (c - expected) / expected;
  // 27 degrees of freedom; 0.999 quantile is about 55.5.
  CHECK(chi2 < 55.5);
}

TEST_CASE("masks of different views are independent") {
  mum::Rng rng(7);
  std::map<std::pair<unsigned, unsigned>, int> joint;
  std::map<unsigned, int> first, second;
  const int draws = 100000;
  for (int i = 0; i < draws; ++i) {
    const unsigned a = mask_code(mum::sample_mask(4, 0.5, rng));
    const unsigned b = mask_code(mum::sample_mask(4, 0.5, rng));
    joint[{a, b}]++;
    first[a]++;
    second[b]++;
  }
  double chi2 = 0;
  for (const auto& [a, ca] : first)
    for (const auto& [b, cb] : second) {
      const double e = static_cast<double>(ca) * cb / draws;
      const double o = joint[{a, b}];
      chi2 += (o - e) * (o - e) / e;
    }
  // (6-1)*(6-1) = 25 degrees of freedom; 0.999 quantile is about 52.6.
  CHECK(chi2 < 52.6);
}

TEST_CASE("property: sampled masks always hit round(gamma*N)") {
  mum::Rng rng(3);
  for (std::size_t n : {1u, 4u, 7u, 64u, 100u, 256u})
    for (double g : {0.0, 0.1, 0.5, 0.65, 0.75, 0.85, 0.9, 1.0})
      for (int i = 0; i < 50; ++i) {
        const auto m = mum::sample_mask(n, g, rng);
        CHECK(m.masked_count() == mum::masked_count_for(n, g));
        CHECK(std::abs(static_cast<double>(m.masked_count()) - g * n) <= 0.5);
      }
}

TEST_CASE("patchify layout, sizes and round trip") {
  std::mt19937_64 rng(4);
  const auto big = mum::PatchGrid::for_image(256, 256, 16);
  CHECK(big.num_patches() == 256);
  CHECK(big.patch_dim() == 768);
  const auto small = mum::PatchGrid::for_image(32, 32, 16);
  CHECK(small.num_patches() == 4);
  CHECK_THROWS_AS(mum::PatchGrid::for_image(33, 32, 16), mum::DimensionError);

  const auto grid = mum::PatchGrid::for_image(16, 24, 8);
  const mum::Image img = random_image(16, 24, rng);
  const auto p = mum::patchify<double>(img, grid);
  CHECK(p.shape() == mum::Shape{6, 192});
  // Row 4 is patch (1, 1); entry (ch=2, dy=3, dx=5).
  CHECK(p.at(4 * 192 + (2 * 8 + 3) * 8 + 5) == img.at(2, 8 + 3, 8 + 5));
  CHECK(mum::unpatchify(p, grid).data == img.data);
  CHECK(mum::unpatchify(mum::patchify<float>(img, grid), grid).data == img.data);
  CHECK_THROWS_AS(mum::patchify<float>(random_image(16, 16, rng), grid), mum::DimensionError);
}

TEST_CASE("normalized pixel target") {
  using T64 = mum::Tensor<double>;
  const T64 constant = T64::full({1, 12}, 0.4);
  const T64 zeroed = mum::pixel_target(constant, true);
  for (double v : zeroed.values()) CHECK(v == 0.0);
  std::vector<double> two(12);
  for (std::size_t i = 0; i < 12; ++i) two[i] = i % 2 ? 2.0 : 0.0;
  const T64 pm = mum::pixel_target(T64::from({1, 12}, two), true);
  for (double v : pm.values())
    CHECK(std::abs(std::abs(v) - 1.0) < 1e-5);
  const T64 raw = T64::from({1, 12}, two);
  const auto same = mum::pixel_target(raw, false);
  for (std::size_t i = 0; i < 12; ++i) CHECK(same.at(i) == raw.at(i));

  std::mt19937_64 rng(6);
  const double eps = 1e-6;
  for (int trial = 0; trial < 50; ++trial) {
    const auto x = mum::test::random_tensor({5, 48}, rng, 0, 1);
    const auto y = mum::pixel_target(x, true, eps);
    for (std::size_t r = 0; r < 5; ++r) {
      double mu = 0, var = 0;
      for (std::size_t j = 0; j < 48; ++j) mu += y.at(r * 48 + j);
      mu /= 48;
      for (std::size_t j = 0; j < 48; ++j) var += (y.at(r * 48 + j) - mu) * (y.at(r * 48 + j) - mu);
      const double sd = std::sqrt(var / 48);
      CHECK(std::abs(mu) < 1e-6);
      CHECK(sd >= 1 - 10 * eps);
      CHECK(sd <= 1.0);
    }
  }
}

TEST_CASE("reference view") {
  mum::Rng rng(8);
  std::vector<mum::PatchMask> masks;
  for (int i = 0; i < 3; ++i) masks.push_back(mum::sample_mask(16, 0.75, rng));
  const auto ref = mum::apply_reference_view(masks, true);
  CHECK(ref[0].masked_count() == 0);
  CHECK(ref[1].bits == masks[1].bits);
  CHECK(ref[2].bits == masks[2].bits);
  const auto off = mum::apply_reference_view(masks, false);
  for (int i = 0; i < 3; ++i) CHECK(off[i].bits == masks[i].bits);
  const auto single = mum::apply_reference_view({masks[0]}, true);
  CHECK(single[0].masked_count() == 0);
  CHECK_THROWS_AS(mum::apply_reference_view({}, true), mum::ContractError);
}

TEST_CASE("masked view tokens") {
  std::mt19937_64 r(9);
  mum::Rng rng(9);
  const auto grid = mum::PatchGrid::for_image(32, 32, 8);
  const auto view = mum::make_masked_view<double>(random_image(32, 32, r), grid, mum::sample_mask(16, 0.75, rng));
  CHECK(view.visible_indices.size() == 4);
  CHECK(view.visible_patches.shape() == mum::Shape{4, 192});
  CHECK(view.target.shape() == mum::Shape{16, 192});
  for (std::size_t i = 1; i < view.visible_indices.size(); ++i)
    CHECK(view.visible_indices[i] > view.visible_indices[i - 1]);
  for (auto idx : view.visible_indices) CHECK(view.mask.bits[idx] == 0);
}

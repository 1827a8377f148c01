// Copyright 2026 The MuM Authors
// SPDX-License-Identifier: Apache-2.0

#include <png.h>

#include <cmath>
#include <fstream>
#include <set>

#include "doctest.h"
#include "mum/scene_data.hpp"
#include "mum/synthetic.hpp"
#include "test_util.hpp"

namespace {

std::vector<mum::FrameRecord> make_frames(std::size_t n, const std::string& scene = "s") {
  std::vector<mum::FrameRecord> frames;
  for (std::size_t i = 0; i < n; ++i)
    frames.push_back(mum::FrameRecord::in_memory(scene + std::to_string(i), scene, i, mum::Image(3, 2, 2)));
  return frames;
}

mum::OverlapMatrix overlap_from(std::size_t n, auto score) {
  mum::OverlapMatrix m;
  for (std::size_t i = 0; i < n; ++i) m.frame_ids.push_back("f" + std::to_string(i));
  m.scores.resize(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) m.scores[i * n + j] = i == j ? 0.0 : score(std::min(i, j), std::max(i, j));
  return m;
}

}  // namespace

TEST_CASE("chunked sequences") {
  auto seqs = mum::build_sequences_chunked(make_frames(250), 100);
  REQUIRE(seqs.size() == 3);
  CHECK(seqs[0].length() == 100);
  CHECK(seqs[1].length() == 100);
  CHECK(seqs[2].length() == 50);
  CHECK(mum::build_sequences_chunked(make_frames(1), 100).empty());
  CHECK(mum::build_sequences_chunked({}, 100).empty());
  seqs = mum::build_sequences_chunked(make_frames(100), 100);
  REQUIRE(seqs.size() == 1);
  CHECK(seqs[0].length() == 100);
  // A trailing singleton is dropped.
  CHECK(mum::build_sequences_chunked(make_frames(201), 100).size() == 2);
}

TEST_CASE("property: chunks partition the input before the length filter") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + rng() % 300, chunk = 2 + rng() % 120;
    const auto frames = make_frames(n);
    const auto seqs = mum::build_sequences_chunked(frames, chunk);
    std::size_t cursor = 0;
    for (const auto& s : seqs) {
      CHECK(s.length() <= chunk);
      for (const auto& f : s.frames) CHECK(f.frame_id() == frames[cursor++].frame_id());
    }
    // Everything was covered except possibly one dropped trailing frame.
    CHECK((cursor == n || (cursor == n - 1 && n % chunk == 1)));
  }
}

TEST_CASE("chained sequences") {
  const auto zero = overlap_from(5, [](std::size_t, std::size_t) { return 0.0; });
  CHECK(mum::build_sequences_chained(zero, 10, 2, 1).empty());

  const auto tri = overlap_from(5, [](std::size_t i, std::size_t j) { return j == i + 1 ? 0.5 : 0.0; });
  CHECK(mum::chain_from_anchor(tri, 0) == std::vector<std::size_t>{0, 1, 2, 3, 4});

  const auto full = overlap_from(6, [](std::size_t i, std::size_t j) { return 1.0 + 0.1 * ((i * 7 + j) % 5); });
  const auto seqs = mum::build_sequences_chained(full, 3, 2, 99);
  REQUIRE(seqs.size() == 3);
  for (const auto& s : seqs) CHECK(std::set<std::string>(s.begin(), s.end()).size() == 6);
  CHECK(mum::build_sequences_chained(full, 3, 2, 99) == seqs);

  mum::OverlapMatrix bad = full;
  bad.scores[1] = 5.0;
  CHECK_THROWS_AS(mum::build_sequences_chained(bad, 1, 1, 0), mum::ContractError);
}

TEST_CASE("property: chains never repeat and follow positive overlap") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0, 1);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + rng() % 20;
    std::vector<double> s(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) s[i * n + j] = s[j * n + i] = u(rng) < 0.3 ? u(rng) : 0.0;
    mum::OverlapMatrix m;
    for (std::size_t i = 0; i < n; ++i) m.frame_ids.push_back(std::to_string(i));
    m.scores = s;
    for (std::size_t a = 0; a < n; ++a) {
      const auto chain = mum::chain_from_anchor(m, a);
      CHECK(std::set<std::size_t>(chain.begin(), chain.end()).size() == chain.size());
      for (std::size_t k = 1; k < chain.size(); ++k) CHECK(m.score(chain[k - 1], chain[k]) > 0.0);
    }
  }
}

TEST_CASE("homography warps: identity and translation") {
  const auto id = mum::homography_warp(mum::Homography::identity(), 32, 40, "a", "b");
  for (std::size_t y = 0; y < 32; ++y)
    for (std::size_t x = 0; x < 40; ++x) {
      CHECK(id.x(y, x) == x);
      CHECK(id.y(y, x) == y);
      CHECK(id.is_valid(y, x));
    }
  const auto tr = mum::homography_warp(mum::Homography::translation(10, 0), 32, 40, "a", "b");
  for (std::size_t y = 0; y < 32; ++y)
    for (std::size_t x = 0; x < 40; ++x) {
      CHECK(tr.x(y, x) == x + 10.0);
      CHECK(tr.y(y, x) == y);
      CHECK(tr.is_valid(y, x) == (x < 30));
    }
}

TEST_CASE("synthetic scene: composition, invertibility, determinism") {
  const auto scene = mum::generate_synthetic_scene(17, 3, 48, 64);
  REQUIRE(scene.sequence.length() == 3);
  REQUIRE(scene.warps.size() == 6);
  for (const auto& f : scene.sequence.frames) {
    const auto& img = f.image();
    CHECK(img.channels == 3);
    CHECK(img.height == 48);
    CHECK(img.width == 64);
    for (float v : img.data) CHECK((v >= 0.0f && v <= 1.0f));
  }
  const auto& w01 = scene.warp(0, 1);
  const auto& w02 = scene.warp(0, 2);
  const mum::Homography h2_from_1 = scene.view_from_reference[2] * scene.view_from_reference[1].inverse();
  const mum::Homography h0_from_1 = scene.view_from_reference[0] * scene.view_from_reference[1].inverse();
  double worst_compose = 0, worst_inverse = 0;
  std::size_t checked = 0;
  for (std::size_t y = 0; y < 48; ++y)
    for (std::size_t x = 0; x < 64; ++x) {
      if (!w01.is_valid(y, x) || !w02.is_valid(y, x)) continue;
      const auto p = h2_from_1.apply(w01.x(y, x), w01.y(y, x));
      worst_compose = std::max({worst_compose, std::abs(p[0] - w02.x(y, x)), std::abs(p[1] - w02.y(y, x))});
      const auto back = h0_from_1.apply(w01.x(y, x), w01.y(y, x));
      worst_inverse = std::max({worst_inverse, std::abs(back[0] - double(x)), std::abs(back[1] - double(y))});
      ++checked;
    }
  CHECK(checked > 500);
  CHECK(worst_compose < 1e-6);
  CHECK(worst_inverse < 1e-4);

  const auto again = mum::generate_synthetic_scene(17, 3, 48, 64);
  CHECK(again.sequence.frames[2].image().data == scene.sequence.frames[2].image().data);
  const auto other = mum::generate_synthetic_scene(18, 3, 48, 64);
  CHECK(other.sequence.frames[0].image().data != scene.sequence.frames[0].image().data);
  CHECK_THROWS_AS(mum::generate_synthetic_scene(1, 0, 48, 64), mum::ContractError);
  CHECK_THROWS_AS(mum::generate_synthetic_scene(1, 2, 16, 64), mum::ContractError);
}

TEST_CASE("warp binary layout round-trips and flips") {
  mum::test::TempDir dir;
  const auto scene = mum::generate_synthetic_scene(4, 2, 32, 32);
  const auto& w = scene.warp(0, 1);
  mum::write_warp(dir.path() / "w.bin", w);
  const auto r = mum::read_warp(dir.path() / "w.bin");
  CHECK(r.height == 32);
  CHECK(r.valid == w.valid);
  for (std::size_t i = 0; i < w.warp.size(); ++i) CHECK(r.warp[i] == static_cast<float>(w.warp[i]));
  CHECK(std::filesystem::file_size(dir.path() / "w.bin") == 16 + 32 * 32 * 2 * 4 + 32 * 32);

  const auto tr = mum::homography_warp(mum::Homography::translation(3, 0), 32, 32, "a", "b");
  const auto both = mum::flip_warp(tr, true, true, 32);
  // Flipping both frames turns a shift right into a shift left.
  CHECK(both.x(5, 20) == doctest::Approx(17.0));
  CHECK(both.is_valid(5, 0) == false);
  CHECK(both.is_valid(5, 31));
}

TEST_CASE("manifest loading") {
  mum::test::TempDir dir;
  const auto scene = mum::generate_synthetic_scene(2, 3, 32, 32);
  for (int s = 0; s < 2; ++s)
    for (int f = 0; f < 3; ++f)
      mum::write_mumf(dir.path() / ("s" + std::to_string(s) + "_" + std::to_string(f) + ".mumf"),
                      scene.sequence.frames[f].image());
  const auto write = [&](const std::string& text) {
    std::ofstream(dir.path() / "manifest.json") << text;
    return dir.path() / "manifest.json";
  };
  auto path = write(R"({"scenes":[
    {"scene_id":"s0","frames":[{"frame_id":"a2","path":"s0_2.mumf","order_index":2},
                               {"frame_id":"a0","path":"s0_0.mumf","order_index":0},
                               {"frame_id":"a1","path":"s0_1.mumf","order_index":1}]},
    {"scene_id":"s1","frames":[{"frame_id":"b0","path":"s1_0.mumf","order_index":0},
                               {"frame_id":"b1","path":"s1_1.mumf","order_index":1},
                               {"frame_id":"b2","path":"s1_2.mumf","order_index":2}]}]})");
  auto seqs = mum::load_manifest(path);
  REQUIRE(seqs.size() == 2);
  CHECK(seqs[0].length() == 3);
  CHECK(seqs[1].length() == 3);
  CHECK(seqs[0].frames[0].frame_id() == "a0");
  CHECK(seqs[1].frames[2].image().data == scene.sequence.frames[2].image().data);

  path = write(R"({"scenes":[{"scene_id":"s0","frames":[{"frame_id":"gone","path":"nope.mumf","order_index":0}]}]})");
  try {
    (void)mum::load_manifest(path);
    FAIL("expected IngestionError");
  } catch (const mum::IngestionError& e) {
    CHECK(e.frame_id() == "gone");
  }

  CHECK(mum::load_manifest(write(R"({"scenes":[]})")).empty());
  CHECK(mum::load_manifest(write("")).empty());

  try {
    (void)mum::load_manifest(write(R"({"scenes":[{"scene_id":"s0","frames":[{"frame_id":3}]}]})"));
    FAIL("expected ManifestError");
  } catch (const mum::ManifestError& e) {
    CHECK(std::string(e.what()).find("scenes[0].frames[0].frame_id") != std::string::npos);
  }
  try {
    (void)mum::load_manifest(write("{\n  \"scenes\": [\n  oops"));
    FAIL("expected ManifestError");
  } catch (const mum::ManifestError& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }

  std::ofstream(dir.path() / "corrupt.mumf") << "MUMFxx";
  path = write(R"({"scenes":[{"scene_id":"s0","frames":[{"frame_id":"bad","path":"corrupt.mumf","order_index":0}]}]})");
  seqs = mum::load_manifest(path);
  CHECK_THROWS_AS((void)seqs[0].frames[0].image(), mum::IngestionError);
}

TEST_CASE("8-bit PNG frames are normalized to [0, 1]") {
  mum::test::TempDir dir;
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  png.width = 4;
  png.height = 2;
  png.format = PNG_FORMAT_RGB;
  std::vector<png_byte> px(4 * 2 * 3);
  for (std::size_t i = 0; i < px.size(); ++i) px[i] = static_cast<png_byte>(i * 10);
  const auto file = dir.path() / "x.png";
  REQUIRE(png_image_write_to_file(&png, file.c_str(), 0, px.data(), 0, nullptr));
  const mum::Image img = mum::read_image(file);
  CHECK(img.channels == 3);
  CHECK(img.width == 4);
  CHECK(img.at(1, 0, 0) == doctest::Approx(10.0 / 255.0));
  CHECK(img.at(2, 1, 3) == doctest::Approx(230.0 / 255.0));
}

TEST_CASE("bilinear resize and flip") {
  mum::Image img(1, 2, 2);
  img.data = {0, 1, 2, 3};
  const auto same = mum::resize_bilinear(img, 2, 2);
  CHECK(same.data == img.data);
  const auto up = mum::resize_bilinear(img, 4, 4);
  CHECK(up.at(0, 0, 0) == 0.0f);
  CHECK(up.at(0, 3, 3) == 3.0f);
  CHECK(up.at(0, 0, 1) == doctest::Approx(0.25));
  CHECK(mum::flip_horizontal(img).data == std::vector<float>{1, 0, 3, 2});
}

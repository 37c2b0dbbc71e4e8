#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "oxgen/error.hpp"
#include "oxgen/imaging.hpp"
#include "support.hpp"

using namespace oxgen;
using stages::FlipAxis;

namespace {

BoxAnnotation box_with_long_side(double side) { return {"i", 0, 0, side, side / 2}; }

Image gray(int w, int h, std::uint8_t v) { return Image(w, h, 3, v); }

std::vector<PointLabel> pts(std::initializer_list<std::pair<double, double>> xy) {
  std::vector<PointLabel> out;
  for (auto [x, y] : xy) out.push_back({x, y, std::nullopt});
  return out;
}

AugmentConfig only(std::initializer_list<AugmentStage> on) {
  AugmentConfig c = AugmentConfig::disabled_random_stages();
  for (auto s : on) c.probability[static_cast<std::size_t>(s)] = 1.0;
  return c;
}

}  // namespace

TEST_CASE("estimate_scale uses the median long side") {
  std::vector<BoxAnnotation> b{box_with_long_side(200)};
  CHECK(estimate_scale(b, 100) == doctest::Approx(0.5));
  b = {box_with_long_side(80), box_with_long_side(120)};
  CHECK(estimate_scale(b, 100) == doctest::Approx(1.0));
  b = {box_with_long_side(400), box_with_long_side(50), box_with_long_side(100)};
  CHECK(estimate_scale(b, 70) == doctest::Approx(0.7));
  // Long side is max(w, h), not w.
  b = {BoxAnnotation{"i", 0, 0, 20, 50}};
  CHECK(estimate_scale(b, 100) == doctest::Approx(2.0));

  b.clear();
  try {
    estimate_scale(b, 100);
    FAIL("expected InputError");
  } catch (const InputError& e) {
    CHECK(std::string(e.what()).find("no animals to calibrate") != std::string::npos);
  }
  b = {box_with_long_side(10)};
  CHECK_THROWS_AS(estimate_scale(b, 0), ConfigError);
}

TEST_CASE("resize at scale 1 is the identity") {
  const Image img = testing::random_image(31, 17, 3);
  CHECK(resize_bilinear(img, 1.0) == img);
  const PointLabel p{40, 80, std::nullopt};
  CHECK(scale_point(p, 1.0).x == 40);
}

TEST_CASE("resize halves dimensions and labels") {
  const Image img = testing::random_image(100, 100, 4);
  const Image out = resize_bilinear(img, 0.5);
  CHECK(out.width == 50);
  CHECK(out.height == 50);
  const auto p = scale_point({40, 80, std::nullopt}, 0.5);
  CHECK(p.x == 20);
  CHECK(p.y == 40);
  const auto b = scale_box({"i", 10, 20, 30, 40}, 0.5);
  CHECK(b.x_min == 5);
  CHECK(b.box_h == 20);
}

TEST_CASE("bilinear upscale of a 2x2 raster") {
  Image img(2, 2, 1, 0);
  img.at(1, 1) = 100;
  const Image out = resize_bilinear(img, 2.0);
  REQUIRE(out.width == 4);
  // Pixel-centre taps: output 1 and 2 sample source 0.25 and 0.75.
  CHECK(out.at(0, 0) == 0);
  CHECK(out.at(1, 1) == 6);   // 100 * 0.25 * 0.25
  CHECK(out.at(2, 2) == 56);  // 100 * 0.75 * 0.75
  CHECK(out.at(3, 3) == 100);
  CHECK(out.at(3, 2) == 75);
  for (auto v : out.pixels) {
    CHECK(v >= 0);
    CHECK(v <= 100);
  }
}

TEST_CASE("resize rejects a zero output dimension") {
  CHECK_THROWS_AS(resize_bilinear(gray(3, 3, 1), 0.1), InputError);
  CHECK(scaled_dimension(10, 0.15) == 2);
}

TEST_CASE("brightness and contrast saturate") {
  const Image img = gray(1, 1, 100);
  CHECK(stages::brightness_contrast(img, 0.2, 0.2).at(0, 0) == 171);  // 1.2 * 100 + 51
  CHECK(stages::brightness_contrast(gray(1, 1, 250), 0.55, 1.0).at(0, 0) == 255);
  CHECK(stages::brightness_contrast(gray(1, 1, 10), -0.45, -0.6).at(0, 0) == 0);
  const Image r = testing::random_image(40, 40, 9);
  const Image o = stages::brightness_contrast(r, 0.55, 1.0);
  CHECK(o.pixels.size() == r.pixels.size());
}

TEST_CASE("HSV shifts on the 8-bit scale") {
  Image red(1, 1);
  red.at(0, 0, 0) = 255;
  const Image shifted = stages::hue_saturation_value(red, 6, 0, 0);  // +12 degrees
  CHECK(shifted.at(0, 0, 0) == 255);
  CHECK(shifted.at(0, 0, 1) == 51);
  CHECK(shifted.at(0, 0, 2) == 0);
  CHECK(stages::hue_saturation_value(gray(1, 1, 100), 0, 0, 20).at(0, 0, 1) == 120);
  CHECK(stages::hue_saturation_value(gray(1, 1, 250), 0, 0, 20).at(0, 0, 1) == 255);
  // Hue wraps: red shifted back by 6 lands at 348 degrees.
  const Image wrapped = stages::hue_saturation_value(red, -6, 0, 0);
  CHECK(wrapped.at(0, 0, 0) == 255);
  CHECK(wrapped.at(0, 0, 2) == 51);
  const Image r = testing::random_image(16, 16, 12);
  CHECK(stages::hue_saturation_value(r, 0, 0, 0) == r);
}

TEST_CASE("flip maps x to W-1-x and is an involution") {
  const Image img = testing::random_image(512, 512, 5);
  auto labels = pts({{10, 20}});
  stages::flip_labels(labels, FlipAxis::horizontal, 512, 512);
  CHECK(labels[0].x == 501);
  CHECK(labels[0].y == 20);
  stages::flip_labels(labels, FlipAxis::horizontal, 512, 512);
  CHECK(labels[0].x == 10);
  const Image once = stages::flip(img, FlipAxis::horizontal);
  CHECK(once.at(501, 20, 1) == img.at(10, 20, 1));
  CHECK(stages::flip(once, FlipAxis::horizontal) == img);
  CHECK(stages::flip(stages::flip(img, FlipAxis::vertical), FlipAxis::vertical) == img);
}

TEST_CASE("rotate90 turns counter-clockwise") {
  Image img(3, 2, 1, 0);
  img.at(2, 0) = 9;  // top-right
  const Image r = stages::rotate90(img, 1);
  CHECK(r.width == 2);
  CHECK(r.height == 3);
  CHECK(r.at(0, 0) == 9);  // becomes top-left
  auto labels = pts({{2, 0}});
  stages::rotate90_labels(labels, 1, 3, 2);
  CHECK(labels[0].x == 0);
  CHECK(labels[0].y == 0);

  const Image sq = testing::random_image(37, 23, 8);
  Image cur = sq;
  auto l = pts({{3, 4}, {36, 22}});
  const auto l0 = l;
  int w = 37, h = 23;
  for (int i = 0; i < 4; ++i) {
    cur = stages::rotate90(cur, 1);
    stages::rotate90_labels(l, 1, w, h);
    std::swap(w, h);
  }
  CHECK(cur == sq);
  for (std::size_t i = 0; i < l.size(); ++i) {
    CHECK(l[i].x == l0[i].x);
    CHECK(l[i].y == l0[i].y);
  }
  CHECK(stages::rotate90(sq, 4) == sq);
  CHECK(stages::rotate90(sq, 2) == stages::rotate90(stages::rotate90(sq, 1), 1));
}

TEST_CASE("box blur windows") {
  Image row(5, 1, 1, 0);
  row.at(2, 0) = 90;
  const Image k3 = stages::box_blur(row, 3);
  CHECK(k3.at(0, 0) == 0);
  CHECK(k3.at(1, 0) == 30);
  CHECK(k3.at(2, 0) == 30);
  CHECK(k3.at(3, 0) == 30);
  CHECK(k3.at(4, 0) == 0);
  // Even kernels anchor the window at the top-left: output x covers [x, x+1].
  const Image k2 = stages::box_blur(row, 2);
  CHECK(k2.at(1, 0) == 45);
  CHECK(k2.at(2, 0) == 45);
  CHECK(k2.at(3, 0) == 0);
  const Image flat = gray(9, 9, 77);
  CHECK(stages::box_blur(flat, 4) == flat);
}

TEST_CASE("pad and crop") {
  Image img = gray(510, 509, 1);
  const auto [left, top] = stages::pad_if_needed(img, 512, 512);
  CHECK(left == 1);
  CHECK(top == 1);
  CHECK(img.width == 512);
  CHECK(img.height == 512);
  CHECK(img.at(0, 0, 0) == 0);
  CHECK(img.at(1, 1, 0) == 1);
  CHECK(img.at(511, 511, 0) == 0);  // extra pixel on the bottom/right
  CHECK(img.at(510, 509, 0) == 1);

  Image big = gray(600, 512, 2);
  const auto [x0, y0] = stages::center_crop(big, 512, 512);
  CHECK(x0 == 44);
  CHECK(y0 == 0);
  CHECK(big.width == 512);
}

TEST_CASE("normalize produces planar floats") {
  Image img(2, 1);
  img.at(1, 0, 2) = 255;
  const auto t = stages::normalize(img, {0.5f, 0.5f, 0.5f}, {0.5f, 0.5f, 0.5f}, 255.0f);
  CHECK(t.channels == 3);
  CHECK(t.at(2, 1, 0) == doctest::Approx(1.0));
  CHECK(t.at(0, 0, 0) == doctest::Approx(-1.0));
}

TEST_CASE("augment with every random stage disabled only pads, crops, normalizes") {
  const Image patch = testing::random_image(512, 512, 21);
  const auto labels = pts({{10, 20}, {300.5, 511.9}});
  const auto r = augment(patch, labels, AugmentConfig::disabled_random_stages(), "p");
  CHECK(r.raster == patch);
  CHECK(r.trace.fired.empty());
  REQUIRE(r.labels.size() == 2);
  CHECK(r.labels[1].x == 300.5);
  CHECK(r.labels[1].y == 511.9);
  CHECK(r.tensor.at(0, 0, 0) == doctest::Approx((patch.at(0, 0, 0) / 255.0 - 0.485) / 0.229));
}

TEST_CASE("augment is deterministic per (seed, key)") {
  const Image patch = testing::random_image(512, 512, 22);
  const auto labels = pts({{100, 100}, {400, 50}});
  AugmentConfig cfg;
  cfg.seed = 1234;
  const auto a = augment(patch, labels, cfg, "img_0_0");
  const auto b = augment(patch, labels, cfg, "img_0_0");
  CHECK(a.raster == b.raster);
  CHECK(a.tensor == b.tensor);
  REQUIRE(a.labels.size() == b.labels.size());
  for (std::size_t i = 0; i < a.labels.size(); ++i) {
    CHECK(a.labels[i].x == b.labels[i].x);
    CHECK(a.labels[i].y == b.labels[i].y);
  }
  // A different key draws a different stream.
  bool differs = false;
  for (int i = 0; i < 8 && !differs; ++i)
    differs = augment(patch, labels, cfg, "k" + std::to_string(i)).raster != a.raster;
  CHECK(differs);
}

TEST_CASE("property: outputs are 512x512 and labels stay in range") {
  AugmentConfig cfg;
  cfg.seed = 99;
  for (int i = 0; i < 40; ++i) {
    const Image patch = testing::random_image(512, 512, 100 + static_cast<std::uint64_t>(i));
    Rng rng(static_cast<std::uint64_t>(i));
    std::vector<PointLabel> labels;
    for (int j = 0; j < 10; ++j) labels.push_back({rng.uniform(0, 511.999), rng.uniform(0, 511.999), std::nullopt});
    const auto r = augment(patch, labels, cfg, std::to_string(i));
    CHECK(r.raster.width == 512);
    CHECK(r.raster.height == 512);
    CHECK(r.tensor.data.size() == 3u * 512 * 512);
    for (const auto& l : r.labels) {
      CHECK(l.x >= 0);
      CHECK(l.x < 512);
      CHECK(l.y >= 0);
      CHECK(l.y < 512);
    }
  }
}

TEST_CASE("property: labels track a bright pixel through geometric stages") {
  for (int trial = 0; trial < 60; ++trial) {
    Rng rng(static_cast<std::uint64_t>(500 + trial));
    const int px = static_cast<int>(rng.between(20, 490));
    const int py = static_cast<int>(rng.between(20, 490));
    Image patch(512, 512, 3, 0);
    for (int c = 0; c < 3; ++c) patch.at(px, py, c) = 255;
    AugmentConfig cfg = only({AugmentStage::flip, AugmentStage::rotate90, AugmentStage::random_scale});
    cfg.seed = static_cast<std::uint64_t>(trial);
    const auto r = augment(patch, pts({{double(px), double(py)}}), cfg, "t");
    if (r.labels.empty()) continue;
    int bx = 0, by = 0, best = -1;
    for (int y = 0; y < r.raster.height; ++y)
      for (int x = 0; x < r.raster.width; ++x)
        if (r.raster.at(x, y, 0) > best) {
          best = r.raster.at(x, y, 0);
          bx = x;
          by = y;
        }
    CHECK(std::abs(r.labels[0].x - bx) <= 1.0);
    CHECK(std::abs(r.labels[0].y - by) <= 1.0);
  }
}

TEST_CASE("augment rejects non-RGB input and bad configs") {
  Image g(8, 8, 1);
  CHECK_THROWS_AS(augment(g, {}, AugmentConfig{}, "x"), InputError);
  AugmentConfig bad;
  bad.probability[0] = 1.5;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = AugmentConfig{};
  bad.brightness = {0.5, -0.5};
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("default augment ranges match the published parameters") {
  const AugmentConfig c;
  CHECK(c.brightness.lo == -0.45);
  CHECK(c.brightness.hi == 0.55);
  CHECK(c.contrast.lo == -0.60);
  CHECK(c.contrast.hi == 1.00);
  CHECK(c.hue_shift.hi == 5.0);
  CHECK(c.sat_shift.hi == 50.0);
  CHECK(c.val_shift.hi == 20.0);
  CHECK(c.scale_limit.lo == -0.15);
  CHECK(c.blur_min == 2);
  CHECK(c.blur_max == 4);
  for (double p : c.probability) CHECK(p == 0.5);
}

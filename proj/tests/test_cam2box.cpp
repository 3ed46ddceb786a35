/*!
 * Copyright (c) 2026 the surgpipe authors. All rights reserved.
 * Licensed under the Apache License 2.0. See LICENSE in the project root.
 */
#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "catch2/catch_amalgamated.hpp"
#include "oracles.hpp"
#include "surgpipe/cam2box.hpp"
#include "surgpipe/errors.hpp"

using namespace surgpipe;
using namespace surgpipe::cam2box;

namespace {

std::vector<double> random_values(std::mt19937_64& rng, std::size_t n,
                                  double lo = 0.0, double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> out(n);
  for (double& v : out) v = dist(rng);
  return out;
}

BinaryMask random_mask(std::mt19937_64& rng, std::size_t h, std::size_t w,
                       double fill) {
  std::bernoulli_distribution bit(fill);
  BinaryMask mask{h, w, std::vector<std::uint8_t>(h * w, 0)};
  for (auto& b : mask.bits) b = bit(rng) ? 1 : 0;
  return mask;
}

/// Sorts components by their lowest pixel index so BFS and flood-fill
/// discovery orders can be compared.
std::vector<Component> normalized(std::vector<Component> comps) {
  std::sort(comps.begin(), comps.end(),
            [](const Component& a, const Component& b) {
              return a.pixels.front() < b.pixels.front();
            });
  return comps;
}

bool same_components(const std::vector<Component>& a,
                     const std::vector<Component>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].pixels != b[i].pixels) return false;
    if (!(a[i].box == b[i].box)) return false;
  }
  return true;
}

bool same_detections(const std::vector<Detection>& a,
                     const std::vector<Detection>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!(a[i].box == b[i].box) || a[i].class_id != b[i].class_id ||
        a[i].score != b[i].score) {
      return false;
    }
  }
  return true;
}

}  // namespace

TEST_CASE("otsu_threshold separates a bimodal sample") {
  // Two well separated clusters; the threshold must fall between them.
  std::vector<double> values;
  std::mt19937_64 rng(3);
  std::normal_distribution<double> low(0.2, 0.02);
  std::normal_distribution<double> high(0.8, 0.02);
  for (int i = 0; i < 400; ++i) values.push_back(low(rng));
  for (int i = 0; i < 100; ++i) values.push_back(high(rng));
  const double t = otsu_threshold(values, 256);
  // Ties across the empty gap resolve to the lowest candidate, so the
  // threshold sits just above the low cluster. Assert the split itself.
  const double low_max = *std::max_element(values.begin(),
                                           values.begin() + 400);
  const double high_min = *std::min_element(values.begin() + 400,
                                            values.end());
  CHECK(t >= low_max);
  CHECK(t < high_min);
  std::size_t above = 0;
  for (const double v : values) above += v > t ? 1 : 0;
  CHECK(above == 100);
}

TEST_CASE("otsu_threshold error cases") {
  CHECK_THROWS_AS(otsu_threshold(std::vector<double>{}, 256), EmptyInputError);
  CHECK_THROWS_AS(otsu_threshold(std::vector<double>{1.0, 2.0}, 1),
                  ConfigError);
  CHECK_THROWS_AS(otsu_threshold(std::vector<double>(10, 0.5), 256),
                  NoSeparationError);
}

TEST_CASE("otsu_threshold matches the exhaustive oracle exactly") {
  // Both sides compute variances from integer-valued doubles using the same
  // expression, so results must agree bit for bit.
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t n = 50 + static_cast<std::size_t>(trial) * 13;
    std::vector<double> values = random_values(rng, n);
    if (trial % 3 == 0) {
      // Bias towards bimodal inputs.
      for (std::size_t i = 0; i < n / 2; ++i) values[i] *= 0.3;
    }
    const std::size_t bins = (trial % 2 == 0) ? 256 : 64;
    CHECK(otsu_threshold(values, bins) ==
          oracle::otsu_exhaustive(values, bins));
  }
}

TEST_CASE("otsu_threshold is invariant to positive scaling of the map") {
  // Scaling all values by s scales threshold by s, so the binarized mask is
  // unchanged. Power-of-two scales are float-exact; 3.0 is checked loosely.
  std::mt19937_64 rng(23);
  std::vector<double> values = random_values(rng, 500);
  const double base = otsu_threshold(values, 256);
  for (const double s : {0.5, 2.0, 4.0}) {
    std::vector<double> scaled = values;
    for (double& v : scaled) v *= s;
    CHECK(otsu_threshold(scaled, 256) == s * base);
  }
  std::vector<double> tripled = values;
  for (double& v : tripled) v *= 3.0;
  CHECK(otsu_threshold(tripled, 256) ==
        Catch::Approx(3.0 * base).epsilon(1e-12));

  // The induced masks are identical for the exact scales.
  for (const double s : {0.5, 2.0}) {
    std::vector<double> scaled = values;
    for (double& v : scaled) v *= s;
    const double ts = otsu_threshold(scaled, 256);
    for (std::size_t i = 0; i < values.size(); ++i) {
      CHECK((values[i] > base) == (scaled[i] > ts));
    }
  }
}

TEST_CASE("binarize applies a strict threshold") {
  const std::vector<double> vals{0.1, 0.5, 0.9, 0.5};
  const BinaryMask mask = binarize(MapView{2, 2, vals}, 0.5);
  CHECK(mask.bits == std::vector<std::uint8_t>{0, 0, 1, 0});
}

TEST_CASE("connected_components on a hand-checked mask") {
  // Two diagonal pixels: one component under 8-connectivity, two under 4.
  BinaryMask mask{3, 3, {1, 0, 0,
                         0, 1, 0,
                         0, 0, 0}};
  const auto c8 = connected_components(mask, 8);
  REQUIRE(c8.size() == 1);
  CHECK(c8[0].area() == 2);
  CHECK(c8[0].box == BoundingBox{0.0, 0.0, 2.0, 2.0});

  const auto c4 = connected_components(mask, 4);
  REQUIRE(c4.size() == 2);
  CHECK(c4[0].box == BoundingBox{0.0, 0.0, 1.0, 1.0});
  CHECK(c4[1].box == BoundingBox{1.0, 1.0, 2.0, 2.0});

  CHECK_THROWS_AS(connected_components(mask, 6), ConfigError);
}

TEST_CASE("connected_components matches a flood-fill oracle") {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t h = 8 + static_cast<std::size_t>(trial % 5) * 7;
    const std::size_t w = 9 + static_cast<std::size_t>(trial % 4) * 6;
    const double fill = 0.15 + 0.02 * static_cast<double>(trial % 20);
    const BinaryMask mask = random_mask(rng, h, w, fill);
    for (const int conn : {4, 8}) {
      const auto impl = normalized(connected_components(mask, conn));
      const auto ref = normalized(oracle::flood_fill_components(mask, conn));
      CHECK(same_components(impl, ref));
    }
  }
}

TEST_CASE("component pixel lists partition the mask") {
  std::mt19937_64 rng(37);
  const BinaryMask mask = random_mask(rng, 20, 25, 0.4);
  const auto comps = connected_components(mask, 8);
  std::vector<std::uint8_t> seen(mask.bits.size(), 0);
  std::size_t total = 0;
  for (const Component& c : comps) {
    for (std::size_t p : c.pixels) {
      CHECK(mask.bits[p] == 1);
      CHECK(seen[p] == 0);
      seen[p] = 1;
    }
    total += c.area();
  }
  const std::size_t expected = static_cast<std::size_t>(
      std::count(mask.bits.begin(), mask.bits.end(), 1));
  CHECK(total == expected);
}

TEST_CASE("dedup_boxes keeps the best scoring of overlapping boxes") {
  const BoundingBox a{0.0, 0.0, 10.0, 10.0};
  const BoundingBox shifted{1.0, 1.0, 11.0, 11.0};  // IoU with a ~ 0.68
  const BoundingBox apart{30.0, 30.0, 40.0, 40.0};
  std::vector<Detection> dets{
      {a, 0, 0.5, false}, {shifted, 0, 0.9, false}, {apart, 1, 0.3, false}};
  const auto kept = dedup_boxes(dets, 0.5);
  REQUIRE(kept.size() == 2);
  CHECK(kept[0].box == shifted);
  CHECK(kept[0].score == 0.9);
  CHECK(kept[1].box == apart);
}

TEST_CASE("dedup_boxes result is independent of candidate order") {
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> score(0.0, 1.0);
  std::uniform_int_distribution<int> cls(0, 2);
  std::uniform_int_distribution<int> coord(0, 20);
  std::uniform_int_distribution<int> extent(2, 10);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<Detection> dets;
    for (int i = 0; i < 12; ++i) {
      const double x = coord(rng);
      const double y = coord(rng);
      dets.push_back(Detection{
          BoundingBox{x, y, x + extent(rng), y + extent(rng)}, cls(rng),
          score(rng), false});
    }
    const auto baseline = dedup_boxes(dets, 0.5);
    CHECK(same_detections(baseline, oracle::dedup_reference(dets, 0.5)));
    std::vector<Detection> shuffled = dets;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    const auto again = dedup_boxes(shuffled, 0.5);
    CHECK(same_detections(baseline, again));
  }
}

TEST_CASE("average_maps averages elementwise") {
  HeatmapStack a(1, 1, 2, 2);
  HeatmapStack b(1, 1, 2, 2);
  a.at(0, 0, 0, 0) = 1.0;
  b.at(0, 0, 0, 0) = 3.0;
  b.at(0, 0, 1, 1) = 4.0;
  std::vector<HeatmapStack> maps{a, b};
  const HeatmapStack avg = average_maps(maps);
  CHECK(avg.at(0, 0, 0, 0) == 2.0);
  CHECK(avg.at(0, 0, 1, 1) == 2.0);
  CHECK(avg.at(0, 0, 0, 1) == 0.0);

  CHECK_THROWS_AS(average_maps(std::vector<HeatmapStack>{}), EmptyInputError);
  std::vector<HeatmapStack> mismatched{a, HeatmapStack(1, 1, 2, 3)};
  CHECK_THROWS_AS(average_maps(mismatched), ShapeError);
}

TEST_CASE("localize_frame finds a synthetic blob") {
  // One bright Gaussian blob on a positive-mean background so the presence
  // gate opens for class 0 only.
  HeatmapStack stack(1, 2, 32, 32);
  const double cx = 16.0;
  const double cy = 12.0;
  const double sigma = 3.0;
  for (std::size_t y = 0; y < 32; ++y) {
    for (std::size_t x = 0; x < 32; ++x) {
      const double dx = (static_cast<double>(x) - cx) / sigma;
      const double dy = (static_cast<double>(y) - cy) / sigma;
      stack.at(0, 0, y, x) = 4.0 * std::exp(-0.5 * (dx * dx + dy * dy));
      stack.at(0, 1, y, x) = -1.0;  // strongly absent class
    }
  }
  const LocalizeResult res = localize_frame(stack, 0);
  REQUIRE(res.frame.detections.size() == 1);
  const Detection& d = res.frame.detections[0];
  CHECK(d.class_id == 0);
  CHECK(d.score > 0.5);
  CHECK(d.box.x_min < cx);
  CHECK(d.box.x_max > cx);
  CHECK(d.box.y_min < cy);
  CHECK(d.box.y_max > cy);
  // The peak pixel carries normalized activation 1.0, so the score equals the
  // presence probability.
  double sum = 0.0;
  for (double v : stack.map_view(0, 0).values) sum += v;
  CHECK(d.score == Catch::Approx(sigmoid(sum / (32.0 * 32.0))).epsilon(1e-12));
}

TEST_CASE("localize_frame returns no boxes for an all-zero frame") {
  // Presence is sigmoid(0) == 0.5 which is not strictly above the gate.
  HeatmapStack stack(1, 3, 16, 16);
  const LocalizeResult res = localize_frame(stack, 0);
  CHECK(res.frame.detections.empty());
  CHECK(res.warnings.empty());
}

TEST_CASE("localize_frame warns on constant positive maps") {
  HeatmapStack stack(1, 1, 8, 8);
  for (std::size_t y = 0; y < 8; ++y) {
    for (std::size_t x = 0; x < 8; ++x) stack.at(0, 0, y, x) = 2.0;
  }
  const LocalizeResult res = localize_frame(stack, 0);
  CHECK(res.frame.detections.empty());
  REQUIRE(res.warnings.size() == 1);
  CHECK(res.warnings[0].find("constant activation") != std::string::npos);
}

TEST_CASE("localize_frame validates arguments") {
  HeatmapStack stack(1, 1, 8, 8);
  CHECK_THROWS_AS(localize_frame(stack, 1), ConfigError);
  LocalizeConfig bad;
  bad.connectivity = 5;
  CHECK_THROWS_AS(localize_frame(stack, 0, bad), ConfigError);
  bad = LocalizeConfig{};
  bad.presence_threshold = 1.5;
  CHECK_THROWS_AS(localize_frame(stack, 0, bad), ConfigError);
}

TEST_CASE("localize_frame is invariant to positive scaling in otsu mode") {
  std::mt19937_64 rng(47);
  HeatmapStack stack(1, 1, 24, 24);
  std::uniform_real_distribution<double> noise(0.0, 0.3);
  for (std::size_t y = 0; y < 24; ++y) {
    for (std::size_t x = 0; x < 24; ++x) {
      const double dx = (static_cast<double>(x) - 10.0) / 2.5;
      const double dy = (static_cast<double>(y) - 14.0) / 2.5;
      stack.at(0, 0, y, x) =
          2.0 * std::exp(-0.5 * (dx * dx + dy * dy)) + noise(rng);
    }
  }
  const auto base = localize_frame(stack, 0);
  REQUIRE_FALSE(base.frame.detections.empty());

  HeatmapStack doubled(1, 1, 24, 24);
  for (std::size_t i = 0; i < doubled.data().size(); ++i) {
    doubled.data()[i] = 2.0 * stack.data()[i];
  }
  const auto scaled = localize_frame(doubled, 0);
  // Boxes are unchanged; scores differ only through the presence factor.
  REQUIRE(scaled.frame.detections.size() == base.frame.detections.size());
  for (std::size_t i = 0; i < base.frame.detections.size(); ++i) {
    CHECK(scaled.frame.detections[i].box == base.frame.detections[i].box);
    CHECK(scaled.frame.detections[i].class_id ==
          base.frame.detections[i].class_id);
  }
}

TEST_CASE("localize_frame applies output box scaling") {
  HeatmapStack stack(1, 1, 16, 16);
  for (std::size_t y = 4; y < 10; ++y) {
    for (std::size_t x = 6; x < 12; ++x) stack.at(0, 0, y, x) = 5.0;
  }
  LocalizeConfig cfg;
  cfg.scale_x = 2.0;
  cfg.scale_y = 0.5;
  const auto plain = localize_frame(stack, 0);
  const auto scaled = localize_frame(stack, 0, cfg);
  REQUIRE(plain.frame.detections.size() == 1);
  REQUIRE(scaled.frame.detections.size() == 1);
  const BoundingBox& p = plain.frame.detections[0].box;
  const BoundingBox& s = scaled.frame.detections[0].box;
  CHECK(s.x_min == 2.0 * p.x_min);
  CHECK(s.x_max == 2.0 * p.x_max);
  CHECK(s.y_min == 0.5 * p.y_min);
  CHECK(s.y_max == 0.5 * p.y_max);
}

TEST_CASE("localize_frame min_component_area filters specks") {
  HeatmapStack stack(1, 1, 16, 16);
  // A 3x3 blob (area 9) and a single bright pixel (area 1).
  for (std::size_t y = 2; y < 5; ++y) {
    for (std::size_t x = 2; x < 5; ++x) stack.at(0, 0, y, x) = 4.0;
  }
  stack.at(0, 0, 12, 12) = 4.0;
  LocalizeConfig cfg;
  cfg.min_component_area = 4;
  const auto res = localize_frame(stack, 0, cfg);
  REQUIRE(res.frame.detections.size() == 1);
  CHECK(res.frame.detections[0].box == BoundingBox{2.0, 2.0, 5.0, 5.0});

  cfg.min_component_area = 1;
  const auto loose = localize_frame(stack, 0, cfg);
  CHECK(loose.frame.detections.size() == 2);
}

// Copyright 2026 The ctxfusion Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <algorithm>
#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "ctxfusion/boxfusion.hpp"
#include "ctxfusion/errors.hpp"
#include "oracles.hpp"

namespace ctxfusion {
namespace {

Detection det(double x1, double y1, double x2, double y2, double score, int label = kCar,
              BranchId branch = 0) {
  return {{x1, y1, x2, y2}, score, label, branch};
}

Detections random_dets(std::mt19937_64& gen, int n, int labels = 3) {
  std::uniform_real_distribution<double> pos(0, 100), size(5, 40);
  std::uniform_int_distribution<int> lab(1, labels), br(0, 3), sc(0, 20);
  Detections out;
  for (int i = 0; i < n; ++i) {
    const double x = pos(gen), y = pos(gen);
    // Coarse scores make ties common so the tie-break is exercised.
    out.push_back(det(x, y, x + size(gen), y + size(gen), sc(gen) / 20.0, lab(gen), br(gen)));
  }
  return out;
}

auto key(const Detection& d) {
  return std::make_tuple(d.label, d.score, d.branch, d.box.x1, d.box.y1, d.box.x2, d.box.y2);
}

Detections canonical(Detections d) {
  std::sort(d.begin(), d.end(), [](const Detection& a, const Detection& b) { return key(a) < key(b); });
  return d;
}

// Six detections from three branches; expected outputs worked out by hand.
std::map<BranchId, Detections> three_branch_fixture() {
  return {{0, {det(0, 0, 10, 10, 0.9), det(50, 50, 60, 70, 0.5, kPedestrian)}},
          {1, {det(2, 0, 12, 10, 0.6), det(200, 200, 220, 220, 0.005)}},
          {2, {det(0, 2, 10, 12, 0.3), det(51, 50, 61, 70, 0.5, kPedestrian)}}};
}

TEST(FusionConfig, ParseAndValidate) {
  EXPECT_EQ(parse_fusion_algorithm("nms"), FusionAlgorithm::kNms);
  EXPECT_EQ(parse_fusion_algorithm("soft_nms"), FusionAlgorithm::kSoftNms);
  EXPECT_EQ(parse_fusion_algorithm("wbf"), FusionAlgorithm::kWbf);
  EXPECT_THROW(parse_fusion_algorithm("mean"), ConfigError);
  FusionConfig cfg;
  EXPECT_EQ(cfg.iou_threshold, 0.4);
  EXPECT_EQ(cfg.skip_box_threshold, 0.01);
  EXPECT_EQ(cfg.sigma, 0.5);
  cfg.sigma = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = {};
  cfg.branch_weights[2] = -1;
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(Nms, Examples) {
  FusionConfig cfg;
  EXPECT_TRUE(nms({}, cfg).empty());
  const Detections one = {det(0, 0, 5, 5, 0.3)};
  EXPECT_EQ(nms(one, cfg), one);
  const auto out = nms({det(0, 0, 10, 10, 0.8), det(0, 0, 10, 10, 0.9)}, cfg);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].score, 0.9);
}

TEST(Nms, MatchesBruteForceOracle) {
  std::mt19937_64 gen(31);
  FusionConfig cfg;
  for (int i = 0; i < 200; ++i) {
    const auto d = random_dets(gen, 50);
    EXPECT_EQ(canonical(nms(d, cfg)), canonical(oracle::brute_nms(d, cfg.iou_threshold))) << i;
  }
}

TEST(Nms, Properties) {
  std::mt19937_64 gen(32);
  FusionConfig cfg;
  for (int i = 0; i < 100; ++i) {
    auto d = random_dets(gen, 40);
    const auto out = nms(d, cfg);
    for (const auto& o : out) EXPECT_NE(std::find(d.begin(), d.end(), o), d.end());
    for (std::size_t a = 0; a < out.size(); ++a)
      for (std::size_t b = a + 1; b < out.size(); ++b)
        if (out[a].label == out[b].label) EXPECT_LE(iou(out[a].box, out[b].box), cfg.iou_threshold);
    EXPECT_TRUE(std::is_sorted(out.begin(), out.end(),
                               [](const Detection& a, const Detection& b) { return a.score > b.score; }));
    std::shuffle(d.begin(), d.end(), gen);
    EXPECT_EQ(canonical(nms(d, cfg)), canonical(out));
  }
}

TEST(SoftNms, Examples) {
  FusionConfig cfg;
  const Detections disjoint = {det(0, 0, 1, 1, 0.9), det(5, 5, 6, 6, 0.8)};
  EXPECT_EQ(soft_nms(disjoint, cfg), disjoint);

  const auto out = soft_nms({det(0, 0, 10, 10, 0.9), det(0, 0, 10, 10, 0.8)}, cfg);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0].score, 0.9);
  EXPECT_NEAR(out[1].score, 0.8 * std::exp(-2.0), 1e-12);
  EXPECT_NEAR(out[1].score, 0.10827, 1e-5);

  std::mt19937_64 gen(33);
  const auto d = random_dets(gen, 30);
  cfg.sigma = 1e9;
  cfg.skip_box_threshold = 0;
  const auto same = soft_nms(d, cfg);
  ASSERT_EQ(same.size(), d.size());
  const auto a = canonical(same), b = canonical(d);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i].score, b[i].score, 1e-6);
}

TEST(SoftNms, ZeroSkipKeepsCount) {
  std::mt19937_64 gen(34);
  FusionConfig cfg;
  cfg.skip_box_threshold = 0;
  for (int i = 0; i < 50; ++i) {
    const auto d = random_dets(gen, 25);
    EXPECT_EQ(soft_nms(d, cfg).size(), d.size());
  }
}

TEST(Wbf, Examples) {
  FusionConfig cfg;
  const Detections one = {det(3, 4, 9, 9, 0.7)};
  EXPECT_EQ(wbf(one, cfg), one);

  cfg.iou_threshold = 0.2;  // the two boxes overlap at IoU 0.25
  const auto out = wbf({det(0, 0, 10, 10, 0.8), det(0, 0, 20, 20, 0.4)}, cfg);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_NEAR(out[0].box.x1, 0, 1e-9);
  EXPECT_NEAR(out[0].box.y1, 0, 1e-9);
  EXPECT_NEAR(out[0].box.x2, 40.0 / 3, 1e-9);
  EXPECT_NEAR(out[0].box.y2, 40.0 / 3, 1e-9);
  EXPECT_NEAR(out[0].score, 0.6, 1e-9);
}

TEST(Wbf, DoublingWeightsLeavesBoxes) {
  std::mt19937_64 gen(35);
  FusionConfig cfg;
  for (int i = 0; i < 50; ++i) {
    const auto d = random_dets(gen, 30);
    const auto base = wbf(d, cfg);
    FusionConfig doubled = cfg;
    for (BranchId b = 0; b < 4; ++b) doubled.branch_weights[b] = 2.0;
    const auto twice = wbf(d, doubled);
    ASSERT_EQ(base.size(), twice.size());
    for (std::size_t k = 0; k < base.size(); ++k) {
      EXPECT_NEAR(base[k].box.x1, twice[k].box.x1, 1e-9);
      EXPECT_NEAR(base[k].box.y2, twice[k].box.y2, 1e-9);
      EXPECT_NEAR(base[k].score, twice[k].score, 1e-12);
    }
  }
}

TEST(Wbf, FusedBoxInsideMemberEnvelope) {
  std::mt19937_64 gen(36);
  FusionConfig cfg;
  cfg.branch_weights = {{0, 0.5}, {1, 2.0}, {2, 1.0}, {3, 3.0}};
  for (int i = 0; i < 100; ++i) {
    const auto d = random_dets(gen, 30, 1);
    for (const auto& f : wbf(d, cfg)) {
      // Every fused box must lie within the envelope of the inputs it could have absorbed.
      double lo_x = 1e9, hi_x = -1e9;
      for (const auto& m : d)
        if (m.score >= cfg.skip_box_threshold && iou(m.box, f.box) > 0) {
          lo_x = std::min(lo_x, m.box.x1);
          hi_x = std::max(hi_x, m.box.x2);
        }
      EXPECT_GE(f.box.x1, lo_x - 1e-9);
      EXPECT_LE(f.box.x2, hi_x + 1e-9);
      EXPECT_TRUE(f.valid());
    }
  }
}

TEST(Fusion, AllAlgorithmsKeepInvariantsAndLabelsApart) {
  std::mt19937_64 gen(37);
  for (auto algo : {FusionAlgorithm::kNms, FusionAlgorithm::kSoftNms, FusionAlgorithm::kWbf}) {
    FusionConfig cfg;
    cfg.algorithm = algo;
    for (int i = 0; i < 50; ++i) {
      const auto d = random_dets(gen, 40, 4);
      const auto out = fuse({{0, d}}, cfg);
      for (const auto& o : out) EXPECT_TRUE(o.valid());
      // Fusing each label alone gives the same result as fusing everything.
      Detections per_label;
      for (int label = 1; label <= 4; ++label) {
        Detections only;
        for (const auto& x : d)
          if (x.label == label) only.push_back(x);
        if (only.empty()) continue;
        const auto part = fuse({{0, only}}, cfg);
        per_label.insert(per_label.end(), part.begin(), part.end());
      }
      EXPECT_EQ(canonical(out), canonical(per_label));
    }
  }
}

TEST(Fuse, SingleBranchAndDisjointLabels) {
  FusionConfig cfg;
  cfg.algorithm = FusionAlgorithm::kNms;
  std::mt19937_64 gen(38);
  auto d = random_dets(gen, 20);
  for (auto& x : d) x.branch = 4;
  EXPECT_EQ(fuse({{4, d}}, cfg), nms(d, cfg));

  const Detections cars = {det(0, 0, 10, 10, 0.4, kCar)};
  const Detections buses = {det(0, 0, 10, 10, 0.7, kBus)};
  const auto out = fuse({{0, cars}, {1, buses}}, cfg);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0].label, kBus);
  EXPECT_EQ(out[0].branch, 1);
  EXPECT_EQ(out[1].label, kCar);
  EXPECT_THROW(fuse({}, cfg), InvalidInputError);
}

TEST(Fuse, ThreeBranchFixtureWbf) {
  FusionConfig cfg;
  const auto out = fuse(three_branch_fixture(), cfg);
  ASSERT_EQ(out.size(), 2u);
  // Car: three members with confidences 0.9, 0.6, 0.3 (the 0.005 box is skipped).
  EXPECT_EQ(out[0].label, kCar);
  EXPECT_NEAR(out[0].box.x1, 2.0 / 3, 1e-12);
  EXPECT_NEAR(out[0].box.y1, 1.0 / 3, 1e-12);
  EXPECT_NEAR(out[0].box.x2, 32.0 / 3, 1e-12);
  EXPECT_NEAR(out[0].box.y2, 31.0 / 3, 1e-12);
  EXPECT_NEAR(out[0].score, 0.6, 1e-12);
  EXPECT_EQ(out[0].branch, 0);
  // Pedestrian: equal scores, branch 0 leads.
  EXPECT_EQ(out[1].label, kPedestrian);
  EXPECT_EQ(out[1].box, (BoundingBox{50.5, 50, 60.5, 70}));
  EXPECT_NEAR(out[1].score, 0.5, 1e-12);
  EXPECT_EQ(out[1].branch, 0);
}

TEST(Fuse, ThreeBranchFixtureNms) {
  FusionConfig cfg;
  cfg.algorithm = FusionAlgorithm::kNms;
  const auto out = fuse(three_branch_fixture(), cfg);
  ASSERT_EQ(out.size(), 3u);
  EXPECT_EQ(out[0], det(0, 0, 10, 10, 0.9, kCar, 0));
  EXPECT_EQ(out[1], det(50, 50, 60, 70, 0.5, kPedestrian, 0));
  EXPECT_EQ(out[2], det(200, 200, 220, 220, 0.005, kCar, 1));
}

TEST(Fuse, ThreeBranchFixtureSoftNms) {
  FusionConfig cfg;
  cfg.algorithm = FusionAlgorithm::kSoftNms;
  const auto out = fuse(three_branch_fixture(), cfg);
  const double d23 = std::exp(-(4.0 / 9) / 0.5);              // IoU 2/3
  const double d35 = std::exp(-std::pow(64.0 / 136, 2) / 0.5);  // IoU 8/17
  const double ped = std::exp(-std::pow(180.0 / 220, 2) / 0.5);
  ASSERT_EQ(out.size(), 5u);
  EXPECT_EQ(out[0].score, 0.9);
  EXPECT_EQ(out[1].score, 0.5);
  EXPECT_EQ(out[1].branch, 0);
  EXPECT_NEAR(out[2].score, 0.6 * d23, 1e-12);
  EXPECT_EQ(out[2].branch, 1);
  EXPECT_NEAR(out[3].score, 0.5 * ped, 1e-12);
  EXPECT_EQ(out[3].branch, 2);
  EXPECT_NEAR(out[4].score, 0.3 * d23 * d35, 1e-12);
  EXPECT_EQ(out[4].branch, 2);
}

}  // namespace
}  // namespace ctxfusion

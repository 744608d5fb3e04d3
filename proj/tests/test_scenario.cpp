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
#include <sstream>

#include <gtest/gtest.h>

#include "ctxfusion/detection_log.hpp"
#include "ctxfusion/engine.hpp"
#include "ctxfusion/errors.hpp"
#include "ctxfusion/scenario.hpp"
#include "ctxfusion/scoring.hpp"

namespace ctxfusion {
namespace {

BranchModel single_profile_branch(const ErrorProfile& p) {
  BranchModel b{0, "probe", {Sensor::kRadar}, {}};
  for (ContextLabel c : kAllContexts) b.profile[c] = p;
  return b;
}

const BranchModel& by_name(const std::vector<BranchModel>& set, const std::string& name) {
  return *std::find_if(set.begin(), set.end(), [&](const BranchModel& b) { return b.name == name; });
}

TEST(Context, NamesRoundTrip) {
  for (ContextLabel c : kAllContexts) EXPECT_EQ(parse_context(to_string(c)), c);
  EXPECT_THROW(parse_context("desert"), LookupError);
  EXPECT_TRUE(is_adverse(ContextLabel::kFog));
  EXPECT_FALSE(is_adverse(ContextLabel::kRural));
  const auto ctx = Context::make(ContextLabel::kSnow);
  ASSERT_EQ(ctx.descriptor.size(), 7u);
  EXPECT_EQ(ctx.descriptor[index_of(ContextLabel::kSnow)], 1.0);
}

TEST(GenerateScene, EmptyObjectRange) {
  GeneratorConfig cfg;
  cfg.min_objects = cfg.max_objects = 0;
  EXPECT_TRUE(generate_scene(cfg, 3).objects.empty());
}

TEST(GenerateScene, DeterministicAndInsideImage) {
  GeneratorConfig cfg;
  cfg.seed = 77;
  for (std::uint64_t id = 0; id < 50; ++id) {
    const Scene a = generate_scene(cfg, id), b = generate_scene(cfg, id);
    EXPECT_EQ(a.objects, b.objects);
    EXPECT_EQ(a.context.label, b.context.label);
    for (const auto& o : a.objects) {
      EXPECT_GE(o.box.x1, 0);
      EXPECT_GE(o.box.y1, 0);
      EXPECT_LE(o.box.x2, cfg.image_width);
      EXPECT_LE(o.box.y2, cfg.image_height);
      EXPECT_TRUE(is_valid_label(o.label));
    }
    EXPECT_GE(static_cast<int>(a.objects.size()), cfg.min_objects);
    EXPECT_LE(static_cast<int>(a.objects.size()), cfg.max_objects);
  }
}

TEST(GenerateScene, ContextMixConcentrates) {
  GeneratorConfig cfg;
  cfg.context_mix.assign(kNumContexts, 0.0);
  cfg.context_mix[index_of(ContextLabel::kCity)] = 1;
  cfg.context_mix[index_of(ContextLabel::kSnow)] = 1;
  cfg.seed = 4;
  int city = 0;
  for (std::uint64_t id = 0; id < 1000; ++id) {
    const auto label = generate_scene(cfg, id).context.label;
    ASSERT_TRUE(label == ContextLabel::kCity || label == ContextLabel::kSnow);
    city += label == ContextLabel::kCity;
  }
  EXPECT_NEAR(city / 1000.0, 0.5, 0.05);
}

TEST(GenerateScene, InfeasiblePlacementThrows) {
  GeneratorConfig cfg;
  cfg.image_width = 100;
  cfg.image_height = 100;
  cfg.min_objects = cfg.max_objects = 30;
  cfg.class_mix.assign(kNumClasses, 0.0);
  cfg.class_mix[kBus - 1] = 1;
  cfg.max_overlap = 0.0;
  cfg.placement_retries = 20;
  EXPECT_THROW(generate_scene(cfg, 0), GenerationError);
}

TEST(GeneratorConfig, Validation) {
  GeneratorConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.max_objects = -1;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = {};
  cfg.class_mix.pop_back();
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(SimulateBranch, NoiselessBranchReproducesGroundTruth) {
  GeneratorConfig cfg;
  cfg.seed = 5;
  const auto b = single_profile_branch({0, 0, 0, 1.0, 0});
  for (std::uint64_t id = 0; id < 20; ++id) {
    const Scene s = generate_scene(cfg, id);
    Rng rng = branch_rng(cfg.seed, id, 0);
    const auto out = simulate_branch(b, s, rng);
    ASSERT_EQ(out.detections.size(), s.objects.size());
    for (std::size_t i = 0; i < s.objects.size(); ++i) {
      EXPECT_EQ(out.detections[i].box, s.objects[i].box);
      EXPECT_EQ(out.detections[i].label, s.objects[i].label);
      EXPECT_EQ(out.detections[i].score, 1.0);
    }
  }
}

TEST(SimulateBranch, AlwaysMissLeavesOnlyFalsePositives) {
  GeneratorConfig cfg;
  const Scene s = generate_scene(cfg, 1);
  Rng rng = branch_rng(0, 1, 0);
  EXPECT_TRUE(simulate_branch(single_profile_branch({1, 0, 2, 0.8, 0.1}), s, rng).detections.empty());
  int total = 0;
  for (std::uint64_t id = 0; id < 200; ++id) {
    Rng r = branch_rng(0, id, 0);
    total += static_cast<int>(
        simulate_branch(single_profile_branch({1, 2.0, 2, 0.8, 0.1}), generate_scene(cfg, id), r)
            .detections.size());
  }
  EXPECT_NEAR(total / 200.0, 2.0, 0.4);  // Poisson(2) mean
}

TEST(SimulateBranch, MissingProfileIsConfigError) {
  BranchModel b{0, "empty", {Sensor::kLidar}, {}};
  GeneratorConfig cfg;
  Rng rng = branch_rng(0, 0, 0);
  EXPECT_THROW(simulate_branch(b, generate_scene(cfg, 0), rng), ConfigError);
}

TEST(SimulateBranch, DetectionsValidAndClipped) {
  GeneratorConfig cfg;
  cfg.seed = 8;
  const auto branches = default_branch_set();
  for (std::uint64_t id = 0; id < 100; ++id) {
    const Scene s = generate_scene(cfg, id);
    for (const auto& b : branches) {
      Rng rng = branch_rng(cfg.seed, id, b.id);
      for (const auto& d : simulate_branch(b, s, rng).detections) {
        EXPECT_TRUE(d.valid());
        EXPECT_GE(d.box.x1, 0);
        EXPECT_LE(d.box.x2, cfg.image_width);
        EXPECT_GE(d.box.y1, 0);
        EXPECT_LE(d.box.y2, cfg.image_height);
      }
    }
  }
}

TEST(SimulateBranch, CameraWorseThanRadarInSnow) {
  GeneratorConfig cfg;
  cfg.context_mix.assign(kNumContexts, 0.0);
  cfg.context_mix[index_of(ContextLabel::kSnow)] = 1;
  cfg.seed = 10;
  const auto branches = default_branch_set();
  std::vector<Detections> cam, radar;
  std::vector<GroundTruth> gts;
  for (std::uint64_t id = 0; id < 200; ++id) {
    const Scene s = generate_scene(cfg, id);
    gts.push_back(s.objects);
    Rng r0 = branch_rng(cfg.seed, id, 0), r3 = branch_rng(cfg.seed, id, 3);
    cam.push_back(simulate_branch(by_name(branches, "left_camera"), s, r0).detections);
    radar.push_back(simulate_branch(by_name(branches, "radar"), s, r3).detections);
  }
  EXPECT_LT(evaluate(cam, gts).map, evaluate(radar, gts).map);
}

TEST(BranchSet, DefaultLayout) {
  const auto set = default_branch_set();
  ASSERT_EQ(set.size(), 7u);
  const char* names[] = {"left_camera", "right_camera", "lidar", "radar",
                         "lr_cameras", "lidar_radar", "lr_cameras_lidar"};
  for (int i = 0; i < 7; ++i) {
    EXPECT_EQ(set[i].id, i);
    EXPECT_EQ(set[i].name, names[i]);
    EXPECT_FALSE(set[i].sensors.empty());
  }
  const ProfileRules rules;
  const auto& radar = by_name(set, "radar");
  for (auto c : {ContextLabel::kSnow, ContextLabel::kFog, ContextLabel::kNight})
    EXPECT_EQ(radar.profile_for(c), rules.good);
  const auto& cam = by_name(set, "left_camera");
  for (auto c : {ContextLabel::kSnow, ContextLabel::kFog, ContextLabel::kNight}) {
    EXPECT_GT(cam.profile_for(c).miss_rate, cam.profile_for(ContextLabel::kCity).miss_rate);
    EXPECT_GT(cam.profile_for(c).loc_sigma, cam.profile_for(ContextLabel::kCity).loc_sigma);
  }
}

TEST(BranchSet, EarlyFusionDominatesOrInterpolates) {
  const auto set = default_branch_set();
  const auto table = SuitabilityTable::defaults();
  for (const auto& b : set) {
    if (b.sensors.size() < 2) continue;
    for (ContextLabel c : kAllContexts) {
      const auto& f = b.profile_for(c);
      bool all_ok = true;
      for (Sensor s : b.sensors) all_ok = all_ok && table.suitable(c, modality_of(s));
      for (Sensor s : b.sensors) {
        const auto& single = set[static_cast<std::size_t>(s == Sensor::kLeftCamera ? 0
                                                          : s == Sensor::kRightCamera ? 1
                                                          : s == Sensor::kLidar ? 2
                                                                                : 3)]
                                 .profile_for(c);
        if (all_ok) {
          EXPECT_LE(f.miss_rate, single.miss_rate);
          EXPECT_LE(f.fp_rate, single.fp_rate);
          EXPECT_LE(f.loc_sigma, single.loc_sigma);
          EXPECT_GE(f.score_mean, single.score_mean);
        }
      }
      bool any_ok = false;
      for (Sensor s : b.sensors) any_ok = any_ok || table.suitable(c, modality_of(s));
      const ProfileRules r;
      if (!any_ok) EXPECT_EQ(f, r.bad);
      if (any_ok && !all_ok) {
        EXPECT_GT(f.miss_rate, r.good.miss_rate);
        EXPECT_LT(f.miss_rate, r.bad.miss_rate);
        EXPECT_GT(f.loc_sigma, r.good.loc_sigma);
        EXPECT_LT(f.loc_sigma, r.bad.loc_sigma);
      }
    }
  }
}

TEST(StemFeatures, ShapeAndDeterminism) {
  GeneratorConfig cfg;
  cfg.seed = 2;
  const Scene s = generate_scene(cfg, 12);
  const auto f = stem_features(s, cfg);
  ASSERT_EQ(static_cast<int>(f.size()), stem_feature_dim());
  EXPECT_EQ(f, stem_features(s, cfg));
  cfg.context_noise = cfg.quality_noise = 0;
  const auto clean = stem_features(s, cfg);
  for (int blk = 0; blk < kNumSensors; ++blk)
    EXPECT_EQ(clean[blk * stem_block_dim() + index_of(s.context.label)], 1.0);
}

TEST(Determinism, SimulatedLogsAreByteIdentical) {
  GeneratorConfig cfg;
  cfg.seed = 42;
  std::ostringstream a, b;
  write_detection_log(a, simulate_log(cfg, 30));
  write_detection_log(b, simulate_log(cfg, 30));
  EXPECT_EQ(a.str(), b.str());
  cfg.seed = 43;
  std::ostringstream c;
  write_detection_log(c, simulate_log(cfg, 30));
  EXPECT_NE(a.str(), c.str());
}

}  // namespace
}  // namespace ctxfusion

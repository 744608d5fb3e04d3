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

#ifndef CTXFUSION_SCENARIO_HPP
#define CTXFUSION_SCENARIO_HPP

// Data plane: driving contexts, simulated scenes, per-context branch error
// profiles and the simulated branches that stand in for detector networks.

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ctxfusion/detection.hpp"
#include "ctxfusion/rng.hpp"

namespace ctxfusion {

enum class ContextLabel { kCity, kMotorway, kJunction, kRural, kSnow, kFog, kNight };
inline constexpr int kNumContexts = 7;
inline constexpr std::array<ContextLabel, kNumContexts> kAllContexts = {
    ContextLabel::kCity, ContextLabel::kMotorway, ContextLabel::kJunction, ContextLabel::kRural,
    ContextLabel::kSnow, ContextLabel::kFog,      ContextLabel::kNight};

std::string_view to_string(ContextLabel label);
ContextLabel parse_context(std::string_view name);
inline int index_of(ContextLabel label) { return static_cast<int>(label); }

/// Snow, fog and night: the contexts where cameras are unreliable.
bool is_adverse(ContextLabel label);

struct Context {
  ContextLabel label{ContextLabel::kCity};
  /// One-hot over the seven labels.
  std::vector<double> descriptor;

  static Context make(ContextLabel label);
};

struct Scene {
  std::uint64_t id{0};
  Context context;
  GroundTruth objects;
  std::uint64_t seed{0};
  double image_width{0};
  double image_height{0};
};

// Sensors and modalities --------------------------------------------------

enum class Sensor { kLeftCamera, kRightCamera, kLidar, kRadar };
inline constexpr int kNumSensors = 4;
inline constexpr std::array<Sensor, kNumSensors> kAllSensors = {
    Sensor::kLeftCamera, Sensor::kRightCamera, Sensor::kLidar, Sensor::kRadar};

enum class Modality { kCamera, kRadar, kLidar };
Modality modality_of(Sensor sensor);
std::string_view to_string(Sensor sensor);
Sensor parse_sensor(std::string_view name);

/// Which modalities work in which context (check / cross matrix).
struct SuitabilityTable {
  std::map<ContextLabel, std::map<Modality, bool>> table;

  bool suitable(ContextLabel context, Modality modality) const;
  static SuitabilityTable defaults();
};

struct ErrorProfile {
  double miss_rate{0};
  double fp_rate{0};
  double loc_sigma{0};
  double score_mean{1};
  double score_sigma{0};

  void validate() const;
  friend bool operator==(const ErrorProfile&, const ErrorProfile&) = default;
};

struct BranchModel {
  BranchId id{0};
  std::string name;
  std::vector<Sensor> sensors;
  std::map<ContextLabel, ErrorProfile> profile;

  const ErrorProfile& profile_for(ContextLabel context) const;
  bool contains(Modality modality) const;
  bool camera_only() const;
};

/// How numeric profiles are derived from the suitability matrix.
struct ProfileRules {
  ErrorProfile good{0.1, 0.5, 2.0, 0.8, 0.1};
  ErrorProfile bad{0.5, 3.0, 8.0, 0.6, 0.2};
  /// Early-fusion branch whose members disagree: best + blend * (worst - best).
  double conflict_blend{0.75};
};

/// Elementwise best / worst of two profiles.
ErrorProfile best_of(const ErrorProfile& a, const ErrorProfile& b);
ErrorProfile worst_of(const ErrorProfile& a, const ErrorProfile& b);
ErrorProfile blend(const ErrorProfile& from, const ErrorProfile& to, double t);

/// Profile of a branch over `sensors` in `context` under the given rules.
ErrorProfile derive_profile(const std::vector<Sensor>& sensors, ContextLabel context,
                            const SuitabilityTable& suitability, const ProfileRules& rules);

/// The seven branches: four single-sensor and three early-fusion, ids 0..6.
std::vector<BranchModel> default_branch_set(const SuitabilityTable& suitability,
                                            const ProfileRules& rules);
std::vector<BranchModel> default_branch_set();

// Scene generation ----------------------------------------------------------

struct ClassSize {
  double width;
  double height;
};

struct GeneratorConfig {
  double image_width{640};
  double image_height{480};
  int min_objects{1};
  int max_objects{8};
  /// Relative weights, index = label - 1.
  std::vector<double> class_mix = std::vector<double>(kNumClasses, 1.0);
  /// Relative weights, index = context index.
  std::vector<double> context_mix = std::vector<double>(kNumContexts, 1.0);
  /// Mean pixel size per class, index = label - 1.
  std::vector<ClassSize> class_sizes = default_class_sizes();
  double size_jitter{0.3};
  /// Objects may overlap an earlier object by at most this IoU.
  double max_overlap{0.3};
  int placement_retries{200};
  /// Stem feature proxy noise.
  double context_noise{0.15};
  double quality_noise{0.15};
  std::size_t scenes{100};
  std::uint64_t seed{0};

  SuitabilityTable suitability = SuitabilityTable::defaults();
  ProfileRules rules;
  /// Overrides the derived profiles when nonempty.
  std::vector<BranchModel> branches;

  std::vector<BranchModel> branch_set() const;
  void validate() const;
  static std::vector<ClassSize> default_class_sizes();
};

/// Samples a scene from its own stream (seed, scene id).
Scene generate_scene(const GeneratorConfig& cfg, std::uint64_t scene_id, Rng& rng);
Scene generate_scene(const GeneratorConfig& cfg, std::uint64_t scene_id);

/// Per-sensor stem feature blocks, concatenated in kAllSensors order. Each
/// block is the noisy context descriptor followed by a noisy suitability
/// score of the sensor's modality.
std::vector<double> stem_features(const Scene& scene, const GeneratorConfig& cfg);
int stem_block_dim();
int stem_feature_dim();

struct BranchOutput {
  BranchId branch{0};
  Detections detections;
  std::vector<double> features;

  friend bool operator==(const BranchOutput&, const BranchOutput&) = default;
};

/// Draws one branch's detections for a scene from its context profile.
BranchOutput simulate_branch(const BranchModel& branch, const Scene& scene, Rng& rng);

/// Stream used for (scene, branch); identical across pipeline configurations.
Rng branch_rng(std::uint64_t master_seed, std::uint64_t scene_id, BranchId branch);

}  // namespace ctxfusion

#endif  // CTXFUSION_SCENARIO_HPP

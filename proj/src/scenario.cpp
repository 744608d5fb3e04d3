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

#include "ctxfusion/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace ctxfusion {

namespace {

constexpr std::array<std::string_view, kNumContexts> kContextNames = {
    "city", "motorway", "junction", "rural", "snow", "fog", "night"};
constexpr std::array<std::string_view, kNumSensors> kSensorNames = {"left_camera", "right_camera",
                                                                   "lidar", "radar"};

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

double draw_score(const ErrorProfile& p, Rng& rng) {
  if (p.score_sigma <= 0) return clamp01(p.score_mean);
  std::normal_distribution<double> n(p.score_mean, p.score_sigma);
  return clamp01(n(rng));
}

BoundingBox random_box(int label, const GeneratorConfig& cfg, Rng& rng) {
  std::uniform_real_distribution<double> jitter(1.0 - cfg.size_jitter, 1.0 + cfg.size_jitter);
  const ClassSize size = cfg.class_sizes.at(label - 1);
  const double w = std::min(size.width * jitter(rng), cfg.image_width);
  const double h = std::min(size.height * jitter(rng), cfg.image_height);
  std::uniform_real_distribution<double> ux(0.0, cfg.image_width - w);
  std::uniform_real_distribution<double> uy(0.0, cfg.image_height - h);
  const double x = ux(rng);
  const double y = uy(rng);
  return {x, y, x + w, y + h};
}

}  // namespace

std::string_view to_string(ContextLabel label) { return kContextNames.at(index_of(label)); }

ContextLabel parse_context(std::string_view name) {
  for (int i = 0; i < kNumContexts; ++i)
    if (kContextNames[i] == name) return kAllContexts[i];
  throw LookupError("unknown context '" + std::string(name) + "'");
}

bool is_adverse(ContextLabel label) {
  return label == ContextLabel::kSnow || label == ContextLabel::kFog ||
         label == ContextLabel::kNight;
}

Context Context::make(ContextLabel label) {
  Context c{label, std::vector<double>(kNumContexts, 0.0)};
  c.descriptor[index_of(label)] = 1.0;
  return c;
}

Modality modality_of(Sensor sensor) {
  switch (sensor) {
    case Sensor::kLeftCamera:
    case Sensor::kRightCamera:
      return Modality::kCamera;
    case Sensor::kLidar:
      return Modality::kLidar;
    case Sensor::kRadar:
      return Modality::kRadar;
  }
  return Modality::kCamera;
}

std::string_view to_string(Sensor sensor) { return kSensorNames.at(static_cast<int>(sensor)); }

Sensor parse_sensor(std::string_view name) {
  for (int i = 0; i < kNumSensors; ++i)
    if (kSensorNames[i] == name) return kAllSensors[i];
  throw LookupError("unknown sensor '" + std::string(name) + "'");
}

bool SuitabilityTable::suitable(ContextLabel context, Modality modality) const {
  auto row = table.find(context);
  if (row == table.end())
    throw LookupError("no suitability row for context '" + std::string(to_string(context)) + "'");
  auto cell = row->second.find(modality);
  if (cell == row->second.end()) throw LookupError("suitability row is missing a modality");
  return cell->second;
}

SuitabilityTable SuitabilityTable::defaults() {
  using enum ContextLabel;
  auto row = [](bool camera, bool radar, bool lidar) {
    return std::map<Modality, bool>{
        {Modality::kCamera, camera}, {Modality::kRadar, radar}, {Modality::kLidar, lidar}};
  };
  // City and junction follow the urban row; open roads have no clutter to
  // hurt radar or lidar.
  return SuitabilityTable{{{kCity, row(true, false, false)},
                           {kJunction, row(true, false, false)},
                           {kMotorway, row(true, true, true)},
                           {kRural, row(true, true, true)},
                           {kSnow, row(false, true, false)},
                           {kFog, row(false, true, true)},
                           {kNight, row(false, true, true)}}};
}

void ErrorProfile::validate() const {
  if (!(miss_rate >= 0 && miss_rate <= 1)) throw ConfigError("miss_rate must lie in [0, 1]");
  if (!(fp_rate >= 0)) throw ConfigError("fp_rate must be nonnegative");
  if (!(loc_sigma >= 0)) throw ConfigError("loc_sigma must be nonnegative");
  if (!(score_sigma >= 0)) throw ConfigError("score_sigma must be nonnegative");
  if (!std::isfinite(score_mean)) throw ConfigError("score_mean must be finite");
}

ErrorProfile best_of(const ErrorProfile& a, const ErrorProfile& b) {
  return {std::min(a.miss_rate, b.miss_rate), std::min(a.fp_rate, b.fp_rate),
          std::min(a.loc_sigma, b.loc_sigma), std::max(a.score_mean, b.score_mean),
          std::min(a.score_sigma, b.score_sigma)};
}

ErrorProfile worst_of(const ErrorProfile& a, const ErrorProfile& b) {
  return {std::max(a.miss_rate, b.miss_rate), std::max(a.fp_rate, b.fp_rate),
          std::max(a.loc_sigma, b.loc_sigma), std::min(a.score_mean, b.score_mean),
          std::max(a.score_sigma, b.score_sigma)};
}

ErrorProfile blend(const ErrorProfile& from, const ErrorProfile& to, double t) {
  auto mix = [t](double a, double b) { return a + t * (b - a); };
  return {mix(from.miss_rate, to.miss_rate), mix(from.fp_rate, to.fp_rate),
          mix(from.loc_sigma, to.loc_sigma), mix(from.score_mean, to.score_mean),
          mix(from.score_sigma, to.score_sigma)};
}

ErrorProfile derive_profile(const std::vector<Sensor>& sensors, ContextLabel context,
                            const SuitabilityTable& suitability, const ProfileRules& rules) {
  if (sensors.empty()) throw ConfigError("branch must use at least one sensor");
  bool all_ok = true;
  ErrorProfile best, worst;
  for (std::size_t i = 0; i < sensors.size(); ++i) {
    const bool ok = suitability.suitable(context, modality_of(sensors[i]));
    all_ok = all_ok && ok;
    const ErrorProfile& p = ok ? rules.good : rules.bad;
    best = i == 0 ? p : best_of(best, p);
    worst = i == 0 ? p : worst_of(worst, p);
  }
  return all_ok ? best : blend(best, worst, rules.conflict_blend);
}

const ErrorProfile& BranchModel::profile_for(ContextLabel context) const {
  auto it = profile.find(context);
  if (it == profile.end())
    throw ConfigError("branch '" + name + "' has no profile for context '" +
                      std::string(to_string(context)) + "'");
  return it->second;
}

bool BranchModel::contains(Modality modality) const {
  return std::any_of(sensors.begin(), sensors.end(),
                     [&](Sensor s) { return modality_of(s) == modality; });
}

bool BranchModel::camera_only() const {
  return std::all_of(sensors.begin(), sensors.end(),
                     [](Sensor s) { return modality_of(s) == Modality::kCamera; });
}

std::vector<BranchModel> default_branch_set(const SuitabilityTable& suitability,
                                            const ProfileRules& rules) {
  using enum Sensor;
  const std::vector<std::pair<std::string, std::vector<Sensor>>> layout = {
      {"left_camera", {kLeftCamera}},
      {"right_camera", {kRightCamera}},
      {"lidar", {kLidar}},
      {"radar", {kRadar}},
      {"lr_cameras", {kLeftCamera, kRightCamera}},
      {"lidar_radar", {kLidar, kRadar}},
      {"lr_cameras_lidar", {kLeftCamera, kRightCamera, kLidar}},
  };
  std::vector<BranchModel> out;
  for (std::size_t i = 0; i < layout.size(); ++i) {
    BranchModel b{static_cast<BranchId>(i), layout[i].first, layout[i].second, {}};
    for (ContextLabel c : kAllContexts)
      b.profile[c] = derive_profile(b.sensors, c, suitability, rules);
    out.push_back(std::move(b));
  }
  return out;
}

std::vector<BranchModel> default_branch_set() {
  return default_branch_set(SuitabilityTable::defaults(), ProfileRules{});
}

std::vector<ClassSize> GeneratorConfig::default_class_sizes() {
  return {{90, 60},  {100, 80}, {140, 110}, {160, 120},
          {40, 50},  {40, 50},  {25, 60},   {60, 65}};
}

std::vector<BranchModel> GeneratorConfig::branch_set() const {
  return branches.empty() ? default_branch_set(suitability, rules) : branches;
}

void GeneratorConfig::validate() const {
  if (!(image_width > 0 && image_height > 0)) throw ConfigError("image size must be positive");
  if (min_objects < 0 || max_objects < min_objects) throw ConfigError("bad object count range");
  if (class_mix.size() != kNumClasses) throw ConfigError("class_mix needs one weight per class");
  if (context_mix.size() != kNumContexts)
    throw ConfigError("context_mix needs one weight per context");
  if (class_sizes.size() != kNumClasses) throw ConfigError("class_sizes needs one entry per class");
  auto nonneg_positive_sum = [](const std::vector<double>& w) {
    double s = 0;
    for (double v : w) {
      if (!(v >= 0)) return false;
      s += v;
    }
    return s > 0;
  };
  if (!nonneg_positive_sum(class_mix)) throw ConfigError("class_mix weights must be >= 0, sum > 0");
  if (!nonneg_positive_sum(context_mix))
    throw ConfigError("context_mix weights must be >= 0, sum > 0");
  if (!(size_jitter >= 0 && size_jitter < 1)) throw ConfigError("size_jitter must lie in [0, 1)");
  if (!(context_noise >= 0 && quality_noise >= 0)) throw ConfigError("noise must be nonnegative");
  rules.good.validate();
  rules.bad.validate();
  for (const auto& b : branches) {
    if (b.sensors.empty()) throw ConfigError("branch '" + b.name + "' has no sensors");
    for (const auto& [c, p] : b.profile) p.validate();
  }
}

Scene generate_scene(const GeneratorConfig& cfg, std::uint64_t scene_id, Rng& rng) {
  Scene s;
  s.id = scene_id;
  s.image_width = cfg.image_width;
  s.image_height = cfg.image_height;
  std::discrete_distribution<int> ctx(cfg.context_mix.begin(), cfg.context_mix.end());
  s.context = Context::make(kAllContexts[ctx(rng)]);
  std::uniform_int_distribution<int> count(cfg.min_objects, cfg.max_objects);
  const int d = count(rng);
  std::discrete_distribution<int> cls(cfg.class_mix.begin(), cfg.class_mix.end());
  for (int i = 0; i < d; ++i) {
    const int label = cls(rng) + 1;
    bool placed = false;
    for (int attempt = 0; attempt < cfg.placement_retries && !placed; ++attempt) {
      const BoundingBox box = random_box(label, cfg, rng);
      const bool clear = std::none_of(s.objects.begin(), s.objects.end(), [&](const auto& o) {
        return iou(o.box, box) > cfg.max_overlap;
      });
      if (clear) {
        s.objects.push_back({label, box});
        placed = true;
      }
    }
    if (!placed)
      throw GenerationError("could not place object " + std::to_string(i) + " in scene " +
                            std::to_string(scene_id));
  }
  return s;
}

Scene generate_scene(const GeneratorConfig& cfg, std::uint64_t scene_id) {
  const std::uint64_t seed = derive_seed(cfg.seed, {stream::kScene, scene_id});
  Rng rng(seed);
  Scene s = generate_scene(cfg, scene_id, rng);
  s.seed = seed;
  return s;
}

int stem_block_dim() { return kNumContexts + 1; }
int stem_feature_dim() { return kNumSensors * stem_block_dim(); }

std::vector<double> stem_features(const Scene& scene, const GeneratorConfig& cfg) {
  Rng rng = make_rng(cfg.seed, {stream::kStem, scene.id});
  std::normal_distribution<double> ctx_noise(0.0, 1.0);
  std::vector<double> f;
  f.reserve(stem_feature_dim());
  std::vector<double> descriptor = scene.context.descriptor;
  if (descriptor.size() != static_cast<std::size_t>(kNumContexts))
    descriptor = Context::make(scene.context.label).descriptor;
  for (Sensor s : kAllSensors) {
    for (double v : descriptor) f.push_back(v + cfg.context_noise * ctx_noise(rng));
    const double q = cfg.suitability.suitable(scene.context.label, modality_of(s)) ? 1.0 : 0.0;
    f.push_back(q + cfg.quality_noise * ctx_noise(rng));
  }
  return f;
}

BranchOutput simulate_branch(const BranchModel& branch, const Scene& scene, Rng& rng) {
  const ErrorProfile& p = branch.profile_for(scene.context.label);
  BranchOutput out;
  out.branch = branch.id;
  std::bernoulli_distribution miss(p.miss_rate);
  std::normal_distribution<double> jitter(0.0, 1.0);
  const double w = scene.image_width;
  const double h = scene.image_height;
  for (const auto& obj : scene.objects) {
    if (miss(rng)) continue;
    double x1 = obj.box.x1 + p.loc_sigma * jitter(rng);
    double y1 = obj.box.y1 + p.loc_sigma * jitter(rng);
    double x2 = obj.box.x2 + p.loc_sigma * jitter(rng);
    double y2 = obj.box.y2 + p.loc_sigma * jitter(rng);
    if (x1 > x2) std::swap(x1, x2);
    if (y1 > y2) std::swap(y1, y2);
    BoundingBox box{x1, y1, x2, y2};
    if (w > 0 && h > 0) box = clip(box, w, h);
    out.detections.push_back({box, draw_score(p, rng), obj.label, branch.id});
  }
  std::poisson_distribution<int> fp_count(p.fp_rate);
  const int n_fp = p.fp_rate > 0 ? fp_count(rng) : 0;
  std::uniform_int_distribution<int> any_label(1, kNumClasses);
  GeneratorConfig geometry;
  geometry.image_width = w > 0 ? w : geometry.image_width;
  geometry.image_height = h > 0 ? h : geometry.image_height;
  for (int i = 0; i < n_fp; ++i) {
    const int label = any_label(rng);
    const BoundingBox box = random_box(label, geometry, rng);
    out.detections.push_back({box, draw_score(p, rng), label, branch.id});
  }
  return out;
}

Rng branch_rng(std::uint64_t master_seed, std::uint64_t scene_id, BranchId branch) {
  return make_rng(master_seed, {stream::kBranch, scene_id, static_cast<std::uint64_t>(branch)});
}

}  // namespace ctxfusion

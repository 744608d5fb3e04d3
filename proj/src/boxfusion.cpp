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

#include "ctxfusion/boxfusion.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace ctxfusion {

FusionAlgorithm parse_fusion_algorithm(std::string_view name) {
  if (name == "nms") return FusionAlgorithm::kNms;
  if (name == "soft_nms" || name == "soft-nms") return FusionAlgorithm::kSoftNms;
  if (name == "wbf") return FusionAlgorithm::kWbf;
  throw ConfigError("unknown fusion algorithm '" + std::string(name) + "'");
}

std::string_view to_string(FusionAlgorithm algorithm) {
  switch (algorithm) {
    case FusionAlgorithm::kNms:
      return "nms";
    case FusionAlgorithm::kSoftNms:
      return "soft_nms";
    case FusionAlgorithm::kWbf:
      return "wbf";
  }
  return "unknown";
}

double FusionConfig::weight(BranchId branch) const {
  auto it = branch_weights.find(branch);
  return it == branch_weights.end() ? 1.0 : it->second;
}

void FusionConfig::validate() const {
  if (!(iou_threshold > 0 && iou_threshold < 1))
    throw ConfigError("iou_threshold must lie in (0, 1)");
  if (!(sigma > 0)) throw ConfigError("sigma must be positive");
  if (!(skip_box_threshold >= 0 && skip_box_threshold <= 1))
    throw ConfigError("skip_box_threshold must lie in [0, 1]");
  for (auto [b, w] : branch_weights)
    if (!(w > 0) || !std::isfinite(w))
      throw ConfigError("branch weight for " + std::to_string(b) + " must be positive");
}

namespace {

void sort_by_score(Detections& dets) { std::stable_sort(dets.begin(), dets.end(), score_order); }

std::map<int, Detections> by_label(const Detections& dets) {
  std::map<int, Detections> groups;
  for (const auto& d : dets) groups[d.label].push_back(d);
  return groups;
}

}  // namespace

Detections nms(const Detections& dets, const FusionConfig& cfg) {
  Detections out;
  for (auto& [label, group] : by_label(dets)) {
    sort_by_score(group);
    std::vector<bool> removed(group.size(), false);
    for (std::size_t i = 0; i < group.size(); ++i) {
      if (removed[i]) continue;
      out.push_back(group[i]);
      for (std::size_t j = i + 1; j < group.size(); ++j)
        if (!removed[j] && iou(group[i].box, group[j].box) > cfg.iou_threshold) removed[j] = true;
    }
  }
  sort_by_score(out);
  return out;
}

Detections soft_nms(const Detections& dets, const FusionConfig& cfg) {
  Detections out;
  for (auto& [label, remaining] : by_label(dets)) {
    while (!remaining.empty()) {
      // First maximum under score_order keeps the input-order tie-break.
      auto best = std::min_element(remaining.begin(), remaining.end(), score_order);
      const Detection selected = *best;
      remaining.erase(best);
      for (auto& b : remaining) {
        const double o = iou(selected.box, b.box);
        b.score *= std::exp(-(o * o) / cfg.sigma);
      }
      out.push_back(selected);
    }
  }
  std::erase_if(out, [&](const Detection& d) { return d.score < cfg.skip_box_threshold; });
  sort_by_score(out);
  return out;
}

Detections wbf(const Detections& dets, const FusionConfig& cfg) {
  struct Cluster {
    Detections members;
    Detection fused;
  };
  Detections out;
  for (auto& [label, group] : by_label(dets)) {
    std::erase_if(group, [&](const Detection& d) { return d.score < cfg.skip_box_threshold; });
    sort_by_score(group);
    std::vector<Cluster> clusters;
    for (const auto& d : group) {
      auto it = std::find_if(clusters.begin(), clusters.end(), [&](const Cluster& c) {
        return iou(c.fused.box, d.box) > cfg.iou_threshold;
      });
      if (it == clusters.end()) {
        clusters.push_back({{d}, d});
        continue;
      }
      it->members.push_back(d);
      double conf_sum = 0, weight_sum = 0, score_sum = 0;
      BoundingBox acc{0, 0, 0, 0};
      for (const auto& m : it->members) {
        const double w = cfg.weight(m.branch);
        const double c = m.score * w;
        acc.x1 += c * m.box.x1;
        acc.y1 += c * m.box.y1;
        acc.x2 += c * m.box.x2;
        acc.y2 += c * m.box.y2;
        conf_sum += c;
        weight_sum += w;
        score_sum += w * m.score;
      }
      if (conf_sum > 0) {
        it->fused.box = {acc.x1 / conf_sum, acc.y1 / conf_sum, acc.x2 / conf_sum, acc.y2 / conf_sum};
      } else {
        // All members scored zero; fall back to the plain corner average.
        BoundingBox mean{0, 0, 0, 0};
        for (const auto& m : it->members) {
          mean.x1 += m.box.x1;
          mean.y1 += m.box.y1;
          mean.x2 += m.box.x2;
          mean.y2 += m.box.y2;
        }
        const double n = static_cast<double>(it->members.size());
        it->fused.box = {mean.x1 / n, mean.y1 / n, mean.x2 / n, mean.y2 / n};
      }
      it->fused.score = std::clamp(score_sum / weight_sum, 0.0, 1.0);
    }
    for (auto& c : clusters) out.push_back(c.fused);
  }
  sort_by_score(out);
  return out;
}

Detections fuse(const std::map<BranchId, Detections>& branch_outputs, const FusionConfig& cfg) {
  if (branch_outputs.empty()) throw InvalidInputError("fuse needs at least one branch");
  Detections all;
  for (const auto& [branch, dets] : branch_outputs) {
    for (auto d : dets) {
      d.branch = branch;
      all.push_back(d);
    }
  }
  switch (cfg.algorithm) {
    case FusionAlgorithm::kNms:
      return nms(all, cfg);
    case FusionAlgorithm::kSoftNms:
      return soft_nms(all, cfg);
    case FusionAlgorithm::kWbf:
      return wbf(all, cfg);
  }
  throw ConfigError("unknown fusion algorithm");
}

}  // namespace ctxfusion

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

#ifndef CTXFUSION_BOXFUSION_HPP
#define CTXFUSION_BOXFUSION_HPP

// Late fusion of detections from several branches: NMS, Gaussian Soft-NMS and
// Weighted Box Fusion. Every algorithm works class-wise; detections with
// different labels never interact.

#include <map>
#include <string>
#include <string_view>

#include "ctxfusion/detection.hpp"

namespace ctxfusion {

enum class FusionAlgorithm { kNms, kSoftNms, kWbf };

FusionAlgorithm parse_fusion_algorithm(std::string_view name);
std::string_view to_string(FusionAlgorithm algorithm);

struct FusionConfig {
  double iou_threshold{0.4};
  double skip_box_threshold{0.01};
  double sigma{0.5};
  /// Missing branches weigh 1.
  std::map<BranchId, double> branch_weights;
  FusionAlgorithm algorithm{FusionAlgorithm::kWbf};

  double weight(BranchId branch) const;
  void validate() const;
};

/// Strict weak order used everywhere a "highest score first" scan is needed:
/// score descending, then lower branch id. Callers stable-sort with it so
/// input order settles what is left.
inline bool score_order(const Detection& a, const Detection& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.branch < b.branch;
}

/// Greedy class-wise suppression of boxes overlapping a kept box by more than
/// cfg.iou_threshold.
Detections nms(const Detections& dets, const FusionConfig& cfg);

/// Gaussian Soft-NMS: score(b) *= exp(-iou(d, b)^2 / sigma) for every remaining
/// same-label b after d is selected; results under skip_box_threshold dropped.
Detections soft_nms(const Detections& dets, const FusionConfig& cfg);

/// Weighted Box Fusion. A cluster's corners are the average of its members'
/// corners weighted by score * branch weight; its score is the branch-weighted
/// mean of member scores.
Detections wbf(const Detections& dets, const FusionConfig& cfg);

/// Tags each detection with its source branch, concatenates in ascending
/// branch order and runs the configured algorithm.
Detections fuse(const std::map<BranchId, Detections>& branch_outputs, const FusionConfig& cfg);

}  // namespace ctxfusion

#endif  // CTXFUSION_BOXFUSION_HPP

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

#ifndef CTXFUSION_DETECTION_HPP
#define CTXFUSION_DETECTION_HPP

#include <array>
#include <string_view>
#include <vector>

#include "ctxfusion/geometry.hpp"

namespace ctxfusion {

// Object classes, 1-based.
inline constexpr int kCar = 1;
inline constexpr int kVan = 2;
inline constexpr int kTruck = 3;
inline constexpr int kBus = 4;
inline constexpr int kMotorbike = 5;
inline constexpr int kBicycle = 6;
inline constexpr int kPedestrian = 7;
inline constexpr int kGroupOfPedestrians = 8;
inline constexpr int kNumClasses = 8;

inline constexpr std::array<std::string_view, kNumClasses> kClassNames = {
    "car", "van", "truck", "bus", "motorbike", "bicycle", "pedestrian", "group"};

inline bool is_valid_label(int label) { return label >= 1 && label <= kNumClasses; }

using BranchId = int;

/// Branch id carried by detections that did not come from a branch.
inline constexpr BranchId kNoBranch = -1;

struct Detection {
  BoundingBox box;
  double score{0};
  int label{0};
  BranchId branch{kNoBranch};

  bool valid() const {
    return box.valid() && score >= 0 && score <= 1 && is_valid_label(label);
  }

  friend bool operator==(const Detection&, const Detection&) = default;
};

struct GroundTruthObject {
  int label{0};
  BoundingBox box;

  friend bool operator==(const GroundTruthObject&, const GroundTruthObject&) = default;
};

using Detections = std::vector<Detection>;
using GroundTruth = std::vector<GroundTruthObject>;

}  // namespace ctxfusion

#endif  // CTXFUSION_DETECTION_HPP

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

#ifndef CTXFUSION_DETECTION_LOG_HPP
#define CTXFUSION_DETECTION_LOG_HPP

// Line-delimited JSON detection log. An optional first line carries a header:
//
//   {"header": {"version": 1, "scenes": N, "feature_dim": D,
//               "branches": [{"id": 0, "name": "left_camera"}, ...]}}
//
// followed by one record per (scene, branch):
//
//   {"scene": id, "context": "snow", "gt": [{"label": 1, "box": [x1,y1,x2,y2]}],
//    "branch": 3, "features": [...], "dets": [{"label": 1, "score": 0.9,
//    "box": [...]}], "image": [w, h]}
//
// "features" holds the scene's stem feature vector and is repeated on every
// record of the scene. "image" is optional.

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ctxfusion/scenario.hpp"

namespace ctxfusion {

struct LogBranchInfo {
  BranchId id;
  std::string name;
  friend bool operator==(const LogBranchInfo&, const LogBranchInfo&) = default;
};

struct LogHeader {
  int version{1};
  std::size_t scenes{0};
  std::size_t feature_dim{0};
  std::vector<LogBranchInfo> branches;
  friend bool operator==(const LogHeader&, const LogHeader&) = default;
};

struct LoggedScene {
  Scene scene;
  std::vector<double> features;
  std::map<BranchId, BranchOutput> branches;
};

struct DetectionLog {
  std::optional<LogHeader> header;
  std::map<std::uint64_t, LoggedScene> scenes;

  std::size_t record_count() const;
};

DetectionLog read_detection_log(std::istream& in);
DetectionLog load_detection_log(const std::filesystem::path& path);

void write_detection_log(std::ostream& out, const DetectionLog& log);
void save_detection_log(const std::filesystem::path& path, const DetectionLog& log);

/// Header describing `branches`, `scenes` scenes and feature vectors of `feature_dim`.
LogHeader make_log_header(const std::vector<BranchModel>& branches, std::size_t scenes,
                          std::size_t feature_dim);

}  // namespace ctxfusion

#endif  // CTXFUSION_DETECTION_LOG_HPP

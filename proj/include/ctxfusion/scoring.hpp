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

#ifndef CTXFUSION_SCORING_HPP
#define CTXFUSION_SCORING_HPP

// PASCAL-VOC style detection scoring at IoU >= 0.5 with all-point AP:
//   AP = sum_n (R_n - R_{n-1}) * P_n,  R_0 = 0.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ctxfusion/detection.hpp"

namespace ctxfusion {

inline constexpr double kMatchIou = 0.5;

struct MatchResult {
  struct Entry {
    double score;
    int label;
    BranchId branch;
    bool true_positive;
  };
  /// One entry per detection, in input order.
  std::vector<Entry> detections;
  /// Ground-truth instances per class.
  std::map<int, std::size_t> gt_count;
  std::map<int, std::size_t> false_negatives;

  std::size_t true_positives(int label) const;
  std::size_t false_positives(int label) const;
};

/// Greedy class-wise matching in descending score order (ties: lower branch,
/// then input order). A detection is a true positive when the unmatched
/// same-class ground truth it overlaps most has IoU >= iou_thresh.
MatchResult match(const Detections& dets, const GroundTruth& gts, double iou_thresh = kMatchIou);

struct PRPoint {
  double recall;
  double precision;
  friend bool operator==(const PRPoint&, const PRPoint&) = default;
};

using PRCurve = std::vector<PRPoint>;

/// Precision/recall after each detection of `label` across all scenes, swept by
/// descending score. nullopt when the class has no ground truth.
std::optional<PRCurve> pr_curve(const std::vector<MatchResult>& results, int label);

double average_precision(const PRCurve& curve);

/// Unweighted mean over the classes present in the map.
double mean_ap(const std::map<int, double>& per_class);

struct EvalReport {
  std::map<int, double> per_class_ap;
  /// Classes left out of the mean because they have no ground truth.
  std::vector<int> excluded_classes;
  double map{0};
  /// Configuration columns (name, gate, k, fusion, ...), in column order.
  std::vector<std::pair<std::string, std::string>> metadata;
};

/// Scores per-scene detections against per-scene ground truth.
EvalReport evaluate(const std::vector<Detections>& detections,
                    const std::vector<GroundTruth>& ground_truth, double iou_thresh = kMatchIou);

/// One row per report; metadata columns come from the first report.
std::string reports_csv(const std::vector<EvalReport>& reports);
std::string reports_json(const std::vector<EvalReport>& reports);

}  // namespace ctxfusion

#endif  // CTXFUSION_SCORING_HPP

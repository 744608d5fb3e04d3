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

#include "ctxfusion/scoring.hpp"

#include <algorithm>
#include <iomanip>
#include <numeric>
#include <sstream>

#include <json.hpp>

namespace ctxfusion {

std::size_t MatchResult::true_positives(int label) const {
  return static_cast<std::size_t>(std::count_if(
      detections.begin(), detections.end(),
      [&](const Entry& e) { return e.label == label && e.true_positive; }));
}

std::size_t MatchResult::false_positives(int label) const {
  return static_cast<std::size_t>(std::count_if(
      detections.begin(), detections.end(),
      [&](const Entry& e) { return e.label == label && !e.true_positive; }));
}

MatchResult match(const Detections& dets, const GroundTruth& gts, double iou_thresh) {
  MatchResult r;
  r.detections.reserve(dets.size());
  for (const auto& d : dets) r.detections.push_back({d.score, d.label, d.branch, false});
  for (const auto& g : gts) {
    ++r.gt_count[g.label];
    r.false_negatives.try_emplace(g.label, 0);
  }

  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (dets[a].score != dets[b].score) return dets[a].score > dets[b].score;
    return dets[a].branch < dets[b].branch;
  });

  std::vector<bool> taken(gts.size(), false);
  for (std::size_t i : order) {
    double best = -1;
    std::size_t best_j = gts.size();
    for (std::size_t j = 0; j < gts.size(); ++j) {
      if (taken[j] || gts[j].label != dets[i].label) continue;
      const double o = iou(dets[i].box, gts[j].box);
      if (o > best) {
        best = o;
        best_j = j;
      }
    }
    if (best_j < gts.size() && best >= iou_thresh) {
      taken[best_j] = true;
      r.detections[i].true_positive = true;
    }
  }
  for (std::size_t j = 0; j < gts.size(); ++j)
    if (!taken[j]) ++r.false_negatives[gts[j].label];
  return r;
}

std::optional<PRCurve> pr_curve(const std::vector<MatchResult>& results, int label) {
  struct Ref {
    double score;
    BranchId branch;
    std::size_t scene;
    std::size_t index;
    bool tp;
  };
  std::size_t n_gt = 0;
  std::vector<Ref> refs;
  for (std::size_t s = 0; s < results.size(); ++s) {
    if (auto it = results[s].gt_count.find(label); it != results[s].gt_count.end())
      n_gt += it->second;
    const auto& entries = results[s].detections;
    for (std::size_t i = 0; i < entries.size(); ++i)
      if (entries[i].label == label)
        refs.push_back({entries[i].score, entries[i].branch, s, i, entries[i].true_positive});
  }
  if (n_gt == 0) return std::nullopt;
  std::sort(refs.begin(), refs.end(), [](const Ref& a, const Ref& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.branch != b.branch) return a.branch < b.branch;
    if (a.scene != b.scene) return a.scene < b.scene;
    return a.index < b.index;
  });
  PRCurve curve;
  curve.reserve(refs.size());
  std::size_t tp = 0, fp = 0;
  for (const auto& r : refs) {
    (r.tp ? tp : fp) += 1;
    curve.push_back({static_cast<double>(tp) / static_cast<double>(n_gt),
                     static_cast<double>(tp) / static_cast<double>(tp + fp)});
  }
  return curve;
}

double average_precision(const PRCurve& curve) {
  double ap = 0;
  double prev_recall = 0;
  for (const auto& p : curve) {
    ap += (p.recall - prev_recall) * p.precision;
    prev_recall = p.recall;
  }
  return std::clamp(ap, 0.0, 1.0);
}

double mean_ap(const std::map<int, double>& per_class) {
  if (per_class.empty()) throw EvaluationError("mean_ap over an empty class set");
  double sum = 0;
  for (const auto& [label, ap] : per_class) sum += ap;
  return sum / static_cast<double>(per_class.size());
}

EvalReport evaluate(const std::vector<Detections>& detections,
                    const std::vector<GroundTruth>& ground_truth, double iou_thresh) {
  if (detections.size() != ground_truth.size())
    throw InvalidInputError("one detection list per ground-truth scene required");
  std::vector<MatchResult> results;
  results.reserve(detections.size());
  for (std::size_t s = 0; s < detections.size(); ++s)
    results.push_back(match(detections[s], ground_truth[s], iou_thresh));
  EvalReport report;
  for (int label = 1; label <= kNumClasses; ++label) {
    if (auto curve = pr_curve(results, label))
      report.per_class_ap[label] = average_precision(*curve);
    else
      report.excluded_classes.push_back(label);
  }
  if (report.per_class_ap.empty()) throw EvaluationError("no class has ground truth");
  report.map = mean_ap(report.per_class_ap);
  return report;
}

std::string reports_csv(const std::vector<EvalReport>& reports) {
  std::ostringstream out;
  out << std::setprecision(10);
  if (reports.empty()) return "";
  for (const auto& [key, value] : reports.front().metadata) out << key << ',';
  for (int label = 1; label <= kNumClasses; ++label) out << "ap_" << kClassNames[label - 1] << ',';
  out << "mAP\n";
  for (const auto& r : reports) {
    for (const auto& [key, value] : reports.front().metadata) {
      auto it = std::find_if(r.metadata.begin(), r.metadata.end(),
                             [&](const auto& kv) { return kv.first == key; });
      out << (it == r.metadata.end() ? "" : it->second) << ',';
    }
    for (int label = 1; label <= kNumClasses; ++label) {
      auto it = r.per_class_ap.find(label);
      if (it != r.per_class_ap.end()) out << it->second;
      out << ',';
    }
    out << r.map << '\n';
  }
  return out.str();
}

std::string reports_json(const std::vector<EvalReport>& reports) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& r : reports) {
    nlohmann::ordered_json j;
    for (const auto& [key, value] : r.metadata) j["config"][key] = value;
    for (const auto& [label, ap] : r.per_class_ap) j["ap"][kClassNames[label - 1]] = ap;
    nlohmann::ordered_json excluded = nlohmann::ordered_json::array();
    for (int label : r.excluded_classes) excluded.push_back(kClassNames[label - 1]);
    j["excluded_classes"] = std::move(excluded);
    j["mAP"] = r.map;
    arr.push_back(std::move(j));
  }
  return arr.dump(2) + "\n";
}

}  // namespace ctxfusion

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

#ifndef CTXFUSION_TESTS_ORACLES_HPP
#define CTXFUSION_TESTS_ORACLES_HPP

// Reference implementations written independently of the library code.
// They favour obviousness over speed.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include <Eigen/Dense>

#include "ctxfusion/detection.hpp"
#include "ctxfusion/estimation.hpp"
#include "ctxfusion/gating.hpp"

namespace ctxfusion::oracle {

// IoU by counting unit cells of an integer-coordinate grid.
inline double raster_iou(const BoundingBox& a, const BoundingBox& b) {
  const int lo_x = static_cast<int>(std::floor(std::min(a.x1, b.x1)));
  const int hi_x = static_cast<int>(std::ceil(std::max(a.x2, b.x2)));
  const int lo_y = static_cast<int>(std::floor(std::min(a.y1, b.y1)));
  const int hi_y = static_cast<int>(std::ceil(std::max(a.y2, b.y2)));
  long inter = 0, uni = 0;
  for (int x = lo_x; x < hi_x; ++x)
    for (int y = lo_y; y < hi_y; ++y) {
      const double cx = x + 0.5, cy = y + 0.5;
      const bool in_a = cx > a.x1 && cx < a.x2 && cy > a.y1 && cy < a.y2;
      const bool in_b = cx > b.x1 && cx < b.x2 && cy > b.y1 && cy < b.y2;
      inter += in_a && in_b;
      uni += in_a || in_b;
    }
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

inline double area_iou(const BoundingBox& a, const BoundingBox& b) {
  const double iw = std::max(0.0, std::min(a.x2, b.x2) - std::max(a.x1, b.x1));
  const double ih = std::max(0.0, std::min(a.y2, b.y2) - std::max(a.y1, b.y1));
  const double inter = iw * ih;
  const double uni = (a.x2 - a.x1) * (a.y2 - a.y1) + (b.x2 - b.x1) * (b.y2 - b.y1) - inter;
  return uni <= 0 ? 0.0 : inter / uni;
}

// Priority of detection i over j: higher score, then lower branch, then earlier index.
inline bool outranks(const Detections& d, std::size_t i, std::size_t j) {
  if (d[i].score != d[j].score) return d[i].score > d[j].score;
  if (d[i].branch != d[j].branch) return d[i].branch < d[j].branch;
  return i < j;
}

// O(n^2) NMS: detection j survives iff no surviving detection that outranks it
// overlaps it above the threshold. Resolved by scanning in priority order.
inline Detections brute_nms(const Detections& d, double thr) {
  const std::size_t n = d.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  // selection sort keeps the oracle free of library comparators
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = a + 1; b < n; ++b)
      if (outranks(d, order[b], order[a])) std::swap(order[a], order[b]);
  std::vector<bool> alive(n, false);
  for (std::size_t a = 0; a < n; ++a) {
    const std::size_t j = order[a];
    bool keep = true;
    for (std::size_t b = 0; b < a; ++b) {
      const std::size_t i = order[b];
      if (alive[i] && d[i].label == d[j].label && area_iou(d[i].box, d[j].box) > thr) keep = false;
    }
    alive[j] = keep;
  }
  Detections out;
  for (std::size_t a = 0; a < n; ++a)
    if (alive[order[a]]) out.push_back(d[order[a]]);
  return out;
}

// WLS on the row-stacked system with explicit dense inverses.
inline Eigen::VectorXd stacked_wls(const std::vector<MeasurementModel<double>>& models,
                                   const std::vector<Eigen::VectorXd>& xs) {
  Eigen::Index rows = 0;
  for (const auto& m : models) rows += m.H.rows();
  const Eigen::Index ny = models.front().H.cols();
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(rows, ny);
  Eigen::MatrixXd W = Eigen::MatrixXd::Zero(rows, rows);
  Eigen::VectorXd x(rows);
  Eigen::Index r = 0;
  for (std::size_t i = 0; i < models.size(); ++i) {
    const auto n = models[i].H.rows();
    H.block(r, 0, n, ny) = models[i].H;
    W.block(r, r, n, n) = models[i].R.inverse();
    x.segment(r, n) = xs[i];
    r += n;
  }
  return (H.transpose() * W * H).inverse() * (H.transpose() * W * x);
}

// Central finite differences of sample_mae over every gate parameter, in the
// order w1 (row-major), b1, w2 (row-major), b2, attention.
inline std::vector<double> numeric_gate_gradient(LearnedGate gate, const GateSample& s, double h) {
  std::vector<double> g;
  auto probe = [&](double& p) {
    const double keep = p;
    p = keep + h;
    const double up = sample_mae(gate, s);
    p = keep - h;
    const double down = sample_mae(gate, s);
    p = keep;
    g.push_back((up - down) / (2 * h));
  };
  for (Eigen::Index r = 0; r < gate.w1.rows(); ++r)
    for (Eigen::Index c = 0; c < gate.w1.cols(); ++c) probe(gate.w1(r, c));
  for (Eigen::Index i = 0; i < gate.b1.size(); ++i) probe(gate.b1(i));
  for (Eigen::Index r = 0; r < gate.w2.rows(); ++r)
    for (Eigen::Index c = 0; c < gate.w2.cols(); ++c) probe(gate.w2(r, c));
  for (Eigen::Index i = 0; i < gate.b2.size(); ++i) probe(gate.b2(i));
  if (gate.attention_enabled)
    for (Eigen::Index i = 0; i < gate.attention.size(); ++i) probe(gate.attention(i));
  return g;
}

inline std::vector<double> flatten(const GateGradient& g, bool attention) {
  std::vector<double> out;
  for (Eigen::Index r = 0; r < g.w1.rows(); ++r)
    for (Eigen::Index c = 0; c < g.w1.cols(); ++c) out.push_back(g.w1(r, c));
  for (Eigen::Index i = 0; i < g.b1.size(); ++i) out.push_back(g.b1(i));
  for (Eigen::Index r = 0; r < g.w2.rows(); ++r)
    for (Eigen::Index c = 0; c < g.w2.cols(); ++c) out.push_back(g.w2(r, c));
  for (Eigen::Index i = 0; i < g.b2.size(); ++i) out.push_back(g.b2(i));
  if (attention)
    for (Eigen::Index i = 0; i < g.attention.size(); ++i) out.push_back(g.attention(i));
  return out;
}

// Worst relative error between two gradients. Entries smaller than `floor`
// are compared absolutely.
inline double gradient_mismatch(const std::vector<double>& a, const std::vector<double>& b,
                                double floor = 1e-6) {
  double worst = 0;
  for (std::size_t i = 0; i < a.size(); ++i)
    worst = std::max(worst, std::abs(a[i] - b[i]) / std::max(floor, std::max(std::abs(a[i]), std::abs(b[i]))));
  return worst;
}

// Number of ground truths matched by an exhaustive search over one-to-one
// assignments with IoU >= thr (single class, small inputs only).
inline int max_assignment(const Detections& d, const GroundTruth& g, double thr,
                          std::size_t i = 0, std::vector<bool> used = {}) {
  if (used.empty()) used.assign(g.size(), false);
  if (i == d.size()) return 0;
  int best = max_assignment(d, g, thr, i + 1, used);
  for (std::size_t j = 0; j < g.size(); ++j)
    if (!used[j] && area_iou(d[i].box, g[j].box) >= thr) {
      used[j] = true;
      best = std::max(best, 1 + max_assignment(d, g, thr, i + 1, used));
      used[j] = false;
    }
  return best;
}

}  // namespace ctxfusion::oracle

#endif  // CTXFUSION_TESTS_ORACLES_HPP

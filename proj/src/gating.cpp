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

#include "ctxfusion/gating.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "ctxfusion/scoring.hpp"

namespace ctxfusion {

GateRanking ranking_from_losses(const std::map<BranchId, double>& losses) {
  GateRanking r;
  r.predicted_loss = losses;
  for (const auto& [id, loss] : losses) r.order.push_back(id);
  // Map iteration is already ascending by id, so a stable sort keeps the tie-break.
  std::stable_sort(r.order.begin(), r.order.end(),
                   [&](BranchId a, BranchId b) { return losses.at(a) < losses.at(b); });
  return r;
}

std::vector<BranchId> select_top_k(const GateRanking& ranking, int k) {
  if (k < 1 || k > static_cast<int>(ranking.order.size()))
    throw ConfigError("k = " + std::to_string(k) + " outside [1, " +
                      std::to_string(ranking.order.size()) + "]");
  return {ranking.order.begin(), ranking.order.begin() + k};
}

void KnowledgeTable::validate(const std::vector<BranchId>& branches) const {
  const std::set<BranchId> expected(branches.begin(), branches.end());
  for (ContextLabel c : kAllContexts) {
    auto it = order.find(c);
    if (it == order.end())
      throw ConfigError("knowledge table has no entry for '" + std::string(to_string(c)) + "'");
    const std::set<BranchId> got(it->second.begin(), it->second.end());
    if (got != expected || got.size() != it->second.size())
      throw ConfigError("knowledge table entry for '" + std::string(to_string(c)) +
                        "' is not a permutation of the branch set");
  }
}

KnowledgeTable KnowledgeTable::defaults() {
  // Ids follow default_branch_set(): 0 left camera, 1 right camera, 2 lidar,
  // 3 radar, 4 L/R cameras, 5 lidar+radar, 6 L/R cameras+lidar.
  using enum ContextLabel;
  const std::vector<BranchId> adverse = {3, 5, 2, 6, 4, 0, 1};
  const std::vector<BranchId> urban = {4, 0, 1, 6, 5, 3, 2};
  const std::vector<BranchId> open_road = {5, 6, 4, 3, 2, 0, 1};
  return KnowledgeTable{{{kCity, urban},
                         {kJunction, urban},
                         {kMotorway, open_road},
                         {kRural, open_road},
                         {kSnow, adverse},
                         {kFog, adverse},
                         {kNight, adverse}}};
}

GateRanking knowledge_rank(const Context& context, const KnowledgeTable& table) {
  auto it = table.order.find(context.label);
  if (it == table.order.end())
    throw LookupError("knowledge table has no entry for '" +
                      std::string(to_string(context.label)) + "'");
  GateRanking r;
  r.order = it->second;
  for (std::size_t i = 0; i < r.order.size(); ++i)
    r.predicted_loss[r.order[i]] = static_cast<double>(i);
  return r;
}

GateRanking optimal_rank(const std::map<BranchId, double>& branch_losses) {
  for (const auto& [id, loss] : branch_losses)
    if (!(loss >= 0) || !std::isfinite(loss))
      throw InvalidInputError("branch " + std::to_string(id) + " has an invalid loss");
  return ranking_from_losses(branch_losses);
}

double branch_loss(const Detections& dets, const GroundTruth& gt, const LossWeights& w) {
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return dets[a].score > dets[b].score; });
  std::vector<bool> taken(gt.size(), false);
  double loss = 0;
  for (std::size_t i : order) {
    double best = -1;
    std::size_t best_j = gt.size();
    for (std::size_t j = 0; j < gt.size(); ++j) {
      if (taken[j] || gt[j].label != dets[i].label) continue;
      const double o = iou(dets[i].box, gt[j].box);
      if (o > best) {
        best = o;
        best_j = j;
      }
    }
    if (best_j < gt.size() && best >= kMatchIou) {
      taken[best_j] = true;
      loss += 1.0 - best;
    } else {
      loss += w.false_positive * dets[i].score;
    }
  }
  loss += w.miss * static_cast<double>(std::count(taken.begin(), taken.end(), false));
  return loss;
}

// Learned gate ---------------------------------------------------------------

void LearnedGate::validate() const {
  if (input_dim < 1 || hidden_dim < 1 || branch_ids.empty())
    throw ShapeError("gate dimensions must be positive");
  if (attention_enabled) {
    if (block_dim < 1 || input_dim % block_dim != 0)
      throw ShapeError("input_dim must be a multiple of block_dim");
    if (attention.size() != block_dim) throw ShapeError("attention vector must have block_dim entries");
  }
  if (w1.rows() != hidden_dim || w1.cols() != pooled_dim() || b1.size() != hidden_dim ||
      w2.rows() != output_dim() || w2.cols() != hidden_dim || b2.size() != output_dim())
    throw ShapeError("gate weight shapes are inconsistent with its dimensions");
}

bool operator==(const LearnedGate& a, const LearnedGate& b) {
  auto same = [](const auto& x, const auto& y) {
    return x.rows() == y.rows() && x.cols() == y.cols() && (x.size() == 0 || x == y);
  };
  return a.input_dim == b.input_dim && a.hidden_dim == b.hidden_dim &&
         a.block_dim == b.block_dim && a.attention_enabled == b.attention_enabled &&
         a.branch_ids == b.branch_ids && same(a.w1, b.w1) && same(a.b1, b.b1) &&
         same(a.w2, b.w2) && same(a.b2, b.b2) && same(a.attention, b.attention);
}

namespace {

Eigen::VectorXd softmax(const Eigen::VectorXd& s) {
  const double top = s.maxCoeff();
  Eigen::VectorXd e = (s.array() - top).exp().matrix();
  return e / e.sum();
}

/// Blocks as columns: block_dim x num_blocks.
Eigen::Map<const Eigen::MatrixXd> blocks_of(const LearnedGate& g, const Eigen::VectorXd& f) {
  return {f.data(), g.block_dim, g.num_blocks()};
}

}  // namespace

GateActivations gate_forward(const LearnedGate& gate, const Eigen::VectorXd& features) {
  if (features.size() != gate.input_dim)
    throw ShapeError("feature length " + std::to_string(features.size()) +
                     " does not match gate input " + std::to_string(gate.input_dim));
  GateActivations a;
  if (gate.attention_enabled) {
    const auto blocks = blocks_of(gate, features);
    a.attention_weights = softmax(blocks.transpose() * gate.attention);
    a.pooled = blocks * a.attention_weights;
  } else {
    a.attention_weights = Eigen::VectorXd::Ones(1);
    a.pooled = features;
  }
  a.hidden_pre = gate.w1 * a.pooled + gate.b1;
  a.hidden = a.hidden_pre.cwiseMax(0.0);
  a.output = gate.w2 * a.hidden + gate.b2;
  return a;
}

Eigen::VectorXd attention_weights(const LearnedGate& gate, std::span<const double> features) {
  const Eigen::VectorXd f =
      Eigen::Map<const Eigen::VectorXd>(features.data(), static_cast<Eigen::Index>(features.size()));
  if (!gate.attention_enabled) return Eigen::VectorXd::Ones(1);
  return gate_forward(gate, f).attention_weights;
}

GateRanking learned_rank(std::span<const double> features, const LearnedGate& gate) {
  const Eigen::VectorXd f =
      Eigen::Map<const Eigen::VectorXd>(features.data(), static_cast<Eigen::Index>(features.size()));
  const auto a = gate_forward(gate, f);
  std::map<BranchId, double> losses;
  for (int i = 0; i < gate.output_dim(); ++i)
    losses[gate.branch_ids[i]] = std::max(a.output(i), 0.0);
  return ranking_from_losses(losses);
}

}  // namespace ctxfusion

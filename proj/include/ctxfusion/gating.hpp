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

#ifndef CTXFUSION_GATING_HPP
#define CTXFUSION_GATING_HPP

// Branch ranking and top-k selection. Every gate produces a GateRanking: a
// predicted loss per branch and the branches ordered by ascending loss
// (ties: ascending branch id).

#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "ctxfusion/detection.hpp"
#include "ctxfusion/rng.hpp"
#include "ctxfusion/scenario.hpp"

namespace ctxfusion {

struct GateRanking {
  std::map<BranchId, double> predicted_loss;
  std::vector<BranchId> order;

  friend bool operator==(const GateRanking&, const GateRanking&) = default;
};

/// Orders branches by ascending loss, ascending id on ties.
GateRanking ranking_from_losses(const std::map<BranchId, double>& losses);

/// The first k entries of the ranking. Throws ConfigError unless 1 <= k <= size.
std::vector<BranchId> select_top_k(const GateRanking& ranking, int k);

// Knowledge gating -----------------------------------------------------------

struct KnowledgeTable {
  std::map<ContextLabel, std::vector<BranchId>> order;

  /// Every context must order exactly `branches`.
  void validate(const std::vector<BranchId>& branches) const;
  static KnowledgeTable defaults();
};

/// Stored order for the context; predicted loss is the rank index.
GateRanking knowledge_rank(const Context& context, const KnowledgeTable& table);

// Optimal gating -------------------------------------------------------------

/// Ranks by realized loss. Throws InvalidInputError on negative or NaN losses.
GateRanking optimal_rank(const std::map<BranchId, double>& branch_losses);

struct LossWeights {
  double miss{1.0};
  double false_positive{0.5};
};

/// Detection-level branch loss after greedy score-ordered same-class matching
/// at IoU >= 0.5: sum(1 - IoU) over matches + miss * unmatched ground truth
/// + false_positive * sum of unmatched detection scores.
double branch_loss(const Detections& dets, const GroundTruth& gt, const LossWeights& w = {});

// Learned gating -------------------------------------------------------------

/// Two-layer ReLU ranker regressing per-branch loss from stem features. With
/// attention enabled the feature vector is split into equal blocks that are
/// pooled with softmax(attention . block) weights before the MLP.
struct LearnedGate {
  int input_dim{0};
  int hidden_dim{0};
  int block_dim{0};
  bool attention_enabled{false};
  std::vector<BranchId> branch_ids;

  Eigen::MatrixXd w1;  // hidden x pooled_dim
  Eigen::VectorXd b1;
  Eigen::MatrixXd w2;  // outputs x hidden
  Eigen::VectorXd b2;
  Eigen::VectorXd attention;  // block_dim, used when attention_enabled

  int pooled_dim() const { return attention_enabled ? block_dim : input_dim; }
  int num_blocks() const { return attention_enabled ? input_dim / block_dim : 1; }
  int output_dim() const { return static_cast<int>(branch_ids.size()); }

  void validate() const;
};

/// Exact equality of shapes, flags and every parameter.
bool operator==(const LearnedGate& a, const LearnedGate& b);

/// Intermediate values of one forward pass, kept for backpropagation.
struct GateActivations {
  Eigen::VectorXd attention_weights;  // one per block
  Eigen::VectorXd pooled;
  Eigen::VectorXd hidden_pre;
  Eigen::VectorXd hidden;
  Eigen::VectorXd output;
};

GateActivations gate_forward(const LearnedGate& gate, const Eigen::VectorXd& features);

/// Softmax block weights (all ones / m without attention).
Eigen::VectorXd attention_weights(const LearnedGate& gate, std::span<const double> features);

GateRanking learned_rank(std::span<const double> features, const LearnedGate& gate);

struct GateSample {
  std::vector<double> features;
  /// Actual loss per gate output, aligned with LearnedGate::branch_ids.
  std::vector<double> losses;
};

enum class GateOptimizer { kSgd, kAdam };

struct GateHyperParams {
  int hidden_dim{64};
  int epochs{200};
  double learning_rate{5e-5};
  double init_scale{0.1};
  bool attention{false};
  /// Block size for attention pooling.
  int block_dim{0};
  GateOptimizer optimizer{GateOptimizer::kAdam};
  double adam_beta1{0.9};
  double adam_beta2{0.999};
  double adam_epsilon{1e-8};
};

struct GateGradient {
  Eigen::MatrixXd w1;
  Eigen::VectorXd b1;
  Eigen::MatrixXd w2;
  Eigen::VectorXd b2;
  Eigen::VectorXd attention;
};

/// Mean absolute error of one sample.
double sample_mae(const LearnedGate& gate, const GateSample& sample);
/// Mean of sample_mae over a dataset.
double dataset_mae(const LearnedGate& gate, std::span<const GateSample> samples);
/// Analytic gradient of sample_mae with respect to every parameter.
GateGradient mae_gradient(const LearnedGate& gate, const GateSample& sample);

/// Scaled-uniform initialization in [-init_scale, init_scale], zero biases.
LearnedGate init_gate(int input_dim, const std::vector<BranchId>& branch_ids,
                      const GateHyperParams& hp, Rng& rng);

struct GateTrainingResult {
  LearnedGate gate;
  /// Training-set MAE before training and after each epoch.
  std::vector<double> epoch_mae;
};

/// Batch-size-1 training on MAE. Sample order is reshuffled each epoch from rng.
GateTrainingResult train_gate(std::span<const GateSample> samples,
                              const std::vector<BranchId>& branch_ids, const GateHyperParams& hp,
                              Rng& rng);

}  // namespace ctxfusion

#endif  // CTXFUSION_GATING_HPP

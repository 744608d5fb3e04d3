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

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include "ctxfusion/gating.hpp"

namespace ctxfusion {

namespace {

Eigen::VectorXd as_vector(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

void check_sample(const LearnedGate& gate, const GateSample& s) {
  if (static_cast<int>(s.features.size()) != gate.input_dim)
    throw ShapeError("sample feature length does not match the gate");
  if (static_cast<int>(s.losses.size()) != gate.output_dim())
    throw ShapeError("sample loss count does not match the gate outputs");
}

/// Parameters and gradients flattened in one fixed order so the optimizer can
/// treat them uniformly.
template <typename Fn>
void for_each_param(LearnedGate& g, const GateGradient& grad, Fn&& fn) {
  fn(g.w1.reshaped(), grad.w1.reshaped(), 0);
  fn(g.b1, grad.b1, 1);
  fn(g.w2.reshaped(), grad.w2.reshaped(), 2);
  fn(g.b2, grad.b2, 3);
  if (g.attention_enabled) fn(g.attention, grad.attention, 4);
}

}  // namespace

double sample_mae(const LearnedGate& gate, const GateSample& sample) {
  check_sample(gate, sample);
  const auto a = gate_forward(gate, as_vector(sample.features));
  return (a.output - as_vector(sample.losses)).cwiseAbs().mean();
}

double dataset_mae(const LearnedGate& gate, std::span<const GateSample> samples) {
  if (samples.empty()) return 0.0;
  double sum = 0;
  for (const auto& s : samples) sum += sample_mae(gate, s);
  return sum / static_cast<double>(samples.size());
}

GateGradient mae_gradient(const LearnedGate& gate, const GateSample& sample) {
  check_sample(gate, sample);
  const Eigen::VectorXd f = as_vector(sample.features);
  const auto a = gate_forward(gate, f);
  const Eigen::VectorXd residual = a.output - as_vector(sample.losses);
  const Eigen::VectorXd d_out =
      residual.unaryExpr([](double r) { return r > 0 ? 1.0 : (r < 0 ? -1.0 : 0.0); }) /
      static_cast<double>(gate.output_dim());

  GateGradient g;
  g.w2 = d_out * a.hidden.transpose();
  g.b2 = d_out;
  const Eigen::VectorXd d_hidden = gate.w2.transpose() * d_out;
  const Eigen::VectorXd d_pre =
      d_hidden.cwiseProduct((a.hidden_pre.array() > 0).cast<double>().matrix());
  g.w1 = d_pre * a.pooled.transpose();
  g.b1 = d_pre;
  if (gate.attention_enabled) {
    // pooled = sum_j alpha_j B_j, alpha = softmax(B^T a):
    // dL/da = sum_j alpha_j (d_pooled . (B_j - pooled)) B_j.
    const Eigen::VectorXd d_pooled = gate.w1.transpose() * d_pre;
    const Eigen::Map<const Eigen::MatrixXd> blocks(f.data(), gate.block_dim, gate.num_blocks());
    const Eigen::VectorXd d_scores =
        a.attention_weights.cwiseProduct(blocks.transpose() * d_pooled -
                                         Eigen::VectorXd::Constant(gate.num_blocks(),
                                                                   d_pooled.dot(a.pooled)));
    g.attention = blocks * d_scores;
  } else {
    g.attention = Eigen::VectorXd::Zero(gate.attention.size());
  }
  return g;
}

LearnedGate init_gate(int input_dim, const std::vector<BranchId>& branch_ids,
                      const GateHyperParams& hp, Rng& rng) {
  if (input_dim < 1 || hp.hidden_dim < 1 || branch_ids.empty())
    throw ConfigError("gate needs positive input, hidden and output sizes");
  LearnedGate g;
  g.input_dim = input_dim;
  g.hidden_dim = hp.hidden_dim;
  g.attention_enabled = hp.attention;
  g.block_dim = hp.attention ? hp.block_dim : 0;
  g.branch_ids = branch_ids;
  if (hp.attention && (hp.block_dim < 1 || input_dim % hp.block_dim != 0))
    throw ConfigError("attention needs block_dim dividing the feature length");
  std::uniform_real_distribution<double> u(-hp.init_scale, hp.init_scale);
  auto fill = [&](Eigen::Index rows, Eigen::Index cols) {
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
      for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = u(rng);
    return m;
  };
  g.w1 = fill(g.hidden_dim, g.pooled_dim());
  g.b1 = Eigen::VectorXd::Zero(g.hidden_dim);
  g.w2 = fill(g.output_dim(), g.hidden_dim);
  g.b2 = Eigen::VectorXd::Zero(g.output_dim());
  g.attention = hp.attention ? Eigen::VectorXd(fill(g.block_dim, 1)) : Eigen::VectorXd();
  return g;
}

GateTrainingResult train_gate(std::span<const GateSample> samples,
                              const std::vector<BranchId>& branch_ids, const GateHyperParams& hp,
                              Rng& rng) {
  if (samples.empty()) throw ConfigError("gate training needs at least one sample");
  if (hp.epochs < 0) throw ConfigError("epochs must be nonnegative");
  if (!(hp.learning_rate > 0)) throw ConfigError("learning rate must be positive");
  const int input_dim = static_cast<int>(samples.front().features.size());

  GateTrainingResult result{init_gate(input_dim, branch_ids, hp, rng), {}};
  LearnedGate& gate = result.gate;
  for (const auto& s : samples) check_sample(gate, s);

  // Adam moment estimates, one pair per parameter group.
  std::array<Eigen::VectorXd, 5> m1, m2;
  {
    GateGradient zero = mae_gradient(gate, samples.front());
    for_each_param(gate, zero, [&](auto&& p, const auto&, int slot) {
      m1[slot] = Eigen::VectorXd::Zero(p.size());
      m2[slot] = Eigen::VectorXd::Zero(p.size());
    });
  }

  auto record_mae = [&] {
    const double mae = dataset_mae(gate, samples);
    if (!std::isfinite(mae)) throw DivergenceError("gate training produced a non-finite loss");
    result.epoch_mae.push_back(mae);
  };
  record_mae();

  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::size_t step = 0;
  for (int epoch = 0; epoch < hp.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t idx : order) {
      const GateGradient grad = mae_gradient(gate, samples[idx]);
      ++step;
      if (hp.optimizer == GateOptimizer::kSgd) {
        for_each_param(gate, grad, [&](auto&& p, const auto& g, int) { p -= hp.learning_rate * g; });
        continue;
      }
      const double c1 = 1.0 - std::pow(hp.adam_beta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(hp.adam_beta2, static_cast<double>(step));
      for_each_param(gate, grad, [&](auto&& p, const auto& g, int slot) {
        m1[slot] = hp.adam_beta1 * m1[slot] + (1.0 - hp.adam_beta1) * g;
        m2[slot] = hp.adam_beta2 * m2[slot] + (1.0 - hp.adam_beta2) * g.cwiseAbs2();
        p -= (hp.learning_rate * (m1[slot] / c1).array() /
              ((m2[slot] / c2).array().sqrt() + hp.adam_epsilon))
                 .matrix();
      });
    }
    record_mae();
  }
  return result;
}

}  // namespace ctxfusion

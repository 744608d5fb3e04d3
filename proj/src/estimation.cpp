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

#include "ctxfusion/estimation.hpp"

#include <cmath>
#include <iomanip>
#include <sstream>

#include "ctxfusion/rng.hpp"

namespace ctxfusion {

namespace {

MisspecificationConfig scalar_three_sensor(double third_true_variance) {
  MisspecificationConfig cfg;
  cfg.true_y = Vector<double>::Constant(1, 1.0);
  for (int i = 0; i < 3; ++i) {
    SensorSpec s;
    s.name = "sensor" + std::to_string(i);
    s.declared.H = Matrix<double>::Ones(1, 1);
    s.declared.R = Matrix<double>::Ones(1, 1);
    s.true_covariance = Matrix<double>::Constant(1, 1, i == 2 ? third_true_variance : 1.0);
    cfg.sensors.push_back(std::move(s));
  }
  cfg.subsets = {{"all", {0, 1, 2}}, {"exclude_sensor2", {0, 1}}, {"sensor0", {0}}};
  cfg.trials = 10000;
  cfg.seed = 7;
  return cfg;
}

}  // namespace

MisspecificationConfig MisspecificationConfig::misspecified_default() {
  return scalar_three_sensor(100.0);
}

MisspecificationConfig MisspecificationConfig::well_specified_default() {
  return scalar_three_sensor(1.0);
}

std::vector<SubsetResult> run_misspecification_experiment(const MisspecificationConfig& cfg) {
  if (cfg.sensors.empty()) throw ConfigError("experiment has no sensors");
  if (cfg.subsets.empty()) throw ConfigError("experiment has no subsets");
  if (cfg.trials < 2) throw ConfigError("experiment needs at least two trials");

  std::vector<MeasurementModel<double>> models;
  for (const auto& s : cfg.sensors) {
    detail::check_model(s.declared);
    detail::checked_covariance(s.declared.R);
    if (s.declared.state_dim() != cfg.true_y.size())
      throw ConfigError("sensor '" + s.name + "' does not match the state dimension");
    if (s.true_covariance.rows() != s.declared.R.rows())
      throw ConfigError("sensor '" + s.name + "' true covariance has the wrong size");
    models.push_back(s.declared);
  }
  std::vector<Eigen::LLT<Matrix<double>>> true_factors;
  for (const auto& s : cfg.sensors) true_factors.push_back(detail::checked_covariance(s.true_covariance));

  std::vector<SubsetResult> results;
  for (const auto& sub : cfg.subsets) {
    if (sub.sensors.empty()) throw ConfigError("subset '" + sub.id + "' is empty");
    SubsetResult r;
    r.id = sub.id;
    r.sensors = sub.sensors;
    std::vector<MeasurementModel<double>> chosen;
    std::vector<Vector<double>> zeros;
    for (int i : sub.sensors) {
      if (i < 0 || static_cast<std::size_t>(i) >= models.size())
        throw ConfigError("subset '" + sub.id + "' references an unknown sensor");
      chosen.push_back(models[i]);
      zeros.push_back(Vector<double>::Zero(models[i].measurement_dim()));
    }
    r.predicted_mse = batch_fuse(chosen, zeros).covariance.trace();
    results.push_back(std::move(r));
  }

  // Welford accumulators per subset; every subset sees the same noise draws.
  std::vector<double> mean(cfg.subsets.size(), 0.0), m2(cfg.subsets.size(), 0.0);
  std::vector<Vector<double>> xs(models.size());
  for (std::size_t t = 0; t < cfg.trials; ++t) {
    Rng gen = make_rng(cfg.seed, {stream::kTrial, t});
    std::normal_distribution<double> normal(0.0, 1.0);
    for (std::size_t i = 0; i < models.size(); ++i) {
      Vector<double> z(models[i].measurement_dim());
      for (Eigen::Index j = 0; j < z.size(); ++j) z(j) = normal(gen);
      xs[i] = models[i].H * cfg.true_y + true_factors[i].matrixL() * z;
    }
    for (std::size_t s = 0; s < cfg.subsets.size(); ++s) {
      std::vector<MeasurementModel<double>> chosen;
      std::vector<Vector<double>> chosen_x;
      for (int i : cfg.subsets[s].sensors) {
        chosen.push_back(models[i]);
        chosen_x.push_back(xs[i]);
      }
      const double err = (batch_fuse(chosen, chosen_x).y_hat - cfg.true_y).squaredNorm();
      const double delta = err - mean[s];
      mean[s] += delta / static_cast<double>(t + 1);
      m2[s] += delta * (err - mean[s]);
    }
  }
  const double n = static_cast<double>(cfg.trials);
  for (std::size_t s = 0; s < results.size(); ++s) {
    results[s].mean_squared_error = mean[s];
    results[s].std_error = std::sqrt(m2[s] / (n - 1) / n);
  }
  return results;
}

std::string misspecification_csv(const std::vector<SubsetResult>& results) {
  std::ostringstream out;
  out << "subset,sensors,mean_squared_error,std_error,predicted_mse\n";
  out << std::setprecision(10);
  for (const auto& r : results) {
    out << r.id << ',';
    for (std::size_t i = 0; i < r.sensors.size(); ++i) out << (i ? ";" : "") << r.sensors[i];
    out << ',' << r.mean_squared_error << ',' << r.std_error << ',' << r.predicted_mse << '\n';
  }
  return out.str();
}

}  // namespace ctxfusion

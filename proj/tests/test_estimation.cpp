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

#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "ctxfusion/errors.hpp"
#include "ctxfusion/estimation.hpp"
#include "ctxfusion/rng.hpp"
#include "oracles.hpp"

namespace ctxfusion {
namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

VectorXd vec(std::initializer_list<double> v) {
  VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

MatrixXd spd(std::mt19937_64& gen, Eigen::Index n) {
  std::normal_distribution<double> d;
  MatrixXd a(n, n);
  for (Eigen::Index i = 0; i < a.size(); ++i) a(i) = d(gen);
  return a * a.transpose() + 0.1 * MatrixXd::Identity(n, n);
}

struct Instance {
  std::vector<MeasurementModel<double>> models;
  std::vector<VectorXd> xs;
};

Instance random_instance(std::mt19937_64& gen) {
  std::uniform_int_distribution<int> ny_d(1, 4), ns_d(1, 5), rows_d(1, 4);
  std::normal_distribution<double> d;
  const int ny = ny_d(gen);
  const int sensors = ns_d(gen);
  Instance inst;
  int total = 0;
  for (int s = 0; s < sensors; ++s) {
    int rows = rows_d(gen);
    if (s == sensors - 1 && total + rows < ny) rows = ny - total;  // keep the stack full rank
    total += rows;
    MeasurementModel<double> m{MatrixXd(rows, ny), spd(gen, rows)};
    for (Eigen::Index i = 0; i < m.H.size(); ++i) m.H(i) = d(gen);
    VectorXd x(rows);
    for (Eigen::Index i = 0; i < rows; ++i) x(i) = d(gen) * 3;
    inst.models.push_back(std::move(m));
    inst.xs.push_back(std::move(x));
  }
  return inst;
}

TEST(LsEstimate, Examples) {
  const VectorXd x = vec({1.5, -2, 4});
  EXPECT_TRUE(ls_estimate<double>(MatrixXd::Identity(3, 3), x).isApprox(x));
  EXPECT_NEAR(ls_estimate<double>(MatrixXd::Ones(2, 1), vec({2, 4}))(0), 3.0, 1e-12);
  const MatrixXd h = MatrixXd::Ones(3, 1);
  const VectorXd y = ls_estimate<double>(h, vec({1, 1, 1}));
  EXPECT_NEAR(y(0), 1.0, 1e-12);
  EXPECT_NEAR((vec({1, 1, 1}) - h * y).norm(), 0.0, 1e-12);
}

TEST(LsEstimate, RankDeficientThrows) {
  MatrixXd h(3, 2);
  h << 1, 2, 2, 4, 3, 6;
  EXPECT_THROW(ls_estimate<double>(h, vec({1, 2, 3})), SingularSystemError);
}

TEST(WlsEstimate, Examples) {
  const MatrixXd h = MatrixXd::Ones(2, 1);
  MeasurementModel<double> m{h, vec({1, 4}).asDiagonal()};
  EXPECT_NEAR(wls_estimate(m, vec({0, 5}))(0), 1.0, 1e-9);
  m.R = vec({1, 1e6}).asDiagonal();
  EXPECT_NEAR(wls_estimate(m, vec({0, 5}))(0), 0.0, 1e-4);
  m.R = MatrixXd::Identity(2, 2);
  EXPECT_NEAR(wls_estimate(m, vec({2, 7}))(0), ls_estimate<double>(h, vec({2, 7}))(0), 1e-12);
}

TEST(WlsEstimate, FloatScalar) {
  MeasurementModel<float> m{Eigen::MatrixXf::Ones(2, 1), Eigen::Vector2f(1, 4).asDiagonal()};
  EXPECT_NEAR(wls_estimate<float>(m, Eigen::Vector2f(0, 5))(0), 1.0f, 1e-5f);
}

TEST(WlsEstimate, RejectsBadCovariance) {
  const MatrixXd h = MatrixXd::Ones(2, 1);
  MatrixXd r(2, 2);
  r << 1, 2, 2, 1;  // indefinite
  EXPECT_THROW(wls_estimate(MeasurementModel<double>{h, r}, vec({0, 1})), InvalidModelError);
  r << 1, 0.5, 0, 1;  // asymmetric
  EXPECT_THROW(wls_estimate(MeasurementModel<double>{h, r}, vec({0, 1})), InvalidModelError);
  r << 1, 0, 0, 1e-14;  // ill-conditioned beyond 1e-12
  EXPECT_THROW(wls_estimate(MeasurementModel<double>{h, r}, vec({0, 1})), InvalidModelError);
}

TEST(WlsEstimate, InvariantToScalingR) {
  std::mt19937_64 gen(21);
  for (int i = 0; i < 100; ++i) {
    auto inst = random_instance(gen);
    auto [m, x] = stack_models(inst.models, inst.xs);
    const VectorXd y = wls_estimate(m, x);
    m.R *= 37.5;
    EXPECT_LT((wls_estimate(m, x) - y).cwiseAbs().maxCoeff(), 1e-9 * std::max(1.0, y.norm()));
  }
}

TEST(WlsEstimate, ResidualIsOrthogonal) {
  std::mt19937_64 gen(22);
  for (int i = 0; i < 100; ++i) {
    auto inst = random_instance(gen);
    const auto [m, x] = stack_models(inst.models, inst.xs);
    const VectorXd y = wls_estimate(m, x);
    const VectorXd g = m.H.transpose() * m.R.llt().solve(VectorXd(x - m.H * y));
    EXPECT_LT(g.cwiseAbs().maxCoeff(), 1e-8);
  }
}

TEST(BatchFuse, Examples) {
  MeasurementModel<double> one{MatrixXd::Ones(2, 1), vec({1, 4}).asDiagonal()};
  const auto single = batch_fuse<double>({one}, {vec({0, 5})});
  EXPECT_NEAR(single.y_hat(0), wls_estimate(one, vec({0, 5}))(0), 1e-12);

  MeasurementModel<double> s{MatrixXd::Ones(1, 1), MatrixXd::Ones(1, 1)};
  const auto two = batch_fuse<double>({s, s}, {vec({2}), vec({5})});
  EXPECT_NEAR(two.y_hat(0), 3.5, 1e-12);
  EXPECT_NEAR(two.covariance(0, 0), 0.5, 1e-12);
}

TEST(BatchFuse, EqualsBlockStackedWls) {
  std::mt19937_64 gen(23);
  for (int i = 0; i < 100; ++i) {
    const auto inst = random_instance(gen);
    const auto fused = batch_fuse(inst.models, inst.xs);
    const auto [m, x] = stack_models(inst.models, inst.xs);
    const VectorXd stacked = wls_estimate(m, x);
    const VectorXd dense = oracle::stacked_wls(inst.models, inst.xs);
    const double scale = std::max(1.0, dense.norm());
    EXPECT_LT((fused.y_hat - stacked).cwiseAbs().maxCoeff(), 1e-8 * scale) << i;
    EXPECT_LT((fused.y_hat - dense).cwiseAbs().maxCoeff(), 1e-8 * scale) << i;
    // Covariance is symmetric positive definite.
    EXPECT_TRUE(fused.covariance.isApprox(fused.covariance.transpose()));
    EXPECT_GT(Eigen::SelfAdjointEigenSolver<MatrixXd>(fused.covariance).eigenvalues().minCoeff(), 0);
  }
}

TEST(BatchFuse, Errors) {
  MeasurementModel<double> a{MatrixXd::Ones(1, 1), MatrixXd::Ones(1, 1)};
  MeasurementModel<double> b{MatrixXd::Ones(1, 2), MatrixXd::Ones(1, 1)};
  EXPECT_THROW(batch_fuse(std::vector<MeasurementModel<double>>{}, std::vector<VectorXd>{}), InvalidInputError);
  EXPECT_THROW(batch_fuse<double>({a, b}, {vec({1}), vec({1})}), InvalidInputError);
  EXPECT_THROW(batch_fuse<double>({a}, {vec({1, 2})}), InvalidInputError);
  EXPECT_THROW(batch_fuse<double>({b, b}, {vec({1}), vec({2})}), SingularSystemError);
}

TEST(Misspecification, UnbiasedUnderWellSpecifiedNoise) {
  const auto cfg = MisspecificationConfig::well_specified_default();
  std::vector<MeasurementModel<double>> models;
  std::vector<MatrixXd> covs;
  for (const auto& s : cfg.sensors) {
    models.push_back(s.declared);
    covs.push_back(s.true_covariance);
  }
  const std::vector<int> all = {0, 1, 2};
  Rng gen = make_rng(99, {});
  const int n = 100000;
  double sum = 0, sum_sq = 0;
  std::vector<MeasurementModel<double>> chosen(models);
  for (int t = 0; t < n; ++t) {
    std::vector<VectorXd> xs;
    for (std::size_t i = 0; i < models.size(); ++i)
      xs.push_back(models[i].H * cfg.true_y + sample_gaussian<double>(covs[i], gen));
    const double y = batch_fuse(chosen, xs).y_hat(0);
    sum += y;
    sum_sq += y * y;
  }
  const double mean = sum / n;
  const double se = std::sqrt((sum_sq / n - mean * mean) / n);
  EXPECT_LT(std::abs(mean - cfg.true_y(0)), 3 * se);
}

TEST(Misspecification, TrialSquaredError) {
  std::vector<MeasurementModel<double>> models(2, {MatrixXd::Ones(1, 1), MatrixXd::Ones(1, 1)});
  std::vector<MatrixXd> covs(2, MatrixXd::Constant(1, 1, 1e-30));
  const std::vector<int> subset = {0, 1};
  Rng gen = make_rng(1, {});
  const double err = misspecification_trial<double>(vec({4}), models, covs, subset, gen);
  EXPECT_NEAR(err, 0.0, 1e-20);
  EXPECT_THROW(misspecification_trial<double>(vec({4}), models, covs, std::vector<int>{}, gen),
               InvalidInputError);
}

TEST(Misspecification, MonteCarloMatchesAnalyticCovariance) {
  auto cfg = MisspecificationConfig::well_specified_default();
  cfg.trials = 100000;
  for (const auto& r : run_misspecification_experiment(cfg))
    EXPECT_NEAR(r.mean_squared_error, r.predicted_mse, 0.1 * r.predicted_mse) << r.id;
}

TEST(Misspecification, LargerWellSpecifiedSubsetsWin) {
  const auto results = run_misspecification_experiment(MisspecificationConfig::well_specified_default());
  ASSERT_EQ(results.size(), 3u);
  EXPECT_LT(results[0].mean_squared_error, results[1].mean_squared_error);
  EXPECT_LT(results[1].mean_squared_error, results[2].mean_squared_error);
}

TEST(Misspecification, BadSensorHurtsFusion) {
  const auto results = run_misspecification_experiment(MisspecificationConfig::misspecified_default());
  ASSERT_EQ(results[0].id, "all");
  ASSERT_EQ(results[1].id, "exclude_sensor2");
  EXPECT_GT(results[0].mean_squared_error, 1.2 * results[1].mean_squared_error);
  // The declared covariance does not see the problem.
  EXPECT_LT(results[0].predicted_mse, results[1].predicted_mse);
}

TEST(Misspecification, DeterministicCsv) {
  const auto cfg = MisspecificationConfig::misspecified_default();
  const std::string a = misspecification_csv(run_misspecification_experiment(cfg));
  EXPECT_EQ(a, misspecification_csv(run_misspecification_experiment(cfg)));
  EXPECT_EQ(a.substr(0, a.find('\n')), "subset,sensors,mean_squared_error,std_error,predicted_mse");
}

}  // namespace
}  // namespace ctxfusion

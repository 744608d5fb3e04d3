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

#ifndef CTXFUSION_ESTIMATION_HPP
#define CTXFUSION_ESTIMATION_HPP

// Batch (weighted) least-squares fusion of linear measurements x = H y + e.

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ctxfusion/errors.hpp"

namespace ctxfusion {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Relative pivot tolerance used by every solve in this module.
inline constexpr double kPivotTolerance = 1e-10;

/// One sensor: x (n_x) = H (n_x x n_y) * y + e, Cov(e) = R (n_x x n_x).
template <typename Scalar>
struct MeasurementModel {
  Matrix<Scalar> H;
  Matrix<Scalar> R;

  Eigen::Index measurement_dim() const { return H.rows(); }
  Eigen::Index state_dim() const { return H.cols(); }
};

template <typename Scalar>
struct FusedEstimate {
  Vector<Scalar> y_hat;
  Matrix<Scalar> covariance;
};

namespace detail {

template <typename Scalar>
Eigen::FullPivLU<Matrix<Scalar>> pivoted_lu(const Matrix<Scalar>& a, const char* what) {
  Eigen::FullPivLU<Matrix<Scalar>> lu(a.rows(), a.cols());
  lu.setThreshold(Scalar(kPivotTolerance));
  lu.compute(a);
  if (a.rows() == 0 || !lu.isInvertible())
    throw SingularSystemError(std::string(what) + " is singular to relative pivot tolerance");
  return lu;
}

/// Cholesky of a covariance after checking symmetry and positive definiteness
/// (smallest eigenvalue > 1e-12 * largest).
template <typename Scalar>
Eigen::LLT<Matrix<Scalar>> checked_covariance(const Matrix<Scalar>& r) {
  if (r.rows() != r.cols() || r.rows() == 0)
    throw InvalidModelError("covariance must be square and nonempty");
  if (!r.allFinite()) throw InvalidModelError("covariance has non-finite entries");
  const Scalar scale = std::max(r.cwiseAbs().maxCoeff(), Scalar(1e-300));
  if ((r - r.transpose()).cwiseAbs().maxCoeff() > Scalar(1e-9) * scale)
    throw InvalidModelError("covariance is not symmetric");
  Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> eig(r, Eigen::EigenvaluesOnly);
  const Scalar lo = eig.eigenvalues().minCoeff();
  const Scalar hi = eig.eigenvalues().maxCoeff();
  if (!(hi > 0) || !(lo > Scalar(1e-12) * hi))
    throw InvalidModelError("covariance is not positive definite");
  return Eigen::LLT<Matrix<Scalar>>(r);
}

template <typename Scalar>
void check_model(const MeasurementModel<Scalar>& m) {
  if (m.H.rows() == 0 || m.H.cols() == 0) throw InvalidInputError("empty measurement matrix");
  if (m.R.rows() != m.H.rows() || m.R.cols() != m.H.rows())
    throw InvalidInputError("R must be n_x by n_x with n_x = rows(H)");
}

}  // namespace detail

/// Ordinary least squares via the normal equations (H^T H) y = H^T x.
template <typename Scalar>
Vector<Scalar> ls_estimate(const Matrix<Scalar>& H, const Vector<Scalar>& x) {
  if (H.rows() != x.size()) throw InvalidInputError("x length must equal rows(H)");
  const Matrix<Scalar> normal = H.transpose() * H;
  return detail::pivoted_lu(normal, "H^T H").solve(H.transpose() * x);
}

/// Information-form pieces of one sensor: H^T R^-1 H and H^T R^-1 x.
template <typename Scalar>
std::pair<Matrix<Scalar>, Vector<Scalar>> information_terms(const MeasurementModel<Scalar>& m,
                                                            const Vector<Scalar>& x) {
  detail::check_model(m);
  if (x.size() != m.H.rows()) throw InvalidInputError("x length must equal rows(H)");
  const auto llt = detail::checked_covariance(m.R);
  const Matrix<Scalar> rinv_h = llt.solve(m.H);
  return {m.H.transpose() * rinv_h, rinv_h.transpose() * x};
}

/// Weighted least squares (H^T R^-1 H)^-1 H^T R^-1 x.
template <typename Scalar>
Vector<Scalar> wls_estimate(const MeasurementModel<Scalar>& m, const Vector<Scalar>& x) {
  const auto [info, rhs] = information_terms(m, x);
  return detail::pivoted_lu(info, "H^T R^-1 H").solve(rhs);
}

/// Minimum-variance batch fusion of several sensors observing the same state.
template <typename Scalar>
FusedEstimate<Scalar> batch_fuse(std::span<const MeasurementModel<Scalar>> models,
                                 std::span<const Vector<Scalar>> xs) {
  if (models.empty()) throw InvalidInputError("batch_fuse needs at least one model");
  if (models.size() != xs.size()) throw InvalidInputError("one measurement per model required");
  const Eigen::Index ny = models.front().state_dim();
  Matrix<Scalar> info = Matrix<Scalar>::Zero(ny, ny);
  Vector<Scalar> rhs = Vector<Scalar>::Zero(ny);
  for (std::size_t i = 0; i < models.size(); ++i) {
    if (models[i].state_dim() != ny) throw InvalidInputError("models disagree on n_y");
    const auto [a, b] = information_terms(models[i], xs[i]);
    info += a;
    rhs += b;
  }
  const auto lu = detail::pivoted_lu(info, "information sum");
  FusedEstimate<Scalar> out;
  out.y_hat = lu.solve(rhs);
  out.covariance = lu.inverse();
  out.covariance = (out.covariance + out.covariance.transpose()) / Scalar(2);
  return out;
}

template <typename Scalar>
FusedEstimate<Scalar> batch_fuse(const std::vector<MeasurementModel<Scalar>>& models,
                                 const std::vector<Vector<Scalar>>& xs) {
  return batch_fuse(std::span<const MeasurementModel<Scalar>>(models),
                    std::span<const Vector<Scalar>>(xs));
}

/// Row-stacks several sensors into one block model with block-diagonal R.
template <typename Scalar>
std::pair<MeasurementModel<Scalar>, Vector<Scalar>> stack_models(
    std::span<const MeasurementModel<Scalar>> models, std::span<const Vector<Scalar>> xs) {
  if (models.empty() || models.size() != xs.size())
    throw InvalidInputError("stack_models needs matching, nonempty inputs");
  Eigen::Index rows = 0;
  for (const auto& m : models) rows += m.H.rows();
  const Eigen::Index ny = models.front().state_dim();
  MeasurementModel<Scalar> out{Matrix<Scalar>::Zero(rows, ny), Matrix<Scalar>::Zero(rows, rows)};
  Vector<Scalar> x(rows);
  Eigen::Index r = 0;
  for (std::size_t i = 0; i < models.size(); ++i) {
    const auto n = models[i].H.rows();
    if (models[i].state_dim() != ny) throw InvalidInputError("models disagree on n_y");
    out.H.middleRows(r, n) = models[i].H;
    out.R.block(r, r, n, n) = models[i].R;
    x.segment(r, n) = xs[i];
    r += n;
  }
  return {std::move(out), std::move(x)};
}

template <typename Scalar>
std::pair<MeasurementModel<Scalar>, Vector<Scalar>> stack_models(
    const std::vector<MeasurementModel<Scalar>>& models, const std::vector<Vector<Scalar>>& xs) {
  return stack_models(std::span<const MeasurementModel<Scalar>>(models),
                      std::span<const Vector<Scalar>>(xs));
}

/// Draws e ~ N(0, cov) using the Cholesky factor of cov.
template <typename Scalar, typename Gen>
Vector<Scalar> sample_gaussian(const Matrix<Scalar>& cov, Gen& gen) {
  const auto llt = detail::checked_covariance(cov);
  std::normal_distribution<Scalar> normal(0, 1);
  Vector<Scalar> z(cov.rows());
  for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = normal(gen);
  return llt.matrixL() * z;
}

/// One Monte-Carlo draw: sample every sensor in `subset` with its *true* noise,
/// fuse with the *declared* R and return the squared estimation error.
template <typename Scalar, typename Gen>
Scalar misspecification_trial(const Vector<Scalar>& true_y,
                              std::span<const MeasurementModel<Scalar>> models,
                              std::span<const Matrix<Scalar>> true_noise_covs,
                              std::span<const int> subset, Gen& gen) {
  if (subset.empty()) throw InvalidInputError("subset must be nonempty");
  if (true_noise_covs.size() != models.size())
    throw InvalidInputError("one true covariance per model required");
  std::vector<MeasurementModel<Scalar>> chosen;
  std::vector<Vector<Scalar>> xs;
  for (int idx : subset) {
    if (idx < 0 || static_cast<std::size_t>(idx) >= models.size())
      throw InvalidInputError("subset index out of range");
    const auto& m = models[idx];
    if (m.state_dim() != true_y.size()) throw InvalidInputError("true_y has wrong dimension");
    chosen.push_back(m);
    xs.push_back(m.H * true_y + sample_gaussian<Scalar>(true_noise_covs[idx], gen));
  }
  const auto est = batch_fuse<Scalar>(chosen, xs);
  return (est.y_hat - true_y).squaredNorm();
}

// ---------------------------------------------------------------------------
// Misspecification experiment (double precision, config-driven)

struct SensorSpec {
  std::string name;
  MeasurementModel<double> declared;
  Matrix<double> true_covariance;
};

struct SubsetSpec {
  std::string id;
  std::vector<int> sensors;
};

struct MisspecificationConfig {
  Vector<double> true_y;
  std::vector<SensorSpec> sensors;
  std::vector<SubsetSpec> subsets;
  std::size_t trials{10000};
  std::uint64_t seed{0};

  /// Three scalar sensors all declaring R = 1, the third truly N(0, 100).
  static MisspecificationConfig misspecified_default();
  /// Same sensors with true noise equal to the declared noise.
  static MisspecificationConfig well_specified_default();
};

struct SubsetResult {
  std::string id;
  std::vector<int> sensors;
  double mean_squared_error{0};
  double std_error{0};
  /// Trace of the declared fused covariance (what the error would be if R were right).
  double predicted_mse{0};
};

/// Runs every subset on the same per-trial noise draws; trial t uses the
/// stream derived from (seed, t).
std::vector<SubsetResult> run_misspecification_experiment(const MisspecificationConfig& cfg);

std::string misspecification_csv(const std::vector<SubsetResult>& results);

}  // namespace ctxfusion

#endif  // CTXFUSION_ESTIMATION_HPP

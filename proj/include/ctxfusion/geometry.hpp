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

#ifndef CTXFUSION_GEOMETRY_HPP
#define CTXFUSION_GEOMETRY_HPP

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>

#include <Eigen/Dense>

#include "ctxfusion/errors.hpp"

namespace ctxfusion {

template <typename Scalar>
using Vector2 = Eigen::Matrix<Scalar, 2, 1>;
template <typename Scalar>
using Vector3 = Eigen::Matrix<Scalar, 3, 1>;
template <typename Scalar>
using Matrix3 = Eigen::Matrix<Scalar, 3, 3>;

/// Axis-aligned box in corner form (x1, y1) top-left, (x2, y2) bottom-right.
/// Units follow the frame the box lives in (pixels or meters).
template <typename Scalar>
struct BasicBox {
  Scalar x1{0}, y1{0}, x2{0}, y2{0};

  Scalar width() const { return x2 - x1; }
  Scalar height() const { return y2 - y1; }
  Scalar area() const { return std::max<Scalar>(width(), 0) * std::max<Scalar>(height(), 0); }
  Vector2<Scalar> center() const { return {(x1 + x2) / 2, (y1 + y2) / 2}; }

  bool valid() const {
    return std::isfinite(x1) && std::isfinite(y1) && std::isfinite(x2) &&
           std::isfinite(y2) && x1 <= x2 && y1 <= y2;
  }

  friend bool operator==(const BasicBox&, const BasicBox&) = default;
};

using BoundingBox = BasicBox<double>;

/// Intersection over union. Degenerate (zero-area) boxes give 0.
template <typename Scalar>
Scalar iou(const BasicBox<Scalar>& a, const BasicBox<Scalar>& b) {
  const Scalar area_a = a.area();
  const Scalar area_b = b.area();
  if (area_a <= 0 || area_b <= 0) return Scalar(0);
  const Scalar iw = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  const Scalar ih = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  if (iw <= 0 || ih <= 0) return Scalar(0);
  const Scalar inter = iw * ih;
  return std::clamp(inter / (area_a + area_b - inter), Scalar(0), Scalar(1));
}

/// Clips a box to [0, width] x [0, height]. The result may be empty.
template <typename Scalar>
BasicBox<Scalar> clip(const BasicBox<Scalar>& b, Scalar width, Scalar height) {
  return {std::clamp(b.x1, Scalar(0), width), std::clamp(b.y1, Scalar(0), height),
          std::clamp(b.x2, Scalar(0), width), std::clamp(b.y2, Scalar(0), height)};
}

// ---------------------------------------------------------------------------
// Sensor frames

/// Radar (BEV) image grid: gamma meters per pixel, w x h pixels.
template <typename Scalar>
struct BasicRadarGrid {
  Scalar gamma{1};
  int w{1};
  int h{1};

  void validate() const {
    if (!(gamma > 0) || w < 1 || h < 1)
      throw InvalidInputError("radar grid needs gamma > 0 and w, h >= 1");
  }
};
using RadarGrid = BasicRadarGrid<double>;

/// Rigid transform from a sensor frame into the camera frame, applied as
/// R * (p + T).
template <typename Scalar>
struct BasicExtrinsics {
  Matrix3<Scalar> rotation = Matrix3<Scalar>::Identity();
  Vector3<Scalar> translation = Vector3<Scalar>::Zero();

  void validate(Scalar tol = Scalar(1e-9)) const {
    const Matrix3<Scalar> gram = rotation.transpose() * rotation;
    if ((gram - Matrix3<Scalar>::Identity()).cwiseAbs().maxCoeff() > tol)
      throw InvalidInputError("extrinsic rotation is not orthonormal");
    if (std::abs(rotation.determinant() - Scalar(1)) > tol)
      throw InvalidInputError("extrinsic rotation must have determinant +1");
    if (!translation.allFinite()) throw InvalidInputError("non-finite translation");
  }
};
using SensorExtrinsics = BasicExtrinsics<double>;

/// Pinhole intrinsics. Camera looks along +z, u grows right, v grows down.
/// A zero image size means "twice the principal point".
template <typename Scalar>
struct BasicIntrinsics {
  Scalar fx{1}, fy{1}, cx{0}, cy{0};
  Scalar image_width{0}, image_height{0};

  Scalar width() const { return image_width > 0 ? image_width : 2 * cx; }
  Scalar height() const { return image_height > 0 ? image_height : 2 * cy; }

  Matrix3<Scalar> matrix() const {
    Matrix3<Scalar> p;
    p << fx, 0, cx, 0, fy, cy, 0, 0, 1;
    return p;
  }

  void validate() const {
    if (!(fx > 0) || !(fy > 0)) throw InvalidInputError("focal lengths must be positive");
  }
};
using CameraIntrinsics = BasicIntrinsics<double>;

/// Representative object height in meters per class label.
struct ClassHeightTable {
  std::map<int, double> heights;

  double at(int label) const {
    auto it = heights.find(label);
    if (it == heights.end())
      throw LookupError("no class height for label " + std::to_string(label));
    return it->second;
  }

  void validate() const {
    for (auto [label, h] : heights)
      if (!(h > 0)) throw InvalidInputError("class height must be positive");
  }

  static ClassHeightTable defaults();
};

/// Radar pixel (u, v) to radar Cartesian meters: gamma * ([u, -v] - [w/2, -h/2]).
template <typename Scalar>
Vector2<Scalar> radar_pixel_to_cartesian(Scalar u, Scalar v, const BasicRadarGrid<Scalar>& grid) {
  if (!(u >= 0 && u <= grid.w && v >= 0 && v <= grid.h))
    throw DomainError("radar pixel outside the grid");
  return grid.gamma * Vector2<Scalar>(u - Scalar(grid.w) / 2, -v + Scalar(grid.h) / 2);
}

/// Inverse of radar_pixel_to_cartesian (no range check).
template <typename Scalar>
Vector2<Scalar> cartesian_to_radar_pixel(Scalar x, Scalar y, const BasicRadarGrid<Scalar>& grid) {
  return {x / grid.gamma + Scalar(grid.w) / 2, Scalar(grid.h) / 2 - y / grid.gamma};
}

inline Vector3<double> lift_with_class_height(double x, double y, int label,
                                              const ClassHeightTable& table) {
  return {x, y, table.at(label)};
}

template <typename Derived>
auto to_camera_frame(const Eigen::MatrixBase<Derived>& p,
                     const BasicExtrinsics<typename Derived::Scalar>& e) {
  using Scalar = typename Derived::Scalar;
  return Vector3<Scalar>(e.rotation * (p + e.translation));
}

template <typename Derived>
auto project_to_image(const Eigen::MatrixBase<Derived>& p,
                      const BasicIntrinsics<typename Derived::Scalar>& k) {
  using Scalar = typename Derived::Scalar;
  if (!(p(2) > 0)) throw BehindCameraError("point has non-positive depth");
  const Vector3<Scalar> h = k.matrix() * p;
  return Vector2<Scalar>(h(0) / h(2), h(1) / h(2));
}

/// Radar-to-camera axis change for a radar whose x points right and y points
/// forward (z up) into a camera with x right, y down, z forward.
inline Matrix3<double> radar_to_camera_axes() {
  Matrix3<double> r;
  r << 1, 0, 0, 0, 0, -1, 0, 1, 0;
  return r;
}

/// Calibration bundle for moving BEV detections into the camera image.
struct Calibration {
  RadarGrid grid;
  SensorExtrinsics extrinsics;
  CameraIntrinsics intrinsics;
  ClassHeightTable class_heights;

  void validate() const {
    grid.validate();
    extrinsics.validate();
    intrinsics.validate();
    class_heights.validate();
  }
};

/// Lifts the four BEV corners at ground level and at class height, moves the
/// eight points into the camera frame and returns the enclosing image box
/// clipped to the image. Points behind the camera are dropped; nullopt when
/// nothing is visible.
std::optional<BoundingBox> bev_box_to_image_box(const BoundingBox& radar_box, int label,
                                                const RadarGrid& grid,
                                                const ClassHeightTable& table,
                                                const SensorExtrinsics& extrinsics,
                                                const CameraIntrinsics& intrinsics);

inline std::optional<BoundingBox> bev_box_to_image_box(const BoundingBox& radar_box, int label,
                                                       const Calibration& calib) {
  return bev_box_to_image_box(radar_box, label, calib.grid, calib.class_heights,
                              calib.extrinsics, calib.intrinsics);
}

}  // namespace ctxfusion

#endif  // CTXFUSION_GEOMETRY_HPP

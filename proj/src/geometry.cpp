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

#include "ctxfusion/geometry.hpp"

#include <array>
#include <limits>

#include "ctxfusion/detection.hpp"

namespace ctxfusion {

ClassHeightTable ClassHeightTable::defaults() {
  return ClassHeightTable{{{kCar, 1.5},
                           {kVan, 2.0},
                           {kTruck, 3.0},
                           {kBus, 3.2},
                           {kMotorbike, 1.4},
                           {kBicycle, 1.4},
                           {kPedestrian, 1.7},
                           {kGroupOfPedestrians, 1.7}}};
}

std::optional<BoundingBox> bev_box_to_image_box(const BoundingBox& radar_box, int label,
                                                const RadarGrid& grid,
                                                const ClassHeightTable& table,
                                                const SensorExtrinsics& extrinsics,
                                                const CameraIntrinsics& intrinsics) {
  const double top = table.at(label);
  const std::array<Vector2<double>, 4> corners = {
      radar_pixel_to_cartesian(radar_box.x1, radar_box.y1, grid),
      radar_pixel_to_cartesian(radar_box.x2, radar_box.y1, grid),
      radar_pixel_to_cartesian(radar_box.x1, radar_box.y2, grid),
      radar_pixel_to_cartesian(radar_box.x2, radar_box.y2, grid)};

  double u_min = std::numeric_limits<double>::infinity();
  double v_min = u_min;
  double u_max = -u_min;
  double v_max = -u_min;
  bool any_visible = false;
  for (const auto& c : corners) {
    for (double z : {0.0, top}) {
      const Vector3<double> cam = to_camera_frame(Vector3<double>(c.x(), c.y(), z), extrinsics);
      if (!(cam.z() > 0)) continue;
      const Vector2<double> px = project_to_image(cam, intrinsics);
      u_min = std::min(u_min, px.x());
      u_max = std::max(u_max, px.x());
      v_min = std::min(v_min, px.y());
      v_max = std::max(v_max, px.y());
      any_visible = true;
    }
  }
  if (!any_visible) return std::nullopt;

  const BoundingBox clipped =
      clip(BoundingBox{u_min, v_min, u_max, v_max}, intrinsics.width(), intrinsics.height());
  if (clipped.area() <= 0) return std::nullopt;
  return clipped;
}

}  // namespace ctxfusion

// Pinhole camera model and pose helpers.
#pragma once

#include <Eigen/Dense>
#include <cmath>

#include "sc3d/common.hpp"

namespace sc3d::scene {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

// Camera space: x right, y up, looking along -z. Pixel (row, col) samples
// the point (col + 0.5, row + 0.5) in image coordinates.
struct CameraModel {
  int width = 0, height = 0;
  double focal = 0.0;    // pixels
  double cx = 0.0, cy = 0.0;
  Mat3 rotation = Mat3::Identity();  // camera-to-world
  Vec3 translation = Vec3::Zero();   // camera position, meters

  void validate() const {
    require(width > 0 && height > 0, "camera: nonpositive image size");
    require(focal > 0.0, "camera: focal must be positive");
    const double ortho = (rotation * rotation.transpose() - Mat3::Identity())
                             .cwiseAbs()
                             .maxCoeff();
    require(ortho < 1e-9, "camera: rotation not orthonormal");
    require(std::abs(rotation.determinant() - 1.0) < 1e-9,
            "camera: rotation determinant must be +1");
  }

  // Unit world-space direction through a pixel center.
  Vec3 pixel_direction(int row, int col) const {
    const double u = col + 0.5, v = row + 0.5;
    Vec3 d_cam((u - cx) / focal, -(v - cy) / focal, -1.0);
    return (rotation * d_cam).normalized();
  }

  static CameraModel look_at(int width, int height, double focal,
                             const Vec3& position, const Vec3& target,
                             const Vec3& up = Vec3(0, 1, 0)) {
    CameraModel cam;
    cam.width = width;
    cam.height = height;
    cam.focal = focal;
    cam.cx = 0.5 * width;
    cam.cy = 0.5 * height;
    const Vec3 forward = (target - position).normalized();
    const Vec3 z = -forward;
    Vec3 x = up.cross(z);
    require(x.norm() > 1e-12, "look_at: up parallel to view direction");
    x.normalize();
    const Vec3 y = z.cross(x);
    cam.rotation.col(0) = x;
    cam.rotation.col(1) = y;
    cam.rotation.col(2) = z;
    cam.translation = position;
    return cam;
  }
};

}  // namespace sc3d::scene

// Planar RGB image with values in [0, 1], plus binary masks.
#pragma once

#include <Eigen/Dense>
#include <cstdint>

#include "sc3d/common.hpp"

namespace sc3d {

using Vec3 = Eigen::Vector3d;
using Plane = Eigen::ArrayXXd;  // (rows, cols) == (height, width)
using Mask2D = Eigen::Array<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>;

struct Image {
  Plane r, g, b;

  Image() = default;
  Image(int height, int width)
      : r(Plane::Zero(height, width)),
        g(Plane::Zero(height, width)),
        b(Plane::Zero(height, width)) {}

  int height() const { return static_cast<int>(r.rows()); }
  int width() const { return static_cast<int>(r.cols()); }
  bool empty() const { return r.size() == 0; }

  Vec3 pixel(int row, int col) const {
    return {r(row, col), g(row, col), b(row, col)};
  }
  void set_pixel(int row, int col, const Vec3& c) {
    r(row, col) = c.x();
    g(row, col) = c.y();
    b(row, col) = c.z();
  }

  static Image constant(int height, int width, const Vec3& c) {
    Image im(height, width);
    im.r.setConstant(c.x());
    im.g.setConstant(c.y());
    im.b.setConstant(c.z());
    return im;
  }

  Image& clamp01() {
    r = r.cwiseMax(0.0).cwiseMin(1.0);
    g = g.cwiseMax(0.0).cwiseMin(1.0);
    b = b.cwiseMax(0.0).cwiseMin(1.0);
    return *this;
  }

  // Snap every value to the 16-bit grid used by the on-disk format, so that
  // save -> load reproduces the in-memory image bit-exactly.
  Image& quantize16() {
    auto snap = [](Plane& p) {
      p = ((p.cwiseMax(0.0).cwiseMin(1.0) * 65535.0) + 0.5).floor() / 65535.0;
    };
    snap(r);
    snap(g);
    snap(b);
    return *this;
  }

  bool same_shape(const Image& o) const {
    return height() == o.height() && width() == o.width();
  }

  bool equals(const Image& o) const {
    return same_shape(o) && (r == o.r).all() && (g == o.g).all() &&
           (b == o.b).all();
  }
};

inline double mse(const Image& a, const Image& b) {
  require(a.same_shape(b), "mse: image shapes differ");
  const double n = 3.0 * a.r.size();
  return ((a.r - b.r).square().sum() + (a.g - b.g).square().sum() +
          (a.b - b.b).square().sum()) /
         n;
}

}  // namespace sc3d

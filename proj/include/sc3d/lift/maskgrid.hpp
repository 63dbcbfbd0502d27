// Soft 3D mask confidence grid over the scene bounding box.
#pragma once

#include <string>
#include <vector>

#include "sc3d/image.hpp"
#include "sc3d/nn/checkpoint.hpp"
#include "sc3d/scene/scene.hpp"

namespace sc3d::lift {

struct MaskGrid {
  int nx = 0, ny = 0, nz = 0;
  scene::Aabb bounds;
  std::vector<double> values;  // vertex-centered, clamped to [0,1]

  MaskGrid() = default;
  MaskGrid(int nx, int ny, int nz, const scene::Aabb& bounds)
      : nx(nx), ny(ny), nz(nz), bounds(bounds),
        values(static_cast<std::size_t>(nx) * ny * nz, 0.0) {
    require(nx >= 2 && ny >= 2 && nz >= 2, "mask grid: resolution too small");
  }

  std::size_t index(int i, int j, int k) const {
    return (static_cast<std::size_t>(k) * ny + j) * nx + i;
  }
  double& at(int i, int j, int k) { return values[index(i, j, k)]; }
  double at(int i, int j, int k) const { return values[index(i, j, k)]; }

  void clamp01() {
    for (auto& v : values) v = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
  }

  struct Cell {
    int i, j, k;
    double fx, fy, fz;
  };

  // Locates the cell containing p; points outside snap to the boundary.
  Cell locate(const Vec3& p) const {
    Cell c;
    auto axis = [&](double v, double lo, double hi, int n, int& idx, double& f) {
      double u = (v - lo) / (hi - lo) * (n - 1);
      u = u < 0.0 ? 0.0 : (u > n - 1 ? double(n - 1) : u);
      idx = static_cast<int>(u);
      if (idx > n - 2) idx = n - 2;
      f = u - idx;
    };
    axis(p.x(), bounds.lo.x(), bounds.hi.x(), nx, c.i, c.fx);
    axis(p.y(), bounds.lo.y(), bounds.hi.y(), ny, c.j, c.fy);
    axis(p.z(), bounds.lo.z(), bounds.hi.z(), nz, c.k, c.fz);
    return c;
  }

  double sample(const Vec3& p) const {
    const Cell c = locate(p);
    double acc = 0.0;
    for (int dz = 0; dz < 2; ++dz)
      for (int dy = 0; dy < 2; ++dy)
        for (int dx = 0; dx < 2; ++dx) {
          const double w = (dx ? c.fx : 1.0 - c.fx) *
                           (dy ? c.fy : 1.0 - c.fy) *
                           (dz ? c.fz : 1.0 - c.fz);
          acc += w * at(c.i + dx, c.j + dy, c.k + dz);
        }
    return acc;
  }

  // Accumulates g through the trilinear weights into an external buffer.
  void splat(const Vec3& p, double g, std::vector<double>& grad) const {
    const Cell c = locate(p);
    for (int dz = 0; dz < 2; ++dz)
      for (int dy = 0; dy < 2; ++dy)
        for (int dx = 0; dx < 2; ++dx) {
          const double w = (dx ? c.fx : 1.0 - c.fx) *
                           (dy ? c.fy : 1.0 - c.fy) *
                           (dz ? c.fz : 1.0 - c.fz);
          grad[index(c.i + dx, c.j + dy, c.k + dz)] += w * g;
        }
  }

  void save(const std::string& path) const {
    std::vector<float> data;
    data.reserve(values.size() + 6);
    for (int k = 0; k < 3; ++k) data.push_back(static_cast<float>(bounds.lo[k]));
    for (int k = 0; k < 3; ++k) data.push_back(static_cast<float>(bounds.hi[k]));
    for (double v : values) data.push_back(static_cast<float>(v));
    nn::save_blob(path, 0x4d475244u, {nx, ny, nz}, data);
  }

  static MaskGrid load(const std::string& path, int nx, int ny, int nz) {
    auto data = nn::load_blob(path, 0x4d475244u, {nx, ny, nz});
    require(data.size() == static_cast<std::size_t>(nx) * ny * nz + 6,
            "mask grid: payload size mismatch");
    scene::Aabb b;
    for (int k = 0; k < 3; ++k) b.lo[k] = data[k];
    for (int k = 0; k < 3; ++k) b.hi[k] = data[3 + k];
    MaskGrid g(nx, ny, nz, b);
    for (std::size_t i = 0; i < g.values.size(); ++i) g.values[i] = data[6 + i];
    return g;
  }
};

// Confidence carried by one ray: sum_i w_i * U(r(t_i)).
inline double render_mask_confidence(const MaskGrid& grid,
                                     const Eigen::VectorXd& weights,
                                     const Eigen::MatrixXd& points) {
  require(weights.size() == points.rows(),
          "render_mask_confidence: weights/points length mismatch");
  double m = 0.0;
  for (long i = 0; i < weights.size(); ++i)
    m += weights(i) * grid.sample(points.row(i).transpose());
  return m;
}

}  // namespace sc3d::lift

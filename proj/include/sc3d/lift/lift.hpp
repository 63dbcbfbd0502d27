// Lifting a single-view 2D mask into the 3D confidence grid, and masked
// multi-view extraction of the selected object.
#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "sc3d/lift/maskgrid.hpp"
#include "sc3d/lift/segment.hpp"
#include "sc3d/nerf/render.hpp"
#include "sc3d/scene/dataset.hpp"

namespace sc3d::lift {

// L = -sum_{m_sam=1} m3d + lambda * sum_{m_sam=0} m3d.
inline double mask_projection_loss(const Eigen::VectorXd& m_sam,
                                   const Eigen::VectorXd& m_3d,
                                   double lambda) {
  require(lambda >= 0.0, "mask_projection_loss: lambda must be >= 0");
  require(m_sam.size() == m_3d.size(), "mask_projection_loss: length mismatch");
  double loss = 0.0;
  for (long i = 0; i < m_sam.size(); ++i)
    loss += m_sam(i) > 0.5 ? -m_3d(i) : lambda * m_3d(i);
  return loss;
}

struct LiftOptions {
  int grid_nx = 64, grid_ny = 64, grid_nz = 64;
  int rays_per_iter = 1024;
};

// Gradient descent on the projection loss with the field frozen. The
// per-pixel weights and sample points are rendered once and reused; the
// grid is clamped to [0,1] after every step.
template <class S>
MaskGrid lift_mask_to_3d(const nerf::RadianceField<S>& field,
                         const scene::CameraModel& camera,
                         const SegMask2D& segmask,
                         const nerf::RenderConfig& cfg,
                         const scene::Aabb& bounds, int iters, double lambda,
                         double lr, std::uint64_t seed,
                         const LiftOptions& opt = LiftOptions{},
                         std::vector<double>* loss_trace = nullptr) {
  require(lambda >= 0.0, "lift_mask_to_3d: lambda must be >= 0");
  require(segmask.mask.rows() == camera.height &&
              segmask.mask.cols() == camera.width,
          "lift_mask_to_3d: mask does not match camera");
  MaskGrid grid(opt.grid_nx, opt.grid_ny, opt.grid_nz, bounds);
  if (iters <= 0) return grid;

  Eigen::MatrixXd weights, points;
  nerf::view_ray_samples(field, camera, cfg, weights, points);
  const int P = cfg.samples_per_ray;
  const long n_pix = weights.rows();

  Rng rng(seed ^ 0x11f7u);
  std::vector<double> grad(grid.values.size(), 0.0);
  for (int iter = 0; iter < iters; ++iter) {
    std::fill(grad.begin(), grad.end(), 0.0);
    double loss = 0.0;
    for (int s = 0; s < opt.rays_per_iter; ++s) {
      const long pix = static_cast<long>(rng.next_u64() % n_pix);
      const int row = static_cast<int>(pix / camera.width);
      const int col = static_cast<int>(pix % camera.width);
      const double g = segmask.mask(row, col) ? -1.0 : lambda;
      double m3d = 0.0;
      for (int i = 0; i < P; ++i) {
        const double w = weights(pix, i);
        if (w < 1e-7) continue;
        const Vec3 p = points.row(pix * P + i).transpose();
        m3d += w * grid.sample(p);
        grid.splat(p, g * w, grad);
      }
      loss += g * m3d;
    }
    if (!std::isfinite(loss))
      throw training_error("lift_mask_to_3d: loss diverged at iteration " +
                           std::to_string(iter));
    for (std::size_t i = 0; i < grid.values.size(); ++i)
      grid.values[i] -= lr * grad[i];
    grid.clamp01();
    if (loss_trace) loss_trace->push_back(loss);
  }
  return grid;
}

struct ExtractedViews {
  std::vector<Image> images;   // masked colors, black outside the object
  std::vector<Mask2D> masks;   // binarized per-view confidence
};

// Renders the grid's confidence per pixel through the field's weights,
// binarizes at threshold, and multiplies into the dataset images.
template <class S>
ExtractedViews extract_object_views(const scene::MultiViewDataset& dataset,
                                    const nerf::RadianceField<S>& field,
                                    const MaskGrid& grid,
                                    const nerf::RenderConfig& cfg,
                                    double threshold = 0.5) {
  ExtractedViews out;
  const int P = cfg.samples_per_ray;
  for (const auto& view : dataset.views) {
    Eigen::MatrixXd weights, points;
    nerf::view_ray_samples(field, view.camera, cfg, weights, points);
    const int H = view.camera.height, W = view.camera.width;
    Mask2D mask = Mask2D::Zero(H, W);
    Image masked(H, W);
    for (long pix = 0; pix < weights.rows(); ++pix) {
      double m3d = 0.0;
      for (int i = 0; i < P; ++i) {
        const double w = weights(pix, i);
        if (w < 1e-7) continue;
        m3d += w * grid.sample(points.row(pix * P + i).transpose());
      }
      const int row = static_cast<int>(pix / W), col = static_cast<int>(pix % W);
      if (m3d >= threshold) {
        mask(row, col) = 1;
        masked.set_pixel(row, col, view.image.pixel(row, col));
      }
    }
    out.images.push_back(std::move(masked));
    out.masks.push_back(std::move(mask));
  }
  return out;
}

}  // namespace sc3d::lift

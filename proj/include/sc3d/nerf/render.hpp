// Ray casting and transmittance compositing for the learned field.
#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "sc3d/image.hpp"
#include "sc3d/nerf/field.hpp"
#include "sc3d/rng.hpp"
#include "sc3d/scene/camera.hpp"

namespace sc3d::nerf {

using scene::CameraModel;

struct Ray {
  Vec3 origin = Vec3::Zero();
  Vec3 direction = Vec3::UnitZ();
  double t_near = 0.0;
  double t_far = 1e30;

  void validate() const {
    require(std::abs(direction.norm() - 1.0) < 1e-9,
            "ray: direction must be unit length");
    require(t_near >= 0.0 && t_near < t_far, "ray: need 0 <= t_near < t_far");
  }
};

struct RenderConfig {
  int samples_per_ray = 64;
  double t_near = 0.5;
  double t_far = 4.0;
  Vec3 background = Vec3(0.05, 0.05, 0.08);
  bool stratified = false;

  void validate() const {
    require(samples_per_ray >= 2, "render config: samples_per_ray must be >= 2");
    require(t_near >= 0.0 && t_near < t_far, "render config: bad t range");
  }
};

inline Ray cast_ray(const CameraModel& camera, int row, int col) {
  require(row >= 0 && row < camera.height && col >= 0 && col < camera.width,
          "cast_ray: pixel outside image bounds");
  Ray r;
  r.origin = camera.translation;
  r.direction = camera.pixel_direction(row, col);
  return r;
}

struct RaySamples {
  Vec3 color = Vec3::Zero();
  Eigen::VectorXd weights;       // P_s compositing weights
  Eigen::MatrixXd points;        // P_s x 3 sample positions
  Eigen::VectorXd ts;
};

// Plain-value compositing shared by inference and the analytic tests:
// alpha_i = 1 - exp(-sigma_i * delta), T_i = prod_{j<i} (1 - alpha_j),
// w_i = T_i * alpha_i, color = sum w_i c_i + (1 - sum w) * background.
inline Vec3 composite(const Eigen::VectorXd& density,
                      const Eigen::MatrixXd& rgb, double delta,
                      const Vec3& background, Eigen::VectorXd* weights_out) {
  const int P = static_cast<int>(density.size());
  Eigen::VectorXd w(P);
  double log_t = 0.0;  // log transmittance, exact telescoping
  Vec3 acc = Vec3::Zero();
  for (int i = 0; i < P; ++i) {
    const double od = density(i) * delta;
    const double T = std::exp(log_t);
    const double alpha = -std::expm1(-od);
    w(i) = T * alpha;
    acc += w(i) * Vec3(rgb(i, 0), rgb(i, 1), rgb(i, 2));
    log_t -= od;
  }
  acc += std::exp(log_t) * background;
  if (weights_out) *weights_out = std::move(w);
  return acc;
}

namespace detail {

inline void sample_ts(const RenderConfig& cfg, int n_rays, Rng* jitter,
                      Eigen::MatrixXd& ts) {
  const int P = cfg.samples_per_ray;
  const double delta = (cfg.t_far - cfg.t_near) / P;
  ts.resize(n_rays, P);
  for (int r = 0; r < n_rays; ++r)
    for (int i = 0; i < P; ++i) {
      const double u = (cfg.stratified && jitter) ? jitter->uniform() : 0.5;
      ts(r, i) = cfg.t_near + (i + u) * delta;
    }
}

}  // namespace detail

template <class S>
RaySamples render_ray(const RadianceField<S>& field, const Ray& ray,
                      const RenderConfig& cfg) {
  cfg.validate();
  ray.validate();
  const int P = cfg.samples_per_ray;
  const double delta = (cfg.t_far - cfg.t_near) / P;
  RaySamples out;
  out.ts.resize(P);
  out.points.resize(P, 3);
  Eigen::MatrixXd dirs(P, 3);
  for (int i = 0; i < P; ++i) {
    out.ts(i) = cfg.t_near + (i + 0.5) * delta;
    out.points.row(i) = (ray.origin + out.ts(i) * ray.direction).transpose();
    dirs.row(i) = ray.direction.transpose();
  }
  Eigen::VectorXd density;
  Eigen::MatrixXd rgb;
  field.query_raw(field.encode(out.points, dirs), density, rgb);
  for (int i = 0; i < P; ++i)
    if (!std::isfinite(density(i)) || !rgb.row(i).allFinite())
      throw numeric_error("render_ray: non-finite field output at sample " +
                          std::to_string(i));
  out.color = composite(density, rgb, delta, cfg.background, &out.weights);
  return out;
}

// Batched weights/points for every pixel of a view; feeds mask rendering.
template <class S>
void view_ray_samples(const RadianceField<S>& field, const CameraModel& camera,
                      const RenderConfig& cfg,
                      Eigen::MatrixXd& weights,   // (H*W) x P
                      Eigen::MatrixXd& points,    // (H*W*P) x 3
                      Image* image_out = nullptr) {
  cfg.validate();
  const int P = cfg.samples_per_ray;
  const int W = camera.width, H = camera.height;
  const double delta = (cfg.t_far - cfg.t_near) / P;
  weights.resize(static_cast<long>(H) * W, P);
  points.resize(static_cast<long>(H) * W * P, 3);
  if (image_out) *image_out = Image(H, W);

  Eigen::MatrixXd row_pts(static_cast<long>(W) * P, 3);
  Eigen::MatrixXd row_dirs(static_cast<long>(W) * P, 3);
  for (int row = 0; row < H; ++row) {
    for (int col = 0; col < W; ++col) {
      const Vec3 d = camera.pixel_direction(row, col);
      for (int i = 0; i < P; ++i) {
        const double t = cfg.t_near + (i + 0.5) * delta;
        row_pts.row(static_cast<long>(col) * P + i) =
            (camera.translation + t * d).transpose();
        row_dirs.row(static_cast<long>(col) * P + i) = d.transpose();
      }
    }
    Eigen::VectorXd density;
    Eigen::MatrixXd rgb;
    field.query_raw(field.encode(row_pts, row_dirs), density, rgb);
    for (int col = 0; col < W; ++col) {
      Eigen::VectorXd w;
      const Vec3 c = composite(density.segment(static_cast<long>(col) * P, P),
                               rgb.middleRows(static_cast<long>(col) * P, P),
                               delta, cfg.background, &w);
      const long pix = static_cast<long>(row) * W + col;
      weights.row(pix) = w.transpose();
      points.middleRows(pix * P, P) =
          row_pts.middleRows(static_cast<long>(col) * P, P);
      if (image_out) image_out->set_pixel(row, col, c);
    }
  }
}

template <class S>
Image render_view(const RadianceField<S>& field, const CameraModel& camera,
                  const RenderConfig& cfg) {
  Eigen::MatrixXd w, p;
  Image im;
  view_ray_samples(field, camera, cfg, w, p, &im);
  im.clamp01();
  return im;
}

}  // namespace sc3d::nerf

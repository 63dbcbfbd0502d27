// Analytic reference renderer: quadrature volume rendering of known
// densities, exact first-hit queries, and per-object ground-truth masks.
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include "sc3d/image.hpp"
#include "sc3d/scene/camera.hpp"
#include "sc3d/scene/scene.hpp"

namespace sc3d::scene {

// Entry/exit parameters of a ray against one primitive, if any, with
// t restricted to [t_min, inf).
inline std::optional<std::pair<double, double>> intersect(
    const Primitive& prim, const Vec3& origin, const Vec3& dir,
    double t_min = 1e-9) {
  double t0, t1;
  if (prim.kind == PrimitiveKind::sphere) {
    const Vec3 oc = origin - prim.center;
    const double b = oc.dot(dir);
    const double c = oc.squaredNorm() - prim.radius() * prim.radius();
    const double disc = b * b - c;
    if (disc < 0.0) return std::nullopt;
    const double s = std::sqrt(disc);
    t0 = -b - s;
    t1 = -b + s;
  } else {
    t0 = -std::numeric_limits<double>::infinity();
    t1 = std::numeric_limits<double>::infinity();
    for (int ax = 0; ax < 3; ++ax) {
      const double lo = prim.center[ax] - prim.half_extents[ax];
      const double hi = prim.center[ax] + prim.half_extents[ax];
      if (std::abs(dir[ax]) < 1e-15) {
        if (origin[ax] < lo || origin[ax] > hi) return std::nullopt;
        continue;
      }
      double a = (lo - origin[ax]) / dir[ax];
      double b = (hi - origin[ax]) / dir[ax];
      if (a > b) std::swap(a, b);
      t0 = std::max(t0, a);
      t1 = std::min(t1, b);
    }
    if (t0 > t1) return std::nullopt;
  }
  if (t1 < t_min) return std::nullopt;
  return std::make_pair(std::max(t0, t_min), t1);
}

inline std::optional<std::pair<double, double>> intersect_aabb(
    const Aabb& box, const Vec3& origin, const Vec3& dir) {
  double t0 = 0.0, t1 = std::numeric_limits<double>::infinity();
  for (int ax = 0; ax < 3; ++ax) {
    if (std::abs(dir[ax]) < 1e-15) {
      if (origin[ax] < box.lo[ax] || origin[ax] > box.hi[ax])
        return std::nullopt;
      continue;
    }
    double a = (box.lo[ax] - origin[ax]) / dir[ax];
    double b = (box.hi[ax] - origin[ax]) / dir[ax];
    if (a > b) std::swap(a, b);
    t0 = std::max(t0, a);
    t1 = std::min(t1, b);
  }
  if (t0 > t1) return std::nullopt;
  return std::make_pair(t0, t1);
}

struct Hit {
  double t = 0.0;
  int object_id = 0;
};

// Nearest geometric intersection along the ray, ignoring densities.
inline std::optional<Hit> first_hit(const SceneSpec& scene, const Vec3& origin,
                                    const Vec3& dir) {
  std::optional<Hit> best;
  for (const auto& prim : scene.primitives) {
    if (auto span = intersect(prim, origin, dir)) {
      if (!best || span->first < best->t)
        best = Hit{span->first, prim.object_id};
    }
  }
  return best;
}

// Density and emitted color at a point (primitives never overlap).
inline std::pair<double, Vec3> sample_medium(const SceneSpec& scene,
                                             const Vec3& p) {
  for (const auto& prim : scene.primitives)
    if (prim.contains(p)) return {prim.density, prim.color};
  return {0.0, Vec3::Zero()};
}

// Midpoint-rule transmittance compositing along one ray, clipped to the
// scene bounds. Background is composited with the leftover transmittance.
inline Vec3 render_ray_analytic(const SceneSpec& scene, const Vec3& origin,
                                const Vec3& dir, int samples_per_ray) {
  require(samples_per_ray >= 1, "analytic_render: samples_per_ray must be >= 1");
  const auto span = intersect_aabb(scene.bounds, origin, dir);
  if (!span) return scene.background;
  const double t0 = span->first, t1 = span->second;
  const double delta = (t1 - t0) / samples_per_ray;
  double transmittance = 1.0;
  Vec3 acc = Vec3::Zero();
  for (int i = 0; i < samples_per_ray; ++i) {
    const double t = t0 + (i + 0.5) * delta;
    const auto [sigma, color] = sample_medium(scene, origin + t * dir);
    if (sigma <= 0.0) continue;
    const double alpha = 1.0 - std::exp(-sigma * delta);
    acc += transmittance * alpha * color;
    transmittance *= 1.0 - alpha;
    if (transmittance < 1e-10) break;
  }
  return acc + transmittance * scene.background;
}

inline Image analytic_render(const SceneSpec& scene, const CameraModel& camera,
                             int samples_per_ray) {
  camera.validate();
  require(camera.translation.allFinite(), "analytic_render: camera pose not finite");
  Image im(camera.height, camera.width);
  for (int row = 0; row < camera.height; ++row)
    for (int col = 0; col < camera.width; ++col) {
      const Vec3 c = render_ray_analytic(
          scene, camera.translation, camera.pixel_direction(row, col),
          samples_per_ray);
      im.set_pixel(row, col, c);
    }
  return im;
}

// Pixel is 1 iff its ray's nearest intersection belongs to object_id.
inline Mask2D ground_truth_object_mask(const SceneSpec& scene,
                                       const CameraModel& camera,
                                       int object_id) {
  if (!scene.find(object_id))
    throw not_found_error("ground_truth_object_mask: unknown object id " +
                          std::to_string(object_id));
  Mask2D mask = Mask2D::Zero(camera.height, camera.width);
  for (int row = 0; row < camera.height; ++row)
    for (int col = 0; col < camera.width; ++col) {
      const auto hit = first_hit(scene, camera.translation,
                                 camera.pixel_direction(row, col));
      mask(row, col) = (hit && hit->object_id == object_id) ? 1 : 0;
    }
  return mask;
}

}  // namespace sc3d::scene

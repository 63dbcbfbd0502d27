// Synthetic scene description and the deterministic scene generator.
#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "sc3d/common.hpp"
#include "sc3d/image.hpp"
#include "sc3d/rng.hpp"
#include "sc3d/scene/camera.hpp"

namespace sc3d::scene {

enum class PrimitiveKind { sphere, box };

struct Primitive {
  PrimitiveKind kind = PrimitiveKind::sphere;
  Vec3 center = Vec3::Zero();
  Vec3 half_extents = Vec3::Zero();  // sphere: (radius, radius, radius)
  Vec3 color = Vec3::Zero();
  double density = 0.0;  // per meter
  int object_id = 0;
  std::string label;

  double radius() const { return half_extents.x(); }

  bool contains(const Vec3& p) const {
    if (kind == PrimitiveKind::sphere)
      return (p - center).squaredNorm() <= radius() * radius();
    return (p - center).cwiseAbs().cwiseQuotient(half_extents).maxCoeff() <= 1.0;
  }
};

struct Aabb {
  Vec3 lo = Vec3::Constant(-1.0);
  Vec3 hi = Vec3::Constant(1.0);
};

struct SceneSpec {
  std::vector<Primitive> primitives;
  Aabb bounds;
  Vec3 background = Vec3(0.05, 0.05, 0.08);

  const Primitive* find(int object_id) const {
    for (const auto& p : primitives)
      if (p.object_id == object_id) return &p;
    return nullptr;
  }

  void validate() const {
    for (const auto& p : primitives) {
      require(p.density >= 0.0, "scene: negative density");
      require((p.center - p.half_extents).cwiseMax(bounds.lo) ==
                      (p.center - p.half_extents) &&
                  (p.center + p.half_extents).cwiseMin(bounds.hi) ==
                      (p.center + p.half_extents),
              "scene: primitive outside bounding box");
    }
    for (std::size_t i = 0; i < primitives.size(); ++i)
      for (std::size_t j = i + 1; j < primitives.size(); ++j)
        require(primitives[i].object_id != primitives[j].object_id,
                "scene: duplicate object id");
  }
};

namespace detail {

struct PaletteEntry {
  Vec3 rgb;
  const char* name;
};

inline const std::vector<PaletteEntry>& palette() {
  static const std::vector<PaletteEntry> p = {
      {{0.90, 0.12, 0.10}, "red"},    {{0.10, 0.75, 0.15}, "green"},
      {{0.12, 0.25, 0.92}, "blue"},   {{0.95, 0.85, 0.10}, "yellow"},
      {{0.85, 0.15, 0.80}, "magenta"},{{0.10, 0.80, 0.85}, "cyan"},
      {{0.95, 0.55, 0.10}, "orange"}, {{0.90, 0.90, 0.90}, "white"},
  };
  return p;
}

}  // namespace detail

// Deterministic for a fixed seed; primitives never overlap. Densities are
// moderate so objects render nearly opaque while rays still deposit weight
// through the interior.
inline SceneSpec build_synthetic_scene(int seed, int n_objects) {
  require(n_objects >= 1, "build_synthetic_scene: n_objects must be >= 1");
  Rng rng(0x5ce11e00u + static_cast<std::uint64_t>(seed));
  SceneSpec scene;
  scene.bounds = Aabb{Vec3::Constant(-1.0), Vec3::Constant(1.0)};

  std::vector<int> color_ids(detail::palette().size());
  for (std::size_t i = 0; i < color_ids.size(); ++i) color_ids[i] = (int)i;
  rng.shuffle(color_ids);

  const int max_tries = 4000;
  for (int id = 0; id < n_objects; ++id) {
    Primitive prim;
    prim.object_id = id + 1;
    const auto& pal = detail::palette()[color_ids[id % color_ids.size()]];
    prim.color = pal.rgb;
    prim.kind = rng.uniform() < 0.6 ? PrimitiveKind::sphere : PrimitiveKind::box;
    prim.label = std::string(prim.kind == PrimitiveKind::sphere ? "sphere" : "box");
    prim.density = rng.uniform(4.0, 7.0);

    bool placed = false;
    for (int attempt = 0; attempt < max_tries && !placed; ++attempt) {
      const double size =
          rng.uniform(0.28, 0.42) / std::sqrt(static_cast<double>(n_objects));
      const double reach = 0.55;
      Vec3 c(rng.uniform(-reach, reach), rng.uniform(-reach, reach),
             rng.uniform(-reach, reach));
      if (prim.kind == PrimitiveKind::sphere)
        prim.half_extents = Vec3::Constant(size);
      else
        prim.half_extents = Vec3(size, size * rng.uniform(0.7, 1.3),
                                 size * rng.uniform(0.7, 1.3));
      prim.center = c;
      bool ok = (c - prim.half_extents).minCoeff() > -0.98 &&
                (c + prim.half_extents).maxCoeff() < 0.98;
      for (const auto& other : scene.primitives) {
        const double gap = (other.center - c).norm() -
                           (other.half_extents.maxCoeff() +
                            prim.half_extents.maxCoeff() + 0.08);
        if (gap < 0.0) ok = false;
      }
      placed = ok;
    }
    require(placed, "build_synthetic_scene: could not place primitive");
    scene.primitives.push_back(prim);
  }
  scene.validate();
  return scene;
}

// Forward-facing capture rig: positions on a spherical cap around the +z
// axis at the given distance, all looking at the scene center.
inline std::vector<CameraModel> make_camera_rig(int n_views, int width,
                                                int height, double focal,
                                                double distance = 2.1,
                                                double az_span_deg = 50.0,
                                                double el_span_deg = 28.0) {
  require(n_views >= 2, "make_camera_rig: need at least 2 views");
  std::vector<CameraModel> cams;
  cams.reserve(n_views);
  const double golden = 2.39996322972865332;
  for (int i = 0; i < n_views; ++i) {
    const double u = n_views == 1 ? 0.5 : double(i) / double(n_views - 1);
    const double az = (u - 0.5) * az_span_deg * M_PI / 180.0;
    const double el =
        std::sin(i * golden) * 0.5 * el_span_deg * M_PI / 180.0;
    Vec3 pos(distance * std::sin(az) * std::cos(el),
             distance * std::sin(el),
             distance * std::cos(az) * std::cos(el));
    cams.push_back(
        CameraModel::look_at(width, height, focal, pos, Vec3::Zero()));
  }
  return cams;
}

}  // namespace sc3d::scene

#include <catch2/catch_amalgamated.hpp>
#include <filesystem>
#include <fstream>

#include "sc3d/scene/analytic.hpp"
#include "sc3d/scene/dataset.hpp"
#include "sc3d/scene/scene.hpp"

using namespace sc3d;
using namespace sc3d::scene;

namespace {

// Exact piecewise-constant compositing along one ray: every primitive
// contributes a disjoint [entry, exit) interval, so the transmittance
// integral has a closed form. Independent of the quadrature renderer.
Vec3 exact_ray_color(const SceneSpec& scene, const Vec3& origin,
                     const Vec3& dir) {
  struct Seg {
    double a, b, sigma;
    Vec3 color;
  };
  std::vector<Seg> segs;
  for (const auto& prim : scene.primitives)
    if (auto span = intersect(prim, origin, dir))
      segs.push_back({span->first, span->second, prim.density, prim.color});
  std::sort(segs.begin(), segs.end(),
            [](const Seg& x, const Seg& y) { return x.a < y.a; });
  double T = 1.0;
  Vec3 acc = Vec3::Zero();
  for (const auto& s : segs) {
    const double T_out = T * std::exp(-s.sigma * (s.b - s.a));
    acc += s.color * (T - T_out);
    T = T_out;
  }
  return acc + T * scene.background;
}

SceneSpec one_sphere_scene(double density, const Vec3& color, double radius = 0.4) {
  SceneSpec s;
  Primitive p;
  p.kind = PrimitiveKind::sphere;
  p.center = Vec3::Zero();
  p.half_extents = Vec3::Constant(radius);
  p.color = color;
  p.density = density;
  p.object_id = 1;
  p.label = "sphere";
  s.primitives.push_back(p);
  return s;
}

CameraModel front_camera(int size = 33, double dist = 2.0) {
  return CameraModel::look_at(size, size, 0.9 * size, Vec3(0, 0, dist),
                              Vec3::Zero());
}

}  // namespace

TEST_CASE("scene generator is deterministic and collision free", "[scene]") {
  auto a = build_synthetic_scene(0, 3);
  auto b = build_synthetic_scene(0, 3);
  REQUIRE(a.primitives.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    REQUIRE(a.primitives[i].center == b.primitives[i].center);
    REQUIRE(a.primitives[i].density == b.primitives[i].density);
  }
  auto c = build_synthetic_scene(1, 3);
  bool any_diff = false;
  for (std::size_t i = 0; i < 3; ++i)
    if (a.primitives[i].center != c.primitives[i].center) any_diff = true;
  REQUIRE(any_diff);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = i + 1; j < 3; ++j) {
      const auto& p = a.primitives[i];
      const auto& q = a.primitives[j];
      REQUIRE((p.center - q.center).norm() >
              p.half_extents.maxCoeff() + q.half_extents.maxCoeff());
    }
  REQUIRE_THROWS_AS(build_synthetic_scene(0, 0), std::invalid_argument);
}

TEST_CASE("analytic render: zero density gives background", "[scene]") {
  auto scene = one_sphere_scene(0.0, Vec3(1, 0, 0));
  auto im = analytic_render(scene, front_camera(), 64);
  for (int r = 0; r < im.height(); ++r)
    for (int c = 0; c < im.width(); ++c)
      REQUIRE((im.pixel(r, c) - scene.background).norm() < 1e-12);
}

TEST_CASE("analytic render: opaque sphere center pixel", "[scene]") {
  auto scene = one_sphere_scene(1e6, Vec3(1, 0, 0));
  auto cam = front_camera(33);
  auto im = analytic_render(scene, cam, 256);
  // center pixel looks straight down the optical axis at the sphere
  const Vec3 center = im.pixel(16, 16);
  REQUIRE((center - Vec3(1, 0, 0)).norm() < 1e-3);
  // cross-check against the exact intersection oracle
  const Vec3 oracle = exact_ray_color(scene, cam.translation,
                                      cam.pixel_direction(16, 16));
  REQUIRE((oracle - Vec3(1, 0, 0)).norm() < 1e-12);
}

TEST_CASE("analytic render: occluding box hides the sphere", "[scene]") {
  SceneSpec scene = one_sphere_scene(1e6, Vec3(1, 0, 0), 0.3);
  Primitive box;
  box.kind = PrimitiveKind::box;
  box.center = Vec3(0, 0, 0.7);
  box.half_extents = Vec3(0.25, 0.25, 0.1);
  box.color = Vec3(0, 1, 0);
  box.density = 1e6;
  box.object_id = 2;
  scene.primitives.push_back(box);
  auto cam = front_camera(33);
  auto im = analytic_render(scene, cam, 512);
  REQUIRE((im.pixel(16, 16) - Vec3(0, 1, 0)).norm() < 1e-3);
  // and the occluded object's mask is empty where the box covers it
  auto sphere_mask = ground_truth_object_mask(scene, cam, 1);
  auto box_mask = ground_truth_object_mask(scene, cam, 2);
  REQUIRE((sphere_mask.cast<int>() * box_mask.cast<int>()).sum() == 0);
}

TEST_CASE("quadrature matches the exact compositing oracle", "[scene]") {
  auto scene = build_synthetic_scene(7, 3);
  auto cam = front_camera(17, 2.1);
  auto im = analytic_render(scene, cam, 2048);
  for (int r = 0; r < 17; r += 4)
    for (int c = 0; c < 17; c += 4) {
      const Vec3 oracle =
          exact_ray_color(scene, cam.translation, cam.pixel_direction(r, c));
      REQUIRE((im.pixel(r, c) - oracle).norm() < 2e-3);
    }
}

TEST_CASE("render is monotone in density toward the object color", "[scene]") {
  auto cam = front_camera(33);
  double prev_gap = 1e9;
  for (double density : {0.5, 1.0, 2.0, 4.0, 8.0, 16.0}) {
    auto scene = one_sphere_scene(density, Vec3(1, 0, 0));
    auto im = analytic_render(scene, cam, 256);
    const double gap = (im.pixel(16, 16) - Vec3(1, 0, 0)).norm();
    REQUIRE(gap < prev_gap + 1e-12);
    prev_gap = gap;
  }
}

TEST_CASE("object mask area matches the projected disk", "[scene]") {
  auto scene = one_sphere_scene(5.0, Vec3(0, 0, 1), 0.5);
  auto cam = front_camera(129, 2.0);
  auto mask = ground_truth_object_mask(scene, cam, 1);
  const double area = mask.cast<double>().sum();
  // pinhole projection of a sphere: apparent half-angle asin(r/d)
  const double half_angle = std::asin(0.5 / 2.0);
  const double pixel_radius = cam.focal * std::tan(half_angle);
  const double expected = M_PI * pixel_radius * pixel_radius;
  REQUIRE(std::abs(area - expected) / expected < 0.02);
  REQUIRE_THROWS_AS(ground_truth_object_mask(scene, cam, 99), not_found_error);
}

TEST_CASE("mask/render consistency under color changes", "[scene]") {
  auto scene = one_sphere_scene(1e5, Vec3(1, 0, 0));
  auto cam = front_camera(33);
  auto mask = ground_truth_object_mask(scene, cam, 1);
  auto before = analytic_render(scene, cam, 128);
  scene.primitives[0].color = Vec3(0, 1, 1);
  auto after = analytic_render(scene, cam, 128);
  for (int r = 0; r < 33; ++r)
    for (int c = 0; c < 33; ++c) {
      const double change = (before.pixel(r, c) - after.pixel(r, c)).norm();
      if (mask(r, c))
        REQUIRE(change > 1e-4);
      else
        REQUIRE(change < 1e-9);
    }
}

TEST_CASE("dataset directory round trip is exact", "[scene]") {
  auto scene = build_synthetic_scene(3, 2);
  auto cams = make_camera_rig(4, 16, 16, 20.0);
  auto ds = render_dataset(scene, cams, 32, true);
  const auto dir = std::filesystem::temp_directory_path() / "sc3d_ds_test";
  std::filesystem::remove_all(dir);
  save_dataset(ds, dir.string());
  auto loaded = load_dataset(dir.string());
  REQUIRE(loaded.views.size() == ds.views.size());
  for (std::size_t i = 0; i < ds.views.size(); ++i) {
    REQUIRE(loaded.views[i].image.equals(ds.views[i].image));
    REQUIRE((loaded.views[i].camera.rotation - ds.views[i].camera.rotation)
                .cwiseAbs()
                .maxCoeff() < 1e-12);
    REQUIRE((loaded.views[i].camera.translation - ds.views[i].camera.translation)
                .cwiseAbs()
                .maxCoeff() < 1e-12);
  }
  REQUIRE(loaded.masks.size() == ds.masks.size());
  for (const auto& [id, ms] : ds.masks)
    for (std::size_t i = 0; i < ms.size(); ++i)
      REQUIRE((loaded.masks.at(id)[i] == ms[i]).all());

  SECTION("missing poses file is a format error") {
    std::filesystem::remove(dir / "cameras.json");
    REQUIRE_THROWS_AS(load_dataset(dir.string()), format_error);
  }
  SECTION("mixed image sizes are a format error") {
    Image odd(8, 8);
    write_png16((dir / "view_0001.png").string(), odd);
    REQUIRE_THROWS_AS(load_dataset(dir.string()), format_error);
  }
}

TEST_CASE("scene json round trip", "[scene]") {
  auto scene = build_synthetic_scene(11, 3);
  const auto path =
      (std::filesystem::temp_directory_path() / "sc3d_scene.json").string();
  save_scene(scene, path);
  auto loaded = load_scene(path);
  REQUIRE(loaded.primitives.size() == scene.primitives.size());
  for (std::size_t i = 0; i < scene.primitives.size(); ++i) {
    REQUIRE((loaded.primitives[i].center - scene.primitives[i].center).norm() <
            1e-12);
    REQUIRE(loaded.primitives[i].label == scene.primitives[i].label);
  }
}

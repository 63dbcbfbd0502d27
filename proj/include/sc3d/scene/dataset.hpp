// Multi-view dataset container and its on-disk directory format:
// view_####.png (16-bit RGB) + cameras.json + optional per-object masks.
#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "sc3d/common.hpp"
#include "sc3d/scene/analytic.hpp"
#include "sc3d/scene/camera.hpp"
#include "sc3d/scene/image_io.hpp"
#include "sc3d/scene/scene.hpp"

namespace sc3d::scene {

struct View {
  Image image;
  CameraModel camera;
};

struct MultiViewDataset {
  std::vector<View> views;
  // Ground-truth masks per object id, one mask per view.
  std::map<int, std::vector<Mask2D>> masks;

  void validate() const {
    require(views.size() >= 2, "dataset: need at least 2 views");
    for (const auto& v : views)
      require(v.image.same_shape(views.front().image),
              "dataset: mixed image sizes");
    for (const auto& [id, ms] : masks)
      require(ms.size() == views.size(), "dataset: mask count mismatch");
  }

  int width() const { return views.front().image.width(); }
  int height() const { return views.front().image.height(); }
};

namespace detail {

inline std::string view_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "view_%04zu.png", i);
  return buf;
}

inline std::string mask_name(std::size_t i, int object_id) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "mask_%04zu_obj%03d.png", i, object_id);
  return buf;
}

}  // namespace detail

inline void save_dataset(const MultiViewDataset& ds, const std::string& dir) {
  namespace fs = std::filesystem;
  ds.validate();
  fs::create_directories(dir);
  nlohmann::json meta;
  meta["views"] = nlohmann::json::array();
  for (std::size_t i = 0; i < ds.views.size(); ++i) {
    const auto& v = ds.views[i];
    const std::string name = detail::view_name(i);
    write_png16(dir + "/" + name, v.image);
    std::vector<double> c2w(12);
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) c2w[4 * r + c] = v.camera.rotation(r, c);
      c2w[4 * r + 3] = v.camera.translation(r);
    }
    meta["views"].push_back({{"image", name},
                             {"width", v.camera.width},
                             {"height", v.camera.height},
                             {"focal", v.camera.focal},
                             {"cx", v.camera.cx},
                             {"cy", v.camera.cy},
                             {"c2w", c2w}});
  }
  for (const auto& [id, ms] : ds.masks) {
    auto& list = meta["masks"][std::to_string(id)];
    for (std::size_t i = 0; i < ms.size(); ++i) {
      const std::string name = detail::mask_name(i, id);
      write_png_mask(dir + "/" + name, ms[i]);
      list.push_back(name);
    }
  }
  std::ofstream out(dir + "/cameras.json");
  if (!out) throw format_error("cannot write " + dir + "/cameras.json");
  out << meta.dump(2) << "\n";
}

inline MultiViewDataset load_dataset(const std::string& dir) {
  namespace fs = std::filesystem;
  const std::string meta_path = dir + "/cameras.json";
  std::ifstream in(meta_path);
  if (!in) throw format_error("missing poses file: " + meta_path);
  nlohmann::json meta;
  try {
    in >> meta;
  } catch (const std::exception& e) {
    throw format_error("malformed json in " + meta_path + ": " + e.what());
  }
  MultiViewDataset ds;
  if (!meta.contains("views") || !meta["views"].is_array())
    throw format_error("no views array in " + meta_path);
  for (const auto& jv : meta["views"]) {
    View v;
    const std::string name = jv.at("image").get<std::string>();
    const std::string path = dir + "/" + name;
    if (!fs::exists(path)) throw format_error("missing image file: " + path);
    v.image = read_png16(path);
    v.camera.width = jv.at("width").get<int>();
    v.camera.height = jv.at("height").get<int>();
    v.camera.focal = jv.at("focal").get<double>();
    v.camera.cx = jv.value("cx", 0.5 * v.camera.width);
    v.camera.cy = jv.value("cy", 0.5 * v.camera.height);
    const auto c2w = jv.at("c2w").get<std::vector<double>>();
    if (c2w.size() != 12)
      throw format_error("bad c2w length in " + meta_path + " for " + name);
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) v.camera.rotation(r, c) = c2w[4 * r + c];
      v.camera.translation(r) = c2w[4 * r + 3];
    }
    if (v.image.width() != v.camera.width || v.image.height() != v.camera.height)
      throw format_error("image size disagrees with metadata: " + path);
    if (!ds.views.empty() && !v.image.same_shape(ds.views.front().image))
      throw format_error("mixed image sizes: " + path);
    ds.views.push_back(std::move(v));
  }
  if (meta.contains("masks")) {
    for (const auto& [key, list] : meta["masks"].items()) {
      const int id = std::stoi(key);
      for (const auto& jname : list) {
        const std::string path = dir + "/" + jname.get<std::string>();
        if (!fs::exists(path)) throw format_error("missing mask file: " + path);
        ds.masks[id].push_back(read_png_mask(path));
      }
    }
  }
  ds.validate();
  return ds;
}

// Renders a dataset from a synthetic scene; images are snapped to the
// 16-bit grid so the directory round-trip is exact.
inline MultiViewDataset render_dataset(const SceneSpec& scene,
                                       const std::vector<CameraModel>& cameras,
                                       int samples_per_ray,
                                       bool with_masks = true) {
  MultiViewDataset ds;
  for (const auto& cam : cameras) {
    View v;
    v.camera = cam;
    v.image = analytic_render(scene, cam, samples_per_ray);
    v.image.quantize16();
    ds.views.push_back(std::move(v));
  }
  if (with_masks)
    for (const auto& prim : scene.primitives) {
      auto& ms = ds.masks[prim.object_id];
      for (const auto& cam : cameras)
        ms.push_back(ground_truth_object_mask(scene, cam, prim.object_id));
    }
  ds.validate();
  return ds;
}

// ---- scene spec (de)serialization ------------------------------------------

inline nlohmann::json scene_to_json(const SceneSpec& scene) {
  nlohmann::json j;
  j["background"] = {scene.background.x(), scene.background.y(),
                     scene.background.z()};
  j["bounds"] = {{"lo", {scene.bounds.lo.x(), scene.bounds.lo.y(),
                         scene.bounds.lo.z()}},
                 {"hi", {scene.bounds.hi.x(), scene.bounds.hi.y(),
                         scene.bounds.hi.z()}}};
  for (const auto& p : scene.primitives) {
    j["primitives"].push_back(
        {{"kind", p.kind == PrimitiveKind::sphere ? "sphere" : "box"},
         {"center", {p.center.x(), p.center.y(), p.center.z()}},
         {"half_extents",
          {p.half_extents.x(), p.half_extents.y(), p.half_extents.z()}},
         {"color", {p.color.x(), p.color.y(), p.color.z()}},
         {"density", p.density},
         {"object_id", p.object_id},
         {"label", p.label}});
  }
  return j;
}

inline SceneSpec scene_from_json(const nlohmann::json& j) {
  SceneSpec scene;
  auto vec3 = [](const nlohmann::json& a) {
    return Vec3(a.at(0).get<double>(), a.at(1).get<double>(),
                a.at(2).get<double>());
  };
  scene.background = vec3(j.at("background"));
  scene.bounds.lo = vec3(j.at("bounds").at("lo"));
  scene.bounds.hi = vec3(j.at("bounds").at("hi"));
  if (j.contains("primitives"))
    for (const auto& jp : j["primitives"]) {
      Primitive p;
      p.kind = jp.at("kind").get<std::string>() == "sphere"
                   ? PrimitiveKind::sphere
                   : PrimitiveKind::box;
      p.center = vec3(jp.at("center"));
      p.half_extents = vec3(jp.at("half_extents"));
      p.color = vec3(jp.at("color"));
      p.density = jp.at("density").get<double>();
      p.object_id = jp.at("object_id").get<int>();
      p.label = jp.value("label", std::string());
      scene.primitives.push_back(p);
    }
  scene.validate();
  return scene;
}

inline void save_scene(const SceneSpec& scene, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw format_error("cannot write " + path);
  out << scene_to_json(scene).dump(2) << "\n";
}

inline SceneSpec load_scene(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw format_error("missing scene file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw format_error("malformed json in " + path + ": " + e.what());
  }
  return scene_from_json(j);
}

}  // namespace sc3d::scene

// Deterministic stand-ins for the captioner and text embedder: a template
// caption from visible scene objects, and a hashed bag-of-words embedding.
#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <sstream>
#include <string>
#include <vector>

#include "sc3d/image.hpp"
#include "sc3d/metrics/metrics.hpp"
#include "sc3d/scene/scene.hpp"

namespace sc3d::metrics {

inline std::string color_name(const Vec3& rgb) {
  const auto& pal = scene::detail::palette();
  double best = 1e9;
  const char* name = "gray";
  for (const auto& entry : pal) {
    const double d = (entry.rgb - rgb).norm();
    if (d < best) {
      best = d;
      name = entry.name;
    }
  }
  return name;
}

// Caption from the objects actually visible in the image: an object is
// mentioned when enough pixels sit near its color. Mentions are ordered by
// pixel count, so the caption is a pure function of the image content.
inline std::string caption_stub(const Image& image,
                                const scene::SceneSpec& scene_truth,
                                double color_tol = 0.25,
                                double min_fraction = 0.002) {
  struct Mention {
    long count;
    std::string text;
    int id;
  };
  std::vector<Mention> mentions;
  const long total = static_cast<long>(image.r.size());
  for (const auto& prim : scene_truth.primitives) {
    long count = 0;
    for (int r = 0; r < image.height(); ++r)
      for (int c = 0; c < image.width(); ++c)
        if ((image.pixel(r, c) - prim.color).norm() <= color_tol) ++count;
    if (count >= static_cast<long>(min_fraction * total))
      mentions.push_back(
          {count, color_name(prim.color) + " " +
                      (prim.label.empty() ? "object" : prim.label),
           prim.object_id});
  }
  std::sort(mentions.begin(), mentions.end(), [](const Mention& a, const Mention& b) {
    return a.count != b.count ? a.count > b.count : a.id < b.id;
  });
  if (mentions.empty()) return "an empty scene";
  std::string caption = "a scene with a " + mentions[0].text;
  for (std::size_t i = 1; i < mentions.size(); ++i)
    caption += " and a " + mentions[i].text;
  return caption;
}

inline std::vector<std::string> tokenize(const std::string& text) {
  std::istringstream in(text);
  std::vector<std::string> tokens;
  std::string tok;
  while (in >> tok) tokens.push_back(tok);
  return tokens;
}

// Order-invariant hashed bag-of-words embedding, unit normalized.
inline Eigen::VectorXd embed_stub(const std::string& text, int dims = 64) {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(dims);
  for (const auto& tok : tokenize(text))
    v(static_cast<int>(fnv1a(tok) % static_cast<std::uint64_t>(dims))) += 1.0;
  const double n = v.norm();
  return n > 0.0 ? Eigen::VectorXd(v / n) : v;
}

}  // namespace sc3d::metrics

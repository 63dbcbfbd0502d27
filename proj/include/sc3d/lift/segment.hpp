// Prompt-driven 2D segmentation: pluggable interface plus the deterministic
// region-growing reference segmenter used in tests and the CLI.
#pragma once

#include <deque>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "sc3d/common.hpp"
#include "sc3d/image.hpp"

namespace sc3d::lift {

struct Prompt {
  enum class Kind { points, text };
  Kind kind = Kind::points;
  std::vector<std::pair<int, int>> points;  // (row, col)
  std::string text;
  std::string label;  // label the segmenter should report

  void validate(int height, int width) const {
    if (kind == Kind::points) {
      require(!points.empty(), "prompt: needs at least one point");
      for (auto [r, c] : points)
        require(r >= 0 && r < height && c >= 0 && c < width,
                "prompt: point outside image");
    } else {
      require(!text.empty(), "prompt: empty text");
    }
  }
};

struct SegMask2D {
  Mask2D mask;
  double iou_score = 1.0;
  std::string label;
};

inline double mask_iou(const Mask2D& a, const Mask2D& b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(),
          "mask_iou: shape mismatch");
  long inter = 0, uni = 0;
  for (long i = 0; i < a.size(); ++i) {
    const bool x = a.data()[i] != 0, y = b.data()[i] != 0;
    inter += x && y;
    uni += x || y;
  }
  return uni == 0 ? 1.0 : double(inter) / double(uni);
}

class Segmenter {
 public:
  virtual ~Segmenter() = default;
  virtual SegMask2D segment(const Image& image, const Prompt& prompt) const = 0;
};

// Flood fill from each prompt point over 4-connected pixels whose color is
// within `tau` (Euclidean RGB) of that point's color. If a reference mask
// is supplied the reported score is the IoU against it, else 1.0.
class RegionGrowingSegmenter final : public Segmenter {
 public:
  explicit RegionGrowingSegmenter(double tau = 0.1,
                                  const Mask2D* reference = nullptr)
      : tau_(tau), reference_(reference) {}

  SegMask2D segment(const Image& image, const Prompt& prompt) const override {
    prompt.validate(image.height(), image.width());
    require(prompt.kind == Prompt::Kind::points,
            "region growing segmenter needs point prompts");
    const int H = image.height(), W = image.width();
    SegMask2D out;
    out.mask = Mask2D::Zero(H, W);
    out.label = prompt.label;
    for (auto [sr, sc] : prompt.points) {
      const Vec3 seed = image.pixel(sr, sc);
      if (out.mask(sr, sc)) continue;
      std::deque<std::pair<int, int>> queue{{sr, sc}};
      out.mask(sr, sc) = 1;
      while (!queue.empty()) {
        auto [r, c] = queue.front();
        queue.pop_front();
        constexpr int dr[] = {-1, 1, 0, 0}, dc[] = {0, 0, -1, 1};
        for (int k = 0; k < 4; ++k) {
          const int nr = r + dr[k], nc = c + dc[k];
          if (nr < 0 || nr >= H || nc < 0 || nc >= W || out.mask(nr, nc))
            continue;
          if ((image.pixel(nr, nc) - seed).norm() <= tau_) {
            out.mask(nr, nc) = 1;
            queue.push_back({nr, nc});
          }
        }
      }
    }
    if (reference_) out.iou_score = mask_iou(out.mask, *reference_);
    return out;
  }

 private:
  double tau_;
  const Mask2D* reference_;
};

inline SegMask2D segment_with_prompt(const Image& image, const Prompt& prompt,
                                     const Segmenter& segmenter) {
  return segmenter.segment(image, prompt);
}

// Text prompts resolve to a seed pixel through a configured lookup table.
inline std::pair<int, int> text_to_point(
    const std::string& text,
    const std::map<std::string, std::pair<int, int>>& lookup) {
  require(!text.empty(), "text_to_point: empty text");
  auto it = lookup.find(text);
  if (it == lookup.end())
    throw not_found_error("text_to_point: no entry for \"" + text + "\"");
  return it->second;
}

}  // namespace sc3d::lift

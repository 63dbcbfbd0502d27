// Pixel-level and semantic-level evaluation metrics.
#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <cstdio>
#include <map>
#include <string>
#include <vector>

#include "sc3d/common.hpp"
#include "sc3d/image.hpp"

namespace sc3d::metrics {

// 10 log10(max^2 / mse); identical inputs return +inf.
inline double psnr_from_mse(double mse_value, double max_val) {
  require(max_val > 0.0, "psnr: max_val must be positive");
  require(mse_value >= 0.0, "psnr: negative mse");
  if (mse_value == 0.0) return kInf;
  return 10.0 * std::log10(max_val * max_val / mse_value);
}

inline double psnr(const Plane& a, const Plane& b, double max_val = 1.0) {
  require(a.rows() == b.rows() && a.cols() == b.cols(),
          "psnr: shape mismatch");
  return psnr_from_mse((a - b).square().mean(), max_val);
}

inline double psnr(const Image& a, const Image& b, double max_val = 1.0) {
  return psnr_from_mse(mse(a, b), max_val);
}

// Mean of the standard SSIM formula over non-overlapping window x window
// tiles (population statistics per tile).
inline double ssim(const Plane& a, const Plane& b, int window = 8,
                   double c1 = 1e-4, double c2 = 9e-4) {
  require(a.rows() == b.rows() && a.cols() == b.cols(),
          "ssim: shape mismatch");
  require(window >= 1 && window <= a.rows() && window <= a.cols(),
          "ssim: window larger than image");
  const int ny = static_cast<int>(a.rows()) / window;
  const int nx = static_cast<int>(a.cols()) / window;
  double acc = 0.0;
  for (int ty = 0; ty < ny; ++ty)
    for (int tx = 0; tx < nx; ++tx) {
      auto pa = a.block(ty * window, tx * window, window, window);
      auto pb = b.block(ty * window, tx * window, window, window);
      const double ma = pa.mean(), mb = pb.mean();
      const double va = (pa - ma).square().mean();
      const double vb = (pb - mb).square().mean();
      const double cov = ((pa - ma) * (pb - mb)).mean();
      acc += (2 * ma * mb + c1) * (2 * cov + c2) /
             ((ma * ma + mb * mb + c1) * (va + vb + c2));
    }
  return acc / (ny * nx);
}

inline double ssim(const Image& a, const Image& b, int window = 8,
                   double c1 = 1e-4, double c2 = 9e-4) {
  return (ssim(a.r, b.r, window, c1, c2) + ssim(a.g, b.g, window, c1, c2) +
          ssim(a.b, b.b, window, c1, c2)) /
         3.0;
}

// 10 log10(mean|H - Hhat|^2 / Var(H)); exact estimates return -inf.
inline double nmse_db(const Eigen::MatrixXcd& h, const Eigen::MatrixXcd& h_hat) {
  require(h.rows() == h_hat.rows() && h.cols() == h_hat.cols(),
          "nmse: shape mismatch");
  const std::complex<double> mean = h.mean();
  const double var = (h.array() - mean).abs2().mean();
  require(var > 0.0, "nmse: channel has zero variance");
  const double err = (h - h_hat).array().abs2().mean();
  if (err == 0.0) return -kInf;
  return 10.0 * std::log10(err / var);
}

// Geometric mean of clipped n-gram precisions times the brevity penalty.
// With smoothing enabled, zero match counts become (0+1)/(total+1).
inline double bleu(const std::vector<std::string>& reference,
                   const std::vector<std::string>& hypothesis, int max_n = 4,
                   bool smoothing = true) {
  require(max_n >= 1, "bleu: max_n must be >= 1");
  if (hypothesis.empty()) {
    std::fprintf(stderr, "[metrics] bleu: empty hypothesis, returning 0\n");
    return 0.0;
  }
  double log_acc = 0.0;
  for (int n = 1; n <= max_n; ++n) {
    if (static_cast<int>(hypothesis.size()) < n ||
        static_cast<int>(reference.size()) < n) {
      if (!smoothing) return 0.0;
      log_acc += std::log(1.0 / (std::max<std::size_t>(
                                     1, hypothesis.size() >= std::size_t(n)
                                            ? hypothesis.size() - n + 1
                                            : 0) +
                                 1.0));
      continue;
    }
    std::map<std::vector<std::string>, int> ref_counts;
    for (std::size_t i = 0; i + n <= reference.size(); ++i)
      ++ref_counts[{reference.begin() + i, reference.begin() + i + n}];
    int matched = 0;
    const int total = static_cast<int>(hypothesis.size()) - n + 1;
    std::map<std::vector<std::string>, int> used;
    for (std::size_t i = 0; i + n <= hypothesis.size(); ++i) {
      std::vector<std::string> gram(hypothesis.begin() + i,
                                    hypothesis.begin() + i + n);
      auto it = ref_counts.find(gram);
      if (it != ref_counts.end() && used[gram] < it->second) {
        ++used[gram];
        ++matched;
      }
    }
    if (matched == 0) {
      if (!smoothing) return 0.0;
      log_acc += std::log(1.0 / (total + 1.0));
    } else {
      log_acc += std::log(double(matched) / total);
    }
  }
  const double ratio = double(hypothesis.size()) / double(reference.size());
  const double brevity = ratio >= 1.0 ? 1.0 : std::exp(1.0 - 1.0 / ratio);
  return brevity * std::exp(log_acc / max_n);
}

inline double cosine_sim(const Eigen::VectorXd& u, const Eigen::VectorXd& v) {
  require(u.size() == v.size(), "cosine_sim: length mismatch");
  const double nu = u.norm(), nv = v.norm();
  require(nu > 0.0 && nv > 0.0, "cosine_sim: zero vector");
  return u.dot(v) / (nu * nv);
}

struct MetricReport {
  double psnr_db = 0.0;
  double ssim = 0.0;
  double nmse_db = 0.0;
  double bleu = 0.0;
  double cosine = 0.0;
  double snr_db = 0.0;
  std::uint64_t seed = 0;
  int views = 0;

  static std::string csv_header() {
    return "psnr_db,ssim,nmse_db,bleu,cosine,snr_db,seed,views";
  }
  std::string csv_row() const;
};

inline std::string format_metric(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

inline std::string MetricReport::csv_row() const {
  std::string s;
  s += format_metric(psnr_db) + "," + format_metric(ssim) + "," +
       format_metric(nmse_db) + "," + format_metric(bleu) + "," +
       format_metric(cosine) + "," + format_metric(snr_db) + "," +
       std::to_string(seed) + "," + std::to_string(views);
  return s;
}

}  // namespace sc3d::metrics

// Pilot blocks, pilot observations, and the two-plane CSI image type.
#pragma once

#include <Eigen/Dense>
#include <vector>

#include "sc3d/channel/channel.hpp"
#include "sc3d/common.hpp"
#include "sc3d/rng.hpp"

namespace sc3d::csi {

using channel::CMat;
using channel::Cplx;

// Real/imaginary plane pair; lossless round trip to the complex grid.
struct CsiImage {
  Eigen::ArrayXXd re, im;

  CsiImage() = default;
  CsiImage(int rows, int cols)
      : re(Eigen::ArrayXXd::Zero(rows, cols)),
        im(Eigen::ArrayXXd::Zero(rows, cols)) {}

  static CsiImage from_complex(const CMat& h) {
    CsiImage c;
    c.re = h.real().array();
    c.im = h.imag().array();
    return c;
  }
  CMat to_complex() const {
    CMat h(re.rows(), re.cols());
    h.real() = re.matrix();
    h.imag() = im.matrix();
    return h;
  }
  int rows() const { return static_cast<int>(re.rows()); }
  int cols() const { return static_cast<int>(re.cols()); }
};

// Unit-modulus pilot symbols on a regular lattice (every `stride`-th
// position per axis); zero elsewhere.
struct PilotBlock {
  CMat symbols;  // zero off-lattice
  int stride = 4;

  bool is_pilot(int r, int c) const {
    return r % stride == 0 && c % stride == 0;
  }

  static PilotBlock make(int rows, int cols, int stride, std::uint64_t seed) {
    require(stride >= 1 && stride <= rows && stride <= cols,
            "pilots: bad stride");
    PilotBlock p;
    p.stride = stride;
    p.symbols = CMat::Zero(rows, cols);
    Rng rng(seed ^ 0x9110700u);
    const double s = std::sqrt(0.5);  // QPSK, unit modulus
    for (int r = 0; r < rows; r += stride)
      for (int c = 0; c < cols; c += stride) {
        const int quad = rng.uniform_int(0, 3);
        p.symbols(r, c) = Cplx((quad & 1) ? -s : s, (quad & 2) ? -s : s);
      }
    return p;
  }

  std::vector<std::pair<int, int>> positions() const {
    std::vector<std::pair<int, int>> out;
    for (int r = 0; r < symbols.rows(); r += stride)
      for (int c = 0; c < symbols.cols(); c += stride) out.emplace_back(r, c);
    return out;
  }
};

// Received pilot grid: y = h * theta + CN(0, sigma^2) at pilot positions,
// zero elsewhere. Noise power comes from the unit pilot symbol power.
inline CMat pilot_observe(const CMat& h, const PilotBlock& pilots,
                          double snr_db, std::uint64_t seed) {
  require(h.rows() == pilots.symbols.rows() && h.cols() == pilots.symbols.cols(),
          "pilot_observe: shape mismatch");
  const double sigma2 = channel::noise_power_for_snr(1.0, snr_db);
  const double sigma_dim = std::sqrt(sigma2 / 2.0);
  Rng rng(seed ^ 0x0b5e7eu);
  CMat y = CMat::Zero(h.rows(), h.cols());
  for (const auto& [r, c] : pilots.positions())
    y(r, c) = h(r, c) * pilots.symbols(r, c) +
              Cplx(sigma_dim * rng.normal(), sigma_dim * rng.normal());
  return y;
}

}  // namespace sc3d::csi

// Link-level fading simulation: channel draws, Y = HX + N, equalization.
#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <string>
#include <vector>

#include "sc3d/common.hpp"
#include "sc3d/rng.hpp"

namespace sc3d::channel {

using Cplx = std::complex<double>;
using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;

enum class FadingModel { awgn, rayleigh, rician };

inline FadingModel fading_model_from_string(const std::string& s) {
  if (s == "awgn") return FadingModel::awgn;
  if (s == "rayleigh") return FadingModel::rayleigh;
  if (s == "rician") return FadingModel::rician;
  throw std::invalid_argument("unknown fading model: " + s);
}

struct ChannelRealization {
  FadingModel model = FadingModel::awgn;
  double k_factor = 0.0;
  bool matrix_mode = false;  // gains mix a symbol vector instead of scaling
  CMat gains;
  std::uint64_t seed = 0;
};

// sigma^2 = P / 10^(snr/10); snr = +inf gives exactly zero.
inline double noise_power_for_snr(double signal_power, double snr_db) {
  require(signal_power >= 0.0, "noise_power_for_snr: negative power");
  if (std::isinf(snr_db) && snr_db > 0) return 0.0;
  return signal_power / std::pow(10.0, snr_db / 10.0);
}

namespace detail {

// Circular 3x3 binomial smoothing; diffuse energy is rescaled back to unit
// variance afterwards so E|h|^2 stays 1.
inline CMat smooth_unit_gain(const CMat& in) {
  const int R = static_cast<int>(in.rows()), C = static_cast<int>(in.cols());
  if (R < 3 || C < 3) return in;
  static const double k[3] = {0.25, 0.5, 0.25};
  CMat out = CMat::Zero(R, C);
  for (int r = 0; r < R; ++r)
    for (int c = 0; c < C; ++c) {
      Cplx acc = 0.0;
      for (int dr = -1; dr <= 1; ++dr)
        for (int dc = -1; dc <= 1; ++dc)
          acc += k[dr + 1] * k[dc + 1] *
                 in((r + dr + R) % R, (c + dc + C) % C);
      out(r, c) = acc;
    }
  double k2 = 0.0;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) k2 += k[i] * k[j] * k[i] * k[j];
  return out / std::sqrt(k2);
}

}  // namespace detail

// Rician per entry: sqrt(K/(K+1)) e^{j phi0} + sqrt(1/(K+1)) CN(0,1), with
// one line-of-sight phase per realization and spatial smoothing of the
// diffuse part. rayleigh == rician with K = 0; awgn == all-ones gains.
inline ChannelRealization draw_channel(FadingModel model, int rows, int cols,
                                       double k_factor, std::uint64_t seed,
                                       bool matrix_mode = false) {
  require(rows >= 1 && cols >= 1, "draw_channel: bad shape");
  require(k_factor >= 0.0, "draw_channel: K factor must be >= 0");
  ChannelRealization chan;
  chan.model = model;
  chan.k_factor = model == FadingModel::rician ? k_factor : 0.0;
  chan.matrix_mode = matrix_mode;
  chan.seed = seed;
  if (model == FadingModel::awgn) {
    chan.gains = CMat::Ones(rows, cols);
    return chan;
  }
  Rng rng(seed ^ 0xc4a11e1u);
  const double K = chan.k_factor;
  const double los = std::sqrt(K / (K + 1.0));
  const double diff = std::sqrt(1.0 / (K + 1.0));
  const double phi0 = rng.uniform(0.0, 2.0 * M_PI);
  const Cplx los_term = los * std::exp(Cplx(0.0, phi0));
  CMat scatter(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) scatter(r, c) = rng.cnormal();
  scatter = detail::smooth_unit_gain(scatter);
  chan.gains = CMat::Constant(rows, cols, los_term) + diff * scatter;
  return chan;
}

// Maps a real coefficient stream onto complex frames: consecutive real
// pairs form one symbol, symbols fill the gain grid row-major (or a
// length-n vector per frame in matrix mode). Odd lengths are zero padded.
struct FrameMapping {
  long n_real = 0;
  int symbols_per_frame = 0;
  int n_frames = 0;
  bool padded = false;

  static FrameMapping plan(long n_real, const ChannelRealization& chan) {
    FrameMapping m;
    m.n_real = n_real;
    m.symbols_per_frame = chan.matrix_mode
                              ? static_cast<int>(chan.gains.rows())
                              : static_cast<int>(chan.gains.size());
    const long n_sym = (n_real + 1) / 2;
    m.padded = (n_real % 2) != 0 ||
               (n_sym % m.symbols_per_frame) != 0;
    m.n_frames = static_cast<int>((n_sym + m.symbols_per_frame - 1) /
                                  m.symbols_per_frame);
    return m;
  }

  std::vector<CVec> to_frames(const Eigen::VectorXd& x) const {
    std::vector<CVec> frames(n_frames, CVec::Zero(symbols_per_frame));
    for (long i = 0; 2 * i < n_real; ++i) {
      const double re = x(2 * i);
      const double im = 2 * i + 1 < n_real ? x(2 * i + 1) : 0.0;
      frames[i / symbols_per_frame](i % symbols_per_frame) = Cplx(re, im);
    }
    return frames;
  }

  Eigen::VectorXd from_frames(const std::vector<CVec>& frames) const {
    Eigen::VectorXd x(n_real);
    for (long i = 0; 2 * i < n_real; ++i) {
      const Cplx s = frames[i / symbols_per_frame](i % symbols_per_frame);
      x(2 * i) = s.real();
      if (2 * i + 1 < n_real) x(2 * i + 1) = s.imag();
    }
    return x;
  }
};

// Applies the channel gains and adds complex AWGN whose per-real-dimension
// variance is real_coeff_power / 10^(snr/10). Block fading: the one drawn
// realization applies to every frame of the call.
inline Eigen::VectorXd transmit(const Eigen::VectorXd& x,
                                const ChannelRealization& chan, double snr_db,
                                std::uint64_t seed,
                                double real_coeff_power = 1.0) {
  require(x.allFinite(), "transmit: input must be finite");
  require(x.size() > 0, "transmit: empty input");
  const auto mapping = FrameMapping::plan(x.size(), chan);
  auto frames = mapping.to_frames(x);
  const double sigma2_dim = noise_power_for_snr(real_coeff_power, snr_db);
  const double sigma_dim = std::sqrt(sigma2_dim);
  Rng rng(seed ^ 0x7e1ecau);
  for (auto& f : frames) {
    if (chan.matrix_mode) {
      f = chan.gains * f;
    } else {
      for (int i = 0; i < f.size(); ++i)
        f(i) *= chan.gains(i / chan.gains.cols(), i % chan.gains.cols());
    }
    if (sigma_dim > 0.0)
      for (int i = 0; i < f.size(); ++i)
        f(i) += Cplx(sigma_dim * rng.normal(), sigma_dim * rng.normal());
  }
  return mapping.from_frames(frames);
}

enum class EqualizeMode { elementwise, pseudo_inverse };

// Elementwise: x = y / h per symbol. Pseudo-inverse: x = (H^H H)^{-1} H^H y
// per frame. The estimate's layout must match the mode.
inline Eigen::VectorXd equalize(const Eigen::VectorXd& y, const CMat& h_est,
                                EqualizeMode mode) {
  ChannelRealization shape;
  shape.gains = h_est;
  shape.matrix_mode = mode == EqualizeMode::pseudo_inverse;
  if (shape.matrix_mode)
    require(h_est.rows() == h_est.cols(), "equalize: estimate must be square");
  const auto mapping = FrameMapping::plan(y.size(), shape);
  auto frames = mapping.to_frames(y);

  if (mode == EqualizeMode::elementwise) {
    for (auto& f : frames)
      for (int i = 0; i < f.size(); ++i) {
        const Cplx h = h_est(i / h_est.cols(), i % h_est.cols());
        if (std::abs(h) < 1e-12)
          throw singular_channel_error(
              "equalize: near-zero gain at symbol index " + std::to_string(i));
        f(i) /= h;
      }
  } else {
    Eigen::ColPivHouseholderQR<CMat> qr(h_est);
    qr.setThreshold(1e-10);
    if (qr.rank() < h_est.cols())
      throw singular_channel_error("equalize: rank-deficient channel matrix");
    for (auto& f : frames) f = qr.solve(f);
  }
  return mapping.from_frames(frames);
}

}  // namespace sc3d::channel

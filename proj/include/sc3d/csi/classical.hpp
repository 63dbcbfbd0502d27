// Classical pilot-based estimators: LS with bilinear interpolation,
// linear MMSE on the pilot lattice, and sparse recovery (OMP, AMP).
#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <vector>

#include "sc3d/csi/pilots.hpp"

namespace sc3d::csi {

// h_hat = y / theta at pilots, bilinear interpolation between lattice
// nodes, clamped beyond the outermost pilots.
inline CsiImage ls_estimate(const CMat& y_pilot, const PilotBlock& pilots) {
  const int R = static_cast<int>(y_pilot.rows());
  const int C = static_cast<int>(y_pilot.cols());
  require(R == pilots.symbols.rows() && C == pilots.symbols.cols(),
          "ls_estimate: shape mismatch");
  const int s = pilots.stride;
  const int pr = (R - 1) / s + 1, pc = (C - 1) / s + 1;
  CMat lattice(pr, pc);
  for (int i = 0; i < pr; ++i)
    for (int j = 0; j < pc; ++j) {
      const Cplx theta = pilots.symbols(i * s, j * s);
      require(std::abs(theta) > 0.0, "ls_estimate: zero pilot symbol");
      lattice(i, j) = y_pilot(i * s, j * s) / theta;
    }
  CMat out(R, C);
  for (int r = 0; r < R; ++r)
    for (int c = 0; c < C; ++c) {
      const double fr = std::min(double(r) / s, double(pr - 1));
      const double fc = std::min(double(c) / s, double(pc - 1));
      const int i0 = std::min(static_cast<int>(fr), pr - 2 < 0 ? 0 : pr - 2);
      const int j0 = std::min(static_cast<int>(fc), pc - 2 < 0 ? 0 : pc - 2);
      const int i1 = std::min(i0 + 1, pr - 1), j1 = std::min(j0 + 1, pc - 1);
      const double ar = fr - i0, ac = fc - j0;
      out(r, c) = (1 - ar) * (1 - ac) * lattice(i0, j0) +
                  (1 - ar) * ac * lattice(i0, j1) +
                  ar * (1 - ac) * lattice(i1, j0) + ar * ac * lattice(i1, j1);
    }
  return CsiImage::from_complex(out);
}

struct ChannelStats {
  CMat covariance;            // over vectorized grids (row-major)
  Eigen::VectorXcd mean;
};

inline Eigen::VectorXcd vectorize(const CMat& h) {
  Eigen::VectorXcd v(h.size());
  long k = 0;
  for (long r = 0; r < h.rows(); ++r)
    for (long c = 0; c < h.cols(); ++c) v(k++) = h(r, c);
  return v;
}

inline CMat unvectorize(const Eigen::VectorXcd& v, int rows, int cols) {
  CMat h(rows, cols);
  long k = 0;
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) h(r, c) = v(k++);
  return h;
}

inline ChannelStats estimate_channel_stats(channel::FadingModel model, int rows,
                                           int cols, double k_factor,
                                           int n_draws, std::uint64_t seed) {
  require(n_draws >= 2, "estimate_channel_stats: need at least 2 draws");
  const long n = static_cast<long>(rows) * cols;
  Eigen::VectorXcd mean = Eigen::VectorXcd::Zero(n);
  std::vector<Eigen::VectorXcd> draws;
  draws.reserve(n_draws);
  for (int i = 0; i < n_draws; ++i) {
    draws.push_back(vectorize(
        channel::draw_channel(model, rows, cols, k_factor, seed + i).gains));
    mean += draws.back();
  }
  mean /= double(n_draws);
  CMat cov = CMat::Zero(n, n);
  for (const auto& d : draws) {
    const Eigen::VectorXcd z = d - mean;
    cov.noalias() += z * z.adjoint();
  }
  cov /= double(n_draws);
  return {cov, mean};
}

// Linear MMSE in the whitened pilot domain:
// h = mu + R[:,p] (R[p,p] + sigma^2 I)^{-1} (h_ls[p] - mu[p]).
inline CsiImage mmse_estimate(const CMat& y_pilot, const PilotBlock& pilots,
                              const ChannelStats& stats, double sigma2) {
  require(sigma2 >= 0.0, "mmse_estimate: negative noise power");
  const int R = static_cast<int>(y_pilot.rows());
  const int C = static_cast<int>(y_pilot.cols());
  const long n = static_cast<long>(R) * C;
  require(stats.covariance.rows() == n && stats.covariance.cols() == n,
          "mmse_estimate: covariance size mismatch");
  {
    Eigen::SelfAdjointEigenSolver<CMat> es(stats.covariance,
                                           Eigen::EigenvaluesOnly);
    const double lo = es.eigenvalues().minCoeff();
    const double hi = std::max(1.0, es.eigenvalues().maxCoeff());
    require(lo > -1e-9 * hi, "mmse_estimate: covariance not PSD");
  }
  const auto pos = pilots.positions();
  const long m = static_cast<long>(pos.size());
  std::vector<long> pidx(m);
  for (long i = 0; i < m; ++i)
    pidx[i] = static_cast<long>(pos[i].first) * C + pos[i].second;

  Eigen::VectorXcd ls_p(m);
  for (long i = 0; i < m; ++i) {
    const Cplx theta = pilots.symbols(pos[i].first, pos[i].second);
    require(std::abs(theta) > 0.0, "mmse_estimate: zero pilot symbol");
    ls_p(i) = y_pilot(pos[i].first, pos[i].second) / theta -
              stats.mean(pidx[i]);
  }
  CMat r_pp(m, m);
  CMat r_fp(n, m);
  for (long i = 0; i < m; ++i) {
    for (long j = 0; j < m; ++j) r_pp(i, j) = stats.covariance(pidx[i], pidx[j]);
    r_fp.col(i) = stats.covariance.col(pidx[i]);
  }
  r_pp.diagonal().array() += sigma2;
  Eigen::VectorXcd w = r_pp.ldlt().solve(ls_p);
  Eigen::VectorXcd h = stats.mean + r_fp * w;
  return CsiImage::from_complex(unvectorize(h, R, C));
}

// Unitary 2D-DFT dictionary over the grid; columns have unit norm.
inline CMat dft_dictionary(int rows, int cols) {
  const long n = static_cast<long>(rows) * cols;
  CMat d(n, n);
  const double norm = 1.0 / std::sqrt(double(n));
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c)
      for (int k = 0; k < rows; ++k)
        for (int l = 0; l < cols; ++l) {
          const double phase = 2.0 * M_PI * (double(r) * k / rows +
                                             double(c) * l / cols);
          d(static_cast<long>(r) * cols + c, static_cast<long>(k) * cols + l) =
              norm * std::exp(Cplx(0.0, phase));
        }
  return d;
}

// Greedy orthogonal matching pursuit with an LS refit per iteration.
inline CsiImage omp_estimate(const CMat& y_pilot, const PilotBlock& pilots,
                             const CMat& dictionary, int sparsity) {
  const int R = static_cast<int>(y_pilot.rows());
  const int C = static_cast<int>(y_pilot.cols());
  const auto pos = pilots.positions();
  const long m = static_cast<long>(pos.size());
  require(sparsity >= 0, "omp_estimate: negative sparsity");
  require(sparsity <= m, "omp_estimate: sparsity exceeds pilot count");
  if (sparsity == 0) return CsiImage(R, C);

  // sensing matrix: pilot rows of the dictionary scaled by the symbols
  CMat a(m, dictionary.cols());
  Eigen::VectorXcd y(m);
  for (long i = 0; i < m; ++i) {
    const long row = static_cast<long>(pos[i].first) * C + pos[i].second;
    a.row(i) = pilots.symbols(pos[i].first, pos[i].second) * dictionary.row(row);
    y(i) = y_pilot(pos[i].first, pos[i].second);
  }
  Eigen::VectorXd col_norm = a.colwise().norm();

  std::vector<long> support;
  Eigen::VectorXcd residual = y;
  Eigen::VectorXcd coef;
  for (int it = 0; it < sparsity; ++it) {
    Eigen::VectorXcd corr = a.adjoint() * residual;
    long best = -1;
    double best_mag = -1.0;
    for (long j = 0; j < corr.size(); ++j) {
      if (col_norm(j) < 1e-12) continue;
      if (std::find(support.begin(), support.end(), j) != support.end())
        continue;
      const double mag = std::abs(corr(j)) / col_norm(j);
      if (mag > best_mag) {
        best_mag = mag;
        best = j;
      }
    }
    if (best < 0) break;
    support.push_back(best);
    CMat as(m, support.size());
    for (std::size_t k = 0; k < support.size(); ++k)
      as.col(k) = a.col(support[k]);
    coef = as.colPivHouseholderQr().solve(y);
    residual = y - as * coef;
  }
  Eigen::VectorXcd sparse = Eigen::VectorXcd::Zero(dictionary.cols());
  for (std::size_t k = 0; k < support.size(); ++k)
    sparse(support[k]) = coef(k);
  return CsiImage::from_complex(
      unvectorize(dictionary * sparse, R, C));
}

// Approximate message passing with a complex soft threshold and Onsager
// correction, run for a fixed iteration count.
inline CsiImage amp_estimate(const CMat& y_pilot, const PilotBlock& pilots,
                             const CMat& dictionary, int iters,
                             double threshold = 1.5) {
  const int R = static_cast<int>(y_pilot.rows());
  const int C = static_cast<int>(y_pilot.cols());
  const auto pos = pilots.positions();
  const long m = static_cast<long>(pos.size());
  const long n = dictionary.cols();
  if (m == 0 || iters <= 0) return CsiImage(R, C);

  CMat a(m, n);
  Eigen::VectorXcd y(m);
  for (long i = 0; i < m; ++i) {
    const long row = static_cast<long>(pos[i].first) * C + pos[i].second;
    a.row(i) = pilots.symbols(pos[i].first, pos[i].second) * dictionary.row(row);
    y(i) = y_pilot(pos[i].first, pos[i].second);
  }
  // rescale so columns have unit norm; y = A s still holds for the true s
  const double scale = std::sqrt(double(n) / double(m));
  a *= scale;
  y *= scale;

  Eigen::VectorXcd s = Eigen::VectorXcd::Zero(n);
  Eigen::VectorXcd z = y;
  for (int it = 0; it < iters; ++it) {
    Eigen::VectorXcd r = s + a.adjoint() * z;
    const double tau = threshold * std::sqrt(z.squaredNorm() / double(m));
    long active = 0;
    for (long j = 0; j < n; ++j) {
      const double mag = std::abs(r(j));
      if (mag > tau) {
        s(j) = r(j) * ((mag - tau) / mag);
        ++active;
      } else {
        s(j) = 0.0;
      }
    }
    z = y - a * s + (double(active) / double(m)) * z;
  }
  return CsiImage::from_complex(unvectorize(dictionary * s, R, C));
}

}  // namespace sc3d::csi

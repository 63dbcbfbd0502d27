// Diffusion refinement of estimated CSI: noise schedule, forward process,
// posterior-mean denoiser training, and the reverse refinement loop.
#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "sc3d/csi/cgan.hpp"

namespace sc3d::csi {

struct NoiseSchedule {
  Eigen::VectorXd betas;       // strictly increasing in (0,1)
  Eigen::VectorXd alphas;      // 1 - beta
  Eigen::VectorXd alpha_bars;  // cumulative products, strictly decreasing

  int steps() const { return static_cast<int>(betas.size()); }
  double alpha_bar(int t) const { return t == 0 ? 1.0 : alpha_bars(t - 1); }
};

inline NoiseSchedule make_schedule(int t_steps, double beta_1, double beta_t) {
  require(t_steps >= 1, "make_schedule: need at least one step");
  require(beta_1 > 0.0 && beta_t < 1.0,
          "make_schedule: betas must lie in (0,1)");
  require(beta_1 < beta_t, "make_schedule: beta_1 must be < beta_T");
  NoiseSchedule s;
  s.betas.resize(t_steps);
  for (int i = 0; i < t_steps; ++i)
    s.betas(i) = t_steps == 1
                     ? beta_1
                     : beta_1 + (beta_t - beta_1) * double(i) / (t_steps - 1);
  s.alphas = 1.0 - s.betas.array();
  s.alpha_bars.resize(t_steps);
  double prod = 1.0;
  for (int i = 0; i < t_steps; ++i) {
    prod *= s.alphas(i);
    s.alpha_bars(i) = prod;
  }
  return s;
}

enum class DiffuseMode { chain, marginal };

// Chain mode applies t single steps; marginal mode samples
// sqrt(abar_t) x0 + sqrt(1 - abar_t) z directly.
inline CsiImage forward_diffuse(const CsiImage& h0, int t,
                                const NoiseSchedule& schedule,
                                std::uint64_t seed, DiffuseMode mode) {
  require(t >= 1 && t <= schedule.steps(), "forward_diffuse: t out of range");
  Rng rng(seed ^ 0xd1ff05e5u);
  CsiImage x = h0;
  auto mix_noise = [&](CsiImage& img, double keep, double noise) {
    for (int r = 0; r < img.rows(); ++r)
      for (int c = 0; c < img.cols(); ++c) {
        img.re(r, c) = keep * img.re(r, c) + noise * rng.normal();
        img.im(r, c) = keep * img.im(r, c) + noise * rng.normal();
      }
  };
  if (mode == DiffuseMode::chain) {
    for (int k = 0; k < t; ++k)
      mix_noise(x, std::sqrt(schedule.alphas(k)), std::sqrt(schedule.betas(k)));
  } else {
    const double ab = schedule.alpha_bars(t - 1);
    mix_noise(x, std::sqrt(ab), std::sqrt(1.0 - ab));
  }
  return x;
}

// Residual MLP predicting the posterior mean mu(H_t, t); the zero-initialized
// output layer makes the untrained model an exact identity map.
template <class Sc = float>
struct DenoiserModel {
  int rows = 16, cols = 16;
  int hidden = 128;
  static constexpr int kTimeDims = 8;
  nn::ParamStore<Sc> store;
  nn::Dense<Sc> fc1, fc2, fc_out;

  static DenoiserModel create(int rows, int cols, std::uint64_t seed,
                              int hidden = 128) {
    DenoiserModel d;
    d.rows = rows;
    d.cols = cols;
    d.hidden = hidden;
    Rng rng(seed ^ 0xde015e1u);
    const int in = 2 * rows * cols + kTimeDims;
    d.fc1 = nn::Dense<Sc>::create(d.store, in, hidden, rng);
    d.fc2 = nn::Dense<Sc>::create(d.store, hidden, hidden, rng);
    d.fc_out = nn::Dense<Sc>::create(d.store, hidden, 2 * rows * cols, rng);
    d.fc_out.W->value.setZero();
    d.fc_out.b->value.setZero();
    return d;
  }

  Mat<Sc> time_embedding(int t, int t_max) const {
    Mat<Sc> e(1, kTimeDims);
    const double u = double(t) / std::max(1, t_max);
    for (int k = 0; k < kTimeDims / 2; ++k) {
      const double w = M_PI * std::ldexp(1.0, k);
      e(0, 2 * k) = static_cast<Sc>(std::sin(w * u));
      e(0, 2 * k + 1) = static_cast<Sc>(std::cos(w * u));
    }
    return e;
  }

  Var<Sc> mean_graph(Var<Sc> h_t_flat, int t, int t_max) const {
    auto in = nn::concat_cols(h_t_flat,
                              nn::constant<Sc>(time_embedding(t, t_max)));
    auto h = nn::relu(fc1(in));
    h = nn::relu(fc2(h));
    return nn::add(h_t_flat, fc_out(h));
  }

  // mu_theta(H_t, t) on plain values.
  CsiImage mean(const CsiImage& h_t, int t, int t_max) const {
    Mat<Sc> flat(1, 2 * rows * cols);
    long k = 0;
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c, ++k) {
        flat(0, k) = static_cast<Sc>(h_t.re(r, c));
        flat(0, rows * cols + k) = static_cast<Sc>(h_t.im(r, c));
      }
    auto out = mean_graph(nn::constant<Sc>(flat), t, t_max);
    CsiImage res(rows, cols);
    k = 0;
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c, ++k) {
        res.re(r, c) = double(out->value(0, k));
        res.im(r, c) = double(out->value(0, rows * cols + k));
      }
    return res;
  }

  void save(const std::string& path) const {
    auto flat = store.flatten();
    nn::save_blob(path, 0x444e4f49u, {rows, cols, hidden},
                  std::vector<float>(flat.begin(), flat.end()));
  }

  static DenoiserModel load(const std::string& path, int rows, int cols,
                            int hidden = 128) {
    DenoiserModel d = create(rows, cols, 0, hidden);
    auto data = nn::load_blob(path, 0x444e4f49u, {rows, cols, hidden});
    d.store.unflatten(std::vector<Sc>(data.begin(), data.end()));
    return d;
  }
};

namespace detail {

template <class Sc>
Mat<Sc> csi_flat(const CsiImage& a) {
  Mat<Sc> flat(1, 2 * a.rows() * a.cols());
  long k = 0;
  for (int r = 0; r < a.rows(); ++r)
    for (int c = 0; c < a.cols(); ++c, ++k) {
      flat(0, k) = static_cast<Sc>(a.re(r, c));
      flat(0, a.rows() * a.cols() + k) = static_cast<Sc>(a.im(r, c));
    }
  return flat;
}

}  // namespace detail

struct DenoiserSample {
  CsiImage h0_pred;  // generator output, the chain's starting manifold
  CsiImage h_true;   // clean target anchoring the posterior mean
};

// Closed-form posterior mean coefficients of q(H_{t-1} | H_t, H_0):
// mu = c0 * H_0 + ct * H_t.
inline std::pair<double, double> posterior_mean_coeffs(
    const NoiseSchedule& s, int t) {
  const double ab_t = s.alpha_bars(t - 1);
  const double ab_prev = s.alpha_bar(t - 1);
  const double beta = s.betas(t - 1);
  const double alpha = s.alphas(t - 1);
  const double c0 = std::sqrt(ab_prev) * beta / (1.0 - ab_t);
  const double ct = std::sqrt(alpha) * (1.0 - ab_prev) / (1.0 - ab_t);
  return {c0, ct};
}

// Each step diffuses a generator output to a random level t and regresses
// mu_theta(H_t, t) onto the posterior mean anchored at the true gains.
template <class Sc = float>
std::vector<double> train_denoiser(DenoiserModel<Sc>& model,
                                   const std::vector<DenoiserSample>& samples,
                                   const NoiseSchedule& schedule, int epochs,
                                   std::uint64_t seed, double lr = 1e-3,
                                   bool verbose = false) {
  require(!samples.empty(), "train_denoiser: no samples");
  Rng rng(seed ^ 0xd7a10u);
  nn::Adam<Sc> adam(static_cast<Sc>(lr));
  std::vector<std::size_t> order(samples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::vector<double> trace;
  const int T = schedule.steps();
  for (int epoch = 0; epoch < epochs; ++epoch) {
    rng.shuffle(order);
    double acc = 0.0;
    for (std::size_t idx : order) {
      const int t = rng.uniform_int(1, T);
      const auto h_t = forward_diffuse(samples[idx].h0_pred, t, schedule,
                                       rng.next_u64(), DiffuseMode::marginal);
      const auto [c0, ct] = posterior_mean_coeffs(schedule, t);
      CsiImage target(h_t.rows(), h_t.cols());
      target.re = c0 * samples[idx].h_true.re + ct * h_t.re;
      target.im = c0 * samples[idx].h_true.im + ct * h_t.im;

      model.store.zero_grad();
      auto mu = model.mean_graph(
          nn::constant<Sc>(detail::csi_flat<Sc>(h_t)), t, T);
      auto loss = nn::mse_loss(mu, nn::constant<Sc>(detail::csi_flat<Sc>(target)));
      const double l = loss->value(0, 0);
      if (!std::isfinite(l))
        throw training_error("train_denoiser: loss diverged at epoch " +
                             std::to_string(epoch));
      nn::backward(loss);
      adam.step(model.store);
      acc += l;
    }
    trace.push_back(acc / samples.size());
    if (verbose)
      std::fprintf(stderr, "[train-denoiser] epoch %d loss %.6f\n", epoch,
                   trace.back());
  }
  return trace;
}

// Reverse refinement from H_T = H_hat. The literal variant injects noise at
// every step and divides the final state by sqrt(alpha_1); the standard
// variant suppresses the noise at t=1 and returns mu directly.
template <class Sc>
CsiImage refine_csi(const CsiImage& h_hat, const NoiseSchedule& schedule,
                    const DenoiserModel<Sc>& model, std::uint64_t seed,
                    bool literal = false) {
  Rng rng(seed ^ 0x5ef1eu);
  CsiImage x = h_hat;
  const int T = schedule.steps();
  for (int t = T; t >= 1; --t) {
    x = model.mean(x, t, T);
    const bool add_noise = literal || t > 1;
    if (add_noise) {
      const double s = std::sqrt(schedule.betas(t - 1));
      for (int r = 0; r < x.rows(); ++r)
        for (int c = 0; c < x.cols(); ++c) {
          x.re(r, c) += s * rng.normal();
          x.im(r, c) += s * rng.normal();
        }
    }
  }
  if (literal) {
    const double inv = 1.0 / std::sqrt(schedule.alphas(0));
    x.re *= inv;
    x.im *= inv;
  }
  return x;
}

struct GdceEstimate {
  CsiImage coarse;   // generator output
  CsiImage refined;  // after diffusion refinement
};

template <class Sc>
GdceEstimate estimate_csi(const CsiImage& y_pilot, const CsiImage& theta,
                          const GanPair<Sc>& gan,
                          const DenoiserModel<Sc>& denoiser,
                          const NoiseSchedule& schedule, std::uint64_t seed,
                          bool literal = false) {
  GdceEstimate est;
  est.coarse = gan.estimate(y_pilot, theta);
  est.refined = refine_csi(est.coarse, schedule, denoiser, seed, literal);
  return est;
}

}  // namespace sc3d::csi

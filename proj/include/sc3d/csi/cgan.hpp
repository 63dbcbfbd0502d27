// Conditional GAN channel estimation: encoder-decoder generator with a
// skip connection, strided-convolution critic, least-squares losses.
#pragma once

#include <string>
#include <vector>

#include "sc3d/csi/pilots.hpp"
#include "sc3d/nn/checkpoint.hpp"
#include "sc3d/nn/optim.hpp"

namespace sc3d::csi {

using nn::Mat;
using nn::Var;

// (d_real - 1)^2 + (d_fake + 1)^2: zero exactly at the target labels.
inline double cgan_discriminator_loss(double d_real, double d_fake) {
  return (d_real - 1.0) * (d_real - 1.0) + (d_fake + 1.0) * (d_fake + 1.0);
}

// d_fake^2 + mu * mean|G - H|.
inline double cgan_generator_loss(double d_fake, const CsiImage& g_out,
                                  const CsiImage& h, double mu_l1) {
  require(mu_l1 >= 0.0, "cgan_generator_loss: mu_l1 must be >= 0");
  require(g_out.rows() == h.rows() && g_out.cols() == h.cols(),
          "cgan_generator_loss: shape mismatch");
  const double l1 = ((g_out.re - h.re).abs().sum() +
                     (g_out.im - h.im).abs().sum()) /
                    (2.0 * g_out.re.size());
  return d_fake * d_fake + mu_l1 * l1;
}

struct CsiSample {
  CsiImage y;      // received pilot grid (zero off-pilot)
  CsiImage theta;  // pilot symbols
  CsiImage h;      // true gains
};

inline std::vector<CsiSample> make_csi_samples(int count, int rows, int cols,
                                               channel::FadingModel model,
                                               double k_factor, int pilot_stride,
                                               double snr_db,
                                               std::uint64_t seed) {
  auto pilots = PilotBlock::make(rows, cols, pilot_stride, seed);
  std::vector<CsiSample> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) {
    auto chan = channel::draw_channel(model, rows, cols, k_factor,
                                      seed * 7919u + i);
    CsiSample s;
    s.h = CsiImage::from_complex(chan.gains);
    s.theta = CsiImage::from_complex(pilots.symbols);
    s.y = CsiImage::from_complex(
        pilot_observe(chan.gains, pilots, snr_db, seed * 104729u + i));
    out.push_back(std::move(s));
  }
  return out;
}

namespace detail {

template <class Sc>
Mat<Sc> csi_rows(const CsiImage& a) {
  Mat<Sc> m(2, a.re.size());
  long k = 0;
  for (int r = 0; r < a.rows(); ++r)
    for (int c = 0; c < a.cols(); ++c, ++k) {
      m(0, k) = static_cast<Sc>(a.re(r, c));
      m(1, k) = static_cast<Sc>(a.im(r, c));
    }
  return m;
}

template <class Sc>
CsiImage rows_to_csi(const Mat<Sc>& m, int rows, int cols) {
  CsiImage a(rows, cols);
  long k = 0;
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c, ++k) {
      a.re(r, c) = double(m(0, k));
      a.im(r, c) = double(m(1, k));
    }
  return a;
}

template <class Sc>
Mat<Sc> stack_rows(const Mat<Sc>& a, const Mat<Sc>& b) {
  Mat<Sc> m(a.rows() + b.rows(), a.cols());
  m << a, b;
  return m;
}

}  // namespace detail

template <class Sc = float>
struct GanPair {
  int rows = 16, cols = 16;
  int base = 16;  // generator width
  nn::ParamStore<Sc> g_store, d_store;
  nn::Conv2d<Sc> g_in, g_down, g_mid, g_up, g_out;
  nn::Conv2d<Sc> d_c1, d_c2;
  nn::Dense<Sc> d_head;

  static GanPair create(int rows, int cols, std::uint64_t seed, int base = 16) {
    require(rows % 4 == 0 && cols % 4 == 0,
            "gan: grid must be divisible by 4");
    GanPair g;
    g.rows = rows;
    g.cols = cols;
    g.base = base;
    Rng rng(seed ^ 0x6a4e0001u);
    g.g_in = nn::Conv2d<Sc>::create(g.g_store, 4, base, 3, 1, 1, rng);
    g.g_down = nn::Conv2d<Sc>::create(g.g_store, base, 2 * base, 3, 2, 1, rng);
    g.g_mid = nn::Conv2d<Sc>::create(g.g_store, 2 * base, 2 * base, 3, 1, 1, rng);
    g.g_up = nn::Conv2d<Sc>::create(g.g_store, 2 * base, base, 3, 1, 1, rng);
    g.g_out = nn::Conv2d<Sc>::create(g.g_store, 2 * base, 2, 3, 1, 1, rng);
    g.d_c1 = nn::Conv2d<Sc>::create(g.d_store, 4, base, 3, 2, 1, rng);
    g.d_c2 = nn::Conv2d<Sc>::create(g.d_store, base, 2 * base, 3, 2, 1, rng);
    g.d_head = nn::Dense<Sc>::create(
        g.d_store, 2 * base * (rows / 4) * (cols / 4), 1, rng);
    return g;
  }

  // G(Y | Theta): 4 input channels -> 2 output channels.
  Var<Sc> generator_graph(Var<Sc> y_theta) const {
    int h1, w1, h2, w2, hm, wm, hu, wu, ho, wo;
    auto e1 = nn::relu(g_in(y_theta, rows, cols, h1, w1));
    auto e2 = nn::relu(g_down(e1, h1, w1, h2, w2));
    auto mid = nn::relu(g_mid(e2, h2, w2, hm, wm));
    auto up = nn::relu(g_up(nn::upsample2(mid, 2 * base, hm, wm), 2 * hm,
                            2 * wm, hu, wu));
    auto cat = nn::concat_rows(up, e1);  // skip connection
    return g_out(cat, hu, wu, ho, wo);
  }

  // D(CSI | Theta): scalar critic.
  Var<Sc> discriminator_graph(Var<Sc> csi_theta) const {
    int h1, w1, h2, w2;
    auto c1 = nn::leaky_relu(d_c1(csi_theta, rows, cols, h1, w1));
    auto c2 = nn::leaky_relu(d_c2(c1, h1, w1, h2, w2));
    auto flat = nn::reshape_rm(c2, 1, 2 * base * h2 * w2);
    return d_head(flat);
  }

  CsiImage estimate(const CsiImage& y, const CsiImage& theta) const {
    auto in = nn::constant<Sc>(detail::stack_rows(
        detail::csi_rows<Sc>(y), detail::csi_rows<Sc>(theta)));
    auto out = generator_graph(in);
    return detail::rows_to_csi<Sc>(out->value, rows, cols);
  }

  void save(const std::string& path) const {
    auto gf = g_store.flatten();
    auto df = d_store.flatten();
    std::vector<float> data(gf.begin(), gf.end());
    data.insert(data.end(), df.begin(), df.end());
    nn::save_blob(path, 0x4347414eu,
                  {rows, cols, base, (std::int64_t)gf.size(),
                   (std::int64_t)df.size()},
                  data);
  }

  static GanPair load(const std::string& path, int rows, int cols,
                      int base = 16) {
    GanPair g = create(rows, cols, 0, base);
    auto gn = g.g_store.flatten().size();
    auto dn = g.d_store.flatten().size();
    auto data = nn::load_blob(path, 0x4347414eu,
                              {rows, cols, base, (std::int64_t)gn,
                               (std::int64_t)dn});
    g.g_store.unflatten(std::vector<Sc>(data.begin(), data.begin() + gn));
    g.d_store.unflatten(std::vector<Sc>(data.begin() + gn, data.end()));
    return g;
  }
};

struct CganTrainOptions {
  double mu_l1 = 100.0;
  double lr_g = 2e-3;
  double lr_d = 2e-3;
  bool verbose = false;
};

struct CganTrace {
  std::vector<double> d_loss, g_loss;
};

template <class Sc = float>
CganTrace train_cgan(GanPair<Sc>& gan, const std::vector<CsiSample>& samples,
                     int epochs, std::uint64_t seed,
                     const CganTrainOptions& opt = CganTrainOptions{}) {
  require(!samples.empty(), "train_cgan: no samples");
  require(epochs >= 0, "train_cgan: negative epochs");
  std::vector<Mat<Sc>> cond, target, cond_d_real;
  for (const auto& s : samples) {
    auto th = detail::csi_rows<Sc>(s.theta);
    cond.push_back(detail::stack_rows(detail::csi_rows<Sc>(s.y), th));
    target.push_back(detail::csi_rows<Sc>(s.h));
    cond_d_real.push_back(detail::stack_rows(detail::csi_rows<Sc>(s.h), th));
  }
  Rng rng(seed ^ 0x6a4e7214u);
  nn::Adam<Sc> adam_g(static_cast<Sc>(opt.lr_g));
  nn::Adam<Sc> adam_d(static_cast<Sc>(opt.lr_d));
  std::vector<std::size_t> order(samples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  CganTrace trace;
  for (int epoch = 0; epoch < epochs; ++epoch) {
    rng.shuffle(order);
    double dl = 0.0, gl = 0.0;
    for (std::size_t idx : order) {
      const auto& th = detail::csi_rows<Sc>(samples[idx].theta);

      // critic step on (real, fake) with the generator frozen
      gan.d_store.zero_grad();
      auto fake = gan.generator_graph(nn::constant<Sc>(cond[idx]));
      auto fake_const = nn::constant<Sc>(fake->value);
      auto d_real = gan.discriminator_graph(nn::constant<Sc>(cond_d_real[idx]));
      auto d_fake =
          gan.discriminator_graph(nn::constant<Sc>(detail::stack_rows(
              fake_const->value, th)));
      auto d_loss = nn::add(nn::square(nn::add_scalar(d_real, Sc(-1))),
                            nn::square(nn::add_scalar(d_fake, Sc(1))));
      dl += d_loss->value(0, 0);
      nn::backward(d_loss);
      adam_d.step(gan.d_store);

      // generator step through the frozen critic
      gan.g_store.zero_grad();
      gan.d_store.zero_grad();
      auto g_out = gan.generator_graph(nn::constant<Sc>(cond[idx]));
      auto d_on_fake = gan.discriminator_graph(
          nn::concat_rows(g_out, nn::constant<Sc>(th)));
      auto l1 = nn::mean_all(nn::abs_(nn::sub(g_out, nn::constant<Sc>(target[idx]))));
      auto g_loss = nn::add(nn::square(d_on_fake),
                            nn::scale(l1, static_cast<Sc>(opt.mu_l1)));
      gl += g_loss->value(0, 0);
      if (!std::isfinite(gl))
        throw training_error("train_cgan: generator diverged at epoch " +
                             std::to_string(epoch));
      nn::backward(g_loss);
      adam_g.step(gan.g_store);
    }
    trace.d_loss.push_back(dl / samples.size());
    trace.g_loss.push_back(gl / samples.size());
    if (opt.verbose)
      std::fprintf(stderr, "[train-cgan] epoch %d d %.4f g %.4f\n", epoch,
                   trace.d_loss.back(), trace.g_loss.back());
  }
  return trace;
}

}  // namespace sc3d::csi

// Trainable radiance field: a small MLP from positionally encoded
// (position, direction) to (color, density).
#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "sc3d/image.hpp"
#include "sc3d/nn/checkpoint.hpp"
#include "sc3d/nn/layers.hpp"
#include "sc3d/rng.hpp"

namespace sc3d::nerf {

using nn::Mat;
using nn::Var;

struct FieldArch {
  int pos_freqs = 6;
  int dir_freqs = 2;
  int hidden = 64;
  int depth = 4;

  int input_dim() const { return 6 + 6 * pos_freqs + 6 * dir_freqs; }
};

template <class S = float>
struct RadianceField {
  FieldArch arch;
  nn::ParamStore<S> store;
  std::vector<nn::Dense<S>> layers;
  nn::Dense<S> head;  // hidden -> (density_raw, rgb_raw)

  static RadianceField create(const FieldArch& arch, std::uint64_t seed) {
    RadianceField f;
    f.arch = arch;
    Rng rng(seed ^ 0xf1e1d000u);
    int in = arch.input_dim();
    for (int i = 0; i < arch.depth; ++i) {
      f.layers.push_back(nn::Dense<S>::create(f.store, in, arch.hidden, rng));
      in = arch.hidden;
    }
    f.head = nn::Dense<S>::create(f.store, in, 4, rng);
    return f;
  }

  // Field with constant density/color everywhere (weights zeroed, biases set).
  static RadianceField make_constant(double density, const Vec3& rgb) {
    RadianceField f = create(FieldArch{}, 0);
    for (auto& p : f.store.params) p->value.setZero();
    auto inv_softplus = [](double y) {
      return y < 1e-12 ? -40.0 : (y > 20.0 ? y : std::log(std::expm1(y)));
    };
    auto logit = [](double y) {
      const double c = std::min(std::max(y, 1e-7), 1.0 - 1e-7);
      return std::log(c / (1.0 - c));
    };
    auto& hb = f.head.b->value;
    hb(0, 0) = static_cast<S>(inv_softplus(density));
    for (int k = 0; k < 3; ++k) hb(0, 1 + k) = static_cast<S>(logit(rgb[k]));
    return f;
  }

  // Positional encoding rows [p, sin/cos(2^k pi p), d, sin/cos(2^k pi d)].
  Mat<S> encode(const Eigen::MatrixXd& positions,
                const Eigen::MatrixXd& dirs) const {
    const int n = static_cast<int>(positions.rows());
    Mat<S> enc(n, arch.input_dim());
    int col = 0;
    auto put_block = [&](const Eigen::MatrixXd& v, int freqs) {
      for (int k = 0; k < 3; ++k)
        enc.col(col++) = v.col(k).template cast<S>();
      for (int fq = 0; fq < freqs; ++fq) {
        const double w = M_PI * std::ldexp(1.0, fq);
        for (int k = 0; k < 3; ++k) {
          enc.col(col++) = (v.col(k) * w).array().sin().template cast<S>();
          enc.col(col++) = (v.col(k) * w).array().cos().template cast<S>();
        }
      }
    };
    put_block(positions, arch.pos_freqs);
    put_block(dirs, arch.dir_freqs);
    return enc;
  }

  // Inference path on plain matrices: density (softplus) and rgb (sigmoid).
  void query_raw(const Mat<S>& enc, Eigen::VectorXd& density,
                 Eigen::MatrixXd& rgb) const {
    Mat<S> h = enc;
    for (const auto& layer : layers) {
      h = (h * layer.W->value).rowwise() +
          Eigen::Matrix<S, 1, Eigen::Dynamic>(layer.b->value.row(0));
      h = h.cwiseMax(S(0));
    }
    Mat<S> out = (h * head.W->value).rowwise() +
                 Eigen::Matrix<S, 1, Eigen::Dynamic>(head.b->value.row(0));
    const int n = static_cast<int>(out.rows());
    density.resize(n);
    rgb.resize(n, 3);
    for (int i = 0; i < n; ++i) {
      const double sr = out(i, 0);
      density(i) = sr > 20.0 ? sr : std::log1p(std::exp(sr));
      for (int k = 0; k < 3; ++k)
        rgb(i, k) = 1.0 / (1.0 + std::exp(-double(out(i, 1 + k))));
    }
  }

  // Training path: returns the raw head outputs as a graph node.
  Var<S> query_graph(Var<S> enc) const {
    Var<S> h = enc;
    for (const auto& layer : layers) h = nn::relu(layer(h));
    return head(h);
  }

  void save(const std::string& path) const {
    nn::save_blob(path, 0x4e455246u,
                  {arch.pos_freqs, arch.dir_freqs, arch.hidden, arch.depth},
                  [&] {
                    auto flat = store.flatten();
                    return std::vector<float>(flat.begin(), flat.end());
                  }());
  }

  static RadianceField load(const std::string& path, const FieldArch& arch) {
    auto data = nn::load_blob(
        path, 0x4e455246u,
        {arch.pos_freqs, arch.dir_freqs, arch.hidden, arch.depth});
    RadianceField f = create(arch, 0);
    f.store.unflatten(std::vector<S>(data.begin(), data.end()));
    return f;
  }
};

}  // namespace sc3d::nerf

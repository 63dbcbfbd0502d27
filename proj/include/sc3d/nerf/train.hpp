// Photometric training of the radiance field.
#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "sc3d/nerf/render.hpp"
#include "sc3d/nn/optim.hpp"
#include "sc3d/scene/dataset.hpp"

namespace sc3d::nerf {

using scene::MultiViewDataset;

// Mean squared color error over all rays and channels.
inline double photometric_loss(const Eigen::MatrixXd& pred_colors,
                               const Eigen::MatrixXd& true_colors) {
  require(pred_colors.rows() == true_colors.rows() &&
              pred_colors.cols() == true_colors.cols(),
          "photometric_loss: shape mismatch");
  return (pred_colors - true_colors).array().square().mean();
}

// Builds the differentiable render of a ray batch and its loss against the
// target colors. `ts` holds one sample parameter per (ray, sample).
template <class S>
Var<S> render_batch_loss(const RadianceField<S>& field,
                         const Eigen::MatrixXd& origins,
                         const Eigen::MatrixXd& dirs,
                         const Eigen::MatrixXd& ts, double delta,
                         const Vec3& background,
                         const Eigen::MatrixXd& target_colors) {
  const int N = static_cast<int>(origins.rows());
  const int P = static_cast<int>(ts.cols());
  Eigen::MatrixXd pts(static_cast<long>(N) * P, 3), pdirs(static_cast<long>(N) * P, 3);
  for (int r = 0; r < N; ++r)
    for (int i = 0; i < P; ++i) {
      pts.row(static_cast<long>(r) * P + i) =
          origins.row(r) + ts(r, i) * dirs.row(r);
      pdirs.row(static_cast<long>(r) * P + i) = dirs.row(r);
    }
  auto enc = nn::constant<S>(field.encode(pts, pdirs));
  auto head = field.query_graph(enc);

  auto density = nn::reshape_rm(nn::softplus(nn::slice_cols(head, 0, 1)), N, P);
  auto optical = nn::scale(density, static_cast<S>(delta));
  auto transmittance = nn::exp_(nn::scale(nn::exclusive_cumsum_rows(optical), S(-1)));
  auto alpha = nn::add_scalar(nn::scale(nn::exp_(nn::scale(optical, S(-1))), S(-1)), S(1));
  auto weights = nn::mul(transmittance, alpha);
  auto leftover =
      nn::add_scalar(nn::scale(nn::row_sum(weights), S(-1)), S(1));  // N x 1

  Var<S> pred;
  for (int k = 0; k < 3; ++k) {
    auto ck = nn::reshape_rm(nn::sigmoid(nn::slice_cols(head, 1 + k, 1)), N, P);
    auto chan = nn::add(nn::row_sum(nn::mul(weights, ck)),
                        nn::scale(leftover, static_cast<S>(background[k])));
    pred = k == 0 ? chan : nn::concat_cols(pred, chan);
  }
  auto target = nn::constant<S>(target_colors.cast<S>());
  return nn::mse_loss(pred, target);
}

struct FitOptions {
  int batch_rays = 512;
  bool verbose = false;
};

// Deterministic Adam fit. Epoch 0 returns the freshly initialized field.
template <class S = float>
RadianceField<S> fit_radiance_field(const MultiViewDataset& dataset,
                                    const RenderConfig& cfg, int epochs,
                                    double lr, std::uint64_t seed,
                                    const FieldArch& arch = FieldArch{},
                                    const FitOptions& opt = FitOptions{},
                                    std::vector<double>* loss_trace = nullptr) {
  require(!dataset.views.empty(), "fit_radiance_field: empty dataset");
  cfg.validate();
  RadianceField<S> field = RadianceField<S>::create(arch, seed);
  if (epochs <= 0) return field;

  const int W = dataset.width(), H = dataset.height();
  const long n_rays = static_cast<long>(dataset.views.size()) * H * W;
  Eigen::MatrixXd origins(n_rays, 3), dirs(n_rays, 3), colors(n_rays, 3);
  long r = 0;
  for (const auto& view : dataset.views)
    for (int row = 0; row < H; ++row)
      for (int col = 0; col < W; ++col, ++r) {
        origins.row(r) = view.camera.translation.transpose();
        dirs.row(r) = view.camera.pixel_direction(row, col).transpose();
        colors.row(r) = view.image.pixel(row, col).transpose();
      }

  Rng rng(seed ^ 0x7261696eu);
  std::vector<long> order(n_rays);
  for (long i = 0; i < n_rays; ++i) order[i] = i;
  nn::Adam<S> adam(static_cast<S>(lr));
  const double delta = (cfg.t_far - cfg.t_near) / cfg.samples_per_ray;
  const int B = opt.batch_rays;

  for (int epoch = 0; epoch < epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0.0;
    int n_batches = 0;
    for (long start = 0; start + B <= n_rays; start += B, ++n_batches) {
      Eigen::MatrixXd bo(B, 3), bd(B, 3), bc(B, 3), ts(B, cfg.samples_per_ray);
      for (int i = 0; i < B; ++i) {
        const long id = order[start + i];
        bo.row(i) = origins.row(id);
        bd.row(i) = dirs.row(id);
        bc.row(i) = colors.row(id);
      }
      for (int i = 0; i < B; ++i)
        for (int j = 0; j < cfg.samples_per_ray; ++j) {
          const double u = cfg.stratified ? rng.uniform() : 0.5;
          ts(i, j) = cfg.t_near + (j + u) * delta;
        }
      field.store.zero_grad();
      auto loss = render_batch_loss(field, bo, bd, ts, delta, cfg.background, bc);
      const double l = loss->value(0, 0);
      if (!std::isfinite(l))
        throw training_error("fit_radiance_field: loss diverged at epoch " +
                             std::to_string(epoch));
      nn::backward(loss);
      adam.step(field.store);
      epoch_loss += l;
    }
    if (loss_trace) loss_trace->push_back(epoch_loss / std::max(1, n_batches));
    if (opt.verbose)
      std::fprintf(stderr, "[fit-nerf] epoch %d loss %.6f\n", epoch,
                   epoch_loss / std::max(1, n_batches));
  }
  return field;
}

}  // namespace sc3d::nerf

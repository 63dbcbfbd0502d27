// Transformer semantic autoencoder with a dual-head encoder (semantics +
// keep mask) and MLP channel coders around a simulated fading channel.
#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "sc3d/channel/channel.hpp"
#include "sc3d/codec/config.hpp"
#include "sc3d/codec/payload.hpp"
#include "sc3d/image.hpp"
#include "sc3d/nn/checkpoint.hpp"
#include "sc3d/nn/layers.hpp"

namespace sc3d::codec {

using nn::Mat;
using nn::Var;

// Patch rows hold one p x p tile per channel: [r..., g..., b...].
template <class S>
Mat<S> image_to_patches(const Image& im, const CodecConfig& cfg) {
  require(im.height() == cfg.height && im.width() == cfg.width,
          "image_to_patches: size mismatch");
  const int p = cfg.patch, nx = cfg.width / p;
  Mat<S> out(cfg.tokens(), cfg.patch_dim());
  for (int s = 0; s < cfg.tokens(); ++s) {
    const int py = s / nx, px = s % nx;
    int col = 0;
    for (const Plane* plane : {&im.r, &im.g, &im.b})
      for (int dy = 0; dy < p; ++dy)
        for (int dx = 0; dx < p; ++dx)
          out(s, col++) = static_cast<S>((*plane)(py * p + dy, px * p + dx));
  }
  return out;
}

template <class S>
Image patches_to_image(const Mat<S>& patches, const CodecConfig& cfg) {
  Image im(cfg.height, cfg.width);
  const int p = cfg.patch, nx = cfg.width / p;
  for (int s = 0; s < cfg.tokens(); ++s) {
    const int py = s / nx, px = s % nx;
    int col = 0;
    for (Plane* plane : {&im.r, &im.g, &im.b})
      for (int dy = 0; dy < p; ++dy)
        for (int dx = 0; dx < p; ++dx)
          (*plane)(py * p + dy, px * p + dx) = double(patches(s, col++));
  }
  return im;
}

enum class ForwardMode { teacher, student };

// Post-equalization channel effect for training: with the true gains
// divided out, fading plus noise collapses to additive noise n / h on the
// symbol stream. Returned in the real pair layout of the encoder output.
inline Eigen::VectorXd effective_channel_noise(long n_real,
                                               channel::FadingModel model,
                                               double k_factor, double snr_db,
                                               std::uint64_t seed) {
  if (std::isinf(snr_db) && snr_db > 0) return Eigen::VectorXd::Zero(n_real);
  Rng rng(seed ^ 0xeffc0de5u);
  const double sigma_dim = std::sqrt(channel::noise_power_for_snr(1.0, snr_db));
  channel::ChannelRealization chan;
  const long n_sym = (n_real + 1) / 2;
  if (model == channel::FadingModel::awgn) {
    chan.gains = channel::CMat::Ones(1, n_sym);
  } else {
    chan = channel::draw_channel(model, 16, (int)((n_sym + 15) / 16),
                                 k_factor, rng.next_u64());
  }
  Eigen::VectorXd out(n_real);
  for (long i = 0; i < n_sym; ++i) {
    const channel::Cplx h =
        chan.gains(i / chan.gains.cols(), i % chan.gains.cols());
    const channel::Cplx n(sigma_dim * rng.normal(), sigma_dim * rng.normal());
    const channel::Cplx eff = n / h;
    out(2 * i) = eff.real();
    if (2 * i + 1 < n_real) out(2 * i + 1) = eff.imag();
  }
  return out;
}

template <class Sc = float>
struct CodecModel {
  CodecConfig cfg;
  nn::ParamStore<Sc> store;
  nn::Dense<Sc> patch_embed_layer;
  Var<Sc> pos_embedding;
  std::vector<nn::TransformerBlock<Sc>> enc_blocks;
  nn::Dense<Sc> sem_head, mask_head;
  nn::Dense<Sc> chan_enc, chan_dec;
  std::vector<nn::TransformerBlock<Sc>> dec_blocks;
  nn::Dense<Sc> out_proj;

  static CodecModel create(const CodecConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    CodecModel m;
    m.cfg = cfg;
    Rng rng(seed ^ 0xc0dec000u);
    m.patch_embed_layer =
        nn::Dense<Sc>::create(m.store, cfg.patch_dim(), cfg.d_e, rng);
    m.pos_embedding =
        m.store.add(nn::glorot<Sc>(cfg.tokens(), cfg.d_e, rng) * Sc(0.1));
    for (int i = 0; i < cfg.layers; ++i)
      m.enc_blocks.push_back(nn::TransformerBlock<Sc>::create(
          m.store, cfg.d_e, cfg.heads, cfg.ff_hidden, rng));
    m.sem_head = nn::Dense<Sc>::create(m.store, cfg.d_e, cfg.d_e, rng);
    m.mask_head = nn::Dense<Sc>::create(m.store, cfg.d_e, 1, rng);
    m.chan_enc = nn::Dense<Sc>::create(m.store, cfg.d_e, cfg.d_c, rng);
    m.chan_dec = nn::Dense<Sc>::create(m.store, cfg.d_c, cfg.d_e, rng);
    for (int i = 0; i < cfg.layers; ++i)
      m.dec_blocks.push_back(nn::TransformerBlock<Sc>::create(
          m.store, cfg.d_e, cfg.heads, cfg.ff_hidden, rng));
    m.out_proj = nn::Dense<Sc>::create(m.store, cfg.d_e, cfg.patch_dim(), rng);
    return m;
  }

  // Dual-head encoder: shared attention trunk, semantic and mask heads.
  std::pair<Var<Sc>, Var<Sc>> encode_graph(Var<Sc> patch_rows) const {
    auto tokens = patch_embed_layer(patch_rows);
    if (cfg.positional) tokens = nn::add(tokens, pos_embedding);
    for (const auto& block : enc_blocks) tokens = block(tokens);
    return {sem_head(tokens), mask_head(tokens)};
  }

  // tanh modulation then exact unit-average-power normalization over the
  // transmitted symbols. Masked-out tokens carry structural zeros, so the
  // power reference is the kept fraction; an all-zero stream stays zero.
  Var<Sc> channel_encode_graph(Var<Sc> latents, int kept_tokens = -1) const {
    if (kept_tokens < 0) kept_tokens = cfg.tokens();
    auto x = nn::reshape_rm(nn::tanh_(chan_enc(latents)), 1,
                            cfg.tokens() * cfg.d_c);
    // The normalization factor is treated as a constant per call: letting
    // gradients flow through the 1/rms term amplifies them by power^{-3/2}
    // whenever the masked stream runs quiet.
    const Sc power = static_cast<Sc>(x->value.squaredNorm() / x->value.size());
    const Sc kept_scale =
        std::sqrt(static_cast<Sc>(kept_tokens) / static_cast<Sc>(cfg.tokens()));
    const Sc gain =
        power > Sc(0) ? kept_scale / std::sqrt(power) : Sc(0);
    return nn::scale(x, gain);
  }

  Var<Sc> channel_decode_graph(Var<Sc> received) const {
    auto y = nn::reshape_rm(received, cfg.tokens(), cfg.d_c);
    return nn::tanh_(chan_dec(y));
  }

  Var<Sc> decode_graph(Var<Sc> latents) const {
    auto tokens = latents;
    if (cfg.positional) tokens = nn::add(tokens, pos_embedding);
    for (const auto& block : dec_blocks) tokens = block(tokens);
    return nn::sigmoid(out_proj(tokens));
  }

  struct Forward {
    Var<Sc> latents;       // encoder semantics E+ (or masked E-)
    Var<Sc> mask_logits;   // S x 1
    Var<Sc> mask;          // S x 1, empty in teacher mode
    Var<Sc> tx;            // 1 x (S*d_c) normalized symbol stream
    Var<Sc> latents_hat;   // channel-decoded semantics
    Var<Sc> patches_hat;   // S x patch_dim reconstruction
  };

  // Full forward pass through the simulated channel. The noise vector is
  // the post-equalization effective noise (empty means noiseless).
  Forward forward(const Mat<Sc>& patch_rows, ForwardMode mode,
                  const Eigen::VectorXd& effective_noise) const {
    Forward f;
    auto [semantics, logits] = encode_graph(nn::constant<Sc>(patch_rows));
    f.mask_logits = logits;
    int kept = cfg.tokens();
    if (mode == ForwardMode::student) {
      kept = cfg.keep_count();
      f.mask = nn::ste_topk_mask(logits, kept,
                                 static_cast<Sc>(cfg.mask_grad_scale));
      f.latents = nn::scale_rows(semantics, f.mask);
    } else {
      f.latents = semantics;
    }
    f.tx = channel_encode_graph(f.latents, kept);
    Var<Sc> received = f.tx;
    if (effective_noise.size() > 0) {
      require(effective_noise.size() == f.tx->value.size(),
              "forward: noise length mismatch");
      Mat<Sc> n(1, effective_noise.size());
      for (long i = 0; i < effective_noise.size(); ++i)
        n(0, i) = static_cast<Sc>(effective_noise(i));
      received = nn::add(f.tx, nn::constant<Sc>(n));
    }
    f.latents_hat = channel_decode_graph(received);
    f.patches_hat = decode_graph(f.latents_hat);
    return f;
  }

  // ---- value-level conveniences (no gradients consumed) ----

  std::pair<Eigen::MatrixXd, Eigen::VectorXd> encode(const Image& im) const {
    auto [sem, logits] = encode_graph(
        nn::constant<Sc>(image_to_patches<Sc>(im, cfg)));
    return {sem->value.template cast<double>(),
            logits->value.template cast<double>()};
  }

  // Symbol stream for an already masked latent matrix.
  Eigen::VectorXd channel_encode(const Eigen::MatrixXd& latents,
                                 int kept_tokens = -1) const {
    auto x = channel_encode_graph(nn::constant<Sc>(latents.cast<Sc>()),
                                  kept_tokens);
    return x->value.row(0).template cast<double>().transpose();
  }

  Eigen::MatrixXd channel_decode(const Eigen::VectorXd& received) const {
    require(received.size() == long(cfg.tokens()) * cfg.d_c,
            "channel_decode: length mismatch");
    Mat<Sc> y(1, received.size());
    for (long i = 0; i < received.size(); ++i)
      y(0, i) = static_cast<Sc>(received(i));
    auto out = channel_decode_graph(nn::constant<Sc>(y));
    return out->value.template cast<double>();
  }

  Image decode(const Eigen::MatrixXd& latents) const {
    auto out = decode_graph(nn::constant<Sc>(latents.cast<Sc>()));
    return patches_to_image<Sc>(out->value, cfg);
  }

  std::vector<std::int64_t> arch_header() const {
    return {cfg.height,  cfg.width,  cfg.patch,
            cfg.d_e,     cfg.layers, cfg.heads,
            cfg.ff_hidden, cfg.d_c,
            static_cast<std::int64_t>(cfg.keep_rate * 1000.0 + 0.5),
            cfg.q_bits,  cfg.positional ? 1 : 0};
  }

  void save(const std::string& path) const {
    auto flat = store.flatten();
    nn::save_blob(path, 0x43444543u, arch_header(),
                  std::vector<float>(flat.begin(), flat.end()));
  }

  static CodecModel load(const std::string& path, const CodecConfig& cfg) {
    CodecModel m = create(cfg, 0);
    auto data = nn::load_blob(path, 0x43444543u, m.arch_header());
    m.store.unflatten(std::vector<Sc>(data.begin(), data.end()));
    return m;
  }
};

}  // namespace sc3d::codec

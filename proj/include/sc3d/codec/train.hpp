// Self-distillation training: a teacher pass with the mask head bypassed,
// then a student pass with top-k gating, both through the channel.
#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "sc3d/codec/model.hpp"
#include "sc3d/nn/optim.hpp"

namespace sc3d::codec {

// KL(a || b) over two discrete distributions.
inline double kl_divergence(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  require(a.size() == b.size(), "kl_divergence: length mismatch");
  double kl = 0.0;
  for (long i = 0; i < a.size(); ++i) {
    if (a(i) <= 0.0) continue;
    kl += a(i) * std::log(a(i) / b(i));
  }
  return kl;
}

inline Eigen::VectorXd softmax_flat(const Eigen::MatrixXd& m) {
  Eigen::VectorXd v(m.size());
  long k = 0;
  for (long i = 0; i < m.rows(); ++i)
    for (long j = 0; j < m.cols(); ++j) v(k++) = m(i, j);
  const double mx = v.maxCoeff();
  Eigen::ArrayXd e = (v.array() - mx).exp();
  return (e / e.sum()).matrix();
}

struct SkdLosses {
  double task_teacher = 0.0;
  double task_student = 0.0;
  double distill = 0.0;
};

// task losses are image MSEs; the distillation term is the KL between the
// softmax-normalized received latents, scaled by 1/(L_teacher+L_student+eps).
inline SkdLosses skd_losses(const Image& original, const Image& teacher_out,
                            const Image& student_out,
                            const Eigen::MatrixXd& teacher_latents,
                            const Eigen::MatrixXd& student_latents,
                            double eps = 1e-6) {
  require(eps > 0.0, "skd_losses: eps must be positive");
  SkdLosses l;
  l.task_teacher = mse(original, teacher_out);
  l.task_student = mse(original, student_out);
  const double kl = kl_divergence(softmax_flat(teacher_latents),
                                  softmax_flat(student_latents));
  l.distill = kl / (l.task_teacher + l.task_student + eps);
  return l;
}

struct ChannelTrainConfig {
  channel::FadingModel model = channel::FadingModel::awgn;
  double k_factor = 3.0;
  double snr_db_lo = 0.0;   // per-step snr drawn uniformly from [lo, hi]
  double snr_db_hi = 25.0;
};

struct SkdTrainOptions {
  double lr = 2e-3;
  double lr_decay = 0.97;           // per-epoch multiplicative decay
  double student_lr_factor = 0.1;   // shared-weight rate in the student step
  double kd_eps = 1e-6;
  double kd_weight_cap = 0.05;      // bounds the adaptive 1/(Lt+Ls+eps) factor
  double warmup_fraction = 0.35;    // leading teacher-only epochs
  double clip_norm = 1.0;           // global gradient clip per step
  bool verbose = false;
};

struct TrainResult {
  std::vector<double> teacher_loss;  // per epoch means
  std::vector<double> student_loss;
};

template <class Sc = float>
TrainResult train_codec(CodecModel<Sc>& model, const std::vector<Image>& images,
                        int epochs, const ChannelTrainConfig& chan,
                        std::uint64_t seed,
                        const SkdTrainOptions& opt = SkdTrainOptions{}) {
  require(epochs >= 1, "train_codec: epochs must be >= 1");
  require(!images.empty(), "train_codec: empty dataset");
  const auto& cfg = model.cfg;
  std::vector<Mat<Sc>> patches;
  patches.reserve(images.size());
  for (const auto& im : images)
    patches.push_back(image_to_patches<Sc>(im, cfg));

  Rng rng(seed ^ 0x7c0dec11u);
  nn::Adam<Sc> adam_teacher(static_cast<Sc>(opt.lr));
  nn::Adam<Sc> adam_student(static_cast<Sc>(opt.lr));
  // the student step trains its mask head at full rate but only nudges the
  // weights shared with the teacher
  adam_student.lr_scales.assign(model.store.params.size(),
                                static_cast<Sc>(opt.student_lr_factor));
  for (std::size_t i = 0; i < model.store.params.size(); ++i)
    if (model.store.params[i] == model.mask_head.W ||
        model.store.params[i] == model.mask_head.b)
      adam_student.lr_scales[i] = Sc(1);
  std::vector<std::size_t> order(images.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  TrainResult result;
  const long n_real = long(cfg.tokens()) * cfg.d_c;
  const int warmup = static_cast<int>(opt.warmup_fraction * epochs);
  for (int epoch = 0; epoch < epochs; ++epoch) {
    rng.shuffle(order);
    const double decay = std::pow(opt.lr_decay, epoch);
    adam_teacher.lr = static_cast<Sc>(opt.lr * decay);
    adam_student.lr = static_cast<Sc>(opt.lr * decay);
    const bool student_active = epoch >= warmup;
    double teacher_acc = 0.0, student_acc = 0.0;
    for (std::size_t step = 0; step < order.size(); ++step) {
      const auto& rows = patches[order[step]];
      const double snr = rng.uniform(chan.snr_db_lo, chan.snr_db_hi);
      const auto noise = effective_channel_noise(n_real, chan.model,
                                                 chan.k_factor, snr,
                                                 rng.next_u64());
      auto target = nn::constant<Sc>(rows);

      // teacher pass: mask head bypassed
      model.store.zero_grad();
      auto teacher = model.forward(rows, ForwardMode::teacher, noise);
      auto l_teacher = nn::mse_loss(teacher.patches_hat, target);
      const double lt = l_teacher->value(0, 0);
      if (!std::isfinite(lt))
        throw training_error("train_codec: teacher loss diverged at epoch " +
                             std::to_string(epoch));
      nn::backward(l_teacher);
      nn::clip_grad_norm(model.store, static_cast<Sc>(opt.clip_norm));
      adam_teacher.step(model.store);
      teacher_acc += lt;
      if (!student_active) {
        student_acc += lt;
        continue;
      }

      // student pass: keep-mask active, distilled toward the teacher's
      // received latents (held constant here). The adaptive 1/(Lt+Ls+eps)
      // factor is applied as a detached, capped weight: differentiating
      // through it rewards inflating the task loss, and uncapped it blows
      // up as both task losses approach zero.
      model.store.zero_grad();
      auto student = model.forward(rows, ForwardMode::student, noise);
      auto l_student = nn::mse_loss(student.patches_hat, target);
      const double ls = l_student->value(0, 0);
      auto teach_latents = nn::constant<Sc>(teacher.latents_hat->value);
      auto kl = nn::kl_softmax(teach_latents, student.latents_hat);
      const double kd_weight =
          std::min(1.0 / (lt + ls + opt.kd_eps), opt.kd_weight_cap);
      auto loss = nn::add(l_student, nn::scale(kl, static_cast<Sc>(kd_weight)));
      if (!std::isfinite(loss->value(0, 0)))
        throw training_error("train_codec: student loss diverged at epoch " +
                             std::to_string(epoch));
      nn::backward(loss);
      nn::clip_grad_norm(model.store, static_cast<Sc>(opt.clip_norm));
      adam_student.step(model.store);
      student_acc += ls;
    }
    result.teacher_loss.push_back(teacher_acc / order.size());
    result.student_loss.push_back(student_acc / order.size());
    if (opt.verbose)
      std::fprintf(stderr, "[train-codec] epoch %d teacher %.5f student %.5f\n",
                   epoch, result.teacher_loss.back(),
                   result.student_loss.back());
  }
  return result;
}

// One full trip image -> codec -> channel -> codec -> image at a fixed
// SNR, equalizing with the supplied channel estimate.
template <class Sc>
Image run_codec_link(const CodecModel<Sc>& model, const Image& input,
                     ForwardMode mode, const channel::ChannelRealization& chan,
                     const channel::CMat& h_estimate, double snr_db,
                     std::uint64_t seed, SemanticPayload* payload_out = nullptr) {
  const auto& cfg = model.cfg;
  auto [semantics, logits] = model.encode(input);
  Eigen::MatrixXd latents = semantics;
  std::vector<std::uint8_t> mask(cfg.tokens(), 1);
  int kept = cfg.tokens();
  if (mode == ForwardMode::student) {
    mask = keep_mask(logits, cfg.keep_rate);
    latents = compress(semantics, mask);
    kept = cfg.keep_count();
  }
  if (payload_out) *payload_out = pack_payload(latents, mask, cfg);
  Eigen::VectorXd x = model.channel_encode(latents, kept);
  Eigen::VectorXd y = channel::transmit(x, chan, snr_db, seed);
  Eigen::VectorXd eq = channel::equalize(y, h_estimate,
                                         chan.matrix_mode
                                             ? channel::EqualizeMode::pseudo_inverse
                                             : channel::EqualizeMode::elementwise);
  Image out = model.decode(model.channel_decode(eq));
  out.clamp01();
  return out;
}

}  // namespace sc3d::codec

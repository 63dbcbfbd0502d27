// First-order optimizers over a ParamStore.
#pragma once

#include <cmath>
#include <vector>

#include "sc3d/nn/layers.hpp"

namespace sc3d::nn {

template <class S>
struct Sgd {
  S lr;
  S momentum = S(0);
  std::vector<Mat<S>> velocity;

  explicit Sgd(S lr, S momentum = S(0)) : lr(lr), momentum(momentum) {}

  void step(ParamStore<S>& store) {
    if (momentum > S(0) && velocity.empty())
      for (const auto& p : store.params)
        velocity.push_back(Mat<S>::Zero(p->value.rows(), p->value.cols()));
    for (std::size_t i = 0; i < store.params.size(); ++i) {
      auto& p = *store.params[i];
      p.ensure_grad();
      if (momentum > S(0)) {
        velocity[i] = momentum * velocity[i] + p.grad;
        p.value -= lr * velocity[i];
      } else {
        p.value -= lr * p.grad;
      }
    }
  }
};

// Rescales all gradients so their global norm is at most max_norm.
template <class S>
void clip_grad_norm(ParamStore<S>& store, S max_norm) {
  double total = 0.0;
  for (const auto& p : store.params) total += double(p->grad.squaredNorm());
  const double norm = std::sqrt(total);
  if (norm <= double(max_norm) || norm == 0.0) return;
  const S scale = S(double(max_norm) / norm);
  for (auto& p : store.params) p->grad *= scale;
}

template <class S>
struct Adam {
  S lr;
  S beta1 = S(0.9), beta2 = S(0.999), eps = S(1e-8);
  long t = 0;
  std::vector<Mat<S>> m, v;
  std::vector<S> lr_scales;  // optional per-parameter multipliers

  explicit Adam(S lr) : lr(lr) {}

  void step(ParamStore<S>& store) {
    if (m.empty())
      for (const auto& p : store.params) {
        m.push_back(Mat<S>::Zero(p->value.rows(), p->value.cols()));
        v.push_back(Mat<S>::Zero(p->value.rows(), p->value.cols()));
      }
    ++t;
    const S bc1 = S(1) - std::pow(beta1, S(t));
    const S bc2 = S(1) - std::pow(beta2, S(t));
    for (std::size_t i = 0; i < store.params.size(); ++i) {
      auto& p = *store.params[i];
      p.ensure_grad();
      m[i] = beta1 * m[i] + (S(1) - beta1) * p.grad;
      v[i] = (beta2 * v[i].array() +
              (S(1) - beta2) * p.grad.array().square())
                 .matrix();
      Arr<S> mh = m[i].array() / bc1;
      Arr<S> vh = v[i].array() / bc2;
      const S step_lr = i < lr_scales.size() ? lr * lr_scales[i] : lr;
      p.value.array() -= step_lr * mh / (vh.sqrt() + eps);
    }
  }
};

}  // namespace sc3d::nn

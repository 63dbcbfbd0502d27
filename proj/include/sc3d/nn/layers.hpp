// Parameter containers and layer helpers built on the autodiff ops.
#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "sc3d/nn/autodiff.hpp"
#include "sc3d/rng.hpp"

namespace sc3d::nn {

template <class S>
Mat<S> glorot(int rows, int cols, Rng& rng) {
  const double s = std::sqrt(6.0 / double(rows + cols));
  Mat<S> m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j)
      m(i, j) = static_cast<S>(rng.uniform(-s, s));
  return m;
}

template <class S>
struct ParamStore {
  std::vector<Var<S>> params;

  Var<S> add(Mat<S> init) {
    params.push_back(param<S>(std::move(init)));
    return params.back();
  }
  void zero_grad() {
    for (auto& p : params) p->zero_grad();
  }
  long count() const {
    long n = 0;
    for (const auto& p : params) n += p->value.size();
    return n;
  }
  std::uint64_t checksum() const {
    std::uint64_t h = 1469598103934665603ull;
    for (const auto& p : params)
      h = fnv1a(p->value.data(), sizeof(S) * p->value.size(), h);
    return h;
  }
  std::vector<S> flatten() const {
    std::vector<S> out;
    out.reserve(count());
    for (const auto& p : params)
      out.insert(out.end(), p->value.data(), p->value.data() + p->value.size());
    return out;
  }
  void unflatten(const std::vector<S>& flat) {
    std::size_t off = 0;
    for (auto& p : params) {
      require(off + p->value.size() <= flat.size(), "unflatten: size mismatch");
      std::copy(flat.begin() + off, flat.begin() + off + p->value.size(),
                p->value.data());
      off += p->value.size();
    }
    require(off == flat.size(), "unflatten: size mismatch");
  }
};

template <class S>
struct Dense {
  Var<S> W, b;

  static Dense create(ParamStore<S>& store, int in, int out, Rng& rng) {
    Dense d;
    d.W = store.add(glorot<S>(in, out, rng));
    d.b = store.add(Mat<S>::Zero(1, out));
    return d;
  }
  Var<S> operator()(Var<S> x) const { return add_rowvec(matmul(x, W), b); }
};

// 3x3-style conv on channels-as-rows maps; weight is Cout x (Cin*k*k).
template <class S>
struct Conv2d {
  Var<S> W, b;
  int cin = 0, cout = 0, k = 3, stride = 1, pad = 1;

  static Conv2d create(ParamStore<S>& store, int cin, int cout, int k,
                       int stride, int pad, Rng& rng) {
    Conv2d c;
    c.cin = cin;
    c.cout = cout;
    c.k = k;
    c.stride = stride;
    c.pad = pad;
    c.W = store.add(glorot<S>(cout, cin * k * k, rng));
    c.b = store.add(Mat<S>::Zero(cout, 1));
    return c;
  }

  // Returns the output map and its spatial size.
  Var<S> operator()(Var<S> x, int H, int W_in, int& Ho, int& Wo) const {
    Ho = (H + 2 * pad - k) / stride + 1;
    Wo = (W_in + 2 * pad - k) / stride + 1;
    auto cols = im2col(x, cin, H, W_in, k, stride, pad);
    return add_colvec(matmul(W, cols), b);
  }
};

// Pre-norm multi-head self-attention block with a two-layer feed-forward.
template <class S>
struct TransformerBlock {
  Dense<S> wq, wk, wv, wo, ff1, ff2;
  Var<S> ln1_g, ln1_b, ln2_g, ln2_b;
  int heads = 4, dim = 0;

  static TransformerBlock create(ParamStore<S>& store, int dim, int heads,
                                 int ff_hidden, Rng& rng) {
    TransformerBlock t;
    t.dim = dim;
    t.heads = heads;
    t.wq = Dense<S>::create(store, dim, dim, rng);
    t.wk = Dense<S>::create(store, dim, dim, rng);
    t.wv = Dense<S>::create(store, dim, dim, rng);
    t.wo = Dense<S>::create(store, dim, dim, rng);
    t.ff1 = Dense<S>::create(store, dim, ff_hidden, rng);
    t.ff2 = Dense<S>::create(store, ff_hidden, dim, rng);
    t.ln1_g = store.add(Mat<S>::Ones(1, dim));
    t.ln1_b = store.add(Mat<S>::Zero(1, dim));
    t.ln2_g = store.add(Mat<S>::Ones(1, dim));
    t.ln2_b = store.add(Mat<S>::Zero(1, dim));
    return t;
  }

  Var<S> operator()(Var<S> x) const {
    auto h = add_rowvec(mul_rowvec(layer_norm_rows(x), ln1_g), ln1_b);
    auto q = wq(h), k = wk(h), v = wv(h);
    const int dh = dim / heads;
    const S inv_sqrt = S(1) / std::sqrt(S(dh));
    Var<S> attn_out;
    for (int hd = 0; hd < heads; ++hd) {
      auto qh = slice_cols(q, hd * dh, dh);
      auto kh = slice_cols(k, hd * dh, dh);
      auto vh = slice_cols(v, hd * dh, dh);
      auto scores = scale(matmul(qh, transpose_(kh)), inv_sqrt);
      auto head = matmul(softmax_rows(scores), vh);
      attn_out = hd == 0 ? head : concat_cols(attn_out, head);
    }
    x = add(x, wo(attn_out));
    auto h2 = add_rowvec(mul_rowvec(layer_norm_rows(x), ln2_g), ln2_b);
    return add(x, ff2(relu(ff1(h2))));
  }
};

// Scaled dot-product attention: softmax(Q K^T / sqrt(d)) V.
template <class S>
Var<S> attention(Var<S> q, Var<S> k, Var<S> v, S d) {
  require(d > S(0), "attention: adjustment factor must be positive");
  auto scores = scale(matmul(q, transpose_(k)), S(1) / std::sqrt(d));
  return matmul(softmax_rows(scores), v);
}

}  // namespace sc3d::nn

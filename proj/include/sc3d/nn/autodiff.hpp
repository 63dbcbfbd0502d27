// Reverse-mode autodiff over dense Eigen matrices.
//
// Define-by-run: each op returns a shared node holding the forward value and
// a closure that scatters the node's gradient into its parents. Graphs are
// rebuilt every step; parameters are long-lived leaf nodes. Subgraphs that
// cannot reach a parameter carry no closures.
#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <unordered_set>
#include <utility>
#include <vector>

#include "sc3d/common.hpp"

namespace sc3d::nn {

template <class S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <class S>
using Arr = Eigen::Array<S, Eigen::Dynamic, Eigen::Dynamic>;

template <class S>
struct Node {
  Mat<S> value;
  Mat<S> grad;
  bool needs_grad = false;
  std::vector<std::shared_ptr<Node<S>>> parents;
  std::function<void(Node<S>&)> backward_fn;

  void ensure_grad() {
    if (grad.rows() != value.rows() || grad.cols() != value.cols())
      grad = Mat<S>::Zero(value.rows(), value.cols());
  }
  void zero_grad() { grad = Mat<S>::Zero(value.rows(), value.cols()); }
};

template <class S>
using Var = std::shared_ptr<Node<S>>;

template <class S>
Var<S> constant(Mat<S> v) {
  auto n = std::make_shared<Node<S>>();
  n->value = std::move(v);
  return n;
}

template <class S>
Var<S> param(Mat<S> v) {
  auto n = std::make_shared<Node<S>>();
  n->value = std::move(v);
  n->needs_grad = true;
  n->ensure_grad();
  return n;
}

namespace detail {

template <class S>
Var<S> make(Mat<S> value, std::vector<Var<S>> parents,
            std::function<void(Node<S>&)> back) {
  auto n = std::make_shared<Node<S>>();
  n->value = std::move(value);
  for (const auto& p : parents)
    if (p->needs_grad) n->needs_grad = true;
  if (n->needs_grad) {
    n->parents = std::move(parents);
    n->backward_fn = std::move(back);
  }
  return n;
}

template <class S>
void accumulate(const Var<S>& p, const Mat<S>& g) {
  if (!p->needs_grad) return;
  p->ensure_grad();
  p->grad += g;
}

}  // namespace detail

// Runs backprop from a scalar root. Post-order DFS gives a topological
// order of the DAG; closures fire in reverse.
template <class S>
void backward(const Var<S>& root) {
  require(root->value.size() == 1, "backward: root must be scalar");
  root->ensure_grad();
  root->grad(0, 0) = S(1);
  std::vector<Node<S>*> order;
  std::unordered_set<Node<S>*> seen;
  std::vector<std::pair<Node<S>*, std::size_t>> stack{{root.get(), 0}};
  seen.insert(root.get());
  while (!stack.empty()) {
    auto& [node, idx] = stack.back();
    if (idx < node->parents.size()) {
      Node<S>* p = node->parents[idx++].get();
      if (p->needs_grad && seen.insert(p).second) stack.push_back({p, 0});
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  for (auto it = order.rbegin(); it != order.rend(); ++it)
    if ((*it)->backward_fn) (*it)->backward_fn(**it);
}

// ---- arithmetic -------------------------------------------------------------

template <class S>
Var<S> matmul(Var<S> a, Var<S> b) {
  Mat<S> v = a->value * b->value;
  return detail::make<S>(std::move(v), {a, b}, [a, b](Node<S>& n) {
    detail::accumulate<S>(a, n.grad * b->value.transpose());
    detail::accumulate<S>(b, a->value.transpose() * n.grad);
  });
}

template <class S>
Var<S> add(Var<S> a, Var<S> b) {
  return detail::make<S>(a->value + b->value, {a, b}, [a, b](Node<S>& n) {
    detail::accumulate<S>(a, n.grad);
    detail::accumulate<S>(b, n.grad);
  });
}

template <class S>
Var<S> sub(Var<S> a, Var<S> b) {
  return detail::make<S>(a->value - b->value, {a, b}, [a, b](Node<S>& n) {
    detail::accumulate<S>(a, n.grad);
    detail::accumulate<S>(b, Mat<S>(-n.grad));
  });
}

template <class S>
Var<S> mul(Var<S> a, Var<S> b) {
  Mat<S> v = a->value.cwiseProduct(b->value);
  return detail::make<S>(std::move(v), {a, b}, [a, b](Node<S>& n) {
    detail::accumulate<S>(a, n.grad.cwiseProduct(b->value));
    detail::accumulate<S>(b, n.grad.cwiseProduct(a->value));
  });
}

template <class S>
Var<S> scale(Var<S> a, S k) {
  return detail::make<S>(Mat<S>(a->value * k), {a}, [a, k](Node<S>& n) {
    detail::accumulate<S>(a, Mat<S>(n.grad * k));
  });
}

template <class S>
Var<S> add_scalar(Var<S> a, S k) {
  return detail::make<S>(Mat<S>(a->value.array() + k), {a}, [a](Node<S>& n) {
    detail::accumulate<S>(a, n.grad);
  });
}

// Broadcast a 1x1 node over a matrix node.
template <class S>
Var<S> mul_scalar_node(Var<S> a, Var<S> s) {
  require(s->value.size() == 1, "mul_scalar_node: s must be 1x1");
  const S k = s->value(0, 0);
  return detail::make<S>(Mat<S>(a->value * k), {a, s}, [a, s, k](Node<S>& n) {
    detail::accumulate<S>(a, Mat<S>(n.grad * k));
    Mat<S> gs(1, 1);
    gs(0, 0) = n.grad.cwiseProduct(a->value).sum();
    detail::accumulate<S>(s, gs);
  });
}

// Adds a 1xF row vector to every row.
template <class S>
Var<S> add_rowvec(Var<S> a, Var<S> v) {
  Mat<S> out = a->value;
  out.rowwise() += Eigen::Matrix<S, 1, Eigen::Dynamic>(v->value.row(0));
  return detail::make<S>(std::move(out), {a, v}, [a, v](Node<S>& n) {
    detail::accumulate<S>(a, n.grad);
    detail::accumulate<S>(v, Mat<S>(n.grad.colwise().sum()));
  });
}

// Adds a Cx1 column vector to every column.
template <class S>
Var<S> add_colvec(Var<S> a, Var<S> v) {
  Mat<S> out = a->value;
  out.colwise() += Eigen::Matrix<S, Eigen::Dynamic, 1>(v->value.col(0));
  return detail::make<S>(std::move(out), {a, v}, [a, v](Node<S>& n) {
    detail::accumulate<S>(a, n.grad);
    detail::accumulate<S>(v, Mat<S>(n.grad.rowwise().sum()));
  });
}

// Multiplies every row elementwise by a 1xF row vector.
template <class S>
Var<S> mul_rowvec(Var<S> a, Var<S> v) {
  Mat<S> out =
      a->value.array().rowwise() * v->value.row(0).array();
  return detail::make<S>(std::move(out), {a, v}, [a, v](Node<S>& n) {
    detail::accumulate<S>(
        a, Mat<S>(n.grad.array().rowwise() * v->value.row(0).array()));
    detail::accumulate<S>(
        v, Mat<S>(n.grad.cwiseProduct(a->value).colwise().sum()));
  });
}

// Scales row i by v(i) (v is Nx1). Used for per-token mask gating.
template <class S>
Var<S> scale_rows(Var<S> a, Var<S> v) {
  Mat<S> out = a->value.array().colwise() * v->value.col(0).array();
  return detail::make<S>(std::move(out), {a, v}, [a, v](Node<S>& n) {
    detail::accumulate<S>(
        a, Mat<S>(n.grad.array().colwise() * v->value.col(0).array()));
    detail::accumulate<S>(
        v, Mat<S>(n.grad.cwiseProduct(a->value).rowwise().sum()));
  });
}

// ---- elementwise nonlinearities ---------------------------------------------

template <class S>
Var<S> relu(Var<S> a) {
  Mat<S> v = a->value.cwiseMax(S(0));
  return detail::make<S>(std::move(v), {a}, [a](Node<S>& n) {
    Mat<S> g = (a->value.array() > S(0)).template cast<S>() * n.grad.array();
    detail::accumulate<S>(a, g);
  });
}

template <class S>
Var<S> leaky_relu(Var<S> a, S slope = S(0.2)) {
  Arr<S> x = a->value.array();
  Mat<S> v = (x >= S(0)).select(x, x * slope);
  return detail::make<S>(std::move(v), {a}, [a, slope](Node<S>& n) {
    Arr<S> m = (a->value.array() >= S(0))
                   .select(Arr<S>::Constant(a->value.rows(), a->value.cols(), S(1)),
                           Arr<S>::Constant(a->value.rows(), a->value.cols(), slope));
    detail::accumulate<S>(a, Mat<S>(n.grad.array() * m));
  });
}

template <class S>
Var<S> sigmoid(Var<S> a) {
  Mat<S> v = (S(1) / (S(1) + (-a->value.array()).exp())).matrix();
  auto out = detail::make<S>(std::move(v), {a}, nullptr);
  if (out->needs_grad) {
    Mat<S> y = out->value;
    out->backward_fn = [a, y](Node<S>& n) {
      detail::accumulate<S>(
          a, Mat<S>(n.grad.array() * y.array() * (S(1) - y.array())));
    };
  }
  return out;
}

template <class S>
Var<S> tanh_(Var<S> a) {
  Mat<S> v = a->value.array().tanh();
  auto out = detail::make<S>(std::move(v), {a}, nullptr);
  if (out->needs_grad) {
    Mat<S> y = out->value;
    out->backward_fn = [a, y](Node<S>& n) {
      detail::accumulate<S>(
          a, Mat<S>(n.grad.array() * (S(1) - y.array().square())));
    };
  }
  return out;
}

template <class S>
Var<S> softplus(Var<S> a) {
  Arr<S> x = a->value.array();
  Mat<S> v = (x > S(20)).select(x, (S(1) + x.exp()).log());
  return detail::make<S>(std::move(v), {a}, [a](Node<S>& n) {
    Arr<S> s = S(1) / (S(1) + (-a->value.array()).exp());
    detail::accumulate<S>(a, Mat<S>(n.grad.array() * s));
  });
}

template <class S>
Var<S> exp_(Var<S> a) {
  Mat<S> v = a->value.array().exp();
  auto out = detail::make<S>(std::move(v), {a}, nullptr);
  if (out->needs_grad) {
    Mat<S> y = out->value;
    out->backward_fn = [a, y](Node<S>& n) {
      detail::accumulate<S>(a, Mat<S>(n.grad.cwiseProduct(y)));
    };
  }
  return out;
}

template <class S>
Var<S> log_(Var<S> a) {
  Mat<S> v = a->value.array().log();
  return detail::make<S>(std::move(v), {a}, [a](Node<S>& n) {
    detail::accumulate<S>(a, Mat<S>(n.grad.array() / a->value.array()));
  });
}

template <class S>
Var<S> square(Var<S> a) {
  Mat<S> v = a->value.array().square();
  return detail::make<S>(std::move(v), {a}, [a](Node<S>& n) {
    detail::accumulate<S>(a, Mat<S>(S(2) * n.grad.cwiseProduct(a->value)));
  });
}

template <class S>
Var<S> abs_(Var<S> a) {
  Mat<S> v = a->value.cwiseAbs();
  return detail::make<S>(std::move(v), {a}, [a](Node<S>& n) {
    Arr<S> sgn = (a->value.array() > S(0)).template cast<S>() -
                 (a->value.array() < S(0)).template cast<S>();
    detail::accumulate<S>(a, Mat<S>(n.grad.array() * sgn));
  });
}

template <class S>
Var<S> pow_scalar(Var<S> a, S p) {
  Mat<S> v = a->value.array().pow(p);
  return detail::make<S>(std::move(v), {a}, [a, p](Node<S>& n) {
    detail::accumulate<S>(
        a, Mat<S>(n.grad.array() * p * a->value.array().pow(p - S(1))));
  });
}

// ---- reductions and shape ops -----------------------------------------------

template <class S>
Var<S> sum_all(Var<S> a) {
  Mat<S> v(1, 1);
  v(0, 0) = a->value.sum();
  return detail::make<S>(std::move(v), {a}, [a](Node<S>& n) {
    detail::accumulate<S>(
        a, Mat<S>(Mat<S>::Constant(a->value.rows(), a->value.cols(),
                                   n.grad(0, 0))));
  });
}

template <class S>
Var<S> mean_all(Var<S> a) {
  const S inv = S(1) / S(a->value.size());
  Mat<S> v(1, 1);
  v(0, 0) = a->value.sum() * inv;
  return detail::make<S>(std::move(v), {a}, [a, inv](Node<S>& n) {
    detail::accumulate<S>(
        a, Mat<S>(Mat<S>::Constant(a->value.rows(), a->value.cols(),
                                   n.grad(0, 0) * inv)));
  });
}

template <class S>
Var<S> row_sum(Var<S> a) {
  Mat<S> v = a->value.rowwise().sum();
  return detail::make<S>(std::move(v), {a}, [a](Node<S>& n) {
    detail::accumulate<S>(
        a, Mat<S>(n.grad.col(0).replicate(1, a->value.cols())));
  });
}

template <class S>
Var<S> transpose_(Var<S> a) {
  return detail::make<S>(Mat<S>(a->value.transpose()), {a}, [a](Node<S>& n) {
    detail::accumulate<S>(a, Mat<S>(n.grad.transpose()));
  });
}

template <class S>
Var<S> concat_cols(Var<S> a, Var<S> b) {
  Mat<S> v(a->value.rows(), a->value.cols() + b->value.cols());
  v << a->value, b->value;
  return detail::make<S>(std::move(v), {a, b}, [a, b](Node<S>& n) {
    detail::accumulate<S>(a, Mat<S>(n.grad.leftCols(a->value.cols())));
    detail::accumulate<S>(b, Mat<S>(n.grad.rightCols(b->value.cols())));
  });
}

template <class S>
Var<S> concat_rows(Var<S> a, Var<S> b) {
  Mat<S> v(a->value.rows() + b->value.rows(), a->value.cols());
  v << a->value, b->value;
  return detail::make<S>(std::move(v), {a, b}, [a, b](Node<S>& n) {
    detail::accumulate<S>(a, Mat<S>(n.grad.topRows(a->value.rows())));
    detail::accumulate<S>(b, Mat<S>(n.grad.bottomRows(b->value.rows())));
  });
}

template <class S>
Var<S> slice_cols(Var<S> a, int start, int n_cols) {
  Mat<S> v = a->value.middleCols(start, n_cols);
  return detail::make<S>(std::move(v), {a}, [a, start, n_cols](Node<S>& n) {
    Mat<S> g = Mat<S>::Zero(a->value.rows(), a->value.cols());
    g.middleCols(start, n_cols) = n.grad;
    detail::accumulate<S>(a, g);
  });
}

template <class S>
Var<S> slice_rows(Var<S> a, int start, int n_rows) {
  Mat<S> v = a->value.middleRows(start, n_rows);
  return detail::make<S>(std::move(v), {a}, [a, start, n_rows](Node<S>& n) {
    Mat<S> g = Mat<S>::Zero(a->value.rows(), a->value.cols());
    g.middleRows(start, n_rows) = n.grad;
    detail::accumulate<S>(a, g);
  });
}

// Row-major reshape.
template <class S>
Var<S> reshape_rm(Var<S> a, int rows, int cols) {
  require(static_cast<long>(rows) * cols == a->value.size(),
          "reshape_rm: size mismatch");
  const int ac = static_cast<int>(a->value.cols());
  Mat<S> v(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) {
      const long f = static_cast<long>(i) * cols + j;
      v(i, j) = a->value(f / ac, f % ac);
    }
  return detail::make<S>(std::move(v), {a}, [a, rows, cols, ac](Node<S>& n) {
    Mat<S> g = Mat<S>::Zero(a->value.rows(), a->value.cols());
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < cols; ++j) {
        const long f = static_cast<long>(i) * cols + j;
        g(f / ac, f % ac) += n.grad(i, j);
      }
    detail::accumulate<S>(a, g);
  });
}

// y(i,j) = sum_{k<j} a(i,k); used for accumulated optical depth.
template <class S>
Var<S> exclusive_cumsum_rows(Var<S> a) {
  const int R = static_cast<int>(a->value.rows());
  const int C = static_cast<int>(a->value.cols());
  Mat<S> v(R, C);
  for (int i = 0; i < R; ++i) {
    S acc = S(0);
    for (int j = 0; j < C; ++j) {
      v(i, j) = acc;
      acc += a->value(i, j);
    }
  }
  return detail::make<S>(std::move(v), {a}, [a, R, C](Node<S>& n) {
    Mat<S> g(R, C);
    for (int i = 0; i < R; ++i) {
      S acc = S(0);
      for (int j = C - 1; j >= 0; --j) {
        g(i, j) = acc;   // gradient flows from strictly later columns
        acc += n.grad(i, j);
      }
    }
    detail::accumulate<S>(a, g);
  });
}

// ---- softmax family -----------------------------------------------------------

template <class S>
Var<S> softmax_rows(Var<S> a) {
  Mat<S> v = a->value;
  for (int i = 0; i < v.rows(); ++i) {
    const S m = v.row(i).maxCoeff();
    Arr<S> e = (v.row(i).array() - m).exp();
    v.row(i) = (e / e.sum()).matrix();
  }
  auto out = detail::make<S>(std::move(v), {a}, nullptr);
  if (out->needs_grad) {
    Mat<S> y = out->value;
    out->backward_fn = [a, y](Node<S>& n) {
      Mat<S> g(y.rows(), y.cols());
      for (int i = 0; i < y.rows(); ++i) {
        const S dot = n.grad.row(i).dot(y.row(i));
        g.row(i) =
            (y.row(i).array() * (n.grad.row(i).array() - dot)).matrix();
      }
      detail::accumulate<S>(a, g);
    };
  }
  return out;
}

template <class S>
Var<S> log_softmax_rows(Var<S> a) {
  Mat<S> v = a->value;
  for (int i = 0; i < v.rows(); ++i) {
    const S m = v.row(i).maxCoeff();
    const S lse = std::log((v.row(i).array() - m).exp().sum()) + m;
    v.row(i).array() -= lse;
  }
  auto out = detail::make<S>(std::move(v), {a}, nullptr);
  if (out->needs_grad) {
    Mat<S> y = out->value;
    out->backward_fn = [a, y](Node<S>& n) {
      Mat<S> g(y.rows(), y.cols());
      for (int i = 0; i < y.rows(); ++i) {
        const S gs = n.grad.row(i).sum();
        g.row(i) =
            (n.grad.row(i).array() - y.row(i).array().exp() * gs).matrix();
      }
      detail::accumulate<S>(a, g);
    };
  }
  return out;
}

// Per-row standardization: (x - mean) / sqrt(var + eps).
template <class S>
Var<S> layer_norm_rows(Var<S> a, S eps = S(1e-5)) {
  const int R = static_cast<int>(a->value.rows());
  const int C = static_cast<int>(a->value.cols());
  Mat<S> y(R, C);
  Eigen::Matrix<S, Eigen::Dynamic, 1> inv_sd(R);
  for (int i = 0; i < R; ++i) {
    const S mu = a->value.row(i).mean();
    const S var = (a->value.row(i).array() - mu).square().mean();
    inv_sd(i) = S(1) / std::sqrt(var + eps);
    y.row(i) = ((a->value.row(i).array() - mu) * inv_sd(i)).matrix();
  }
  auto out = detail::make<S>(std::move(y), {a}, nullptr);
  if (out->needs_grad) {
    Mat<S> yn = out->value;
    out->backward_fn = [a, yn, inv_sd, C](Node<S>& n) {
      Mat<S> g(yn.rows(), yn.cols());
      for (int i = 0; i < yn.rows(); ++i) {
        const S gm = n.grad.row(i).mean();
        const S gy = n.grad.row(i).cwiseProduct(yn.row(i)).mean();
        g.row(i) = ((n.grad.row(i).array() - gm - yn.row(i).array() * gy) *
                    inv_sd(i))
                       .matrix();
      }
      detail::accumulate<S>(a, g);
    };
  }
  return out;
}

// Hard top-k over a column of logits with straight-through gradient:
// forward emits exact {0,1} values, backward passes the incoming gradient
// to the logits scaled by grad_scale. Ties break toward the lower index.
template <class S>
Var<S> ste_topk_mask(Var<S> logits, int k, S grad_scale = S(1)) {
  const int n = static_cast<int>(logits->value.rows());
  require(logits->value.cols() == 1, "ste_topk_mask: logits must be Nx1");
  require(k >= 0 && k <= n, "ste_topk_mask: k out of range");
  std::vector<int> idx(n);
  for (int i = 0; i < n; ++i) idx[i] = i;
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
    return logits->value(a, 0) > logits->value(b, 0);
  });
  Mat<S> v = Mat<S>::Zero(n, 1);
  for (int i = 0; i < k; ++i) v(idx[i], 0) = S(1);
  return detail::make<S>(std::move(v), {logits},
                         [logits, grad_scale](Node<S>& n) {
    detail::accumulate<S>(logits, Mat<S>(n.grad * grad_scale));
  });
}

// ---- conv plumbing ------------------------------------------------------------

// Input layout: channels as rows, row-major pixels as columns (C x H*W).
// Output: (C*kh*kw) x (Ho*Wo) patch matrix; zero padding.
template <class S>
Var<S> im2col(Var<S> a, int C, int H, int W, int k, int stride, int pad) {
  const int Ho = (H + 2 * pad - k) / stride + 1;
  const int Wo = (W + 2 * pad - k) / stride + 1;
  require(a->value.rows() == C && a->value.cols() == long(H) * W,
          "im2col: layout mismatch");
  Mat<S> v = Mat<S>::Zero(long(C) * k * k, long(Ho) * Wo);
  for (int oy = 0; oy < Ho; ++oy)
    for (int ox = 0; ox < Wo; ++ox) {
      const long col = long(oy) * Wo + ox;
      for (int ky = 0; ky < k; ++ky)
        for (int kx = 0; kx < k; ++kx) {
          const int iy = oy * stride + ky - pad;
          const int ix = ox * stride + kx - pad;
          if (iy < 0 || iy >= H || ix < 0 || ix >= W) continue;
          for (int c = 0; c < C; ++c)
            v(long(c) * k * k + long(ky) * k + kx, col) =
                a->value(c, long(iy) * W + ix);
        }
    }
  return detail::make<S>(
      std::move(v), {a}, [a, C, H, W, k, stride, pad, Ho, Wo](Node<S>& n) {
        Mat<S> g = Mat<S>::Zero(C, long(H) * W);
        for (int oy = 0; oy < Ho; ++oy)
          for (int ox = 0; ox < Wo; ++ox) {
            const long col = long(oy) * Wo + ox;
            for (int ky = 0; ky < k; ++ky)
              for (int kx = 0; kx < k; ++kx) {
                const int iy = oy * stride + ky - pad;
                const int ix = ox * stride + kx - pad;
                if (iy < 0 || iy >= H || ix < 0 || ix >= W) continue;
                for (int c = 0; c < C; ++c)
                  g(c, long(iy) * W + ix) +=
                      n.grad(long(c) * k * k + long(ky) * k + kx, col);
              }
          }
        detail::accumulate<S>(a, g);
      });
}

// Nearest-neighbor 2x upsample of a C x H*W map.
template <class S>
Var<S> upsample2(Var<S> a, int C, int H, int W) {
  require(a->value.rows() == C && a->value.cols() == long(H) * W,
          "upsample2: layout mismatch");
  Mat<S> v(C, long(2 * H) * (2 * W));
  for (int c = 0; c < C; ++c)
    for (int y = 0; y < 2 * H; ++y)
      for (int x = 0; x < 2 * W; ++x)
        v(c, long(y) * 2 * W + x) = a->value(c, long(y / 2) * W + x / 2);
  return detail::make<S>(std::move(v), {a}, [a, C, H, W](Node<S>& n) {
    Mat<S> g = Mat<S>::Zero(C, long(H) * W);
    for (int c = 0; c < C; ++c)
      for (int y = 0; y < 2 * H; ++y)
        for (int x = 0; x < 2 * W; ++x)
          g(c, long(y / 2) * W + x / 2) += n.grad(c, long(y) * 2 * W + x);
    detail::accumulate<S>(a, g);
  });
}

// ---- composites ----------------------------------------------------------------

template <class S>
Var<S> mse_loss(Var<S> pred, Var<S> target) {
  require(pred->value.rows() == target->value.rows() &&
              pred->value.cols() == target->value.cols(),
          "mse_loss: shape mismatch");
  return mean_all(square(sub(pred, target)));
}

// KL(softmax(a) || softmax(b)), both flattened to one row.
template <class S>
Var<S> kl_softmax(Var<S> a, Var<S> b) {
  auto ra = reshape_rm(a, 1, static_cast<int>(a->value.size()));
  auto rb = reshape_rm(b, 1, static_cast<int>(b->value.size()));
  auto la = log_softmax_rows(ra);
  auto lb = log_softmax_rows(rb);
  return sum_all(mul(exp_(la), sub(la, lb)));
}

}  // namespace sc3d::nn

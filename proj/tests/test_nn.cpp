#include <catch2/catch_amalgamated.hpp>

#include "sc3d/nn/autodiff.hpp"
#include "sc3d/nn/layers.hpp"
#include "sc3d/nn/optim.hpp"

using namespace sc3d;
using namespace sc3d::nn;
using Md = Mat<double>;

namespace {

// Central-difference check of d(loss)/d(leaf) for a scalar-valued graph.
double max_rel_grad_error(const std::function<Var<double>()>& build,
                          Var<double> leaf, double h = 1e-6) {
  auto loss = build();
  leaf->zero_grad();
  for (auto* n : {leaf.get()}) (void)n;
  backward(loss);
  Md analytic = leaf->grad;
  double worst = 0.0;
  for (int i = 0; i < leaf->value.rows(); ++i)
    for (int j = 0; j < leaf->value.cols(); ++j) {
      const double keep = leaf->value(i, j);
      leaf->value(i, j) = keep + h;
      const double up = build()->value(0, 0);
      leaf->value(i, j) = keep - h;
      const double down = build()->value(0, 0);
      leaf->value(i, j) = keep;
      const double numeric = (up - down) / (2 * h);
      const double denom = std::max({std::abs(numeric), std::abs(analytic(i, j)), 1e-8});
      worst = std::max(worst, std::abs(numeric - analytic(i, j)) / denom);
    }
  return worst;
}

Md random_mat(int r, int c, Rng& rng, double scale = 1.0) {
  Md m(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) m(i, j) = rng.uniform(-scale, scale);
  return m;
}

}  // namespace

TEST_CASE("gradients of core ops match finite differences", "[nn]") {
  Rng rng(42);
  auto a = param<double>(random_mat(3, 4, rng));
  auto b = param<double>(random_mat(4, 5, rng));

  SECTION("matmul + bias + relu + mse") {
    auto bias = param<double>(random_mat(1, 5, rng, 0.1));
    Md target = random_mat(3, 5, rng);
    auto build = [&] {
      return mse_loss(relu(add_rowvec(matmul(a, b), bias)),
                      constant<double>(target));
    };
    REQUIRE(max_rel_grad_error(build, a) < 1e-6);
    REQUIRE(max_rel_grad_error(build, b) < 1e-6);
    REQUIRE(max_rel_grad_error(build, bias) < 1e-6);
  }
  SECTION("softmax rows") {
    Rng rng2(7);
    Md coeffs = random_mat(3, 4, rng2);
    auto build = [&] {
      auto sm = softmax_rows(a);
      return sum_all(mul(sm, constant<double>(coeffs)));
    };
    REQUIRE(max_rel_grad_error(build, a) < 1e-6);
  }
  SECTION("log softmax and kl") {
    auto c = param<double>(random_mat(3, 4, rng));
    auto build = [&] { return kl_softmax(a, c); };
    REQUIRE(max_rel_grad_error(build, a) < 1e-6);
    REQUIRE(max_rel_grad_error(build, c) < 1e-6);
  }
  SECTION("exclusive cumsum + exp") {
    auto build = [&] {
      return mean_all(exp_(scale(exclusive_cumsum_rows(a), -1.0)));
    };
    REQUIRE(max_rel_grad_error(build, a) < 1e-6);
  }
  SECTION("layer norm") {
    auto build = [&] { return mean_all(square(layer_norm_rows(a))); };
    REQUIRE(max_rel_grad_error(build, a, 1e-5) < 1e-5);
  }
  SECTION("softplus sigmoid tanh abs") {
    auto build = [&] {
      return mean_all(
          add(abs_(tanh_(a)), mul(softplus(a), sigmoid(a))));
    };
    REQUIRE(max_rel_grad_error(build, a) < 1e-6);
  }
  SECTION("reshape, slice, concat, transpose") {
    auto build = [&] {
      auto r = reshape_rm(a, 4, 3);
      auto s = slice_cols(r, 1, 2);
      auto t = transpose_(s);
      return mean_all(square(concat_cols(t, t)));
    };
    REQUIRE(max_rel_grad_error(build, a) < 1e-6);
  }
  SECTION("row ops") {
    auto v = param<double>(random_mat(1, 4, rng));
    auto w = param<double>(random_mat(3, 1, rng));
    auto build = [&] {
      return mean_all(square(scale_rows(mul_rowvec(a, v), w)));
    };
    REQUIRE(max_rel_grad_error(build, a) < 1e-6);
    REQUIRE(max_rel_grad_error(build, v) < 1e-6);
    REQUIRE(max_rel_grad_error(build, w) < 1e-6);
  }
  SECTION("scalar broadcast / power normalization") {
    Rng rng3(9);
    Md t = random_mat(3, 4, rng3);
    auto build = [&] {
      auto ms = mean_all(square(a));
      auto inv = pow_scalar(add_scalar(ms, 1e-9), -0.5);
      return mse_loss(mul_scalar_node(a, inv), constant<double>(t));
    };
    REQUIRE(max_rel_grad_error(build, a) < 1e-5);
  }
}

TEST_CASE("conv plumbing gradients", "[nn]") {
  Rng rng(5);
  const int C = 2, H = 5, W = 5;
  auto x = param<double>(random_mat(C, H * W, rng));
  auto w = param<double>(random_mat(3, C * 9, rng, 0.3));
  auto b = param<double>(random_mat(3, 1, rng, 0.1));
  auto build = [&] {
    auto cols = im2col(x, C, H, W, 3, 2, 1);
    auto y = add_colvec(matmul(w, cols), b);
    auto up = upsample2(y, 3, 3, 3);
    return mean_all(square(up));
  };
  REQUIRE(max_rel_grad_error(build, x) < 1e-6);
  REQUIRE(max_rel_grad_error(build, w) < 1e-6);
  REQUIRE(max_rel_grad_error(build, b) < 1e-6);
}

TEST_CASE("attention matches the formula", "[nn][codec]") {
  SECTION("single token returns V") {
    auto q = constant<double>(Md::Ones(1, 2));
    auto k = constant<double>(Md::Ones(1, 2));
    Md vv(1, 2);
    vv << 3.0, -1.5;
    auto v = constant<double>(vv);
    auto out = attention(q, k, v, 2.0);
    REQUIRE(out->value.isApprox(vv));
  }
  SECTION("2x2 identity case against direct evaluation") {
    auto q = constant<double>(Md::Identity(2, 2));
    auto k = constant<double>(Md::Identity(2, 2));
    auto v = constant<double>(Md::Identity(2, 2));
    auto out = attention(q, k, v, 2.0);
    const double s = 1.0 / std::sqrt(2.0);
    const double p = std::exp(s) / (std::exp(s) + 1.0);
    Md expect(2, 2);
    expect << p, 1 - p, 1 - p, p;
    REQUIRE((out->value - expect).cwiseAbs().maxCoeff() < 1e-12);
  }
  SECTION("zero query mixes V uniformly") {
    Rng rng(3);
    auto q = constant<double>(Md::Zero(3, 4));
    auto k = constant<double>(random_mat(3, 4, rng));
    auto v = constant<double>(random_mat(3, 4, rng));
    auto out = attention(q, k, v, 4.0);
    Md colmean = v->value.colwise().mean();
    for (int i = 0; i < 3; ++i)
      REQUIRE((out->value.row(i) - colmean).cwiseAbs().maxCoeff() < 1e-12);
  }
  SECTION("softmax rows sum to one on random input") {
    Rng rng(11);
    auto a = constant<double>(random_mat(8, 8, rng, 4.0));
    auto sm = softmax_rows(a);
    for (int i = 0; i < 8; ++i)
      REQUIRE(std::abs(sm->value.row(i).sum() - 1.0) < 1e-9);
  }
  SECTION("nonpositive adjustment factor is rejected") {
    auto q = constant<double>(Md::Ones(1, 2));
    REQUIRE_THROWS_AS(attention(q, q, q, 0.0), std::invalid_argument);
  }
}

TEST_CASE("straight-through top-k mask", "[nn][codec]") {
  Md logits(4, 1);
  logits << 0.9, 0.1, 0.8, 0.2;
  auto lp = param<double>(logits);
  auto m = ste_topk_mask(lp, 2);
  Md expect(4, 1);
  expect << 1, 0, 1, 0;
  REQUIRE(m->value == expect);

  // gradient passes through unchanged
  auto loss = sum_all(mul(m, constant<double>(Md::Constant(4, 1, 3.0))));
  backward(loss);
  REQUIRE((lp->grad - Md::Constant(4, 1, 3.0)).cwiseAbs().maxCoeff() < 1e-12);

  // ties break toward the lower index
  auto tied = param<double>(Md::Constant(4, 1, 0.5));
  auto mt = ste_topk_mask(tied, 2);
  Md expect_tie(4, 1);
  expect_tie << 1, 1, 0, 0;
  REQUIRE(mt->value == expect_tie);
}

TEST_CASE("optimizers reduce a quadratic", "[nn]") {
  Rng rng(1);
  Md target = random_mat(4, 4, rng);
  auto make_loss = [&](Var<double> p) {
    return mse_loss(p, constant<double>(target));
  };
  for (int use_adam = 0; use_adam < 2; ++use_adam) {
    ParamStore<double> store;
    auto p = store.add(Md::Zero(4, 4));
    Sgd<double> sgd(0.5, 0.9);
    Adam<double> adam(0.1);
    double first = 0.0, last = 0.0;
    for (int it = 0; it < 200; ++it) {
      store.zero_grad();
      auto loss = make_loss(p);
      if (it == 0) first = loss->value(0, 0);
      last = loss->value(0, 0);
      backward(loss);
      use_adam ? adam.step(store) : sgd.step(store);
    }
    REQUIRE(last < 1e-3 * first);
  }
}

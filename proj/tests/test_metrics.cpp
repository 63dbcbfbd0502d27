#include <catch2/catch_amalgamated.hpp>

#include <set>

#include "sc3d/codec/train.hpp"
#include "sc3d/metrics/metrics.hpp"
#include "sc3d/metrics/stubs.hpp"
#include "sc3d/scene/analytic.hpp"

using namespace sc3d;
using namespace sc3d::metrics;

namespace {

Plane random_plane(int h, int w, Rng& rng) {
  Plane p(h, w);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) p(r, c) = rng.uniform();
  return p;
}

// Straight-line reimplementations used as oracles.
double psnr_brute(const Plane& a, const Plane& b, double max_val) {
  double se = 0.0;
  for (int r = 0; r < a.rows(); ++r)
    for (int c = 0; c < a.cols(); ++c)
      se += (a(r, c) - b(r, c)) * (a(r, c) - b(r, c));
  const double mse_v = se / (a.rows() * a.cols());
  return 10.0 * std::log10(max_val * max_val / mse_v);
}

double ssim_brute_single_window(const Plane& a, const Plane& b, double c1,
                                double c2) {
  const double n = a.size();
  double ma = 0, mb = 0;
  for (int r = 0; r < a.rows(); ++r)
    for (int c = 0; c < a.cols(); ++c) {
      ma += a(r, c);
      mb += b(r, c);
    }
  ma /= n;
  mb /= n;
  double va = 0, vb = 0, cov = 0;
  for (int r = 0; r < a.rows(); ++r)
    for (int c = 0; c < a.cols(); ++c) {
      va += (a(r, c) - ma) * (a(r, c) - ma);
      vb += (b(r, c) - mb) * (b(r, c) - mb);
      cov += (a(r, c) - ma) * (b(r, c) - mb);
    }
  va /= n;
  vb /= n;
  cov /= n;
  return (2 * ma * mb + c1) * (2 * cov + c2) /
         ((ma * ma + mb * mb + c1) * (va + vb + c2));
}

double nmse_brute(const Eigen::MatrixXcd& h, const Eigen::MatrixXcd& hh) {
  std::complex<double> mean = 0.0;
  for (int r = 0; r < h.rows(); ++r)
    for (int c = 0; c < h.cols(); ++c) mean += h(r, c);
  mean /= double(h.size());
  double var = 0.0, err = 0.0;
  for (int r = 0; r < h.rows(); ++r)
    for (int c = 0; c < h.cols(); ++c) {
      var += std::norm(h(r, c) - mean);
      err += std::norm(h(r, c) - hh(r, c));
    }
  return 10.0 * std::log10(err / var);
}

}  // namespace

TEST_CASE("psnr", "[metrics]") {
  Rng rng(1);
  Plane a = random_plane(8, 8, rng);
  REQUIRE(std::isinf(psnr(a, a)));
  REQUIRE(psnr(a, a) > 0);

  Plane zero = Plane::Zero(4, 4), one = Plane::Ones(4, 4);
  REQUIRE(psnr(zero, one, 1.0) == Catch::Approx(0.0).margin(1e-12));
  REQUIRE(psnr_from_mse(1.0, 255.0) == Catch::Approx(48.1308).margin(5e-5));

  for (int i = 0; i < 100; ++i) {
    Plane x = random_plane(8, 8, rng), y = random_plane(8, 8, rng);
    REQUIRE(psnr(x, y) == Catch::Approx(psnr_brute(x, y, 1.0)).margin(1e-9));
  }
  // monotone: shrinking the error raises psnr
  Plane base = random_plane(8, 8, rng);
  double prev = psnr(base, Plane(base + 0.5));
  for (double eps : {0.25, 0.1, 0.01}) {
    const double cur = psnr(base, Plane(base + eps));
    REQUIRE(cur > prev);
    prev = cur;
  }
  REQUIRE_THROWS_AS(psnr(zero, Plane::Zero(3, 3)), std::invalid_argument);
}

TEST_CASE("ssim", "[metrics]") {
  Rng rng(2);
  Plane a = random_plane(8, 8, rng);
  REQUIRE(ssim(a, a) == Catch::Approx(1.0).margin(1e-9));

  SECTION("hand-evaluated constant 2x2 window") {
    Plane x = Plane::Constant(2, 2, 0.5), y = Plane::Constant(2, 2, 0.6);
    const double got = ssim(x, y, 2);
    const double want = ssim_brute_single_window(x, y, 1e-4, 9e-4);
    REQUIRE(got == Catch::Approx(want).margin(1e-12));
    REQUIRE(got == Catch::Approx((2 * 0.5 * 0.6 + 1e-4) * 9e-4 /
                                 ((0.25 + 0.36 + 1e-4) * 9e-4))
                       .margin(1e-12));
  }
  SECTION("symmetry and bounds on random pairs") {
    for (int i = 0; i < 100; ++i) {
      Plane x = random_plane(8, 8, rng), y = random_plane(8, 8, rng);
      const double xy = ssim(x, y, 8), yx = ssim(y, x, 8);
      REQUIRE(xy == Catch::Approx(yx).margin(1e-12));
      REQUIRE(xy ==
              Catch::Approx(ssim_brute_single_window(x, y, 1e-4, 9e-4))
                  .margin(1e-9));
      REQUIRE(xy >= -1.0);
      REQUIRE(xy <= 1.0);
    }
  }
  SECTION("oversized window rejected") {
    REQUIRE_THROWS_AS(ssim(a, a, 9), std::invalid_argument);
  }
}

TEST_CASE("nmse", "[metrics]") {
  Rng rng(3);
  Eigen::MatrixXcd h(8, 8);
  for (int r = 0; r < 8; ++r)
    for (int c = 0; c < 8; ++c) h(r, c) = rng.cnormal();
  REQUIRE(nmse_db(h, h) == -kInf);

  SECTION("error variance equal to channel variance gives 0 dB") {
    const std::complex<double> mean = h.mean();
    Eigen::MatrixXcd err = h;
    err.array() -= mean;  // error pattern with exactly Var(H) power
    REQUIRE(nmse_db(h, h + err) == Catch::Approx(0.0).margin(1e-9));
  }
  SECTION("scaled deviation anchors at -20 dB") {
    const std::complex<double> mean = h.mean();
    Eigen::MatrixXcd hh = h + 0.1 * (h.array() - mean).matrix();
    REQUIRE(nmse_db(h, hh) == Catch::Approx(-20.0).margin(1e-9));
  }
  SECTION("random pairs match the brute-force formula") {
    for (int i = 0; i < 100; ++i) {
      Eigen::MatrixXcd hh = h;
      for (int r = 0; r < 8; ++r)
        for (int c = 0; c < 8; ++c) hh(r, c) += 0.3 * rng.cnormal();
      REQUIRE(nmse_db(h, hh) ==
              Catch::Approx(nmse_brute(h, hh)).margin(1e-9));
    }
  }
  SECTION("constant channel rejected") {
    Eigen::MatrixXcd flat = Eigen::MatrixXcd::Ones(4, 4);
    REQUIRE_THROWS_AS(nmse_db(flat, flat), std::invalid_argument);
  }
}

TEST_CASE("bleu", "[metrics]") {
  using V = std::vector<std::string>;
  V ref{"a", "b", "c", "d"};
  REQUIRE(bleu(ref, ref, 4) == Catch::Approx(1.0).margin(1e-12));
  REQUIRE(bleu(ref, {"x", "y", "z", "w"}, 2, false) == 0.0);
  REQUIRE(bleu(ref, {"a", "b", "c", "e"}, 2, false) ==
          Catch::Approx(std::sqrt(0.5)).margin(1e-9));
  REQUIRE(bleu(ref, {}, 2) == 0.0);
}

TEST_CASE("cosine similarity", "[metrics]") {
  Eigen::VectorXd u(2), v(2);
  u << 1, 0;
  v << 1, 1;
  REQUIRE(cosine_sim(u, u) == Catch::Approx(1.0));
  REQUIRE(cosine_sim(u, Eigen::VectorXd(-u)) == Catch::Approx(-1.0));
  REQUIRE(cosine_sim(u, v) == Catch::Approx(0.70711).margin(1e-5));
  REQUIRE_THROWS_AS(cosine_sim(u, Eigen::VectorXd::Zero(2)),
                    std::invalid_argument);
}

TEST_CASE("kl divergence anchor", "[metrics][codec]") {
  Eigen::VectorXd a(2), b(2);
  a << 0.5, 0.5;
  b << 0.25, 0.75;
  REQUIRE(codec::kl_divergence(a, b) ==
          Catch::Approx(0.5 * std::log(2.0) - 0.5 * std::log(1.5))
              .margin(1e-9));
  REQUIRE(codec::kl_divergence(a, b) == Catch::Approx(0.14384).margin(5e-6));
  REQUIRE(codec::kl_divergence(a, a) == 0.0);
}

TEST_CASE("caption and embedding stubs", "[metrics]") {
  auto scene = scene::build_synthetic_scene(4, 2);
  auto cam = scene::make_camera_rig(2, 48, 48, 44.0)[0];
  auto im = scene::analytic_render(scene, cam, 128);

  const auto cap1 = caption_stub(im, scene);
  const auto cap2 = caption_stub(im, scene);
  REQUIRE(cap1 == cap2);
  REQUIRE_FALSE(cap1.empty());

  const auto e1 = embed_stub(cap1);
  REQUIRE(e1.norm() == Catch::Approx(1.0));
  REQUIRE((embed_stub("red sphere and box") -
           embed_stub("box and sphere red")).norm() < 1e-12);

  // disjoint vocabulary: verify hash bins do not collide, then cosine == 0
  const std::string ca = "red sphere", cb = "blue box";
  std::set<std::uint64_t> bins;
  for (const auto& w : {"red", "sphere", "blue", "box"})
    bins.insert(fnv1a(std::string(w)) % 64);
  REQUIRE(bins.size() == 4);
  REQUIRE(cosine_sim(embed_stub(ca), embed_stub(cb)) ==
          Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("metric report csv", "[metrics]") {
  MetricReport r;
  r.psnr_db = kInf;
  r.ssim = 0.5;
  r.nmse_db = -kInf;
  r.bleu = 1.0;
  r.cosine = 0.25;
  r.snr_db = 10.0;
  r.seed = 3;
  r.views = 5;
  REQUIRE(r.csv_row() == "inf,0.500000,-inf,1.000000,0.250000,10.000000,3,5");
}

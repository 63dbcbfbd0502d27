#include <catch2/catch_amalgamated.hpp>

#include "sc3d/channel/channel.hpp"

using namespace sc3d;
using namespace sc3d::channel;

namespace {

Eigen::VectorXd random_signal(long n, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::VectorXd x(n);
  for (long i = 0; i < n; ++i) x(i) = rng.normal();
  return x;
}

}  // namespace

TEST_CASE("channel draws", "[channel]") {
  SECTION("awgn is exactly all-ones") {
    auto chan = draw_channel(FadingModel::awgn, 8, 8, 0.0, 1);
    REQUIRE((chan.gains.array() == Cplx(1.0, 0.0)).all());
  }
  SECTION("huge K collapses to the line-of-sight ring") {
    auto chan = draw_channel(FadingModel::rician, 16, 16, 1e6, 3);
    for (int r = 0; r < 16; ++r)
      for (int c = 0; c < 16; ++c)
        REQUIRE(std::abs(std::abs(chan.gains(r, c)) - 1.0) <= 1e-2);
  }
  SECTION("rayleigh mean power is unit") {
    double acc = 0.0;
    long n = 0;
    for (int trial = 0; trial < 400; ++trial) {
      auto chan = draw_channel(FadingModel::rayleigh, 32, 32, 0.0, 100 + trial);
      acc += chan.gains.array().abs2().sum();
      n += chan.gains.size();
    }
    REQUIRE(std::abs(acc / n - 1.0) < 0.01);
  }
  SECTION("seed determinism") {
    auto a = draw_channel(FadingModel::rician, 8, 8, 3.0, 7);
    auto b = draw_channel(FadingModel::rician, 8, 8, 3.0, 7);
    REQUIRE(a.gains == b.gains);
  }
  SECTION("negative K rejected") {
    REQUIRE_THROWS_AS(draw_channel(FadingModel::rician, 4, 4, -1.0, 0),
                      std::invalid_argument);
  }
}

TEST_CASE("noise power for snr", "[channel]") {
  REQUIRE(noise_power_for_snr(2.5, 0.0) == Catch::Approx(2.5));
  REQUIRE(noise_power_for_snr(1.0, 10.0) == Catch::Approx(0.1));
  REQUIRE(noise_power_for_snr(1.0, 25.0) ==
          Catch::Approx(1.0 / 316.2278).epsilon(1e-6));
  REQUIRE(noise_power_for_snr(1.0, kInf) == 0.0);
}

TEST_CASE("transmit basics", "[channel]") {
  const auto x = random_signal(512, 5);
  SECTION("awgn at infinite snr is the identity") {
    auto chan = draw_channel(FadingModel::awgn, 16, 16, 0.0, 1);
    auto y = transmit(x, chan, kInf, 9);
    REQUIRE((y - x).cwiseAbs().maxCoeff() == 0.0);
  }
  SECTION("constant gain 2 doubles the signal") {
    auto chan = draw_channel(FadingModel::awgn, 16, 16, 0.0, 1);
    chan.gains.setConstant(Cplx(2.0, 0.0));
    auto y = transmit(x, chan, kInf, 9);
    REQUIRE((y - 2.0 * x).cwiseAbs().maxCoeff() < 1e-12);
  }
  SECTION("determinism") {
    auto chan = draw_channel(FadingModel::rician, 16, 16, 3.0, 2);
    auto y1 = transmit(x, chan, 10.0, 77);
    auto y2 = transmit(x, chan, 10.0, 77);
    REQUIRE(y1 == y2);
  }
  SECTION("non-finite input rejected") {
    Eigen::VectorXd bad = x;
    bad(3) = std::numeric_limits<double>::quiet_NaN();
    auto chan = draw_channel(FadingModel::awgn, 16, 16, 0.0, 1);
    REQUIRE_THROWS_AS(transmit(bad, chan, 10.0, 1), std::invalid_argument);
  }
}

TEST_CASE("empirical snr calibration", "[channel]") {
  // measured noise power tracks the configured value on a fading draw
  auto chan = draw_channel(FadingModel::rician, 16, 16, 3.0, 11);
  const auto x = random_signal(1 << 18, 21);
  for (double snr_db : {0.0, 10.0}) {
    auto y = transmit(x, chan, snr_db, 31);
    auto clean = transmit(x, chan, kInf, 0);
    const double noise_power = (y - clean).squaredNorm() / x.size();
    const double expect = noise_power_for_snr(1.0, snr_db);
    REQUIRE(std::abs(10.0 * std::log10(noise_power / expect)) < 0.1);
  }
}

TEST_CASE("equalization inverts the channel exactly", "[channel]") {
  const auto x = random_signal(512, 13);
  SECTION("identity estimate returns y") {
    auto y = random_signal(512, 14);
    auto xt = equalize(y, CMat::Ones(16, 16), EqualizeMode::elementwise);
    REQUIRE((xt - y).cwiseAbs().maxCoeff() == 0.0);
  }
  SECTION("elementwise, true gains, no noise") {
    auto chan = draw_channel(FadingModel::rician, 16, 16, 3.0, 15);
    auto y = transmit(x, chan, kInf, 0);
    auto xt = equalize(y, chan.gains, EqualizeMode::elementwise);
    REQUIRE((xt - x).cwiseAbs().maxCoeff() < 1e-9);
  }
  SECTION("pseudo-inverse on a random 4x4 matrix channel") {
    Rng rng(19);
    CMat h(4, 4);
    for (int r = 0; r < 4; ++r)
      for (int c = 0; c < 4; ++c) h(r, c) = rng.cnormal();
    ChannelRealization chan;
    chan.matrix_mode = true;
    chan.gains = h;
    auto y = transmit(x, chan, kInf, 0);
    auto xt = equalize(y, h, EqualizeMode::pseudo_inverse);
    REQUIRE((xt - x).cwiseAbs().maxCoeff() < 1e-9);
  }
  SECTION("near-zero gain raises a singular channel error") {
    CMat h = CMat::Ones(4, 4);
    h(1, 2) = Cplx(1e-15, 0.0);
    auto y = random_signal(32, 3);
    REQUIRE_THROWS_AS(equalize(y, h, EqualizeMode::elementwise),
                      singular_channel_error);
  }
  SECTION("rank-deficient matrix raises a singular channel error") {
    CMat h = CMat::Ones(4, 4);  // rank one
    auto y = random_signal(8, 3);
    REQUIRE_THROWS_AS(equalize(y, h, EqualizeMode::pseudo_inverse),
                      singular_channel_error);
  }
}

TEST_CASE("post-equalization noise is additive and signal independent",
          "[channel]") {
  auto chan = draw_channel(FadingModel::rician, 16, 16, 3.0, 23);
  const auto x = random_signal(1 << 17, 29);
  auto y = transmit(x, chan, 10.0, 41);
  auto xt = equalize(y, chan.gains, EqualizeMode::elementwise);
  Eigen::VectorXd err = xt - x;
  const double corr =
      (err.array() * x.array()).mean() /
      std::sqrt(err.array().square().mean() * x.array().square().mean());
  REQUIRE(std::abs(corr) < 0.01);
}

#include <doctest.h>

#include <cmath>

#include "inrv/errors.hpp"
#include "inrv/metrics.hpp"
#include "metric_oracles.hpp"
#include "support.hpp"

using namespace inrv;
using inrv::testing::naive_mse;
using inrv::testing::naive_psnr;
using inrv::testing::naive_ssim;

namespace {

VideoTensor constant_video(VideoDims dims, double value) {
  return VideoTensor(dims, std::vector<double>(dims.pixels() * 3, value));
}

}  // namespace

TEST_CASE("psnr conventions") {
  const VideoDims d{2, 4, 5};
  const auto a = testing::random_video(d, 1);
  CHECK(psnr(a, a) == kPsnrCap);
  const auto lo = constant_video(d, 0.2);
  const auto hi = constant_video(d, 0.2 + 16.0 / 255.0);
  CHECK(psnr(lo, hi) == doctest::Approx(10.0 * std::log10(255.0 * 255.0 / 256.0)).epsilon(1e-12));
  CHECK(std::abs(psnr(lo, hi) - 24.0486) < 5e-4);
  CHECK(std::abs(psnr(lo, hi) - 10.0 * std::log10(255.0 * 255.0 / 256.0)) <= 1e-9);
  CHECK_THROWS_AS(psnr(a, testing::random_video({2, 4, 4}, 1)), ShapeError);
}

TEST_CASE("error E and context l1 analytic cases") {
  const VideoDims d{2, 3, 3};
  const auto lo = constant_video(d, 0.2);
  const auto hi = constant_video(d, 0.2 + 16.0 / 255.0);
  const std::vector<VideoTensor> recon{lo}, truth{hi};
  CHECK(std::abs(error_e(recon, truth) - 16.0) <= 1e-9);
  const std::vector<VideoTensor> same{lo, hi};
  CHECK(error_e(same, same) == 0.0);
  CHECK_THROWS_AS(error_e(std::vector<VideoTensor>{}, std::vector<VideoTensor>{}), UsageError);

  const auto off5 = constant_video(d, 0.2 + 5.0 / 255.0);
  const std::vector<std::size_t> mask{0, 4, 17};
  CHECK(std::abs(context_l1(off5, lo, mask) - 5.0) <= 1e-9);
  CHECK(context_l1(lo, lo, mask) == 0.0);
  CHECK_THROWS_AS(context_l1(lo, lo, std::vector<std::size_t>{}), UsageError);
  CHECK_THROWS_AS(context_l1(lo, lo, std::vector<std::size_t>{18}), UsageError);
}

TEST_CASE("ssim identity, constants and window size") {
  const VideoDims d{2, 12, 13};
  const auto a = testing::random_video(d, 3);
  CHECK(ssim(a, a) == doctest::Approx(1.0).epsilon(1e-15));
  const double m1 = 0.3 * 255, m2 = 0.7 * 255, c1 = 6.5025;
  const double closed = (2 * m1 * m2 + c1) / (m1 * m1 + m2 * m2 + c1);
  CHECK(ssim(constant_video(d, 0.3), constant_video(d, 0.7)) == doctest::Approx(closed).epsilon(1e-12));
  CHECK_THROWS_AS(ssim(testing::random_video({1, 10, 20}, 1), testing::random_video({1, 10, 20}, 2)), ShapeError);
}

TEST_CASE("metrics match naive references on seeded pairs") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const VideoDims d{2, 11 + seed % 3, 12 + seed % 2};
    const auto a = testing::random_video(d, 100 + seed);
    const auto b = testing::random_video(d, 200 + seed);
    CHECK(testing::rel_error(psnr(a, b), naive_psnr(a, b)) <= 1e-10);
    CHECK(testing::rel_error(ssim(a, b), naive_ssim(a, b)) <= 1e-10);
    const std::vector<VideoTensor> as{a}, bs{b};
    CHECK(testing::rel_error(error_e(as, bs), std::sqrt(naive_mse(a, b))) <= 1e-10);

    Philox rng(seed);
    std::vector<std::size_t> mask;
    double sum = 0.0;
    for (std::size_t p = 0; p < d.pixels(); ++p) {
      if (rng.uniform() < 0.3) {
        mask.push_back(p);
        const std::size_t t = p / (d.height * d.width), h = p / d.width % d.height, w = p % d.width;
        for (std::size_t c = 0; c < 3; ++c) sum += std::abs(255.0 * a.at(t, h, w, c) - 255.0 * b.at(t, h, w, c));
      }
    }
    CHECK(testing::rel_error(context_l1(a, b, mask), sum / (3.0 * mask.size())) <= 1e-10);
  }
}

TEST_CASE("metrics are symmetric") {
  const VideoDims d{1, 11, 11};
  const auto a = testing::random_video(d, 7), b = testing::random_video(d, 8);
  CHECK(psnr(a, b) == psnr(b, a));
  CHECK(ssim(a, b) == doctest::Approx(ssim(b, a)).epsilon(1e-14));
  const std::vector<std::size_t> mask{1, 2, 3};
  CHECK(context_l1(a, b, mask) == context_l1(b, a, mask));
}

TEST_CASE("metric reports") {
  const VideoDims d{1, 11, 11};
  std::vector<VideoTensor> pred, truth;
  for (std::uint64_t s = 0; s < 3; ++s) {
    pred.push_back(testing::random_video(d, s));
    truth.push_back(testing::random_video(d, 10 + s));
  }
  const auto e = evaluate_metric("e", pred, truth);
  CHECK(e.total == doctest::Approx(error_e(pred, truth)).epsilon(1e-14));
  CHECK(e.recompute() == e.total);
  const auto p = evaluate_metric("psnr", pred, truth);
  CHECK(p.values[2] == psnr(pred[2], truth[2]));
  CHECK(p.total == doctest::Approx((p.values[0] + p.values[1] + p.values[2]) / 3));
  CHECK(p.to_csv().rfind("video,psnr\n0,", 0) == 0);
  CHECK(p.to_text().find("[0,255]") != std::string::npos);
  CHECK(evaluate_metric("ssim", pred, truth).values.size() == 3);
  CHECK(evaluate_metric("l1", pred, pred).total == 0.0);
  CHECK_THROWS_AS(evaluate_metric("fvd", pred, truth), UsageError);
  CHECK_THROWS_AS(evaluate_metric("ssim", std::vector<VideoTensor>{testing::random_video({1, 5, 5}, 1)},
                                  std::vector<VideoTensor>{testing::random_video({1, 5, 5}, 1)}),
                  ShapeError);
}

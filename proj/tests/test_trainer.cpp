#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <regex>
#include <sstream>

#include "inrv/errors.hpp"
#include "inrv/metrics.hpp"
#include "inrv/model.hpp"
#include "inrv/trainer.hpp"
#include "support.hpp"

using namespace inrv;
using inrv::testing::random_tensor;
using inrv::testing::random_video;

namespace {

double naive_mse(const Tensor& a, const Tensor& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s / static_cast<double>(a.size());
}

// Direct per-dimension moments and the closed-form Gaussian KL against N(0, 1).
double naive_kl(const Tensor& codes) {
  const std::size_t rows = codes.dim(0), cols = codes.dim(1);
  double total = 0.0;
  for (std::size_t d = 0; d < cols; ++d) {
    double mu = 0.0;
    for (std::size_t r = 0; r < rows; ++r) mu += codes[r * cols + d];
    mu /= static_cast<double>(rows);
    double var = 0.0;
    for (std::size_t r = 0; r < rows; ++r) var += (codes[r * cols + d] - mu) * (codes[r * cols + d] - mu);
    var /= static_cast<double>(rows);
    total += -0.5 * std::log(var) + 0.5 * (var + mu * mu) - 0.5;
  }
  return total / static_cast<double>(cols);
}

std::vector<std::size_t> all_pixels(const VideoDims& d) {
  std::vector<std::size_t> p(d.pixels());
  std::iota(p.begin(), p.end(), 0);
  return p;
}

std::vector<VideoTensor> random_videos(std::size_t n, VideoDims dims, std::uint64_t seed) {
  std::vector<VideoTensor> v;
  for (std::size_t i = 0; i < n; ++i) v.push_back(random_video(dims, seed + i));
  return v;
}

// Random video whose last frame, row and column repeat the first ones. The
// +-1 grid endpoints share every sin/cos feature, so only such videos can be
// fit exactly.
VideoTensor wrapped_video(VideoDims dims, std::uint64_t seed) {
  const VideoTensor base = random_video(dims, seed);
  auto fold = [](std::size_t i, std::size_t n) { return n > 1 && i == n - 1 ? 0 : i; };
  std::vector<double> px(dims.pixels() * 3);
  for (std::size_t t = 0; t < dims.frames; ++t)
    for (std::size_t h = 0; h < dims.height; ++h)
      for (std::size_t w = 0; w < dims.width; ++w)
        for (std::size_t c = 0; c < 3; ++c)
          px[base.index(t, h, w) * 3 + c] =
              base.at(fold(t, dims.frames), fold(h, dims.height), fold(w, dims.width), c);
  return VideoTensor(dims, std::move(px));
}

TrainConfig quick_config() {
  TrainConfig c;
  c.max_epochs = {3};
  c.pixel_batch = 16;
  c.video_batch = 2;
  c.lr = 1e-3;
  c.seed = 5;
  return c;
}

Model model_with_codes(std::size_t n, Regularization mode, std::uint64_t seed) {
  Model m = Model::create(ModelConfig::test(), seed, mode);
  std::vector<Tensor> semantic;
  for (std::size_t i = 0; i < n; ++i) semantic.push_back(random_tensor({m.config.semantic_dim}, seed + 10 + i));
  m.codebook = codebook_init(n, m.config.context_dim, m.config.semantic_dim, semantic, seed + 1, 0.5);
  return m;
}

bool same(std::span<const double> a, std::span<const double> b) { return std::ranges::equal(a, b); }

bool same_weights(const HypernetWeights& a, const HypernetWeights& b) {
  auto same_mlp = [](const Mlp& x, const Mlp& y) {
    for (std::size_t l = 0; l < x.weights.size(); ++l) {
      if (!same(x.weights[l].data(), y.weights[l].data()) || !same(x.biases[l].data(), y.biases[l].data())) return false;
    }
    return true;
  };
  for (std::size_t h = 0; h < a.heads.size(); ++h)
    if (!same_mlp(a.heads[h], b.heads[h])) return false;
  return same_mlp(a.fusion, b.fusion);
}

}  // namespace

TEST_CASE("reconstruction loss") {
  const Tensor pred = random_tensor({7, 3}, 1, 0.0, 1.0);
  CHECK(reconstruction_loss(pred, pred) == 0.0);

  Tensor shifted = pred;
  for (auto& v : shifted.data()) v += 0.5;
  CHECK(reconstruction_loss(pred, shifted) == doctest::Approx(0.25).epsilon(1e-15));

  const Tensor other = random_tensor({7, 3}, 2, 0.0, 1.0);
  CHECK(reconstruction_loss(pred, other) == doctest::Approx(naive_mse(pred, other)).epsilon(1e-14));
  CHECK_THROWS_AS(reconstruction_loss(pred, random_tensor({3, 7}, 3)), ShapeError);
}

TEST_CASE("gaussian KL closed form") {
  // Rows +-1 in every dimension: zero mean, unit variance.
  CHECK(gaussian_kl(Tensor({2, 3}, {1, -1, 1, -1, 1, -1})) == doctest::Approx(0.0).scale(1.0).epsilon(1e-15));
  // Mean 0.5, variance 1: only the mean term remains, 0.5 * 0.25.
  CHECK(gaussian_kl(Tensor({2, 1}, {1.5, -0.5})) == doctest::Approx(0.125).epsilon(1e-14));
  // Mean 0, sigma 0.5: log 2 + 0.125 - 0.5.
  CHECK(gaussian_kl(Tensor({2, 1}, {0.5, -0.5})) == doctest::Approx(std::log(2.0) - 0.375).epsilon(1e-14));

  const Tensor codes = random_tensor({9, 6}, 4, -2.0, 2.0);
  CHECK(gaussian_kl(codes) == doctest::Approx(naive_kl(codes)).epsilon(1e-12));
  CHECK(gaussian_kl(codes) >= 0.0);

  CHECK_THROWS_AS(gaussian_kl(Tensor({1, 4})), UsageError);
  CHECK_THROWS_AS(gaussian_kl(Tensor({4})), ShapeError);
}

TEST_CASE("gaussian KL gradient") {
  const auto r = inrv::testing::check_gradients(
      {random_tensor({5, 4}, 6, -1.0, 1.0)}, [](Graph& g, const std::vector<NodeId>& in) { return gaussian_kl(g, in[0]); });
  CHECK(r.max_rel < 1e-6);
}

TEST_CASE("progressive schedule") {
  CHECK(progressive_schedule(50).sizes == std::vector<std::size_t>{1, 10, 50});
  CHECK(progressive_schedule(10000).sizes == std::vector<std::size_t>{1, 10, 100, 1000, 10000});
  CHECK(progressive_schedule(100).sizes == std::vector<std::size_t>{1, 10, 100});
  CHECK(progressive_schedule(1).sizes == std::vector<std::size_t>{1});
  CHECK(progressive_schedule(7).sizes == std::vector<std::size_t>{1, 7});
  CHECK(progressive_schedule(50, 20).sizes == std::vector<std::size_t>{20, 50});
  CHECK_THROWS_AS(progressive_schedule(0), UsageError);
  CHECK_THROWS_AS(progressive_schedule(5, 0), UsageError);

  for (std::size_t n : {1u, 2u, 9u, 10u, 11u, 99u, 1234u}) {
    const auto s = progressive_schedule(n).sizes;
    CHECK(s.back() == n);
    CHECK(std::is_sorted(s.begin(), s.end()));
    CHECK(std::adjacent_find(s.begin(), s.end()) == s.end());
  }
}

TEST_CASE("train config validation") {
  TrainConfig c;
  CHECK_NOTHROW(c.validate());
  CHECK(c.epochs_for(7) == 300);
  c.max_epochs = {4, 5};
  CHECK(c.epochs_for(0) == 4);
  CHECK(c.epochs_for(3) == 5);
  auto bad = [](auto mutate) {
    TrainConfig t;
    mutate(t);
    return t;
  };
  CHECK_THROWS_AS(bad([](TrainConfig& t) { t.lr = 0.0; }).validate(), UsageError);
  CHECK_THROWS_AS(bad([](TrainConfig& t) { t.pixel_batch = 0; }).validate(), UsageError);
  CHECK_THROWS_AS(bad([](TrainConfig& t) { t.max_epochs.clear(); }).validate(), UsageError);
  CHECK_THROWS_AS(bad([](TrainConfig& t) { t.kl_weight = -1.0; }).validate(), UsageError);
}

TEST_CASE("single INR fit memorizes a tiny video") {
  const VideoTensor video = wrapped_video({3, 5, 5}, 11);
  SingleInrConfig cfg;
  cfg.steps = 300;
  cfg.lr = 1e-2;
  cfg.seed = 3;
  std::ostringstream log;
  cfg.log_every = 100;
  const auto fit = fit_single_inr(video, cfg, &log);
  REQUIRE(fit.step_mse.size() == 300);
  CHECK(fit.step_mse.back() < fit.step_mse.front());

  const ThetaLayout layout(cfg.arch);
  const double mse = single_inr_loss(fit.theta, layout, video, all_pixels(video.dims()));
  CHECK(psnr(render_video(fit.theta, layout, video.dims()), video) >= 40.0);
  CHECK(mse < 1e-4);
  CHECK(std::regex_search(log.str(), std::regex("^step=100 mse=[0-9.e-]+\n")));

  const auto again = fit_single_inr(video, cfg);
  CHECK(same(again.theta.data(), fit.theta.data()));
}

TEST_CASE("multi-video objective with one video equals the single-INR objective") {
  for (auto mode : {Regularization::None, Regularization::Semantic, Regularization::GaussianSemantic}) {
    const Model m = model_with_codes(3, mode, 21);
    const VideoTensor video = random_video({2, 4, 4}, 22);
    const auto pixels = all_pixels(video.dims());
    const std::vector<VideoTensor> one{video};
    const std::vector<std::size_t> idx{1};
    const LossParts parts = batch_loss(m, one, idx, pixels, 1.0);
    const double single = single_inr_loss(m.theta(m.instance_code(1)), m.layout(), video, pixels);
    CHECK(parts.reconstruction == single);
    CHECK(parts.total == single);
    CHECK(parts.kl == 0.0);
  }
}

TEST_CASE("KL weight") {
  const Model m = model_with_codes(3, Regularization::GaussianSemantic, 31);
  const auto videos = random_videos(3, {2, 4, 4}, 32);
  const std::vector<std::size_t> idx{0, 1, 2};
  const auto pixels = all_pixels(videos[0].dims());

  const LossParts off = batch_loss(m, videos, idx, pixels, 0.0);
  CHECK(off.total == off.reconstruction);

  const LossParts on = batch_loss(m, videos, idx, pixels, 1.0);
  CHECK(on.reconstruction == off.reconstruction);
  Tensor instances({3, m.config.instance_dim});
  for (std::size_t n = 0; n < 3; ++n) {
    const Tensor code = m.instance_code(n);
    std::copy(code.data().begin(), code.data().end(), instances.row(n).begin());
  }
  CHECK(on.kl == doctest::Approx(naive_kl(instances)).epsilon(1e-12));
  CHECK(on.total == doctest::Approx(on.reconstruction + on.kl).epsilon(1e-15));

  // Semantic-only mode never adds the term.
  const Model plain = model_with_codes(3, Regularization::Semantic, 31);
  const LossParts p = batch_loss(plain, videos, idx, pixels, 1.0);
  CHECK(p.kl == 0.0);
  CHECK(p.total == p.reconstruction);
}

TEST_CASE("stage exits at entry when already under the threshold") {
  const auto videos = random_videos(2, {2, 4, 4}, 41);
  Model m = model_with_codes(2, Regularization::Semantic, 42);
  const Model before = m;
  TrainConfig cfg = quick_config();
  cfg.threshold = 10.0;
  std::ostringstream log;
  const StageReport r = train_stage(m, videos, 2, 0, false, cfg, {&log, {}});
  CHECK(r.reached_threshold);
  CHECK(r.epochs == 0);
  CHECK(r.entry_mse == r.final_mse);
  CHECK(same_weights(m.weights, before.weights));
  CHECK(std::regex_match(log.str(), std::regex("stage=1 epoch=0 mse=[0-9.e-]+ kl=0\n")));

  // The last stage always trains to its cap.
  const StageReport last = train_stage(m, videos, 2, 0, true, cfg);
  CHECK(last.epochs == 3);
  CHECK_FALSE(same_weights(m.weights, before.weights));
}

TEST_CASE("stage leaves codes outside the slice untouched") {
  const auto videos = random_videos(3, {2, 4, 4}, 51);
  Model m = model_with_codes(3, Regularization::Semantic, 52);
  const Tensor outside = m.codebook.context(2);
  const Tensor inside = m.codebook.context(1);
  const StageReport r = train_stage(m, videos, 2, 1, true, quick_config());
  CHECK(r.epochs == 3);
  CHECK(same(m.codebook.context(2).data(), outside.data()));
  CHECK_FALSE(same(m.codebook.context(1).data(), inside.data()));

  CHECK_THROWS_AS(train_stage(m, videos, 4, 0, true, quick_config()), UsageError);
  CHECK_THROWS_AS(train_stage(m, videos, 0, 0, true, quick_config()), UsageError);
}

TEST_CASE("one-video stage memorizes its video") {
  const std::vector<VideoTensor> videos{wrapped_video({3, 5, 5}, 61)};
  Model m = model_with_codes(1, Regularization::Semantic, 62);
  TrainConfig cfg = quick_config();
  cfg.max_epochs = {1500};
  cfg.log_every = 0;
  const StageReport r = train_stage(m, videos, 1, 0, false, cfg);
  CHECK(r.reached_threshold);
  CHECK(r.final_mse <= 1e-3);
  CHECK(r.epochs < 1500);
  // Broadly decreasing: every tenth of the run ends below where it started.
  const std::size_t tenth = std::max<std::size_t>(1, r.epoch_mse.size() / 10);
  for (std::size_t i = tenth; i < r.epoch_mse.size(); i += tenth) CHECK(r.epoch_mse[i] < r.epoch_mse[i - tenth]);
}

TEST_CASE("progressive training") {
  const auto videos = random_videos(12, {2, 4, 4}, 71);
  TrainConfig cfg = quick_config();
  cfg.max_epochs = {2, 2, 2};
  cfg.threshold = 1e-9;

  std::vector<LatentCodebook> snapshots;
  std::vector<StageReport> reports;
  std::ostringstream log;
  TrainHooks hooks{&log, [&](const Model& m, const StageReport& r) {
                     snapshots.push_back(m.codebook);
                     reports.push_back(r);
                     CHECK(m.meta.stage == r.stage + 1);
                   }};
  const Model a = train(videos, cfg, hooks);
  REQUIRE(reports.size() == 3);
  CHECK(reports[0].size == 1);
  CHECK(reports[1].size == 10);
  CHECK(reports[2].size == 12);
  CHECK(a.meta.num_stages == 3);
  CHECK(a.meta.stage == 3);
  CHECK(a.codebook.size() == 12);

  CHECK(std::regex_search(log.str(), std::regex("stage=2 epoch=0 mse=")));
  CHECK(std::regex_search(log.str(), std::regex("stage=3 epoch=2 mse=[0-9.e-]+ kl=0")));
  for (std::size_t l = 0; l + 1 < snapshots.size(); ++l) CHECK(snapshots[l + 1].size() > snapshots[l].size());

  const Model b = train(videos, cfg);
  CHECK(same_weights(a.weights, b.weights));
  for (std::size_t n = 0; n < 12; ++n) CHECK(same(a.codebook.context(n).data(), b.codebook.context(n).data()));

  cfg.seed = 6;
  const Model c = train(videos, cfg);
  CHECK_FALSE(same_weights(a.weights, c.weights));
}

TEST_CASE("stage codes carry over bit-exactly") {
  const auto videos = random_videos(12, {2, 4, 4}, 81);
  TrainConfig cfg = quick_config();
  cfg.max_epochs = {2};
  cfg.threshold = 1e-9;
  Model after_first;
  std::size_t calls = 0;
  train(videos, cfg, {nullptr, [&](const Model& m, const StageReport&) {
                        if (calls++ == 0) after_first = m;
                      }});
  REQUIRE(calls == 3);

  // Later stages without epochs hand every earlier code through untouched.
  TrainConfig frozen = cfg;
  frozen.max_epochs = {2, 0, 0};
  std::vector<LatentCodebook> books;
  const Model end = train(videos, frozen, {nullptr, [&](const Model& m, const StageReport&) { books.push_back(m.codebook); }});
  REQUIRE(books.size() == 3);
  CHECK(same(books[0].context(0).data(), after_first.codebook.context(0).data()));
  CHECK(same(end.codebook.context(0).data(), books[0].context(0).data()));
  for (std::size_t n = 0; n < 10; ++n) CHECK(same(end.codebook.context(n).data(), books[1].context(n).data()));

  // Extending the stage-1 model as the trainer does keeps the trained code.
  Model resumed = after_first;
  std::vector<Tensor> added;
  for (std::size_t n = 1; n < 12; ++n) added.push_back(resumed.encoder.encode(videos[n]));
  resumed.codebook = codebook_extend(resumed.codebook, 12, added, 99, cfg.code_sigma);
  CHECK(same(resumed.codebook.context(0).data(), after_first.codebook.context(0).data()));
  CHECK(same(resumed.codebook.semantic(0).data(), after_first.codebook.semantic(0).data()));
}

TEST_CASE("training rejects mixed sizes") {
  std::vector<VideoTensor> videos{random_video({2, 4, 4}, 1), random_video({2, 4, 5}, 2)};
  CHECK_THROWS_AS(train(videos, quick_config()), ShapeError);
  CHECK_THROWS_AS(train(std::vector<VideoTensor>{}, quick_config()), UsageError);
}

TEST_CASE("full-chain gradient check") {
  const GradCheckReport r = gradcheck(1, 4);
  INFO("worst entry " << r.worst);
  CHECK(r.checked > 0);
  CHECK(r.max_rel <= 1e-6);
}

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "inrv/errors.hpp"
#include "inrv/sampler.hpp"
#include "support.hpp"

using namespace inrv;
using inrv::testing::random_tensor;

namespace fs = std::filesystem;

namespace {

double norm(const Tensor& v) {
  double s = 0.0;
  for (double x : v.data()) s += x * x;
  return std::sqrt(s);
}

Tensor scaled(Tensor v, double r) {
  const double n = norm(v);
  for (auto& x : v.data()) x *= r / n;
  return v;
}

Model small_model(std::size_t codes, std::uint64_t seed) {
  Model m = Model::create(ModelConfig::test(), seed, Regularization::Semantic);
  std::vector<Tensor> semantic;
  for (std::size_t i = 0; i < codes; ++i) semantic.push_back(random_tensor({m.config.semantic_dim}, seed + 10 + i));
  m.codebook = codebook_init(codes, m.config.context_dim, m.config.semantic_dim, semantic, seed + 1, 1.0);
  return m;
}

bool same(std::span<const double> a, std::span<const double> b) { return std::ranges::equal(a, b); }

fs::path temp_file(const std::string& name) { return fs::temp_directory_path() / ("inrv_sampler_" + name); }

}  // namespace

TEST_CASE("slerp endpoints and great circle") {
  const Tensor a = random_tensor({16}, 1), b = random_tensor({16}, 2);
  CHECK(same(slerp(a, b, 0.0).data(), a.data()));
  CHECK(same(slerp(a, b, 1.0).data(), b.data()));

  const Tensor ra = scaled(a, 3.0), rb = scaled(b, 3.0);
  for (int k = 0; k <= 20; ++k) {
    const double t = k / 20.0;
    CHECK(std::abs(norm(slerp(ra, rb, t)) - 3.0) <= 1e-9);
    const Tensor fwd = slerp(a, b, t), back = slerp(b, a, 1.0 - t);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(fwd[i] - back[i]) <= 1e-12);
  }

  // Orthogonal unit vectors meet halfway at 45 degrees.
  const Tensor x({2}, {1.0, 0.0}), y({2}, {0.0, 1.0});
  const Tensor mid = slerp(x, y, 0.5);
  CHECK(mid[0] == doctest::Approx(std::sqrt(0.5)).epsilon(1e-15));
  CHECK(mid[1] == doctest::Approx(std::sqrt(0.5)).epsilon(1e-15));
}

TEST_CASE("slerp degenerate inputs") {
  const Tensor a({3}, {1.0, 2.0, 3.0});
  Tensor b = a;
  for (auto& v : b.data()) v *= 2.0;
  const Tensor p = slerp(a, b, 0.25);
  for (std::size_t i = 0; i < 3; ++i) CHECK(p[i] == doctest::Approx(0.75 * a[i] + 0.25 * b[i]).epsilon(1e-15));

  CHECK_THROWS_AS(slerp(a, Tensor({3}), 0.5), UsageError);
  CHECK_THROWS_AS(slerp(a, b, 1.5), UsageError);
  CHECK_THROWS_AS(slerp(a, Tensor({2}, {1.0, 1.0}), 0.5), ShapeError);
}

TEST_CASE("interpolation renders") {
  const Model m = small_model(3, 5);
  const VideoDims dims{2, 4, 4};
  const auto two = interpolate_videos(m, 0, 2, 2, dims);
  REQUIRE(two.size() == 2);
  CHECK(same(two[0].data(), m.render(m.instance_code(0), dims).data()));
  CHECK(same(two[1].data(), m.render(m.instance_code(2), dims).data()));

  const auto path = interpolate_videos(m, 0, 2, 5, dims);
  REQUIRE(path.size() == 5);
  CHECK(same(path[0].data(), two[0].data()));
  CHECK(same(path[4].data(), two[1].data()));
  CHECK(same(path[2].data(), m.render(slerp(m.instance_code(0), m.instance_code(2), 0.5), dims).data()));

  CHECK_THROWS_AS(interpolate_videos(m, 0, 2, 1, dims), UsageError);
  CHECK_THROWS_AS(interpolate_videos(m, 0, 3, 2, dims), UsageError);
}

TEST_CASE("slerp-pair sampling") {
  const Model m = small_model(4, 7);
  const auto codes = m.instance_codes();
  const LatentSamples s = sample_latents(m, SampleMode::SlerpPairs, 50, 9);
  REQUIRE(s.samples.size() == 50);
  for (const auto& x : s.samples) {
    CHECK(x.i != x.j);
    CHECK(x.i < 4);
    CHECK(x.j < 4);
    CHECK(x.t > 0.0);
    CHECK(x.t < 1.0);
    CHECK(same(x.latent.data(), slerp(codes[x.i], codes[x.j], x.t).data()));
  }

  // The log alone reproduces every latent.
  std::istringstream log(s.log());
  std::string line;
  std::size_t k = 0;
  while (std::getline(log, line)) {
    std::size_t idx = 0, i = 0, j = 0;
    double t = 0.0;
    REQUIRE(std::sscanf(line.c_str(), "sample=%zu i=%zu j=%zu t=%lf", &idx, &i, &j, &t) == 4);
    CHECK(idx == k);
    CHECK(same(slerp(codes[i], codes[j], t).data(), s.samples[k].latent.data()));
    ++k;
  }
  CHECK(k == 50);

  const LatentSamples again = sample_latents(m, SampleMode::SlerpPairs, 50, 9);
  CHECK(again.log() == s.log());
  CHECK(sample_latents(m, SampleMode::SlerpPairs, 50, 10).log() != s.log());

  CHECK_THROWS_AS(sample_latents(small_model(1, 3), SampleMode::SlerpPairs, 5, 0), UsageError);
  CHECK(parse_sample_mode(to_string(SampleMode::GaussianFit)) == SampleMode::GaussianFit);
  CHECK_THROWS_AS(parse_sample_mode("normal"), UsageError);
}

TEST_CASE("gaussian-fit sampling matches the fitted moments") {
  const Model m = small_model(6, 13);
  const GaussianFit fit = fit_gaussian(m.instance_codes());
  const LatentSamples s = sample_latents(m, SampleMode::GaussianFit, 10000, 4);
  CHECK(s.fit.mean == fit.mean);

  std::size_t within = 0;
  for (std::size_t d = 0; d < fit.mean.size(); ++d) {
    double mean = 0.0, sq = 0.0;
    for (const auto& x : s.samples) mean += x.latent[d];
    mean /= 10000.0;
    for (const auto& x : s.samples) sq += (x.latent[d] - mean) * (x.latent[d] - mean);
    const double sd = std::sqrt(sq / 10000.0);
    CHECK(std::abs(sd - fit.stddev[d]) <= 0.05 * fit.stddev[d]);
    // Mean error measured against the spread, as means can sit near zero.
    CHECK(std::abs(mean - fit.mean[d]) <= 0.05 * fit.stddev[d]);
    within += std::abs(mean - fit.mean[d]) <= 0.05 * std::abs(fit.mean[d]) ? 1 : 0;
  }
  MESSAGE(within << " of " << fit.mean.size() << " means also within 5% of themselves");

  const Tensor a({2}, {1.0, -1.0}), b({2}, {3.0, -1.0});
  const GaussianFit two = fit_gaussian({a, b});
  CHECK(two.mean == std::vector<double>{2.0, -1.0});
  CHECK(two.stddev == std::vector<double>{1.0, 0.0});
  CHECK_THROWS_AS(fit_gaussian({a}), UsageError);
}

TEST_CASE("latent CSV") {
  const Model m = small_model(5, 17);
  const fs::path path = temp_file("codes.csv");
  export_latents(m, path);
  const auto back = read_latents_csv(path);
  const auto codes = m.instance_codes();
  REQUIRE(back.size() == 5);
  for (std::size_t n = 0; n < 5; ++n) CHECK(same(back[n].data(), codes[n].data()));

  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  CHECK(header.rfind("index,m0,m1,", 0) == 0);
  CHECK(header.size() > 4);
  CHECK(header.substr(header.size() - 5) == ",m127");

  Model empty = m;
  empty.codebook = LatentCodebook(m.config.context_dim, m.config.semantic_dim);
  export_latents(empty, path);
  CHECK(read_latents_csv(path).empty());
  std::ifstream only(path);
  std::string l1, l2;
  std::getline(only, l1);
  CHECK_FALSE(static_cast<bool>(std::getline(only, l2)));

  std::ofstream(path) << "index,m0\n0,abc\n";
  CHECK_THROWS_AS(read_latents_csv(path), FormatError);
  std::ofstream(path) << "index,m0,m1\n0,1.5\n";
  CHECK_THROWS_AS(read_latents_csv(path), FormatError);
  std::ofstream(path) << "x,y\n";
  CHECK_THROWS_AS(read_latents_csv(path), FormatError);
  CHECK_THROWS_AS(read_latents_csv(temp_file("missing.csv")), FormatError);
  fs::remove(path);
}

#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <numbers>

#include "greedvmaf/greed_features.hpp"
#include "test_support.hpp"

using namespace greedvmaf;
using Catch::Approx;

namespace {

EntropyMap single_patch(std::vector<double> per_frame) {
  EntropyMap m;
  m.patch_size = 5;
  m.patches_x = m.patches_y = 1;
  m.frames = per_frame.size();
  m.values = std::move(per_frame);
  return m;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v[v.size() / 2];
}

}  // namespace

TEST_CASE("scaled entropy of a patch", "[greed][entropy]") {
  SECTION("zero patch scores zero") {
    const std::vector<double> z(25, 0.0);
    CHECK(scaled_entropy(z, 0.1) == 0.0);
    CHECK(scaled_entropy(z, 0.0) == 0.0);
  }
  SECTION("unit Gaussian patch without noise") {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> N(0.0, 1.0);
    std::vector<double> runs;
    for (int r = 0; r < 9; ++r) {
      std::vector<double> x(1024);
      for (auto& v : x) v = N(rng);
      runs.push_back(scaled_entropy(x, 0.0));
    }
    const double expected = std::log(2.0) * 0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e);
    CHECK(median(runs) == Approx(expected).epsilon(0.10));
  }
  SECTION("amplifying a patch raises its scaled entropy") {
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> U(-3.0, 3.0);
    for (int r = 0; r < 50; ++r) {
      std::vector<double> x(25);
      for (auto& v : x) v = U(rng);
      auto y = x;
      for (auto& v : y) v *= 1.5;
      CHECK(scaled_entropy(y, 0.1) > scaled_entropy(x, 0.1));
    }
  }
}

TEST_CASE("entropy map geometry drops the border remainder", "[greed][entropy]") {
  const std::vector<FramePlane> frames(3, FramePlane(23, 12, 0.0));
  const auto m = scaled_entropy_map(frames, 5, 0.1);
  CHECK(m.patches_x == 4);
  CHECK(m.patches_y == 2);
  CHECK(m.frames == 3);
  CHECK(m.values.size() == 24);
  for (double v : m.values) CHECK(v == 0.0);
  CHECK_THROWS_AS(scaled_entropy_map(std::vector<FramePlane>(1, FramePlane(4, 9)), 5, 0.1), InvalidArgument);
}

TEST_CASE("temporal difference hand examples", "[greed][tgreed]") {
  // |(1 + |1 - 1|) * (2 + 1) / (1 + 1) - 1| = 0.5
  CHECK(tgreed_subband(single_patch({2.0}), single_patch({1.0}), single_patch({1.0})) == Approx(0.5).margin(1e-15));
  // |(1 + |2 - 1|) * 2 / 2 - 1| = 1
  CHECK(tgreed_subband(single_patch({1.0}), single_patch({1.0}), single_patch({2.0})) == Approx(1.0).margin(1e-15));
  // identical maps collapse to zero
  const auto m = single_patch({0.3, 1.7, 2.2});
  CHECK(tgreed_subband(m, m, m) == 0.0);
}

TEST_CASE("temporal difference aligns the full-rate reference by index", "[greed][tgreed]") {
  const auto ref = single_patch({1.0, 9.0, 3.0, 9.0});
  const auto pr = single_patch({1.0, 3.0});
  const auto dist = single_patch({1.0, 3.0});
  const std::vector<std::size_t> idx{0, 2};
  CHECK(tgreed_subband(ref, pr, dist, idx) == 0.0);
  const std::vector<std::size_t> wrong{1, 3};
  CHECK(tgreed_subband(ref, pr, dist, wrong) > 0.0);
  const std::vector<std::size_t> oob{0, 4};
  CHECK_THROWS_AS(tgreed_subband(ref, pr, dist, oob), GeometryMismatch);
  CHECK_THROWS_AS(tgreed_subband(ref, pr, single_patch({1.0})), GeometryMismatch);
}

TEST_CASE("GREED features vanish for identical inputs", "[greed][identity]") {
  for (int kind = 0; kind < 3; ++kind) {
    const auto v = testing::make_scene(kind, 1, 160, 160, 12, Rational(60));
    const auto f = extract_greed_features(v, v);
    REQUIRE(f.tgreed.size() == 14);
    REQUIRE(f.sgreed.size() == 2);
    for (double x : f.values()) CHECK(std::abs(x) <= 1e-12);
  }
}

TEST_CASE("frame-rate drop with blur gives positive temporal features", "[greed]") {
  const testing::Scene scene(0, 3);
  const auto ref = scene.render(160, 160, 48, Rational(120));
  const auto dist = testing::blur(temporal_subsample(ref, Rational(30)), 1.5);
  const auto f = extract_greed_features(ref, dist);
  for (double t : f.tgreed) CHECK(t > 0.0);
  for (double s : f.sgreed) CHECK(s >= 0.0);
}

TEST_CASE("GREED extraction is deterministic and non-negative", "[greed][property]") {
  const auto ref = testing::make_scene(1, 4, 160, 160, 16, Rational(60));
  const auto dist = testing::add_noise(testing::blur(ref, 1.0), 4.0, 8);
  const auto a = extract_greed_features(ref, dist);
  const auto b = extract_greed_features(ref, dist);
  CHECK(a.values() == b.values());
  for (double x : a.values()) CHECK(x >= 0.0);
  // directional: swapping roles changes the value in general
  const auto swapped = extract_greed_features(dist, ref);
  CHECK(swapped.values() != a.values());
}

TEST_CASE("feature naming follows scale-major order", "[greed]") {
  const auto n = GreedFeatures::names({4, 5});
  REQUIRE(n.size() == 16);
  CHECK(n.front() == "tgreed_s4_k1");
  CHECK(n[6] == "tgreed_s4_k7");
  CHECK(n[7] == "tgreed_s5_k1");
  CHECK(n[14] == "sgreed_s4");
  CHECK(n[15] == "sgreed_s5");
}

TEST_CASE("alignment checks", "[greed]") {
  const auto ref = testing::constant_video(64, 64, 8, 10.0, Rational(30));
  CHECK_THROWS_AS(align_for_comparison(ref, testing::constant_video(64, 64, 8, 10.0, Rational(60))), InvalidArgument);
  CHECK_THROWS_AS(align_for_comparison(ref, testing::constant_video(32, 64, 8, 10.0, Rational(30))), GeometryMismatch);
  const auto a = align_for_comparison(testing::constant_video(8, 8, 40, 1.0, Rational(120)),
                                      testing::constant_video(8, 8, 11, 1.0, Rational(30)));
  CHECK(a.pr.length() == 10);
  CHECK(a.dist.length() == 10);
  CHECK(a.ref_index.back() == 36);
}

TEST_CASE("spatial difference grows with additive noise", "[greed][sgreed]") {
  const auto ref = testing::make_scene(0, 6, 96, 96, 2, Rational(30));
  const std::vector<double> sigmas{2.0, 5.0, 10.0, 20.0};
  std::vector<std::vector<double>> by_level(sigmas.size());
  for (std::uint64_t seed = 0; seed < 10; ++seed)
    for (std::size_t i = 0; i < sigmas.size(); ++i)
      by_level[i].push_back(sgreed(ref, testing::add_noise(ref, sigmas[i], 100 + seed), 5, 0.1, 7));
  for (std::size_t i = 1; i < sigmas.size(); ++i) CHECK(median(by_level[i]) > median(by_level[i - 1]));
  CHECK(sgreed(ref, ref, 5, 0.1, 7) == 0.0);
}

TEST_CASE("band-pass entropy separates frame rates more than blur levels", "[greed][frame-rate]") {
  const testing::Scene scene(0, 21);
  const auto mean_entropy = [&](int fps, double sigma) {
    auto v = testing::blur(scene.render(256, 256, fps == 120 ? 64 : 16, Rational(fps)), sigma);
    const auto prof = entropy_profile(v, 4);
    double s = 0.0;
    std::size_t n = 0;
    for (const auto& band : prof)
      for (double e : band) {
        s += e;
        ++n;
      }
    return s / static_cast<double>(n);
  };
  std::vector<double> hi, lo;
  for (double sigma : {0.5, 1.0, 2.0}) {
    hi.push_back(mean_entropy(120, sigma));
    lo.push_back(mean_entropy(30, sigma));
  }
  const auto [hmin, hmax] = std::minmax_element(hi.begin(), hi.end());
  const auto [lmin, lmax] = std::minmax_element(lo.begin(), lo.end());
  const double gap = std::max(*lmin - *hmax, *hmin - *lmax);
  const double spread = std::max(*hmax - *hmin, *lmax - *lmin);
  INFO("120 fps " << *hmin << ".." << *hmax << ", 30 fps " << *lmin << ".." << *lmax);
  CHECK(gap > 2.0 * spread);
}

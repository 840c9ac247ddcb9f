#include <catch2/catch_amalgamated.hpp>

#include <numbers>

#include "greedvmaf/bandpass.hpp"
#include "test_support.hpp"

using namespace greedvmaf;
using Catch::Approx;

namespace {

VideoSequence random_video(int w, int h, int frames, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(0.0, 255.0);
  std::vector<FramePlane> out;
  for (int f = 0; f < frames; ++f) {
    FramePlane p(w, h);
    for (auto& v : p.samples) v = U(rng);
    out.push_back(std::move(p));
  }
  return VideoSequence(std::move(out), Rational(60));
}

VideoSequence temporal_tone(double cycles_per_frame, int frames) {
  std::vector<FramePlane> out;
  for (int f = 0; f < frames; ++f)
    out.emplace_back(2, 2, 100.0 + 50.0 * std::cos(2.0 * std::numbers::pi * cycles_per_frame * f));
  return VideoSequence(std::move(out), Rational(120));
}

std::vector<double> dilate(const std::vector<double>& taps, int step) {
  std::vector<double> out((taps.size() - 1) * static_cast<std::size_t>(step) + 1, 0.0);
  for (std::size_t i = 0; i < taps.size(); ++i) out[i * static_cast<std::size_t>(step)] = taps[i];
  return out;
}

std::vector<double> convolve(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> out(a.size() + b.size() - 1, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
  return out;
}

double energy(const std::vector<FramePlane>& frames, std::size_t skip) {
  double e = 0.0;
  for (std::size_t t = skip; t + skip < frames.size(); ++t) e += frames[t].samples[0] * frames[t].samples[0];
  return e;
}

}  // namespace

TEST_CASE("reflect index", "[bandpass]") {
  CHECK(reflect_index(-1, 5) == 0);
  CHECK(reflect_index(-2, 5) == 1);
  CHECK(reflect_index(5, 5) == 4);
  CHECK(reflect_index(6, 5) == 3);
  CHECK(reflect_index(12, 5) == 2);
  CHECK(reflect_index(-7, 5) == 3);
}

TEST_CASE("filter bank validation", "[bandpass]") {
  CHECK_NOTHROW(FilterBankSpec::bior22());
  CHECK_THROWS_AS(FilterBankSpec({0.5, 0.5}, {1.0}, {1.0}, {1.0}, 3), InvalidArgument);
  CHECK_THROWS_AS(FilterBankSpec({0.2, 0.5, 0.3}, {1.0}, {1.0}, {1.0}, 3), InvalidArgument);
  CHECK_THROWS_AS(FilterBankSpec({1.0}, {1.0}, {1.0}, {0.5}, 3), InvalidArgument);  // 1*1 + 1*0.5 != 2
  CHECK_THROWS_AS(FilterBankSpec::bior22(0), InvalidArgument);
}

TEST_CASE("packet analysis reconstructs its input", "[bandpass][property]") {
  const auto spec = FilterBankSpec::bior22();
  for (int frames : {8, 13, 37, 64}) {
    const auto v = random_video(6, 5, frames, static_cast<std::uint64_t>(frames));
    const auto leaves = wavelet_packet_leaves(v, spec);
    REQUIRE(leaves.size() == 8);
    const auto back = wavelet_packet_reconstruct(leaves, spec, v.fps);
    REQUIRE(back.length() == v.length());
    double worst = 0.0;
    for (std::size_t t = 0; t < v.length(); ++t)
      for (std::size_t p = 0; p < v.frames[t].size(); ++p)
        worst = std::max(worst, std::abs(back.frames[t].samples[p] - v.frames[t].samples[p]));
    INFO("frames " << frames);
    CHECK(worst < 1e-9);
  }
}

TEST_CASE("temporally constant input has empty band-pass responses", "[bandpass]") {
  const auto v = testing::constant_video(7, 4, 16, 173.0);
  const auto bands = temporal_wavelet_packet(v);
  REQUIRE(bands.size() == 7);
  for (const auto& b : bands)
    for (const auto& f : b.frames)
      for (double s : f.samples) CHECK(std::abs(s) < 1e-10);
}

TEST_CASE("subband impulse responses match cascaded dilated filters", "[bandpass]") {
  const auto spec = FilterBankSpec::bior22();
  constexpr int n = 64, centre = 32;
  std::vector<FramePlane> frames(n, FramePlane(1, 1, 0.0));
  frames[centre].samples[0] = 1.0;
  const auto leaves = wavelet_packet_leaves(VideoSequence(frames, Rational(60)), spec);
  const auto& h0 = spec.analysis_lo;
  const auto& h1 = spec.analysis_hi;
  // frequency position -> (level 1, level 2, level 3) branch, 1 = highpass
  const std::vector<std::array<int, 3>> path{{0, 0, 0}, {0, 0, 1}, {0, 1, 1}, {0, 1, 0},
                                             {1, 1, 0}, {1, 1, 1}, {1, 0, 1}, {1, 0, 0}};
  for (std::size_t f = 0; f < 8; ++f) {
    auto kernel = std::vector<double>{1.0};
    for (int level = 0; level < 3; ++level)
      kernel = convolve(kernel, dilate(path[f][static_cast<std::size_t>(level)] ? h1 : h0, 1 << level));
    const auto half = static_cast<int>(kernel.size() / 2);
    for (int t = 0; t < n; ++t) {
      const int k = t - centre + half;
      const double expected = (k >= 0 && k < static_cast<int>(kernel.size())) ? kernel[static_cast<std::size_t>(k)] : 0.0;
      INFO("leaf " << f << " t " << t);
      CHECK(leaves[f][static_cast<std::size_t>(t)].samples[0] == Approx(expected).margin(1e-12));
    }
  }
}

TEST_CASE("subbands are ordered by temporal frequency", "[bandpass]") {
  // sweep a tone over (0, 1/2] cycles per frame and record where each subband responds most
  constexpr int steps = 128;
  std::vector<double> peak_freq(7, 0.0), peak_energy(7, -1.0);
  for (int q = 1; q <= steps; ++q) {
    const double f = 0.5 * q / steps;
    const auto bands = temporal_wavelet_packet(temporal_tone(f, 256));
    for (std::size_t b = 0; b < bands.size(); ++b) {
      const double e = energy(bands[b].frames, 16);
      if (e > peak_energy[b]) {
        peak_energy[b] = e;
        peak_freq[b] = f;
      }
    }
  }
  for (std::size_t b = 0; b < 7; ++b) {
    INFO("subband " << b + 1 << " peaks at " << peak_freq[b]);
    if (b > 0) CHECK(peak_freq[b] > peak_freq[b - 1]);
    // nominal band is [k/16, (k+1)/16]; allow one band of slack for the short filters
    CHECK(peak_freq[b] >= (static_cast<double>(b) + 1.0 - 1.0) / 16.0);
    CHECK(peak_freq[b] <= (static_cast<double>(b) + 2.0 + 1.0) / 16.0);
  }
  SECTION("a tone near Nyquist lands in the highest subband") {
    const auto bands = temporal_wavelet_packet(temporal_tone(0.49, 256));
    std::size_t best = 0;
    for (std::size_t b = 1; b < bands.size(); ++b)
      if (energy(bands[b].frames, 16) > energy(bands[best].frames, 16)) best = b;
    CHECK(bands[best].index == 7);
  }
  SECTION("an impulse excites every subband") {
    std::vector<FramePlane> frames(32, FramePlane(1, 1, 0.0));
    frames[16].samples[0] = 255.0;
    for (const auto& b : temporal_wavelet_packet(VideoSequence(frames, Rational(30)))) CHECK(energy(b.frames, 0) > 0.0);
  }
}

TEST_CASE("packet transform is linear and shift covariant", "[bandpass][property]") {
  const auto a = random_video(3, 3, 40, 1);
  const auto b = random_video(3, 3, 40, 2);
  auto combo = a;
  for (std::size_t t = 0; t < combo.length(); ++t)
    for (std::size_t p = 0; p < combo.frames[t].size(); ++p)
      combo.frames[t].samples[p] = 2.0 * a.frames[t].samples[p] - 0.5 * b.frames[t].samples[p];
  const auto wa = temporal_wavelet_packet(a), wb = temporal_wavelet_packet(b), wc = temporal_wavelet_packet(combo);
  for (std::size_t k = 0; k < 7; ++k)
    for (std::size_t t = 0; t < 40; ++t)
      for (std::size_t p = 0; p < 9; ++p)
        CHECK(wc[k].frames[t].samples[p] ==
              Approx(2.0 * wa[k].frames[t].samples[p] - 0.5 * wb[k].frames[t].samples[p]).margin(1e-9));

  // shift by one frame; interior samples beyond the filter support from either end must agree
  auto shifted = a;
  shifted.frames.erase(shifted.frames.begin());
  const auto ws = temporal_wavelet_packet(shifted);
  constexpr std::size_t support = 14;  // half-length of the three-level cascade
  for (std::size_t k = 0; k < 7; ++k)
    for (std::size_t t = support; t + support + 1 < 40; ++t)
      for (std::size_t p = 0; p < 9; ++p)
        CHECK(std::abs(ws[k].frames[t].samples[p] - wa[k].frames[t + 1].samples[p]) < 1e-10);
}

TEST_CASE("packet needs enough frames", "[bandpass]") {
  CHECK_THROWS_AS(temporal_wavelet_packet(testing::constant_video(4, 4, 7, 1.0)), InvalidArgument);
  CHECK_NOTHROW(temporal_wavelet_packet(testing::constant_video(4, 4, 8, 1.0)));
}

TEST_CASE("spatial MS filter", "[bandpass][ms]") {
  SECTION("constant plane maps to exact zero") {
    const auto out = spatial_ms_filter(FramePlane(20, 11, 91.5));
    for (double v : out.samples) CHECK(v == 0.0);
  }
  SECTION("interior pixels equal centre minus window mean") {
    FramePlane p(16, 16);
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> U(0, 255);
    for (auto& v : p.samples) v = U(rng);
    const auto out = spatial_ms_filter(p, 7);
    for (int y = 3; y < 13; ++y)
      for (int x = 3; x < 13; ++x) {
        double s = 0.0;
        for (int dy = -3; dy <= 3; ++dy)
          for (int dx = -3; dx <= 3; ++dx) s += p.at(x + dx, y + dy);
        CHECK(out.at(x, y) == Approx(p.at(x, y) - s / 49.0).margin(1e-10));
      }
  }
  SECTION("invalid windows") {
    CHECK_THROWS_AS(spatial_ms_filter(FramePlane(10, 10), 4), InvalidArgument);
    CHECK_THROWS_AS(spatial_ms_filter(FramePlane(10, 10), 0), InvalidArgument);
  }
  SECTION("windows wider than the plane still annihilate constants") {
    for (double v : spatial_ms_filter(FramePlane(5, 3, 12.0), 7).samples) CHECK(v == 0.0);
  }
}

#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "greedvmaf/error.hpp"
#include "greedvmaf/media_io.hpp"

namespace greedvmaf {

/// Half-sample symmetric extension: ... x1 x0 | x0 x1 ... x(n-1) | x(n-1) x(n-2) ...
inline std::ptrdiff_t reflect_index(std::ptrdiff_t i, std::ptrdiff_t n) {
  const std::ptrdiff_t period = 2 * n;
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - 1 - i;
}

/// Two-channel filter bank with zero-phase (centred, odd-length) taps.
///
/// For the undecimated transform perfect reconstruction requires
///   H0(z) G0(z) + H1(z) G1(z) = 2,
/// which the constructor checks to 1e-10. Symmetric taps keep the
/// half-sample symmetric boundary extension exact through every stage.
struct FilterBankSpec {
  std::vector<double> analysis_lo;
  std::vector<double> analysis_hi;
  std::vector<double> synthesis_lo;
  std::vector<double> synthesis_hi;
  int levels = 3;

  FilterBankSpec(std::vector<double> h0, std::vector<double> h1, std::vector<double> g0,
                 std::vector<double> g1, int lv)
      : analysis_lo(std::move(h0)), analysis_hi(std::move(h1)), synthesis_lo(std::move(g0)),
        synthesis_hi(std::move(g1)), levels(lv) {
    if (levels < 1) throw InvalidArgument("filter bank needs at least one level");
    for (const auto* f : {&analysis_lo, &analysis_hi, &synthesis_lo, &synthesis_hi}) {
      if (f->size() % 2 == 0) throw InvalidArgument("filter taps must have odd length");
      for (std::size_t i = 0; i < f->size(); ++i)
        if (std::abs((*f)[i] - (*f)[f->size() - 1 - i]) > 1e-12)
          throw InvalidArgument("filter taps must be symmetric");
    }
    const auto a = convolve(analysis_lo, synthesis_lo);
    const auto b = convolve(analysis_hi, synthesis_hi);
    const std::size_t len = std::max(a.size(), b.size());
    for (std::size_t i = 0; i < len; ++i) {
      // both products are centred; align on their centres
      const auto at = [len](const std::vector<double>& v, std::size_t j) {
        const std::ptrdiff_t off = static_cast<std::ptrdiff_t>(len - v.size()) / 2;
        const std::ptrdiff_t k = static_cast<std::ptrdiff_t>(j) - off;
        return (k >= 0 && k < static_cast<std::ptrdiff_t>(v.size())) ? v[static_cast<std::size_t>(k)] : 0.0;
      };
      const double expected = (i == len / 2) ? 2.0 : 0.0;
      if (std::abs(at(a, i) + at(b, i) - expected) > 1e-10)
        throw InvalidArgument("filter bank fails the perfect-reconstruction condition");
    }
  }

  /// Biorthogonal 2.2 (CDF 5/3), three-level packet tree.
  static FilterBankSpec bior22(int levels = 3) {
    const double r2 = std::sqrt(2.0);
    return FilterBankSpec({-r2 / 8, r2 / 4, 3 * r2 / 4, r2 / 4, -r2 / 8},  //
                          {r2 / 4, -r2 / 2, r2 / 4},                        //
                          {r2 / 4, r2 / 2, r2 / 4},                         //
                          {r2 / 8, r2 / 4, -3 * r2 / 4, r2 / 4, r2 / 8}, levels);
  }

  std::size_t leaf_count() const noexcept { return std::size_t{1} << levels; }

 private:
  static std::vector<double> convolve(const std::vector<double>& a, const std::vector<double>& b) {
    std::vector<double> out(a.size() + b.size() - 1, 0.0);
    for (std::size_t i = 0; i < a.size(); ++i)
      for (std::size_t j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
    return out;
  }
};

/// One temporal band-pass response B_k, aligned frame-for-frame with its input.
struct SubbandSequence {
  int index = 0;  // 1 = lowest retained frequency
  std::vector<FramePlane> frames;
  Rational source_fps{1};
};

namespace detail {

// Correlates every pixel's temporal signal with centred taps dilated by `step`.
inline std::vector<FramePlane> filter_temporal(const std::vector<FramePlane>& in, std::span<const double> taps,
                                               std::ptrdiff_t step) {
  const auto n = static_cast<std::ptrdiff_t>(in.size());
  const auto centre = static_cast<std::ptrdiff_t>(taps.size() / 2);
  const std::size_t px = in.front().size();
  std::vector<FramePlane> out(in.size(), FramePlane(in.front().width, in.front().height));
  for (std::ptrdiff_t t = 0; t < n; ++t) {
    auto& dst = out[static_cast<std::size_t>(t)].samples;
    for (std::size_t j = 0; j < taps.size(); ++j) {
      const double c = taps[j];
      if (c == 0.0) continue;
      const auto src_t = reflect_index(t + (static_cast<std::ptrdiff_t>(j) - centre) * step, n);
      const auto& src = in[static_cast<std::size_t>(src_t)].samples;
      for (std::size_t p = 0; p < px; ++p) dst[p] += c * src[p];
    }
  }
  return out;
}

inline void accumulate(std::vector<FramePlane>& acc, const std::vector<FramePlane>& add, double scale) {
  for (std::size_t t = 0; t < acc.size(); ++t)
    for (std::size_t p = 0; p < acc[t].size(); ++p) acc[t].samples[p] += scale * add[t].samples[p];
}

inline std::size_t gray_code(std::size_t i) { return i ^ (i >> 1); }

}  // namespace detail

/// Undecimated wavelet packet analysis. Returns all 2^levels leaves in
/// frequency order; leaf 0 is the all-lowpass band.
inline std::vector<std::vector<FramePlane>> wavelet_packet_leaves(const VideoSequence& video,
                                                                  const FilterBankSpec& spec) {
  video.validate();
  const std::size_t min_len = std::size_t{1} << spec.levels;
  if (video.length() < min_len)
    throw InvalidArgument("wavelet packet needs at least " + std::to_string(min_len) + " frames, got " +
                          std::to_string(video.length()));
  // natural (Paley) order: child 2n is lowpass of n, 2n+1 highpass
  std::vector<std::vector<FramePlane>> nodes{video.frames};
  for (int level = 0; level < spec.levels; ++level) {
    const std::ptrdiff_t step = std::ptrdiff_t{1} << level;
    std::vector<std::vector<FramePlane>> next;
    next.reserve(nodes.size() * 2);
    for (const auto& node : nodes) {
      next.push_back(detail::filter_temporal(node, spec.analysis_lo, step));
      next.push_back(detail::filter_temporal(node, spec.analysis_hi, step));
    }
    nodes = std::move(next);
  }
  // frequency position f lives at natural index gray(f)
  std::vector<std::vector<FramePlane>> ordered(nodes.size());
  for (std::size_t f = 0; f < nodes.size(); ++f) ordered[f] = std::move(nodes[detail::gray_code(f)]);
  return ordered;
}

/// Inverse of wavelet_packet_leaves (leaves in frequency order, lowpass included).
inline VideoSequence wavelet_packet_reconstruct(const std::vector<std::vector<FramePlane>>& leaves,
                                                const FilterBankSpec& spec, Rational fps) {
  if (leaves.size() != spec.leaf_count()) throw InvalidArgument("wrong number of packet leaves");
  std::vector<std::vector<FramePlane>> nodes(leaves.size());
  for (std::size_t f = 0; f < leaves.size(); ++f) nodes[detail::gray_code(f)] = leaves[f];
  for (int level = spec.levels - 1; level >= 0; --level) {
    const std::ptrdiff_t step = std::ptrdiff_t{1} << level;
    std::vector<std::vector<FramePlane>> parents;
    parents.reserve(nodes.size() / 2);
    for (std::size_t i = 0; i < nodes.size(); i += 2) {
      auto parent = detail::filter_temporal(nodes[i], spec.synthesis_lo, step);
      for (auto& f : parent)
        for (auto& v : f.samples) v *= 0.5;
      detail::accumulate(parent, detail::filter_temporal(nodes[i + 1], spec.synthesis_hi, step), 0.5);
      parents.push_back(std::move(parent));
    }
    nodes = std::move(parents);
  }
  return VideoSequence(std::move(nodes.front()), fps);
}

/// Temporal band-pass responses B_1..B_7 (for three levels); the all-lowpass leaf is dropped.
inline std::vector<SubbandSequence> temporal_wavelet_packet(const VideoSequence& video,
                                                            const FilterBankSpec& spec = FilterBankSpec::bior22()) {
  auto leaves = wavelet_packet_leaves(video, spec);
  std::vector<SubbandSequence> out;
  out.reserve(leaves.size() - 1);
  for (std::size_t f = 1; f < leaves.size(); ++f)
    out.push_back(SubbandSequence{static_cast<int>(f), std::move(leaves[f]), video.fps});
  return out;
}

/// Local mean subtraction with a window x window uniform average and
/// half-sample symmetric borders (repeated for windows wider than the
/// plane). Constants map to exactly zero.
inline FramePlane spatial_ms_filter(const FramePlane& plane, int window = 7) {
  if (window < 1 || window % 2 == 0) throw InvalidArgument("MS window must be a positive odd size");
  const int r = window / 2;
  const double inv = 1.0 / (static_cast<double>(window) * window);
  FramePlane out(plane.width, plane.height);
  for (int y = 0; y < plane.height; ++y) {
    for (int x = 0; x < plane.width; ++x) {
      const double centre = plane.at(x, y);
      double dev = 0.0;  // sum of (neighbour - centre)
      for (int dy = -r; dy <= r; ++dy) {
        const auto yy = static_cast<int>(reflect_index(y + dy, plane.height));
        const double* row = &plane.samples[static_cast<std::size_t>(yy) * plane.width];
        for (int dx = -r; dx <= r; ++dx) dev += row[reflect_index(x + dx, plane.width)] - centre;
      }
      out.at(x, y) = -dev * inv;
    }
  }
  return out;
}

}  // namespace greedvmaf

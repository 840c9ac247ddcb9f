#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "greedvmaf/bandpass.hpp"
#include "greedvmaf/error.hpp"
#include "greedvmaf/ggd.hpp"
#include "greedvmaf/media_io.hpp"

namespace greedvmaf {

struct GreedConfig {
  std::vector<int> scales{4, 5};
  int patch_size = 5;      // patch side at the downscaled resolution
  double sigma_n2 = 0.1;   // neural-noise variance
  int ms_window = 7;
  FilterBankSpec filters = FilterBankSpec::bior22();
};

/// Scaled entropies indexed by (frame, patch), patches in raster order.
struct EntropyMap {
  int patch_size = 0;
  int patches_x = 0;
  int patches_y = 0;
  std::size_t frames = 0;
  std::vector<double> values;

  std::size_t patch_count() const noexcept { return static_cast<std::size_t>(patches_x) * patches_y; }
  double at(std::size_t t, std::size_t p) const { return values[t * patch_count() + p]; }
  std::span<const double> frame(std::size_t t) const {
    return std::span(values).subspan(t * patch_count(), patch_count());
  }
  double frame_mean(std::size_t t) const {
    double s = 0.0;
    for (double v : frame(t)) s += v;
    return s / static_cast<double>(patch_count());
  }
};

/// log(1 + var) * h for the GGD fitted to `coeffs` after the neural-noise
/// channel. Zero-variance patches score 0.
inline double scaled_entropy(std::span<const double> coeffs, double sigma_n2) {
  const auto m = sample_moments(coeffs);
  const auto fit = fit_ggd_from_moments(m.variance, m.kurtosis);
  if (!fit) return 0.0;
  const auto noisy = apply_neural_noise(*fit, sigma_n2);
  return std::log1p(noisy.variance()) * ggd_entropy(noisy);
}

/// Non-overlapping patch_size x patch_size patches per frame; the border
/// remainder that does not fill a whole patch is ignored.
inline EntropyMap scaled_entropy_map(const std::vector<FramePlane>& frames, int patch_size, double sigma_n2) {
  if (frames.empty()) throw InvalidArgument("entropy map of an empty sequence");
  if (patch_size < 2) throw InvalidArgument("patch size must be at least 2");
  const int w = frames.front().width, h = frames.front().height;
  if (w < patch_size || h < patch_size)
    throw InvalidArgument("frame " + std::to_string(w) + "x" + std::to_string(h) + " smaller than patch size " +
                          std::to_string(patch_size));
  EntropyMap map;
  map.patch_size = patch_size;
  map.patches_x = w / patch_size;
  map.patches_y = h / patch_size;
  map.frames = frames.size();
  map.values.reserve(map.frames * map.patch_count());
  std::vector<double> patch(static_cast<std::size_t>(patch_size) * patch_size);
  for (const auto& fr : frames) {
    if (fr.width != w || fr.height != h) throw GeometryMismatch("frames differ in size");
    for (int py = 0; py < map.patches_y; ++py) {
      for (int px = 0; px < map.patches_x; ++px) {
        std::size_t i = 0;
        for (int y = py * patch_size; y < (py + 1) * patch_size; ++y)
          for (int x = px * patch_size; x < (px + 1) * patch_size; ++x) patch[i++] = fr.at(x, y);
        map.values.push_back(scaled_entropy(patch, sigma_n2));
      }
    }
  }
  return map;
}

inline EntropyMap scaled_entropy_map(const SubbandSequence& subband, int patch_size, double sigma_n2) {
  return scaled_entropy_map(subband.frames, patch_size, sigma_n2);
}

/// Per-frame temporal entropic difference for one subband. Frame t of the
/// pseudo-reference / distorted maps pairs with frame ref_index[t] of the
/// full-rate reference map.
inline std::vector<double> tgreed_per_frame(const EntropyMap& ref, const EntropyMap& pr, const EntropyMap& dist,
                                            std::span<const std::size_t> ref_index) {
  if (pr.frames != dist.frames || pr.patches_x != dist.patches_x || pr.patches_y != dist.patches_y)
    throw GeometryMismatch("pseudo-reference and distorted entropy maps differ in geometry");
  if (ref.patches_x != pr.patches_x || ref.patches_y != pr.patches_y)
    throw GeometryMismatch("reference entropy map has a different patch grid");
  if (ref_index.size() != pr.frames) throw GeometryMismatch("reference frame map length mismatch");
  const std::size_t P = pr.patch_count();
  std::vector<double> out(pr.frames);
  for (std::size_t t = 0; t < pr.frames; ++t) {
    if (ref_index[t] >= ref.frames) throw GeometryMismatch("reference frame index out of range");
    double acc = 0.0;
    for (std::size_t p = 0; p < P; ++p) {
      const double e_r = ref.at(ref_index[t], p);
      const double e_pr = pr.at(t, p);
      const double e_d = dist.at(t, p);
      acc += std::abs((1.0 + std::abs(e_d - e_pr)) * (e_r + 1.0) / (e_pr + 1.0) - 1.0);
    }
    out[t] = acc / static_cast<double>(P);
  }
  return out;
}

inline double mean_of(std::span<const double> v) {
  if (v.empty()) throw InvalidArgument("mean of empty sequence");
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

/// TGREED for one subband, pooled over frames by the arithmetic mean.
inline double tgreed_subband(const EntropyMap& ref, const EntropyMap& pr, const EntropyMap& dist,
                             std::span<const std::size_t> ref_index) {
  return mean_of(tgreed_per_frame(ref, pr, dist, ref_index));
}

/// Same-rate form: reference frames align one-to-one with the pseudo-reference.
inline double tgreed_subband(const EntropyMap& ref, const EntropyMap& pr, const EntropyMap& dist) {
  if (ref.frames != pr.frames) throw GeometryMismatch("reference and pseudo-reference frame counts differ");
  std::vector<std::size_t> idx(pr.frames);
  for (std::size_t t = 0; t < idx.size(); ++t) idx[t] = t;
  return tgreed_subband(ref, pr, dist, idx);
}

/// Spatial scaled entropies theta over MS-filtered frames.
inline EntropyMap spatial_entropy_map(const VideoSequence& video, int patch_size, double sigma_n2, int ms_window) {
  std::vector<FramePlane> ms;
  ms.reserve(video.length());
  for (const auto& f : video.frames) ms.push_back(spatial_ms_filter(f, ms_window));
  return scaled_entropy_map(ms, patch_size, sigma_n2);
}

/// Spatial entropic difference between equally sized videos, mean over frames.
/// When frame rates differ the caller passes the pseudo-reference as `ref`.
inline double sgreed(const VideoSequence& ref, const VideoSequence& dist, int patch_size, double sigma_n2,
                     int ms_window) {
  if (ref.length() != dist.length() || ref.width() != dist.width() || ref.height() != dist.height())
    throw GeometryMismatch("SGREED inputs differ in frame count or dimensions");
  const auto r = spatial_entropy_map(ref, patch_size, sigma_n2, ms_window);
  const auto d = spatial_entropy_map(dist, patch_size, sigma_n2, ms_window);
  std::vector<double> per_frame(r.frames);
  for (std::size_t t = 0; t < r.frames; ++t) {
    double acc = 0.0;
    for (std::size_t p = 0; p < r.patch_count(); ++p) acc += std::abs(d.at(t, p) - r.at(t, p));
    per_frame[t] = acc / static_cast<double>(r.patch_count());
  }
  return mean_of(per_frame);
}

struct GreedFeatures {
  std::vector<int> scales;
  std::vector<double> tgreed;  // 7 per scale, scale-major
  std::vector<double> sgreed;  // one per scale

  /// Flattened as (s4:T1..T7, s5:T1..T7, s4:S, s5:S) for the default scales.
  std::vector<double> values() const {
    std::vector<double> v(tgreed);
    v.insert(v.end(), sgreed.begin(), sgreed.end());
    return v;
  }

  static std::vector<std::string> names(const std::vector<int>& scales, std::size_t bands = 7) {
    std::vector<std::string> n;
    for (int s : scales)
      for (std::size_t k = 1; k <= bands; ++k)
        n.push_back("tgreed_s" + std::to_string(s) + "_k" + std::to_string(k));
    for (int s : scales) n.push_back("sgreed_s" + std::to_string(s));
    return n;
  }
};

/// Reference, pseudo-reference and distorted sequences with their frame
/// alignment. Lengths of PR and D are trimmed to the shorter of the two.
struct AlignedTriplet {
  VideoSequence pr;
  VideoSequence dist;
  std::vector<std::size_t> ref_index;  // PR frame t == ref frame ref_index[t]
};

inline AlignedTriplet align_for_comparison(const VideoSequence& ref, const VideoSequence& dist) {
  ref.validate();
  dist.validate();
  if (ref.width() != dist.width() || ref.height() != dist.height())
    throw GeometryMismatch("reference " + std::to_string(ref.width()) + "x" + std::to_string(ref.height()) +
                           " and distorted " + std::to_string(dist.width()) + "x" + std::to_string(dist.height()) +
                           " differ in resolution");
  if (ref.fps < dist.fps) throw InvalidArgument("distorted frame rate exceeds reference frame rate");
  auto idx = subsample_indices(ref.length(), ref.fps, dist.fps);
  const std::size_t n = std::min(idx.size(), dist.length());
  if (n == 0) throw InvalidArgument("no overlapping frames between reference and distorted video");
  idx.resize(n);
  std::vector<FramePlane> pr_frames, d_frames(dist.frames.begin(), dist.frames.begin() + static_cast<std::ptrdiff_t>(n));
  pr_frames.reserve(n);
  for (auto i : idx) pr_frames.push_back(ref.frames[i]);
  return {VideoSequence(std::move(pr_frames), dist.fps, ref.content_id),
          VideoSequence(std::move(d_frames), dist.fps, dist.content_id), std::move(idx)};
}

/// Scaled temporal entropy maps of one (already downscaled) video, one per subband.
inline std::vector<EntropyMap> temporal_entropy_maps(const VideoSequence& video, const GreedConfig& cfg) {
  std::vector<EntropyMap> maps;
  for (const auto& band : temporal_wavelet_packet(video, cfg.filters))
    maps.push_back(scaled_entropy_map(band, cfg.patch_size, cfg.sigma_n2));
  return maps;
}

inline GreedFeatures extract_greed_features(const VideoSequence& ref, const VideoSequence& dist,
                                            const GreedConfig& cfg = {}) {
  const auto aligned = align_for_comparison(ref, dist);
  GreedFeatures out;
  out.scales = cfg.scales;
  for (int s : cfg.scales) {
    const auto ref_s = downscale(ref, s);
    std::vector<FramePlane> pr_frames;
    for (auto i : aligned.ref_index) pr_frames.push_back(ref_s.frames[i]);
    const VideoSequence pr_s(std::move(pr_frames), aligned.pr.fps);
    const auto dist_s = downscale(aligned.dist, s);

    const auto ref_maps = temporal_entropy_maps(ref_s, cfg);
    const auto pr_maps = temporal_entropy_maps(pr_s, cfg);
    const auto dist_maps = temporal_entropy_maps(dist_s, cfg);
    for (std::size_t k = 0; k < pr_maps.size(); ++k)
      out.tgreed.push_back(tgreed_subband(ref_maps[k], pr_maps[k], dist_maps[k], aligned.ref_index));
    out.sgreed.push_back(sgreed(pr_s, dist_s, cfg.patch_size, cfg.sigma_n2, cfg.ms_window));
  }
  return out;
}

/// Per-frame mean scaled temporal entropy for each subband at one scale:
/// result[k-1][t]. Backs the entropy dump used to inspect frame-rate bias.
inline std::vector<std::vector<double>> entropy_profile(const VideoSequence& video, int scale,
                                                        const GreedConfig& cfg = {}) {
  const auto maps = temporal_entropy_maps(downscale(video, scale), cfg);
  std::vector<std::vector<double>> out;
  for (const auto& m : maps) {
    std::vector<double> row(m.frames);
    for (std::size_t t = 0; t < m.frames; ++t) row[t] = m.frame_mean(t);
    out.push_back(std::move(row));
  }
  return out;
}

}  // namespace greedvmaf

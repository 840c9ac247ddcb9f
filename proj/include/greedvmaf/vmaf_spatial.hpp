#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "greedvmaf/bandpass.hpp"
#include "greedvmaf/error.hpp"
#include "greedvmaf/media_io.hpp"

namespace greedvmaf {

struct VmafConfig {
  int vif_window = 9;            // Gaussian support at every scale; sigma = window / 6
  double vif_sigma_nsq = 2.0;    // HVS noise variance on the [0, 255] scale
  double dlm_angle_deg = 1.0;    // decoupling angle threshold
  double view_distance = 3.0;    // in display heights, for the CSF
  int display_height = 1080;
  double dlm_border_divisor = 16.0;
  // Cap on the gain credited to contrast enhancement. 1 bounds both features
  // by 1; a large value (e.g. 100) restores the unclamped formulas.
  double enhancement_gain_limit = 1.0;
};

struct VmafSpatialFeatures {
  std::array<double, 4> vif{};  // scale 0 (finest) .. 3
  double dlm = 0.0;

  std::vector<double> values() const { return {vif[0], vif[1], vif[2], vif[3], dlm}; }
  static std::vector<std::string> names() { return {"vif_s0", "vif_s1", "vif_s2", "vif_s3", "dlm"}; }
};

namespace detail {

inline std::vector<double> gaussian_taps(int size) {
  const double sigma = size / 6.0;
  std::vector<double> k(static_cast<std::size_t>(size));
  double sum = 0.0;
  for (int i = 0; i < size; ++i) {
    const double x = i - size / 2;
    k[static_cast<std::size_t>(i)] = std::exp(-x * x / (2.0 * sigma * sigma));
    sum += k[static_cast<std::size_t>(i)];
  }
  for (auto& v : k) v /= sum;
  return k;
}

// Separable centred filtering with half-sample symmetric borders.
inline FramePlane filter_separable(const FramePlane& in, const std::vector<double>& taps) {
  const int r = static_cast<int>(taps.size() / 2);
  FramePlane tmp(in.width, in.height), out(in.width, in.height);
  for (int y = 0; y < in.height; ++y)
    for (int x = 0; x < in.width; ++x) {
      double s = 0.0;
      for (int j = -r; j <= r; ++j) s += taps[static_cast<std::size_t>(j + r)] * in.at(static_cast<int>(reflect_index(x + j, in.width)), y);
      tmp.at(x, y) = s;
    }
  for (int y = 0; y < in.height; ++y)
    for (int x = 0; x < in.width; ++x) {
      double s = 0.0;
      for (int j = -r; j <= r; ++j) s += taps[static_cast<std::size_t>(j + r)] * tmp.at(x, static_cast<int>(reflect_index(y + j, in.height)));
      out.at(x, y) = s;
    }
  return out;
}

inline FramePlane decimate2(const FramePlane& in) {
  FramePlane out((in.width + 1) / 2, (in.height + 1) / 2);
  for (int y = 0; y < out.height; ++y)
    for (int x = 0; x < out.width; ++x) out.at(x, y) = in.at(2 * x, 2 * y);
  return out;
}

inline FramePlane multiply(const FramePlane& a, const FramePlane& b) {
  FramePlane out(a.width, a.height);
  for (std::size_t i = 0; i < a.size(); ++i) out.samples[i] = a.samples[i] * b.samples[i];
  return out;
}

}  // namespace detail

/// Pixel-domain VIF of one frame pair at scales 0..3.
inline std::array<double, 4> vif_frame(const FramePlane& ref, const FramePlane& dist, const VmafConfig& cfg = {}) {
  if (!ref.same_shape(dist)) throw GeometryMismatch("VIF inputs differ in size");
  constexpr double kEps = 1e-10;
  const auto taps = detail::gaussian_taps(cfg.vif_window);
  std::array<double, 4> out{};
  FramePlane r = ref, d = dist;
  for (int scale = 0; scale < 4; ++scale) {
    if (scale > 0) {
      if (r.width < 2 || r.height < 2) throw InvalidArgument("frame too small for four VIF scales");
      r = detail::decimate2(detail::filter_separable(r, taps));
      d = detail::decimate2(detail::filter_separable(d, taps));
    }
    const auto mu1 = detail::filter_separable(r, taps);
    const auto mu2 = detail::filter_separable(d, taps);
    const auto rr = detail::filter_separable(detail::multiply(r, r), taps);
    const auto dd = detail::filter_separable(detail::multiply(d, d), taps);
    const auto rd = detail::filter_separable(detail::multiply(r, d), taps);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < r.size(); ++i) {
      const double m1 = mu1.samples[i], m2 = mu2.samples[i];
      double s1 = std::max(rr.samples[i] - m1 * m1, 0.0);
      const double s2 = std::max(dd.samples[i] - m2 * m2, 0.0);
      const double s12 = rd.samples[i] - m1 * m2;
      double g = s12 / (s1 + kEps);
      double sv = s2 - g * s12;
      if (s1 < kEps) {
        g = 0.0;
        sv = s2;
        s1 = 0.0;
      }
      if (s2 < kEps) {
        g = 0.0;
        sv = 0.0;
      }
      if (g < 0.0) {
        sv = s2;
        g = 0.0;
      }
      sv = std::max(sv, kEps);
      g = std::min(g, cfg.enhancement_gain_limit);
      num += std::log2(1.0 + g * g * s1 / (sv + cfg.vif_sigma_nsq));
      den += std::log2(1.0 + s1 / cfg.vif_sigma_nsq);
    }
    out[static_cast<std::size_t>(scale)] = den > 0.0 ? num / den : 1.0;
  }
  return out;
}

inline void check_same_geometry(const VideoSequence& a, const VideoSequence& b, const char* what) {
  if (a.length() != b.length() || a.width() != b.width() || a.height() != b.height())
    throw GeometryMismatch(std::string(what) + " inputs differ in frame count or dimensions");
}

/// VIF at four scales (finest first), mean over frames.
inline std::array<double, 4> vif_per_scale(const VideoSequence& ref, const VideoSequence& dist,
                                           const VmafConfig& cfg = {}) {
  check_same_geometry(ref, dist, "VIF");
  std::array<double, 4> acc{};
  for (std::size_t t = 0; t < ref.length(); ++t) {
    const auto v = vif_frame(ref.frames[t], dist.frames[t], cfg);
    for (std::size_t i = 0; i < 4; ++i) acc[i] += v[i];
  }
  for (auto& v : acc) v /= static_cast<double>(ref.length());
  return acc;
}

// ---------------------------------------------------------------------------
// Detail loss

namespace detail {

struct DwtBands {
  FramePlane a, h, v, d;
};

// db2 analysis pair
inline constexpr std::array<double, 4> kDb2Lo{-0.12940952255092145, 0.22414386804185735, 0.836516303737469,
                                              0.48296291314469025};
inline constexpr std::array<double, 4> kDb2Hi{-0.48296291314469025, 0.836516303737469, -0.22414386804185735,
                                              -0.12940952255092145};

inline double dwt_tap(const std::array<double, 4>& f, const FramePlane& in, int i, int fixed, bool along_x) {
  double s = 0.0;
  for (int k = 0; k < 4; ++k) {
    const int n = along_x ? in.width : in.height;
    const int idx = static_cast<int>(reflect_index(2 * i - 1 + k, n));
    s += f[static_cast<std::size_t>(k)] * (along_x ? in.at(idx, fixed) : in.at(fixed, idx));
  }
  return s;
}

inline DwtBands dwt2(const FramePlane& in) {
  const int ow = (in.width + 1) / 2, oh = (in.height + 1) / 2;
  FramePlane lo(ow, in.height), hi(ow, in.height);
  for (int y = 0; y < in.height; ++y)
    for (int x = 0; x < ow; ++x) {
      lo.at(x, y) = dwt_tap(kDb2Lo, in, x, y, true);
      hi.at(x, y) = dwt_tap(kDb2Hi, in, x, y, true);
    }
  DwtBands b{FramePlane(ow, oh), FramePlane(ow, oh), FramePlane(ow, oh), FramePlane(ow, oh)};
  for (int y = 0; y < oh; ++y)
    for (int x = 0; x < ow; ++x) {
      b.a.at(x, y) = dwt_tap(kDb2Lo, lo, y, x, false);
      b.v.at(x, y) = dwt_tap(kDb2Hi, lo, y, x, false);
      b.h.at(x, y) = dwt_tap(kDb2Lo, hi, y, x, false);
      b.d.at(x, y) = dwt_tap(kDb2Hi, hi, y, x, false);
    }
  return b;
}

// Watson et al. DWT basis amplitudes, rows = level, columns = orientation.
inline constexpr double kBasisAmplitude[4][4] = {{0.62171, 0.67234, 0.72709, 0.67234},
                                                 {0.34537, 0.41317, 0.49436, 0.41317},
                                                 {0.18004, 0.22727, 0.28688, 0.22727},
                                                 {0.091401, 0.11792, 0.15214, 0.11792}};

// Luma visual-threshold model; orientation 1 is horizontal/vertical, 2 diagonal.
inline double dwt_quant_step(int level, int orientation, double view_distance, int display_height) {
  constexpr double a = 0.495, k = 0.466, f0 = 0.401;
  constexpr double g[4] = {1.501, 1.0, 0.534, 1.0};
  const double r = view_distance * display_height * std::numbers::pi / 180.0;
  const double t = std::log10(std::pow(2.0, level + 1) * f0 * g[orientation] / r);
  return 2.0 * a * std::pow(10.0, k * t * t) / kBasisAmplitude[level][orientation];
}

}  // namespace detail

/// Detail-loss measure of one frame pair. 1 means no detail lost.
inline double dlm_frame(const FramePlane& ref, const FramePlane& dist, const VmafConfig& cfg = {}) {
  if (!ref.same_shape(dist)) throw GeometryMismatch("DLM inputs differ in size");
  const double cos_sq = std::pow(std::cos(cfg.dlm_angle_deg * std::numbers::pi / 180.0), 2);
  constexpr double kEps = 1e-30;
  FramePlane r_ll = ref, d_ll = dist;
  double num = 0.0, den = 0.0;
  for (int level = 0; level < 4; ++level) {
    if (r_ll.width < 2 || r_ll.height < 2) throw InvalidArgument("frame too small for a 4-level DWT");
    const auto o = detail::dwt2(r_ll);
    const auto t = detail::dwt2(d_ll);
    const int w = o.h.width, h = o.h.height;
    const std::size_t n = o.h.size();

    // decouple distorted bands into restored + additive parts
    std::array<std::vector<double>, 3> rest, add, orig;
    const std::array<const FramePlane*, 3> ob{&o.h, &o.v, &o.d}, tb{&t.h, &t.v, &t.d};
    for (int b = 0; b < 3; ++b) {
      rest[b].resize(n);
      add[b].resize(n);
      orig[b].resize(n);
    }
    for (std::size_t i = 0; i < n; ++i) {
      const double oh = o.h.samples[i], ov = o.v.samples[i];
      const double th = t.h.samples[i], tv = t.v.samples[i];
      const double dot = oh * th + ov * tv;
      const double o_mag = oh * oh + ov * ov, t_mag = th * th + tv * tv;
      const bool same_direction = dot >= 0.0 && dot * dot >= cos_sq * o_mag * t_mag;
      for (int b = 0; b < 3; ++b) {
        const double ov_b = ob[b]->samples[i], tv_b = tb[b]->samples[i];
        const double k = std::clamp(tv_b / (ov_b + kEps), 0.0, 1.0);
        double restored = k * ov_b;
        if (same_direction)
          restored = restored > 0.0 ? std::min(restored * cfg.enhancement_gain_limit, tv_b)
                                    : std::max(restored * cfg.enhancement_gain_limit, tv_b);
        rest[b][i] = restored;
        add[b][i] = tv_b - restored;
        orig[b][i] = ov_b;
      }
    }
    // contrast sensitivity weighting
    const double rf_hv = 1.0 / detail::dwt_quant_step(level, 1, cfg.view_distance, cfg.display_height);
    const double rf_d = 1.0 / detail::dwt_quant_step(level, 2, cfg.view_distance, cfg.display_height);
    for (int b = 0; b < 3; ++b) {
      const double rf = b == 2 ? rf_d : rf_hv;
      for (std::size_t i = 0; i < n; ++i) {
        rest[b][i] *= rf;
        add[b][i] = std::abs(add[b][i] * rf);
        orig[b][i] *= rf;
      }
    }
    const int bx = static_cast<int>(std::lround(w / cfg.dlm_border_divisor));
    const int by = static_cast<int>(std::lround(h / cfg.dlm_border_divisor));
    const int x0 = bx, x1 = std::max(w - bx, x0 + 1);
    const int y0 = by, y1 = std::max(h - by, y0 + 1);
    const double area_term = std::cbrt(static_cast<double>((x1 - x0) * (y1 - y0)) / 32.0);
    for (int b = 0; b < 3; ++b) {
      double acc_num = 0.0, acc_den = 0.0;
      for (int y = y0; y < y1; ++y) {
        for (int x = x0; x < x1; ++x) {
          // contrast masking: 3x3 neighbourhood of the additive impairment over all orientations
          double thr = 0.0;
          for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx) {
              const auto j = static_cast<std::size_t>(reflect_index(y + dy, h) * w + reflect_index(x + dx, w));
              const double weight = (dx == 0 && dy == 0) ? 1.0 / 15.0 : 1.0 / 30.0;
              thr += weight * (add[0][j] + add[1][j] + add[2][j]);
            }
          const auto i = static_cast<std::size_t>(y) * w + x;
          const double masked = std::max(std::abs(rest[b][i]) - thr, 0.0);
          acc_num += masked * masked * masked;
          const double ao = std::abs(orig[b][i]);
          acc_den += ao * ao * ao;
        }
      }
      num += std::cbrt(acc_num) + area_term;
      den += std::cbrt(acc_den) + area_term;
    }
    r_ll = o.a;
    d_ll = t.a;
  }
  return num / den;
}

inline double dlm(const VideoSequence& ref, const VideoSequence& dist, const VmafConfig& cfg = {}) {
  check_same_geometry(ref, dist, "DLM");
  double acc = 0.0;
  for (std::size_t t = 0; t < ref.length(); ++t) acc += dlm_frame(ref.frames[t], dist.frames[t], cfg);
  return acc / static_cast<double>(ref.length());
}

/// VIF (4 scales) and DLM between the pseudo-reference and the distorted video.
inline VmafSpatialFeatures extract_vmaf_spatial(const VideoSequence& pr, const VideoSequence& dist,
                                                const VmafConfig& cfg = {}) {
  check_same_geometry(pr, dist, "VMAF spatial");
  return {vif_per_scale(pr, dist, cfg), dlm(pr, dist, cfg)};
}

}  // namespace greedvmaf

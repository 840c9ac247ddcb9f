#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "greedvmaf/error.hpp"

namespace greedvmaf {

/// Exact frame rate. Always kept reduced with a positive denominator.
struct Rational {
  std::int64_t num = 0;
  std::int64_t den = 1;

  constexpr Rational() = default;
  constexpr Rational(std::int64_t n, std::int64_t d = 1) : num(n), den(d) {
    if (den == 0) throw InvalidArgument("rational with zero denominator");
    if (den < 0) {
      num = -num;
      den = -den;
    }
    const auto g = std::gcd(num, den);
    if (g > 1) {
      num /= g;
      den /= g;
    }
  }

  double value() const noexcept { return static_cast<double>(num) / static_cast<double>(den); }
  bool positive() const noexcept { return num > 0; }

  friend bool operator==(const Rational& a, const Rational& b) noexcept {
    return a.num == b.num && a.den == b.den;
  }
  friend bool operator<(const Rational& a, const Rational& b) noexcept {
    return a.num * b.den < b.num * a.den;
  }
  friend bool operator<=(const Rational& a, const Rational& b) noexcept { return !(b < a); }
  friend bool operator>(const Rational& a, const Rational& b) noexcept { return b < a; }

  std::string str() const {
    return den == 1 ? std::to_string(num) : std::to_string(num) + "/" + std::to_string(den);
  }

  /// Accepts "30", "30000/1001", "30000:1001" and decimals such as "59.94".
  static Rational parse(std::string_view text) {
    const std::string s(text);
    if (s.empty()) throw InvalidArgument("empty frame rate");
    const auto sep = s.find_first_of("/:");
    try {
      if (sep != std::string::npos) {
        std::size_t used_n = 0, used_d = 0;
        const auto n = std::stoll(s.substr(0, sep), &used_n);
        const auto d = std::stoll(s.substr(sep + 1), &used_d);
        if (used_n != sep || used_d != s.size() - sep - 1) throw InvalidArgument("");
        return Rational(n, d);
      }
      const auto dot = s.find('.');
      if (dot == std::string::npos) {
        std::size_t used = 0;
        const auto n = std::stoll(s, &used);
        if (used != s.size()) throw InvalidArgument("");
        return Rational(n);
      }
      const auto frac_digits = s.size() - dot - 1;
      if (frac_digits == 0 || frac_digits > 9) throw InvalidArgument("");
      std::int64_t scale = 1;
      for (std::size_t i = 0; i < frac_digits; ++i) scale *= 10;
      std::string digits = s.substr(0, dot) + s.substr(dot + 1);
      std::size_t used = 0;
      const auto n = std::stoll(digits, &used);
      if (used != digits.size()) throw InvalidArgument("");
      return Rational(n, scale);
    } catch (const std::logic_error&) {
      throw InvalidArgument("cannot parse frame rate '" + s + "'");
    } catch (const InvalidArgument&) {
      throw InvalidArgument("cannot parse frame rate '" + s + "'");
    }
  }
};

/// One luma plane, row-major, real-valued intensities on a [0, 255] scale.
struct FramePlane {
  int width = 0;
  int height = 0;
  std::vector<double> samples;

  FramePlane() = default;
  FramePlane(int w, int h, double fill = 0.0) : width(w), height(h) {
    if (w < 1 || h < 1) throw InvalidArgument("frame dimensions must be positive");
    samples.assign(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), fill);
  }
  FramePlane(int w, int h, std::vector<double> data) : width(w), height(h), samples(std::move(data)) {
    if (w < 1 || h < 1) throw InvalidArgument("frame dimensions must be positive");
    if (samples.size() != static_cast<std::size_t>(w) * static_cast<std::size_t>(h))
      throw InvalidArgument("sample count does not match frame dimensions");
  }

  double& at(int x, int y) { return samples[static_cast<std::size_t>(y) * width + x]; }
  double at(int x, int y) const { return samples[static_cast<std::size_t>(y) * width + x]; }
  std::size_t size() const noexcept { return samples.size(); }
  bool same_shape(const FramePlane& o) const noexcept {
    return width == o.width && height == o.height;
  }
};

/// Luma-only video: the signal every feature is computed on.
struct VideoSequence {
  std::vector<FramePlane> frames;
  Rational fps{30};
  std::string content_id;

  VideoSequence() = default;
  VideoSequence(std::vector<FramePlane> f, Rational rate, std::string id = {})
      : frames(std::move(f)), fps(rate), content_id(std::move(id)) {
    validate();
  }

  void validate() const {
    if (frames.empty()) throw InvalidArgument("video has no frames");
    if (!fps.positive()) throw InvalidArgument("frame rate must be positive");
    for (const auto& fr : frames) {
      if (!fr.same_shape(frames.front()))
        throw GeometryMismatch("frames of one video differ in dimensions");
      if (fr.samples.size() != static_cast<std::size_t>(fr.width) * fr.height)
        throw InvalidArgument("frame sample count does not match dimensions");
    }
  }

  int width() const { return frames.front().width; }
  int height() const { return frames.front().height; }
  std::size_t length() const noexcept { return frames.size(); }
};

// ---------------------------------------------------------------------------
// Y4M / raw YUV input

enum class ChromaLayout { k420, k422, k444, kMono };

struct PixelFormat {
  ChromaLayout layout = ChromaLayout::k420;
  int bit_depth = 8;

  std::size_t bytes_per_sample() const noexcept { return bit_depth > 8 ? 2 : 1; }

  /// Luma plane plus both chroma planes, in bytes.
  std::size_t frame_bytes(int w, int h) const noexcept {
    const std::size_t luma = static_cast<std::size_t>(w) * h;
    std::size_t chroma = 0;
    const std::size_t cw = (static_cast<std::size_t>(w) + 1) / 2;
    const std::size_t ch = (static_cast<std::size_t>(h) + 1) / 2;
    switch (layout) {
      case ChromaLayout::k420: chroma = 2 * cw * ch; break;
      case ChromaLayout::k422: chroma = 2 * cw * static_cast<std::size_t>(h); break;
      case ChromaLayout::k444: chroma = 2 * luma; break;
      case ChromaLayout::kMono: chroma = 0; break;
    }
    return (luma + chroma) * bytes_per_sample();
  }

  /// Names in the ffmpeg -pix_fmt style: yuv420p, yuv422p10le, gray, ...
  static PixelFormat parse(std::string_view name) {
    static const std::pair<std::string_view, PixelFormat> table[] = {
        {"yuv420p", {ChromaLayout::k420, 8}},       {"yuv422p", {ChromaLayout::k422, 8}},
        {"yuv444p", {ChromaLayout::k444, 8}},       {"gray", {ChromaLayout::kMono, 8}},
        {"yuv420p10le", {ChromaLayout::k420, 10}},  {"yuv422p10le", {ChromaLayout::k422, 10}},
        {"yuv444p10le", {ChromaLayout::k444, 10}},  {"gray10le", {ChromaLayout::kMono, 10}},
    };
    for (const auto& [n, f] : table)
      if (n == name) return f;
    throw UnsupportedFormat("unsupported pixel format '" + std::string(name) + "'");
  }
};

namespace detail {

inline double sample_to_real(unsigned v, int bit_depth) {
  if (bit_depth == 8) return static_cast<double>(v);
  return static_cast<double>(v) * 255.0 / static_cast<double>((1u << bit_depth) - 1u);
}

inline FramePlane decode_luma(std::span<const unsigned char> bytes, int w, int h, int bit_depth) {
  FramePlane plane(w, h);
  if (bit_depth == 8) {
    for (std::size_t i = 0; i < plane.size(); ++i) plane.samples[i] = bytes[i];
  } else {
    const unsigned mask = (1u << bit_depth) - 1u;
    for (std::size_t i = 0; i < plane.size(); ++i) {
      const unsigned v = (static_cast<unsigned>(bytes[2 * i]) | (static_cast<unsigned>(bytes[2 * i + 1]) << 8)) & mask;
      plane.samples[i] = sample_to_real(v, bit_depth);
    }
  }
  return plane;
}

// Reads one frame payload; returns false on clean EOF, throws on a partial frame.
inline bool read_frame_payload(std::istream& in, std::vector<unsigned char>& buf, std::size_t frame_index) {
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  const auto got = static_cast<std::size_t>(in.gcount());
  if (got == 0) return false;
  if (got != buf.size()) throw TruncationError(frame_index);
  return true;
}

inline std::ifstream open_binary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  return in;
}

}  // namespace detail

struct Y4mHeader {
  int width = 0;
  int height = 0;
  Rational fps{25};
  PixelFormat format;
};

/// Parses the stream header line, leaving `in` positioned after its newline.
inline Y4mHeader read_y4m_header(std::istream& in) {
  constexpr std::string_view kMagic = "YUV4MPEG2";
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty stream", 0);
  if (line.compare(0, kMagic.size(), kMagic) != 0) throw ParseError("missing YUV4MPEG2 signature", 0);

  Y4mHeader hdr;
  bool have_w = false, have_h = false, have_f = false;
  std::size_t pos = kMagic.size();
  while (pos < line.size()) {
    if (line[pos] == ' ') {
      ++pos;
      continue;
    }
    const auto end = std::min(line.find(' ', pos), line.size());
    const std::string token = line.substr(pos, end - pos);
    const std::string value = token.substr(1);
    try {
      switch (token[0]) {
        case 'W': hdr.width = std::stoi(value); have_w = true; break;
        case 'H': hdr.height = std::stoi(value); have_h = true; break;
        case 'F': {
          const auto colon = value.find(':');
          if (colon == std::string::npos) throw ParseError("frame rate lacks ':'", pos);
          hdr.fps = Rational(std::stoll(value.substr(0, colon)), std::stoll(value.substr(colon + 1)));
          have_f = true;
          break;
        }
        case 'C': {
          if (value.rfind("420", 0) == 0 && value.find("p10") == std::string::npos &&
              value.find("p12") == std::string::npos) {
            hdr.format = {ChromaLayout::k420, 8};
          } else if (value == "422") {
            hdr.format = {ChromaLayout::k422, 8};
          } else if (value == "444") {
            hdr.format = {ChromaLayout::k444, 8};
          } else if (value == "mono") {
            hdr.format = {ChromaLayout::kMono, 8};
          } else if (value == "420p10") {
            hdr.format = {ChromaLayout::k420, 10};
          } else if (value == "422p10") {
            hdr.format = {ChromaLayout::k422, 10};
          } else if (value == "444p10") {
            hdr.format = {ChromaLayout::k444, 10};
          } else {
            throw UnsupportedFormat("unsupported Y4M colourspace 'C" + value + "'");
          }
          break;
        }
        case 'I': case 'A': case 'X': break;
        default: throw ParseError("unknown header parameter '" + token + "'", pos);
      }
    } catch (const std::logic_error&) {
      throw ParseError("bad header parameter '" + token + "'", pos);
    } catch (const InvalidArgument&) {
      throw ParseError("bad header parameter '" + token + "'", pos);
    }
    pos = end;
  }
  if (!have_w || !have_h) throw ParseError("header lacks W or H", line.size());
  if (!have_f) throw ParseError("header lacks F", line.size());
  if (hdr.width < 1 || hdr.height < 1) throw ParseError("non-positive frame dimensions", 0);
  if (!hdr.fps.positive()) throw ParseError("non-positive frame rate", 0);
  return hdr;
}

/// Reads a planar Y4M stream, keeping only luma.
inline VideoSequence read_y4m(std::istream& in, std::string content_id = {}) {
  const auto hdr = read_y4m_header(in);
  const std::size_t luma_bytes =
      static_cast<std::size_t>(hdr.width) * hdr.height * hdr.format.bytes_per_sample();
  std::vector<unsigned char> buf(hdr.format.frame_bytes(hdr.width, hdr.height));
  std::vector<FramePlane> frames;

  std::string marker;
  for (std::size_t index = 0;; ++index) {
    const auto marker_offset = static_cast<std::size_t>(in.tellg());
    if (!std::getline(in, marker)) break;
    if (in.eof()) throw TruncationError(index);  // marker without newline
    if (marker.rfind("FRAME", 0) != 0) throw ParseError("expected FRAME marker", marker_offset);
    if (!detail::read_frame_payload(in, buf, index)) throw TruncationError(index);
    frames.push_back(detail::decode_luma(std::span(buf).first(luma_bytes), hdr.width, hdr.height,
                                         hdr.format.bit_depth));
  }
  if (frames.empty()) throw InvalidArgument("no frames");
  return VideoSequence(std::move(frames), hdr.fps, std::move(content_id));
}

inline VideoSequence load_y4m(const std::string& path) {
  auto in = detail::open_binary(path);
  return read_y4m(in, path);
}

/// Headerless planar YUV with caller-supplied geometry.
inline VideoSequence load_raw_yuv(const std::string& path, int width, int height, Rational fps,
                                  PixelFormat format) {
  if (width < 1 || height < 1) throw InvalidArgument("raw input needs positive --width/--height");
  if (!fps.positive()) throw InvalidArgument("raw input needs a positive --fps");
  auto in = detail::open_binary(path);
  const std::size_t luma_bytes = static_cast<std::size_t>(width) * height * format.bytes_per_sample();
  std::vector<unsigned char> buf(format.frame_bytes(width, height));
  std::vector<FramePlane> frames;
  for (std::size_t index = 0; detail::read_frame_payload(in, buf, index); ++index)
    frames.push_back(detail::decode_luma(std::span(buf).first(luma_bytes), width, height, format.bit_depth));
  if (frames.empty()) throw InvalidArgument("no frames");
  return VideoSequence(std::move(frames), fps, path);
}

/// Writes an 8-bit 4:2:0 Y4M with neutral chroma. Luma is rounded and clamped to [0, 255].
inline void write_y4m(std::ostream& out, const VideoSequence& video) {
  video.validate();
  const int w = video.width(), h = video.height();
  out << "YUV4MPEG2 W" << w << " H" << h << " F" << video.fps.num << ':' << video.fps.den
      << " Ip A1:1 C420jpeg\n";
  const std::size_t chroma = 2 * (static_cast<std::size_t>(w + 1) / 2) * (static_cast<std::size_t>(h + 1) / 2);
  std::vector<unsigned char> luma(static_cast<std::size_t>(w) * h);
  const std::vector<unsigned char> uv(chroma, 128);
  for (const auto& fr : video.frames) {
    for (std::size_t i = 0; i < luma.size(); ++i)
      luma[i] = static_cast<unsigned char>(std::clamp(std::lround(fr.samples[i]), 0L, 255L));
    out << "FRAME\n";
    out.write(reinterpret_cast<const char*>(luma.data()), static_cast<std::streamsize>(luma.size()));
    out.write(reinterpret_cast<const char*>(uv.data()), static_cast<std::streamsize>(uv.size()));
  }
}

inline void write_y4m(const std::string& path, const VideoSequence& video) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path + "'");
  write_y4m(out, video);
  if (!out) throw IoError("write failed for '" + path + "'");
}

// ---------------------------------------------------------------------------
// Resampling

/// Block-mean downscale by 2^s in each dimension; remainder rows/columns are dropped.
inline FramePlane downscale(const FramePlane& plane, int s) {
  if (s < 0 || s > 16) throw InvalidArgument("scale exponent out of range");
  const int block = 1 << s;
  if (plane.width < block || plane.height < block)
    throw InvalidArgument("plane " + std::to_string(plane.width) + "x" + std::to_string(plane.height) +
                          " too small for " + std::to_string(block) + "x" + std::to_string(block) +
                          " blocks");
  const int ow = plane.width / block, oh = plane.height / block;
  FramePlane out(ow, oh);
  const double inv = 1.0 / (static_cast<double>(block) * block);
  for (int by = 0; by < oh; ++by) {
    for (int bx = 0; bx < ow; ++bx) {
      double sum = 0.0;
      for (int y = by * block; y < (by + 1) * block; ++y) {
        const double* row = &plane.samples[static_cast<std::size_t>(y) * plane.width + bx * block];
        for (int x = 0; x < block; ++x) sum += row[x];
      }
      out.at(bx, by) = sum * inv;
    }
  }
  return out;
}

inline VideoSequence downscale(const VideoSequence& video, int s) {
  std::vector<FramePlane> frames;
  frames.reserve(video.length());
  for (const auto& f : video.frames) frames.push_back(downscale(f, s));
  return VideoSequence(std::move(frames), video.fps, video.content_id);
}

namespace detail {

// floor(len * to / from) without going through floating point.
inline std::size_t resampled_length(std::size_t len, Rational from, Rational to) {
  const auto num = static_cast<__int128>(len) * to.num * from.den;
  const auto den = static_cast<__int128>(to.den) * from.num;
  return static_cast<std::size_t>(num / den);
}

}  // namespace detail

/// Source frame index for each output frame when dropping frames from `from` to `to` fps:
/// round(t' * from / to), halves rounded up, clamped to the last frame.
inline std::vector<std::size_t> subsample_indices(std::size_t len, Rational from, Rational to) {
  if (!to.positive()) throw InvalidArgument("target frame rate must be positive");
  if (from < to) throw InvalidArgument("temporal_subsample: target fps " + to.str() + " exceeds source fps " + from.str());
  const std::size_t out_len = detail::resampled_length(len, from, to);
  // ratio = a / b
  const auto a = static_cast<__int128>(from.num) * to.den;
  const auto b = static_cast<__int128>(from.den) * to.num;
  std::vector<std::size_t> idx(out_len);
  for (std::size_t t = 0; t < out_len; ++t) {
    const auto r = (2 * static_cast<__int128>(t) * a + b) / (2 * b);
    idx[t] = std::min(static_cast<std::size_t>(r), len - 1);
  }
  return idx;
}

/// Drops frames to reach `target_fps` (builds the pseudo-reference).
inline VideoSequence temporal_subsample(const VideoSequence& video, Rational target_fps) {
  const auto idx = subsample_indices(video.length(), video.fps, target_fps);
  if (idx.empty()) throw InvalidArgument("temporal_subsample produces no frames");
  std::vector<FramePlane> frames;
  frames.reserve(idx.size());
  for (auto i : idx) frames.push_back(video.frames[i]);
  return VideoSequence(std::move(frames), target_fps, video.content_id);
}

/// Repeats frames to reach `target_fps`: output t' copies input floor(t' * fps / target).
inline VideoSequence temporal_upsample_duplicate(const VideoSequence& video, Rational target_fps) {
  if (!target_fps.positive()) throw InvalidArgument("target frame rate must be positive");
  if (target_fps < video.fps)
    throw InvalidArgument("temporal_upsample_duplicate: target fps " + target_fps.str() +
                          " is below source fps " + video.fps.str());
  const std::size_t out_len = detail::resampled_length(video.length(), video.fps, target_fps);
  const auto a = static_cast<__int128>(video.fps.num) * target_fps.den;
  const auto b = static_cast<__int128>(video.fps.den) * target_fps.num;
  std::vector<FramePlane> frames;
  frames.reserve(out_len);
  for (std::size_t t = 0; t < out_len; ++t) {
    const auto src = static_cast<std::size_t>(static_cast<__int128>(t) * a / b);
    frames.push_back(video.frames[std::min(src, video.length() - 1)]);
  }
  return VideoSequence(std::move(frames), target_fps, video.content_id);
}

}  // namespace greedvmaf

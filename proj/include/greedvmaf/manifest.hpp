#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "greedvmaf/error.hpp"
#include "greedvmaf/eval.hpp"
#include "greedvmaf/features.hpp"
#include "greedvmaf/media_io.hpp"

namespace greedvmaf {

inline constexpr int kFeatureCsvFormatVersion = 1;

// ---------------------------------------------------------------------------
// CSV

using CsvRow = std::vector<std::string>;

/// RFC 4180-style split of one record: quoted fields may contain commas and "" escapes.
inline CsvRow split_csv_line(const std::string& line) {
  CsvRow out;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        field += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(field));
      field.clear();
    } else if (c != '\r') {
      field += c;
    }
  }
  out.push_back(std::move(field));
  return out;
}

inline std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) out += (c == '"') ? std::string("\"\"") : std::string(1, c);
  return out + "\"";
}

/// Header plus records, with lookup by column name.
struct CsvTable {
  CsvRow header;
  std::vector<CsvRow> rows;

  std::optional<std::size_t> column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    return std::nullopt;
  }
  std::size_t require(const std::string& name) const {
    const auto c = column(name);
    if (!c) throw InvalidArgument("CSV lacks required column '" + name + "'");
    return *c;
  }
};

inline CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  CsvTable t;
  std::string line;
  bool have_header = false;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    auto row = split_csv_line(line);
    if (!have_header) {
      t.header = std::move(row);
      have_header = true;
      continue;
    }
    if (row.size() != t.header.size())
      throw InvalidArgument("CSV '" + path + "' row " + std::to_string(t.rows.size() + 1) + " has " +
                            std::to_string(row.size()) + " fields, header has " + std::to_string(t.header.size()));
    t.rows.push_back(std::move(row));
  }
  if (!have_header) throw InvalidArgument("CSV '" + path + "' is empty");
  return t;
}

/// Shortest text that parses back to the same double.
inline std::string format_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

inline double parse_double(const std::string& s, const std::string& what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument("");
    return v;
  } catch (const std::logic_error&) {
    throw InvalidArgument("cannot parse " + what + " '" + s + "'");
  }
}

/// Writes to `path` through a temporary file so a failed run never leaves a partial artifact.
inline void write_file_atomic(const std::string& path, const std::string& contents) {
  const auto tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw IoError("cannot write '" + tmp + "'");
    out << contents;
    if (!out) throw IoError("write failed for '" + tmp + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move output into place at '" + path + "': " + ec.message());
}

// ---------------------------------------------------------------------------
// Feature CSV

struct FeatureRecord {
  std::string ref, dist;
  Rational fps_ref{1}, fps_dist{1};
  FeatureVector features;
};

inline std::string feature_csv_header(const std::vector<std::string>& names) {
  std::string h = "format_version,ref,dist,fps_ref,fps_dist";
  for (const auto& n : names) h += "," + n;
  return h;
}

inline std::string feature_csv_row(const FeatureRecord& r) {
  std::string s = std::to_string(kFeatureCsvFormatVersion) + "," + csv_escape(r.ref) + "," + csv_escape(r.dist) +
                  "," + r.fps_ref.str() + "," + r.fps_dist.str();
  for (double v : r.features.values) s += "," + format_double(v);
  return s;
}

inline std::vector<FeatureRecord> read_feature_csv(const std::string& path,
                                                   const std::vector<std::string>& expected = feature_names()) {
  const auto t = read_csv(path);
  const auto ver = t.require("format_version");
  std::vector<std::size_t> cols;
  for (const auto& n : expected) cols.push_back(t.require(n));
  std::vector<FeatureRecord> out;
  for (const auto& row : t.rows) {
    if (row[ver] != std::to_string(kFeatureCsvFormatVersion))
      throw InvalidArgument("unsupported feature CSV format_version '" + row[ver] + "' in '" + path + "'");
    FeatureRecord rec;
    if (auto c = t.column("ref")) rec.ref = row[*c];
    if (auto c = t.column("dist")) rec.dist = row[*c];
    if (auto c = t.column("fps_ref")) rec.fps_ref = Rational::parse(row[*c]);
    if (auto c = t.column("fps_dist")) rec.fps_dist = Rational::parse(row[*c]);
    rec.features.names = expected;
    for (std::size_t i = 0; i < cols.size(); ++i) rec.features.values.push_back(parse_double(row[cols[i]], expected[i]));
    out.push_back(std::move(rec));
  }
  if (out.empty()) throw InvalidArgument("feature CSV '" + path + "' has no rows");
  return out;
}

// ---------------------------------------------------------------------------
// Video sources

/// Geometry for headerless .yuv inputs; Y4M files carry their own.
struct RawVideoOptions {
  int width = 0;
  int height = 0;
  std::optional<Rational> fps;
  std::string pix_fmt = "yuv420p";
};

inline bool is_y4m(const std::string& path) {
  const auto ext = std::filesystem::path(path).extension().string();
  return ext == ".y4m" || ext == ".Y4M";
}

/// Loads a video; `fps_hint` supplies the rate of raw inputs when the options do not.
inline VideoSequence load_video(const std::string& path, const RawVideoOptions& raw,
                                std::optional<Rational> fps_hint = std::nullopt) {
  if (!std::filesystem::exists(path)) throw IoError("no such file '" + path + "'");
  if (is_y4m(path)) return load_y4m(path);
  const auto fps = raw.fps ? raw.fps : fps_hint;
  if (!fps) throw InvalidArgument("raw input '" + path + "' needs --fps");
  return load_raw_yuv(path, raw.width, raw.height, *fps, PixelFormat::parse(raw.pix_fmt));
}

// ---------------------------------------------------------------------------
// Manifest

struct ManifestRow {
  std::string ref_path;
  std::string dist_path;
  std::string feature_csv;
  std::string content_id;
  std::optional<Rational> fps_ref;
  std::optional<Rational> fps_dist;
  double mos = std::numeric_limits<double>::quiet_NaN();
};

struct DatasetManifest {
  std::vector<ManifestRow> rows;

  bool has_mos() const {
    for (const auto& r : rows)
      if (!std::isfinite(r.mos)) return false;
    return true;
  }
};

/// Reads a manifest CSV. Relative paths resolve against the manifest's directory.
inline DatasetManifest read_manifest(const std::string& path) {
  const auto t = read_csv(path);
  const auto base = std::filesystem::path(path).parent_path();
  const auto resolve = [&](const std::string& p) {
    if (p.empty()) return p;
    const std::filesystem::path fp(p);
    return fp.is_absolute() ? p : (base / fp).lexically_normal().string();
  };
  const auto c_feat = t.column("feature_csv");
  const auto c_ref = t.column("ref_path");
  const auto c_dist = t.column("dist_path");
  if (!c_feat && !(c_ref && c_dist))
    throw InvalidArgument("manifest needs ref_path and dist_path columns, or a feature_csv column");
  const auto c_content = t.require("content_id");
  const auto c_fr = t.column("fps_ref");
  const auto c_fd = t.column("fps_dist");
  const auto c_mos = t.column("mos");

  DatasetManifest m;
  for (const auto& row : t.rows) {
    ManifestRow r;
    if (c_feat) r.feature_csv = resolve(row[*c_feat]);
    if (c_ref) r.ref_path = resolve(row[*c_ref]);
    if (c_dist) r.dist_path = resolve(row[*c_dist]);
    if (r.feature_csv.empty() && (r.ref_path.empty() || r.dist_path.empty()))
      throw InvalidArgument("manifest row " + std::to_string(m.rows.size() + 1) + " has neither features nor paths");
    r.content_id = row[c_content];
    if (r.content_id.empty())
      throw InvalidArgument("manifest row " + std::to_string(m.rows.size() + 1) + " has an empty content_id");
    if (c_fr && !row[*c_fr].empty()) r.fps_ref = Rational::parse(row[*c_fr]);
    if (c_fd && !row[*c_fd].empty()) r.fps_dist = Rational::parse(row[*c_fd]);
    if (c_mos && !row[*c_mos].empty()) r.mos = parse_double(row[*c_mos], "mos");
    m.rows.push_back(std::move(r));
  }
  return m;
}

// ---------------------------------------------------------------------------
// Feature cache

inline std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 1469598103934665603ull) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

/// Canonical text of every setting that changes feature values.
inline std::string config_fingerprint(const FeatureConfig& c) {
  std::ostringstream os;
  os << std::setprecision(17) << "scales=";
  for (int s : c.greed.scales) os << s << ';';
  os << "patch=" << c.greed.patch_size << ";sn2=" << c.greed.sigma_n2 << ";ms=" << c.greed.ms_window << ";bank=";
  for (const auto* f : {&c.greed.filters.analysis_lo, &c.greed.filters.analysis_hi})
    for (double v : *f) os << v << ',';
  os << "levels=" << c.greed.filters.levels << ";vifw=" << c.vmaf.vif_window << ";vifn=" << c.vmaf.vif_sigma_nsq
     << ";angle=" << c.vmaf.dlm_angle_deg << ";vd=" << c.vmaf.view_distance << ";dh=" << c.vmaf.display_height
     << ";border=" << c.vmaf.dlm_border_divisor << ";gain=" << c.vmaf.enhancement_gain_limit;
  return os.str();
}

inline std::string file_identity(const std::string& path) {
  std::error_code ec;
  const auto abs = std::filesystem::absolute(path, ec).lexically_normal().string();
  const auto size = std::filesystem::file_size(path, ec);
  const auto mtime = std::filesystem::last_write_time(path, ec).time_since_epoch().count();
  return abs + "|" + std::to_string(ec ? 0 : size) + "|" + std::to_string(mtime);
}

/// Cache file for one (ref, dist, config) triple.
inline std::filesystem::path cache_entry(const std::string& cache_dir, const std::string& ref, const std::string& dist,
                                         const FeatureConfig& cfg) {
  const auto key = fnv1a(file_identity(ref) + "\n" + file_identity(dist) + "\n" + config_fingerprint(cfg));
  std::ostringstream name;
  name << std::hex << std::setw(16) << std::setfill('0') << key << ".csv";
  return std::filesystem::path(cache_dir) / name.str();
}

}  // namespace greedvmaf

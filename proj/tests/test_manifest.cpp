#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "greedvmaf/manifest.hpp"

using namespace greedvmaf;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) : path(fs::temp_directory_path() / ("greedvmaf_" + tag)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

void put(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

FeatureRecord sample_record() {
  FeatureRecord r;
  r.ref = "ref, \"quoted\".y4m";
  r.dist = "dist.y4m";
  r.fps_ref = Rational(120);
  r.fps_dist = Rational(60000, 1001);
  r.features.names = feature_names();
  for (std::size_t i = 0; i < r.features.names.size(); ++i) r.features.values.push_back(0.1 * i + 1.0 / 3.0);
  return r;
}

}  // namespace

TEST_CASE("CSV records split with quoting", "[manifest][csv]") {
  CHECK(split_csv_line("a,b,,c") == CsvRow{"a", "b", "", "c"});
  CHECK(split_csv_line("\"x,y\",\"he said \"\"hi\"\"\"\r") == CsvRow{"x,y", "he said \"hi\""});
  for (const std::string s : {"plain", "a,b", "q\"q", ""}) CHECK(split_csv_line(csv_escape(s) + ",z") == CsvRow{s, "z"});
}

TEST_CASE("doubles survive text formatting", "[manifest][csv]") {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 123456789.123456789, 0.0})
    CHECK(parse_double(format_double(v), "v") == v);
  CHECK(format_double(std::numeric_limits<double>::infinity()) == "inf");
  CHECK_THROWS_AS(parse_double("1.5x", "v"), InvalidArgument);
  CHECK_THROWS_AS(parse_double("", "v"), InvalidArgument);
}

TEST_CASE("feature CSV round trip and version check", "[manifest][features]") {
  TempDir dir("featcsv");
  const auto rec = sample_record();
  const auto path = dir.file("f.csv");
  put(path, feature_csv_header(rec.features.names) + "\n" + feature_csv_row(rec) + "\n");
  const auto back = read_feature_csv(path);
  REQUIRE(back.size() == 1);
  CHECK(back[0].ref == rec.ref);
  CHECK(back[0].fps_dist == rec.fps_dist);
  CHECK(back[0].features.values == rec.features.values);

  SECTION("reordered columns are located by name") {
    auto names = rec.features.names;
    std::swap(names[0], names[20]);
    std::string header = "format_version";
    std::string row = "1";
    for (const auto& n : names) {
      header += "," + n;
      const auto idx = std::find(rec.features.names.begin(), rec.features.names.end(), n) - rec.features.names.begin();
      row += "," + format_double(rec.features.values[static_cast<std::size_t>(idx)]);
    }
    put(path, header + "\n" + row + "\n");
    CHECK(read_feature_csv(path)[0].features.values == rec.features.values);
  }
  SECTION("unknown version is rejected") {
    auto row = feature_csv_row(rec);
    row[0] = '7';
    put(path, feature_csv_header(rec.features.names) + "\n" + row + "\n");
    CHECK_THROWS_AS(read_feature_csv(path), InvalidArgument);
  }
  SECTION("missing feature column is rejected") {
    put(path, "format_version,vif_s0\n1,0.5\n");
    CHECK_THROWS_AS(read_feature_csv(path), InvalidArgument);
  }
  SECTION("ragged rows are rejected") {
    put(path, feature_csv_header(rec.features.names) + "\n1,a\n");
    CHECK_THROWS_AS(read_feature_csv(path), InvalidArgument);
  }
  CHECK_THROWS_AS(read_feature_csv(dir.file("absent.csv")), IoError);
}

TEST_CASE("manifest parsing", "[manifest]") {
  TempDir dir("manifest");
  const auto path = dir.file("m.csv");
  SECTION("relative paths resolve against the manifest") {
    put(path, "ref_path,dist_path,content_id,fps_dist,mos\nsrc/a.y4m,/abs/b.y4m,c1,60,3.5\nsrc/a.y4m,d.y4m,c1,,\n");
    const auto m = read_manifest(path);
    REQUIRE(m.rows.size() == 2);
    CHECK(m.rows[0].ref_path == (dir.path / "src/a.y4m").string());
    CHECK(m.rows[0].dist_path == "/abs/b.y4m");
    CHECK(m.rows[0].fps_dist == Rational(60));
    CHECK(m.rows[0].mos == 3.5);
    CHECK_FALSE(m.rows[1].fps_dist.has_value());
    CHECK_FALSE(m.has_mos());
  }
  SECTION("feature_csv rows need no video paths") {
    put(path, "feature_csv,content_id,mos\nf.csv,c1,1\n");
    const auto m = read_manifest(path);
    CHECK(m.rows[0].feature_csv == dir.file("f.csv"));
    CHECK(m.has_mos());
  }
  SECTION("structural errors") {
    put(path, "ref_path,content_id\na,c\n");
    CHECK_THROWS_AS(read_manifest(path), InvalidArgument);
    put(path, "ref_path,dist_path\na,b\n");
    CHECK_THROWS_AS(read_manifest(path), InvalidArgument);
    put(path, "ref_path,dist_path,content_id\na,b,\n");
    CHECK_THROWS_AS(read_manifest(path), InvalidArgument);
    put(path, "ref_path,dist_path,content_id,mos\na,b,c,good\n");
    CHECK_THROWS_AS(read_manifest(path), InvalidArgument);
    put(path, "");
    CHECK_THROWS_AS(read_manifest(path), InvalidArgument);
  }
}

TEST_CASE("cache key tracks inputs and configuration", "[manifest][cache]") {
  TempDir dir("cache");
  const auto a = dir.file("a.y4m"), b = dir.file("b.y4m");
  put(a, "x");
  put(b, "y");
  const FeatureConfig base;
  const auto key = cache_entry(dir.path.string(), a, b, base);
  CHECK(key == cache_entry(dir.path.string(), a, b, base));
  CHECK(key != cache_entry(dir.path.string(), b, a, base));
  auto other = base;
  other.greed.scales = {4};
  CHECK(key != cache_entry(dir.path.string(), a, b, other));
  other = base;
  other.greed.sigma_n2 = 0.2;
  CHECK(key != cache_entry(dir.path.string(), a, b, other));
  other = base;
  other.vmaf.enhancement_gain_limit = 100.0;
  CHECK(key != cache_entry(dir.path.string(), a, b, other));
  put(b, "longer contents");
  CHECK(key != cache_entry(dir.path.string(), a, b, base));
}

TEST_CASE("atomic writes leave no temporary file", "[manifest]") {
  TempDir dir("atomic");
  const auto path = dir.file("out.txt");
  write_file_atomic(path, "first");
  write_file_atomic(path, "second");
  std::ifstream in(path);
  std::string text;
  std::getline(in, text);
  CHECK(text == "second");
  CHECK_FALSE(fs::exists(path + ".tmp"));
  CHECK_THROWS_AS(write_file_atomic(dir.file("no/such/dir/x"), "z"), IoError);
}

// greedvmaf: feature extraction, training, prediction and evaluation.
//
// Exit codes: 0 success, 1 invalid input or failed computation, 2 missing or
// unreadable file, 64 command-line usage error.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "greedvmaf/greedvmaf.hpp"

namespace fs = std::filesystem;
using namespace greedvmaf;

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitIo = 2;
constexpr int kExitUsage = 64;

struct ExtractOptions {
  std::vector<int> scales{4, 5};
  int patch = 5;
  double sigma_n2 = 0.1;
  int ms_window = 7;
  double gain_limit = 1.0;
  int width = 0;
  int height = 0;
  std::string fps;
  std::string pix_fmt = "yuv420p";
  std::string cache_dir;
  unsigned jobs = 1;

  FeatureConfig feature_config() const {
    FeatureConfig c;
    c.greed.scales = scales;
    c.greed.patch_size = patch;
    c.greed.sigma_n2 = sigma_n2;
    c.greed.ms_window = ms_window;
    c.vmaf.enhancement_gain_limit = gain_limit;
    return c;
  }

  RawVideoOptions raw() const {
    RawVideoOptions r;
    r.width = width;
    r.height = height;
    if (!fps.empty()) r.fps = Rational::parse(fps);
    r.pix_fmt = pix_fmt;
    return r;
  }
};

void add_extract_flags(CLI::App* app, ExtractOptions& o) {
  app->add_option("--scales", o.scales, "GREED downscale exponents s (frames shrink by 2^s)")->delimiter(',');
  app->add_option("--patch", o.patch, "patch side at the downscaled resolution")->check(CLI::Range(2, 64));
  app->add_option("--sigma-n2", o.sigma_n2, "neural-noise variance")->check(CLI::NonNegativeNumber);
  app->add_option("--ms-window", o.ms_window, "odd side of the spatial mean-subtraction window");
  app->add_option("--gain-limit", o.gain_limit, "VIF/DLM enhancement gain cap (1 = no credit for enhancement)");
  app->add_option("--width", o.width, "frame width of raw .yuv inputs");
  app->add_option("--height", o.height, "frame height of raw .yuv inputs");
  app->add_option("--fps", o.fps, "frame rate of raw .yuv inputs (e.g. 120 or 60000/1001)");
  app->add_option("--pix-fmt", o.pix_fmt, "pixel format of raw .yuv inputs");
  app->add_option("--cache-dir", o.cache_dir, "directory for cached per-pair feature rows");
  app->add_option("--jobs", o.jobs, "worker threads")->check(CLI::PositiveNumber);
}

void validate_extract(const ExtractOptions& o) {
  if (o.scales.empty()) throw InvalidArgument("--scales needs at least one value");
  for (int s : o.scales)
    if (s < 0 || s > 8) throw InvalidArgument("scale exponent " + std::to_string(s) + " out of range [0, 8]");
  if (o.ms_window < 1 || o.ms_window % 2 == 0) throw InvalidArgument("--ms-window must be a positive odd number");
  if (!(o.gain_limit > 0.0)) throw InvalidArgument("--gain-limit must be positive");
}

void write_output(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text << std::flush;
    return;
  }
  write_file_atomic(path, text);
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ---------------------------------------------------------------------------
// Feature rows for manifest entries

struct PairSpec {
  std::string ref, dist;
  std::optional<Rational> fps_ref, fps_dist;
};

FeatureRecord compute_record(const PairSpec& p, const ExtractOptions& o) {
  const auto cfg = o.feature_config();
  std::optional<fs::path> cached;
  if (!o.cache_dir.empty()) {
    if (!fs::exists(p.ref)) throw IoError("no such file '" + p.ref + "'");
    if (!fs::exists(p.dist)) throw IoError("no such file '" + p.dist + "'");
    cached = cache_entry(o.cache_dir, p.ref, p.dist, cfg);
    if (fs::exists(*cached)) {
      auto recs = read_feature_csv(cached->string(), feature_names(cfg.greed.scales));
      recs.front().ref = p.ref;
      recs.front().dist = p.dist;
      return recs.front();
    }
  }
  const auto raw = o.raw();
  const auto ref = load_video(p.ref, raw, p.fps_ref);
  const auto dist = load_video(p.dist, raw, p.fps_dist);
  FeatureRecord rec{p.ref, p.dist, ref.fps, dist.fps, extract_features(ref, dist, cfg)};
  if (cached) {
    fs::create_directories(o.cache_dir);
    write_file_atomic(cached->string(), feature_csv_header(rec.features.names) + "\n" + feature_csv_row(rec) + "\n");
  }
  return rec;
}

FeatureRecord record_from_csv(const ManifestRow& row, const std::vector<std::string>& names) {
  auto recs = read_feature_csv(row.feature_csv, names);
  if (recs.size() == 1) return recs.front();
  if (!row.dist_path.empty()) {
    const auto want = fs::path(row.dist_path).filename();
    for (auto& r : recs)
      if (fs::path(r.dist).filename() == want) return r;
  }
  throw InvalidArgument("feature CSV '" + row.feature_csv + "' has " + std::to_string(recs.size()) +
                        " rows and none is selected by the manifest's dist_path");
}

std::vector<FeatureRecord> manifest_records(const DatasetManifest& m, const ExtractOptions& o) {
  const auto names = feature_names(o.scales);
  std::vector<FeatureRecord> out(m.rows.size());
  parallel_for(m.rows.size(), o.jobs, [&](std::size_t i) {
    const auto& row = m.rows[i];
    out[i] = row.feature_csv.empty() ? compute_record({row.ref_path, row.dist_path, row.fps_ref, row.fps_dist}, o)
                                     : record_from_csv(row, names);
  });
  return out;
}

Dataset build_dataset(const DatasetManifest& m, const std::vector<FeatureRecord>& recs) {
  if (!m.has_mos()) throw InvalidArgument("manifest needs a finite mos value on every row");
  Dataset d;
  d.feature_names = recs.front().features.names;
  for (std::size_t i = 0; i < recs.size(); ++i) {
    d.X.push_back(recs[i].features.values);
    d.mos.push_back(m.rows[i].mos);
    d.content_ids.push_back(m.rows[i].content_id);
    d.fps_dist.push_back(m.rows[i].fps_dist.value_or(recs[i].fps_dist));
  }
  d.validate();
  return d;
}

DatasetManifest load_manifest(const std::string& path) {
  if (!fs::exists(path)) throw IoError("no such file '" + path + "'");
  auto m = read_manifest(path);
  if (m.rows.empty()) throw InvalidArgument("manifest '" + path + "' has no rows");
  return m;
}

std::vector<double> parse_fractions(const std::vector<double>& f) {
  if (f.size() != 2 && f.size() != 3) throw InvalidArgument("--fractions takes 2 or 3 comma-separated values");
  return f;
}

// ---------------------------------------------------------------------------
// features

struct FeaturesCmd {
  ExtractOptions ex;
  std::string ref, dist, manifest, output, dump_entropies, fps_ref, fps_dist;
};

int run_features(const FeaturesCmd& c) {
  validate_extract(c.ex);
  std::vector<FeatureRecord> recs;
  if (!c.manifest.empty()) {
    if (!c.ref.empty() || !c.dist.empty()) throw InvalidArgument("use either --manifest or --ref/--dist");
    const auto m = load_manifest(c.manifest);
    for (const auto& r : m.rows)
      if (r.ref_path.empty() || r.dist_path.empty()) throw InvalidArgument("features --manifest needs ref_path and dist_path");
    recs = manifest_records(m, c.ex);
  } else {
    if (c.ref.empty() || c.dist.empty()) throw InvalidArgument("features needs --ref and --dist, or --manifest");
    PairSpec p{c.ref, c.dist, std::nullopt, std::nullopt};
    if (!c.fps_ref.empty()) p.fps_ref = Rational::parse(c.fps_ref);
    if (!c.fps_dist.empty()) p.fps_dist = Rational::parse(c.fps_dist);
    recs.push_back(compute_record(p, c.ex));
    if (!c.dump_entropies.empty()) {
      const auto raw = c.ex.raw();
      const auto ref = load_video(p.ref, raw, p.fps_ref);
      const auto dist = load_video(p.dist, raw, p.fps_dist);
      const auto aligned = align_for_comparison(ref, dist);
      const auto cfg = c.ex.feature_config();
      std::string csv = "role,fps,scale,subband,frame,mean_entropy\n";
      const std::vector<std::pair<std::string, const VideoSequence*>> roles{
          {"ref", &ref}, {"pr", &aligned.pr}, {"dist", &aligned.dist}};
      for (const auto& [role, video] : roles)
        for (int s : cfg.greed.scales) {
          const auto prof = entropy_profile(*video, s, cfg.greed);
          for (std::size_t k = 0; k < prof.size(); ++k)
            for (std::size_t t = 0; t < prof[k].size(); ++t)
              csv += role + "," + video->fps.str() + "," + std::to_string(s) + "," + std::to_string(k + 1) + "," +
                     std::to_string(t) + "," + format_double(prof[k][t]) + "\n";
        }
      write_file_atomic(c.dump_entropies, csv);
    }
  }
  std::string csv = feature_csv_header(recs.front().features.names) + "\n";
  for (const auto& r : recs) csv += feature_csv_row(r) + "\n";
  write_output(c.output, csv);
  return 0;
}

// ---------------------------------------------------------------------------
// train

struct TrainCmd {
  ExtractOptions ex;
  std::string manifest, output = "model.json", kernel = "linear";
  std::vector<double> fractions{0.85, 0.15};
  std::uint64_t seed = 0;
  std::optional<double> C, epsilon, gamma;
};

int run_train(const TrainCmd& c) {
  validate_extract(c.ex);
  const auto kernel = parse_kernel(c.kernel);
  const auto m = load_manifest(c.manifest);
  const auto data = build_dataset(m, manifest_records(m, c.ex));

  Hyperparams hp;
  const bool fixed = c.C || c.epsilon || c.gamma;
  if (c.C) hp.C = *c.C;
  if (c.epsilon) hp.epsilon = *c.epsilon;
  if (c.gamma) hp.gamma = *c.gamma;
  const auto contents = distinct_contents(data.content_ids);
  if (!fixed && contents.size() >= 2) {
    SplitSpec spec{c.fractions, c.seed, 1};
    if (spec.fractions.size() != 2) throw InvalidArgument("train --fractions takes (train, validation)");
    const auto sub = split_by_content(data.content_ids, spec, 0);
    if (sub.test.size() >= 2) {
      Matrix Xtr, Xva;
      std::vector<double> ytr, yva;
      for (auto r : sub.train) {
        Xtr.push_back(data.X[r]);
        ytr.push_back(data.mos[r]);
      }
      for (auto r : sub.test) {
        Xva.push_back(data.X[r]);
        yva.push_back(data.mos[r]);
      }
      hp = grid_search(Xtr, ytr, Xva, yva, kernel, HyperGrid{}, c.ex.jobs);
    } else {
      std::cerr << "greedvmaf: validation subset too small for model selection; using default hyperparameters\n";
    }
  }
  TrainInfo info;
  const auto model = train_svr(data.X, data.mos, kernel, hp, data.feature_names, {}, &info);
  if (info.degenerate_target) std::cerr << "greedvmaf: warning: constant mos, model predicts the constant\n";
  if (!info.converged) std::cerr << "greedvmaf: warning: SVR solver hit the iteration cap\n";
  write_output(c.output, model.to_json().dump(2) + "\n");
  return 0;
}

// ---------------------------------------------------------------------------
// predict

struct PredictCmd {
  ExtractOptions ex;
  std::string model, ref, dist, manifest, output, fps_ref, fps_dist;
};

int run_predict(const PredictCmd& c) {
  validate_extract(c.ex);
  const auto model = SvrModel::from_json([&] {
    try {
      return nlohmann::json::parse(read_text(c.model));
    } catch (const nlohmann::json::exception& e) {
      throw InvalidArgument("model '" + c.model + "' is not valid JSON: " + e.what());
    }
  }());
  const auto check_names = [&](const std::vector<std::string>& names) {
    if (names != model.feature_names)
      throw InvalidArgument("feature set does not match the model (check --scales)");
  };
  if (!c.manifest.empty()) {
    const auto m = load_manifest(c.manifest);
    const auto recs = manifest_records(m, c.ex);
    std::string csv = "content_id,ref,dist,score\n";
    for (std::size_t i = 0; i < recs.size(); ++i) {
      check_names(recs[i].features.names);
      csv += csv_escape(m.rows[i].content_id) + "," + csv_escape(recs[i].ref) + "," + csv_escape(recs[i].dist) + "," +
             format_double(model.predict_one(recs[i].features.values)) + "\n";
    }
    write_output(c.output, csv);
    return 0;
  }
  if (c.ref.empty() || c.dist.empty()) throw InvalidArgument("predict needs --ref and --dist, or --manifest");
  PairSpec p{c.ref, c.dist, std::nullopt, std::nullopt};
  if (!c.fps_ref.empty()) p.fps_ref = Rational::parse(c.fps_ref);
  if (!c.fps_dist.empty()) p.fps_dist = Rational::parse(c.fps_dist);
  const auto rec = compute_record(p, c.ex);
  check_names(rec.features.names);
  write_output(c.output, format_double(model.predict_one(rec.features.values)) + "\n");
  return 0;
}

// ---------------------------------------------------------------------------
// evaluate

struct EvaluateCmd {
  ExtractOptions ex;
  std::string manifest, output, kernel = "linear";
  std::vector<double> fractions{0.7, 0.15, 0.15};
  std::uint64_t seed = 0;
  int iterations = 200;
  bool all_splits = false;
  double train_fraction = 0.8;
  bool by_fps = false;
};

int run_evaluate(const EvaluateCmd& c) {
  validate_extract(c.ex);
  const auto m = load_manifest(c.manifest);
  const auto data = build_dataset(m, manifest_records(m, c.ex));
  ExperimentConfig cfg;
  cfg.kernel = parse_kernel(c.kernel);
  cfg.split = SplitSpec{parse_fractions(c.fractions), c.seed, c.iterations};
  cfg.all_splits = c.all_splits;
  cfg.train_fraction = c.train_fraction;
  cfg.by_fps = c.by_fps;
  cfg.jobs = c.ex.jobs;
  const auto report = run_experiment(data, cfg);
  const auto json = report_json(report).dump(2) + "\n";
  if (c.output.empty() || c.output == "-") {
    std::cerr << report_table(report);
    std::cout << json << std::flush;
  } else {
    write_file_atomic(c.output, json);
    std::cout << report_table(report) << std::flush;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"GREED-VMAF full-reference video quality features, regression and evaluation"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "greedvmaf 1.0.0");

  FeaturesCmd fc;
  auto* features = app.add_subcommand("features", "extract the 21-feature row for a video pair or a manifest");
  add_extract_flags(features, fc.ex);
  features->add_option("--ref", fc.ref, "reference video (.y4m or raw .yuv)");
  features->add_option("--dist", fc.dist, "distorted video (.y4m or raw .yuv)");
  features->add_option("--fps-ref", fc.fps_ref, "frame rate of a raw reference");
  features->add_option("--fps-dist", fc.fps_dist, "frame rate of a raw distorted video");
  features->add_option("--manifest", fc.manifest, "manifest CSV with ref_path,dist_path,content_id columns");
  features->add_option("-o,--output", fc.output, "feature CSV path (default stdout)");
  features->add_option("--dump-entropies", fc.dump_entropies, "write per-frame mean temporal entropies to this CSV");

  TrainCmd tc;
  auto* train = app.add_subcommand("train", "fit an SVR on a manifest and save the model");
  add_extract_flags(train, tc.ex);
  train->add_option("--manifest", tc.manifest, "manifest CSV with mos and content_id")->required();
  train->add_option("-o,--output", tc.output, "model JSON path");
  train->add_option("--kernel", tc.kernel, "linear or rbf");
  train->add_option("--fractions", tc.fractions, "train,validation content fractions for model selection")->delimiter(',');
  train->add_option("--seed", tc.seed, "split seed");
  train->add_option("--C", tc.C, "fix C and skip model selection");
  train->add_option("--epsilon", tc.epsilon, "fix epsilon and skip model selection");
  train->add_option("--gamma", tc.gamma, "fix the rbf gamma and skip model selection");

  PredictCmd pc;
  auto* predict = app.add_subcommand("predict", "score a video pair, or every row of a manifest");
  add_extract_flags(predict, pc.ex);
  predict->add_option("--model", pc.model, "model JSON written by train")->required();
  predict->add_option("--ref", pc.ref, "reference video");
  predict->add_option("--dist", pc.dist, "distorted video");
  predict->add_option("--fps-ref", pc.fps_ref, "frame rate of a raw reference");
  predict->add_option("--fps-dist", pc.fps_dist, "frame rate of a raw distorted video");
  predict->add_option("--manifest", pc.manifest, "batch mode: one score per manifest row");
  predict->add_option("-o,--output", pc.output, "output path (default stdout)");

  EvaluateCmd ec;
  auto* evaluate = app.add_subcommand("evaluate", "repeated content-disjoint train/test evaluation");
  add_extract_flags(evaluate, ec.ex);
  evaluate->add_option("--manifest", ec.manifest, "manifest CSV with mos and content_id")->required();
  evaluate->add_option("-o,--output", ec.output, "report JSON path (default stdout, table on stderr)");
  evaluate->add_option("--kernel", ec.kernel, "linear or rbf");
  evaluate->add_option("--fractions", ec.fractions, "train,val,test or train,test content fractions")->delimiter(',');
  evaluate->add_option("--seed", ec.seed, "master seed; iteration i uses seed XOR i");
  evaluate->add_option("--iterations", ec.iterations, "number of random splits")->check(CLI::PositiveNumber);
  evaluate->add_flag("--all-splits", ec.all_splits, "enumerate every train/test content combination");
  evaluate->add_option("--train-fraction", ec.train_fraction, "training share for --all-splits");
  evaluate->add_flag("--by-fps", ec.by_fps, "also report medians per distorted frame rate");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (app.got_subcommand(features)) return run_features(fc);
    if (app.got_subcommand(train)) return run_train(tc);
    if (app.got_subcommand(predict)) return run_predict(pc);
    if (app.got_subcommand(evaluate)) return run_evaluate(ec);
  } catch (const IoError& e) {
    std::cerr << "greedvmaf: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "greedvmaf: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitFailure;
}

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "greedvmaf/error.hpp"
#include "greedvmaf/media_io.hpp"
#include "greedvmaf/parallel.hpp"
#include "greedvmaf/stats.hpp"
#include "greedvmaf/svr.hpp"

namespace greedvmaf {

// ---------------------------------------------------------------------------
// Four-parameter logistic

using LogisticParams = std::array<double, 4>;

inline double logistic(double x, const LogisticParams& b) {
  return b[1] + (b[0] - b[1]) / (1.0 + std::exp(-(x - b[2]) / std::abs(b[3])));
}

struct LogisticFit {
  LogisticParams params{};
  std::vector<double> mapped;
  double sse = 0.0;
  bool converged = true;
};

namespace detail {

inline double logistic_sse(std::span<const double> x, std::span<const double> y, const LogisticParams& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - logistic(x[i], b);
    s += r * r;
  }
  return s;
}

// Solves A d = g for a 4x4 system; false when (numerically) singular.
inline bool solve4(std::array<std::array<double, 4>, 4> A, std::array<double, 4> g, std::array<double, 4>& d) {
  for (int c = 0; c < 4; ++c) {
    int piv = c;
    for (int r = c + 1; r < 4; ++r)
      if (std::abs(A[r][c]) > std::abs(A[piv][c])) piv = r;
    if (!(std::abs(A[piv][c]) > 1e-300)) return false;
    std::swap(A[c], A[piv]);
    std::swap(g[c], g[piv]);
    for (int r = c + 1; r < 4; ++r) {
      const double f = A[r][c] / A[c][c];
      for (int k = c; k < 4; ++k) A[r][k] -= f * A[c][k];
      g[r] -= f * g[c];
    }
  }
  for (int r = 3; r >= 0; --r) {
    double s = g[r];
    for (int k = r + 1; k < 4; ++k) s -= A[r][k] * d[k];
    d[r] = s / A[r][r];
  }
  return std::all_of(d.begin(), d.end(), [](double v) { return std::isfinite(v); });
}

// Levenberg-Marquardt from one starting point.
inline LogisticFit levenberg_marquardt(std::span<const double> x, std::span<const double> y, LogisticParams b,
                                       int max_iterations) {
  double sse = logistic_sse(x, y, b);
  double lambda = 1e-3;
  bool converged = false;
  for (int it = 0; it < max_iterations; ++it) {
    std::array<std::array<double, 4>, 4> JtJ{};
    std::array<double, 4> Jtr{};
    const double scale = std::abs(b[3]);
    const double sgn = b[3] < 0 ? -1.0 : 1.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double u = (x[i] - b[2]) / scale;
      const double s = 1.0 / (1.0 + std::exp(-u));
      const double ds = s * (1.0 - s);
      const std::array<double, 4> J{s, 1.0 - s, -(b[0] - b[1]) * ds / scale,
                                    -(b[0] - b[1]) * ds * u * sgn / scale};
      const double r = y[i] - (b[1] + (b[0] - b[1]) * s);
      for (int p = 0; p < 4; ++p) {
        Jtr[p] += J[p] * r;
        for (int q = 0; q < 4; ++q) JtJ[p][q] += J[p] * J[q];
      }
    }
    bool improved = false;
    while (lambda < 1e20) {
      auto A = JtJ;
      for (int p = 0; p < 4; ++p) A[p][p] += lambda * std::max(JtJ[p][p], 1e-12);
      std::array<double, 4> step{};
      if (solve4(A, Jtr, step)) {
        LogisticParams trial = b;
        for (int p = 0; p < 4; ++p) trial[p] += step[p];
        const double trial_sse = trial[3] != 0.0 ? logistic_sse(x, y, trial) : std::numeric_limits<double>::infinity();
        if (std::isfinite(trial_sse) && trial_sse <= sse) {
          const double rel = (sse - trial_sse) / std::max(sse, 1e-300);
          b = trial;
          sse = trial_sse;
          lambda = std::max(lambda / 10.0, 1e-12);
          improved = true;
          if (rel < 1e-14 || sse < 1e-28) converged = true;
          break;
        }
      }
      lambda *= 10.0;
    }
    if (!improved) {  // no descent direction left: at a (local) minimum
      converged = true;
      break;
    }
    if (converged) break;
  }
  LogisticFit fit;
  fit.params = b;
  fit.sse = sse;
  fit.converged = converged;
  return fit;
}

}  // namespace detail

/// Least-squares four-parameter logistic mapping of `pred` onto `mos`.
/// Two starts: the conventional one (max/min mos, median pred, std/4) and a
/// near-linear member; the lower residual wins.
inline LogisticFit logistic_fit(std::span<const double> pred, std::span<const double> mos, int max_iterations = 500) {
  if (pred.size() != mos.size()) throw InvalidArgument("logistic fit inputs differ in length");
  if (pred.size() < 5) throw InvalidArgument("logistic fit needs at least 5 points");
  const double sd = stddev(pred);
  if (!(sd > 0.0)) throw InvalidArgument("logistic fit needs non-constant predictions");

  const LogisticParams conventional{*std::max_element(mos.begin(), mos.end()), *std::min_element(mos.begin(), mos.end()),
                                    median(std::vector<double>(pred.begin(), pred.end())), sd / 4.0};
  // near-linear start: logistic ~ 1/2 + u/4 for |u| << 1
  const double mx = mean(pred), my = mean(mos);
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    sxy += (pred[i] - mx) * (mos[i] - my);
    sxx += (pred[i] - mx) * (pred[i] - mx);
  }
  const double slope = sxy / sxx;
  constexpr double kStretch = 100.0;
  const double width = kStretch * sd;
  const LogisticParams linear{my + 2.0 * width * slope, my - 2.0 * width * slope, mx, width};

  auto best = detail::levenberg_marquardt(pred, mos, conventional, max_iterations);
  auto alt = detail::levenberg_marquardt(pred, mos, linear, max_iterations);
  if (alt.sse < best.sse) best = std::move(alt);
  best.mapped.resize(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) best.mapped[i] = logistic(pred[i], best.params);
  return best;
}

// ---------------------------------------------------------------------------
// Criteria

struct Criteria {
  double srocc = 0.0;
  double krocc = 0.0;
  double plcc = 0.0;
  double rmse = 0.0;
  LogisticParams logistic{};
  bool logistic_applied = false;
  bool logistic_converged = true;
};

/// SROCC and KROCC on raw predictions; PLCC and RMSE after the logistic
/// mapping (on raw predictions when fewer than 5 points are available).
inline Criteria correlations(std::span<const double> pred, std::span<const double> mos) {
  check_pair(pred, mos);
  Criteria c;
  c.srocc = spearman(pred, mos);
  c.krocc = kendall(pred, mos);
  if (pred.size() >= 5) {
    const auto fit = logistic_fit(pred, mos);
    c.logistic = fit.params;
    c.logistic_applied = true;
    c.logistic_converged = fit.converged;
    c.plcc = pearson(fit.mapped, mos);
    c.rmse = rmse(fit.mapped, mos);
  } else {
    c.plcc = pearson(pred, mos);
    c.rmse = rmse(pred, mos);
  }
  return c;
}

// ---------------------------------------------------------------------------
// Content-disjoint splits

struct SplitSpec {
  std::vector<double> fractions{0.7, 0.15, 0.15};  // (train, val, test) or (train, test)
  std::uint64_t seed = 0;
  int iterations = 200;

  void validate() const {
    if (fractions.size() != 2 && fractions.size() != 3) throw InvalidArgument("split needs 2 or 3 fractions");
    double s = 0.0;
    for (double f : fractions) {
      if (!(f > 0.0 && f < 1.0)) throw InvalidArgument("split fractions must lie in (0, 1)");
      s += f;
    }
    if (std::abs(s - 1.0) > 1e-9) throw InvalidArgument("split fractions must sum to 1");
    if (iterations < 1) throw InvalidArgument("iterations must be >= 1");
  }
};

/// Row indices of each subset; `val` is empty for two-way splits.
struct Subsets {
  std::vector<std::size_t> train, val, test;
};

inline std::vector<std::string> distinct_contents(std::span<const std::string> content_ids) {
  std::set<std::string> s(content_ids.begin(), content_ids.end());
  return {s.begin(), s.end()};
}

/// Largest-remainder apportionment of n items; every part gets at least one.
inline std::vector<std::size_t> apportion(std::size_t n, std::span<const double> fractions) {
  if (n < fractions.size())
    throw InvalidArgument("need at least " + std::to_string(fractions.size()) + " contents, have " + std::to_string(n));
  std::vector<std::size_t> count(fractions.size());
  std::vector<double> rem(fractions.size());
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < fractions.size(); ++i) {
    const double q = fractions[i] * static_cast<double>(n);
    count[i] = static_cast<std::size_t>(std::floor(q + 1e-9));
    rem[i] = q - static_cast<double>(count[i]);
    assigned += count[i];
  }
  while (assigned < n) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < rem.size(); ++i)
      if (rem[i] > rem[best] + 1e-12) best = i;
    ++count[best];
    rem[best] = -1.0;
    ++assigned;
  }
  for (auto& c : count) {
    if (c != 0) continue;
    const auto big = std::max_element(count.begin(), count.end());
    --*big;
    c = 1;
  }
  return count;
}

inline Subsets rows_for_contents(std::span<const std::string> content_ids,
                                 const std::vector<std::vector<std::string>>& groups) {
  Subsets s;
  std::vector<std::vector<std::size_t>*> out{&s.train, &s.test};
  if (groups.size() == 3) out = {&s.train, &s.val, &s.test};
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const std::set<std::string> members(groups[g].begin(), groups[g].end());
    for (std::size_t r = 0; r < content_ids.size(); ++r)
      if (members.count(content_ids[r])) out[g]->push_back(r);
  }
  return s;
}

/// Random content-disjoint partition for one iteration. The RNG is seeded
/// with seed XOR iteration so every iteration is independently reproducible.
inline Subsets split_by_content(std::span<const std::string> content_ids, const SplitSpec& spec,
                                std::uint64_t iteration) {
  spec.validate();
  auto contents = distinct_contents(content_ids);
  const auto counts = apportion(contents.size(), spec.fractions);
  std::mt19937_64 rng(spec.seed ^ iteration);
  for (std::size_t i = contents.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng() % i);
    std::swap(contents[i - 1], contents[j]);
  }
  std::vector<std::vector<std::string>> groups;
  std::size_t pos = 0;
  for (auto c : counts) {
    groups.emplace_back(contents.begin() + static_cast<std::ptrdiff_t>(pos),
                        contents.begin() + static_cast<std::ptrdiff_t>(pos + c));
    pos += c;
  }
  return rows_for_contents(content_ids, groups);
}

/// Every train/test partition with round(train_fraction * n) training contents
/// (clamped to [1, n-1]), in lexicographic order of the sorted content list.
inline std::vector<Subsets> all_content_splits(std::span<const std::string> content_ids, double train_fraction = 0.8) {
  const auto contents = distinct_contents(content_ids);
  const std::size_t n = contents.size();
  if (n < 2) throw InvalidArgument("all-splits protocol needs at least 2 contents");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw InvalidArgument("train fraction must lie in (0, 1)");
  const auto k = std::clamp<std::size_t>(static_cast<std::size_t>(std::lround(train_fraction * static_cast<double>(n))),
                                         1, n - 1);
  std::vector<Subsets> out;
  std::vector<std::size_t> pick(k);
  for (std::size_t i = 0; i < k; ++i) pick[i] = i;
  for (;;) {
    std::vector<std::string> train, test;
    std::size_t p = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (p < k && pick[p] == i) {
        train.push_back(contents[i]);
        ++p;
      } else {
        test.push_back(contents[i]);
      }
    }
    out.push_back(rows_for_contents(content_ids, {train, test}));
    // next combination
    std::size_t i = k;
    while (i > 0 && pick[i - 1] == n - k + i - 1) --i;
    if (i == 0) break;
    ++pick[i - 1];
    for (std::size_t j = i; j < k; ++j) pick[j] = pick[j - 1] + 1;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Experiment

/// Feature rows with their labels and grouping keys.
struct Dataset {
  std::vector<std::string> feature_names;
  Matrix X;
  std::vector<double> mos;
  std::vector<std::string> content_ids;
  std::vector<Rational> fps_dist;

  std::size_t size() const noexcept { return X.size(); }
  void validate() const {
    if (X.size() != mos.size() || X.size() != content_ids.size() || X.size() != fps_dist.size())
      throw InvalidArgument("dataset columns differ in length");
    for (const auto& c : content_ids)
      if (c.empty()) throw InvalidArgument("empty content_id");
    for (double m : mos)
      if (!std::isfinite(m)) throw InvalidArgument("non-finite mos");
  }
};

struct ExperimentConfig {
  KernelType kernel = KernelType::kLinear;
  HyperGrid grid;
  Hyperparams fixed;  // used when a split has no validation subset
  SplitSpec split;
  bool all_splits = false;
  double train_fraction = 0.8;
  bool by_fps = false;
  unsigned jobs = 1;
  SolverOptions solver;
};

struct IterationResult {
  std::size_t index = 0;
  bool skipped = false;
  std::string skip_reason;
  Hyperparams hp;
  Criteria overall;
  std::map<std::string, Criteria> per_fps;  // keyed by distorted fps
  std::size_t test_size = 0;
};

struct ExperimentReport {
  std::string protocol;
  std::vector<IterationResult> iterations;
  std::size_t skipped = 0;
  Criteria median;  // logistic fields unused
  std::map<std::string, Criteria> median_per_fps;
  std::map<std::string, std::size_t> per_fps_counts;
};

namespace detail {

inline Matrix take_rows(const Matrix& X, const std::vector<std::size_t>& rows) {
  Matrix out;
  out.reserve(rows.size());
  for (auto r : rows) out.push_back(X[r]);
  return out;
}

inline std::vector<double> take(const std::vector<double>& v, const std::vector<std::size_t>& rows) {
  std::vector<double> out;
  out.reserve(rows.size());
  for (auto r : rows) out.push_back(v[r]);
  return out;
}

inline Criteria median_criteria(const std::vector<const Criteria*>& cs) {
  std::vector<double> s, k, p, r;
  for (const auto* c : cs) {
    s.push_back(c->srocc);
    k.push_back(c->krocc);
    p.push_back(c->plcc);
    r.push_back(c->rmse);
  }
  Criteria m;
  m.srocc = median(s);
  m.krocc = median(k);
  m.plcc = median(p);
  m.rmse = median(r);
  return m;
}

inline IterationResult run_iteration(const Dataset& data, const Subsets& sub, const ExperimentConfig& cfg,
                                     std::size_t index) {
  IterationResult res;
  res.index = index;
  res.test_size = sub.test.size();
  try {
    const auto Xtr = take_rows(data.X, sub.train);
    const auto ytr = take(data.mos, sub.train);
    Hyperparams hp = cfg.fixed;
    if (!sub.val.empty())
      hp = grid_search(Xtr, ytr, take_rows(data.X, sub.val), take(data.mos, sub.val), cfg.kernel, cfg.grid, 1,
                       cfg.solver);
    res.hp = hp;
    const auto model = train_svr(Xtr, ytr, cfg.kernel, hp, data.feature_names, cfg.solver);
    const auto pred = model.predict(take_rows(data.X, sub.test));
    const auto truth = take(data.mos, sub.test);
    res.overall = correlations(pred, truth);
    if (cfg.by_fps) {
      std::map<Rational, std::vector<std::size_t>> groups;
      for (std::size_t i = 0; i < sub.test.size(); ++i) groups[data.fps_dist[sub.test[i]]].push_back(i);
      for (const auto& [fps, members] : groups) {
        std::vector<double> gp, gt;
        for (auto i : members) {
          gp.push_back(pred[i]);
          gt.push_back(truth[i]);
        }
        try {
          res.per_fps[fps.str()] = correlations(gp, gt);
        } catch (const InvalidArgument&) {
          // group too small or constant: no entry for this fps
        }
      }
    }
  } catch (const InvalidArgument& e) {
    res.skipped = true;
    res.skip_reason = e.what();
  }
  return res;
}

}  // namespace detail

/// Per-fps test-row partition sizes (each row counted once).
inline std::map<std::string, std::size_t> fps_partition(const Dataset& data, const std::vector<std::size_t>& rows) {
  std::map<Rational, std::size_t> g;
  for (auto r : rows) ++g[data.fps_dist[r]];
  std::map<std::string, std::size_t> out;
  for (const auto& [k, v] : g) out[k.str()] = v;
  return out;
}

inline ExperimentReport run_experiment(const Dataset& data, const ExperimentConfig& cfg) {
  data.validate();
  if (data.size() == 0) throw InvalidArgument("empty dataset");
  std::vector<Subsets> splits;
  ExperimentReport report;
  if (cfg.all_splits) {
    splits = all_content_splits(data.content_ids, cfg.train_fraction);
    report.protocol = "all-splits train_fraction=" + std::to_string(cfg.train_fraction);
  } else {
    cfg.split.validate();
    for (int i = 0; i < cfg.split.iterations; ++i)
      splits.push_back(split_by_content(data.content_ids, cfg.split, static_cast<std::uint64_t>(i)));
    std::ostringstream p;
    p << "random-splits iterations=" << cfg.split.iterations << " seed=" << cfg.split.seed << " fractions=";
    for (std::size_t i = 0; i < cfg.split.fractions.size(); ++i) p << (i ? "," : "") << cfg.split.fractions[i];
    report.protocol = p.str();
  }
  report.iterations.resize(splits.size());
  parallel_for(splits.size(), cfg.jobs,
               [&](std::size_t i) { report.iterations[i] = detail::run_iteration(data, splits[i], cfg, i); });

  std::vector<const Criteria*> ok;
  std::map<std::string, std::vector<const Criteria*>> per_fps;
  for (const auto& it : report.iterations) {
    if (it.skipped) {
      ++report.skipped;
      continue;
    }
    ok.push_back(&it.overall);
    for (const auto& [k, c] : it.per_fps) per_fps[k].push_back(&c);
  }
  if (!ok.empty()) report.median = detail::median_criteria(ok);
  for (const auto& [k, v] : per_fps) {
    report.median_per_fps[k] = detail::median_criteria(v);
    report.per_fps_counts[k] = v.size();
  }
  return report;
}

inline nlohmann::json criteria_json(const Criteria& c, bool with_logistic) {
  nlohmann::json j{{"srocc", c.srocc}, {"krocc", c.krocc}, {"plcc", c.plcc}, {"rmse", c.rmse}};
  if (with_logistic) {
    j["logistic"] = c.logistic;
    j["logistic_applied"] = c.logistic_applied;
    j["logistic_converged"] = c.logistic_converged;
  }
  return j;
}

inline constexpr int kReportFormatVersion = 1;

inline nlohmann::json report_json(const ExperimentReport& r) {
  nlohmann::json j;
  j["format_version"] = kReportFormatVersion;
  j["protocol"] = r.protocol;
  j["iterations_total"] = r.iterations.size();
  j["iterations_skipped"] = r.skipped;
  j["median"] = criteria_json(r.median, false);
  nlohmann::json fps = nlohmann::json::object();
  for (const auto& [k, c] : r.median_per_fps) {
    fps[k] = criteria_json(c, false);
    fps[k]["iterations"] = r.per_fps_counts.at(k);
  }
  j["median_per_fps"] = fps;
  nlohmann::json its = nlohmann::json::array();
  for (const auto& it : r.iterations) {
    nlohmann::json e{{"index", it.index}, {"skipped", it.skipped}, {"test_size", it.test_size}};
    if (it.skipped) {
      e["reason"] = it.skip_reason;
    } else {
      e["hyperparams"] = {{"C", it.hp.C}, {"epsilon", it.hp.epsilon}, {"gamma", it.hp.gamma}};
      e["criteria"] = criteria_json(it.overall, true);
      if (!it.per_fps.empty()) {
        nlohmann::json pf;
        for (const auto& [k, c] : it.per_fps) pf[k] = criteria_json(c, false);
        e["per_fps"] = pf;
      }
    }
    its.push_back(std::move(e));
  }
  j["iterations"] = std::move(its);
  return j;
}

inline std::string report_table(const ExperimentReport& r) {
  std::ostringstream os;
  os << "protocol: " << r.protocol << "\n";
  os << "iterations: " << r.iterations.size() << " (skipped " << r.skipped << ")\n";
  os << std::left << std::setw(12) << "subset" << std::right << std::setw(10) << "SROCC" << std::setw(10) << "KROCC"
     << std::setw(10) << "PLCC" << std::setw(10) << "RMSE" << "\n";
  const auto row = [&](const std::string& name, const Criteria& c) {
    os << std::left << std::setw(12) << name << std::right << std::fixed << std::setprecision(4) << std::setw(10)
       << c.srocc << std::setw(10) << c.krocc << std::setw(10) << c.plcc << std::setw(10) << std::setprecision(3)
       << c.rmse << "\n";
  };
  row("overall", r.median);
  for (const auto& [k, c] : r.median_per_fps) row(k + " fps", c);
  return os.str();
}

// ---------------------------------------------------------------------------
// PSNR baseline

/// Mean per-frame luma PSNR on the [0, 255] scale; +inf when every frame matches.
inline double psnr(const VideoSequence& ref, const VideoSequence& dist) {
  if (ref.length() != dist.length() || ref.width() != dist.width() || ref.height() != dist.height())
    throw GeometryMismatch("PSNR inputs differ in frame count or dimensions");
  double acc = 0.0;
  for (std::size_t t = 0; t < ref.length(); ++t) {
    double se = 0.0;
    const auto& a = ref.frames[t].samples;
    const auto& b = dist.frames[t].samples;
    for (std::size_t i = 0; i < a.size(); ++i) se += (a[i] - b[i]) * (a[i] - b[i]);
    const double mse = se / static_cast<double>(a.size());
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    acc += 10.0 * std::log10(255.0 * 255.0 / mse);
  }
  return acc / static_cast<double>(ref.length());
}

}  // namespace greedvmaf

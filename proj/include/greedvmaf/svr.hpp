#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "greedvmaf/error.hpp"
#include "greedvmaf/parallel.hpp"
#include "greedvmaf/stats.hpp"

namespace greedvmaf {

using Matrix = std::vector<std::vector<double>>;

enum class KernelType { kLinear, kRbf };

inline std::string to_string(KernelType k) { return k == KernelType::kLinear ? "linear" : "rbf"; }

inline KernelType parse_kernel(const std::string& s) {
  if (s == "linear") return KernelType::kLinear;
  if (s == "rbf") return KernelType::kRbf;
  throw InvalidArgument("unknown kernel '" + s + "' (expected linear or rbf)");
}

struct Hyperparams {
  double C = 100.0;
  double epsilon = 0.5;
  double gamma = 1.0 / 21.0;  // rbf only

  void validate(KernelType k) const {
    if (!(C > 0.0)) throw InvalidArgument("C must be positive");
    if (!(epsilon >= 0.0)) throw InvalidArgument("epsilon must be non-negative");
    if (k == KernelType::kRbf && !(gamma > 0.0)) throw InvalidArgument("gamma must be positive");
  }
};

struct HyperGrid {
  std::vector<double> C{0.1, 1, 10, 100, 1000};
  std::vector<double> epsilon{0.1, 0.5, 1.0};
  std::vector<double> gamma{1.0 / 64, 1.0 / 32, 1.0 / 16, 1.0 / 8, 1.0 / 4, 1.0 / 2, 1, 2, 4};
};

struct SolverOptions {
  double tolerance = 1e-3;
  long max_iterations = 100000;
};

struct TrainInfo {
  long iterations = 0;
  bool converged = true;
  bool degenerate_target = false;
};

inline constexpr int kModelVersion = 1;

/// Epsilon-SVR with z-score standardization folded into the model.
struct SvrModel {
  KernelType kernel = KernelType::kLinear;
  Hyperparams hp;
  std::vector<double> mean;
  std::vector<double> stddev;
  std::vector<double> weights;  // linear kernel, standardized space
  Matrix support_vectors;       // rbf kernel, standardized space
  std::vector<double> dual_coefs;
  double bias = 0.0;
  std::vector<std::string> feature_names;

  std::size_t dimension() const noexcept { return mean.size(); }

  /// Column visiting order for kernel sums: by feature name, so a consistent
  /// column permutation reproduces every floating-point operation.
  std::vector<std::size_t> column_order() const {
    std::vector<std::size_t> order(feature_names.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return feature_names[a] < feature_names[b]; });
    return order;
  }

  std::vector<double> standardize(std::span<const double> x) const {
    if (x.size() != dimension())
      throw InvalidArgument("expected " + std::to_string(dimension()) + " features, got " + std::to_string(x.size()));
    std::vector<double> z(x.size());
    for (std::size_t j = 0; j < x.size(); ++j) {
      if (!std::isfinite(x[j])) throw InvalidArgument("non-finite feature value");
      z[j] = (x[j] - mean[j]) / stddev[j];
    }
    return z;
  }

  double predict_one(std::span<const double> x) const {
    const auto z = standardize(x);
    const auto order = column_order();
    double f = bias;
    if (kernel == KernelType::kLinear) {
      for (std::size_t j : order) f += weights[j] * z[j];
    } else {
      for (std::size_t s = 0; s < support_vectors.size(); ++s) {
        double d2 = 0.0;
        for (std::size_t j : order) {
          const double d = z[j] - support_vectors[s][j];
          d2 += d * d;
        }
        f += dual_coefs[s] * std::exp(-hp.gamma * d2);
      }
    }
    return f;
  }

  std::vector<double> predict(const Matrix& X) const {
    std::vector<double> out;
    out.reserve(X.size());
    for (const auto& row : X) out.push_back(predict_one(row));
    return out;
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["version"] = kModelVersion;
    j["kernel"] = to_string(kernel);
    j["hyperparams"] = {{"C", hp.C}, {"epsilon", hp.epsilon}, {"gamma", hp.gamma}};
    j["standardization"] = {{"mean", mean}, {"std", stddev}};
    j["bias"] = bias;
    if (kernel == KernelType::kLinear) {
      j["weights"] = weights;
    } else {
      j["support_vectors"] = support_vectors;
      j["dual_coefs"] = dual_coefs;
    }
    j["feature_names"] = feature_names;
    return j;
  }

  static SvrModel from_json(const nlohmann::json& j) {
    try {
      if (!j.contains("version") || j.at("version").get<int>() != kModelVersion)
        throw InvalidArgument("unsupported model version");
      SvrModel m;
      m.kernel = parse_kernel(j.at("kernel").get<std::string>());
      const auto& h = j.at("hyperparams");
      m.hp = {h.at("C").get<double>(), h.at("epsilon").get<double>(), h.at("gamma").get<double>()};
      m.mean = j.at("standardization").at("mean").get<std::vector<double>>();
      m.stddev = j.at("standardization").at("std").get<std::vector<double>>();
      m.bias = j.at("bias").get<double>();
      m.feature_names = j.at("feature_names").get<std::vector<std::string>>();
      if (m.kernel == KernelType::kLinear) {
        m.weights = j.at("weights").get<std::vector<double>>();
        if (m.weights.size() != m.mean.size()) throw InvalidArgument("weight dimension mismatch");
      } else {
        m.support_vectors = j.at("support_vectors").get<Matrix>();
        m.dual_coefs = j.at("dual_coefs").get<std::vector<double>>();
        if (m.support_vectors.size() != m.dual_coefs.size()) throw InvalidArgument("support vector count mismatch");
        for (const auto& sv : m.support_vectors)
          if (sv.size() != m.mean.size()) throw InvalidArgument("support vector dimension mismatch");
      }
      if (m.stddev.size() != m.mean.size() || m.feature_names.size() != m.mean.size())
        throw InvalidArgument("standardization / feature name dimension mismatch");
      for (double s : m.stddev)
        if (!(s > 0.0)) throw InvalidArgument("standardization stddev must be positive");
      return m;
    } catch (const nlohmann::json::exception& e) {
      throw InvalidArgument(std::string("malformed model document: ") + e.what());
    }
  }
};

namespace detail {

inline void check_matrix(const Matrix& X, std::span<const double> y) {
  if (X.size() != y.size()) throw InvalidArgument("feature rows and labels differ in count");
  for (const auto& row : X) {
    if (row.size() != X.front().size()) throw InvalidArgument("ragged feature matrix");
    for (double v : row)
      if (!std::isfinite(v)) throw InvalidArgument("non-finite feature value");
  }
  for (double v : y)
    if (!std::isfinite(v)) throw InvalidArgument("non-finite label");
}

// Dual of epsilon-SVR over 2n variables (alpha, alpha*), solved by SMO with
// the maximal-violating-pair working set. Returns alpha - alpha* and the bias.
struct SmoResult {
  std::vector<double> coef;
  double bias = 0.0;
  long iterations = 0;
  bool converged = true;
};

inline SmoResult solve_epsilon_svr(const Matrix& K, std::span<const double> y, const Hyperparams& hp,
                                   const SolverOptions& opt) {
  const std::size_t n = y.size();
  const std::size_t m = 2 * n;
  const double C = hp.C;
  std::vector<double> alpha(m, 0.0), grad(m);
  std::vector<signed char> sign(m);
  for (std::size_t i = 0; i < n; ++i) {
    sign[i] = 1;
    sign[i + n] = -1;
    grad[i] = hp.epsilon - y[i];
    grad[i + n] = hp.epsilon + y[i];
  }
  const auto Q = [&](std::size_t i, std::size_t j) {
    return static_cast<double>(sign[i] * sign[j]) * K[i % n][j % n];
  };
  const auto in_up = [&](std::size_t t) { return sign[t] > 0 ? alpha[t] < C : alpha[t] > 0.0; };
  const auto in_low = [&](std::size_t t) { return sign[t] > 0 ? alpha[t] > 0.0 : alpha[t] < C; };
  constexpr double kTau = 1e-12;

  SmoResult res;
  for (;;) {
    double g_max = -std::numeric_limits<double>::infinity(), g_min = std::numeric_limits<double>::infinity();
    std::size_t i = m, j = m;
    for (std::size_t t = 0; t < m; ++t) {
      const double v = -sign[t] * grad[t];
      if (in_up(t) && v > g_max) {
        g_max = v;
        i = t;
      }
      if (in_low(t) && v < g_min) {
        g_min = v;
        j = t;
      }
    }
    if (i == m || j == m || g_max - g_min < opt.tolerance) break;
    if (res.iterations >= opt.max_iterations) {
      res.converged = false;
      break;
    }
    ++res.iterations;

    const double old_i = alpha[i], old_j = alpha[j];
    if (sign[i] != sign[j]) {
      double quad = Q(i, i) + Q(j, j) + 2.0 * Q(i, j);
      if (quad <= 0.0) quad = kTau;
      const double delta = (-grad[i] - grad[j]) / quad;
      const double diff = alpha[i] - alpha[j];
      alpha[i] += delta;
      alpha[j] += delta;
      if (diff > 0.0) {
        if (alpha[j] < 0.0) {
          alpha[j] = 0.0;
          alpha[i] = diff;
        }
      } else if (alpha[i] < 0.0) {
        alpha[i] = 0.0;
        alpha[j] = -diff;
      }
      if (diff > 0.0) {
        if (alpha[i] > C) {
          alpha[i] = C;
          alpha[j] = C - diff;
        }
      } else if (alpha[j] > C) {
        alpha[j] = C;
        alpha[i] = C + diff;
      }
    } else {
      double quad = Q(i, i) + Q(j, j) - 2.0 * Q(i, j);
      if (quad <= 0.0) quad = kTau;
      const double delta = (grad[i] - grad[j]) / quad;
      const double sum = alpha[i] + alpha[j];
      alpha[i] -= delta;
      alpha[j] += delta;
      if (sum > C) {
        if (alpha[i] > C) {
          alpha[i] = C;
          alpha[j] = sum - C;
        }
      } else if (alpha[j] < 0.0) {
        alpha[j] = 0.0;
        alpha[i] = sum;
      }
      if (sum > C) {
        if (alpha[j] > C) {
          alpha[j] = C;
          alpha[i] = sum - C;
        }
      } else if (alpha[i] < 0.0) {
        alpha[i] = 0.0;
        alpha[j] = sum;
      }
    }
    const double di = alpha[i] - old_i, dj = alpha[j] - old_j;
    for (std::size_t t = 0; t < m; ++t) grad[t] += Q(t, i) * di + Q(t, j) * dj;
  }

  // rho: mean of y*G over free variables, else midpoint of the feasible interval
  double ub = std::numeric_limits<double>::infinity(), lb = -std::numeric_limits<double>::infinity();
  double free_sum = 0.0;
  std::size_t free_count = 0;
  for (std::size_t t = 0; t < m; ++t) {
    const double yg = sign[t] * grad[t];
    if (alpha[t] >= C) {
      if (sign[t] < 0) ub = std::min(ub, yg);
      else lb = std::max(lb, yg);
    } else if (alpha[t] <= 0.0) {
      if (sign[t] > 0) ub = std::min(ub, yg);
      else lb = std::max(lb, yg);
    } else {
      ++free_count;
      free_sum += yg;
    }
  }
  const double rho = free_count > 0 ? free_sum / static_cast<double>(free_count) : 0.5 * (ub + lb);
  res.bias = -rho;
  res.coef.resize(n);
  for (std::size_t t = 0; t < n; ++t) res.coef[t] = alpha[t] - alpha[t + n];
  return res;
}

}  // namespace detail

inline SvrModel train_svr(const Matrix& X, std::span<const double> y, KernelType kernel, const Hyperparams& hp,
                          std::vector<std::string> feature_names = {}, const SolverOptions& opt = {},
                          TrainInfo* info = nullptr) {
  if (X.size() < 2) throw InvalidArgument("SVR training needs at least 2 rows");
  detail::check_matrix(X, y);
  hp.validate(kernel);
  const std::size_t n = X.size(), d = X.front().size();
  if (feature_names.empty())
    for (std::size_t j = 0; j < d; ++j) feature_names.push_back("f" + std::to_string(j));
  if (feature_names.size() != d) throw InvalidArgument("feature name count does not match feature dimension");

  SvrModel model;
  model.kernel = kernel;
  model.hp = hp;
  model.feature_names = std::move(feature_names);
  model.mean.assign(d, 0.0);
  model.stddev.assign(d, 1.0);
  for (std::size_t j = 0; j < d; ++j) {
    std::vector<double> col(n);
    for (std::size_t i = 0; i < n; ++i) col[i] = X[i][j];
    model.mean[j] = mean(col);
    const double s = stddev(col);
    model.stddev[j] = s > 0.0 ? s : 1.0;
  }
  Matrix Z(n);
  for (std::size_t i = 0; i < n; ++i) Z[i] = model.standardize(X[i]);

  TrainInfo local;
  const bool constant_y = std::all_of(y.begin(), y.end(), [&](double v) { return v == y[0]; });
  if (constant_y) {
    local.degenerate_target = true;
    model.bias = y[0];
    if (kernel == KernelType::kLinear) model.weights.assign(d, 0.0);
    if (info) *info = local;
    return model;
  }

  const auto order = model.column_order();
  Matrix K(n, std::vector<double>(n));
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = a; b < n; ++b) {
      double v = 0.0;
      if (kernel == KernelType::kLinear) {
        for (std::size_t j : order) v += Z[a][j] * Z[b][j];
      } else {
        double d2 = 0.0;
        for (std::size_t j : order) d2 += (Z[a][j] - Z[b][j]) * (Z[a][j] - Z[b][j]);
        v = std::exp(-hp.gamma * d2);
      }
      K[a][b] = K[b][a] = v;
    }

  const auto sol = detail::solve_epsilon_svr(K, y, hp, opt);
  local.iterations = sol.iterations;
  local.converged = sol.converged;
  model.bias = sol.bias;
  if (kernel == KernelType::kLinear) {
    model.weights.assign(d, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < d; ++j) model.weights[j] += sol.coef[i] * Z[i][j];
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      if (sol.coef[i] == 0.0) continue;
      model.support_vectors.push_back(Z[i]);
      model.dual_coefs.push_back(sol.coef[i]);
    }
  }
  if (info) *info = local;
  return model;
}

/// SROCC used for model selection; constant predictions rank below any real score.
inline double selection_score(std::span<const double> pred, std::span<const double> truth) {
  try {
    return spearman(pred, truth);
  } catch (const InvalidArgument&) {
    return -2.0;
  }
}

/// Exhaustive search maximizing validation SROCC. Ties go to smaller C, then
/// smaller gamma, then smaller epsilon.
inline Hyperparams grid_search(const Matrix& X_train, std::span<const double> y_train, const Matrix& X_val,
                               std::span<const double> y_val, KernelType kernel, const HyperGrid& grid = {},
                               unsigned jobs = 1, const SolverOptions& opt = {}) {
  if (X_val.size() < 2) throw InvalidArgument("validation set needs at least 2 rows for SROCC");
  if (X_val.size() != y_val.size()) throw InvalidArgument("validation rows and labels differ in count");
  const std::vector<double> gammas = kernel == KernelType::kRbf ? grid.gamma : std::vector<double>{1.0};
  std::vector<Hyperparams> points;
  for (double c : grid.C)
    for (double g : gammas)
      for (double e : grid.epsilon) points.push_back({c, e, g});
  if (points.empty()) throw InvalidArgument("empty hyperparameter grid");

  std::vector<double> scores(points.size());
  parallel_for(points.size(), jobs, [&](std::size_t p) {
    const auto model = train_svr(X_train, y_train, kernel, points[p], {}, opt);
    scores[p] = selection_score(model.predict(X_val), y_val);
  });
  std::size_t best = 0;
  for (std::size_t p = 1; p < points.size(); ++p)
    if (scores[p] > scores[best] + 1e-12) best = p;
  return points[best];
}

}  // namespace greedvmaf

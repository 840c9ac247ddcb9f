#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "greedvmaf/svr.hpp"

using namespace greedvmaf;
using Catch::Approx;

namespace {

struct Data {
  Matrix X;
  std::vector<double> y;
};

// y = 2 x1 + 1; x2, x3 are distractors
Data exact_linear(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(0.0, 10.0);
  Data d;
  for (std::size_t i = 0; i < n; ++i) {
    const double x1 = U(rng);
    d.X.push_back({x1, U(rng), U(rng)});
    d.y.push_back(2.0 * x1 + 1.0);
  }
  return d;
}

Data xor_like(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  Data d;
  for (std::size_t i = 0; i < n; ++i) {
    const double a = U(rng), b = U(rng);
    d.X.push_back({a, b});
    d.y.push_back(a * b > 0 ? 1.0 : -1.0);
  }
  return d;
}

double train_rmse(const SvrModel& m, const Data& d) {
  const auto p = m.predict(d.X);
  return rmse(p, d.y);
}

}  // namespace

TEST_CASE("two-point problems solved by hand", "[svr]") {
  // standardized inputs are -1 and +1; symmetric solution has bias 2
  const Matrix X{{0.0}, {1.0}};
  const std::vector<double> y{0.0, 4.0};
  SECTION("hard tube: slope (4 - 2 eps) / 2") {
    const auto m = train_svr(X, y, KernelType::kLinear, {1000.0, 0.5, 1.0});
    CHECK(m.weights[0] == Approx(1.5).margin(1e-3));
    CHECK(m.bias == Approx(2.0).margin(1e-3));
    CHECK(m.predict_one(std::vector<double>{0.0}) == Approx(0.5).margin(2e-3));
  }
  SECTION("box-limited: slope 2C") {
    const auto m = train_svr(X, y, KernelType::kLinear, {0.5, 0.5, 1.0});
    CHECK(m.weights[0] == Approx(1.0).margin(1e-3));
    CHECK(m.bias == Approx(2.0).margin(1e-3));
  }
}

TEST_CASE("exact linear target is recovered", "[svr]") {
  const auto d = exact_linear(60, 1);
  TrainInfo info;
  const auto m = train_svr(d.X, d.y, KernelType::kLinear, {100.0, 0.01, 1.0}, {}, {}, &info);
  CHECK(info.converged);
  CHECK(train_rmse(m, d) < 0.02);
  for (std::size_t i = 0; i < d.X.size(); ++i) CHECK(std::abs(m.predict_one(d.X[i]) - d.y[i]) <= 0.01 + 0.02);
}

TEST_CASE("constant target yields a constant model", "[svr]") {
  const auto d = exact_linear(10, 2);
  const std::vector<double> five(10, 5.0);
  for (auto k : {KernelType::kLinear, KernelType::kRbf}) {
    TrainInfo info;
    const auto m = train_svr(d.X, five, k, {}, {}, {}, &info);
    CHECK(info.degenerate_target);
    for (double p : m.predict(d.X)) CHECK(p == 5.0);
    CHECK(m.predict_one(std::vector<double>{-50.0, 3.0, 1e4}) == 5.0);
  }
}

TEST_CASE("rbf fits an XOR pattern that a linear model cannot", "[svr]") {
  const auto d = xor_like(80, 3);
  const auto lin = train_svr(d.X, d.y, KernelType::kLinear, {10.0, 0.1, 1.0});
  const auto rbf = train_svr(d.X, d.y, KernelType::kRbf, {10.0, 0.1, 1.0});
  CHECK(train_rmse(rbf, d) < 0.5 * train_rmse(lin, d));
}

TEST_CASE("model JSON round trip", "[svr][json]") {
  const auto d = xor_like(40, 4);
  for (auto k : {KernelType::kLinear, KernelType::kRbf}) {
    const auto m = train_svr(d.X, d.y, k, {10.0, 0.1, 0.5}, {"a", "b"});
    const auto text = m.to_json().dump();
    const auto back = SvrModel::from_json(nlohmann::json::parse(text));
    CHECK(back.feature_names == m.feature_names);
    for (const auto& x : d.X) CHECK(std::abs(back.predict_one(x) - m.predict_one(x)) <= 1e-9);
  }
  SECTION("version and shape are validated") {
    auto j = train_svr(d.X, d.y, KernelType::kLinear, {}).to_json();
    auto bad = j;
    bad["version"] = 99;
    CHECK_THROWS_AS(SvrModel::from_json(bad), InvalidArgument);
    bad = j;
    bad["weights"] = std::vector<double>{1.0};
    CHECK_THROWS_AS(SvrModel::from_json(bad), InvalidArgument);
    bad = j;
    bad.erase("standardization");
    CHECK_THROWS_AS(SvrModel::from_json(bad), InvalidArgument);
  }
}

TEST_CASE("prediction contracts", "[svr]") {
  const auto d = exact_linear(20, 5);
  const auto m = train_svr(d.X, d.y, KernelType::kLinear, {});
  CHECK(m.predict(Matrix{}).empty());
  CHECK_THROWS_AS(m.predict_one(std::vector<double>{1.0, 2.0}), InvalidArgument);
  CHECK_THROWS_AS(m.predict_one(std::vector<double>{1.0, 2.0, std::nan("")}), InvalidArgument);
  CHECK_THROWS_AS(train_svr(Matrix{{1.0}}, std::vector<double>{1.0}, KernelType::kLinear, {}), InvalidArgument);
  CHECK_THROWS_AS(train_svr(d.X, d.y, KernelType::kLinear, {-1.0, 0.1, 1.0}), InvalidArgument);
  CHECK_THROWS_AS(train_svr(d.X, d.y, KernelType::kRbf, {1.0, 0.1, 0.0}), InvalidArgument);
  CHECK_THROWS_AS(parse_kernel("poly"), InvalidArgument);
}

TEST_CASE("zero-variance features get unit scale and no weight", "[svr]") {
  auto d = exact_linear(30, 6);
  for (auto& row : d.X) row.push_back(7.0);
  const auto m = train_svr(d.X, d.y, KernelType::kLinear, {});
  CHECK(m.stddev[3] == 1.0);
  CHECK(m.weights[3] == 0.0);
}

TEST_CASE("training is deterministic and invariant to consistent rescaling", "[svr][property]") {
  const auto d = xor_like(50, 7);
  const auto a = train_svr(d.X, d.y, KernelType::kRbf, {10.0, 0.1, 0.5});
  const auto b = train_svr(d.X, d.y, KernelType::kRbf, {10.0, 0.1, 0.5});
  CHECK(a.to_json().dump() == b.to_json().dump());

  auto scaled = d.X;
  for (auto& row : scaled) row[0] = 40.0 * row[0] - 3.0;
  const auto c = train_svr(scaled, d.y, KernelType::kRbf, {10.0, 0.1, 0.5});
  for (std::size_t i = 0; i < d.X.size(); ++i) CHECK(c.predict_one(scaled[i]) == Approx(a.predict_one(d.X[i])).margin(1e-9));
}

TEST_CASE("permuting columns with their names leaves predictions unchanged", "[svr][property]") {
  const auto d = exact_linear(40, 8);
  const auto m = train_svr(d.X, d.y, KernelType::kRbf, {10.0, 0.1, 0.2}, {"x1", "x2", "x3"});
  Matrix P;
  for (const auto& r : d.X) P.push_back({r[2], r[0], r[1]});
  const auto mp = train_svr(P, d.y, KernelType::kRbf, {10.0, 0.1, 0.2}, {"x3", "x1", "x2"});
  for (std::size_t i = 0; i < d.X.size(); ++i) CHECK(mp.predict_one(P[i]) == Approx(m.predict_one(d.X[i])).margin(1e-9));
}

TEST_CASE("small gamma drives rbf toward a constant", "[svr][property]") {
  const auto d = xor_like(60, 9);
  double prev = std::numeric_limits<double>::infinity();
  for (double g : {1.0, 1e-1, 1e-2, 1e-3, 1e-4}) {
    const auto p = train_svr(d.X, d.y, KernelType::kRbf, {1.0, 0.1, g}).predict(d.X);
    const double var = stddev(p) * stddev(p);
    INFO("gamma " << g);
    CHECK(var < prev);
    prev = var;
  }
}

TEST_CASE("grid search", "[svr][grid]") {
  const auto tr = exact_linear(40, 10);
  const auto va = exact_linear(15, 11);
  SECTION("single point grid returns that point") {
    HyperGrid g{{3.0}, {0.2}, {0.7}};
    const auto hp = grid_search(tr.X, tr.y, va.X, va.y, KernelType::kRbf, g);
    CHECK(hp.C == 3.0);
    CHECK(hp.epsilon == 0.2);
    CHECK(hp.gamma == 0.7);
  }
  SECTION("a C-insensitive linear map ties, smallest C wins") {
    Data one_tr, one_va;
    for (std::size_t i = 0; i < tr.X.size(); ++i) one_tr.X.push_back({tr.X[i][0]});
    for (std::size_t i = 0; i < va.X.size(); ++i) one_va.X.push_back({va.X[i][0]});
    const auto hp = grid_search(one_tr.X, tr.y, one_va.X, va.y, KernelType::kLinear, {}, 2);
    CHECK(hp.C == 0.1);
    CHECK(hp.epsilon == 0.1);
  }
  SECTION("degenerate grids and validation sets") {
    CHECK_THROWS_AS(grid_search(tr.X, tr.y, Matrix{va.X[0]}, std::vector<double>{va.y[0]}, KernelType::kLinear),
                    InvalidArgument);
    HyperGrid empty{{}, {0.1}, {1.0}};
    CHECK_THROWS_AS(grid_search(tr.X, tr.y, va.X, va.y, KernelType::kLinear, empty), InvalidArgument);
  }
  SECTION("parallel evaluation picks the same point") {
    const auto a = grid_search(tr.X, tr.y, va.X, va.y, KernelType::kRbf, {}, 1);
    const auto b = grid_search(tr.X, tr.y, va.X, va.y, KernelType::kRbf, {}, 3);
    CHECK(a.C == b.C);
    CHECK(a.epsilon == b.epsilon);
    CHECK(a.gamma == b.gamma);
  }
}

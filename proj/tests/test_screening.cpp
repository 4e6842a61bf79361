#include <algorithm>
#include <cmath>
#include <memory>

#include <gtest/gtest.h>

#include "catdcor/screening.hpp"
#include "catdcor/simulate.hpp"

using namespace catdcor;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an Error";
  return ErrorCode::internal_consistency;
}

DistancePtr shared(const DistanceMatrix& d) { return std::make_shared<const DistanceMatrix>(d); }

// Response in the last column; `features` independent uniform columns.
CategoricalDataset random_dataset(Rng& rng, std::size_t n, std::size_t features, int levels) {
  CategoricalDataset data;
  for (std::size_t c = 0; c <= features; ++c) {
    data.names.push_back(c == features ? "Y" : "X" + std::to_string(c + 1));
    data.levels.push_back(levels);
    std::vector<int> col(n);
    for (auto& v : col) v = static_cast<int>(rng.below(static_cast<std::uint64_t>(levels)));
    data.columns.push_back(std::move(col));
  }
  return data;
}

std::vector<DistancePtr> uniform_distances(const CategoricalDataset& data, EncodingKind kind) {
  std::vector<DistancePtr> out;
  for (int levels : data.levels) {
    out.push_back(shared(distance_matrix(make_encoding(kind, static_cast<std::size_t>(levels)))));
  }
  return out;
}

}  // namespace

TEST(Changepoint, TwoSlopeSequence) {
  const std::vector<double> v{10, 9.8, 9.6, 0.1, 0.09, 0.08, 0.07};
  const auto cp = changepoint_threshold(v);
  EXPECT_EQ(cp.index, 3u);
  EXPECT_GT(cp.threshold, 0.1);
  EXPECT_LT(cp.threshold, 9.6);
  EXPECT_DOUBLE_EQ(cp.threshold, 4.85);
  EXPECT_FALSE(cp.low_confidence);
}

TEST(Changepoint, LinearSequenceIsLowConfidence) {
  std::vector<double> v;
  for (int k = 0; k < 12; ++k) v.push_back(5.0 - 0.3 * k);
  const auto cp = changepoint_threshold(v);
  EXPECT_EQ(cp.index, 2u);
  EXPECT_TRUE(cp.low_confidence);
}

TEST(Changepoint, ShiftInvariance) {
  Rng rng(81);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> v;
    const auto m = 4 + rng.below(60);
    for (std::size_t k = 0; k < m; ++k) v.push_back(rng.uniform());
    std::sort(v.rbegin(), v.rend());
    const double shift = 10 * rng.normal();
    std::vector<double> w = v;
    for (auto& x : w) x += shift;
    const auto a = changepoint_threshold(v);
    const auto b = changepoint_threshold(w);
    EXPECT_EQ(a.index, b.index);
    EXPECT_NEAR(b.threshold, a.threshold + shift, 1e-12 * std::max(1.0, std::abs(shift)) * 8);
  }
}

TEST(Changepoint, MatchesBruteForceLeastSquares) {
  Rng rng(82);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<double> v;
    const auto m = 4 + rng.below(25);
    for (std::size_t k = 0; k < m; ++k) v.push_back(rng.uniform());
    std::sort(v.rbegin(), v.rend());
    auto fit = [&](std::size_t lo, std::size_t hi) {
      const auto len = static_cast<Eigen::Index>(hi - lo);
      Eigen::MatrixXd a(len, 2);
      Eigen::VectorXd y(len);
      for (Eigen::Index r = 0; r < len; ++r) {
        a(r, 0) = 1.0;
        a(r, 1) = static_cast<double>(lo + r + 1);
        y(r) = v[lo + r];
      }
      const Eigen::VectorXd beta = a.colPivHouseholderQr().solve(y);
      return (a * beta - y).squaredNorm();
    };
    double best = HUGE_VAL;
    std::size_t arg = 0;
    for (std::size_t b = 2; b + 2 <= m; ++b) {
      const double r = fit(0, b) + fit(b, m);
      if (r < best - 1e-12) {
        best = r;
        arg = b;
      }
    }
    const auto cp = changepoint_threshold(v);
    EXPECT_NEAR(cp.rss, best, 1e-9);
    if (cp.index != arg) EXPECT_NEAR(fit(0, cp.index) + fit(cp.index, m), best, 1e-9);
  }
}

TEST(Changepoint, NeedsFourValues) {
  EXPECT_EQ(code_of([] { changepoint_threshold({3, 2, 1}); }), ErrorCode::insufficient_features);
}

TEST(Screen, FeatureEqualToResponseScoresOne) {
  Rng rng(83);
  auto data = random_dataset(rng, 300, 5, 3);
  data.columns[2] = data.columns.back();
  const auto report = screen(data, 5, uniform_distances(data, EncodingKind::one_hot), {Estimator::mle, 1});
  EXPECT_NEAR(report.values[2], 1.0, 1e-12);
  EXPECT_EQ(report.feature_ids[report.order.front()], 2u);
}

TEST(Screen, NullValuesNearZeroAtLargeN) {
  Rng rng(84);
  const auto data = random_dataset(rng, 20000, 20, 4);
  const auto report = screen(data, 20, uniform_distances(data, EncodingKind::semicircle));
  EXPECT_LT(*std::max_element(report.values.begin(), report.values.end()), 0.005);
}

TEST(Screen, InvariantToRowAndColumnOrder) {
  Rng rng(85);
  const auto data = random_dataset(rng, 200, 8, 4);
  const auto d = uniform_distances(data, EncodingKind::ordinal);
  const auto base = screen(data, 8, d);

  auto rows = data;
  std::vector<std::size_t> perm(data.rows());
  std::iota(perm.begin(), perm.end(), 0);
  rng.shuffle(std::span<std::size_t>(perm));
  for (std::size_t c = 0; c < data.cols(); ++c)
    for (std::size_t r = 0; r < perm.size(); ++r) rows.columns[c][r] = data.columns[c][perm[r]];
  const auto by_rows = screen(rows, 8, d);
  for (std::size_t k = 0; k < base.values.size(); ++k) EXPECT_NEAR(by_rows.values[k], base.values[k], 1e-14);

  // Reverse the feature columns; the response moves to the front.
  CategoricalDataset cols;
  for (std::size_t c = data.cols(); c-- > 0;) {
    cols.names.push_back(data.names[c]);
    cols.columns.push_back(data.columns[c]);
    cols.levels.push_back(data.levels[c]);
  }
  const auto by_cols = screen(cols, 0, uniform_distances(cols, EncodingKind::ordinal));
  for (std::size_t k = 0; k < by_cols.values.size(); ++k) {
    const auto it = std::find(base.names.begin(), base.names.end(), by_cols.names[k]);
    ASSERT_NE(it, base.names.end());
    EXPECT_EQ(by_cols.values[k], base.values[static_cast<std::size_t>(it - base.names.begin())]);
  }
}

TEST(Screen, DegenerateFeatureScoresZeroWithWarning) {
  Rng rng(86);
  auto data = random_dataset(rng, 100, 4, 3);
  std::fill(data.columns[1].begin(), data.columns[1].end(), 2);
  int warnings = 0;
  set_warning_handler([&](std::string_view) { ++warnings; });
  const auto report = screen(data, 4, uniform_distances(data, EncodingKind::one_hot));
  set_warning_handler({});
  EXPECT_EQ(report.values[1], 0.0);
  EXPECT_TRUE(report.degenerate[1]);
  EXPECT_FALSE(report.degenerate[0]);
  EXPECT_GE(warnings, 1);
}

TEST(Screen, ConfigurationErrors) {
  Rng rng(87);
  auto data = random_dataset(rng, 50, 3, 3);
  auto d = uniform_distances(data, EncodingKind::one_hot);
  d[1] = nullptr;
  EXPECT_EQ(code_of([&] { screen(data, 3, d); }), ErrorCode::configuration);
  std::fill(data.columns[3].begin(), data.columns[3].end(), 0);
  EXPECT_EQ(code_of([&] { screen(data, 3, uniform_distances(data, EncodingKind::one_hot)); }),
            ErrorCode::degenerate_margin);
}

TEST(Screen, TiesOrderedById) {
  Rng rng(88);
  auto data = random_dataset(rng, 120, 6, 3);
  data.columns[4] = data.columns[1];
  data.columns[2] = data.columns[1];
  const auto report = screen(data, 6, uniform_distances(data, EncodingKind::semicircle));
  std::vector<std::size_t> tied;
  for (auto k : report.order)
    if (k == 1 || k == 2 || k == 4) tied.push_back(report.feature_ids[k]);
  EXPECT_EQ(tied, (std::vector<std::size_t>{1, 2, 4}));
  for (std::size_t k = 1; k < report.order.size(); ++k) {
    EXPECT_GE(report.values[report.order[k - 1]], report.values[report.order[k]]);
  }
}

TEST(Screen, UnbiasedEstimatorSelectable) {
  Rng rng(89);
  const auto data = random_dataset(rng, 60, 10, 3);
  const auto d = uniform_distances(data, EncodingKind::one_hot);
  const auto report = screen(data, 10, d, {Estimator::unbiased, 2});
  EXPECT_EQ(report.estimator, Estimator::unbiased);
  bool negative = false;
  for (double v : report.values) negative = negative || v < 0;
  EXPECT_TRUE(negative);
}

TEST(Select, StrictThreshold) {
  ScreeningReport r;
  r.feature_ids = {0, 1, 2, 3};
  r.values = {0.3, 0.1, 0.2, 0.2};
  EXPECT_TRUE(select(r, 0.31).empty());
  EXPECT_EQ(select(r, 1e-300), (std::vector<std::size_t>{0, 1, 2, 3}));
  EXPECT_EQ(select(r, 0.2), (std::vector<std::size_t>{0}));
  EXPECT_EQ(code_of([&] { select(r, 0.0); }), ErrorCode::invalid_threshold);
  EXPECT_EQ(code_of([&] { select(r, -1.0); }), ErrorCode::invalid_threshold);
}

TEST(ApplyChangepoint, SelectionMatchesThreshold) {
  const SettingSpec base = [] {
    SettingSpec s = benchmark_setting(1);
    s.S = 200;
    s.relevant = 10;
    s.n = 200;
    return s;
  }();
  const auto sim = sample_dataset(base, 5);
  auto report = screen(sim.data, sim.response, uniform_distances(sim.data, EncodingKind::semicircle));
  apply_changepoint(report);
  EXPECT_TRUE(report.has_threshold);
  EXPECT_EQ(report.selected, select(report, report.threshold));
}

TEST(ScreeningBound, DirectFormula) {
  const BoundParams p{0.1, 1e6, 100, 5, 5, 0.5};
  const double kappa = 4 / std::pow(0.5, 4) + 2 / std::pow(0.5, 5);
  const double raw = 2 * 25 * std::exp(std::log(100.0) - 6 * 1e6 * 0.01 / (4 * 0.1 * 25 * kappa + 3 * 625 * kappa * kappa));
  EXPECT_NEAR(kappa, 128.0, 1e-12);
  EXPECT_NEAR(std::exp(screening_bound_log(p)), raw, 1e-9 * raw);
  EXPECT_GT(raw, 4900.0);  // vacuous at this n, so the clamped value is 1
  EXPECT_EQ(screening_bound(p), 1.0);

  BoundParams large = p;
  large.n = 1e10;
  const double v = screening_bound(large);
  EXPECT_GT(v, 0.0);
  EXPECT_LT(v, 1e-4);
  EXPECT_NEAR(v, 5000 * std::exp(-6e8 / (4 * 0.1 * 25 * kappa + 3 * 625 * kappa * kappa)), 1e-12);
}

TEST(ScreeningBound, MonotoneAndClamped) {
  BoundParams p{0.5, 1e8, 1e3, 3, 4, 0.8};
  double previous = 2.0;
  for (double n = 1e3; n <= 1e12; n *= 10) {
    p.n = n;
    const double v = screening_bound(p);
    EXPECT_LE(v, previous);
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
    previous = v;
  }
  p.n = 1e9;
  previous = -1.0;
  for (double s = 1; s <= 1e9; s *= 10) {
    p.S = s;
    const double v = screening_bound(p);
    EXPECT_GE(v, previous);
    previous = v;
  }
  EXPECT_EQ(screening_bound({0.1, 10, 1e6, 5, 5, 0.5}), 1.0);
  EXPECT_EQ(code_of([] { screening_bound({1.5, 10, 10, 2, 2, 0.5}); }), ErrorCode::invalid_argument);
  EXPECT_EQ(code_of([] { screening_bound({0.1, 0, 10, 2, 2, 0.5}); }), ErrorCode::invalid_argument);
}

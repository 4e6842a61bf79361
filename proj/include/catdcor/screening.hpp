#pragma once

// Marginal dCor^2 screening of categorical features against a categorical
// response, with a change-point rule for the selection threshold.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <memory>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "catdcor/diagnostics.hpp"
#include "catdcor/encodings.hpp"
#include "catdcor/error.hpp"
#include "catdcor/estimators.hpp"
#include "catdcor/parallel.hpp"

namespace catdcor {

/// Column-major table of category codes; column c takes values in [0, levels[c]).
struct CategoricalDataset {
  std::vector<std::string> names;
  std::vector<std::vector<int>> columns;
  std::vector<int> levels;

  std::size_t rows() const noexcept { return columns.empty() ? 0 : columns.front().size(); }
  std::size_t cols() const noexcept { return columns.size(); }

  void validate() const {
    if (names.size() != columns.size() || levels.size() != columns.size()) {
      fail(ErrorCode::shape, "dataset names, columns and levels differ in length");
    }
    for (std::size_t c = 0; c < columns.size(); ++c) {
      if (columns[c].size() != rows()) fail(ErrorCode::shape, "dataset is not rectangular");
      for (std::size_t r = 0; r < columns[c].size(); ++r) {
        if (columns[c][r] < 0 || columns[c][r] >= levels[c]) {
          fail(ErrorCode::label, "column '" + names[c] + "' row " + std::to_string(r + 1) +
                                     " has a code outside its declared levels");
        }
      }
    }
  }

  std::size_t index_of(const std::string& name) const {
    for (std::size_t c = 0; c < names.size(); ++c) {
      if (names[c] == name) return c;
    }
    fail(ErrorCode::configuration, "no column named '" + name + "'");
  }
};

using DistancePtr = std::shared_ptr<const DistanceMatrix>;

struct ChangePoint {
  double threshold = 0.0;
  std::size_t index = 0;  // size of the upper piece
  bool low_confidence = false;
  double rss = 0.0;       // two-piece residual sum of squares
  double rss_single = 0.0;
};

struct ScreeningReport {
  Estimator estimator = Estimator::mle;
  std::vector<std::size_t> feature_ids;  // dataset column indices
  std::vector<std::string> names;
  std::vector<double> values;
  std::vector<bool> degenerate;
  std::vector<std::size_t> order;  // positions into values, descending
  bool has_threshold = false;
  double threshold = 0.0;
  std::size_t changepoint_index = 0;
  bool low_confidence = false;
  std::vector<std::size_t> selected;  // feature ids, ascending

  std::vector<double> sorted_values() const {
    std::vector<double> out;
    out.reserve(order.size());
    for (auto k : order) out.push_back(values[k]);
    return out;
  }
};

/// Exhaustive two-piece least-squares fit over positions 1..m of a descending
/// sequence. Each piece gets its own line and holds at least two points; the
/// threshold is the midpoint across the best break. Near-ties go to the
/// smallest break.
inline ChangePoint changepoint_threshold(const std::vector<double>& sorted) {
  const std::size_t m = sorted.size();
  if (m < 4) {
    fail(ErrorCode::insufficient_features,
         "change-point search needs at least 4 values, got " + std::to_string(m));
  }
  double mean = 0.0;
  for (double v : sorted) {
    if (!std::isfinite(v)) fail(ErrorCode::invalid_argument, "change-point input is not finite");
    mean += v;
  }
  mean /= static_cast<double>(m);

  // Prefix sums of x, y, x^2, xy, y^2 with y centred for conditioning.
  std::vector<double> sx(m + 1, 0.0), sy(m + 1, 0.0), sxx(m + 1, 0.0), sxy(m + 1, 0.0),
      syy(m + 1, 0.0);
  for (std::size_t k = 0; k < m; ++k) {
    const double x = static_cast<double>(k + 1);
    const double y = sorted[k] - mean;
    sx[k + 1] = sx[k] + x;
    sy[k + 1] = sy[k] + y;
    sxx[k + 1] = sxx[k] + x * x;
    sxy[k + 1] = sxy[k] + x * y;
    syy[k + 1] = syy[k] + y * y;
  }
  auto rss = [&](std::size_t lo, std::size_t hi) {  // positions [lo, hi)
    const double count = static_cast<double>(hi - lo);
    const double mx = (sx[hi] - sx[lo]) / count;
    const double my = (sy[hi] - sy[lo]) / count;
    const double cxx = (sxx[hi] - sxx[lo]) - count * mx * mx;
    const double cxy = (sxy[hi] - sxy[lo]) - count * mx * my;
    const double cyy = (syy[hi] - syy[lo]) - count * my * my;
    return std::max(0.0, cyy - cxy * cxy / cxx);
  };

  const double total = syy[m];
  std::vector<double> piecewise(m + 1, 0.0);
  double best = HUGE_VAL;
  for (std::size_t b = 2; b + 2 <= m; ++b) {
    piecewise[b] = rss(0, b) + rss(b, m);
    best = std::min(best, piecewise[b]);
  }
  ChangePoint out;
  const double tie = 1e-12 * total;
  for (std::size_t b = 2; b + 2 <= m; ++b) {
    if (piecewise[b] <= best + tie) {
      out.index = b;
      break;
    }
  }
  out.rss = piecewise[out.index];
  out.rss_single = rss(0, m);
  out.low_confidence = out.rss_single - out.rss <= 1e-8 * total;
  out.threshold = 0.5 * (sorted[out.index - 1] + sorted[out.index]);
  return out;
}

/// Feature ids with value strictly above c.
inline std::vector<std::size_t> select(const ScreeningReport& report, double c) {
  if (!(c > 0.0) || !std::isfinite(c)) {
    fail(ErrorCode::invalid_threshold, "selection threshold must be positive and finite");
  }
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < report.values.size(); ++k) {
    if (report.values[k] > c) out.push_back(report.feature_ids[k]);
  }
  std::sort(out.begin(), out.end());
  return out;
}

struct ScreenOptions {
  Estimator estimator = Estimator::mle;
  std::size_t workers = 0;  // 0: default_workers()
};

/// dCor^2 estimate of every non-response column against the response.
/// Constant features, or features whose distance variance vanishes, score 0
/// and are flagged.
inline ScreeningReport screen(const CategoricalDataset& data, std::size_t response,
                              const std::vector<DistancePtr>& distances,
                              const ScreenOptions& options = {}) {
  data.validate();
  if (response >= data.cols()) fail(ErrorCode::configuration, "response column out of range");
  if (distances.size() != data.cols()) {
    fail(ErrorCode::configuration, "need one distance matrix per column");
  }
  for (std::size_t c = 0; c < data.cols(); ++c) {
    if (!distances[c]) {
      fail(ErrorCode::configuration, "column '" + data.names[c] + "' has no encoding");
    }
    if (distances[c]->size() != data.levels[c]) {
      fail(ErrorCode::configuration, "encoding of column '" + data.names[c] +
                                         "' does not match its number of levels");
    }
  }
  if (options.estimator == Estimator::unbiased && data.rows() < 4) {
    fail(ErrorCode::insufficient_sample, "unbiased screening needs n >= 4");
  }

  ScreeningReport report;
  report.estimator = options.estimator;
  for (std::size_t c = 0; c < data.cols(); ++c) {
    if (c == response) continue;
    report.feature_ids.push_back(c);
    report.names.push_back(data.names[c]);
  }
  const std::size_t count = report.feature_ids.size();
  report.values.assign(count, 0.0);
  std::vector<unsigned char> flags(count, 0);

  const auto& y = data.columns[response];
  const DistanceMatrix& dy = *distances[response];
  {
    Eigen::VectorXd col = Eigen::VectorXd::Zero(dy.size());
    for (int code : y) col(code) += 1.0;
    const double vy = options.estimator == Estimator::mle ? dvar2_mle(col, dy)
                                                           : dvar2_unbiased(col, dy);
    if (vy <= detail::degenerate_variance) {
      fail(ErrorCode::degenerate_margin, "response column '" + data.names[response] +
                                             "' has zero distance variance");
    }
  }

  parallel_for(
      count,
      [&](std::size_t k) {
        const std::size_t c = report.feature_ids[k];
        const DistanceMatrix& dx = *distances[c];
        const JointTable t = JointTable::from_codes(data.columns[c], y, dx.size(), dy.size());
        try {
          report.values[k] = dcor2_estimate(options.estimator, t, dx, dy);
        } catch (const Error& e) {
          if (e.code() != ErrorCode::degenerate_margin) throw;
          flags[k] = 1;
        }
      },
      options.workers);

  report.degenerate.assign(count, false);
  std::size_t flagged = 0;
  for (std::size_t k = 0; k < count; ++k) {
    report.degenerate[k] = flags[k] != 0;
    flagged += flags[k];
  }
  if (flagged > 0) warn(std::to_string(flagged) + " degenerate features scored 0");

  report.order.resize(count);
  std::iota(report.order.begin(), report.order.end(), std::size_t{0});
  std::stable_sort(report.order.begin(), report.order.end(), [&](std::size_t a, std::size_t b) {
    if (report.values[a] != report.values[b]) return report.values[a] > report.values[b];
    return report.feature_ids[a] < report.feature_ids[b];
  });
  return report;
}

/// Fills threshold, change-point index and selected set from the change-point rule.
inline void apply_changepoint(ScreeningReport& report) {
  const ChangePoint cp = changepoint_threshold(report.sorted_values());
  report.has_threshold = true;
  report.threshold = cp.threshold;
  report.changepoint_index = cp.index;
  report.low_confidence = cp.low_confidence;
  report.selected.clear();
  for (std::size_t k = 0; k < report.values.size(); ++k) {
    if (report.values[k] > cp.threshold) report.selected.push_back(report.feature_ids[k]);
  }
  std::sort(report.selected.begin(), report.selected.end());
}

struct BoundParams {
  double epsilon = 0.0;
  double n = 0.0;
  double S = 0.0;
  double Imax = 0.0;
  double J = 0.0;
  double sigma2min = 0.0;
};

/// Natural log of 2 Imax J exp[log S - 6 n eps^2 / (4 eps Imax J k + 3 Imax^2 J^2 k^2)]
/// with k = 4 / sigma^8 + 2 / sigma^10, sigma = sqrt(sigma2min).
inline double screening_bound_log(const BoundParams& p) {
  for (double v : {p.epsilon, p.n, p.S, p.Imax, p.J, p.sigma2min}) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      fail(ErrorCode::invalid_argument, "bound parameters must be positive and finite");
    }
  }
  if (p.epsilon > 1.0) fail(ErrorCode::invalid_argument, "epsilon must not exceed 1");
  const double s2 = p.sigma2min;
  const double kappa = 4.0 / std::pow(s2, 4.0) + 2.0 / std::pow(s2, 5.0);
  const double ij = p.Imax * p.J;
  const double denom = 4.0 * p.epsilon * ij * kappa + 3.0 * ij * ij * kappa * kappa;
  return std::log(2.0 * ij) + std::log(p.S) - 6.0 * p.n * p.epsilon * p.epsilon / denom;
}

/// The exceedance bound clamped to [0, 1].
inline double screening_bound(const BoundParams& p) {
  return std::clamp(std::exp(std::min(screening_bound_log(p), 0.0)), 0.0, 1.0);
}

}  // namespace catdcor

#pragma once

// Sample estimates of dCov^2, dVar^2 and dCor^2 from a contingency table: the
// plug-in (MLE, a V-statistic) and the fourth-order U-statistic, plus the
// limiting n-scaled bias between them.

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <utility>

#include <Eigen/Dense>

#include "catdcor/encodings.hpp"
#include "catdcor/error.hpp"
#include "catdcor/measures.hpp"

namespace catdcor {

enum class Estimator { mle, unbiased };

constexpr std::string_view to_string(Estimator e) noexcept {
  return e == Estimator::mle ? "mle" : "unbiased";
}

/// Observed counts n_ij. Fractional counts are allowed so that limits can be
/// checked at exact plug-in tables n_ij = n * pi_ij.
class JointTable {
 public:
  explicit JointTable(Eigen::MatrixXd counts) : counts_(std::move(counts)) {
    if (counts_.rows() < 1 || counts_.cols() < 1) fail(ErrorCode::shape, "empty contingency table");
    if (!counts_.allFinite() || counts_.minCoeff() < 0.0) {
      fail(ErrorCode::invalid_argument, "counts must be finite and nonnegative");
    }
    total_ = counts_.sum();
    if (!(total_ > 0.0)) fail(ErrorCode::insufficient_sample, "contingency table is empty");
    row_ = counts_.rowwise().sum();
    col_ = counts_.colwise().sum().transpose();
  }

  /// Cross-tabulates paired category codes (0-based).
  static JointTable from_codes(std::span<const int> x, std::span<const int> y,
                               Eigen::Index levels_x, Eigen::Index levels_y) {
    if (x.size() != y.size()) fail(ErrorCode::shape, "paired samples differ in length");
    Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(levels_x, levels_y);
    for (std::size_t m = 0; m < x.size(); ++m) {
      if (x[m] < 0 || x[m] >= levels_x || y[m] < 0 || y[m] >= levels_y) {
        fail(ErrorCode::label, "category code out of range at row " + std::to_string(m));
      }
      counts(x[m], y[m]) += 1.0;
    }
    return JointTable(std::move(counts));
  }

  const Eigen::MatrixXd& counts() const noexcept { return counts_; }
  double total() const noexcept { return total_; }
  const Eigen::VectorXd& row_counts() const noexcept { return row_; }
  const Eigen::VectorXd& col_counts() const noexcept { return col_; }
  Eigen::Index rows() const noexcept { return counts_.rows(); }
  Eigen::Index cols() const noexcept { return counts_.cols(); }

  JointDistribution proportions() const { return JointDistribution(counts_ / total_); }

 private:
  Eigen::MatrixXd counts_;
  double total_ = 0.0;
  Eigen::VectorXd row_;
  Eigen::VectorXd col_;
};

struct TStats {
  double t1 = 0.0;
  double t2 = 0.0;
  double t3 = 0.0;
};

struct EstimatePair {
  double mle = 0.0;
  double unbiased = 0.0;
  double n = 0.0;
};

namespace detail {

inline double v_statistic(const TStats& t, double n) {
  return t.t1 / (n * n) - 2.0 * t.t2 / (n * n * n) + t.t3 / (n * n * n * n);
}

inline double u_statistic(const TStats& t, double n) {
  if (n < 4.0) {
    fail(ErrorCode::insufficient_sample,
         "the unbiased estimator needs n >= 4, got n = " + std::to_string(n));
  }
  return t.t1 / (n * (n - 3.0)) - 2.0 * t.t2 / (n * (n - 2.0) * (n - 3.0)) +
         t.t3 / (n * (n - 1.0) * (n - 2.0) * (n - 3.0));
}

inline void require_margin(const Eigen::VectorXd& counts, const DistanceMatrix& d) {
  if (counts.size() != d.size()) fail(ErrorCode::shape, "margin length does not match distances");
  if (counts.minCoeff() < 0.0 || !(counts.sum() > 0.0)) {
    fail(ErrorCode::invalid_argument, "margin counts must be nonnegative with positive total");
  }
}

}  // namespace detail

/// T1 = sum n_ij n_kl dx_ik dy_jl, T2 = sum n_ij n_k+ n_+l dx_ik dy_jl,
/// T3 = sum n_i+ n_+j n_k+ n_+l dx_ik dy_jl.
inline TStats t_stats(const JointTable& t, const DistanceMatrix& dx, const DistanceMatrix& dy) {
  detail::require_shape(t.rows(), t.cols(), dx, dy);
  const auto& n = t.counts();
  const Eigen::VectorXd row_dist = dx.matrix() * t.row_counts();
  const Eigen::VectorXd col_dist = dy.matrix() * t.col_counts();
  TStats out;
  out.t1 = detail::bilinear_form(n, n, dx.matrix(), dy.matrix());
  out.t2 = row_dist.dot(n * col_dist);
  out.t3 = t.row_counts().dot(row_dist) * t.col_counts().dot(col_dist);
  return out;
}

/// Single-margin analogues: T1 = sum n_i n_k d_ik^2,
/// T2 = sum_i n_i (sum_k n_k d_ik)^2, T3 = (sum n_i n_k d_ik)^2.
inline TStats margin_t_stats(const Eigen::VectorXd& counts, const DistanceMatrix& d) {
  detail::require_margin(counts, d);
  const Eigen::VectorXd dist = d.matrix() * counts;
  TStats out;
  out.t1 = counts.dot(d.matrix().cwiseAbs2() * counts);
  out.t2 = counts.dot(dist.cwiseAbs2());
  const double s = counts.dot(dist);
  out.t3 = s * s;
  return out;
}

/// Plug-in estimate: dcov2 evaluated at the sample proportions.
inline double dcov2_mle(const JointTable& t, const DistanceMatrix& dx, const DistanceMatrix& dy) {
  detail::require_shape(t.rows(), t.cols(), dx, dy);
  const Eigen::MatrixXd p = t.counts() / t.total();
  const Eigen::VectorXd r = t.row_counts() / t.total();
  const Eigen::VectorXd c = t.col_counts() / t.total();
  return detail::dcov2_centered(p - r * c.transpose(), dx, dy);
}

/// The same estimate written as a V-statistic in the T-stats.
inline double dcov2_vstatistic(const JointTable& t, const DistanceMatrix& dx,
                               const DistanceMatrix& dy) {
  return detail::v_statistic(t_stats(t, dx, dy), t.total());
}

/// Unbiased U-statistic; signed, needs n >= 4.
inline double dcov2_unbiased(const JointTable& t, const DistanceMatrix& dx,
                             const DistanceMatrix& dy) {
  return detail::u_statistic(t_stats(t, dx, dy), t.total());
}

inline EstimatePair dcov2_estimates(const JointTable& t, const DistanceMatrix& dx,
                                    const DistanceMatrix& dy) {
  return {dcov2_mle(t, dx, dy), dcov2_unbiased(t, dx, dy), t.total()};
}

inline double dvar2_mle(const Eigen::VectorXd& counts, const DistanceMatrix& d) {
  detail::require_margin(counts, d);
  return detail::nonnegative_or_fail(detail::dvar2_raw(counts / counts.sum(), d.matrix()),
                                     "sample distance variance");
}

inline double dvar2_unbiased(const Eigen::VectorXd& counts, const DistanceMatrix& d) {
  detail::require_margin(counts, d);
  return detail::u_statistic(margin_t_stats(counts, d), counts.sum());
}

/// MLE of dCor^2, within [0, 1].
inline double dcor2_mle(const JointTable& t, const DistanceMatrix& dx, const DistanceMatrix& dy) {
  const double cov = dcov2_mle(t, dx, dy);
  return detail::correlation_ratio(cov, dvar2_mle(t.row_counts(), dx),
                                  dvar2_mle(t.col_counts(), dy), true);
}

/// Ratio of the U-statistics; not clamped (may leave [0, 1]).
inline double dcor2_unbiased(const JointTable& t, const DistanceMatrix& dx,
                             const DistanceMatrix& dy) {
  const double cov = dcov2_unbiased(t, dx, dy);
  return detail::correlation_ratio(cov, dvar2_unbiased(t.row_counts(), dx),
                                  dvar2_unbiased(t.col_counts(), dy), false);
}

inline double dcor2_estimate(Estimator kind, const JointTable& t, const DistanceMatrix& dx,
                             const DistanceMatrix& dy) {
  return kind == Estimator::mle ? dcor2_mle(t, dx, dy) : dcor2_unbiased(t, dx, dy);
}

/// Limit of n (dcov2_mle - dcov2_unbiased):
/// sum (10 pi_ij pi_k+ pi_+l - 3 pi_ij pi_kl - 6 pi_i+ pi_+j pi_k+ pi_+l) dx_ik dy_jl.
/// Under independence this is E|X1 - X2| E|Y1 - Y2|.
inline double bias_limit(const JointDistribution& p, const DistanceMatrix& dx,
                         const DistanceMatrix& dy) {
  detail::require_shape(p.rows(), p.cols(), dx, dy);
  const auto& pi = p.probabilities();
  const Eigen::VectorXd row_dist = dx.matrix() * p.row_marginal();
  const Eigen::VectorXd col_dist = dy.matrix() * p.col_marginal();
  const double s1 = detail::bilinear_form(pi, pi, dx.matrix(), dy.matrix());
  const double s2 = row_dist.dot(pi * col_dist);
  const double s3 = p.row_marginal().dot(row_dist) * p.col_marginal().dot(col_dist);
  return 10.0 * s2 - 3.0 * s1 - 6.0 * s3;
}

/// Limit of n (dvar2_mle - dvar2_unbiased):
/// sum_{ik} p_i p_k [10 d_ik avg_i - 3 d_ik^2 - 6 avg_i avg_k].
inline double dvar2_bias_limit(const Eigen::VectorXd& marginal, const DistanceMatrix& d) {
  if (marginal.size() != d.size()) fail(ErrorCode::shape, "marginal length does not match distances");
  const Eigen::VectorXd avg = d.matrix() * marginal;
  const double s1 = marginal.dot(d.matrix().cwiseAbs2() * marginal);
  const double s2 = marginal.dot(avg.cwiseAbs2());
  const double s3 = marginal.dot(avg);
  return 10.0 * s2 - 3.0 * s1 - 6.0 * s3 * s3;
}

}  // namespace catdcor

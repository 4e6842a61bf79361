#pragma once

// Population squared distance covariance / variance / correlation for a known
// joint distribution of two categorical variables.

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include <Eigen/Dense>

#include "catdcor/diagnostics.hpp"
#include "catdcor/encodings.hpp"
#include "catdcor/error.hpp"

namespace catdcor {

/// I x J cell probabilities with their marginals.
class JointDistribution {
 public:
  explicit JointDistribution(Eigen::MatrixXd pi) : pi_(std::move(pi)) {
    if (pi_.rows() < 1 || pi_.cols() < 1) fail(ErrorCode::shape, "empty joint distribution");
    if (!pi_.allFinite()) fail(ErrorCode::invalid_argument, "joint probabilities must be finite");
    if (pi_.minCoeff() < 0.0) fail(ErrorCode::invalid_argument, "joint probabilities must be >= 0");
    const double total = pi_.sum();
    if (std::abs(total - 1.0) > 1e-12) {
      fail(ErrorCode::invalid_argument,
           "joint probabilities sum to " + std::to_string(total) + ", expected 1");
    }
    row_ = pi_.rowwise().sum();
    col_ = pi_.colwise().sum().transpose();
  }

  static JointDistribution independent(const Eigen::VectorXd& row, const Eigen::VectorXd& col) {
    return JointDistribution(row * col.transpose());
  }

  const Eigen::MatrixXd& probabilities() const noexcept { return pi_; }
  const Eigen::VectorXd& row_marginal() const noexcept { return row_; }
  const Eigen::VectorXd& col_marginal() const noexcept { return col_; }
  Eigen::Index rows() const noexcept { return pi_.rows(); }
  Eigen::Index cols() const noexcept { return pi_.cols(); }

  /// pi_ij - pi_i+ pi_+j
  Eigen::MatrixXd centered() const { return pi_ - row_ * col_.transpose(); }

 private:
  Eigen::MatrixXd pi_;
  Eigen::VectorXd row_;
  Eigen::VectorXd col_;
};

enum class Vectorization { row_wise, column_wise };

namespace detail {

inline void require_shape(Eigen::Index rows, Eigen::Index cols, const DistanceMatrix& dx,
                          const DistanceMatrix& dy) {
  if (dx.size() != rows || dy.size() != cols) {
    fail(ErrorCode::shape, "table is " + std::to_string(rows) + "x" + std::to_string(cols) +
                               " but distance matrices are " + std::to_string(dx.size()) +
                               "x" + std::to_string(dx.size()) + " and " +
                               std::to_string(dy.size()) + "x" + std::to_string(dy.size()));
  }
}

/// sum_{ijkl} a_ij b_kl dx_ik dy_jl = <a, Dx b Dy>, two bilinear contractions.
inline double bilinear_form(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                            const Eigen::MatrixXd& dx, const Eigen::MatrixXd& dy) {
  const Eigen::MatrixXd left = dx * b;  // I x J
  return (a.cwiseProduct(left * dy)).sum();
}

inline double nonnegative_or_fail(double value, const char* what) {
  if (value < -1e-9) {
    fail(ErrorCode::internal_consistency,
         std::string(what) + " evaluated to " + std::to_string(value) + " (< -1e-9)");
  }
  return std::max(value, 0.0);
}

inline double dcov2_centered(const Eigen::MatrixXd& delta, const DistanceMatrix& dx,
                             const DistanceMatrix& dy) {
  return nonnegative_or_fail(bilinear_form(delta, delta, dx.matrix(), dy.matrix()),
                             "squared distance covariance");
}

inline double dvar2_raw(const Eigen::VectorXd& marginal, const Eigen::MatrixXd& d) {
  const Eigen::VectorXd avg = d * marginal;
  double total = 0.0;
  for (Eigen::Index i = 0; i < d.rows(); ++i) {
    for (Eigen::Index k = 0; k < d.rows(); ++k) {
      total += marginal(i) * marginal(k) * (d(i, k) - avg(i)) * (d(i, k) - avg(k));
    }
  }
  return total;
}

}  // namespace detail

/// Squared distance covariance
/// sum_{ijkl} (pi_ij - pi_i+ pi_+j)(pi_kl - pi_k+ pi_+l) dx_ik dy_jl.
inline double dcov2(const JointDistribution& p, const DistanceMatrix& dx,
                    const DistanceMatrix& dy) {
  detail::require_shape(p.rows(), p.cols(), dx, dy);
  return detail::dcov2_centered(p.centered(), dx, dy);
}

/// Delta^T (Dx kron Dy) Delta, or the column-wise variant Delta^T (Dy kron Dx)
/// Delta. O(I^2 J^2); kept as an independent cross-check of dcov2().
inline double dcov2_kronecker(const JointDistribution& p, const DistanceMatrix& dx,
                              const DistanceMatrix& dy,
                              Vectorization order = Vectorization::row_wise) {
  detail::require_shape(p.rows(), p.cols(), dx, dy);
  const Eigen::MatrixXd delta = p.centered();
  const auto rows = delta.rows();
  const auto cols = delta.cols();
  const Eigen::MatrixXd& first = order == Vectorization::row_wise ? dx.matrix() : dy.matrix();
  const Eigen::MatrixXd& second = order == Vectorization::row_wise ? dy.matrix() : dx.matrix();
  const auto inner = second.rows();
  Eigen::VectorXd vec(rows * cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) {
      if (order == Vectorization::row_wise) {
        vec(i * cols + j) = delta(i, j);
      } else {
        vec(j * rows + i) = delta(i, j);
      }
    }
  }
  Eigen::MatrixXd kron(first.rows() * inner, first.cols() * inner);
  for (Eigen::Index a = 0; a < first.rows(); ++a) {
    for (Eigen::Index b = 0; b < first.cols(); ++b) {
      kron.block(a * inner, b * inner, inner, inner) = first(a, b) * second;
    }
  }
  return detail::nonnegative_or_fail(vec.dot(kron * vec), "Kronecker distance covariance");
}

/// Squared distance variance sum_{ik} p_i p_k (d_ik - avg_i)(d_ik - avg_k)
/// with avg_i = sum_k p_k d_ik.
inline double dvar2(const Eigen::VectorXd& marginal, const DistanceMatrix& d) {
  if (marginal.size() != d.size()) {
    fail(ErrorCode::shape, "marginal length does not match distance matrix");
  }
  if (std::abs(marginal.sum() - 1.0) > 1e-12 || marginal.minCoeff() < 0.0) {
    fail(ErrorCode::invalid_argument, "marginal must be a probability vector");
  }
  return detail::nonnegative_or_fail(detail::dvar2_raw(marginal, d.matrix()),
                                     "squared distance variance");
}

namespace detail {

inline constexpr double degenerate_variance = 1e-14;

inline double correlation_ratio(double cov, double var_x, double var_y, bool clamp) {
  if (var_x <= degenerate_variance || var_y <= degenerate_variance) {
    fail(ErrorCode::degenerate_margin,
         "distance variance is zero on " +
             std::string(var_x <= degenerate_variance ? "the first" : "the second") + " margin");
  }
  const double ratio = cov / std::sqrt(var_x * var_y);
  if (!clamp) return ratio;
  if (ratio > 1.0 || ratio < 0.0) {
    warn("distance correlation " + std::to_string(ratio) + " clamped to [0, 1]");
    return std::clamp(ratio, 0.0, 1.0);
  }
  return ratio;
}

}  // namespace detail

/// dcov2 / sqrt(dvar2_X dvar2_Y), clamped to [0, 1].
inline double dcor2(const JointDistribution& p, const DistanceMatrix& dx,
                    const DistanceMatrix& dy) {
  const double cov = dcov2(p, dx, dy);
  return detail::correlation_ratio(cov, dvar2(p.row_marginal(), dx), dvar2(p.col_marginal(), dy),
                                   true);
}

}  // namespace catdcor

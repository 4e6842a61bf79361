#pragma once

// Category encodings and the rescaled Euclidean distance matrices they induce.

#include <cmath>
#include <cstddef>
#include <numbers>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "catdcor/error.hpp"

namespace catdcor {

enum class EncodingKind { one_hot, ordinal, semicircle, custom };

constexpr std::string_view to_string(EncodingKind kind) noexcept {
  switch (kind) {
    case EncodingKind::one_hot: return "onehot";
    case EncodingKind::ordinal: return "ordinal";
    case EncodingKind::semicircle: return "semicircle";
    case EncodingKind::custom: return "custom";
  }
  return "custom";
}

inline std::optional<EncodingKind> parse_encoding_kind(std::string_view name) {
  if (name == "onehot" || name == "one-hot" || name == "one_hot") return EncodingKind::one_hot;
  if (name == "ordinal") return EncodingKind::ordinal;
  if (name == "semicircle") return EncodingKind::semicircle;
  if (name == "custom") return EncodingKind::custom;
  return std::nullopt;
}

using Point = std::vector<double>;

/// Ordered category labels together with one embedding point per category.
class Encoding {
 public:
  Encoding(std::vector<std::string> labels, std::vector<Point> points,
           EncodingKind kind = EncodingKind::custom)
      : labels_(std::move(labels)), points_(std::move(points)), kind_(kind) {
    if (labels_.size() < 2) {
      fail(ErrorCode::invalid_cardinality, "an encoding needs at least two categories");
    }
    if (labels_.size() != points_.size()) {
      fail(ErrorCode::shape, "encoding has " + std::to_string(labels_.size()) +
                                 " labels but " + std::to_string(points_.size()) + " points");
    }
    std::set<std::string_view> seen;
    for (const auto& label : labels_) {
      if (!seen.insert(label).second) {
        fail(ErrorCode::degenerate_encoding, "duplicate category label '" + label + "'");
      }
    }
    const auto dim = points_.front().size();
    if (dim == 0) fail(ErrorCode::shape, "encoding points must have positive dimension");
    for (const auto& point : points_) {
      if (point.size() != dim) {
        fail(ErrorCode::shape, "encoding points have inconsistent dimensions");
      }
      for (double v : point) {
        if (!std::isfinite(v)) fail(ErrorCode::invalid_argument, "encoding point is not finite");
      }
    }
    for (std::size_t i = 0; i < points_.size(); ++i) {
      for (std::size_t k = i + 1; k < points_.size(); ++k) {
        if (euclidean(points_[i], points_[k]) <= 0.0) {
          fail(ErrorCode::degenerate_encoding, "categories '" + labels_[i] + "' and '" +
                                                   labels_[k] + "' share the same point");
        }
      }
    }
  }

  const std::vector<std::string>& labels() const noexcept { return labels_; }
  const std::vector<Point>& points() const noexcept { return points_; }
  EncodingKind kind() const noexcept { return kind_; }
  std::size_t size() const noexcept { return labels_.size(); }
  std::size_t dimension() const noexcept { return points_.front().size(); }

  std::optional<std::size_t> index_of(std::string_view label) const {
    for (std::size_t i = 0; i < labels_.size(); ++i) {
      if (labels_[i] == label) return i;
    }
    return std::nullopt;
  }

  static double euclidean(const Point& a, const Point& b) {
    double sum = 0.0;
    for (std::size_t t = 0; t < a.size(); ++t) {
      const double diff = a[t] - b[t];
      sum += diff * diff;
    }
    return std::sqrt(sum);
  }

 private:
  std::vector<std::string> labels_;
  std::vector<Point> points_;
  EncodingKind kind_;
};

namespace detail {

inline std::vector<std::string> default_labels(std::size_t count) {
  std::vector<std::string> labels;
  labels.reserve(count);
  for (std::size_t i = 1; i <= count; ++i) labels.push_back(std::to_string(i));
  return labels;
}

inline void require_cardinality(std::size_t count) {
  if (count < 2) {
    fail(ErrorCode::invalid_cardinality,
         "need at least two categories, got " + std::to_string(count));
  }
}

}  // namespace detail

/// Standard basis vectors of dimension I.
inline Encoding one_hot(std::vector<std::string> labels) {
  detail::require_cardinality(labels.size());
  const auto count = labels.size();
  std::vector<Point> points(count, Point(count, 0.0));
  for (std::size_t i = 0; i < count; ++i) points[i][i] = 1.0;
  return Encoding(std::move(labels), std::move(points), EncodingKind::one_hot);
}

inline Encoding one_hot(std::size_t count) {
  detail::require_cardinality(count);
  return one_hot(detail::default_labels(count));
}

/// Equally spaced scalars 1, 2, ..., I in label order.
inline Encoding ordinal_equal(std::vector<std::string> labels) {
  detail::require_cardinality(labels.size());
  std::vector<Point> points;
  points.reserve(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    points.push_back({static_cast<double>(i + 1)});
  }
  return Encoding(std::move(labels), std::move(points), EncodingKind::ordinal);
}

inline Encoding ordinal_equal(std::size_t count) {
  detail::require_cardinality(count);
  return ordinal_equal(detail::default_labels(count));
}

/// Equally spaced points on the upper unit semicircle from (1,0) to (-1,0).
inline Encoding semicircle_equal(std::vector<std::string> labels) {
  detail::require_cardinality(labels.size());
  const auto count = labels.size();
  std::vector<Point> points;
  points.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const double angle =
        static_cast<double>(i) * std::numbers::pi / static_cast<double>(count - 1);
    points.push_back({std::cos(angle), std::sin(angle)});
  }
  return Encoding(std::move(labels), std::move(points), EncodingKind::semicircle);
}

inline Encoding semicircle_equal(std::size_t count) {
  detail::require_cardinality(count);
  return semicircle_equal(detail::default_labels(count));
}

inline Encoding custom(std::vector<std::string> labels, std::vector<Point> points) {
  return Encoding(std::move(labels), std::move(points), EncodingKind::custom);
}

inline Encoding make_encoding(EncodingKind kind, std::vector<std::string> labels) {
  switch (kind) {
    case EncodingKind::one_hot: return one_hot(std::move(labels));
    case EncodingKind::ordinal: return ordinal_equal(std::move(labels));
    case EncodingKind::semicircle: return semicircle_equal(std::move(labels));
    case EncodingKind::custom: break;
  }
  fail(ErrorCode::configuration, "custom encodings need explicit points");
}

inline Encoding make_encoding(EncodingKind kind, std::size_t count) {
  detail::require_cardinality(count);
  return make_encoding(kind, detail::default_labels(count));
}

/// Symmetric matrix of pairwise category distances.
///
/// Instances built by distance_matrix() follow the rescaled convention: the
/// raw Euclidean distances are divided by their maximum, so the largest entry
/// is exactly 1 and `scale()` records the divisor. scaled_by() produces
/// non-rescaled copies, which the scale-invariance checks rely on.
class DistanceMatrix {
 public:
  /// Validates a metric on I >= 2 points: symmetric, zero diagonal, positive
  /// off-diagonal, triangle inequality (relative slack 1e-12).
  explicit DistanceMatrix(Eigen::MatrixXd d, double scale = 1.0)
      : d_(std::move(d)), scale_(scale) {
    const auto n = d_.rows();
    if (n != d_.cols()) fail(ErrorCode::shape, "distance matrix must be square");
    if (n < 2) fail(ErrorCode::invalid_cardinality, "distance matrix needs at least two categories");
    if (!(scale_ > 0.0) || !std::isfinite(scale_)) {
      fail(ErrorCode::invalid_argument, "distance scale must be positive");
    }
    const double max_entry = d_.maxCoeff();
    const double slack = 1e-12 * max_entry;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (d_(i, i) != 0.0) fail(ErrorCode::shape, "distance matrix diagonal must be zero");
      for (Eigen::Index k = 0; k < n; ++k) {
        if (!std::isfinite(d_(i, k))) fail(ErrorCode::invalid_argument, "distance is not finite");
        if (d_(i, k) != d_(k, i)) fail(ErrorCode::shape, "distance matrix must be symmetric");
        if (i != k && !(d_(i, k) > 0.0)) {
          fail(ErrorCode::degenerate_encoding, "distinct categories must have positive distance");
        }
      }
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index m = 0; m < n; ++m) {
        for (Eigen::Index k = 0; k < n; ++k) {
          if (d_(i, k) > d_(i, m) + d_(m, k) + slack) {
            fail(ErrorCode::shape, "distance matrix violates the triangle inequality");
          }
        }
      }
    }
  }

  const Eigen::MatrixXd& matrix() const noexcept { return d_; }
  double operator()(Eigen::Index i, Eigen::Index k) const { return d_(i, k); }
  Eigen::Index size() const noexcept { return d_.rows(); }
  double scale() const noexcept { return scale_; }

  /// Probability-weighted row averages: avg_i = sum_k marginal_k d_ik.
  Eigen::VectorXd row_averages(const Eigen::VectorXd& marginal) const {
    if (marginal.size() != d_.rows()) {
      fail(ErrorCode::shape, "marginal length does not match distance matrix");
    }
    return d_ * marginal;
  }

  DistanceMatrix scaled_by(double factor) const {
    if (!(factor > 0.0)) fail(ErrorCode::invalid_argument, "scale factor must be positive");
    return DistanceMatrix(d_ * factor, scale_ / factor);
  }

  /// Restriction to a subset of categories (used when empty categories are
  /// dropped before building null spectra).
  DistanceMatrix restricted(const std::vector<Eigen::Index>& keep) const {
    const auto m = static_cast<Eigen::Index>(keep.size());
    Eigen::MatrixXd sub(m, m);
    for (Eigen::Index a = 0; a < m; ++a) {
      for (Eigen::Index b = 0; b < m; ++b) sub(a, b) = d_(keep[a], keep[b]);
    }
    return DistanceMatrix(std::move(sub), scale_);
  }

 private:
  Eigen::MatrixXd d_;
  double scale_;
};

/// Pairwise Euclidean distances divided by their maximum.
inline DistanceMatrix distance_matrix(const Encoding& encoding) {
  const auto n = static_cast<Eigen::Index>(encoding.size());
  Eigen::MatrixXd raw = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index k = i + 1; k < n; ++k) {
      const double dist = Encoding::euclidean(encoding.points()[i], encoding.points()[k]);
      raw(i, k) = dist;
      raw(k, i) = dist;
    }
  }
  const double largest = raw.maxCoeff();
  // x / x == 1 exactly in IEEE arithmetic, so the maximum entry becomes 1.
  raw /= largest;
  return DistanceMatrix(std::move(raw), largest);
}

}  // namespace catdcor

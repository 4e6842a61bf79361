#pragma once

// Null distributions of the dCor^2 estimators, permutation tests, and
// delta-method inference under fixed alternatives.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/distributions/normal.hpp>

#include "catdcor/chisq_mixture.hpp"
#include "catdcor/diagnostics.hpp"
#include "catdcor/encodings.hpp"
#include "catdcor/error.hpp"
#include "catdcor/estimators.hpp"
#include "catdcor/linalg.hpp"
#include "catdcor/measures.hpp"
#include "catdcor/parallel.hpp"
#include "catdcor/random.hpp"

namespace catdcor {

struct NullSpectrum {
  std::vector<double> lambda;  // X margin, |.| descending
  std::vector<double> mu;      // Y margin, |.| descending
  double B = 0.0;              // MLE bias shift
  double dvar_x = 0.0;         // sum lambda^2
  double dvar_y = 0.0;         // sum mu^2
};

namespace detail {

inline void require_positive_marginal(const Eigen::VectorXd& marginal, const DistanceMatrix& d) {
  if (marginal.size() != d.size()) fail(ErrorCode::shape, "marginal length does not match distances");
  for (Eigen::Index i = 0; i < marginal.size(); ++i) {
    if (!(marginal(i) > 0.0)) {
      fail(ErrorCode::degenerate_category,
           "category " + std::to_string(i) + " has zero probability; drop it first");
    }
  }
}

}  // namespace detail

/// Q_ik = (d_ik - avg_i) sqrt(p_i p_k) with avg_i = sum_k p_k d_ik.
inline Eigen::MatrixXd q_matrix(const Eigen::VectorXd& marginal, const DistanceMatrix& d) {
  detail::require_positive_marginal(marginal, d);
  const Eigen::VectorXd avg = d.matrix() * marginal;
  const Eigen::VectorXd root = marginal.cwiseSqrt();
  Eigen::MatrixXd q = d.matrix();
  q.colwise() -= avg;
  return root.asDiagonal() * q * root.asDiagonal();
}

/// Symmetric matrix with the same nonzero eigenvalues as q_matrix():
/// K = P^1/2 (d_ik - avg_i - avg_k + m) P^1/2, m = p' D p.
inline Eigen::MatrixXd spectral_surrogate(const Eigen::VectorXd& marginal, const DistanceMatrix& d) {
  detail::require_positive_marginal(marginal, d);
  const Eigen::VectorXd avg = d.matrix() * marginal;
  const double m = marginal.dot(avg);
  const Eigen::VectorXd root = marginal.cwiseSqrt();
  Eigen::MatrixXd k = d.matrix();
  k.colwise() -= avg;
  k.rowwise() -= avg.transpose();
  k.array() += m;
  return root.asDiagonal() * k * root.asDiagonal();
}

/// The I - 1 eigenvalues of Q left after dropping the structural zero, sorted
/// by decreasing magnitude.
inline std::vector<double> spectrum(const Eigen::VectorXd& marginal, const DistanceMatrix& d) {
  const SymmetricEigen eig = jacobi_eigen(spectral_surrogate(marginal, d));
  const auto n = eig.values.size();
  std::vector<double> values(eig.values.data(), eig.values.data() + n);
  std::stable_sort(values.begin(), values.end(),
                   [](double a, double b) { return std::abs(a) > std::abs(b); });
  const double radius = std::abs(values.front());
  if (std::abs(values.back()) > 1e-9 * radius) {
    fail(ErrorCode::internal_consistency,
         "null spectrum has no zero eigenvalue (smallest magnitude " +
             std::to_string(values.back()) + ")");
  }
  values.pop_back();
  return values;
}

namespace detail {

/// Sample marginal restricted to observed categories, warning about the rest.
inline std::pair<Eigen::VectorXd, DistanceMatrix> observed_margin(const Eigen::VectorXd& counts,
                                                                  const DistanceMatrix& d,
                                                                  const char* side) {
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < counts.size(); ++i) {
    if (counts(i) > 0.0) keep.push_back(i);
  }
  if (keep.size() < 2) {
    fail(ErrorCode::degenerate_margin,
         std::string("the ") + side + " variable takes fewer than two observed categories");
  }
  if (keep.size() < static_cast<std::size_t>(counts.size())) {
    warn(std::to_string(counts.size() - static_cast<Eigen::Index>(keep.size())) + " empty " + side +
         " categories dropped from the null spectrum");
  }
  Eigen::VectorXd marginal(static_cast<Eigen::Index>(keep.size()));
  for (std::size_t a = 0; a < keep.size(); ++a) marginal(static_cast<Eigen::Index>(a)) = counts(keep[a]);
  marginal /= marginal.sum();
  return {std::move(marginal), d.restricted(keep)};
}

inline double sum_squares(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return s;
}

}  // namespace detail

/// Null spectra and bias shift estimated from the sample marginals of a table.
inline NullSpectrum null_spectrum(const JointTable& t, const DistanceMatrix& dx,
                                  const DistanceMatrix& dy) {
  detail::require_shape(t.rows(), t.cols(), dx, dy);
  const auto [px, sub_x] = detail::observed_margin(t.row_counts(), dx, "row");
  const auto [py, sub_y] = detail::observed_margin(t.col_counts(), dy, "column");
  NullSpectrum out;
  out.lambda = spectrum(px, sub_x);
  out.mu = spectrum(py, sub_y);
  out.dvar_x = detail::sum_squares(out.lambda);
  out.dvar_y = detail::sum_squares(out.mu);
  out.B = px.dot(sub_x.matrix() * px) * py.dot(sub_y.matrix() * py);
  return out;
}

/// Normalised chi-squared weights lambda_i mu_j / sqrt(sum lambda^2 sum mu^2).
inline std::vector<double> null_weights(const NullSpectrum& s) {
  const double norm = std::sqrt(s.dvar_x * s.dvar_y);
  if (!(norm > detail::degenerate_variance)) {
    fail(ErrorCode::degenerate_margin, "null spectrum is degenerate");
  }
  std::vector<double> w;
  w.reserve(s.lambda.size() * s.mu.size());
  for (double l : s.lambda) {
    for (double m : s.mu) w.push_back(l * m / norm);
  }
  return w;
}

struct TestResult {
  Estimator estimator = Estimator::mle;
  double estimate = 0.0;   // dCor^2 estimate
  double statistic = 0.0;  // n * estimate
  double pvalue = 1.0;
  TailMethod method = TailMethod::imhof;
  double error_estimate = 0.0;
  std::size_t replicates = 0;  // permutation tests only
};

/// Analytic test of independence from the weighted chi-squared limit law.
inline TestResult analytic_test(Estimator kind, const JointTable& t, const DistanceMatrix& dx,
                                const DistanceMatrix& dy, const NullSpectrum& s) {
  const double n = t.total();
  TestResult out;
  out.estimator = kind;
  out.estimate = dcor2_estimate(kind, t, dx, dy);
  out.statistic = n * out.estimate;
  const auto weights = null_weights(s);
  double x = out.statistic;
  if (kind == Estimator::mle) x -= s.B / std::sqrt(s.dvar_x * s.dvar_y);
  const TailProbability tail = weighted_chisq_sf(weights, x);
  out.pvalue = tail.value;
  out.method = tail.method;
  out.error_estimate = tail.error_estimate;
  if (tail.fallback) warn("Imhof integration did not converge; moment-matching p-value used");
  return out;
}

inline TestResult analytic_test(Estimator kind, const JointTable& t, const DistanceMatrix& dx,
                                const DistanceMatrix& dy) {
  if (kind == Estimator::unbiased && t.total() < 4.0) {
    fail(ErrorCode::insufficient_sample, "the unbiased test needs n >= 4");
  }
  return analytic_test(kind, t, dx, dy, null_spectrum(t, dx, dy));
}

/// P-value of n * dcor2_unbiased under independence.
inline double null_pvalue_unbiased(const JointTable& t, const DistanceMatrix& dx,
                                   const DistanceMatrix& dy) {
  return analytic_test(Estimator::unbiased, t, dx, dy).pvalue;
}

/// P-value of n * dcor2_mle under independence, including the bias shift B.
inline double null_pvalue_mle(const JointTable& t, const DistanceMatrix& dx,
                              const DistanceMatrix& dy) {
  if (t.total() < 4.0) fail(ErrorCode::insufficient_sample, "the test needs n >= 4");
  return analytic_test(Estimator::mle, t, dx, dy).pvalue;
}

struct PermutationOptions {
  std::size_t replicates = 999;
  std::uint64_t seed = 0;
  std::size_t workers = 0;  // 0: default_workers()
};

/// Permutation test that shuffles the y labels. Replicate r draws from the
/// stream (seed, r), so the p-value does not depend on the worker count.
inline TestResult permutation_test(std::span<const int> x, std::span<const int> y,
                                   const DistanceMatrix& dx, const DistanceMatrix& dy,
                                   Estimator kind, const PermutationOptions& options = {}) {
  if (options.replicates < 99) {
    fail(ErrorCode::insufficient_replicates,
         "permutation test needs at least 99 replicates, got " +
             std::to_string(options.replicates));
  }
  const JointTable observed = JointTable::from_codes(x, y, dx.size(), dy.size());
  TestResult out;
  out.estimator = kind;
  out.method = TailMethod::permutation;
  out.replicates = options.replicates;
  out.estimate = dcor2_estimate(kind, observed, dx, dy);
  out.statistic = observed.total() * out.estimate;

  // Margins are permutation invariant, so only the covariance part changes.
  auto covariance = [&](const JointTable& t) {
    return kind == Estimator::mle ? dcov2_mle(t, dx, dy) : dcov2_unbiased(t, dx, dy);
  };
  const double denom =
      kind == Estimator::mle
          ? std::sqrt(dvar2_mle(observed.row_counts(), dx) * dvar2_mle(observed.col_counts(), dy))
          : std::sqrt(dvar2_unbiased(observed.row_counts(), dx) *
                      dvar2_unbiased(observed.col_counts(), dy));
  const double reference = covariance(observed) / denom;
  constexpr double tie_tolerance = 1e-12;

  std::vector<unsigned char> exceeds(options.replicates, 0);
  parallel_for(
      options.replicates,
      [&](std::size_t r) {
        Rng rng(options.seed, {static_cast<std::uint64_t>(r)});
        std::vector<int> shuffled(y.begin(), y.end());
        rng.shuffle(std::span<int>(shuffled));
        const JointTable t = JointTable::from_codes(x, shuffled, dx.size(), dy.size());
        exceeds[r] = covariance(t) / denom >= reference - tie_tolerance ? 1 : 0;
      },
      options.workers);
  std::size_t count = 0;
  for (unsigned char e : exceeds) count += e;
  out.pvalue = static_cast<double>(count + 1) / static_cast<double>(options.replicates + 1);
  return out;
}

struct AltInference {
  Eigen::MatrixXd dprime;    // I x J, sum_kl (pi_kl - pi_k+ pi_+l)(dx_ik dy_jl - dx_ik avgY_l - dy_jl avgX_k)
  Eigen::MatrixXd sigma;     // IJ x IJ multinomial covariance of vec(sqrt(n) pi_hat), row-wise
  Eigen::MatrixXd gradient;  // I x J, d dCor^2 / d pi_ij
  double asymp_var = 0.0;    // gradient' sigma gradient
  double dprime_var = 0.0;   // vec(D')' sigma vec(D') / (dvarX dvarY)
};

/// Gradient of dvar2 with respect to the marginal probabilities.
inline Eigen::VectorXd dvar2_gradient(const Eigen::VectorXd& p, const DistanceMatrix& d) {
  const Eigen::MatrixXd& dm = d.matrix();
  const Eigen::VectorXd avg = dm * p;
  const double m = p.dot(avg);
  return 2.0 * (dm.cwiseAbs2() * p) - 2.0 * avg.cwiseAbs2() -
         4.0 * (dm * p.cwiseProduct(avg)) + 4.0 * m * avg;
}

/// Row-wise multinomial covariance diag(v) - v v' with v = vec(pi).
inline Eigen::MatrixXd multinomial_covariance(const Eigen::MatrixXd& pi) {
  const auto rows = pi.rows();
  const auto cols = pi.cols();
  Eigen::VectorXd v(rows * cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) v(i * cols + j) = pi(i, j);
  }
  Eigen::MatrixXd sigma = -v * v.transpose();
  sigma.diagonal() += v;
  return sigma;
}

/// Delta-method inference for dCor^2 at a fixed joint distribution.
///
/// asymp_var is the variance of the limiting normal law of
/// sqrt(n) (dcor2 estimate - dcor2), from the complete gradient of dCor^2
/// (covariance and both variance terms). dprime_var keeps the quadratic form
/// in D' alone for comparison.
inline AltInference alt_inference(const JointDistribution& p, const DistanceMatrix& dx,
                                  const DistanceMatrix& dy) {
  detail::require_shape(p.rows(), p.cols(), dx, dy);
  const Eigen::VectorXd& r = p.row_marginal();
  const Eigen::VectorXd& c = p.col_marginal();
  const double vx = detail::dvar2_raw(r, dx.matrix());
  const double vy = detail::dvar2_raw(c, dy.matrix());
  const double cov = dcov2(p, dx, dy);
  const double cor = detail::correlation_ratio(cov, vx, vy, false);

  const Eigen::MatrixXd g = dx.matrix() * p.centered() * dy.matrix();
  AltInference out;
  out.dprime = g;
  out.dprime.colwise() -= g * c;
  out.dprime.rowwise() -= r.transpose() * g;
  out.sigma = multinomial_covariance(p.probabilities());

  const Eigen::VectorXd grad_x = dvar2_gradient(r, dx);
  const Eigen::VectorXd grad_y = dvar2_gradient(c, dy);
  const double root = std::sqrt(vx * vy);
  out.gradient = 2.0 * out.dprime / root;
  out.gradient.colwise() -= 0.5 * cor / vx * grad_x;
  out.gradient.rowwise() -= (0.5 * cor / vy * grad_y).transpose();

  auto quadratic = [&](const Eigen::MatrixXd& m) {
    Eigen::VectorXd v(m.size());
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      for (Eigen::Index j = 0; j < m.cols(); ++j) v(i * m.cols() + j) = m(i, j);
    }
    return v.dot(out.sigma * v);
  };
  out.asymp_var = std::max(0.0, quadratic(out.gradient));
  out.dprime_var = std::max(0.0, quadratic(out.dprime)) / (vx * vy);
  return out;
}

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  double estimate = 0.0;
  double std_error = 0.0;
};

/// Wald interval estimate +- z sqrt(asymp_var(pi_hat) / n); the MLE interval
/// is intersected with [0, 1].
inline Interval confidence_interval(const JointTable& t, const DistanceMatrix& dx,
                                    const DistanceMatrix& dy, double level,
                                    Estimator kind = Estimator::mle) {
  if (!(level > 0.0 && level < 1.0)) {
    fail(ErrorCode::invalid_argument, "confidence level must lie in (0, 1)");
  }
  if (t.total() < 4.0) fail(ErrorCode::insufficient_sample, "confidence interval needs n >= 4");
  const AltInference alt = alt_inference(t.proportions(), dx, dy);
  const double z = boost::math::quantile(boost::math::normal(), 0.5 * (1.0 + level));
  Interval out;
  out.estimate = dcor2_estimate(kind, t, dx, dy);
  out.std_error = std::sqrt(alt.asymp_var / t.total());
  out.lo = out.estimate - z * out.std_error;
  out.hi = out.estimate + z * out.std_error;
  if (kind == Estimator::mle) {
    out.lo = std::max(out.lo, 0.0);
    out.hi = std::min(out.hi, 1.0);
  }
  return out;
}

}  // namespace catdcor

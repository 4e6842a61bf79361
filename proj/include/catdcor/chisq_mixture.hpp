#pragma once

// Upper tail of a weighted sum of centred chi-squared(1) variables,
//   P( sum_k w_k (Z_k^2 - 1) > x ),
// by Imhof's characteristic-function inversion with cycle-wise summation of
// the oscillatory tail and Wynn epsilon extrapolation. A four-cumulant
// moment-matching approximation is used when the integral fails to converge.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <string_view>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/non_central_chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "catdcor/error.hpp"

namespace catdcor {

enum class TailMethod { imhof, moment_match, permutation };

constexpr std::string_view to_string(TailMethod m) noexcept {
  switch (m) {
    case TailMethod::imhof: return "imhof";
    case TailMethod::moment_match: return "moment-match";
    case TailMethod::permutation: return "permutation";
  }
  return "imhof";
}

struct TailProbability {
  double value = 0.0;
  TailMethod method = TailMethod::imhof;
  double error_estimate = 0.0;  // on the probability scale
  bool fallback = false;        // true when Imhof failed and moment matching answered
};

struct ImhofOptions {
  double abs_tolerance = 1e-8;     // target accuracy of the probability
  double envelope_cutoff = 1e-12;  // stop once the integrand envelope is below this
  int max_cycles = 4000;
  int max_panel_depth = 30;
};

namespace detail {

/// Wynn's epsilon algorithm over a growing sequence of partial sums.
class WynnEpsilon {
 public:
  /// Adds a partial sum and returns the current extrapolated limit.
  double push(double partial) {
    std::vector<double> next;
    next.reserve(previous_.size() + 1);
    next.push_back(partial);
    // next[k] = eps_{k}^{(n)} built from the previous anti-diagonal.
    for (std::size_t k = 0; k < previous_.size(); ++k) {
      const double before = k == 0 ? 0.0 : previous_[k - 1];
      const double diff = next[k] - previous_[k];
      if (diff == 0.0 || !std::isfinite(diff)) break;
      next.push_back(before + 1.0 / diff);
    }
    previous_ = std::move(next);
    // Even columns hold the extrapolants; take the deepest one available.
    const std::size_t last_even = (previous_.size() - 1) & ~std::size_t{1};
    return previous_[last_even];
  }

 private:
  std::vector<double> previous_;
};

struct ImhofIntegrand {
  std::vector<double> weights;  // normalised so that max |w| = 1
  double threshold = 0.0;       // c in P(sum w Z^2 > c)

  double operator()(double u) const {
    if (u <= 0.0) {
      double sum = 0.0;
      for (double w : weights) sum += w;
      return 0.5 * (sum - threshold);
    }
    double phase = -0.5 * threshold * u;
    double log_rho = 0.0;
    for (double w : weights) {
      const double wu = w * u;
      phase += 0.5 * std::atan(wu);
      log_rho += 0.25 * std::log1p(wu * wu);
    }
    return std::sin(phase) * std::exp(-log_rho) / u;
  }

  double envelope(double u) const {
    double log_rho = 0.0;
    for (double w : weights) log_rho += 0.25 * std::log1p(w * w * u * u);
    return std::exp(-log_rho) / u;
  }

  /// Bound on the integral of |f| over [u, infinity).
  double tail_bound(double u) const {
    double log_prod = 0.0;
    for (double w : weights) log_prod += 0.5 * std::log(std::abs(w));
    const double m = static_cast<double>(weights.size());
    return 2.0 / m * std::exp(-0.5 * m * std::log(u) - log_prod);
  }
};

struct PanelResult {
  double value = 0.0;
  double error = 0.0;
  bool ok = true;
};

template <class F>
PanelResult adaptive_panel(const F& f, double a, double b, double tolerance, int depth) {
  using Rule = boost::math::quadrature::gauss_kronrod<double, 21>;
  double error = 0.0;
  const double value = Rule::integrate(f, a, b, 0, 0.0, &error);
  if (error <= tolerance || depth <= 0) {
    return {value, error, error <= tolerance};
  }
  const double mid = 0.5 * (a + b);
  const PanelResult left = adaptive_panel(f, a, mid, 0.5 * tolerance, depth - 1);
  const PanelResult right = adaptive_panel(f, mid, b, 0.5 * tolerance, depth - 1);
  return {left.value + right.value, left.error + right.error, left.ok && right.ok};
}

/// Four-cumulant (Liu, Tang & Zhang) approximation of P(sum w Z^2 > c).
inline double moment_match_upper(std::span<const double> w, double c) {
  double c1 = 0.0, c2 = 0.0, c3 = 0.0, c4 = 0.0;
  for (double v : w) {
    c1 += v;
    c2 += v * v;
    c3 += v * v * v;
    c4 += v * v * v * v;
  }
  const double s1 = c3 / std::pow(c2, 1.5);
  const double s2 = c4 / (c2 * c2);
  const double mean = c1;
  const double sd = std::sqrt(2.0 * c2);
  const double standardized = (c - mean) / sd;
  if (std::abs(s1) < 1e-12) {
    return boost::math::cdf(boost::math::complement(boost::math::normal(), standardized));
  }
  if (s1 < 0.0) {
    // Reflect a negatively skewed form: P(Q > c) = 1 - P(-Q > -c).
    std::vector<double> neg(w.begin(), w.end());
    for (double& v : neg) v = -v;
    return 1.0 - moment_match_upper(neg, -c);
  }
  double a = 0.0, delta = 0.0, dof = 0.0;
  if (s1 * s1 > s2) {
    a = 1.0 / (s1 - std::sqrt(s1 * s1 - s2));
    delta = s1 * a * a * a - a * a;
    dof = a * a - 2.0 * delta;
  } else {
    a = 1.0 / s1;
    delta = 0.0;
    dof = 1.0 / (s1 * s1);
  }
  const double chi_mean = dof + delta;
  const double chi_sd = std::sqrt(2.0) * a;
  const double q = standardized * chi_sd + chi_mean;
  if (q <= 0.0) return 1.0;
  if (delta > 1e-12) {
    return boost::math::cdf(
        boost::math::complement(boost::math::non_central_chi_squared(dof, delta), q));
  }
  return boost::math::cdf(boost::math::complement(boost::math::chi_squared(dof), q));
}

}  // namespace detail

/// Moment-matching approximation of P(sum w_k (Z_k^2 - 1) > x).
inline double weighted_chisq_sf_moment_match(std::span<const double> weights, double x) {
  double sum = 0.0;
  bool any = false;
  for (double w : weights) {
    sum += w;
    any = any || w != 0.0;
  }
  if (!any) fail(ErrorCode::degenerate_distribution, "all chi-squared weights are zero");
  return std::clamp(detail::moment_match_upper(weights, x + sum), 0.0, 1.0);
}

/// P( sum_k w_k (Z_k^2 - 1) > x ) for independent standard normals Z_k.
/// Weights may have either sign.
inline TailProbability weighted_chisq_sf(std::span<const double> weights, double x,
                                         const ImhofOptions& options = {}) {
  double largest = 0.0;
  for (double w : weights) largest = std::max(largest, std::abs(w));
  if (!(largest > 0.0) || !std::isfinite(largest)) {
    fail(ErrorCode::degenerate_distribution, "weighted chi-squared needs a nonzero weight");
  }
  if (!std::isfinite(x)) return {x > 0 ? 0.0 : 1.0, TailMethod::imhof, 0.0, false};

  // Rescale so max |w| = 1; weights negligible at double precision are dropped.
  detail::ImhofIntegrand f;
  double sum = 0.0;
  bool any_positive = false, any_negative = false;
  for (double w : weights) {
    const double scaled = w / largest;
    if (std::abs(scaled) < 1e-14) continue;
    f.weights.push_back(scaled);
    sum += scaled;
    any_positive = any_positive || scaled > 0.0;
    any_negative = any_negative || scaled < 0.0;
  }
  f.threshold = x / largest + sum;
  if (!any_negative && f.threshold <= 0.0) return {1.0, TailMethod::imhof, 0.0, false};
  if (!any_positive && f.threshold >= 0.0) return {0.0, TailMethod::imhof, 0.0, false};

  // Integral target accuracy; the probability is 1/2 + I / pi.
  const double tol = options.abs_tolerance * std::numbers::pi * 0.1;
  const double half_period =
      f.threshold != 0.0 ? 2.0 * std::numbers::pi / std::abs(f.threshold) : HUGE_VAL;

  double integral = 0.0;
  double error = 0.0;
  bool ok = true;
  double a = 0.0;
  double b = std::min(1.0, half_period);
  bool done = false;

  // Geometric panels up to one half-period of the asymptotic oscillation.
  while (!done) {
    const auto panel = detail::adaptive_panel(f, a, b, tol / 8.0, options.max_panel_depth);
    integral += panel.value;
    error += panel.error;
    ok = ok && panel.ok;
    a = b;
    if (f.tail_bound(a) < tol / 4.0 || f.envelope(a) < options.envelope_cutoff) {
      done = true;
      error += f.tail_bound(a);
      break;
    }
    if (2.0 * a > half_period) break;
    b = 2.0 * a;
  }

  // Half-period cycles with Wynn extrapolation of the partial sums.
  if (!done) {
    detail::WynnEpsilon wynn;
    double partial = integral;
    double last = wynn.push(partial);
    int stable = 0;
    for (int cycle = 1; cycle <= options.max_cycles; ++cycle) {
      const double lo = a;
      const double hi = a + half_period;
      const auto panel = detail::adaptive_panel(f, lo, hi, tol / 16.0, options.max_panel_depth);
      partial += panel.value;
      error += panel.error;
      ok = ok && panel.ok;
      a = hi;
      const double extrapolated = wynn.push(partial);
      if (f.tail_bound(a) < tol / 4.0 || f.envelope(a) < options.envelope_cutoff) {
        integral = partial;
        error += f.tail_bound(a);
        done = true;
        break;
      }
      const double change = std::abs(extrapolated - last);
      last = extrapolated;
      stable = (cycle >= 4 && change < tol / 4.0) ? stable + 1 : 0;
      if (stable >= 3) {
        integral = extrapolated;
        error += change;
        done = true;
        break;
      }
    }
  }

  if (!done || !ok || !std::isfinite(integral)) {
    return {weighted_chisq_sf_moment_match(weights, x), TailMethod::moment_match, HUGE_VAL, true};
  }
  const double p = 0.5 + integral / std::numbers::pi;
  return {std::clamp(p, 0.0, 1.0), TailMethod::imhof, error / std::numbers::pi, false};
}

}  // namespace catdcor

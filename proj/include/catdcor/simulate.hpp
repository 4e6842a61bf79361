#pragma once

// Benchmark settings for screening: joint tables with a few perturbed cells,
// seeded dataset generation, and ROC/AUC scoring against the known truth.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <numeric>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "catdcor/encodings.hpp"
#include "catdcor/error.hpp"
#include "catdcor/estimators.hpp"
#include "catdcor/measures.hpp"
#include "catdcor/parallel.hpp"
#include "catdcor/random.hpp"
#include "catdcor/screening.hpp"

namespace catdcor {

struct SettingSpec {
  int id = 0;
  std::vector<double> p;  // feature marginal
  std::vector<double> q;  // response marginal
  double delta = 0.0;
  std::vector<std::pair<int, int>> cells;  // 0-based (i, j) cells raised by delta
  std::size_t S = 1000;
  std::size_t relevant = 50;
  std::size_t n = 100;

  std::size_t I() const noexcept { return p.size(); }
  std::size_t J() const noexcept { return q.size(); }

  void validate() const {
    auto check_marginal = [](const std::vector<double>& m, const char* what) {
      if (m.size() < 2) fail(ErrorCode::invalid_cardinality, std::string(what) + " needs >= 2 categories");
      double total = 0.0;
      for (double v : m) {
        if (!(v > 0.0)) fail(ErrorCode::invalid_argument, std::string(what) + " must be positive");
        total += v;
      }
      if (std::abs(total - 1.0) > 1e-12) {
        fail(ErrorCode::invalid_argument, std::string(what) + " must sum to 1");
      }
    };
    check_marginal(p, "feature marginal");
    check_marginal(q, "response marginal");
    if (!(delta > 0.0) && !cells.empty()) fail(ErrorCode::invalid_argument, "delta must be positive");
    for (const auto& [i, j] : cells) {
      if (i < 0 || j < 0 || static_cast<std::size_t>(i) >= I() || static_cast<std::size_t>(j) >= J()) {
        fail(ErrorCode::invalid_argument, "perturbed cell out of range");
      }
    }
    if (relevant > S) fail(ErrorCode::invalid_argument, "more relevant features than features");
    if (n < 1) fail(ErrorCode::insufficient_sample, "sample size must be positive");
  }
};

/// The six benchmark settings (S = 1000, 50 relevant, n = 100 by default).
inline SettingSpec benchmark_setting(int id) {
  const std::vector<double> five{0.5, 0.3, 0.1, 0.05, 0.05};
  const std::vector<double> eight{0.5, 0.15, 0.1, 0.1, 0.05, 0.05, 0.03, 0.02};
  std::vector<std::pair<int, int>> one_based;
  SettingSpec spec;
  spec.id = id;
  switch (id) {
    case 1: one_based = {{1, 1}, {2, 2}, {3, 3}, {4, 4}, {5, 5}}; break;
    case 2: one_based = {{1, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 4}, {5, 5}}; break;
    case 3: one_based = {{1, 1}, {2, 2}, {3, 3}, {4, 3}, {2, 4}, {1, 5}}; break;
    case 4: one_based = {{1, 1}, {2, 2}, {3, 3}, {4, 4}, {5, 5}, {6, 6}, {7, 7}, {8, 8}}; break;
    case 5:
      one_based = {{1, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 5}, {4, 6}, {5, 7}, {6, 7}, {7, 7}, {8, 8}};
      break;
    case 6:
      one_based = {{2, 1}, {3, 1}, {4, 2}, {5, 3}, {6, 4}, {6, 5}, {5, 6}, {4, 7}, {3, 8}, {2, 8}};
      break;
    default: fail(ErrorCode::invalid_argument, "setting id must be 1..6, got " + std::to_string(id));
  }
  spec.p = id <= 3 ? five : eight;
  spec.q = spec.p;
  spec.delta = id <= 3 ? 0.04 : 0.025;
  for (const auto& [i, j] : one_based) spec.cells.emplace_back(i - 1, j - 1);
  return spec;
}

enum class JointConstruction { renormalized, ipf_complement, rank_one };

constexpr std::string_view to_string(JointConstruction c) noexcept {
  switch (c) {
    case JointConstruction::renormalized: return "renormalized";
    case JointConstruction::ipf_complement: return "ipf-complement";
    case JointConstruction::rank_one: return "rank-one";
  }
  return "renormalized";
}

namespace detail {

inline Eigen::MatrixXd listed_excess(const SettingSpec& spec) {
  Eigen::MatrixXd listed = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(spec.I()),
                                                 static_cast<Eigen::Index>(spec.J()));
  for (const auto& [i, j] : spec.cells) listed(i, j) += spec.delta;
  return listed;
}

inline Eigen::MatrixXd independent_table(const SettingSpec& spec) {
  const Eigen::Map<const Eigen::VectorXd> p(spec.p.data(), static_cast<Eigen::Index>(spec.I()));
  const Eigen::Map<const Eigen::VectorXd> q(spec.q.data(), static_cast<Eigen::Index>(spec.J()));
  return p * q.transpose();
}

inline JointDistribution nonnegative_joint(Eigen::MatrixXd pi, std::string_view how) {
  if (pi.minCoeff() < 0.0) {
    fail(ErrorCode::infeasible_setting, std::string(how) + " construction gives a negative cell (" +
                                            std::to_string(pi.minCoeff()) + ")");
  }
  pi /= pi.sum();
  return JointDistribution(std::move(pi));
}

/// Nonnegative E on the complement of the listed cells with the listed
/// row/column excesses as margins, by iterative proportional fitting.
inline Eigen::MatrixXd ipf_correction(const Eigen::MatrixXd& start, const Eigen::MatrixXd& listed) {
  const Eigen::VectorXd rows = listed.rowwise().sum();
  const Eigen::VectorXd cols = listed.colwise().sum().transpose();
  Eigen::MatrixXd e = start;
  for (Eigen::Index i = 0; i < e.rows(); ++i) {
    for (Eigen::Index j = 0; j < e.cols(); ++j) {
      if (listed(i, j) != 0.0) e(i, j) = 0.0;
    }
  }
  auto scale_rows = [&](Eigen::MatrixXd& m, const Eigen::VectorXd& target) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      const double s = m.row(i).sum();
      if (s > 0.0) {
        m.row(i) *= target(i) / s;
      } else if (target(i) > 0.0) {
        fail(ErrorCode::infeasible_setting, "no free cell available to absorb a row excess");
      }
    }
  };
  for (int iter = 0; iter < 100000; ++iter) {
    scale_rows(e, rows);
    Eigen::MatrixXd t = e.transpose();
    scale_rows(t, cols);
    e = t.transpose();
    if ((e.rowwise().sum() - rows).cwiseAbs().maxCoeff() < 1e-12) return e;
  }
  fail(ErrorCode::infeasible_setting, "proportional fitting of the correction did not converge");
}

}  // namespace detail

/// Joint table of a setting.
///
/// renormalized: (p q' + L) / (1 + sum L), with L = delta on the listed cells.
/// ipf_complement: p q' + L - E with E fitted on the unlisted cells so the
/// margins stay p, q. rank_one: p q' + L - r c' / sum L, with r, c the margins
/// of L. The last two fail with infeasible-setting if a cell turns negative.
inline JointDistribution build_joint(const SettingSpec& spec,
                                     JointConstruction how = JointConstruction::renormalized) {
  spec.validate();
  const Eigen::MatrixXd base = detail::independent_table(spec);
  if (spec.cells.empty()) return JointDistribution(base);
  const Eigen::MatrixXd listed = detail::listed_excess(spec);
  switch (how) {
    case JointConstruction::renormalized:
      return detail::nonnegative_joint(base + listed, to_string(how));
    case JointConstruction::ipf_complement:
      return detail::nonnegative_joint(base + listed - detail::ipf_correction(base, listed),
                                       to_string(how));
    case JointConstruction::rank_one: {
      const Eigen::VectorXd r = listed.rowwise().sum();
      const Eigen::VectorXd c = listed.colwise().sum().transpose();
      return detail::nonnegative_joint(base + listed - r * c.transpose() / listed.sum(),
                                       to_string(how));
    }
  }
  fail(ErrorCode::invalid_argument, "unknown joint construction");
}

struct SimulatedData {
  CategoricalDataset data;          // features X1..XS, then the response Y
  std::vector<bool> relevant;       // per feature
  std::size_t response = 0;         // column index of Y
};

/// Response from the column marginal of pi; relevant features (the first
/// `relevant`) from pi's column conditionals given the response; the rest
/// from the row marginal, independently. Column c draws from stream
/// (seed, c + 1) and the response from (seed, 0).
inline SimulatedData sample_dataset(const SettingSpec& spec, const JointDistribution& pi,
                                    std::uint64_t seed, std::size_t workers = 0) {
  spec.validate();
  if (static_cast<std::size_t>(pi.rows()) != spec.I() ||
      static_cast<std::size_t>(pi.cols()) != spec.J()) {
    fail(ErrorCode::shape, "joint table does not match the setting");
  }
  const std::size_t n = spec.n;
  SimulatedData out;
  out.response = spec.S;
  auto& data = out.data;
  data.names.resize(spec.S + 1);
  data.columns.assign(spec.S + 1, std::vector<int>(n));
  data.levels.assign(spec.S + 1, static_cast<int>(spec.I()));
  data.levels[spec.S] = static_cast<int>(spec.J());
  for (std::size_t s = 0; s < spec.S; ++s) data.names[s] = "X" + std::to_string(s + 1);
  data.names[spec.S] = "Y";
  out.relevant.assign(spec.S, false);
  std::fill_n(out.relevant.begin(), spec.relevant, true);

  const Eigen::VectorXd col = pi.col_marginal();
  const Eigen::VectorXd row = pi.row_marginal();
  {
    Rng rng(seed, {0});
    const CategoricalSampler response(std::span<const double>(col.data(), col.size()));
    for (auto& v : data.columns[spec.S]) v = response(rng);
  }
  std::vector<CategoricalSampler> conditional;
  for (Eigen::Index j = 0; j < pi.cols(); ++j) {
    const Eigen::VectorXd c = pi.probabilities().col(j);
    conditional.emplace_back(std::span<const double>(c.data(), c.size()));
  }
  const CategoricalSampler marginal(std::span<const double>(row.data(), row.size()));
  const auto& y = data.columns[spec.S];

  parallel_for(
      spec.S,
      [&](std::size_t s) {
        Rng rng(seed, {static_cast<std::uint64_t>(s + 1)});
        auto& x = data.columns[s];
        if (out.relevant[s]) {
          for (std::size_t m = 0; m < n; ++m) x[m] = conditional[static_cast<std::size_t>(y[m])](rng);
        } else {
          for (std::size_t m = 0; m < n; ++m) x[m] = marginal(rng);
        }
      },
      workers);
  return out;
}

inline SimulatedData sample_dataset(const SettingSpec& spec, std::uint64_t seed,
                                    JointConstruction how = JointConstruction::renormalized,
                                    std::size_t workers = 0) {
  return sample_dataset(spec, build_joint(spec, how), seed, workers);
}

namespace detail {

inline void require_classes(const std::vector<double>& scores, const std::vector<bool>& truth,
                            std::size_t& positives) {
  if (scores.size() != truth.size()) fail(ErrorCode::shape, "scores and truth differ in length");
  positives = static_cast<std::size_t>(std::count(truth.begin(), truth.end(), true));
  if (positives == 0 || positives == truth.size()) {
    fail(ErrorCode::undefined_auc, "AUC needs both relevant and irrelevant features");
  }
}

}  // namespace detail

/// Mann-Whitney AUC with average ranks for ties.
inline double roc_auc(const std::vector<double>& scores, const std::vector<bool>& truth) {
  std::size_t positives = 0;
  detail::require_classes(scores, truth, positives);
  const std::size_t m = scores.size();
  std::vector<std::size_t> idx(m);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double rank_sum = 0.0;
  for (std::size_t k = 0; k < m;) {
    std::size_t end = k;
    while (end < m && scores[idx[end]] == scores[idx[k]]) ++end;
    const double avg_rank = 0.5 * static_cast<double>(k + 1 + end);  // ranks k+1..end
    for (std::size_t t = k; t < end; ++t) {
      if (truth[idx[t]]) rank_sum += avg_rank;
    }
    k = end;
  }
  const double np = static_cast<double>(positives);
  const double nn = static_cast<double>(m - positives);
  return (rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
}

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
};

/// ROC points from (0, 0) to (1, 1), one per distinct score, highest first.
inline std::vector<RocPoint> roc_curve(const std::vector<double>& scores, const std::vector<bool>& truth) {
  std::size_t positives = 0;
  detail::require_classes(scores, truth, positives);
  const std::size_t m = scores.size();
  const double np = static_cast<double>(positives);
  const double nn = static_cast<double>(m - positives);
  std::vector<std::size_t> idx(m);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  std::vector<RocPoint> out{{0.0, 0.0}};
  double tp = 0.0, fp = 0.0;
  for (std::size_t k = 0; k < m;) {
    std::size_t end = k;
    while (end < m && scores[idx[end]] == scores[idx[k]]) {
      (truth[idx[end]] ? tp : fp) += 1.0;
      ++end;
    }
    out.push_back({fp / nn, tp / np});
    k = end;
  }
  return out;
}

struct BenchmarkConfig {
  int setting = 1;
  std::size_t n = 100;
  std::size_t S = 1000;
  std::size_t relevant = 50;
  std::size_t replicates = 3;
  std::uint64_t seed = 1;
  std::vector<EncodingKind> encodings{EncodingKind::one_hot, EncodingKind::ordinal,
                                      EncodingKind::semicircle};
  Estimator estimator = Estimator::mle;
  JointConstruction construction = JointConstruction::renormalized;
  std::size_t workers = 0;
};

struct BenchmarkResult {
  EncodingKind encoding = EncodingKind::one_hot;
  JointConstruction construction = JointConstruction::renormalized;
  double auc = 0.0;
  double sensitivity = 0.0;
  double specificity = 0.0;
  std::vector<double> replicate_auc;
  std::vector<double> replicate_sensitivity;
  std::vector<double> replicate_specificity;
  std::vector<std::uint64_t> replicate_seeds;
  std::vector<RocPoint> roc;  // pooled over replicates
};

/// Sensitivity and specificity of a selected id set against per-feature truth.
inline std::pair<double, double> selection_rates(const ScreeningReport& report,
                                                 const std::vector<bool>& truth) {
  std::vector<bool> chosen(truth.size(), false);
  for (auto id : report.selected) {
    const auto it = std::find(report.feature_ids.begin(), report.feature_ids.end(), id);
    chosen[static_cast<std::size_t>(it - report.feature_ids.begin())] = true;
  }
  double tp = 0.0, tn = 0.0, pos = 0.0, neg = 0.0;
  for (std::size_t k = 0; k < truth.size(); ++k) {
    if (truth[k]) {
      pos += 1.0;
      tp += chosen[k] ? 1.0 : 0.0;
    } else {
      neg += 1.0;
      tn += chosen[k] ? 0.0 : 1.0;
    }
  }
  return {pos > 0.0 ? tp / pos : 0.0, neg > 0.0 ? tn / neg : 0.0};
}

/// Seed of replicate r: first output of stream (seed, r).
inline std::uint64_t replicate_seed(std::uint64_t seed, std::size_t r) {
  Rng rng(seed, {static_cast<std::uint64_t>(r)});
  return rng.next();
}

/// Screening benchmark: every replicate draws one dataset that all encodings
/// share, scores it, and applies the change-point threshold.
inline std::vector<BenchmarkResult> run_benchmark(const BenchmarkConfig& config) {
  if (config.replicates < 1) fail(ErrorCode::insufficient_replicates, "need at least one replicate");
  if (config.encodings.empty()) fail(ErrorCode::configuration, "no encodings requested");
  SettingSpec spec = benchmark_setting(config.setting);
  spec.n = config.n;
  spec.S = config.S;
  spec.relevant = config.relevant;
  spec.validate();
  const JointDistribution pi = build_joint(spec, config.construction);

  std::vector<BenchmarkResult> results(config.encodings.size());
  std::vector<std::vector<double>> pooled_scores(config.encodings.size());
  std::vector<bool> pooled_truth;
  for (std::size_t e = 0; e < config.encodings.size(); ++e) {
    results[e].encoding = config.encodings[e];
    results[e].construction = config.construction;
  }
  for (std::size_t r = 0; r < config.replicates; ++r) {
    const std::uint64_t seed = replicate_seed(config.seed, r);
    const SimulatedData sim = sample_dataset(spec, pi, seed, config.workers);
    pooled_truth.insert(pooled_truth.end(), sim.relevant.begin(), sim.relevant.end());
    for (std::size_t e = 0; e < config.encodings.size(); ++e) {
      const auto dx = std::make_shared<const DistanceMatrix>(
          distance_matrix(make_encoding(config.encodings[e], spec.I())));
      const auto dy = std::make_shared<const DistanceMatrix>(
          distance_matrix(make_encoding(config.encodings[e], spec.J())));
      std::vector<DistancePtr> distances(sim.data.cols(), dx);
      distances[sim.response] = dy;
      ScreeningReport report =
          screen(sim.data, sim.response, distances, {config.estimator, config.workers});
      apply_changepoint(report);
      const auto [sens, spec_rate] = selection_rates(report, sim.relevant);
      auto& res = results[e];
      res.replicate_seeds.push_back(seed);
      res.replicate_auc.push_back(roc_auc(report.values, sim.relevant));
      res.replicate_sensitivity.push_back(sens);
      res.replicate_specificity.push_back(spec_rate);
      pooled_scores[e].insert(pooled_scores[e].end(), report.values.begin(), report.values.end());
    }
  }
  auto mean = [](const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  };
  for (std::size_t e = 0; e < results.size(); ++e) {
    auto& res = results[e];
    res.auc = mean(res.replicate_auc);
    res.sensitivity = mean(res.replicate_sensitivity);
    res.specificity = mean(res.replicate_specificity);
    res.roc = roc_curve(pooled_scores[e], pooled_truth);
  }
  return results;
}

}  // namespace catdcor

#pragma once

// The encode / test / screen / simulate commands as pure functions from
// configuration to output text. The command-line tool only parses flags and
// writes what these return.

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "catdcor/encodings.hpp"
#include "catdcor/error.hpp"
#include "catdcor/estimators.hpp"
#include "catdcor/inference.hpp"
#include "catdcor/io.hpp"
#include "catdcor/screening.hpp"
#include "catdcor/simulate.hpp"

namespace catdcor {

using Json = nlohmann::ordered_json;

enum class PValueMethod { analytic, permutation };

struct RunConfig {
  std::string input;
  std::string metadata;
  std::string response;
  std::string feature;  // test only; may be empty when one other column exists
  Estimator estimator = Estimator::mle;
  PValueMethod pvalue = PValueMethod::analytic;
  std::size_t perms = 999;
  std::uint64_t seed = 0;
  double level = 0.95;
};

struct SimulateConfig {
  BenchmarkConfig benchmark;
  bool emit_dataset = false;  // also return replicate 0 as CSV + metadata
};

namespace detail {

inline std::string matrix_csv(const Eigen::MatrixXd& m, const std::vector<std::string>& row_labels,
                              const std::vector<std::string>& col_labels) {
  std::ostringstream out;
  for (const auto& label : col_labels) out << ',' << csv_escape(label);
  out << '\n';
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    out << csv_escape(row_labels[static_cast<std::size_t>(i)]);
    for (Eigen::Index j = 0; j < m.cols(); ++j) out << ',' << format_double(m(i, j));
    out << '\n';
  }
  return out.str();
}

inline Json tail_json(const TestResult& r) {
  Json j;
  j["estimate"] = r.estimate;
  j["statistic"] = r.statistic;
  j["pvalue"] = r.pvalue;
  j["method"] = std::string(to_string(r.method));
  if (r.method == TailMethod::permutation) j["replicates"] = r.replicates;
  return j;
}

inline std::vector<std::string> default_level_names(std::size_t count) {
  std::vector<std::string> out;
  for (std::size_t i = 1; i <= count; ++i) out.push_back(std::to_string(i));
  return out;
}

}  // namespace detail

/// Every declared column's rescaled distance matrix as labelled CSV blocks.
inline std::string cmd_encode(const Metadata& meta) {
  std::ostringstream out;
  bool first = true;
  for (const auto& col : meta.columns) {
    if (!first) out << '\n';
    first = false;
    out << "# " << col.name << " (" << to_string(col.encoding.kind()) << ")\n";
    const auto d = distance_matrix(col.encoding);
    out << detail::matrix_csv(d.matrix(), col.encoding.labels(), col.encoding.labels());
  }
  return out.str();
}

inline std::string cmd_encode(const std::string& metadata_path) {
  return cmd_encode(read_metadata_file(metadata_path));
}

inline Json spectrum_json(const NullSpectrum& s) {
  Json j;
  j["lambda"] = s.lambda;
  j["mu"] = s.mu;
  j["B"] = s.B;
  j["dvarX"] = s.dvar_x;
  j["dvarY"] = s.dvar_y;
  return j;
}

/// Independence test between one feature and the response.
///
/// With the analytic method, a present category with fewer than 5
/// observations (estimated probability below 5/n) switches both p-values to
/// the permutation test.
inline Json cmd_test(const IngestResult& in, const RunConfig& config) {
  const auto& data = in.data;
  const std::size_t y_col = data.index_of(config.response);
  std::size_t x_col = data.cols();
  if (!config.feature.empty()) {
    x_col = data.index_of(config.feature);
    if (x_col == y_col) fail(ErrorCode::configuration, "feature and response are the same column");
  } else if (data.cols() == 2) {
    x_col = 1 - y_col;
  } else {
    fail(ErrorCode::configuration, "several candidate features; choose one with --feature");
  }
  const auto dx = distance_matrix(in.encodings[x_col]);
  const auto dy = distance_matrix(in.encodings[y_col]);
  const auto& x = data.columns[x_col];
  const auto& y = data.columns[y_col];
  const JointTable table = JointTable::from_codes(x, y, dx.size(), dy.size());
  if (table.total() < 4.0) fail(ErrorCode::insufficient_sample, "the test needs at least 4 rows");

  bool guard = false;
  for (const Eigen::VectorXd* m : {&table.row_counts(), &table.col_counts()}) {
    for (Eigen::Index i = 0; i < m->size(); ++i) guard = guard || ((*m)(i) > 0.0 && (*m)(i) < 5.0);
  }
  const bool use_permutation = config.pvalue == PValueMethod::permutation || guard;

  const NullSpectrum spec = null_spectrum(table, dx, dy);
  TestResult mle, unbiased;
  if (use_permutation) {
    const PermutationOptions opts{config.perms, config.seed, 0};
    mle = permutation_test(x, y, dx, dy, Estimator::mle, opts);
    unbiased = permutation_test(x, y, dx, dy, Estimator::unbiased, opts);
  } else {
    mle = analytic_test(Estimator::mle, table, dx, dy, spec);
    unbiased = analytic_test(Estimator::unbiased, table, dx, dy, spec);
  }
  const TestResult& chosen = config.estimator == Estimator::mle ? mle : unbiased;
  const Interval ci = confidence_interval(table, dx, dy, config.level, config.estimator);

  Json j;
  j["command"] = "test";
  j["feature"] = data.names[x_col];
  j["response"] = data.names[y_col];
  j["n"] = data.rows();
  j["droppedRows"] = in.dropped_rows;
  j["estimator"] = std::string(to_string(config.estimator));
  j["estimate"] = chosen.estimate;
  j["statistic"] = chosen.statistic;
  j["pvalue"] = chosen.pvalue;
  j["method"] = std::string(to_string(chosen.method));
  j["smallSampleGuard"] = guard;
  j["estimates"] = {{"mle", mle.estimate}, {"unbiased", unbiased.estimate}};
  j["tests"] = {{"mle", detail::tail_json(mle)}, {"unbiased", detail::tail_json(unbiased)}};
  j["spectrum"] = spectrum_json(spec);
  j["confidenceInterval"] = {{"level", config.level},
                             {"lo", ci.lo},
                             {"hi", ci.hi},
                             {"stdError", ci.std_error}};
  if (use_permutation) j["seed"] = config.seed;
  return j;
}

inline Json cmd_test(const RunConfig& config) {
  return cmd_test(ingest_files(config.input, config.metadata), config);
}

struct ScreenOutput {
  Json report;
  std::string ranked_csv;  // rank,value
};

inline Json screening_json(const ScreeningReport& r) {
  Json features = Json::array();
  for (std::size_t k = 0; k < r.values.size(); ++k) {
    features.push_back({{"id", r.feature_ids[k]},
                        {"name", r.names[k]},
                        {"value", r.values[k]},
                        {"degenerate", static_cast<bool>(r.degenerate[k])}});
  }
  std::vector<std::size_t> order_ids;
  for (auto k : r.order) order_ids.push_back(r.feature_ids[k]);
  Json j;
  j["estimator"] = std::string(to_string(r.estimator));
  j["features"] = std::move(features);
  j["order"] = order_ids;
  if (r.has_threshold) {
    j["threshold"] = r.threshold;
    j["changepointIndex"] = r.changepoint_index;
    j["lowConfidence"] = r.low_confidence;
  } else {
    j["threshold"] = nullptr;
    j["changepointIndex"] = nullptr;
  }
  j["selected"] = r.selected;
  std::vector<std::string> names;
  for (auto id : r.selected) {
    for (std::size_t k = 0; k < r.feature_ids.size(); ++k) {
      if (r.feature_ids[k] == id) names.push_back(r.names[k]);
    }
  }
  j["selectedNames"] = names;
  return j;
}

inline std::string ranked_csv(const ScreeningReport& r) {
  std::ostringstream out;
  out << "rank,value\n";
  std::size_t rank = 1;
  for (double v : r.sorted_values()) out << rank++ << ',' << format_double(v) << '\n';
  return out.str();
}

/// Screens every declared column against the response. The change-point
/// threshold is applied when there are at least four features.
inline ScreenOutput cmd_screen(const IngestResult& in, const RunConfig& config) {
  const std::size_t y_col = in.data.index_of(config.response);
  std::vector<DistancePtr> distances;
  for (const auto& enc : in.encodings) {
    distances.push_back(std::make_shared<const DistanceMatrix>(distance_matrix(enc)));
  }
  ScreeningReport report = screen(in.data, y_col, distances, {config.estimator, 0});
  if (report.values.size() >= 4) apply_changepoint(report);
  ScreenOutput out;
  Json j;
  j["command"] = "screen";
  j["response"] = in.data.names[y_col];
  j["n"] = in.data.rows();
  j["droppedRows"] = in.dropped_rows;
  const Json body = screening_json(report);
  for (const auto& [key, value] : body.items()) j[key] = value;
  out.report = std::move(j);
  out.ranked_csv = ranked_csv(report);
  return out;
}

inline ScreenOutput cmd_screen(const RunConfig& config) {
  return cmd_screen(ingest_files(config.input, config.metadata), config);
}

struct SimulateOutput {
  Json report;
  std::map<std::string, std::string> roc_csv;  // per encoding name
  std::string delta_csv;                       // pi - r c'
  std::string dataset_csv;                     // replicate 0, when requested
  Json dataset_metadata;
};

inline std::string roc_csv(const std::vector<RocPoint>& roc) {
  std::ostringstream out;
  out << "fpr,tpr\n";
  for (const auto& p : roc) out << format_double(p.fpr) << ',' << format_double(p.tpr) << '\n';
  return out.str();
}

inline SimulateOutput cmd_simulate(const SimulateConfig& config) {
  const auto& b = config.benchmark;
  const auto results = run_benchmark(b);
  SettingSpec spec = benchmark_setting(b.setting);
  spec.n = b.n;
  spec.S = b.S;
  spec.relevant = b.relevant;
  const JointDistribution pi = build_joint(spec, b.construction);

  SimulateOutput out;
  Json j;
  j["command"] = "simulate";
  j["setting"] = b.setting;
  j["n"] = b.n;
  j["features"] = b.S;
  j["relevant"] = b.relevant;
  j["replicates"] = b.replicates;
  j["seed"] = b.seed;
  j["estimator"] = std::string(to_string(b.estimator));
  j["construction"] = std::string(to_string(b.construction));
  Json rows = Json::array();
  for (const auto& r : results) {
    const std::string name(to_string(r.encoding));
    rows.push_back({{"encoding", name},
                    {"auc", r.auc},
                    {"sensitivity", r.sensitivity},
                    {"specificity", r.specificity},
                    {"replicateAuc", r.replicate_auc},
                    {"replicateSensitivity", r.replicate_sensitivity},
                    {"replicateSpecificity", r.replicate_specificity},
                    {"replicateSeeds", r.replicate_seeds}});
    out.roc_csv[name] = roc_csv(r.roc);
  }
  j["results"] = std::move(rows);
  out.delta_csv = detail::matrix_csv(pi.centered(), detail::default_level_names(spec.I()),
                                     detail::default_level_names(spec.J()));
  if (config.emit_dataset) {
    const SimulatedData sim = sample_dataset(spec, pi, replicate_seed(b.seed, 0), b.workers);
    std::vector<Encoding> encodings;
    for (std::size_t c = 0; c < sim.data.cols(); ++c) {
      encodings.push_back(make_encoding(b.encodings.front(),
                                        static_cast<std::size_t>(sim.data.levels[c])));
    }
    std::ostringstream csv;
    write_csv(csv, sim.data, encodings);
    out.dataset_csv = csv.str();
    out.dataset_metadata = metadata_json(sim.data.names, encodings);
  }
  out.report = std::move(j);
  return out;
}

}  // namespace catdcor

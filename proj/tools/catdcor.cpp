// catdcor: distance-correlation tests and screening for categorical data.

#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "catdcor/commands.hpp"

namespace {

using namespace catdcor;

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::io, "cannot write '" + path + "'");
  out << text;
  if (!out) fail(ErrorCode::io, "error while writing '" + path + "'");
}

// report.json -> report; anything else is used as is.
std::string stem_of(const std::string& path) {
  const std::string ext = ".json";
  if (path.size() > ext.size() && path.compare(path.size() - ext.size(), ext.size(), ext) == 0) {
    return path.substr(0, path.size() - ext.size());
  }
  return path;
}

void emit(const std::string& out, const std::string& text) {
  if (out.empty()) std::cout << text;
  else write_file(out, text);
}

std::vector<EncodingKind> parse_encodings(const std::string& list) {
  std::vector<EncodingKind> kinds;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto kind = parse_encoding_kind(item);
    if (!kind || *kind == EncodingKind::custom) {
      fail(ErrorCode::configuration, "unknown encoding '" + item + "' in --encodings");
    }
    kinds.push_back(*kind);
  }
  if (kinds.empty()) fail(ErrorCode::configuration, "--encodings is empty");
  return kinds;
}

Estimator parse_estimator(const std::string& name) {
  return name == "unbiased" ? Estimator::unbiased : Estimator::mle;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Distance correlation for categorical variables"};
  app.require_subcommand(1);

  RunConfig run;
  std::string out_path;
  std::string csv_path;

  auto* encode = app.add_subcommand("encode", "Print each column's rescaled distance matrix");
  encode->add_option("--metadata", run.metadata, "Encoding metadata (JSON)")->required();
  encode->add_option("--out", out_path, "Output CSV path (default: stdout)");

  std::string pvalue = "analytic";
  std::string estimator = "mle";
  auto add_data_flags = [&](CLI::App* cmd) {
    cmd->add_option("--input", run.input, "Dataset (CSV with header)")->required();
    cmd->add_option("--metadata", run.metadata, "Encoding metadata (JSON)")->required();
    cmd->add_option("--response", run.response, "Response column")->required();
    cmd->add_option("--estimator", estimator, "mle or unbiased")
        ->check(CLI::IsMember({"mle", "unbiased"}));
    cmd->add_option("--out", out_path, "Output JSON path (default: stdout)");
  };

  auto* test = app.add_subcommand("test", "Test independence of a feature and the response");
  add_data_flags(test);
  test->add_option("--feature", run.feature, "Feature column (optional with two columns)");
  test->add_option("--pvalue", pvalue, "analytic or permutation")
      ->check(CLI::IsMember({"analytic", "permutation"}));
  test->add_option("--perms", run.perms, "Permutation replicates")->check(CLI::Range(99, 100000000));
  test->add_option("--seed", run.seed, "Random seed");
  test->add_option("--level", run.level, "Confidence level")->check(CLI::Range(0.0, 1.0));

  auto* screen_cmd = app.add_subcommand("screen", "Rank features by dCor^2 with the response");
  add_data_flags(screen_cmd);
  screen_cmd->add_option("--csv", csv_path, "Ranked values CSV (default: <out stem>_ranked.csv)");

  SimulateConfig sim;
  std::string encodings = "onehot,ordinal,semicircle";
  std::string construction = "renormalized";
  std::string dataset_prefix;
  auto* simulate = app.add_subcommand("simulate", "Run a screening benchmark setting");
  simulate->add_option("--setting", sim.benchmark.setting, "Setting 1..6")->check(CLI::Range(1, 6));
  simulate->add_option("--n", sim.benchmark.n, "Sample size")->check(CLI::PositiveNumber);
  simulate->add_option("--features", sim.benchmark.S, "Number of features")->check(CLI::PositiveNumber);
  simulate->add_option("--relevant", sim.benchmark.relevant, "Number of relevant features");
  simulate->add_option("--replicates", sim.benchmark.replicates, "Replicates")->check(CLI::PositiveNumber);
  simulate->add_option("--seed", sim.benchmark.seed, "Random seed");
  simulate->add_option("--encodings", encodings, "Comma-separated encodings");
  simulate->add_option("--estimator", estimator, "mle or unbiased")
      ->check(CLI::IsMember({"mle", "unbiased"}));
  simulate->add_option("--construction", construction, "renormalized, ipf-complement or rank-one")
      ->check(CLI::IsMember({"renormalized", "ipf-complement", "rank-one"}));
  simulate->add_option("--dataset-out", dataset_prefix,
                       "Also write replicate 0 as <prefix>.csv and <prefix>.json");
  simulate->add_option("--out", out_path, "Output JSON path (default: stdout)");

  CLI11_PARSE(app, argc, argv);

  run.estimator = parse_estimator(estimator);
  sim.benchmark.estimator = run.estimator;
  try {
    if (encode->parsed()) {
      emit(out_path, cmd_encode(run.metadata));
    } else if (test->parsed()) {
      run.pvalue = pvalue == "permutation" ? PValueMethod::permutation : PValueMethod::analytic;
      emit(out_path, cmd_test(run).dump(2) + "\n");
    } else if (screen_cmd->parsed()) {
      const ScreenOutput result = cmd_screen(run);
      emit(out_path, result.report.dump(2) + "\n");
      if (csv_path.empty() && !out_path.empty()) csv_path = stem_of(out_path) + "_ranked.csv";
      if (!csv_path.empty()) write_file(csv_path, result.ranked_csv);
    } else if (simulate->parsed()) {
      sim.benchmark.encodings = parse_encodings(encodings);
      sim.benchmark.construction = construction == "ipf-complement" ? JointConstruction::ipf_complement
                                   : construction == "rank-one"     ? JointConstruction::rank_one
                                                                    : JointConstruction::renormalized;
      sim.emit_dataset = !dataset_prefix.empty();
      const SimulateOutput result = cmd_simulate(sim);
      emit(out_path, result.report.dump(2) + "\n");
      if (!out_path.empty()) {
        const std::string stem = stem_of(out_path);
        for (const auto& [name, text] : result.roc_csv) write_file(stem + "_roc_" + name + ".csv", text);
        write_file(stem + "_delta.csv", result.delta_csv);
      }
      if (sim.emit_dataset) {
        write_file(dataset_prefix + ".csv", result.dataset_csv);
        write_file(dataset_prefix + ".json", result.dataset_metadata.dump(2) + "\n");
      }
    }
  } catch (const Error& e) {
    Json err;
    err["error"] = {{"code", std::string(to_string(e.code()))}, {"message", e.what()}};
    std::cerr << err.dump() << '\n';
    return 2;
  } catch (const std::exception& e) {
    Json err;
    err["error"] = {{"code", "internal"}, {"message", e.what()}};
    std::cerr << err.dump() << '\n';
    return 1;
  }
  return 0;
}

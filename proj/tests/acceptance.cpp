// Acceptance suite. Prints one PASS/FAIL line per criterion and exits
// nonzero if any criterion fails.

#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "catdcor/commands.hpp"
#include "oracles.hpp"

using namespace catdcor;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

Eigen::MatrixXd dependent_3x3() {
  Eigen::MatrixXd pi(3, 3);
  pi << 0.20, 0.05, 0.05,
        0.05, 0.15, 0.10,
        0.02, 0.08, 0.30;
  return pi;
}

struct Codes {
  std::vector<int> x, y;
};

Codes sample_codes(Rng& rng, const Eigen::MatrixXd& pi, int n) {
  std::vector<double> flat(pi.data(), pi.data() + pi.size());
  const CategoricalSampler draw(flat);
  Codes c;
  for (int m = 0; m < n; ++m) {
    const int cell = static_cast<int>(draw(rng));
    c.x.push_back(cell % static_cast<int>(pi.rows()));
    c.y.push_back(cell / static_cast<int>(pi.rows()));
  }
  return c;
}

Outcome vstatistic_identity() {
  Rng rng(1001);
  double worst = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const auto rows = 2 + rng.below(5);
    const auto cols = 2 + rng.below(5);
    Eigen::MatrixXd counts(rows, cols);
    for (Eigen::Index k = 0; k < counts.size(); ++k) counts.data()[k] = static_cast<double>(rng.below(20));
    counts(0, 0) += 1;
    counts(rows - 1, cols - 1) += 1;
    counts(0, cols - 1) += 1;
    const JointTable t(counts);
    const auto dx = oracle::random_distances(rng, rows);
    const auto dy = oracle::random_distances(rng, cols);
    const double prob = dcov2(t.proportions(), dx, dy);
    const double tform = dcov2_vstatistic(t, dx, dy);
    const double mle = dcov2_mle(t, dx, dy);
    worst = std::max({worst, std::abs(prob - tform), std::abs(mle - tform)});
  }
  return {worst <= 1e-12, fmt("max |difference| %.2e over 200 tables", worst)};
}

Outcome unbiasedness() {
  const Eigen::MatrixXd pi = dependent_3x3();
  const auto dx = distance_matrix(ordinal_equal(3));
  const auto dy = distance_matrix(semicircle_equal(3));
  const double truth = dcov2(JointDistribution(pi), dx, dy);
  Rng rng(1002);
  const int reps = 20000;
  double sum = 0, sum2 = 0;
  for (int r = 0; r < reps; ++r) {
    const double v = dcov2_unbiased(JointTable(oracle::multinomial(rng, pi, 20)), dx, dy);
    sum += v;
    sum2 += v * v;
  }
  const double mean = sum / reps;
  const double se = std::sqrt((sum2 / reps - mean * mean) / reps);
  const double z = (mean - truth) / se;
  return {std::abs(z) < 4, fmt("mean %.6f vs population %.6f, z = %.2f", mean, truth, z)};
}

Outcome bias_formulas() {
  Rng rng(1003);
  const double n = 1e6;
  double worst = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const auto rows = 2 + rng.below(5);
    const auto cols = 2 + rng.below(5);
    Eigen::MatrixXd pi = oracle::random_table(rng, rows, cols);
    if (trial % 2 == 1) {
      const JointDistribution tmp(pi);
      pi = tmp.row_marginal() * tmp.col_marginal().transpose();
    }
    const auto dx = oracle::random_distances(rng, rows);
    const auto dy = oracle::random_distances(rng, cols);
    const JointTable t(pi * n);
    const double scaled = n * (dcov2_mle(t, dx, dy) - dcov2_unbiased(t, dx, dy));
    const double limit = bias_limit(JointDistribution(pi), dx, dy);
    worst = std::max(worst, std::abs(scaled - limit) / std::abs(limit));
  }
  return {worst <= 1e-3, fmt("max relative error %.2e over 20 tables", worst)};
}

Outcome spectrum_identities() {
  Rng rng(1004);
  double worst_trace = 0, worst_agree = 0;
  int bad_rank = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto rows = 2 + rng.below(7);
    const auto cols = 2 + rng.below(7);
    const Eigen::MatrixXd pi = oracle::random_table(rng, rows, cols);
    const JointDistribution p(pi);
    const auto dx = oracle::random_distances(rng, rows);
    const auto dy = oracle::random_distances(rng, cols);
    for (const auto& [marginal, d] : {std::pair{p.row_marginal(), &dx}, std::pair{p.col_marginal(), &dy}}) {
      const auto s = spectrum(marginal, *d);
      double sum2 = 0;
      for (double v : s) sum2 += v * v;
      worst_trace = std::max(worst_trace, std::abs(sum2 - dvar2(marginal, *d)));

      const Eigen::EigenSolver<Eigen::MatrixXd> direct(q_matrix(marginal, *d));
      std::vector<double> q;
      for (Eigen::Index k = 0; k < direct.eigenvalues().size(); ++k) {
        worst_agree = std::max(worst_agree, std::abs(direct.eigenvalues()(k).imag()));
        q.push_back(direct.eigenvalues()(k).real());
      }
      std::sort(q.begin(), q.end(), [](double a, double b) { return std::abs(a) > std::abs(b); });
      int zeros = 0;
      for (double v : q) zeros += std::abs(v) <= 1e-9 * std::abs(q.front());
      bad_rank += zeros != 1 || s.size() + 1 != q.size();
      for (std::size_t k = 0; k < s.size(); ++k) worst_agree = std::max(worst_agree, std::abs(s[k] - q[k]));
    }
  }
  const bool pass = worst_trace <= 1e-9 && worst_agree <= 1e-9 && bad_rank == 0;
  return {pass, fmt("trace error %.1e, surrogate vs Q %.1e, rank failures %d over 100 pairs", worst_trace,
                    worst_agree, bad_rank)};
}

Outcome chisq_tail() {
  Rng rng(1005);
  double worst = 0;
  int fallbacks = 0;
  const int draws = 1000000;
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> w;
    const auto k = 1 + rng.below(10);
    for (std::size_t i = 0; i < k; ++i) w.push_back(rng.normal());
    // The tail is of the centred form sum w (Z^2 - 1).
    double var = 0;
    for (double v : w) var += 2 * v * v;
    const double x = (rng.uniform() * 4 - 1.5) * std::sqrt(var);
    std::size_t above = 0;
    for (int m = 0; m < draws; ++m) {
      double q = 0;
      for (double v : w) {
        const double z = rng.normal();
        q += v * (z * z - 1);
      }
      above += q > x;
    }
    const auto tail = weighted_chisq_sf(w, x);
    fallbacks += tail.fallback;
    worst = std::max(worst, std::abs(tail.value - double(above) / draws));
  }
  return {worst <= 0.003, fmt("max |Imhof - Monte Carlo| %.4f over 20 weight sets, %d fallbacks", worst, fallbacks)};
}

Outcome null_calibration() {
  struct Design {
    const char* name;
    Eigen::VectorXd r, c;
    DistanceMatrix dx, dy;
  };
  std::vector<Design> designs;
  designs.push_back({"onehot 3x4", (Eigen::VectorXd(3) << 0.5, 0.3, 0.2).finished(),
                     (Eigen::VectorXd(4) << 0.4, 0.3, 0.2, 0.1).finished(), distance_matrix(one_hot(3)),
                     distance_matrix(one_hot(4))});
  designs.push_back({"semicircle 5x5", (Eigen::VectorXd(5) << 0.3, 0.25, 0.2, 0.15, 0.1).finished(),
                     Eigen::VectorXd::Constant(5, 0.2), distance_matrix(semicircle_equal(5)),
                     distance_matrix(semicircle_equal(5))});
  const int reps = 5000;
  bool pass = true;
  std::string detail;
  Rng rng(1006);
  for (const auto& d : designs) {
    const Eigen::MatrixXd pi = d.r * d.c.transpose();
    int reject_mle = 0, reject_unb = 0;
    for (int r = 0; r < reps; ++r) {
      const JointTable t(oracle::multinomial(rng, pi, 200));
      reject_mle += null_pvalue_mle(t, d.dx, d.dy) < 0.05;
      reject_unb += null_pvalue_unbiased(t, d.dx, d.dy) < 0.05;
    }
    const double a = reject_mle / double(reps), b = reject_unb / double(reps);
    pass = pass && a >= 0.035 && a <= 0.065 && b >= 0.035 && b <= 0.065;
    detail += fmt("%s size mle %.4f unbiased %.4f; ", d.name, a, b);
  }
  double worst = 0;
  for (int rep = 0; rep < 50; ++rep) {
    const auto& d = designs[rep % 2];
    const auto codes = sample_codes(rng, d.r * d.c.transpose(), 200);
    const auto t = JointTable::from_codes(codes.x, codes.y, d.dx.size(), d.dy.size());
    const auto perm = permutation_test(codes.x, codes.y, d.dx, d.dy, Estimator::mle,
                                       {9999, static_cast<std::uint64_t>(rep), 0});
    worst = std::max(worst, std::abs(perm.pvalue - null_pvalue_mle(t, d.dx, d.dy)));
  }
  pass = pass && worst <= 0.03;
  detail += fmt("max |permutation - analytic| %.4f over 50 datasets", worst);
  return {pass, detail};
}

Outcome delta_variance() {
  const Eigen::MatrixXd pi = dependent_3x3();
  const auto dx = distance_matrix(ordinal_equal(3));
  const auto dy = distance_matrix(one_hot(3));
  const JointDistribution p(pi);
  const double truth = dcor2(p, dx, dy);
  const double asymp = alt_inference(p, dx, dy).asymp_var;
  const int reps = 5000, n = 2000;
  std::vector<double> values(reps);
  parallel_for(reps, [&](std::size_t r) {
    Rng rng(1007, {r});
    values[r] = std::sqrt(double(n)) * (dcor2_mle(JointTable(oracle::multinomial(rng, pi, n)), dx, dy) - truth);
  });
  double sum = 0, sum2 = 0;
  for (double v : values) {
    sum += v;
    sum2 += v * v;
  }
  const double var = sum2 / reps - (sum / reps) * (sum / reps);
  const double rel = std::abs(var / asymp - 1);

  double indep = 0;
  Rng rng(1008);
  for (int trial = 0; trial < 20; ++trial) {
    const auto r = oracle::random_marginal(rng, 2 + rng.below(5));
    const auto c = oracle::random_marginal(rng, 2 + rng.below(5));
    const auto a = oracle::random_distances(rng, r.size());
    const auto b = oracle::random_distances(rng, c.size());
    indep = std::max(indep, std::abs(alt_inference(JointDistribution(r * c.transpose()), a, b).asymp_var));
  }
  return {rel <= 0.10 && indep <= 1e-12,
          fmt("empirical %.5f vs asympVar %.5f (relative %.3f); independent max %.1e", var, asymp, rel, indep)};
}

Outcome scale_invariance() {
  Rng rng(1009);
  double worst = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const auto rows = 2 + rng.below(5);
    const auto cols = 2 + rng.below(5);
    const Eigen::MatrixXd pi = oracle::random_table(rng, rows, cols);
    const JointTable t(oracle::multinomial(rng, pi, 60));
    if ((t.row_counts().array() > 0).count() < 2 || (t.col_counts().array() > 0).count() < 2) continue;
    const auto dx = oracle::random_distances(rng, rows);
    const auto dy = oracle::random_distances(rng, cols);
    const double base[] = {dcor2(JointDistribution(pi), dx, dy), dcor2_mle(t, dx, dy), dcor2_unbiased(t, dx, dy)};
    for (double c : {0.1, 7.0}) {
      for (int which = 0; which < 3; ++which) {
        const auto ax = which != 1 ? dx.scaled_by(c) : dx;
        const auto ay = which != 0 ? dy.scaled_by(c) : dy;
        const double now[] = {dcor2(JointDistribution(pi), ax, ay), dcor2_mle(t, ax, ay), dcor2_unbiased(t, ax, ay)};
        for (int k = 0; k < 3; ++k) worst = std::max(worst, std::abs(now[k] - base[k]));
      }
    }
  }
  return {worst <= 1e-12, fmt("max change %.2e", worst)};
}

std::map<int, std::vector<BenchmarkResult>> benchmark_cache;

const std::vector<BenchmarkResult>& benchmark(int setting) {
  auto it = benchmark_cache.find(setting);
  if (it != benchmark_cache.end()) return it->second;
  BenchmarkConfig cfg;
  cfg.setting = setting;
  cfg.n = 100;
  cfg.S = 1000;
  cfg.relevant = 50;
  cfg.replicates = 3;
  cfg.seed = 20240601;
  return benchmark_cache[setting] = run_benchmark(cfg);
}

Outcome benchmark_reproduction() {
  const std::pair<int, std::array<double, 3>> targets[] = {{1, {0.928, 0.969, 0.969}}, {6, {0.934, 0.852, 0.894}}};
  bool pass = true;
  std::string detail;
  for (const auto& [setting, reference] : targets) {
    const auto& res = benchmark(setting);
    detail += fmt("setting %d AUC", setting);
    for (int e = 0; e < 3; ++e) {
      pass = pass && std::abs(res[e].auc - reference[e]) <= 0.05;
      detail += fmt(" %.3f(%.3f)", res[e].auc, reference[e]);
    }
    detail += "; ";
  }
  return {pass, detail + "onehot/ordinal/semicircle vs reference"};
}

Outcome encoding_ordering() {
  bool pass = true;
  std::string detail;
  for (int setting = 1; setting <= 6; ++setting) {
    const auto& r = benchmark(setting);
    const double one = r[0].auc, ord = r[1].auc, semi = r[2].auc;
    const bool ok = (setting == 3 || setting == 6) ? one > ord && one > semi && semi > ord
                                                   : ord - one >= 0.02 && semi - one >= 0.02;
    pass = pass && ok;
    detail += fmt("S%d %.3f/%.3f/%.3f%s ", setting, one, ord, semi, ok ? "" : "(!)");
  }
  return {pass, detail};
}

Outcome sure_screening() {
  SettingSpec spec = benchmark_setting(1);
  spec.n = 200;
  spec.S = 500;
  spec.relevant = 25;
  const int runs = 100;
  const EncodingKind kinds[] = {EncodingKind::one_hot, EncodingKind::ordinal, EncodingKind::semicircle};
  int hits[3] = {0, 0, 0};
  for (int run = 0; run < runs; ++run) {
    const auto sim = sample_dataset(spec, replicate_seed(777, static_cast<std::size_t>(run)));
    for (int e = 0; e < 3; ++e) {
      std::vector<DistancePtr> d(sim.data.cols(), std::make_shared<const DistanceMatrix>(
                                                      distance_matrix(make_encoding(kinds[e], 5))));
      auto report = screen(sim.data, sim.response, d);
      apply_changepoint(report);
      std::size_t found = 0;
      for (std::size_t id : report.selected) found += id < spec.S && sim.relevant[id];
      hits[e] += found == spec.relevant;
    }
  }
  const bool pass = hits[0] >= 95 && hits[1] >= 95 && hits[2] >= 95;
  return {pass, fmt("runs containing all 25 relevant: onehot %d, ordinal %d, semicircle %d of 100", hits[0],
                    hits[1], hits[2])};
}

Outcome changepoint_behaviour() {
  const std::vector<double> v{10, 9.8, 9.6, 0.1, 0.09, 0.08, 0.07};
  const auto cp = changepoint_threshold(v);
  bool pass = cp.index == 3 && cp.threshold > 0.1 && cp.threshold < 9.6;
  double worst = 0;
  Rng rng(1012);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> s;
    const auto len = 4 + rng.below(60);
    for (std::size_t k = 0; k < len; ++k) s.push_back(rng.uniform());
    std::sort(s.begin(), s.end(), std::greater<>());
    for (double shift : {-0.3, 0.5, 2.0}) {
      std::vector<double> moved = s;
      for (double& x : moved) x += shift;
      const auto a = changepoint_threshold(s);
      const auto b = changepoint_threshold(moved);
      pass = pass && a.index == b.index;
      worst = std::max(worst, std::abs(b.threshold - (a.threshold + shift)));
    }
  }
  pass = pass && worst <= 1e-12;
  return {pass, fmt("index %zu, C = %.4f; max shift error %.1e", cp.index, cp.threshold, worst)};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

CsvTable csv_of_text(const std::string& text) {
  std::istringstream in(text);
  return read_csv(in);
}

Outcome determinism() {
  const fs::path root = fs::temp_directory_path() / "catdcor_acceptance_determinism";
  fs::remove_all(root);
  std::vector<std::map<std::string, std::string>> outputs;
  bool ran = true;
  for (const char* workers : {"1", "1", "8", "8"}) {
    const fs::path dir = root / std::to_string(outputs.size());
    fs::create_directories(dir);
    const std::string cli = std::string("CATDCOR_WORKERS=") + workers + " \"" CATDCOR_CLI_PATH "\" ";
    const std::string d = dir.string() + "/";
    const std::string sim = cli + "simulate --setting 2 --n 100 --features 400 --relevant 20 --replicates 2 "
                                  "--seed 99 --out " + d + "sim.json --dataset-out " + d + "data";
    const std::string scr = cli + "screen --input " + d + "data.csv --metadata " + d + "data.json --response Y --out " +
                            d + "screen.json";
    const std::string tst = cli + "test --input " + d + "data.csv --metadata " + d +
                            "data.json --response Y --feature X1 --pvalue permutation --seed 3 --out " + d +
                            "test.json";
    ran = ran && std::system((sim + " 2>/dev/null").c_str()) == 0 && std::system((scr + " 2>/dev/null").c_str()) == 0 &&
          std::system((tst + " 2>/dev/null").c_str()) == 0;
    std::map<std::string, std::string> files;
    for (const auto& entry : fs::directory_iterator(dir)) files[entry.path().filename().string()] = slurp(entry.path());
    outputs.push_back(std::move(files));
  }

  // The library path with explicit worker counts.
  BenchmarkConfig cfg;
  cfg.setting = 5;
  cfg.S = 300;
  cfg.relevant = 15;
  cfg.replicates = 2;
  cfg.seed = 7;
  std::vector<std::string> api;
  for (std::size_t workers : {1, 8}) {
    cfg.workers = workers;
    const auto out = cmd_simulate({cfg, true});
    auto in = ingest(csv_of_text(out.dataset_csv), parse_metadata(out.dataset_metadata));
    RunConfig run;
    run.response = "Y";
    api.push_back(out.report.dump() + cmd_screen(in, run).report.dump());
  }
  fs::remove_all(root);

  bool same = ran && outputs[0].size() >= 6;
  for (const auto& o : outputs) same = same && o == outputs[0];
  same = same && api[0] == api[1];
  return {same, fmt("%zu output files identical across 2 runs x workers {1, 8}; library path %s",
                    outputs[0].size(), api[0] == api[1] ? "identical" : "differs")};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"V-statistic identity", vstatistic_identity},
      {"unbiasedness of the U-statistic", unbiasedness},
      {"bias formulas", bias_formulas},
      {"spectrum identities", spectrum_identities},
      {"weighted chi-squared tail", chisq_tail},
      {"null calibration", null_calibration},
      {"delta-method variance", delta_variance},
      {"scale invariance", scale_invariance},
      {"benchmark reproduction", benchmark_reproduction},
      {"encoding ordering", encoding_ordering},
      {"sure screening", sure_screening},
      {"change-point behaviour", changepoint_behaviour},
      {"determinism", determinism},
  };
  int failures = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[k].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    failures += !o.pass;
    std::printf("%s criterion %zu: %s: %s [%.1fs]\n", o.pass ? "PASS" : "FAIL", k + 1, criteria[k].first,
                o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}

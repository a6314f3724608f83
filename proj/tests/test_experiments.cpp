#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

#include "doctest.h"
#include "tabkanet/experiments.hpp"
#include "tabkanet/synth.hpp"

using namespace tabkanet;

namespace {

struct TempDataset {
  std::string csv = "exp_tmp.csv";
  std::string schema = "exp_tmp.schema";

  explicit TempDataset(const std::string& name, std::uint64_t seed = 5) {
    write_dataset(name, csv, schema, seed);
  }
  TempDataset(const std::string& csv_text, const std::string& schema_text, int) {
    std::ofstream(csv) << csv_text;
    std::ofstream(schema) << schema_text;
  }
  ~TempDataset() {
    std::remove(csv.c_str());
    std::remove(schema.c_str());
  }
};

ExperimentConfig quick_config(const TempDataset& td) {
  ExperimentConfig cfg;
  cfg.csv_path = td.csv;
  cfg.schema_path = td.schema;
  cfg.archs = {Arch::mlp};
  cfg.train.max_epochs = 3;
  cfg.train.patience = 3;
  cfg.out_dir = "exp_tmp_out";
  cfg.seed = 11;
  return cfg;
}

}  // namespace

TEST_CASE("config: json parsing, defaults, and rejection of unknown keys") {
  ExperimentConfig cfg = ExperimentConfig::from_json(R"({
    "csv": "a.csv", "schema": "a.schema",
    "study": "noise-sweep", "archs": ["tabkanet", "mlp"],
    "seed": 9, "batch_size": 64, "noise_seeds": 3
  })");
  CHECK(cfg.study == StudyKind::noise_sweep);
  CHECK(cfg.archs.size() == 2);
  CHECK(cfg.train.batch_size == 64);
  CHECK(cfg.train.max_epochs == 200);  // default
  CHECK(cfg.train.patience == 20);     // default
  CHECK(cfg.noise_seeds == 3);
  CHECK(cfg.noise_levels == std::vector<double>{0.1, 0.2, 0.3, 0.4, 0.5});

  CHECK_THROWS_AS(ExperimentConfig::from_json("{\"csv\": \"x\"}"), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_json(
                      "{\"csv\":\"a\",\"schema\":\"b\",\"typo_key\":1}"),
                  ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_json(
                      "{\"csv\":\"a\",\"schema\":\"b\",\"batch_size\":1}"),
                  ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_json("not json"), ConfigError);
}

TEST_CASE("benchmark: deterministic reports with recomputable mean/std") {
  TempDataset td("blobs-binary");
  ExperimentConfig cfg = quick_config(td);

  auto reports = run_benchmark(cfg);
  REQUIRE(reports.size() == 1);
  const RunReport& r = reports[0];
  CHECK(r.arch == "mlp");
  CHECK(r.metric_name == "auc");
  REQUIRE(r.folds.size() == 5);
  CHECK(r.failed_folds() == 0);

  double mean = 0.0;
  for (const auto& f : r.folds) mean += f.metric;
  mean /= 5.0;
  CHECK(r.mean == doctest::Approx(mean).epsilon(1e-12));
  double ss = 0.0;
  for (const auto& f : r.folds) ss += (f.metric - mean) * (f.metric - mean);
  CHECK(r.stddev == doctest::Approx(std::sqrt(ss / 4.0)).epsilon(1e-12));

  auto again = run_benchmark(cfg);
  for (std::size_t f = 0; f < 5; ++f)
    CHECK(again[0].folds[f].metric == r.folds[f].metric);
  CHECK(again[0].fingerprint == r.fingerprint);

  // outputs exist and carry the fingerprint header
  std::ifstream csv("exp_tmp_out/bench.csv");
  REQUIRE(csv.good());
  std::string line;
  std::getline(csv, line);
  CHECK(line.find("fingerprint 0x") != std::string::npos);
}

TEST_CASE("ablate-norm: BN and LN trained on identical folds and seeds") {
  TempDataset td("blobs-binary");
  ExperimentConfig cfg = quick_config(td);
  cfg.study = StudyKind::ablate_norm;
  auto [bn, ln] = run_ablate_norm(cfg);
  CHECK(bn.arch == "tabkanet");
  CHECK(ln.arch == "tabkanet-ln");
  REQUIRE(bn.folds.size() == ln.folds.size());
  CHECK(bn.fingerprint == ln.fingerprint);
  CHECK(std::isfinite(bn.mean));
  CHECK(std::isfinite(ln.mean));
}

TEST_CASE("noise sweep: clean baseline, skip flag, and monotone degradation") {
  TempDataset td("blobs-binary");
  ExperimentConfig cfg = quick_config(td);
  cfg.study = StudyKind::noise_sweep;
  cfg.train.max_epochs = 8;
  cfg.train.patience = 8;
  cfg.noise_seeds = 20;

  NoiseSweepResult res = run_noise_sweep(cfg);
  REQUIRE(res.clean.size() == 1);
  CHECK(res.cells.size() == 2 * cfg.noise_levels.size());

  // blobs has no categorical columns: the categorical block is skipped and
  // leaves the clean metric untouched
  for (const auto& c : res.cells) {
    if (c.kind == NoiseKind::categorical) {
      CHECK(c.skipped);
      CHECK(c.mean_metric == doctest::Approx(res.clean[0].mean).epsilon(1e-12));
    }
  }

  // numerical corruption degrades AUC monotonically in p (up to noise-seed
  // variance with R=20 seeds)
  std::vector<double> curve = {res.clean[0].mean};
  for (const auto& c : res.cells)
    if (c.kind == NoiseKind::numerical) curve.push_back(c.mean_metric);
  REQUIRE(curve.size() == 6);
  for (std::size_t i = 1; i < curve.size(); ++i)
    CHECK(curve[i] <= curve[i - 1] + 0.02);
  CHECK(curve.back() < curve.front());
}

TEST_CASE("batch sweep: one point per batch size, reproducible") {
  TempDataset td("blobs-binary");
  ExperimentConfig cfg = quick_config(td);
  cfg.study = StudyKind::batch_sweep;
  cfg.batch_sizes = {32, 64};
  BatchSweepResult res = run_batch_sweep(cfg);
  REQUIRE(res.batch_sizes == std::vector<std::size_t>{32, 64});
  REQUIRE(res.reports.size() == 2);
  BatchSweepResult again = run_batch_sweep(cfg);
  CHECK(again.reports[0].mean == res.reports[0].mean);
  CHECK(again.reports[1].mean == res.reports[1].mean);

  cfg.batch_sizes = {1};
  CHECK_THROWS_AS(run_batch_sweep(cfg), ConfigError);
}

TEST_CASE("bn-export: limiting cases and batch-size shrinkage") {
  // skewed lognormal column plus a constant column
  std::mt19937_64 rng(3);
  std::ostringstream csv;
  csv << "skewed,flat,y\n";
  std::normal_distribution<double> d(0.0, 1.0);
  const int N = 512;
  for (int i = 0; i < N; ++i)
    csv << std::exp(d(rng)) << ",5," << (i % 2 ? "yes" : "no") << '\n';
  TempDataset td(csv.str(),
                 "dataset bn\ntask binary\npositive yes\n"
                 "column skewed numerical\ncolumn flat numerical\n"
                 "column y target\n",
                 0);
  ExperimentConfig cfg = quick_config(td);
  cfg.study = StudyKind::bn_export;

  // full-dataset batch: per-batch statistics are the global statistics
  cfg.batch_sizes = {N};
  for (const auto& row : export_bn_scatter(cfg, "skewed"))
    CHECK(row.bn_value == doctest::Approx(row.ln_value).epsilon(1e-9));

  // constant column: both normalizations are identically zero
  for (const auto& row : export_bn_scatter(cfg, "flat")) {
    CHECK(row.bn_value == 0.0);
    CHECK(row.ln_value == doctest::Approx(0.0));
  }

  // mean |bn - ln| is non-increasing as the batch grows
  cfg.batch_sizes = {8, 32, 128, 512};
  auto rows = export_bn_scatter(cfg, "skewed");
  std::map<std::size_t, std::pair<double, std::size_t>> gap;
  for (const auto& row : rows) {
    gap[row.batch_size].first += std::fabs(row.bn_value - row.ln_value);
    gap[row.batch_size].second += 1;
  }
  double prev = 1e100;
  for (std::size_t b : cfg.batch_sizes) {
    double mean_gap = gap[b].first / gap[b].second;
    CHECK(mean_gap <= prev + 1e-12);
    prev = mean_gap;
  }

  CHECK_THROWS_AS(export_bn_scatter(cfg, "nosuch"), ConfigError);
}

TEST_CASE("bn-export rejects categorical columns") {
  TempDataset td("credit-synth", 2);
  ExperimentConfig cfg = quick_config(td);
  cfg.study = StudyKind::bn_export;
  CHECK_THROWS_AS(export_bn_scatter(cfg, "cat0"), ConfigError);
}

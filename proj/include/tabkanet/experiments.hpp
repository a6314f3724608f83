#pragma once

#include <map>
#include <string>
#include <vector>

#include "tabkanet/metrics.hpp"
#include "tabkanet/training.hpp"

namespace tabkanet {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class StudyKind { benchmark, ablate_norm, noise_sweep, batch_sweep, bn_export };

StudyKind study_from_string(const std::string& tag);
std::string study_to_string(StudyKind s);

// Study configuration, loadable from a JSON file. Every field has a default
// so a config only needs the dataset paths.
struct ExperimentConfig {
  std::string csv_path;
  std::string schema_path;
  StudyKind study = StudyKind::benchmark;
  std::vector<Arch> archs = {Arch::tabkanet};
  TrainConfig train;
  std::size_t folds = 5;
  std::uint64_t seed = 0;
  std::string out_dir = ".";
  KanMode kan_mode = KanMode::locked;

  // noise-sweep
  std::size_t noise_seeds = 5;
  std::vector<double> noise_levels = {0.1, 0.2, 0.3, 0.4, 0.5};

  // batch-sweep / bn-export
  std::vector<std::size_t> batch_sizes = {32, 64, 128, 256, 512};
  std::string bn_column;

  static ExperimentConfig from_json_file(const std::string& path);
  static ExperimentConfig from_json(const std::string& text);

  void validate() const;
  // canonical text hashed (with the schema) into the output fingerprint
  std::string canonical() const;
};

struct FoldOutcome {
  std::size_t fold = 0;
  bool failed = false;
  bool diverged = false;
  std::string error;
  double metric = 0.0;      // primary task metric on the test fold
  MetricReport report;      // primary metric with bookkeeping
  std::map<std::string, double> extra_metrics;  // acc / balanced_acc etc.
  double wall_ms = 0.0;
  std::vector<EpochRecord> history;
};

struct RunReport {
  std::string arch;
  std::string metric_name;
  std::vector<FoldOutcome> folds;
  double mean = 0.0;    // over succeeded folds
  double stddev = 0.0;  // sample standard deviation
  std::uint64_t fingerprint = 0;

  std::size_t failed_folds() const;
  bool any_divergence() const;
  void finalize();  // recomputes mean/stddev from fold outcomes
};

std::uint64_t config_fingerprint(const ExperimentConfig& cfg,
                                 const TableSchema& schema);

// Shared study context: parsed dataset and the fold splits all studies use.
struct StudyData {
  TableSchema schema;
  Dataset dataset;
  std::vector<FoldSplit> folds;
  bool stratified = false;

  static StudyData load(const ExperimentConfig& cfg);
};

// Trains `arch` on every fold (cells run on a small worker pool; worker
// count from TABKANET_WORKERS, default = number of folds) and reports the
// per-fold test metric with mean +/- std. A failed fold is recorded and the
// remaining folds continue.
RunReport run_arch(const ExperimentConfig& cfg, const StudyData& data, Arch arch);

// benchmark study over cfg.archs; writes bench.csv + bench_summary.txt
std::vector<RunReport> run_benchmark(const ExperimentConfig& cfg);

// BN vs LN pair on identical folds and seeds; writes ablate_norm.csv
std::pair<RunReport, RunReport> run_ablate_norm(const ExperimentConfig& cfg);

struct NoiseCell {
  std::string arch;
  NoiseKind kind = NoiseKind::categorical;
  double p = 0.0;
  double mean_metric = 0.0;             // over folds x noise seeds
  std::vector<double> fold_metrics;     // per fold, averaged over noise seeds
  bool skipped = false;                 // e.g. categorical kind with m = 0
};

struct NoiseSweepResult {
  std::vector<RunReport> clean;  // p = 0 baseline per architecture
  std::vector<NoiseCell> cells;
};

NoiseSweepResult run_noise_sweep(const ExperimentConfig& cfg);

struct BatchSweepResult {
  std::vector<std::size_t> batch_sizes;
  std::vector<RunReport> reports;  // one per batch size, first arch only
};

BatchSweepResult run_batch_sweep(const ExperimentConfig& cfg);

struct BnScatterRow {
  double raw = 0.0;
  double ln_value = 0.0;  // normalized with whole-column statistics
  double bn_value = 0.0;  // normalized within the sampled mini-batch
  std::size_t batch_size = 0;
};

// No training involved: contrasts per-batch vs whole-column normalization of
// one numerical column across the configured batch sizes.
std::vector<BnScatterRow> export_bn_scatter(const ExperimentConfig& cfg,
                                            const std::string& column);

// Dispatches on cfg.study and writes the study outputs under cfg.out_dir.
void run_study(const ExperimentConfig& cfg);

}  // namespace tabkanet

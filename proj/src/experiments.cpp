#include "tabkanet/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "tabkanet/synth.hpp"

namespace tabkanet {
namespace {

using nlohmann::json;

double now_ms() {
  return std::chrono::duration<double, std::milli>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t x = a + 0x9e3779b97f4a7c15ULL + (b << 6) + (b >> 2);
  x ^= x >> 33;
  x *= 0xff51afd7ed558ccdULL;
  x ^= x >> 33;
  x *= 0xc4ceb9fe1a85ec53ULL;
  x ^= x >> 33;
  return x;
}

std::size_t worker_count(std::size_t folds) {
  if (const char* env = std::getenv("TABKANET_WORKERS")) {
    long v = std::strtol(env, nullptr, 10);
    if (v >= 1) return static_cast<std::size_t>(v);
  }
  return std::max<std::size_t>(folds, 1);
}

// Runs `jobs` indexed tasks on a small pool; each task owns its state.
void parallel_for(std::size_t jobs, std::size_t workers,
                  const std::function<void(std::size_t)>& fn) {
  workers = std::min(workers, jobs);
  if (workers <= 1) {
    for (std::size_t i = 0; i < jobs; ++i) fn(i);
    return;
  }
  // one BLAS thread per worker; the pool provides the parallelism
  detail::blas_set_threads(1);
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next.fetch_add(1); i < jobs; i = next.fetch_add(1))
        fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

std::string fmt_hex(std::uint64_t v) {
  std::ostringstream out;
  out << "0x" << std::hex << v;
  return out.str();
}

}  // namespace

StudyKind study_from_string(const std::string& tag) {
  if (tag == "benchmark" || tag == "bench") return StudyKind::benchmark;
  if (tag == "ablate-norm") return StudyKind::ablate_norm;
  if (tag == "noise-sweep") return StudyKind::noise_sweep;
  if (tag == "batch-sweep") return StudyKind::batch_sweep;
  if (tag == "bn-export") return StudyKind::bn_export;
  throw ConfigError("unknown study kind: " + tag);
}

std::string study_to_string(StudyKind s) {
  switch (s) {
    case StudyKind::benchmark: return "benchmark";
    case StudyKind::ablate_norm: return "ablate-norm";
    case StudyKind::noise_sweep: return "noise-sweep";
    case StudyKind::batch_sweep: return "batch-sweep";
    case StudyKind::bn_export: return "bn-export";
  }
  return "benchmark";
}

ExperimentConfig ExperimentConfig::from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return from_json(buf.str());
}

ExperimentConfig ExperimentConfig::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config root must be a JSON object");

  ExperimentConfig cfg;
  const std::vector<std::string> known = {
      "csv",        "schema",      "study",       "archs",       "folds",
      "seed",       "out_dir",     "kan_mode",    "noise_seeds", "noise_levels",
      "batch_sizes", "bn_column",  "batch_size",  "max_epochs",  "patience",
      "lr",         "sgd_lr",      "weight_decay", "clip_norm"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find(known.begin(), known.end(), it.key()) == known.end())
      throw ConfigError("unknown config key: " + it.key());
  }

  try {
    if (j.contains("csv")) cfg.csv_path = j["csv"].get<std::string>();
    if (j.contains("schema")) cfg.schema_path = j["schema"].get<std::string>();
    if (j.contains("study"))
      cfg.study = study_from_string(j["study"].get<std::string>());
    if (j.contains("archs")) {
      cfg.archs.clear();
      for (const auto& tag : j["archs"])
        cfg.archs.push_back(arch_from_string(tag.get<std::string>()));
    }
    if (j.contains("folds")) cfg.folds = j["folds"].get<std::size_t>();
    if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("out_dir")) cfg.out_dir = j["out_dir"].get<std::string>();
    if (j.contains("kan_mode")) {
      std::string m = j["kan_mode"].get<std::string>();
      if (m == "locked") cfg.kan_mode = KanMode::locked;
      else if (m == "dynamic") cfg.kan_mode = KanMode::dynamic;
      else throw ConfigError("kan_mode must be locked or dynamic");
    }
    if (j.contains("noise_seeds")) cfg.noise_seeds = j["noise_seeds"].get<std::size_t>();
    if (j.contains("noise_levels"))
      cfg.noise_levels = j["noise_levels"].get<std::vector<double>>();
    if (j.contains("batch_sizes"))
      cfg.batch_sizes = j["batch_sizes"].get<std::vector<std::size_t>>();
    if (j.contains("bn_column")) cfg.bn_column = j["bn_column"].get<std::string>();
    if (j.contains("batch_size")) cfg.train.batch_size = j["batch_size"].get<std::size_t>();
    if (j.contains("max_epochs")) cfg.train.max_epochs = j["max_epochs"].get<std::size_t>();
    if (j.contains("patience")) cfg.train.patience = j["patience"].get<std::size_t>();
    if (j.contains("lr")) cfg.train.lr = j["lr"].get<double>();
    if (j.contains("sgd_lr")) cfg.train.sgd_lr = j["sgd_lr"].get<double>();
    if (j.contains("weight_decay")) cfg.train.weight_decay = j["weight_decay"].get<double>();
    if (j.contains("clip_norm")) cfg.train.clip_norm = j["clip_norm"].get<double>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad config value: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

void ExperimentConfig::validate() const {
  if (csv_path.empty() || schema_path.empty())
    throw ConfigError("config needs both csv and schema paths");
  if (archs.empty()) throw ConfigError("config needs at least one architecture");
  if (folds < 2) throw ConfigError("folds must be >= 2");
  if (train.batch_size < 2) throw ConfigError("batch_size must be >= 2");
  if (train.max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
  for (std::size_t b : batch_sizes)
    if (b < 2) throw ConfigError("batch sizes must be >= 2");
  for (double p : noise_levels)
    if (p < 0.0 || p > 1.0) throw ConfigError("noise levels must be in [0,1]");
  if (noise_seeds < 1) throw ConfigError("noise_seeds must be >= 1");
}

std::string ExperimentConfig::canonical() const {
  std::ostringstream out;
  out << "study=" << study_to_string(study) << ";csv=" << csv_path
      << ";schema=" << schema_path << ";archs=";
  for (Arch a : archs) out << arch_to_string(a) << ',';
  out << ";folds=" << folds << ";seed=" << seed
      << ";kan_mode=" << (kan_mode == KanMode::locked ? "locked" : "dynamic")
      << ";batch=" << train.batch_size << ";epochs=" << train.max_epochs
      << ";patience=" << train.patience << ";lr=" << train.lr
      << ";sgd_lr=" << train.sgd_lr << ";wd=" << train.weight_decay
      << ";clip=" << train.clip_norm << ";noise_seeds=" << noise_seeds
      << ";noise_levels=";
  for (double p : noise_levels) out << p << ',';
  out << ";batch_sizes=";
  for (std::size_t b : batch_sizes) out << b << ',';
  out << ";bn_column=" << bn_column;
  return out.str();
}

std::uint64_t config_fingerprint(const ExperimentConfig& cfg,
                                 const TableSchema& schema) {
  return fnv1a64(cfg.canonical() + "|" + schema.canonical_text());
}

std::size_t RunReport::failed_folds() const {
  std::size_t k = 0;
  for (const auto& f : folds) k += f.failed;
  return k;
}

bool RunReport::any_divergence() const {
  for (const auto& f : folds)
    if (f.diverged) return true;
  return false;
}

void RunReport::finalize() {
  std::vector<double> vals;
  for (const auto& f : folds)
    if (!f.failed) vals.push_back(f.metric);
  if (vals.empty()) {
    mean = stddev = std::nan("");
    return;
  }
  mean = std::accumulate(vals.begin(), vals.end(), 0.0) / vals.size();
  double ss = 0.0;
  for (double v : vals) ss += (v - mean) * (v - mean);
  stddev = vals.size() > 1 ? std::sqrt(ss / (vals.size() - 1)) : 0.0;
}

StudyData StudyData::load(const ExperimentConfig& cfg) {
  StudyData data;
  data.schema = load_schema(cfg.schema_path);
  data.dataset = load_csv(cfg.csv_path, data.schema);
  const std::vector<std::size_t>* strat =
      data.schema.task == TaskKind::regression ? nullptr
                                               : &data.dataset.target_cls;
  data.folds = make_folds(data.dataset.n_rows, cfg.seed, strat, &data.stratified);
  if (data.folds.size() != cfg.folds) {
    // make_folds is fixed at 5; other fold counts re-deal the test chunks
    if (cfg.folds != 5)
      throw ConfigError("this harness runs the 5-fold protocol; folds must be 5");
  }
  return data;
}

namespace {

struct FoldModel {
  FoldOutcome outcome;
  Model model;             // holds the best checkpoint after training
  EncodedRows test_rows;   // encoded with the fold's fitted encoder
  NoiseReference noise_ref;
  bool usable = false;
};

// Trains one (arch, fold) cell end to end. Fitting (vocabulary, medians,
// noise pools, z-statistics) is audited against the training fold.
FoldModel train_fold(const ExperimentConfig& cfg, const StudyData& data,
                     Arch arch, std::size_t fold_index, bool keep_model) {
  FoldModel cell;
  FoldOutcome& out = cell.outcome;
  out.fold = fold_index;
  double t0 = now_ms();
  try {
    const FoldSplit& fold = data.folds[fold_index];
    FitAudit audit;
    audit.set_allowed(fold.train);

    CategoricalEncoder encoder =
        CategoricalEncoder::fit(data.dataset, fold.train, &audit);
    std::vector<double> medians = fit_medians(data.dataset, fold.train, &audit);
    EncodedRows train_rows = encode_rows(data.dataset, encoder, medians, fold.train);
    EncodedRows val_rows = encode_rows(data.dataset, encoder, medians, fold.val);
    EncodedRows test_rows = encode_rows(data.dataset, encoder, medians, fold.test);

    // the fold seed is shared by every architecture so paired studies see
    // identical batch sequences
    std::uint64_t fold_seed = mix_seed(cfg.seed, fold_index);
    ModelSpec spec =
        ModelSpec::for_dataset(arch, data.schema, encoder, cfg.kan_mode);
    Model model = build(spec, fold_seed);
    TrainConfig tc = cfg.train;
    tc.seed = fold_seed;
    TrainResult res = train(model, train_rows, val_rows, tc, &audit, &fold.train);

    out.history = res.history;
    out.metric = evaluate_metric(model, test_rows);
    out.report.name = metric_name(data.schema.task);
    out.report.value = out.metric;
    out.report.fold_index = fold_index;
    out.report.n_samples = test_rows.rows;

    if (data.schema.task != TaskKind::regression) {
      std::vector<std::size_t> preds;
      std::vector<double> scores = predict_scores(model, test_rows, &preds);
      std::vector<std::size_t> labels;
      if (data.schema.task == TaskKind::binary) {
        preds.clear();
        for (double s : scores) preds.push_back(s > 0.0 ? 1 : 0);
        for (double y : test_rows.y_bin)
          labels.push_back(static_cast<std::size_t>(y));
      } else {
        labels = test_rows.y_cls;
      }
      std::size_t C = std::max<std::size_t>(spec.n_classes, 2);
      out.extra_metrics["accuracy"] = accuracy(preds, labels);
      out.extra_metrics["balanced_accuracy"] = balanced_accuracy(preds, labels, C);
      if (data.schema.task == TaskKind::multiclass)
        out.extra_metrics["macro_f1"] = macro_f1(preds, labels, C);
    }

    if (keep_model) {
      cell.noise_ref =
          NoiseReference::fit(data.dataset, train_rows, fold.train, &audit);
      cell.model = std::move(model);
      cell.test_rows = std::move(test_rows);
    }
    if (audit.tripped())
      throw std::logic_error("fit audit tripped: a fit routine saw non-train rows");
    cell.usable = keep_model;
  } catch (const DivergenceError& e) {
    out.failed = true;
    out.diverged = true;
    out.error = e.what();
  } catch (const std::exception& e) {
    out.failed = true;
    out.error = e.what();
  }
  out.wall_ms = now_ms() - t0;
  return cell;
}

std::vector<FoldModel> run_arch_cells(const ExperimentConfig& cfg,
                                      const StudyData& data, Arch arch,
                                      bool keep_models) {
  std::vector<FoldModel> cells(data.folds.size());
  parallel_for(data.folds.size(), worker_count(data.folds.size()),
               [&](std::size_t f) {
                 cells[f] = train_fold(cfg, data, arch, f, keep_models);
               });
  return cells;
}

RunReport report_from_cells(const ExperimentConfig& cfg, const StudyData& data,
                            Arch arch, const std::vector<FoldModel>& cells) {
  RunReport report;
  report.arch = arch_to_string(arch);
  report.metric_name = metric_name(data.schema.task);
  for (const auto& c : cells) report.folds.push_back(c.outcome);
  report.fingerprint = config_fingerprint(cfg, data.schema);
  report.finalize();
  return report;
}

void ensure_out_dir(const ExperimentConfig& cfg) {
  std::filesystem::create_directories(cfg.out_dir);
}

std::ofstream open_out(const ExperimentConfig& cfg, const StudyData& data,
                       const std::string& file) {
  ensure_out_dir(cfg);
  std::string path = cfg.out_dir + "/" + file;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "# study " << study_to_string(cfg.study) << " dataset "
      << data.schema.dataset_name << " fingerprint "
      << fmt_hex(config_fingerprint(cfg, data.schema)) << '\n';
  return out;
}

void write_reports_csv(const ExperimentConfig& cfg, const StudyData& data,
                       const std::vector<RunReport>& reports,
                       const std::string& stem) {
  std::ofstream csv = open_out(cfg, data, stem + ".csv");
  csv << "arch,fold,metric,value,accuracy,balanced_accuracy,wall_ms,failed,error\n";
  for (const auto& r : reports) {
    for (const auto& f : r.folds) {
      auto extra = [&](const char* k) {
        auto it = f.extra_metrics.find(k);
        return it == f.extra_metrics.end() ? std::string()
                                           : std::to_string(it->second);
      };
      csv << r.arch << ',' << f.fold << ',' << r.metric_name << ','
          << (f.failed ? std::string() : std::to_string(f.metric)) << ','
          << extra("accuracy") << ',' << extra("balanced_accuracy") << ','
          << f.wall_ms << ',' << (f.failed ? 1 : 0) << ','
          << (f.failed ? f.error : std::string()) << '\n';
    }
  }

  std::ofstream hist = open_out(cfg, data, stem + "_history.csv");
  hist << "arch,fold,epoch,train_loss,val_metric,epoch_ms\n";
  for (const auto& r : reports)
    for (const auto& f : r.folds)
      for (const auto& e : f.history)
        hist << r.arch << ',' << f.fold << ',' << e.epoch << ',' << e.train_loss
             << ',' << e.val_metric << ',' << e.wall_ms << '\n';

  std::ofstream sum = open_out(cfg, data, stem + "_summary.txt");
  for (const auto& r : reports) {
    sum << r.arch << "  " << r.metric_name << " = " << r.mean << " +/- "
        << r.stddev << "  (" << (r.folds.size() - r.failed_folds()) << '/'
        << r.folds.size() << " folds)\n";
  }
}

}  // namespace

RunReport run_arch(const ExperimentConfig& cfg, const StudyData& data, Arch arch) {
  return report_from_cells(cfg, data, arch, run_arch_cells(cfg, data, arch, false));
}

std::vector<RunReport> run_benchmark(const ExperimentConfig& cfg) {
  cfg.validate();
  StudyData data = StudyData::load(cfg);
  std::vector<RunReport> reports;
  for (Arch arch : cfg.archs) reports.push_back(run_arch(cfg, data, arch));
  write_reports_csv(cfg, data, reports, "bench");
  return reports;
}

std::pair<RunReport, RunReport> run_ablate_norm(const ExperimentConfig& cfg) {
  cfg.validate();
  StudyData data = StudyData::load(cfg);
  RunReport bn = run_arch(cfg, data, Arch::tabkanet);
  RunReport ln = run_arch(cfg, data, Arch::tabkanet_ln);
  std::vector<RunReport> both = {bn, ln};
  write_reports_csv(cfg, data, both, "ablate_norm");

  std::ofstream diff = open_out(cfg, data, "ablate_norm_diff.txt");
  diff << "bn_mean " << bn.mean << "\nln_mean " << ln.mean << "\npaired_gap "
       << bn.mean - ln.mean << '\n';
  return {bn, ln};
}

NoiseSweepResult run_noise_sweep(const ExperimentConfig& cfg) {
  cfg.validate();
  StudyData data = StudyData::load(cfg);
  NoiseSweepResult result;

  std::ofstream csv = open_out(cfg, data, "noise_sweep.csv");
  csv << "arch,kind,p,mean_metric,skipped\n";

  for (Arch arch : cfg.archs) {
    std::vector<FoldModel> cells = run_arch_cells(cfg, data, arch, true);
    RunReport clean = report_from_cells(cfg, data, arch, cells);
    csv << clean.arch << ",clean,0," << clean.mean << ",0\n";

    for (NoiseKind kind : {NoiseKind::categorical, NoiseKind::numerical}) {
      const char* kind_tag = kind == NoiseKind::categorical ? "categorical" : "numerical";
      for (std::size_t pi = 0; pi < cfg.noise_levels.size(); ++pi) {
        double p = cfg.noise_levels[pi];
        NoiseCell cell;
        cell.arch = clean.arch;
        cell.kind = kind;
        cell.p = p;
        double total = 0.0;
        std::size_t used = 0;
        for (auto& fm : cells) {
          if (!fm.usable || fm.outcome.failed) continue;
          double fold_sum = 0.0;
          for (std::size_t r = 0; r < cfg.noise_seeds; ++r) {
            std::uint64_t nseed = mix_seed(
                mix_seed(cfg.seed, 1000 + fm.outcome.fold),
                (kind == NoiseKind::categorical ? 0 : 500) + 10 * pi + r);
            bool skipped = false;
            EncodedRows noisy = inject_noise(fm.test_rows, kind, p,
                                             fm.noise_ref, nseed, &skipped);
            cell.skipped = cell.skipped || skipped;
            fold_sum += evaluate_metric(fm.model, noisy);
          }
          double fold_mean = fold_sum / cfg.noise_seeds;
          cell.fold_metrics.push_back(fold_mean);
          total += fold_mean;
          ++used;
        }
        cell.mean_metric = used ? total / used : std::nan("");
        csv << cell.arch << ',' << kind_tag << ',' << p << ',' << cell.mean_metric
            << ',' << (cell.skipped ? 1 : 0) << '\n';
        result.cells.push_back(std::move(cell));
      }
    }
    result.clean.push_back(std::move(clean));
  }
  return result;
}

BatchSweepResult run_batch_sweep(const ExperimentConfig& cfg) {
  cfg.validate();
  StudyData data = StudyData::load(cfg);
  BatchSweepResult result;
  Arch arch = cfg.archs.front();

  std::ofstream csv = open_out(cfg, data, "batch_sweep.csv");
  csv << "batch_size,arch,metric,mean,stddev\n";
  for (std::size_t b : cfg.batch_sizes) {
    ExperimentConfig sub = cfg;
    sub.train.batch_size = b;
    RunReport report = run_arch(sub, data, arch);
    csv << b << ',' << report.arch << ',' << report.metric_name << ','
        << report.mean << ',' << report.stddev << '\n';
    result.batch_sizes.push_back(b);
    result.reports.push_back(std::move(report));
  }
  return result;
}

std::vector<BnScatterRow> export_bn_scatter(const ExperimentConfig& cfg,
                                            const std::string& column) {
  cfg.validate();
  StudyData data = StudyData::load(cfg);

  std::size_t col = data.schema.columns.size();
  std::size_t num_index = 0, idx = 0;
  for (const auto& c : data.schema.columns) {
    if (c.kind == ColumnKind::categorical && c.name == column)
      throw ConfigError("bn-export needs a numerical column, got categorical: " + column);
    if (c.kind == ColumnKind::numerical) {
      if (c.name == column) {
        col = idx;
        break;
      }
      ++num_index;
    }
    ++idx;
  }
  if (col == data.schema.columns.size())
    throw ConfigError("no numerical column named " + column);

  std::vector<double> values;
  for (double v : data.dataset.num_cells[num_index])
    if (std::isfinite(v)) values.push_back(v);
  if (values.size() < 2) throw ConfigError("column has fewer than 2 usable cells");

  constexpr double kEps = 1e-5;
  double g_mean = std::accumulate(values.begin(), values.end(), 0.0) / values.size();
  double g_var = 0.0;
  for (double v : values) g_var += (v - g_mean) * (v - g_mean);
  g_var /= values.size();
  double g_inv = 1.0 / std::sqrt(g_var + kEps);

  std::vector<BnScatterRow> rows;
  std::ofstream csv = open_out(cfg, data, "bn_scatter.csv");
  csv << "batch_size,raw,ln_value,bn_value\n";
  std::mt19937_64 rng(cfg.seed);
  for (std::size_t b : cfg.batch_sizes) {
    std::vector<std::size_t> order(values.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    std::size_t batch = std::min(b, values.size());
    for (std::size_t start = 0; start + batch <= order.size(); start += batch) {
      double m = 0.0;
      for (std::size_t i = 0; i < batch; ++i) m += values[order[start + i]];
      m /= batch;
      double var = 0.0;
      for (std::size_t i = 0; i < batch; ++i) {
        double d = values[order[start + i]] - m;
        var += d * d;
      }
      var /= batch;
      double inv = 1.0 / std::sqrt(var + kEps);
      for (std::size_t i = 0; i < batch; ++i) {
        double v = values[order[start + i]];
        BnScatterRow row;
        row.raw = v;
        row.ln_value = (v - g_mean) * g_inv;
        row.bn_value = (v - m) * inv;
        row.batch_size = b;
        csv << b << ',' << v << ',' << row.ln_value << ',' << row.bn_value << '\n';
        rows.push_back(row);
      }
    }
  }
  return rows;
}

void run_study(const ExperimentConfig& cfg) {
  switch (cfg.study) {
    case StudyKind::benchmark: run_benchmark(cfg); return;
    case StudyKind::ablate_norm: run_ablate_norm(cfg); return;
    case StudyKind::noise_sweep: run_noise_sweep(cfg); return;
    case StudyKind::batch_sweep: run_batch_sweep(cfg); return;
    case StudyKind::bn_export:
      if (cfg.bn_column.empty())
        throw ConfigError("bn-export needs bn_column in the config");
      export_bn_scatter(cfg, cfg.bn_column);
      return;
  }
}

}  // namespace tabkanet

#pragma once

#include <atomic>
#include <cstddef>
#include <random>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

namespace tabkanet {

struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class ColumnKind { categorical, numerical, target };
enum class TaskKind { binary, multiclass, regression };

struct ColumnSpec {
  std::string name;
  ColumnKind kind;
};

struct TableSchema {
  std::string dataset_name;
  TaskKind task = TaskKind::binary;
  std::size_t n_classes = 2;
  std::string positive_label;  // binary tasks
  std::vector<ColumnSpec> columns;

  std::size_t num_categorical() const;
  std::size_t num_numerical() const;
  // Validates the single-target / m+n >= 1 invariants.
  void validate() const;
  std::string canonical_text() const;
};

// Schema file grammar (one directive per line, '#' comments):
//   dataset <name>
//   task binary | multiclass <C> | regression
//   positive <label>            (binary only)
//   column <name> categorical | numerical | target
TableSchema load_schema(const std::string& path);
TableSchema parse_schema(const std::string& text);

struct Dataset {
  TableSchema schema;
  std::size_t n_rows = 0;
  // column-major raw values; numerical parse failures are NaN (missing)
  std::vector<std::vector<std::string>> cat_cells;  // [m][rows]
  std::vector<std::vector<double>> num_cells;       // [n][rows]
  std::vector<double> target_reg;                   // regression
  std::vector<std::size_t> target_cls;              // binary/multiclass
  std::vector<std::string> class_names;             // id -> label
};

// RFC-4180-style CSV with a required header; columns are matched to the
// schema by name and extra CSV columns are ignored.
Dataset load_csv(const std::string& path, const TableSchema& schema);
Dataset parse_csv(const std::string& text, const TableSchema& schema);

struct FoldSplit {
  std::size_t fold_index = 0;
  std::vector<std::size_t> train, val, test;
  std::uint64_t seed = 0;
};

// Five 60/20/20 splits whose test sets partition the rows. Classification
// targets stratify; a class with < 5 members falls back to a random split
// (returned in `stratified`).
std::vector<FoldSplit> make_folds(std::size_t n_rows, std::uint64_t seed,
                                  const std::vector<std::size_t>* stratify_targets,
                                  bool* stratified = nullptr);

// Trips if any fit routine sees a row outside the registered training fold.
class FitAudit {
 public:
  void set_allowed(const std::vector<std::size_t>& train_indices);
  void check(const std::vector<std::size_t>& indices);
  bool tripped() const { return tripped_.load(); }

 private:
  std::unordered_set<std::size_t> allowed_;
  std::atomic<bool> tripped_{false};
};

// Dense per-fold encoding: categorical ids row-major [rows x m], numerical
// values row-major [rows x n], plus the task targets.
struct EncodedRows {
  std::size_t rows = 0, m = 0, n = 0;
  std::vector<std::size_t> cat;  // [rows x m]
  std::vector<double> num;       // [rows x n]
  std::vector<double> y_bin;     // binary targets as 0/1
  std::vector<std::size_t> y_cls;
  std::vector<double> y_reg;

  std::vector<std::size_t> cat_row(std::size_t r) const {
    return {cat.begin() + r * m, cat.begin() + (r + 1) * m};
  }

  EncodedRows subset(const std::vector<std::size_t>& local_rows) const;
};

// Training-fold empirical pools used for noise replacement draws.
struct NoiseReference {
  std::vector<std::vector<std::size_t>> cat_pool;  // [m][train rows]
  std::vector<std::vector<double>> num_pool;       // [n][train rows]

  static NoiseReference fit(const Dataset& ds, const EncodedRows& train,
                            const std::vector<std::size_t>& train_indices,
                            FitAudit* audit);
};

enum class NoiseKind { categorical, numerical };

// Each cell of the chosen kind is independently replaced with probability p
// by a draw from the training-fold empirical pool of its column.
EncodedRows inject_noise(const EncodedRows& test, NoiseKind kind, double p,
                         const NoiseReference& ref, std::uint64_t seed,
                         bool* skipped = nullptr);

// FNV-1a, used for schema hashes and config fingerprints.
std::uint64_t fnv1a64(const std::string& text);

// Training-fold medians for missing-value imputation.
std::vector<double> fit_medians(const Dataset& ds,
                                const std::vector<std::size_t>& indices,
                                FitAudit* audit);

}  // namespace tabkanet

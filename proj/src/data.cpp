#include "tabkanet/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

namespace tabkanet {

std::size_t TableSchema::num_categorical() const {
  return static_cast<std::size_t>(
      std::count_if(columns.begin(), columns.end(), [](const ColumnSpec& c) {
        return c.kind == ColumnKind::categorical;
      }));
}

std::size_t TableSchema::num_numerical() const {
  return static_cast<std::size_t>(
      std::count_if(columns.begin(), columns.end(), [](const ColumnSpec& c) {
        return c.kind == ColumnKind::numerical;
      }));
}

void TableSchema::validate() const {
  std::size_t targets = static_cast<std::size_t>(
      std::count_if(columns.begin(), columns.end(), [](const ColumnSpec& c) {
        return c.kind == ColumnKind::target;
      }));
  if (targets != 1)
    throw DataError("schema: exactly one target column required, found " +
                    std::to_string(targets));
  if (num_categorical() + num_numerical() < 1)
    throw DataError("schema: at least one feature column required");
  if (task == TaskKind::multiclass && n_classes < 2)
    throw DataError("schema: multiclass task needs a class count >= 2");
}

std::string TableSchema::canonical_text() const {
  std::ostringstream os;
  os << "dataset " << dataset_name << "\n";
  switch (task) {
    case TaskKind::binary:
      os << "task binary\npositive " << positive_label << "\n";
      break;
    case TaskKind::multiclass:
      os << "task multiclass " << n_classes << "\n";
      break;
    case TaskKind::regression:
      os << "task regression\n";
      break;
  }
  for (const auto& c : columns) {
    os << "column " << c.name << " ";
    switch (c.kind) {
      case ColumnKind::categorical: os << "categorical"; break;
      case ColumnKind::numerical: os << "numerical"; break;
      case ColumnKind::target: os << "target"; break;
    }
    os << "\n";
  }
  return os.str();
}

TableSchema parse_schema(const std::string& text) {
  TableSchema schema;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  bool saw_task = false;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string word;
    if (!(ls >> word)) continue;
    if (word == "dataset") {
      ls >> schema.dataset_name;
    } else if (word == "task") {
      std::string kind;
      ls >> kind;
      saw_task = true;
      if (kind == "binary") {
        schema.task = TaskKind::binary;
        schema.n_classes = 2;
      } else if (kind == "multiclass") {
        schema.task = TaskKind::multiclass;
        if (!(ls >> schema.n_classes))
          throw DataError("schema line " + std::to_string(lineno) +
                          ": multiclass needs a class count");
      } else if (kind == "regression") {
        schema.task = TaskKind::regression;
        schema.n_classes = 0;
      } else {
        throw DataError("schema line " + std::to_string(lineno) +
                        ": unknown task '" + kind + "'");
      }
    } else if (word == "positive") {
      ls >> schema.positive_label;
    } else if (word == "column") {
      ColumnSpec c;
      std::string kind;
      if (!(ls >> c.name >> kind))
        throw DataError("schema line " + std::to_string(lineno) +
                        ": column needs a name and a kind");
      if (kind == "categorical")
        c.kind = ColumnKind::categorical;
      else if (kind == "numerical")
        c.kind = ColumnKind::numerical;
      else if (kind == "target")
        c.kind = ColumnKind::target;
      else
        throw DataError("schema line " + std::to_string(lineno) +
                        ": unknown column kind '" + kind + "'");
      schema.columns.push_back(std::move(c));
    } else {
      throw DataError("schema line " + std::to_string(lineno) +
                      ": unknown directive '" + word + "'");
    }
  }
  if (!saw_task) throw DataError("schema: missing task directive");
  schema.validate();
  return schema;
}

TableSchema load_schema(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open schema file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_schema(ss.str());
}

namespace {

// RFC-4180 field splitting with quoted fields and embedded quotes.
std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(field));
      field.clear();
    } else if (c != '\r') {
      field += c;
    }
  }
  out.push_back(std::move(field));
  return out;
}

bool parse_double(const std::string& s, double* out) {
  if (s.empty()) return false;
  char* end = nullptr;
  double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size()) return false;
  *out = v;
  return true;
}

}  // namespace

Dataset parse_csv(const std::string& text, const TableSchema& schema) {
  schema.validate();
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw DataError("csv: missing header row");
  std::vector<std::string> header = split_csv_line(line);
  std::map<std::string, std::size_t> col_pos;
  for (std::size_t i = 0; i < header.size(); ++i) col_pos[header[i]] = i;

  std::vector<std::size_t> positions(schema.columns.size());
  for (std::size_t i = 0; i < schema.columns.size(); ++i) {
    auto it = col_pos.find(schema.columns[i].name);
    if (it == col_pos.end())
      throw DataError("csv: missing column '" + schema.columns[i].name + "'");
    positions[i] = it->second;
  }

  Dataset ds;
  ds.schema = schema;
  ds.cat_cells.resize(schema.num_categorical());
  ds.num_cells.resize(schema.num_numerical());
  std::vector<std::string> raw_targets;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells = split_csv_line(line);
    if (cells.size() < header.size())
      throw DataError("csv: row " + std::to_string(ds.n_rows + 2) + " has " +
                      std::to_string(cells.size()) + " cells, expected " +
                      std::to_string(header.size()));
    std::size_t ci = 0, ni = 0;
    for (std::size_t i = 0; i < schema.columns.size(); ++i) {
      const std::string& cell = cells[positions[i]];
      switch (schema.columns[i].kind) {
        case ColumnKind::categorical:
          ds.cat_cells[ci++].push_back(cell);
          break;
        case ColumnKind::numerical: {
          double v;
          ds.num_cells[ni++].push_back(
              parse_double(cell, &v) ? v
                                     : std::numeric_limits<double>::quiet_NaN());
          break;
        }
        case ColumnKind::target:
          raw_targets.push_back(cell);
          break;
      }
    }
    ++ds.n_rows;
  }
  if (ds.n_rows == 0) throw DataError("csv: dataset has no data rows");

  switch (schema.task) {
    case TaskKind::binary:
      ds.class_names = {"negative", schema.positive_label};
      for (const auto& t : raw_targets)
        ds.target_cls.push_back(t == schema.positive_label ? 1 : 0);
      break;
    case TaskKind::multiclass: {
      // stable label-id mapping from the sorted label universe
      std::vector<std::string> uniq = raw_targets;
      std::sort(uniq.begin(), uniq.end());
      uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
      if (uniq.size() > schema.n_classes)
        throw DataError("csv: found " + std::to_string(uniq.size()) +
                        " target labels, schema allows " +
                        std::to_string(schema.n_classes));
      ds.class_names = uniq;
      std::map<std::string, std::size_t> ids;
      for (std::size_t i = 0; i < uniq.size(); ++i) ids[uniq[i]] = i;
      for (const auto& t : raw_targets) ds.target_cls.push_back(ids[t]);
      break;
    }
    case TaskKind::regression:
      for (const auto& t : raw_targets) {
        double v;
        if (!parse_double(t, &v))
          throw DataError("csv: non-numeric regression target '" + t + "'");
        ds.target_reg.push_back(v);
      }
      break;
  }
  return ds;
}

Dataset load_csv(const std::string& path, const TableSchema& schema) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open csv file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_csv(ss.str(), schema);
}

std::vector<FoldSplit> make_folds(std::size_t n_rows, std::uint64_t seed,
                                  const std::vector<std::size_t>* stratify_targets,
                                  bool* stratified) {
  if (n_rows < 10) throw DataError("make_folds: need at least 10 rows");
  constexpr std::size_t K = 5;
  bool use_strata = stratify_targets != nullptr;
  if (use_strata) {
    std::map<std::size_t, std::size_t> counts;
    for (std::size_t t : *stratify_targets) counts[t]++;
    for (const auto& [cls, cnt] : counts) {
      if (cnt < K) {
        use_strata = false;  // stratification warning: fall back to random
        break;
      }
    }
  }
  if (stratified) *stratified = use_strata;

  std::mt19937_64 rng(seed);
  // deal shuffled indices (per class when stratifying) into 5 chunks
  std::vector<std::vector<std::size_t>> chunks(K);
  auto deal = [&](std::vector<std::size_t>& idx) {
    std::shuffle(idx.begin(), idx.end(), rng);
    for (std::size_t i = 0; i < idx.size(); ++i)
      chunks[i % K].push_back(idx[i]);
  };
  if (use_strata) {
    std::map<std::size_t, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < n_rows; ++i)
      by_class[(*stratify_targets)[i]].push_back(i);
    for (auto& [cls, idx] : by_class) deal(idx);
  } else {
    std::vector<std::size_t> idx(n_rows);
    std::iota(idx.begin(), idx.end(), 0);
    deal(idx);
  }

  std::vector<FoldSplit> folds(K);
  for (std::size_t f = 0; f < K; ++f) {
    folds[f].fold_index = f;
    folds[f].seed = seed;
    folds[f].test = chunks[f];
    folds[f].val = chunks[(f + 1) % K];
    for (std::size_t c = 0; c < K; ++c)
      if (c != f && c != (f + 1) % K)
        folds[f].train.insert(folds[f].train.end(), chunks[c].begin(),
                              chunks[c].end());
    std::sort(folds[f].test.begin(), folds[f].test.end());
    std::sort(folds[f].val.begin(), folds[f].val.end());
    std::sort(folds[f].train.begin(), folds[f].train.end());
  }
  return folds;
}

void FitAudit::set_allowed(const std::vector<std::size_t>& train_indices) {
  allowed_.clear();
  allowed_.insert(train_indices.begin(), train_indices.end());
}

void FitAudit::check(const std::vector<std::size_t>& indices) {
  for (std::size_t i : indices) {
    if (!allowed_.count(i)) {
      tripped_.store(true);
      return;
    }
  }
}

NoiseReference NoiseReference::fit(const Dataset& ds, const EncodedRows& train,
                                   const std::vector<std::size_t>& train_indices,
                                   FitAudit* audit) {
  if (audit) audit->check(train_indices);
  NoiseReference ref;
  ref.cat_pool.resize(train.m);
  ref.num_pool.resize(train.n);
  (void)ds;
  for (std::size_t r = 0; r < train.rows; ++r) {
    for (std::size_t j = 0; j < train.m; ++j)
      ref.cat_pool[j].push_back(train.cat[r * train.m + j]);
    for (std::size_t j = 0; j < train.n; ++j)
      ref.num_pool[j].push_back(train.num[r * train.n + j]);
  }
  return ref;
}

EncodedRows inject_noise(const EncodedRows& test, NoiseKind kind, double p,
                         const NoiseReference& ref, std::uint64_t seed,
                         bool* skipped) {
  if (p < 0.0 || p > 1.0)
    throw DataError("inject_noise: p must be in [0, 1]");
  if (skipped) *skipped = false;
  EncodedRows out = test;
  if (kind == NoiseKind::categorical && test.m == 0) {
    if (skipped) *skipped = true;  // nothing to corrupt; no-op with warning
    return out;
  }
  if (p == 0.0) return out;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  if (kind == NoiseKind::categorical) {
    for (std::size_t r = 0; r < out.rows; ++r)
      for (std::size_t j = 0; j < out.m; ++j)
        if (u(rng) < p) {
          const auto& pool = ref.cat_pool[j];
          std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
          out.cat[r * out.m + j] = pool[pick(rng)];
        }
  } else {
    for (std::size_t r = 0; r < out.rows; ++r)
      for (std::size_t j = 0; j < out.n; ++j)
        if (u(rng) < p) {
          const auto& pool = ref.num_pool[j];
          std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
          out.num[r * out.n + j] = pool[pick(rng)];
        }
  }
  return out;
}

EncodedRows EncodedRows::subset(const std::vector<std::size_t>& local_rows) const {
  EncodedRows out;
  out.rows = local_rows.size();
  out.m = m;
  out.n = n;
  out.cat.reserve(out.rows * m);
  out.num.reserve(out.rows * n);
  for (std::size_t r : local_rows) {
    if (r >= rows) throw DataError("EncodedRows::subset: row out of range");
    out.cat.insert(out.cat.end(), cat.begin() + r * m, cat.begin() + (r + 1) * m);
    out.num.insert(out.num.end(), num.begin() + r * n, num.begin() + (r + 1) * n);
    if (!y_bin.empty()) out.y_bin.push_back(y_bin[r]);
    if (!y_cls.empty()) out.y_cls.push_back(y_cls[r]);
    if (!y_reg.empty()) out.y_reg.push_back(y_reg[r]);
  }
  return out;
}

std::uint64_t fnv1a64(const std::string& text) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::vector<double> fit_medians(const Dataset& ds,
                                const std::vector<std::size_t>& indices,
                                FitAudit* audit) {
  if (audit) audit->check(indices);
  std::vector<double> medians(ds.num_cells.size(), 0.0);
  for (std::size_t j = 0; j < ds.num_cells.size(); ++j) {
    std::vector<double> vals;
    for (std::size_t i : indices) {
      double v = ds.num_cells[j][i];
      if (!std::isnan(v)) vals.push_back(v);
    }
    if (vals.empty())
      throw DataError("column " + std::to_string(j) +
                      ": no finite numerical values in the training fold");
    std::size_t mid = vals.size() / 2;
    std::nth_element(vals.begin(), vals.begin() + mid, vals.end());
    double hi = vals[mid];
    if (vals.size() % 2 == 0) {
      double lo = *std::max_element(vals.begin(), vals.begin() + mid);
      medians[j] = 0.5 * (lo + hi);
    } else {
      medians[j] = hi;
    }
  }
  return medians;
}

}  // namespace tabkanet

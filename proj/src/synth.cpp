#include "tabkanet/synth.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

namespace tabkanet {
namespace {

using Rng = std::mt19937_64;

double normal(Rng& rng) {
  static thread_local std::normal_distribution<double> d(0.0, 1.0);
  return d(rng);
}

double unif(Rng& rng) {
  static thread_local std::uniform_real_distribution<double> d(0.0, 1.0);
  return d(rng);
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Standard normal CDF, used to bucket latent scores into balanced levels.
double phi(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// Maps a latent to one of `levels` quantile buckets, with probability `flip`
// of drawing a uniformly random level instead.
int bucket(Rng& rng, double latent, int levels, double flip) {
  if (unif(rng) < flip) {
    return static_cast<int>(unif(rng) * levels) % levels;
  }
  int b = static_cast<int>(phi(latent) * levels);
  if (b >= levels) b = levels - 1;
  return b;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

struct RowBuf {
  std::vector<std::string> cells;
  void cat(int level) { cells.push_back("L" + std::to_string(level)); }
  void num(double v) { cells.push_back(fmt(v)); }
  void raw(std::string s) { cells.push_back(std::move(s)); }
};

struct TableBuf {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::string to_csv() const {
    std::ostringstream out;
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (i) out << ',';
      out << header[i];
    }
    out << '\n';
    for (const auto& r : rows) {
      for (std::size_t i = 0; i < r.size(); ++i) {
        if (i) out << ',';
        out << r[i];
      }
      out << '\n';
    }
    return out.str();
  }
};

std::string make_schema(const std::string& name, const std::string& task_line,
                        const std::string& positive,
                        const std::vector<std::pair<std::string, std::string>>& cols) {
  std::ostringstream out;
  out << "dataset " << name << '\n';
  out << "task " << task_line << '\n';
  if (!positive.empty()) out << "positive " << positive << '\n';
  for (const auto& [cname, kind] : cols) {
    out << "column " << cname << ' ' << kind << '\n';
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// credit-synth: 1,000 rows, 15 categorical + 5 numerical, binary.
//
// Moderate signal split between smooth numerical effects and a few
// informative categorical columns; the link scale is chosen so a well-fit
// model lands in the high-0.7 AUC range.
// ---------------------------------------------------------------------------
SynthFiles gen_credit(std::uint64_t seed) {
  constexpr int kRows = 1000;
  constexpr double kLink = 2.0;
  Rng rng(seed ^ 0x63726564ULL);

  TableBuf t;
  for (int j = 0; j < 15; ++j) t.header.push_back("cat" + std::to_string(j));
  t.header.insert(t.header.end(), {"age", "income", "balance", "ratio", "misc"});
  t.header.push_back("outcome");

  const int nuisance_k[12] = {2, 3, 4, 5, 6, 8, 10, 12, 2, 3, 4, 7};
  for (int r = 0; r < kRows; ++r) {
    double g0 = normal(rng), g1 = normal(rng), g2 = normal(rng);
    double g3 = normal(rng), g4 = normal(rng);
    double h0 = normal(rng), h1 = normal(rng), h2 = normal(rng);

    double score = 1.0 * g0 + 0.9 * std::sin(1.8 * g1) + 0.8 * std::tanh(1.5 * g2) +
                   0.6 * h0 + 0.5 * h1 + 0.4 * h2;
    int y = unif(rng) < sigmoid(kLink * score / 1.55) ? 1 : 0;

    RowBuf row;
    row.cat(bucket(rng, h0, 6, 0.05));
    row.cat(bucket(rng, h1, 4, 0.05));
    row.cat(bucket(rng, h2, 3, 0.05));
    for (int j = 0; j < 12; ++j) {
      // A sprinkling of missing cells exercises the missing-as-own-category
      // path without moving the signal.
      if (j == 5 && unif(rng) < 0.02) {
        row.raw("");
      } else {
        row.cat(static_cast<int>(unif(rng) * nuisance_k[j]) % nuisance_k[j]);
      }
    }
    row.num(35.0 + 10.0 * g0);
    row.num(std::exp(0.5 * g1 + 1.0));
    row.num(5.0 + 2.0 * g2);
    if (unif(rng) < 0.02) {
      row.raw("");  // missing numeric -> NaN -> median impute
    } else {
      row.num(std::exp(0.5 * g3));
    }
    row.num(g4);
    row.raw(y ? "yes" : "no");
    t.rows.push_back(std::move(row.cells));
  }

  std::vector<std::pair<std::string, std::string>> cols;
  for (int j = 0; j < 15; ++j) cols.emplace_back("cat" + std::to_string(j), "categorical");
  for (const char* n : {"age", "income", "balance", "ratio", "misc"})
    cols.emplace_back(n, "numerical");
  cols.emplace_back("outcome", "target");
  return {t.to_csv(), make_schema("credit-synth", "binary", "yes", cols)};
}

// ---------------------------------------------------------------------------
// biodeg-synth: 1,055 rows, 24 categorical + 17 numerical, binary.
//
// Strong, mostly additive signal across several numerical descriptors and a
// handful of small-cardinality categorical flags; tuned for low-0.9 AUC.
// ---------------------------------------------------------------------------
SynthFiles gen_biodeg(std::uint64_t seed) {
  constexpr int kRows = 1055;
  constexpr double kLink = 6.0;
  Rng rng(seed ^ 0x62696f64ULL);

  TableBuf t;
  for (int j = 0; j < 24; ++j) t.header.push_back("flag" + std::to_string(j));
  for (int j = 0; j < 17; ++j) t.header.push_back("desc" + std::to_string(j));
  t.header.push_back("label");

  for (int r = 0; r < kRows; ++r) {
    double g[17];
    for (double& v : g) v = normal(rng);
    double h[5];
    for (double& v : h) v = normal(rng);

    double score = 0.9 * g[0] + 0.8 * g[1] + 0.7 * g[2] +
                   0.6 * std::tanh(1.2 * g[3]) + 0.5 * g[4] + 0.4 * g[5] +
                   0.5 * h[0] + 0.45 * h[1] + 0.4 * h[2] + 0.3 * h[3] + 0.25 * h[4];
    int y = unif(rng) < sigmoid(kLink * score / 1.95) ? 1 : 0;

    RowBuf row;
    row.cat(bucket(rng, h[0], 4, 0.04));
    row.cat(bucket(rng, h[1], 3, 0.04));
    row.cat(bucket(rng, h[2], 4, 0.04));
    row.cat(bucket(rng, h[3], 2, 0.05));
    row.cat(bucket(rng, h[4], 5, 0.05));
    for (int j = 5; j < 24; ++j) {
      int k = 2 + (j % 3);
      row.cat(static_cast<int>(unif(rng) * k) % k);
    }
    for (int j = 0; j < 17; ++j) {
      double v;
      switch (j) {
        case 1: v = std::exp(0.7 * g[1]); break;          // right-skewed
        case 2: v = 10.0 + 4.0 * g[2]; break;
        case 3: v = 0.1 * g[3]; break;
        case 5: v = 2.0 * g[5] + 3.0; break;
        default: v = g[j]; break;
      }
      row.num(v);
    }
    row.raw(y ? "RB" : "NRB");
    t.rows.push_back(std::move(row.cells));
  }

  std::vector<std::pair<std::string, std::string>> cols;
  for (int j = 0; j < 24; ++j) cols.emplace_back("flag" + std::to_string(j), "categorical");
  for (int j = 0; j < 17; ++j) cols.emplace_back("desc" + std::to_string(j), "numerical");
  cols.emplace_back("label", "target");
  return {t.to_csv(), make_schema("biodeg-synth", "binary", "RB", cols)};
}

// ---------------------------------------------------------------------------
// shoppers-synth: 12,330 rows, 11 categorical + 6 numerical, binary.
//
// The numerical block carries most of the signal through oscillatory and
// interaction terms on features with wildly heterogeneous raw scales; the
// categorical block contributes a weak additive component. This makes the
// dataset sensitive to how numerical columns are normalized and embedded.
// ---------------------------------------------------------------------------
SynthFiles gen_shoppers(std::uint64_t seed) {
  constexpr int kRows = 12330;
  constexpr double kLink = 3.0;
  Rng rng(seed ^ 0x73686f70ULL);

  TableBuf t;
  for (int j = 0; j < 11; ++j) t.header.push_back("page" + std::to_string(j));
  t.header.insert(t.header.end(),
                  {"dwell", "revenue", "rate", "delta", "count", "share"});
  t.header.push_back("purchase");

  const int nuisance_k[8] = {12, 8, 13, 9, 4, 3, 6, 2};
  for (int r = 0; r < kRows; ++r) {
    double g[6];
    for (double& v : g) v = normal(rng);
    double h[3];
    for (double& v : h) v = normal(rng);

    // High-frequency terms sit on linearly scaled columns, so they survive
    // z-scoring intact; smooth low-capacity terms and the categorical block
    // carry the remainder.
    double s_num = 1.2 * std::sin(4.6 * g[0]) + 1.1 * std::sin(4.2 * g[1] + 0.4) +
                   1.0 * std::sin(4.4 * g[3]) + 0.35 * std::tanh(1.2 * g[2]) +
                   0.3 * std::tanh(1.5 * g[4]) + 0.2 * g[5];
    double s_cat = 0.5 * h[0] + 0.4 * h[1] + 0.3 * h[2];
    double score = s_num + s_cat;
    int y = unif(rng) < sigmoid(kLink * score / 1.55) ? 1 : 0;

    RowBuf row;
    row.cat(bucket(rng, h[0], 2, 0.08));
    row.cat(bucket(rng, h[1], 5, 0.10));
    row.cat(bucket(rng, h[2], 3, 0.10));
    for (int j = 0; j < 8; ++j) {
      row.cat(static_cast<int>(unif(rng) * nuisance_k[j]) % nuisance_k[j]);
    }
    row.num(3.0 + 1.0 * g[0]);
    row.num(2000.0 + 450.0 * g[1]);
    row.num(std::exp(0.8 * g[2] + 1.0));
    row.num(0.01 * g[3]);
    row.num(100.0 + 50.0 * g[4]);
    row.num(std::exp(0.6 * g[5]));
    row.raw(y ? "yes" : "no");
    t.rows.push_back(std::move(row.cells));
  }

  std::vector<std::pair<std::string, std::string>> cols;
  for (int j = 0; j < 11; ++j) cols.emplace_back("page" + std::to_string(j), "categorical");
  for (const char* n : {"dwell", "revenue", "rate", "delta", "count", "share"})
    cols.emplace_back(n, "numerical");
  cols.emplace_back("purchase", "target");
  return {t.to_csv(), make_schema("shoppers-synth", "binary", "yes", cols)};
}

// ---------------------------------------------------------------------------
// Toy datasets for unit tests.
// ---------------------------------------------------------------------------
SynthFiles gen_blobs_binary(std::uint64_t seed) {
  Rng rng(seed ^ 0x626c6f62ULL);
  TableBuf t;
  t.header = {"x0", "x1", "y"};
  for (int r = 0; r < 240; ++r) {
    int y = r % 2;
    double cx = y ? 2.0 : -2.0;
    RowBuf row;
    row.num(cx + normal(rng));
    row.num(cx + normal(rng));
    row.raw(y ? "pos" : "neg");
    t.rows.push_back(std::move(row.cells));
  }
  std::vector<std::pair<std::string, std::string>> cols = {
      {"x0", "numerical"}, {"x1", "numerical"}, {"y", "target"}};
  return {t.to_csv(), make_schema("blobs-binary", "binary", "pos", cols)};
}

SynthFiles gen_blobs_multiclass(std::uint64_t seed) {
  Rng rng(seed ^ 0x626c6233ULL);
  const double cx[3] = {-3.0, 0.0, 3.0};
  const double cy[3] = {0.0, 3.0, -3.0};
  TableBuf t;
  t.header = {"x0", "x1", "y"};
  for (int r = 0; r < 300; ++r) {
    int y = r % 3;
    RowBuf row;
    row.num(cx[y] + normal(rng) * 0.8);
    row.num(cy[y] + normal(rng) * 0.8);
    row.raw("c" + std::to_string(y));
    t.rows.push_back(std::move(row.cells));
  }
  std::vector<std::pair<std::string, std::string>> cols = {
      {"x0", "numerical"}, {"x1", "numerical"}, {"y", "target"}};
  return {t.to_csv(), make_schema("blobs-multiclass", "multiclass 3", "", cols)};
}

SynthFiles gen_linear_regression(std::uint64_t seed) {
  Rng rng(seed ^ 0x72656772ULL);
  TableBuf t;
  t.header = {"x0", "x1", "x2", "y"};
  for (int r = 0; r < 400; ++r) {
    double a = normal(rng), b = normal(rng), c = normal(rng);
    double y = 2.0 * a - 1.0 * b + 0.5 * c + 0.1 * normal(rng);
    RowBuf row;
    row.num(a);
    row.num(b);
    row.num(c);
    row.num(y);
    t.rows.push_back(std::move(row.cells));
  }
  std::vector<std::pair<std::string, std::string>> cols = {
      {"x0", "numerical"}, {"x1", "numerical"}, {"x2", "numerical"}, {"y", "target"}};
  return {t.to_csv(), make_schema("linear-regression", "regression", "", cols)};
}

}  // namespace

std::vector<std::string> synth_dataset_names() {
  return {"credit-synth", "biodeg-synth",     "shoppers-synth",
          "blobs-binary", "blobs-multiclass", "linear-regression"};
}

SynthFiles generate_dataset(const std::string& name, std::uint64_t seed) {
  if (name == "credit-synth") return gen_credit(seed);
  if (name == "biodeg-synth") return gen_biodeg(seed);
  if (name == "shoppers-synth") return gen_shoppers(seed);
  if (name == "blobs-binary") return gen_blobs_binary(seed);
  if (name == "blobs-multiclass") return gen_blobs_multiclass(seed);
  if (name == "linear-regression") return gen_linear_regression(seed);
  throw std::invalid_argument("unknown synthetic dataset: " + name);
}

void write_dataset(const std::string& name, const std::string& csv_path,
                   const std::string& schema_path, std::uint64_t seed) {
  SynthFiles files = generate_dataset(name, seed);
  std::ofstream csv(csv_path, std::ios::binary);
  if (!csv) throw std::runtime_error("cannot write " + csv_path);
  csv << files.csv;
  std::ofstream schema(schema_path, std::ios::binary);
  if (!schema) throw std::runtime_error("cannot write " + schema_path);
  schema << files.schema;
}

}  // namespace tabkanet

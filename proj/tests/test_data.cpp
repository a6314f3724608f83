#include <algorithm>
#include <cmath>
#include <set>

#include "doctest.h"
#include "tabkanet/data.hpp"
#include "tabkanet/synth.hpp"

using namespace tabkanet;

namespace {

const char* kToySchema = R"(# toy schema
dataset toy
task binary
positive yes
column color categorical
column size numerical
column label target
)";

const char* kToyCsv =
    "color,size,extra,label\n"
    "red,1.5,ignored,yes\n"
    "\"bl,ue\",2.5,ignored,no\n"
    "\"say \"\"hi\"\"\",N/A,ignored,yes\n"
    "red,4.5,ignored,no\n";

}  // namespace

TEST_CASE("schema: grammar round-trip and validation") {
  TableSchema s = parse_schema(kToySchema);
  CHECK(s.dataset_name == "toy");
  CHECK(s.task == TaskKind::binary);
  CHECK(s.positive_label == "yes");
  CHECK(s.num_categorical() == 1);
  CHECK(s.num_numerical() == 1);
  CHECK_NOTHROW(s.validate());

  // canonical text is stable, so the schema hash is too
  CHECK(parse_schema(s.canonical_text()).canonical_text() == s.canonical_text());

  CHECK_THROWS_AS(parse_schema("dataset x\ntask binary\npositive p\n"
                               "column a target\ncolumn b target\n"),
                  DataError);
  CHECK_THROWS_AS(parse_schema("dataset x\ntask binary\npositive p\n"
                               "column only target\n"),
                  DataError);
  CHECK_THROWS_AS(parse_schema("dataset x\ntask juggling\n"), DataError);

  TableSchema mc = parse_schema("dataset m\ntask multiclass 7\n"
                                "column a numerical\ncolumn y target\n");
  CHECK(mc.task == TaskKind::multiclass);
  CHECK(mc.n_classes == 7);
}

TEST_CASE("csv: quoting, column matching, missing numerics") {
  TableSchema s = parse_schema(kToySchema);
  Dataset ds = parse_csv(kToyCsv, s);
  CHECK(ds.n_rows == 4);
  CHECK(ds.cat_cells[0][1] == "bl,ue");
  CHECK(ds.cat_cells[0][2] == "say \"hi\"");
  CHECK(ds.num_cells[0][0] == doctest::Approx(1.5));
  CHECK(std::isnan(ds.num_cells[0][2]));  // "N/A" -> missing
  CHECK(ds.target_cls == std::vector<std::size_t>{1, 0, 1, 0});

  CHECK_THROWS_AS(parse_csv("color,size,label\n", s), DataError);  // empty data
  CHECK_THROWS_AS(parse_csv("color,label\n a,yes\n", s), DataError);  // no size
}

TEST_CASE("csv: generated benchmark table has the expected census") {
  SynthFiles files = generate_dataset("credit-synth", 7);
  TableSchema s = parse_schema(files.schema);
  CHECK(s.columns.size() == 21);  // 20 features + target
  CHECK(s.num_categorical() == 15);
  CHECK(s.num_numerical() == 5);
  Dataset ds = parse_csv(files.csv, s);
  CHECK(ds.n_rows == 1000);
}

TEST_CASE("folds: 60/20/20 rotation partitions the rows") {
  std::vector<std::size_t> y(1000);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = i % 2;
  bool stratified = false;
  auto folds = make_folds(1000, 42, &y, &stratified);
  CHECK(stratified);
  REQUIRE(folds.size() == 5);

  std::set<std::size_t> all_test;
  for (const auto& f : folds) {
    CHECK(f.train.size() == 600);
    CHECK(f.val.size() == 200);
    CHECK(f.test.size() == 200);
    std::set<std::size_t> seen(f.train.begin(), f.train.end());
    seen.insert(f.val.begin(), f.val.end());
    seen.insert(f.test.begin(), f.test.end());
    CHECK(seen.size() == 1000);  // train/val/test are disjoint and exhaustive
    for (std::size_t t : f.test) {
      CHECK(all_test.insert(t).second);  // test sets are pairwise disjoint
    }
    // stratification keeps the 50/50 class balance in every part
    std::size_t pos = 0;
    for (std::size_t t : f.test) pos += y[t];
    CHECK(pos == 100);
  }
  CHECK(all_test.size() == 1000);

  auto again = make_folds(1000, 42, &y, nullptr);
  for (std::size_t f = 0; f < 5; ++f) {
    CHECK(again[f].train == folds[f].train);
    CHECK(again[f].val == folds[f].val);
    CHECK(again[f].test == folds[f].test);
  }
  auto other = make_folds(1000, 43, &y, nullptr);
  CHECK(other[0].test != folds[0].test);

  // a class with < 5 members falls back to a random split
  std::vector<std::size_t> rare(20, 0);
  rare[3] = 1;
  auto fb = make_folds(20, 1, &rare, &stratified);
  CHECK_FALSE(stratified);
  CHECK(fb.size() == 5);
}

TEST_CASE("fit audit trips on rows outside the training fold") {
  FitAudit audit;
  audit.set_allowed({0, 1, 2, 5});
  audit.check({2, 0, 5});
  CHECK_FALSE(audit.tripped());
  audit.check({2, 3});
  CHECK(audit.tripped());
}

TEST_CASE("noise: p=0 is the identity, p=1 degenerate pool is invisible") {
  EncodedRows rows;
  rows.rows = 4;
  rows.m = 1;
  rows.n = 1;
  rows.cat = {0, 1, 0, 1};
  rows.num = {1.0, 2.0, 3.0, 4.0};
  rows.y_bin = {0, 1, 0, 1};

  NoiseReference ref;
  ref.cat_pool = {{0, 1}};
  ref.num_pool = {{7.5}};  // single-valued training column

  bool skipped = true;
  EncodedRows clean = inject_noise(rows, NoiseKind::categorical, 0.0, ref, 9, &skipped);
  CHECK_FALSE(skipped);
  CHECK(clean.cat == rows.cat);
  CHECK(clean.num == rows.num);

  EncodedRows swapped = inject_noise(rows, NoiseKind::numerical, 1.0, ref, 9, nullptr);
  CHECK(swapped.num == std::vector<double>(4, 7.5));
  CHECK(swapped.cat == rows.cat);  // other kind untouched

  EncodedRows nocat = rows;
  nocat.m = 0;
  nocat.cat.clear();
  inject_noise(nocat, NoiseKind::categorical, 0.5, ref, 9, &skipped);
  CHECK(skipped);  // no categorical columns to corrupt
}

TEST_CASE("noise: p=0.5 corrupts about half of a 1000x6 numerical block") {
  EncodedRows rows;
  rows.rows = 1000;
  rows.m = 0;
  rows.n = 6;
  rows.num.assign(1000 * 6, -999.0);  // marker value absent from the pool
  rows.y_bin.assign(1000, 0.0);

  NoiseReference ref;
  std::mt19937_64 rng(3);
  ref.num_pool.resize(6);
  for (auto& pool : ref.num_pool) {
    std::uniform_real_distribution<double> d(0.0, 1.0);
    for (int i = 0; i < 600; ++i) pool.push_back(d(rng));
  }

  EncodedRows noisy = inject_noise(rows, NoiseKind::numerical, 0.5, ref, 11, nullptr);
  std::size_t changed = 0;
  for (double v : noisy.num) changed += (v != -999.0);
  double frac = static_cast<double>(changed) / (1000.0 * 6.0);
  CHECK(frac == doctest::Approx(0.5).epsilon(0.1));
  CHECK(std::fabs(frac - 0.5) <= 0.05);

  // per-seed determinism
  EncodedRows again = inject_noise(rows, NoiseKind::numerical, 0.5, ref, 11, nullptr);
  CHECK(again.num == noisy.num);
}

TEST_CASE("fnv1a64 matches the published reference values") {
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
}

TEST_CASE("medians: fitted on the given rows only") {
  TableSchema s = parse_schema(kToySchema);
  Dataset ds = parse_csv(kToyCsv, s);
  FitAudit audit;
  audit.set_allowed({0, 1, 3});
  std::vector<double> med = fit_medians(ds, {0, 1, 3}, &audit);
  REQUIRE(med.size() == 1);
  CHECK(med[0] == doctest::Approx(2.5));
  CHECK_FALSE(audit.tripped());
  fit_medians(ds, {0, 2}, &audit);
  CHECK(audit.tripped());
}

#include <algorithm>
#include <cmath>
#include <random>

#include "doctest.h"
#include "tabkanet/metrics.hpp"

using namespace tabkanet;

namespace {

// O(N^2) oracle straight from the definition: P(s+ > s-) + 0.5 P(tie).
double auc_pairwise(const std::vector<double>& s, const std::vector<int>& y) {
  double wins = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!y[i]) continue;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (y[j]) continue;
      ++pairs;
      if (s[i] > s[j])
        wins += 1.0;
      else if (s[i] == s[j])
        wins += 0.5;
    }
  }
  return wins / static_cast<double>(pairs);
}

// Confusion-matrix oracle for macro F1.
double macro_f1_oracle(const std::vector<std::size_t>& p,
                       const std::vector<std::size_t>& l, std::size_t C) {
  std::vector<std::vector<double>> cm(C, std::vector<double>(C, 0.0));
  for (std::size_t i = 0; i < p.size(); ++i) cm[l[i]][p[i]] += 1;
  double total = 0.0;
  for (std::size_t c = 0; c < C; ++c) {
    double tp = cm[c][c], row = 0, col = 0;
    for (std::size_t j = 0; j < C; ++j) {
      row += cm[c][j];
      col += cm[j][c];
    }
    double prec = col > 0 ? tp / col : 0.0;
    double rec = row > 0 ? tp / row : 0.0;
    total += (prec + rec) > 0 ? 2 * prec * rec / (prec + rec) : 0.0;
  }
  return total / static_cast<double>(C);
}

}  // namespace

TEST_CASE("auc trivial cases") {
  CHECK(auc({0.1, 0.2, 0.8, 0.9}, {0, 0, 1, 1}) == doctest::Approx(1.0));
  CHECK(auc({0.5, 0.5, 0.5, 0.5}, {0, 1, 0, 1}) == doctest::Approx(0.5));
  CHECK_THROWS_AS(auc({0.1, 0.2}, {1, 1}), std::invalid_argument);
}

TEST_CASE("auc matches the pairwise oracle on 100 random instances") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0, 1);
  std::uniform_int_distribution<int> coin(0, 1);
  std::uniform_int_distribution<int> quant(1, 9);
  for (int trial = 0; trial < 100; ++trial) {
    std::size_t n = 20 + trial;
    std::vector<double> s(n);
    std::vector<int> y(n);
    bool any0 = false, any1 = false;
    for (std::size_t i = 0; i < n; ++i) {
      // quantized scores force plenty of ties
      s[i] = trial % 2 ? u(rng) : quant(rng) / 10.0;
      y[i] = coin(rng);
      (y[i] ? any1 : any0) = true;
    }
    if (!any0) y[0] = 0;
    if (!any1) y[1] = 1;
    CHECK(std::fabs(auc(s, y) - auc_pairwise(s, y)) <= 1e-12);
  }
}

TEST_CASE("auc invariances") {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(-2, 2);
  std::vector<double> s(60);
  std::vector<int> y(60);
  for (std::size_t i = 0; i < s.size(); ++i) {
    s[i] = u(rng);
    y[i] = i % 3 == 0;
  }
  double base = auc(s, y);
  std::vector<double> mono(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) mono[i] = std::exp(3.0 * s[i]) + 1;
  CHECK(auc(mono, y) == doctest::Approx(base).epsilon(1e-12));
  std::vector<int> flip(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) flip[i] = 1 - y[i];
  CHECK(auc(s, y) + auc(s, flip) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("macro F1 and accuracy analytic cases") {
  std::vector<std::size_t> perfect{0, 1, 2, 3, 4, 5, 6};
  CHECK(macro_f1(perfect, perfect, 7) == doctest::Approx(1.0));
  CHECK(accuracy(perfect, perfect) == doctest::Approx(1.0));

  // all predictions class 0 on balanced binary labels: F1 = (2/3 + 0) / 2
  std::vector<std::size_t> preds{0, 0, 0, 0};
  std::vector<std::size_t> labels{0, 0, 1, 1};
  CHECK(macro_f1(preds, labels, 2) == doctest::Approx(1.0 / 3).epsilon(1e-12));
  CHECK(accuracy(preds, labels) == doctest::Approx(0.5));
  CHECK(balanced_accuracy(preds, labels, 2) == doctest::Approx(0.5));
}

TEST_CASE("macro F1 matches the confusion-matrix oracle") {
  std::mt19937_64 rng(31);
  std::uniform_int_distribution<std::size_t> cls(0, 6);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::size_t> p(500), l(500);
    for (std::size_t i = 0; i < 500; ++i) {
      p[i] = cls(rng);
      l[i] = cls(rng);
    }
    CHECK(std::fabs(macro_f1(p, l, 7) - macro_f1_oracle(p, l, 7)) <= 1e-12);
  }
}

TEST_CASE("macro F1 invariant under class relabeling") {
  std::mt19937_64 rng(37);
  std::uniform_int_distribution<std::size_t> cls(0, 4);
  std::vector<std::size_t> p(200), l(200);
  for (std::size_t i = 0; i < 200; ++i) {
    p[i] = cls(rng);
    l[i] = cls(rng);
  }
  std::vector<std::size_t> perm{3, 0, 4, 1, 2};
  std::vector<std::size_t> p2(200), l2(200);
  for (std::size_t i = 0; i < 200; ++i) {
    p2[i] = perm[p[i]];
    l2[i] = perm[l[i]];
  }
  CHECK(macro_f1(p, l, 5) == doctest::Approx(macro_f1(p2, l2, 5)).epsilon(1e-12));
}

TEST_CASE("rmse analytic and two-pass oracle") {
  CHECK(rmse({1, 2, 3}, {1, 2, 3}) == doctest::Approx(0.0));
  CHECK(rmse({0, 0}, {3, 4}) == doctest::Approx(std::sqrt(12.5)).epsilon(1e-12));

  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> u(-5, 5);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> p(64), t(64);
    for (std::size_t i = 0; i < 64; ++i) {
      p[i] = u(rng);
      t[i] = u(rng);
    }
    double mse = 0;
    for (std::size_t i = 0; i < 64; ++i) mse += (p[i] - t[i]) * (p[i] - t[i]);
    CHECK(std::fabs(rmse(p, t) - std::sqrt(mse / 64)) <= 1e-12);
  }
}

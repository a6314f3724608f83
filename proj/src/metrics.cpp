#include "tabkanet/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace tabkanet {

double auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size())
    throw std::invalid_argument("auc: size mismatch");
  std::size_t n_pos = 0, n_neg = 0;
  for (int l : labels) (l ? n_pos : n_neg)++;
  if (n_pos == 0 || n_neg == 0)
    throw std::invalid_argument("auc: undefined for single-class labels");

  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // average ranks over tie groups, accumulate positive rank sum
  double pos_rank_sum = 0.0;
  std::size_t i = 0;
  while (i < idx.size()) {
    std::size_t j = i;
    while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) ++j;
    double avg_rank = 0.5 * static_cast<double>(i + 1 + j);  // 1-based
    for (std::size_t t = i; t < j; ++t)
      if (labels[idx[t]]) pos_rank_sum += avg_rank;
    i = j;
  }
  double np = static_cast<double>(n_pos), nn = static_cast<double>(n_neg);
  return (pos_rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
}

double macro_f1(const std::vector<std::size_t>& preds,
                const std::vector<std::size_t>& labels,
                std::size_t n_classes) {
  if (preds.size() != labels.size())
    throw std::invalid_argument("macro_f1: size mismatch");
  std::vector<double> tp(n_classes, 0), fp(n_classes, 0), fn(n_classes, 0);
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (preds[i] >= n_classes || labels[i] >= n_classes)
      throw std::out_of_range("macro_f1: class id out of range");
    if (preds[i] == labels[i]) {
      tp[preds[i]] += 1;
    } else {
      fp[preds[i]] += 1;
      fn[labels[i]] += 1;
    }
  }
  double total = 0.0;
  for (std::size_t c = 0; c < n_classes; ++c) {
    double denom = 2.0 * tp[c] + fp[c] + fn[c];
    total += denom > 0.0 ? 2.0 * tp[c] / denom : 0.0;
  }
  return total / static_cast<double>(n_classes);
}

double accuracy(const std::vector<std::size_t>& preds,
                const std::vector<std::size_t>& labels) {
  if (preds.size() != labels.size() || preds.empty())
    throw std::invalid_argument("accuracy: bad sizes");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < preds.size(); ++i)
    if (preds[i] == labels[i]) ++correct;
  return static_cast<double>(correct) / static_cast<double>(preds.size());
}

double balanced_accuracy(const std::vector<std::size_t>& preds,
                         const std::vector<std::size_t>& labels,
                         std::size_t n_classes) {
  std::vector<double> correct(n_classes, 0), count(n_classes, 0);
  for (std::size_t i = 0; i < preds.size(); ++i) {
    count[labels[i]] += 1;
    if (preds[i] == labels[i]) correct[labels[i]] += 1;
  }
  double total = 0.0;
  std::size_t present = 0;
  for (std::size_t c = 0; c < n_classes; ++c) {
    if (count[c] > 0) {
      total += correct[c] / count[c];
      ++present;
    }
  }
  if (present == 0) throw std::invalid_argument("balanced_accuracy: no labels");
  return total / static_cast<double>(present);
}

double rmse(const std::vector<double>& preds,
            const std::vector<double>& targets) {
  if (preds.size() != targets.size() || preds.empty())
    throw std::invalid_argument("rmse: bad sizes");
  double sq = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    double d = preds[i] - targets[i];
    sq += d * d;
  }
  return std::sqrt(sq / static_cast<double>(preds.size()));
}

}  // namespace tabkanet

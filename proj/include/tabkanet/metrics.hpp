#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace tabkanet {

struct MetricReport {
  std::string name;
  double value = 0.0;
  std::size_t fold_index = 0;
  std::size_t n_samples = 0;
};

// Mann-Whitney rank AUC with ties counting half, O(N log N).
// Throws if only one class is present.
double auc(const std::vector<double>& scores, const std::vector<int>& labels);

// Unweighted average of per-class F1; classes absent from both predictions
// and labels contribute F1 = 0.
double macro_f1(const std::vector<std::size_t>& preds,
                const std::vector<std::size_t>& labels, std::size_t n_classes);

double accuracy(const std::vector<std::size_t>& preds,
                const std::vector<std::size_t>& labels);

// Macro-averaged recall, reported alongside plain accuracy.
double balanced_accuracy(const std::vector<std::size_t>& preds,
                         const std::vector<std::size_t>& labels,
                         std::size_t n_classes);

double rmse(const std::vector<double>& preds,
            const std::vector<double>& targets);

}  // namespace tabkanet

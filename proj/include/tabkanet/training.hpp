#pragma once

#include <string>
#include <vector>

#include "tabkanet/model.hpp"

namespace tabkanet {

struct DivergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class OptimizerKind { adamw, sgd };

struct OptimizerState {
  OptimizerKind kind = OptimizerKind::adamw;
  double lr = 1e-3;
  double beta1 = 0.9, beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-4;
  double momentum = 0.0;  // sgd
  std::size_t step_count = 0;
  std::vector<std::vector<double>> m1, m2;  // shape-matched moment buffers

  static OptimizerState adamw(double lr = 1e-3, double weight_decay = 1e-4);
  static OptimizerState sgd(double lr = 1e-4, double momentum = 0.0);
};

// One decoupled-weight-decay Adam step over named parameters; gradients are
// read from each tensor's grad buffer. Throws DivergenceError on NaN grads.
void adamw_step(OptimizerState& state,
                std::vector<std::pair<std::string, Tensor>>& params);
void sgd_step(OptimizerState& state,
              std::vector<std::pair<std::string, Tensor>>& params);
void optimizer_step(OptimizerState& state,
                    std::vector<std::pair<std::string, Tensor>>& params);

// Global-norm gradient clipping; returns the pre-clip norm.
double clip_gradients(std::vector<std::pair<std::string, Tensor>>& params,
                      double max_norm);

struct TrainConfig {
  std::size_t batch_size = 128;
  std::size_t max_epochs = 200;
  std::size_t patience = 20;
  double lr = 1e-3;           // adamw (classification)
  double sgd_lr = 1e-4;       // regression
  double weight_decay = 1e-4;
  double clip_norm = 1.0;
  std::uint64_t seed = 0;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_metric = 0.0;
  double wall_ms = 0.0;
  bool eval_mode = false;  // validation ran with train-mode batch statistics?
};

struct TrainResult {
  std::vector<EpochRecord> history;
  double best_val_metric = 0.0;
  std::size_t best_epoch = 0;
};

// Higher validation metric is better for classification, lower for
// regression.
bool metric_improves(TaskKind task, double candidate, double incumbent);
std::string metric_name(TaskKind task);

// Scores in eval mode: binary -> logit column, multiclass -> argmax ids in
// `preds` plus raw logits, regression -> predictions.
std::vector<double> predict_scores(Model& model, const EncodedRows& rows,
                                   std::vector<std::size_t>* class_preds = nullptr,
                                   std::size_t eval_batch = 256);

double evaluate_metric(Model& model, const EncodedRows& rows);

// Full loop: shuffled mini-batches, per-epoch validation, best-checkpoint
// selection, early stopping. The model is left holding the best checkpoint.
TrainResult train(Model& model, const EncodedRows& train_rows,
                  const EncodedRows& val_rows, const TrainConfig& config,
                  FitAudit* audit = nullptr,
                  const std::vector<std::size_t>* train_row_ids = nullptr);

}  // namespace tabkanet

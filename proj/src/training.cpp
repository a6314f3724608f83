#include "tabkanet/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>

#include "tabkanet/metrics.hpp"

namespace tabkanet {

OptimizerState OptimizerState::adamw(double lr, double weight_decay) {
  OptimizerState s;
  s.kind = OptimizerKind::adamw;
  s.lr = lr;
  s.weight_decay = weight_decay;
  return s;
}

OptimizerState OptimizerState::sgd(double lr, double momentum) {
  OptimizerState s;
  s.kind = OptimizerKind::sgd;
  s.lr = lr;
  s.momentum = momentum;
  return s;
}

namespace {

void ensure_buffers(OptimizerState& state,
                    std::vector<std::pair<std::string, Tensor>>& params,
                    bool second_moment) {
  if (state.m1.size() == params.size()) return;
  state.m1.clear();
  state.m2.clear();
  for (auto& [name, t] : params) {
    state.m1.emplace_back(t.numel(), 0.0);
    if (second_moment) state.m2.emplace_back(t.numel(), 0.0);
  }
}

void check_finite_grads(std::vector<std::pair<std::string, Tensor>>& params) {
  for (auto& [name, t] : params) {
    for (double g : t.grad()) {
      if (!std::isfinite(g))
        throw DivergenceError("non-finite gradient in parameter '" + name +
                              "'");
    }
  }
}

}  // namespace

void adamw_step(OptimizerState& state,
                std::vector<std::pair<std::string, Tensor>>& params) {
  ensure_buffers(state, params, true);
  check_finite_grads(params);
  state.step_count += 1;
  double t = static_cast<double>(state.step_count);
  double bc1 = 1.0 - std::pow(state.beta1, t);
  double bc2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t p = 0; p < params.size(); ++p) {
    Tensor& w = params[p].second;
    const auto& g = w.grad();
    auto& m = state.m1[p];
    auto& v = state.m2[p];
    for (std::size_t i = 0; i < g.size(); ++i) {
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
      double mhat = m[i] / bc1;
      double vhat = v[i] / bc2;
      // decoupled weight decay
      w.values()[i] -= state.lr * (mhat / (std::sqrt(vhat) + state.eps) +
                                   state.weight_decay * w.values()[i]);
    }
  }
}

void sgd_step(OptimizerState& state,
              std::vector<std::pair<std::string, Tensor>>& params) {
  ensure_buffers(state, params, false);
  check_finite_grads(params);
  state.step_count += 1;
  for (std::size_t p = 0; p < params.size(); ++p) {
    Tensor& w = params[p].second;
    const auto& g = w.grad();
    auto& m = state.m1[p];
    for (std::size_t i = 0; i < g.size(); ++i) {
      m[i] = state.momentum * m[i] + g[i];
      w.values()[i] -= state.lr * m[i];
    }
  }
}

void optimizer_step(OptimizerState& state,
                    std::vector<std::pair<std::string, Tensor>>& params) {
  if (state.kind == OptimizerKind::adamw)
    adamw_step(state, params);
  else
    sgd_step(state, params);
}

double clip_gradients(std::vector<std::pair<std::string, Tensor>>& params,
                      double max_norm) {
  double sq = 0.0;
  for (auto& [name, t] : params)
    for (double g : t.grad()) sq += g * g;
  double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    double f = max_norm / norm;
    for (auto& [name, t] : params)
      for (double& g : t.raw()->grad) g *= f;
  }
  return norm;
}

bool metric_improves(TaskKind task, double candidate, double incumbent) {
  return task == TaskKind::regression ? candidate < incumbent
                                      : candidate > incumbent;
}

std::string metric_name(TaskKind task) {
  switch (task) {
    case TaskKind::binary: return "auc";
    case TaskKind::multiclass: return "macro_f1";
    case TaskKind::regression: return "rmse";
  }
  return "?";
}

std::vector<double> predict_scores(Model& model, const EncodedRows& rows,
                                   std::vector<std::size_t>* class_preds,
                                   std::size_t eval_batch) {
  NoGradGuard ng;
  std::vector<double> scores;
  scores.reserve(rows.rows);
  if (class_preds) class_preds->clear();
  for (std::size_t start = 0; start < rows.rows; start += eval_batch) {
    std::size_t count = std::min(eval_batch, rows.rows - start);
    std::vector<std::size_t> local(count);
    std::iota(local.begin(), local.end(), start);
    EncodedRows batch = rows.subset(local);
    Tensor out = model_forward(model, batch, /*train=*/false);
    std::size_t C = out.numel() / count;
    for (std::size_t r = 0; r < count; ++r) {
      if (C == 1) {
        scores.push_back(out.values()[r]);
      } else {
        const double* z = out.values().data() + r * C;
        std::size_t arg = static_cast<std::size_t>(
            std::max_element(z, z + C) - z);
        scores.push_back(z[arg]);
        if (class_preds) class_preds->push_back(arg);
      }
    }
  }
  return scores;
}

double evaluate_metric(Model& model, const EncodedRows& rows) {
  switch (model.spec.task) {
    case TaskKind::binary: {
      std::vector<double> scores = predict_scores(model, rows);
      std::vector<int> labels(rows.rows);
      for (std::size_t i = 0; i < rows.rows; ++i)
        labels[i] = rows.y_bin[i] > 0.5 ? 1 : 0;
      return auc(scores, labels);
    }
    case TaskKind::multiclass: {
      std::vector<std::size_t> preds;
      predict_scores(model, rows, &preds);
      return macro_f1(preds, rows.y_cls, model.spec.n_classes);
    }
    case TaskKind::regression:
      return rmse(predict_scores(model, rows), rows.y_reg);
  }
  throw std::logic_error("evaluate_metric: unreachable");
}

TrainResult train(Model& model, const EncodedRows& train_rows,
                  const EncodedRows& val_rows, const TrainConfig& config,
                  FitAudit* audit,
                  const std::vector<std::size_t>* train_row_ids) {
  if (config.batch_size < 2)
    throw std::invalid_argument("train: batch size must be >= 2");

  // baseline z-scoring fits on the training fold only
  if (model.spec.n > 0 &&
      (model.spec.arch == Arch::mlp || model.spec.arch == Arch::kan)) {
    if (audit && train_row_ids) audit->check(*train_row_ids);
    std::size_t n = train_rows.n;
    std::vector<double> mean(n, 0.0), stddev(n, 0.0);
    for (std::size_t r = 0; r < train_rows.rows; ++r)
      for (std::size_t j = 0; j < n; ++j) mean[j] += train_rows.num[r * n + j];
    for (double& v : mean) v /= static_cast<double>(train_rows.rows);
    for (std::size_t r = 0; r < train_rows.rows; ++r)
      for (std::size_t j = 0; j < n; ++j) {
        double d = train_rows.num[r * n + j] - mean[j];
        stddev[j] += d * d;
      }
    for (double& v : stddev)
      v = std::sqrt(v / static_cast<double>(train_rows.rows));
    set_feature_stats(model, mean, stddev);
  }

  auto params = model.named_params();
  OptimizerState opt =
      model.spec.task == TaskKind::regression
          ? OptimizerState::sgd(config.sgd_lr)
          : OptimizerState::adamw(config.lr, config.weight_decay);

  std::mt19937_64 shuffle_rng(config.seed);
  TrainResult result;
  double best = model.spec.task == TaskKind::regression
                    ? std::numeric_limits<double>::infinity()
                    : -std::numeric_limits<double>::infinity();
  std::vector<std::vector<double>> best_snap;
  std::size_t epochs_since_best = 0;

  std::vector<std::size_t> order(train_rows.rows);
  std::iota(order.begin(), order.end(), 0);

  for (std::size_t epoch = 0; epoch < config.max_epochs; ++epoch) {
    auto t0 = std::chrono::steady_clock::now();
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size();
         start += config.batch_size) {
      std::size_t count = std::min(config.batch_size, order.size() - start);
      if (count < 2) break;  // BN needs >= 2 rows in train mode
      std::vector<std::size_t> local(order.begin() + start,
                                     order.begin() + start + count);
      if (audit && train_row_ids) {
        std::vector<std::size_t> global(count);
        for (std::size_t i = 0; i < count; ++i)
          global[i] = (*train_row_ids)[local[i]];
        audit->check(global);
      }
      EncodedRows batch = train_rows.subset(local);
      for (auto& [name, t] : params) t.zero_grad();
      Tensor out = model_forward(model, batch, /*train=*/true);
      Tensor loss = model_loss(model.spec.task, out, batch);
      double lv = loss.item();
      if (!std::isfinite(lv))
        throw DivergenceError("non-finite training loss at epoch " +
                              std::to_string(epoch));
      backward(loss);
      clip_gradients(params, config.clip_norm);
      optimizer_step(opt, params);
      loss_sum += lv;
      ++batches;
    }

    double val_metric = evaluate_metric(model, val_rows);
    auto t1 = std::chrono::steady_clock::now();
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = batches ? loss_sum / static_cast<double>(batches) : 0.0;
    rec.val_metric = val_metric;
    rec.wall_ms =
        std::chrono::duration<double, std::milli>(t1 - t0).count();
    rec.eval_mode = true;  // validation always uses running statistics
    result.history.push_back(rec);

    if (metric_improves(model.spec.task, val_metric, best)) {
      best = val_metric;
      result.best_epoch = epoch;
      best_snap = snapshot(model);
      epochs_since_best = 0;
    } else {
      ++epochs_since_best;
      if (epochs_since_best > config.patience) break;
    }
  }
  if (!best_snap.empty()) restore(model, best_snap);
  result.best_val_metric = best;
  return result;
}

}  // namespace tabkanet

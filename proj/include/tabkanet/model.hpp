#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "tabkanet/embedding.hpp"
#include "tabkanet/transformer.hpp"

namespace tabkanet {

enum class Arch { tabkanet, tabkanet_ln, mlp, kan, tabtransformer };
enum class KanMode { locked, dynamic };

Arch arch_from_string(const std::string& tag);
std::string arch_to_string(Arch a);

struct ModelSpec {
  Arch arch = Arch::tabkanet;
  TaskKind task = TaskKind::binary;
  std::size_t n_classes = 2;
  std::size_t m = 0;                         // categorical features
  std::size_t n = 0;                         // numerical features
  std::vector<std::size_t> cat_vocab_sizes;  // per column, incl. unknown id
  EncoderConfig encoder;
  KanMode kan_mode = KanMode::locked;
  SplineGrid grid = SplineGrid::make(-2.0, 2.0, 5, 3);
  std::uint64_t schema_hash = 0;

  static ModelSpec for_dataset(Arch arch, const TableSchema& schema,
                               const CategoricalEncoder& encoder,
                               KanMode kan_mode = KanMode::locked);

  std::size_t out_dim() const;
  std::size_t kan_hidden() const {
    return kan_mode == KanMode::locked ? 64 : 2 * n + 1;
  }
};

// All learnable state of one architecture, plus the non-learnable buffers
// (BN running statistics, training-fold z-score statistics).
struct Model {
  ModelSpec spec;

  // tabkanet family
  std::vector<Tensor> cat_tables;
  std::optional<NumericalEmbedder> num_emb;
  EncoderParams encoder;
  std::vector<Linear> head;

  // tabtransformer: LN over the raw numerical block
  Tensor num_ln_gamma, num_ln_beta;

  // mlp/kan baselines: per-column small embeddings averaged into the input
  std::vector<Tensor> small_tables;
  std::vector<KanLayer> kan_stack;

  // training-fold z-score statistics for baselines (buffers, not params)
  std::vector<double> z_mean, z_std;

  std::mt19937_64 dropout_rng{0};

  std::vector<std::pair<std::string, Tensor>> named_params();
  // mutable non-parameter state captured by checkpoints
  std::vector<std::pair<std::string, std::vector<double>*>> named_buffers();
};

Model build(const ModelSpec& spec, std::uint64_t seed);

// Training-fold feature statistics for the baseline z-scoring (audited by the
// caller); no-op for architectures that normalize internally.
void set_feature_stats(Model& model, const std::vector<double>& mean,
                       const std::vector<double>& stddev);

// Logits (classification) or raw predictions (regression), shape [B x out].
Tensor model_forward(Model& model, const EncodedRows& batch, bool train);

Tensor model_loss(TaskKind task, const Tensor& output,
                  const EncodedRows& batch);

// In-memory parameter/buffer snapshots for best-validation checkpointing.
std::vector<std::vector<double>> snapshot(Model& model);
void restore(Model& model, const std::vector<std::vector<double>>& snap);

// Checkpoint file: named-parameter manifest + flat little-endian f64 arrays
// with the schema hash.
void save_checkpoint(Model& model, const std::string& path);
// Loads into a model built from the same spec; throws on name/shape/schema
// mismatch.
void load_checkpoint(Model& model, const std::string& path);

}  // namespace tabkanet

#pragma once

#include <map>
#include <random>
#include <string>
#include <vector>

#include "tabkanet/data.hpp"
#include "tabkanet/kan.hpp"
#include "tabkanet/ops.hpp"

namespace tabkanet {

// Per-column label encoding fitted on the training fold only. Ids are dense
// and 0-based; every unseen (or missing) value maps to the reserved
// unknown id, which is the last id of each column.
class CategoricalEncoder {
 public:
  static CategoricalEncoder fit(const Dataset& ds,
                                const std::vector<std::size_t>& train_indices,
                                FitAudit* audit = nullptr);

  std::size_t num_columns() const { return vocabs_.size(); }
  // vocabulary size including the unknown id
  std::size_t table_size(std::size_t column) const;
  std::size_t encode(std::size_t column, const std::string& value) const;
  std::string decode(std::size_t column, std::size_t id) const;
  bool fitted() const { return fitted_; }

 private:
  std::vector<std::map<std::string, std::size_t>> vocabs_;
  std::vector<std::vector<std::string>> names_;  // id -> value
  bool fitted_ = false;
};

// Full fold encoding: label encoding plus median imputation of missing
// numerical cells. All fitting inputs come from the training fold.
EncodedRows encode_rows(const Dataset& ds, const CategoricalEncoder& encoder,
                        const std::vector<double>& medians,
                        const std::vector<std::size_t>& indices);

// BN (or LN for the ablation variant) followed by a two-layer KAN stack
// n -> hidden -> n*d whose output reshapes to n tokens of dimension d.
struct NumericalEmbedder {
  std::size_t n = 0, d = 0, hidden = 0;
  bool use_layer_norm = false;  // ablation switch
  BNState bn;
  Tensor ln_gamma, ln_beta;
  KanLayer kan1, kan2;

  static NumericalEmbedder init(std::size_t n, std::size_t d,
                                std::size_t hidden, bool use_layer_norm,
                                const SplineGrid& grid, std::mt19937_64& rng);
};

// Independent per-column tables; output row i is the embedding of
// categorical feature i. ids are row-major [B x m].
Tensor embed_categorical(const std::vector<Tensor>& tables,
                         const std::vector<std::size_t>& ids, std::size_t B,
                         std::size_t m);

Tensor embed_numerical(NumericalEmbedder& emb, const Tensor& x, bool train);

// Concatenation along the token axis, categorical tokens first. Either input
// may be undefined when m = 0 or n = 0.
Tensor assemble_tokens(const Tensor& cat, const Tensor& num);

}  // namespace tabkanet

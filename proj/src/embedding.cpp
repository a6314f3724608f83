#include "tabkanet/embedding.hpp"

#include <cmath>
#include <stdexcept>

namespace tabkanet {

CategoricalEncoder CategoricalEncoder::fit(
    const Dataset& ds, const std::vector<std::size_t>& train_indices,
    FitAudit* audit) {
  if (audit) audit->check(train_indices);
  CategoricalEncoder enc;
  enc.vocabs_.resize(ds.cat_cells.size());
  enc.names_.resize(ds.cat_cells.size());
  for (std::size_t c = 0; c < ds.cat_cells.size(); ++c) {
    for (std::size_t i : train_indices) {
      const std::string& v = ds.cat_cells[c][i];
      // missing categorical values become their own category
      auto [it, inserted] = enc.vocabs_[c].try_emplace(v, enc.names_[c].size());
      if (inserted) enc.names_[c].push_back(v);
    }
  }
  enc.fitted_ = true;
  return enc;
}

std::size_t CategoricalEncoder::table_size(std::size_t column) const {
  return names_[column].size() + 1;  // + unknown id
}

std::size_t CategoricalEncoder::encode(std::size_t column,
                                       const std::string& value) const {
  if (!fitted_) throw std::logic_error("CategoricalEncoder: not fitted");
  const auto& vocab = vocabs_[column];
  auto it = vocab.find(value);
  return it != vocab.end() ? it->second : names_[column].size();
}

std::string CategoricalEncoder::decode(std::size_t column,
                                       std::size_t id) const {
  if (id >= names_[column].size())
    throw std::out_of_range("CategoricalEncoder: id " + std::to_string(id) +
                            " has no label in column " +
                            std::to_string(column));
  return names_[column][id];
}

EncodedRows encode_rows(const Dataset& ds, const CategoricalEncoder& encoder,
                        const std::vector<double>& medians,
                        const std::vector<std::size_t>& indices) {
  if (encoder.num_columns() != ds.cat_cells.size())
    throw DataError("encode_rows: encoder fitted for a different schema");
  if (medians.size() != ds.num_cells.size())
    throw DataError("encode_rows: median vector size mismatch");
  EncodedRows out;
  out.rows = indices.size();
  out.m = ds.cat_cells.size();
  out.n = ds.num_cells.size();
  out.cat.reserve(out.rows * out.m);
  out.num.reserve(out.rows * out.n);
  for (std::size_t i : indices) {
    for (std::size_t c = 0; c < out.m; ++c)
      out.cat.push_back(encoder.encode(c, ds.cat_cells[c][i]));
    for (std::size_t c = 0; c < out.n; ++c) {
      double v = ds.num_cells[c][i];
      out.num.push_back(std::isnan(v) ? medians[c] : v);
    }
    switch (ds.schema.task) {
      case TaskKind::binary:
        out.y_bin.push_back(static_cast<double>(ds.target_cls[i]));
        out.y_cls.push_back(ds.target_cls[i]);
        break;
      case TaskKind::multiclass:
        out.y_cls.push_back(ds.target_cls[i]);
        break;
      case TaskKind::regression:
        out.y_reg.push_back(ds.target_reg[i]);
        break;
    }
  }
  return out;
}

NumericalEmbedder NumericalEmbedder::init(std::size_t n, std::size_t d,
                                          std::size_t hidden,
                                          bool use_layer_norm,
                                          const SplineGrid& grid,
                                          std::mt19937_64& rng) {
  if (n < 1) throw std::invalid_argument("NumericalEmbedder: n must be >= 1");
  NumericalEmbedder emb;
  emb.n = n;
  emb.d = d;
  emb.hidden = hidden;
  emb.use_layer_norm = use_layer_norm;
  emb.bn = BNState::init(n);
  emb.ln_gamma = Tensor::full({n}, 1.0).set_requires_grad(true);
  emb.ln_beta = Tensor::zeros({n}).set_requires_grad(true);
  emb.kan1 = kan_init(n, hidden, grid, 1.0, rng);
  emb.kan2 = kan_init(hidden, n * d, grid, 1.0, rng);
  return emb;
}

Tensor embed_categorical(const std::vector<Tensor>& tables,
                         const std::vector<std::size_t>& ids, std::size_t B,
                         std::size_t m) {
  if (tables.size() != m)
    throw std::invalid_argument("embed_categorical: expected " +
                                std::to_string(m) + " tables, got " +
                                std::to_string(tables.size()));
  if (ids.size() != B * m)
    throw std::invalid_argument("embed_categorical: id matrix size mismatch");
  if (m == 0) return Tensor();
  std::size_t d = tables[0].dim(1);
  std::vector<Tensor> token_cols;
  token_cols.reserve(m);
  for (std::size_t c = 0; c < m; ++c) {
    std::vector<std::size_t> col_ids(B);
    for (std::size_t b = 0; b < B; ++b) col_ids[b] = ids[b * m + c];
    try {
      token_cols.push_back(
          reshape(embedding_lookup(tables[c], col_ids), {B, 1, d}));
    } catch (const std::out_of_range& e) {
      throw std::out_of_range("categorical column " + std::to_string(c) + ": " +
                              e.what());
    }
  }
  return concat(token_cols, 1);
}

Tensor embed_numerical(NumericalEmbedder& emb, const Tensor& x, bool train) {
  if (x.ndim() != 2 || x.dim(1) != emb.n)
    throw std::invalid_argument("embed_numerical: expected [B x " +
                                std::to_string(emb.n) + "] input, got " +
                                shape_str(x.shape()));
  std::size_t B = x.dim(0);
  Tensor normed = emb.use_layer_norm
                      ? layer_norm(x, emb.ln_gamma, emb.ln_beta, emb.bn.eps)
                      : batch_norm(x, emb.bn, train);
  Tensor h = kan_forward(emb.kan1, normed);
  Tensor flat = kan_forward(emb.kan2, h);
  return reshape(flat, {B, emb.n, emb.d});
}

Tensor assemble_tokens(const Tensor& cat, const Tensor& num) {
  if (!cat.defined() && !num.defined())
    throw std::invalid_argument("assemble_tokens: both inputs empty");
  if (!cat.defined()) return num;
  if (!num.defined()) return cat;
  if (cat.dim(0) != num.dim(0) || cat.dim(2) != num.dim(2))
    throw std::invalid_argument("assemble_tokens: dimension mismatch " +
                                shape_str(cat.shape()) + " vs " +
                                shape_str(num.shape()));
  return concat({cat, num}, 1);
}

}  // namespace tabkanet

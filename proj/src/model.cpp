#include "tabkanet/model.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace tabkanet {

Arch arch_from_string(const std::string& tag) {
  if (tag == "tabkanet") return Arch::tabkanet;
  if (tag == "tabkanet-ln") return Arch::tabkanet_ln;
  if (tag == "mlp") return Arch::mlp;
  if (tag == "kan") return Arch::kan;
  if (tag == "tabtransformer") return Arch::tabtransformer;
  throw std::invalid_argument("unknown architecture tag: " + tag);
}

std::string arch_to_string(Arch a) {
  switch (a) {
    case Arch::tabkanet: return "tabkanet";
    case Arch::tabkanet_ln: return "tabkanet-ln";
    case Arch::mlp: return "mlp";
    case Arch::kan: return "kan";
    case Arch::tabtransformer: return "tabtransformer";
  }
  return "?";
}

ModelSpec ModelSpec::for_dataset(Arch arch, const TableSchema& schema,
                                 const CategoricalEncoder& encoder,
                                 KanMode kan_mode) {
  ModelSpec spec;
  spec.arch = arch;
  spec.task = schema.task;
  spec.n_classes = schema.n_classes;
  spec.m = schema.num_categorical();
  spec.n = schema.num_numerical();
  spec.kan_mode = kan_mode;
  spec.schema_hash = fnv1a64(schema.canonical_text());
  for (std::size_t c = 0; c < spec.m; ++c)
    spec.cat_vocab_sizes.push_back(encoder.table_size(c));
  if (arch == Arch::tabtransformer && spec.m == 0) {
    throw std::invalid_argument(
        "tabtransformer: unsupported for schemas with no categorical "
        "features");
  }
  return spec;
}

std::size_t ModelSpec::out_dim() const {
  switch (task) {
    case TaskKind::binary: return 1;
    case TaskKind::multiclass: return n_classes;
    case TaskKind::regression: return 1;
  }
  return 1;
}

namespace {

constexpr std::size_t kSmallEmbedDim = 8;

// Two hidden layers of widths (input/2, input/8 floored to >= 64).
std::pair<std::size_t, std::size_t> head_widths(std::size_t input) {
  return {std::max<std::size_t>(input / 2, 16),
          std::max<std::size_t>(input / 8, 64)};
}

std::vector<Linear> make_head(std::size_t input, std::size_t budget_input,
                              std::size_t out, std::mt19937_64& rng) {
  auto [h1, h2] = head_widths(budget_input);
  std::vector<Linear> head;
  head.push_back(Linear::init(input, h1, rng));
  head.push_back(Linear::init(h1, h2, rng));
  head.push_back(Linear::init(h2, out, rng));
  return head;
}

Tensor apply_head(const std::vector<Linear>& head, Tensor h) {
  for (std::size_t i = 0; i + 1 < head.size(); ++i)
    h = silu(head[i].apply(h));
  return head.back().apply(h);
}

}  // namespace

Model build(const ModelSpec& spec, std::uint64_t seed) {
  if (spec.arch == Arch::tabtransformer && spec.m == 0)
    throw std::invalid_argument(
        "tabtransformer: unsupported for schemas with no categorical "
        "features");
  if (spec.m + spec.n == 0)
    throw std::invalid_argument("build: schema has no features");
  if (spec.cat_vocab_sizes.size() != spec.m)
    throw std::invalid_argument("build: vocab sizes inconsistent with m");

  Model model;
  model.spec = spec;
  std::mt19937_64 rng(seed);
  model.dropout_rng.seed(seed ^ 0x9e3779b97f4a7c15ull);
  std::size_t d = spec.encoder.dim;
  std::size_t out = spec.out_dim();
  // budget reference: the tabkanet head on this schema
  std::size_t budget = (spec.m + spec.n) * d;

  switch (spec.arch) {
    case Arch::tabkanet:
    case Arch::tabkanet_ln: {
      for (std::size_t c = 0; c < spec.m; ++c)
        model.cat_tables.push_back(
            Tensor::randn({spec.cat_vocab_sizes[c], d}, rng,
                          1.0 / std::sqrt(static_cast<double>(d)))
                .set_requires_grad(true));
      if (spec.n > 0)
        model.num_emb = NumericalEmbedder::init(
            spec.n, d, spec.kan_hidden(), spec.arch == Arch::tabkanet_ln,
            spec.grid, rng);
      model.encoder = encoder_init(spec.encoder, rng);
      model.head = make_head((spec.m + spec.n) * d, budget, out, rng);
      break;
    }
    case Arch::tabtransformer: {
      for (std::size_t c = 0; c < spec.m; ++c)
        model.cat_tables.push_back(
            Tensor::randn({spec.cat_vocab_sizes[c], d}, rng,
                          1.0 / std::sqrt(static_cast<double>(d)))
                .set_requires_grad(true));
      if (spec.n > 0) {
        model.num_ln_gamma = Tensor::full({spec.n}, 1.0).set_requires_grad(true);
        model.num_ln_beta = Tensor::zeros({spec.n}).set_requires_grad(true);
      }
      model.encoder = encoder_init(spec.encoder, rng);
      model.head = make_head(spec.m * d + spec.n, budget, out, rng);
      break;
    }
    case Arch::mlp:
    case Arch::kan: {
      std::size_t input = spec.n + (spec.m > 0 ? kSmallEmbedDim : 0);
      for (std::size_t c = 0; c < spec.m; ++c)
        model.small_tables.push_back(
            Tensor::randn({spec.cat_vocab_sizes[c], kSmallEmbedDim}, rng, 0.3)
                .set_requires_grad(true));
      if (spec.arch == Arch::mlp) {
        model.head = make_head(input, budget, out, rng);
      } else {
        model.kan_stack.push_back(kan_init(input, 64, spec.grid, 1.0, rng));
        model.kan_stack.push_back(kan_init(64, out, spec.grid, 1.0, rng));
      }
      break;
    }
  }
  model.z_mean.assign(spec.n, 0.0);
  model.z_std.assign(spec.n, 1.0);
  return model;
}

void set_feature_stats(Model& model, const std::vector<double>& mean,
                       const std::vector<double>& stddev) {
  if (mean.size() != model.spec.n || stddev.size() != model.spec.n)
    throw std::invalid_argument("set_feature_stats: size mismatch");
  model.z_mean = mean;
  model.z_std = stddev;
  for (double& s : model.z_std)
    if (s <= 0.0 || !std::isfinite(s)) s = 1.0;
}

namespace {

Tensor zscored_numerics(const Model& model, const EncodedRows& batch) {
  std::size_t B = batch.rows, n = batch.n;
  std::vector<double> vals(B * n);
  for (std::size_t r = 0; r < B; ++r)
    for (std::size_t j = 0; j < n; ++j)
      vals[r * n + j] =
          (batch.num[r * n + j] - model.z_mean[j]) / model.z_std[j];
  return Tensor::from({B, n}, std::move(vals));
}

Tensor baseline_input(Model& model, const EncodedRows& batch) {
  std::vector<Tensor> parts;
  if (model.spec.m > 0) {
    Tensor emb = embed_categorical(model.small_tables, batch.cat, batch.rows,
                                   batch.m);
    parts.push_back(mean_axis1(emb));
  }
  if (model.spec.n > 0) parts.push_back(zscored_numerics(model, batch));
  return parts.size() == 1 ? parts[0] : concat(parts, 1);
}

}  // namespace

Tensor model_forward(Model& model, const EncodedRows& batch, bool train) {
  if (batch.m != model.spec.m || batch.n != model.spec.n)
    throw std::invalid_argument("model_forward: batch does not match schema");
  std::size_t B = batch.rows;
  switch (model.spec.arch) {
    case Arch::tabkanet:
    case Arch::tabkanet_ln: {
      Tensor cat_tok, num_tok;
      if (model.spec.m > 0)
        cat_tok = embed_categorical(model.cat_tables, batch.cat, B, batch.m);
      if (model.spec.n > 0) {
        Tensor x = Tensor::from({B, model.spec.n}, batch.num);
        num_tok = embed_numerical(*model.num_emb, x, train);
      }
      Tensor tokens = assemble_tokens(cat_tok, num_tok);
      Tensor enc = encoder_forward(model.spec.encoder, model.encoder, tokens,
                                   train, model.dropout_rng);
      std::size_t T = enc.dim(1);
      return apply_head(model.head,
                        reshape(enc, {B, T * model.spec.encoder.dim}));
    }
    case Arch::tabtransformer: {
      Tensor cat_tok =
          embed_categorical(model.cat_tables, batch.cat, B, batch.m);
      Tensor enc = encoder_forward(model.spec.encoder, model.encoder, cat_tok,
                                   train, model.dropout_rng);
      Tensor flat = reshape(enc, {B, model.spec.m * model.spec.encoder.dim});
      if (model.spec.n > 0) {
        Tensor x = Tensor::from({B, model.spec.n}, batch.num);
        Tensor ln = layer_norm(x, model.num_ln_gamma, model.num_ln_beta);
        flat = concat({flat, ln}, 1);
      }
      return apply_head(model.head, flat);
    }
    case Arch::mlp:
      return apply_head(model.head, baseline_input(model, batch));
    case Arch::kan: {
      Tensor h = baseline_input(model, batch);
      for (const KanLayer& layer : model.kan_stack) h = kan_forward(layer, h);
      return h;
    }
  }
  throw std::logic_error("model_forward: unreachable");
}

Tensor model_loss(TaskKind task, const Tensor& output,
                  const EncodedRows& batch) {
  switch (task) {
    case TaskKind::binary:
      return binary_cross_entropy_with_logits(output, batch.y_bin);
    case TaskKind::multiclass:
      return cross_entropy_with_logits(output, batch.y_cls);
    case TaskKind::regression:
      return mse_loss(output, batch.y_reg);
  }
  throw std::logic_error("model_loss: unreachable");
}

std::vector<std::pair<std::string, Tensor>> Model::named_params() {
  std::vector<std::pair<std::string, Tensor>> out;
  auto add_linear = [&](const std::string& name, const Linear& l) {
    out.emplace_back(name + ".w", l.w);
    out.emplace_back(name + ".b", l.b);
  };
  auto add_kan = [&](const std::string& name, const KanLayer& l) {
    out.emplace_back(name + ".spline_coeffs", l.spline_coeffs);
    out.emplace_back(name + ".base_weight", l.base_weight);
  };
  for (std::size_t c = 0; c < cat_tables.size(); ++c)
    out.emplace_back("cat_table." + std::to_string(c), cat_tables[c]);
  if (num_emb) {
    out.emplace_back("num_emb.bn.gamma", num_emb->bn.gamma);
    out.emplace_back("num_emb.bn.beta", num_emb->bn.beta);
    if (num_emb->use_layer_norm) {
      out.emplace_back("num_emb.ln.gamma", num_emb->ln_gamma);
      out.emplace_back("num_emb.ln.beta", num_emb->ln_beta);
    }
    add_kan("num_emb.kan1", num_emb->kan1);
    add_kan("num_emb.kan2", num_emb->kan2);
  }
  for (std::size_t l = 0; l < encoder.layers.size(); ++l) {
    std::string p = "encoder." + std::to_string(l);
    add_linear(p + ".wq", encoder.layers[l].wq);
    add_linear(p + ".wk", encoder.layers[l].wk);
    add_linear(p + ".wv", encoder.layers[l].wv);
    add_linear(p + ".wo", encoder.layers[l].wo);
    add_linear(p + ".ffn1", encoder.layers[l].ffn1);
    add_linear(p + ".ffn2", encoder.layers[l].ffn2);
    out.emplace_back(p + ".ln1.gamma", encoder.layers[l].ln1_gamma);
    out.emplace_back(p + ".ln1.beta", encoder.layers[l].ln1_beta);
    out.emplace_back(p + ".ln2.gamma", encoder.layers[l].ln2_gamma);
    out.emplace_back(p + ".ln2.beta", encoder.layers[l].ln2_beta);
  }
  if (num_ln_gamma.defined()) {
    out.emplace_back("num_ln.gamma", num_ln_gamma);
    out.emplace_back("num_ln.beta", num_ln_beta);
  }
  for (std::size_t c = 0; c < small_tables.size(); ++c)
    out.emplace_back("small_table." + std::to_string(c), small_tables[c]);
  for (std::size_t i = 0; i < kan_stack.size(); ++i)
    add_kan("kan_stack." + std::to_string(i), kan_stack[i]);
  for (std::size_t i = 0; i < head.size(); ++i)
    add_linear("head." + std::to_string(i), head[i]);
  return out;
}

std::vector<std::pair<std::string, std::vector<double>*>>
Model::named_buffers() {
  std::vector<std::pair<std::string, std::vector<double>*>> out;
  if (num_emb) {
    out.emplace_back("num_emb.bn.running_mean", &num_emb->bn.running_mean);
    out.emplace_back("num_emb.bn.running_var", &num_emb->bn.running_var);
  }
  out.emplace_back("z_mean", &z_mean);
  out.emplace_back("z_std", &z_std);
  return out;
}

std::vector<std::vector<double>> snapshot(Model& model) {
  std::vector<std::vector<double>> snap;
  for (auto& [name, t] : model.named_params()) snap.push_back(t.values());
  for (auto& [name, buf] : model.named_buffers()) snap.push_back(*buf);
  return snap;
}

void restore(Model& model, const std::vector<std::vector<double>>& snap) {
  auto params = model.named_params();
  auto buffers = model.named_buffers();
  if (snap.size() != params.size() + buffers.size())
    throw std::invalid_argument("restore: snapshot does not match model");
  std::size_t i = 0;
  for (auto& [name, t] : params) t.values() = snap[i++];
  for (auto& [name, buf] : buffers) *buf = snap[i++];
}

namespace {

template <typename T>
void write_pod(std::ofstream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  return v;
}

constexpr std::uint32_t kCheckpointMagic = 0x544B4350;  // "TKCP"

}  // namespace

void save_checkpoint(Model& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
  auto params = model.named_params();
  auto buffers = model.named_buffers();
  write_pod<std::uint32_t>(out, kCheckpointMagic);
  write_pod<std::uint32_t>(out, 1);
  write_pod<std::uint64_t>(out, model.spec.schema_hash);
  write_pod<std::uint64_t>(out, params.size() + buffers.size());
  auto write_entry = [&](const std::string& name,
                         const std::vector<double>& data, const Shape* shape) {
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    std::uint32_t ndim = shape ? static_cast<std::uint32_t>(shape->size()) : 1;
    write_pod<std::uint32_t>(out, ndim);
    if (shape) {
      for (std::size_t dsz : *shape) write_pod<std::uint64_t>(out, dsz);
    } else {
      write_pod<std::uint64_t>(out, data.size());
    }
    out.write(reinterpret_cast<const char*>(data.data()),
              static_cast<std::streamsize>(data.size() * sizeof(double)));
  };
  for (auto& [name, t] : params) write_entry(name, t.values(), &t.shape());
  for (auto& [name, buf] : buffers) write_entry("buffer:" + name, *buf, nullptr);
}

void load_checkpoint(Model& model, const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
  if (read_pod<std::uint32_t>(in) != kCheckpointMagic)
    throw std::runtime_error("checkpoint: bad magic in " + path);
  if (read_pod<std::uint32_t>(in) != 1)
    throw std::runtime_error("checkpoint: unsupported version");
  std::uint64_t schema_hash = read_pod<std::uint64_t>(in);
  if (schema_hash != model.spec.schema_hash)
    throw std::runtime_error("checkpoint: schema hash mismatch");
  std::uint64_t count = read_pod<std::uint64_t>(in);

  auto params = model.named_params();
  auto buffers = model.named_buffers();
  if (count != params.size() + buffers.size())
    throw std::runtime_error("checkpoint: entry count mismatch");
  auto read_entry = [&](const std::string& want_name,
                        std::vector<double>& dst) {
    std::uint32_t name_len = read_pod<std::uint32_t>(in);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    if (name != want_name)
      throw std::runtime_error("checkpoint: expected entry '" + want_name +
                               "', found '" + name + "'");
    std::uint32_t ndim = read_pod<std::uint32_t>(in);
    std::uint64_t numel = 1;
    for (std::uint32_t i = 0; i < ndim; ++i)
      numel *= read_pod<std::uint64_t>(in);
    if (numel != dst.size())
      throw std::runtime_error("checkpoint: size mismatch for '" + name + "'");
    in.read(reinterpret_cast<char*>(dst.data()),
            static_cast<std::streamsize>(numel * sizeof(double)));
  };
  for (auto& [name, t] : params) read_entry(name, t.values());
  for (auto& [name, buf] : buffers) read_entry("buffer:" + name, *buf);
  if (!in) throw std::runtime_error("checkpoint: truncated file " + path);
}

}  // namespace tabkanet

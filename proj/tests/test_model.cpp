#include <cmath>
#include <cstdio>

#include "doctest.h"
#include "tabkanet/model.hpp"
#include "tabkanet/synth.hpp"
#include "tabkanet/training.hpp"

using namespace tabkanet;

namespace {

struct Fixture {
  TableSchema schema;
  Dataset ds;
  CategoricalEncoder encoder;
  EncodedRows rows;
};

Fixture load_fixture(const std::string& name, std::size_t max_rows = 64) {
  SynthFiles files = generate_dataset(name, 21);
  Fixture f;
  f.schema = parse_schema(files.schema);
  f.ds = parse_csv(files.csv, f.schema);
  std::vector<std::size_t> train;
  for (std::size_t i = 0; i < std::min(f.ds.n_rows, max_rows); ++i)
    train.push_back(i);
  f.encoder = CategoricalEncoder::fit(f.ds, train, nullptr);
  std::vector<double> med = fit_medians(f.ds, train, nullptr);
  f.rows = encode_rows(f.ds, f.encoder, med, train);
  return f;
}

EncoderConfig tiny_encoder() {
  EncoderConfig cfg;
  cfg.dim = 16;
  cfg.heads = 2;
  cfg.layers = 1;
  cfg.ffn_hidden = 32;
  cfg.dropout = 0.0;
  return cfg;
}

}  // namespace

TEST_CASE("spec census: head input is (m+n)*d for the transformer families") {
  Fixture f = load_fixture("shoppers-synth", 128);
  ModelSpec spec = ModelSpec::for_dataset(Arch::tabkanet, f.schema, f.encoder);
  CHECK(spec.m == 11);
  CHECK(spec.n == 6);
  CHECK(spec.encoder.dim == 64);
  Model model = build(spec, 0);
  REQUIRE(model.head.size() == 3);
  CHECK(model.head[0].w.shape() == Shape{17 * 64, 544});
  CHECK(model.head[1].w.shape() == Shape{544, 136});
  CHECK(model.head[2].w.shape() == Shape{136, 1});
  CHECK(spec.kan_hidden() == 64);
  ModelSpec dyn = ModelSpec::for_dataset(Arch::tabkanet, f.schema, f.encoder,
                                         KanMode::dynamic);
  CHECK(dyn.kan_hidden() == 13);
}

TEST_CASE("tabtransformer rejects schemas with no categorical features") {
  TableSchema s = parse_schema(
      "dataset numonly\ntask multiclass 7\n"
      "column a numerical\ncolumn b numerical\ncolumn y target\n");
  Dataset ds = parse_csv("a,b,y\n1,2,c1\n3,4,c2\n", s);
  CategoricalEncoder enc = CategoricalEncoder::fit(ds, {0, 1}, nullptr);
  CHECK_THROWS_AS(ModelSpec::for_dataset(Arch::tabtransformer, s, enc),
                  std::invalid_argument);
}

TEST_CASE("same seed gives bit-identical parameters, different seed does not") {
  Fixture f = load_fixture("credit-synth");
  ModelSpec spec = ModelSpec::for_dataset(Arch::tabkanet, f.schema, f.encoder);
  spec.encoder = tiny_encoder();
  Model a = build(spec, 12);
  Model b = build(spec, 12);
  Model c = build(spec, 13);
  auto pa = a.named_params(), pb = b.named_params(), pc = c.named_params();
  REQUIRE(pa.size() == pb.size());
  bool all_equal = true, any_diff = false;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    CHECK(pa[i].first == pb[i].first);
    all_equal = all_equal && pa[i].second.values() == pb[i].second.values();
    any_diff = any_diff || pa[i].second.values() != pc[i].second.values();
  }
  CHECK(all_equal);
  CHECK(any_diff);
}

TEST_CASE("forward shapes per task and eval determinism") {
  Fixture f = load_fixture("credit-synth", 32);
  for (Arch arch : {Arch::tabkanet, Arch::tabkanet_ln, Arch::mlp, Arch::kan,
                    Arch::tabtransformer}) {
    CAPTURE(arch_to_string(arch));
    ModelSpec spec = ModelSpec::for_dataset(arch, f.schema, f.encoder);
    spec.encoder = tiny_encoder();
    Model model = build(spec, 3);
    if (arch == Arch::mlp || arch == Arch::kan)
      set_feature_stats(model, std::vector<double>(spec.n, 0.0),
                        std::vector<double>(spec.n, 1.0));
    Tensor out = model_forward(model, f.rows, false);
    CHECK(out.shape() == Shape{32, 1});
    Tensor again = model_forward(model, f.rows, false);
    CHECK(out.values() == again.values());
  }

  // multiclass head width
  Fixture mc = load_fixture("blobs-multiclass", 30);
  ModelSpec spec = ModelSpec::for_dataset(Arch::mlp, mc.schema, mc.encoder);
  spec.n_classes = 7;
  Model model = build(spec, 1);
  set_feature_stats(model, {0.0, 0.0}, {1.0, 1.0});
  CHECK(model_forward(model, mc.rows, false).shape() == Shape{30, 7});
}

TEST_CASE("loss values: ln C, ln 2, and exact regression zero") {
  EncodedRows batch;
  batch.rows = 2;
  batch.y_cls = {0, 3};
  Tensor uniform = Tensor::zeros({2, 5});
  CHECK(model_loss(TaskKind::multiclass, uniform, batch).item() ==
        doctest::Approx(std::log(5.0)).epsilon(1e-12));

  batch.y_bin = {1, 1};
  Tensor zero_logit = Tensor::zeros({2, 1});
  CHECK(model_loss(TaskKind::binary, zero_logit, batch).item() ==
        doctest::Approx(std::log(2.0)).epsilon(1e-12));

  batch.y_reg = {0.5, -1.5};
  Tensor exact = Tensor::from({2, 1}, {0.5, -1.5});
  CHECK(model_loss(TaskKind::regression, exact, batch).item() ==
        doctest::Approx(0.0));
}

TEST_CASE("one optimizer step decreases the training loss across seeds") {
  Fixture f = load_fixture("credit-synth", 48);
  for (std::uint64_t seed : {1, 2, 3, 4, 5}) {
    ModelSpec spec = ModelSpec::for_dataset(Arch::tabkanet, f.schema, f.encoder);
    spec.encoder = tiny_encoder();
    Model model = build(spec, seed);
    auto params = model.named_params();

    Tensor out = model_forward(model, f.rows, true);
    Tensor loss = model_loss(spec.task, out, f.rows);
    double before = loss.item();
    backward(loss);
    OptimizerState opt = OptimizerState::adamw(1e-3, 0.0);
    adamw_step(opt, params);

    double after =
        model_loss(spec.task, model_forward(model, f.rows, true), f.rows).item();
    CAPTURE(seed);
    CHECK(after < before);
  }
}

TEST_CASE("checkpoint round-trip restores forward outputs exactly") {
  Fixture f = load_fixture("credit-synth", 16);
  ModelSpec spec = ModelSpec::for_dataset(Arch::tabkanet, f.schema, f.encoder);
  spec.encoder = tiny_encoder();
  Model model = build(spec, 4);
  // give BN running stats something non-initial to round-trip
  model_forward(model, f.rows, true);
  Tensor want = model_forward(model, f.rows, false);

  std::string path = "ckpt_test.bin";
  save_checkpoint(model, path);
  Model fresh = build(spec, 99);
  load_checkpoint(fresh, path);
  Tensor got = model_forward(fresh, f.rows, false);
  CHECK(got.values() == want.values());

  // schema hash mismatch is rejected
  ModelSpec other = spec;
  other.schema_hash ^= 0xdeadbeefULL;
  Model wrong = build(other, 0);
  CHECK_THROWS(load_checkpoint(wrong, path));
  std::remove(path.c_str());
}

TEST_CASE("snapshot/restore round-trips parameters and buffers") {
  Fixture f = load_fixture("credit-synth", 16);
  ModelSpec spec = ModelSpec::for_dataset(Arch::tabkanet, f.schema, f.encoder);
  spec.encoder = tiny_encoder();
  Model model = build(spec, 8);
  model_forward(model, f.rows, true);
  auto snap = snapshot(model);
  Tensor want = model_forward(model, f.rows, false);

  // perturb everything, then restore
  for (auto& [name, p] : model.named_params())
    for (double& v : p.values()) v += 0.25;
  CHECK(model_forward(model, f.rows, false).values() != want.values());
  restore(model, snap);
  CHECK(model_forward(model, f.rows, false).values() == want.values());
}

TEST_CASE("architecture tags round-trip") {
  for (Arch a : {Arch::tabkanet, Arch::tabkanet_ln, Arch::mlp, Arch::kan,
                 Arch::tabtransformer})
    CHECK(arch_from_string(arch_to_string(a)) == a);
  CHECK_THROWS(arch_from_string("resnet"));
}

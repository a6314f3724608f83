// Command-line front end; talks to the library exclusively through the
// C API in tabkanet.h.
#include <cstdint>
#include <cstdio>
#include <string>

#include "CLI11.hpp"
#include "tabkanet.h"

namespace {

struct CommonOpts {
  std::string config;
  std::string out_dir;
  std::string archs;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::size_t folds = 5;
  bool folds_set = false;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--config", opts.config, "JSON config file")->required();
  cmd->add_option("--out", opts.out_dir, "output directory");
  cmd->add_option("--arch", opts.archs,
                  "comma-separated architecture tags (tabkanet, tabkanet-ln, "
                  "mlp, kan, tabtransformer)");
  cmd->add_option("--seed", opts.seed, "master seed")->each([&](const std::string&) {
    opts.seed_set = true;
  });
  cmd->add_option("--folds", opts.folds, "fold count (the protocol uses 5)")
      ->each([&](const std::string&) { opts.folds_set = true; });
}

int to_exit_code(int status) {
  return status == TK_ERR_INTERNAL ? TK_ERR_CONFIG : status;
}

int report(int status) {
  if (status != TK_OK) std::fprintf(stderr, "error: %s\n", tk_last_error());
  return to_exit_code(status);
}

int run_study_verb(const CommonOpts& opts, const char* study,
                   const std::string& bn_column) {
  tk_config* cfg = nullptr;
  int status = tk_config_load(opts.config.c_str(), &cfg);
  if (status != TK_OK) return report(status);

  status = tk_config_set_study(cfg, study);
  if (status == TK_OK && !opts.archs.empty())
    status = tk_config_set_archs(cfg, opts.archs.c_str());
  if (status == TK_OK && opts.seed_set) status = tk_config_set_seed(cfg, opts.seed);
  if (status == TK_OK && opts.folds_set) status = tk_config_set_folds(cfg, opts.folds);
  if (status == TK_OK && !opts.out_dir.empty())
    status = tk_config_set_out_dir(cfg, opts.out_dir.c_str());
  if (status == TK_OK && !bn_column.empty())
    status = tk_config_set_bn_column(cfg, bn_column.c_str());
  if (status == TK_OK) status = tk_run_study(cfg);

  tk_config_free(cfg);
  return report(status);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tabular KAN-transformer benchmark harness"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(tk_version()));

  CommonOpts bench_opts, ablate_opts, noise_opts, batch_opts, bn_opts;
  std::string bn_column;

  CLI::App* bench = app.add_subcommand("bench", "5-fold benchmark per architecture");
  add_common(bench, bench_opts);
  CLI::App* ablate = app.add_subcommand("ablate-norm", "BN vs LN paired ablation");
  add_common(ablate, ablate_opts);
  CLI::App* noise = app.add_subcommand("noise-sweep", "test-fold corruption sweep");
  add_common(noise, noise_opts);
  CLI::App* batch = app.add_subcommand("batch-sweep", "batch-size sweep");
  add_common(batch, batch_opts);
  CLI::App* bn = app.add_subcommand("bn-export", "BN vs global normalization scatter");
  add_common(bn, bn_opts);
  bn->add_option("--column", bn_column, "numerical column to export")->required();

  std::string gen_name, gen_csv, gen_schema;
  std::uint64_t gen_seed = 0;
  CLI::App* gen = app.add_subcommand("gen-data", "write a bundled synthetic dataset");
  gen->add_option("name", gen_name,
                  std::string("dataset name, one of:\n") + tk_dataset_names())
      ->required();
  gen->add_option("--csv", gen_csv, "output CSV path")->required();
  gen->add_option("--schema", gen_schema, "output schema path")->required();
  gen->add_option("--seed", gen_seed, "generator seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : TK_ERR_CONFIG;
  }

  if (bench->parsed()) return run_study_verb(bench_opts, "benchmark", "");
  if (ablate->parsed()) return run_study_verb(ablate_opts, "ablate-norm", "");
  if (noise->parsed()) return run_study_verb(noise_opts, "noise-sweep", "");
  if (batch->parsed()) return run_study_verb(batch_opts, "batch-sweep", "");
  if (bn->parsed()) return run_study_verb(bn_opts, "bn-export", bn_column);
  if (gen->parsed())
    return report(tk_generate_dataset(gen_name.c_str(), gen_csv.c_str(),
                                      gen_schema.c_str(), gen_seed));
  return TK_ERR_CONFIG;
}

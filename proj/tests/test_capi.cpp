#include <cstdio>
#include <fstream>
#include <string>

#include "doctest.h"
#include "tabkanet.h"

namespace {

struct TempFiles {
  std::string csv = "capi_tmp.csv";
  std::string schema = "capi_tmp.schema";
  ~TempFiles() {
    std::remove(csv.c_str());
    std::remove(schema.c_str());
  }
};

}  // namespace

TEST_CASE("capi: version and dataset registry") {
  CHECK(std::string(tk_version()).find("tabkanet") != std::string::npos);
  std::string names = tk_dataset_names();
  CHECK(names.find("credit-synth") != std::string::npos);
  CHECK(names.find("blobs-binary") != std::string::npos);
}

TEST_CASE("capi: config lifecycle and error codes") {
  tk_config* cfg = nullptr;
  CHECK(tk_config_from_json("not json", &cfg) == TK_ERR_CONFIG);
  CHECK(cfg == nullptr);
  CHECK(std::string(tk_last_error()).size() > 0);

  CHECK(tk_config_from_json(
            R"({"csv":"capi_tmp.csv","schema":"capi_tmp.schema"})", &cfg) ==
        TK_OK);
  REQUIRE(cfg != nullptr);
  CHECK(std::string(tk_last_error()).empty());

  CHECK(tk_config_set_study(cfg, "benchmark") == TK_OK);
  CHECK(tk_config_set_study(cfg, "nope") == TK_ERR_CONFIG);
  CHECK(tk_config_set_archs(cfg, "mlp,tabkanet") == TK_OK);
  CHECK(tk_config_set_archs(cfg, "resnet") == TK_ERR_CONFIG);
  CHECK(tk_config_set_seed(cfg, 7) == TK_OK);
  CHECK(tk_config_set_folds(cfg, 1) == TK_ERR_CONFIG);
  CHECK(tk_config_set_folds(cfg, 5) == TK_OK);
  CHECK(tk_config_set_out_dir(cfg, "capi_tmp_out") == TK_OK);
  tk_config_free(cfg);
  tk_config_free(nullptr);  // must be a no-op
}

TEST_CASE("capi: dataset generation and a full study round-trip") {
  TempFiles files;
  CHECK(tk_generate_dataset("nosuch", files.csv.c_str(), files.schema.c_str(),
                            1) == TK_ERR_CONFIG);
  REQUIRE(tk_generate_dataset("blobs-binary", files.csv.c_str(),
                              files.schema.c_str(), 1) == TK_OK);

  tk_config* cfg = nullptr;
  std::string json = R"({"csv":"capi_tmp.csv","schema":"capi_tmp.schema",)"
                     R"("archs":["mlp"],"max_epochs":2,"patience":2,)"
                     R"("out_dir":"capi_tmp_out"})";
  REQUIRE(tk_config_from_json(json.c_str(), &cfg) == TK_OK);
  CHECK(tk_run_study(cfg) == TK_OK);
  std::ifstream bench("capi_tmp_out/bench.csv");
  CHECK(bench.good());
  tk_config_free(cfg);

  // a missing dataset file surfaces as a data error
  tk_config* bad = nullptr;
  REQUIRE(tk_config_from_json(
              R"({"csv":"missing.csv","schema":"missing.schema"})", &bad) ==
          TK_OK);
  CHECK(tk_run_study(bad) == TK_ERR_DATA);
  tk_config_free(bad);
}

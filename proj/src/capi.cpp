#include "tabkanet.h"

#include <sstream>
#include <string>

#include "tabkanet/experiments.hpp"
#include "tabkanet/synth.hpp"

namespace {

thread_local std::string g_last_error = "";

struct ConfigHandle {
  tabkanet::ExperimentConfig cfg;
};

int fail(int code, const std::string& message) {
  g_last_error = message;
  return code;
}

// Maps the library exception taxonomy onto the C status codes.
template <typename Fn>
int guarded(Fn&& fn) {
  try {
    fn();
    g_last_error.clear();
    return TK_OK;
  } catch (const tabkanet::ConfigError& e) {
    return fail(TK_ERR_CONFIG, e.what());
  } catch (const std::invalid_argument& e) {
    return fail(TK_ERR_CONFIG, e.what());
  } catch (const tabkanet::DataError& e) {
    return fail(TK_ERR_DATA, e.what());
  } catch (const tabkanet::DivergenceError& e) {
    return fail(TK_ERR_DIVERGENCE, e.what());
  } catch (const std::exception& e) {
    return fail(TK_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(TK_ERR_INTERNAL, "unknown error");
  }
}

}  // namespace

extern "C" {

const char* tk_last_error(void) { return g_last_error.c_str(); }

const char* tk_version(void) { return "tabkanet 1.0.0"; }

int tk_config_from_json(const char* json_text, tk_config** out) {
  if (!json_text || !out) return fail(TK_ERR_CONFIG, "null argument");
  *out = nullptr;
  return guarded([&] {
    auto* handle = new ConfigHandle{tabkanet::ExperimentConfig::from_json(json_text)};
    *out = reinterpret_cast<tk_config*>(handle);
  });
}

int tk_config_load(const char* path, tk_config** out) {
  if (!path || !out) return fail(TK_ERR_CONFIG, "null argument");
  *out = nullptr;
  return guarded([&] {
    auto* handle =
        new ConfigHandle{tabkanet::ExperimentConfig::from_json_file(path)};
    *out = reinterpret_cast<tk_config*>(handle);
  });
}

void tk_config_free(tk_config* cfg) {
  delete reinterpret_cast<ConfigHandle*>(cfg);
}

int tk_config_set_study(tk_config* cfg, const char* study) {
  if (!cfg || !study) return fail(TK_ERR_CONFIG, "null argument");
  return guarded([&] {
    reinterpret_cast<ConfigHandle*>(cfg)->cfg.study =
        tabkanet::study_from_string(study);
  });
}

int tk_config_set_archs(tk_config* cfg, const char* tags) {
  if (!cfg || !tags) return fail(TK_ERR_CONFIG, "null argument");
  return guarded([&] {
    std::vector<tabkanet::Arch> archs;
    std::stringstream stream(tags);
    std::string tag;
    while (std::getline(stream, tag, ','))
      if (!tag.empty()) archs.push_back(tabkanet::arch_from_string(tag));
    if (archs.empty())
      throw tabkanet::ConfigError("no architecture tags given");
    reinterpret_cast<ConfigHandle*>(cfg)->cfg.archs = std::move(archs);
  });
}

int tk_config_set_seed(tk_config* cfg, uint64_t seed) {
  if (!cfg) return fail(TK_ERR_CONFIG, "null argument");
  reinterpret_cast<ConfigHandle*>(cfg)->cfg.seed = seed;
  return TK_OK;
}

int tk_config_set_folds(tk_config* cfg, size_t folds) {
  if (!cfg) return fail(TK_ERR_CONFIG, "null argument");
  return guarded([&] {
    auto& c = reinterpret_cast<ConfigHandle*>(cfg)->cfg;
    c.folds = folds;
    c.validate();
  });
}

int tk_config_set_out_dir(tk_config* cfg, const char* dir) {
  if (!cfg || !dir) return fail(TK_ERR_CONFIG, "null argument");
  reinterpret_cast<ConfigHandle*>(cfg)->cfg.out_dir = dir;
  return TK_OK;
}

int tk_config_set_bn_column(tk_config* cfg, const char* column) {
  if (!cfg || !column) return fail(TK_ERR_CONFIG, "null argument");
  reinterpret_cast<ConfigHandle*>(cfg)->cfg.bn_column = column;
  return TK_OK;
}

int tk_run_study(const tk_config* cfg) {
  if (!cfg) return fail(TK_ERR_CONFIG, "null argument");
  return guarded([&] {
    tabkanet::run_study(reinterpret_cast<const ConfigHandle*>(cfg)->cfg);
  });
}

int tk_generate_dataset(const char* name, const char* csv_path,
                        const char* schema_path, uint64_t seed) {
  if (!name || !csv_path || !schema_path)
    return fail(TK_ERR_CONFIG, "null argument");
  return guarded(
      [&] { tabkanet::write_dataset(name, csv_path, schema_path, seed); });
}

const char* tk_dataset_names(void) {
  static const std::string names = [] {
    std::string joined;
    for (const auto& n : tabkanet::synth_dataset_names()) {
      if (!joined.empty()) joined += '\n';
      joined += n;
    }
    return joined;
  }();
  return names.c_str();
}

}  // extern "C"

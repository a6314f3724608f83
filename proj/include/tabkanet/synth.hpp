#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace tabkanet {

// In-memory CSV + schema text for a generated benchmark dataset.
struct SynthFiles {
  std::string csv;
  std::string schema;
};

// Synthetic stand-ins shaped like the public benchmark tables (row counts and
// categorical/numerical splits match), with controlled signal structure:
//   credit-synth    1,000 rows, 15 categorical + 5 numerical, binary
//   biodeg-synth    1,055 rows, 24 categorical + 17 numerical, binary
//   shoppers-synth  12,330 rows, 11 categorical + 6 numerical, binary
//   blobs-binary    separable two-blob toy, 2 numerical, binary
//   blobs-multiclass three-blob toy, 2 numerical, 3 classes
//   linear-regression noisy linear toy, 3 numerical, regression
SynthFiles generate_dataset(const std::string& name, std::uint64_t seed);

std::vector<std::string> synth_dataset_names();

void write_dataset(const std::string& name, const std::string& csv_path,
                   const std::string& schema_path, std::uint64_t seed);

}  // namespace tabkanet

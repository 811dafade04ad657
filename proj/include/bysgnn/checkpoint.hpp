#pragma once

// Checkpoint container: JSON document with a format tag and version, the
// resolved run config, node labels, normalization statistics and every
// parameter (name, shape, values).

#include <filesystem>
#include <string>
#include <vector>

#include "bysgnn/config.hpp"
#include "bysgnn/data.hpp"
#include "bysgnn/tensor.hpp"

namespace bysgnn {

constexpr const char* kCheckpointFormat = "bysgnn-checkpoint";
constexpr int kCheckpointVersion = 1;

struct StoredParameter {
  std::string name;
  Shape shape;
  std::vector<double> values;
};

struct Checkpoint {
  RunConfig config;
  std::vector<std::string> poi_ids;
  std::vector<std::string> node_labels;
  NormalizationStats stats;
  std::vector<StoredParameter> parameters;
  std::size_t epoch = 0;
  double val_mae = 0.0;
};

Checkpoint make_checkpoint(const RunConfig& config, const std::vector<std::string>& poi_ids,
                           const std::vector<std::string>& node_labels, const NormalizationStats& stats,
                           const ParameterStore& params, std::size_t epoch, double val_mae);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
// SchemaError for a wrong format tag, unsupported version or malformed body.
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Copies stored values into `params`; names and shapes must match exactly.
void restore_parameters(const Checkpoint& ckpt, ParameterStore& params);

}  // namespace bysgnn

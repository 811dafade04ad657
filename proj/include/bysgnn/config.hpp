#pragma once

// Run configuration: model, training and data settings, their JSON snapshot,
// and config-file overrides.

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>

#include "bysgnn/model.hpp"

namespace bysgnn {

enum class LossKind { mae, mse };

struct TrainConfig {
  double lr0 = 0.001;
  double decay_factor = 0.2;
  std::size_t decay_every = 10;  // epochs; 0 disables decay
  std::size_t epochs = 40;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
  LossKind loss = LossKind::mae;
  double rho = 0.99;
  double eps = 1e-8;
  std::size_t train_stride = 1;  // hours between consecutive training windows
  std::size_t eval_stride = 1;
};

struct DataConfig {
  std::array<double, 3> split{0.70, 0.20, 0.10};
  std::string embeddings_path;  // optional precomputed node embeddings
  std::string distances_path;   // optional N×N distance matrix in meters
};

struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  DataConfig data;
  unsigned threads = 1;
};

std::string loss_name(LossKind kind);
LossKind parse_loss(const std::string& name);

// Pretty-printed JSON with every resolved setting.
std::string config_to_json(const RunConfig& config);
// Overrides from a JSON document shaped like the snapshot (any subset of
// keys). Unknown keys and wrong types throw ConfigError.
RunConfig apply_config_json(const std::string& text, RunConfig base);
RunConfig load_config_file(const std::filesystem::path& path, RunConfig base);

// Rejects inconsistent settings (e.g. M not divisible by l) with ConfigError.
void validate(const RunConfig& config);

}  // namespace bysgnn

#include "bysgnn/checkpoint.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "bysgnn/error.hpp"
#include "json.hpp"

namespace bysgnn {

using nlohmann::json;

Checkpoint make_checkpoint(const RunConfig& config, const std::vector<std::string>& poi_ids,
                           const std::vector<std::string>& node_labels, const NormalizationStats& stats,
                           const ParameterStore& params, std::size_t epoch, double val_mae) {
  Checkpoint c;
  c.config = config;
  c.poi_ids = poi_ids;
  c.node_labels = node_labels;
  c.stats = stats;
  c.epoch = epoch;
  c.val_mae = val_mae;
  for (const auto& p : params.items())
    c.parameters.push_back({p.name, p.tensor.shape(), {p.tensor.data().begin(), p.tensor.data().end()}});
  return c;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  json j;
  j["format"] = kCheckpointFormat;
  j["version"] = kCheckpointVersion;
  j["config"] = json::parse(config_to_json(ckpt.config));
  j["poi_ids"] = ckpt.poi_ids;
  j["node_labels"] = ckpt.node_labels;
  j["normalization"] = {{"mean", ckpt.stats.mean}, {"std", ckpt.stats.std}};
  j["epoch"] = ckpt.epoch;
  if (std::isfinite(ckpt.val_mae)) j["val_mae"] = ckpt.val_mae;
  else j["val_mae"] = nullptr;
  json params = json::array();
  for (const auto& p : ckpt.parameters) params.push_back({{"name", p.name}, {"shape", p.shape}, {"values", p.values}});
  j["parameters"] = std::move(params);
  std::ofstream out(path);
  if (!out) throw SchemaError("cannot write checkpoint " + path.string());
  out << j.dump() << '\n';
  if (!out) throw SchemaError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open checkpoint " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw SchemaError("checkpoint " + path.string() + " is not valid JSON: " + e.what());
  }
  if (!j.is_object() || j.value("format", "") != kCheckpointFormat) {
    throw SchemaError(path.string() + " is not a checkpoint file");
  }
  if (j.value("version", -1) != kCheckpointVersion) {
    throw SchemaError("unsupported checkpoint version " + j["version"].dump());
  }
  Checkpoint c;
  try {
    c.config = apply_config_json(j.at("config").dump(), RunConfig{});
    c.poi_ids = j.at("poi_ids").get<std::vector<std::string>>();
    c.node_labels = j.at("node_labels").get<std::vector<std::string>>();
    c.stats.mean = j.at("normalization").at("mean").get<std::vector<double>>();
    c.stats.std = j.at("normalization").at("std").get<std::vector<double>>();
    c.stats.floored.assign(c.stats.mean.size(), false);
    c.epoch = j.at("epoch").get<std::size_t>();
    c.val_mae = j.at("val_mae").is_null() ? std::nan("") : j.at("val_mae").get<double>();
    for (const auto& p : j.at("parameters")) {
      StoredParameter sp{p.at("name").get<std::string>(), p.at("shape").get<Shape>(),
                         p.at("values").get<std::vector<double>>()};
      if (shape_numel(sp.shape) != sp.values.size()) throw SchemaError("parameter " + sp.name + " has wrong value count");
      c.parameters.push_back(std::move(sp));
    }
  } catch (const json::exception& e) {
    throw SchemaError("malformed checkpoint " + path.string() + ": " + e.what());
  } catch (const ConfigError& e) {
    throw SchemaError("checkpoint config: " + std::string(e.what()));
  }
  if (c.stats.mean.size() != c.node_labels.size() || c.stats.std.size() != c.node_labels.size()) {
    throw SchemaError("checkpoint normalization stats do not match its node labels");
  }
  return c;
}

void restore_parameters(const Checkpoint& ckpt, ParameterStore& params) {
  auto& items = params.items();
  if (items.size() != ckpt.parameters.size()) {
    throw SchemaError("checkpoint has " + std::to_string(ckpt.parameters.size()) + " parameters, model has " +
                      std::to_string(items.size()));
  }
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto& sp = ckpt.parameters[i];
    if (sp.name != items[i].name || sp.shape != items[i].tensor.shape()) {
      throw SchemaError("checkpoint parameter " + sp.name + " " + shape_str(sp.shape) + " does not match model parameter " +
                        items[i].name + " " + shape_str(items[i].tensor.shape()));
    }
    std::copy(sp.values.begin(), sp.values.end(), items[i].tensor.mutable_data().begin());
  }
}

}  // namespace bysgnn

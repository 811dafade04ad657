#include "bysgnn/config.hpp"

#include <fstream>
#include <sstream>

#include "bysgnn/error.hpp"
#include "json.hpp"

namespace bysgnn {

using nlohmann::json;

std::string loss_name(LossKind kind) { return kind == LossKind::mae ? "mae" : "mse"; }

LossKind parse_loss(const std::string& name) {
  if (name == "mae") return LossKind::mae;
  if (name == "mse") return LossKind::mse;
  throw ConfigError("unknown loss '" + name + "' (valid: mae, mse)");
}

namespace {

json to_json(const RunConfig& c) {
  const auto& m = c.model;
  const auto& t = c.train;
  json j;
  j["model"] = {{"window", m.window},
                {"horizon", m.horizon},
                {"lift_dim", m.lift_dim},
                {"temporal_dim", m.temporal_dim},
                {"semantic_dim", m.semantic_dim},
                {"embed_dim", m.embed_dim},
                {"heads", m.heads},
                {"gnn_hidden", m.gnn_hidden},
                {"gnn_out", m.gnn_out},
                {"amplification", m.amplification},
                {"threshold", m.threshold},
                {"tau_factor", m.tau_factor},
                {"alpha_init", m.alpha_init},
                {"ablations", m.ablations.enabled()}};
  j["train"] = {{"lr0", t.lr0},
                {"decay_factor", t.decay_factor},
                {"decay_every", t.decay_every},
                {"epochs", t.epochs},
                {"batch_size", t.batch_size},
                {"seed", t.seed},
                {"loss", loss_name(t.loss)},
                {"rho", t.rho},
                {"eps", t.eps},
                {"train_stride", t.train_stride},
                {"eval_stride", t.eval_stride}};
  j["data"] = {{"split", c.data.split},
               {"embeddings_path", c.data.embeddings_path},
               {"distances_path", c.data.distances_path}};
  j["threads"] = c.threads;
  return j;
}

template <typename T>
void take(const json& obj, const char* key, T& out, const std::string& section) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config key " + section + "." + key + " has the wrong type");
  }
}

void reject_unknown(const json& obj, const json& known, const std::string& section) {
  if (!obj.is_object()) throw ConfigError("config section '" + section + "' must be an object");
  for (const auto& [key, _] : obj.items()) {
    if (!known.contains(key)) {
      std::string valid;
      for (const auto& [k, __] : known.items()) valid += (valid.empty() ? "" : ", ") + k;
      throw ConfigError("unknown config key '" + (section.empty() ? key : section + "." + key) + "' (valid: " + valid + ")");
    }
  }
}

}  // namespace

std::string config_to_json(const RunConfig& config) { return to_json(config).dump(2) + "\n"; }

RunConfig apply_config_json(const std::string& text, RunConfig c) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  const json known = to_json(c);
  reject_unknown(j, known, "");
  if (j.contains("model")) {
    const auto& m = j["model"];
    reject_unknown(m, known["model"], "model");
    auto& mc = c.model;
    take(m, "window", mc.window, "model");
    take(m, "horizon", mc.horizon, "model");
    take(m, "lift_dim", mc.lift_dim, "model");
    take(m, "temporal_dim", mc.temporal_dim, "model");
    take(m, "semantic_dim", mc.semantic_dim, "model");
    take(m, "embed_dim", mc.embed_dim, "model");
    take(m, "heads", mc.heads, "model");
    take(m, "gnn_hidden", mc.gnn_hidden, "model");
    take(m, "gnn_out", mc.gnn_out, "model");
    take(m, "amplification", mc.amplification, "model");
    take(m, "threshold", mc.threshold, "model");
    take(m, "tau_factor", mc.tau_factor, "model");
    take(m, "alpha_init", mc.alpha_init, "model");
    if (m.contains("ablations")) {
      std::vector<std::string> names;
      take(m, "ablations", names, "model");
      mc.ablations = Ablations{};
      for (const auto& n : names) mc.ablations.enable(n);
    }
  }
  if (j.contains("train")) {
    const auto& t = j["train"];
    reject_unknown(t, known["train"], "train");
    auto& tc = c.train;
    take(t, "lr0", tc.lr0, "train");
    take(t, "decay_factor", tc.decay_factor, "train");
    take(t, "decay_every", tc.decay_every, "train");
    take(t, "epochs", tc.epochs, "train");
    take(t, "batch_size", tc.batch_size, "train");
    take(t, "seed", tc.seed, "train");
    take(t, "rho", tc.rho, "train");
    take(t, "eps", tc.eps, "train");
    take(t, "train_stride", tc.train_stride, "train");
    take(t, "eval_stride", tc.eval_stride, "train");
    if (t.contains("loss")) {
      std::string name;
      take(t, "loss", name, "train");
      tc.loss = parse_loss(name);
    }
  }
  if (j.contains("data")) {
    const auto& d = j["data"];
    reject_unknown(d, known["data"], "data");
    take(d, "split", c.data.split, "data");
    take(d, "embeddings_path", c.data.embeddings_path, "data");
    take(d, "distances_path", c.data.distances_path, "data");
  }
  take(j, "threads", c.threads, "");
  return c;
}

RunConfig load_config_file(const std::filesystem::path& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return apply_config_json(ss.str(), std::move(base));
}

void validate(const RunConfig& c) {
  const auto& m = c.model;
  const auto& t = c.train;
  if (m.window == 0 || m.horizon == 0) throw ConfigError("window and horizon must be positive");
  if (m.lift_dim == 0 || m.temporal_dim < 2 || m.semantic_dim == 0 || m.embed_dim == 0 || m.gnn_hidden == 0 ||
      m.gnn_out == 0) {
    throw ConfigError("model dimensions must be positive (temporal_dim >= 2)");
  }
  if (m.heads == 0 || m.temporal_dim % m.heads != 0) {
    throw ConfigError("temporal_dim " + std::to_string(m.temporal_dim) + " is not divisible by heads " +
                      std::to_string(m.heads));
  }
  if (!(m.amplification > 0.0)) throw ConfigError("amplification must be positive");
  if (!(m.threshold > 0.0 && m.threshold < 1.0)) throw ConfigError("threshold must lie in (0, 1)");
  if (!(m.tau_factor > 0.0)) throw ConfigError("tau_factor must be positive");
  if (!(m.alpha_init > 0.0 && m.alpha_init < 1.0)) throw ConfigError("alpha_init must lie in (0, 1)");
  if (!(t.lr0 > 0.0) || !(t.decay_factor > 0.0) || t.epochs == 0 || t.batch_size == 0) {
    throw ConfigError("lr0, decay_factor, epochs and batch_size must be positive");
  }
  if (!(t.rho >= 0.0 && t.rho < 1.0) || !(t.eps > 0.0)) throw ConfigError("rho must lie in [0, 1) and eps be positive");
  if (t.train_stride == 0 || t.eval_stride == 0) throw ConfigError("window strides must be positive");
  double total = 0;
  for (double f : c.data.split) {
    if (f < 0.0) throw ConfigError("split fractions must be non-negative");
    total += f;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ConfigError("split fractions must sum to 1");
  if (c.threads == 0) throw ConfigError("threads must be at least 1");
}

}  // namespace bysgnn

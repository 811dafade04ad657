#include "bysgnn/model.hpp"

#include <cmath>

#include "bysgnn/error.hpp"
#include "bysgnn/ops.hpp"

namespace bysgnn {

const std::vector<std::string>& Ablations::names() {
  static const std::vector<std::string> kNames{"no_semantics", "no_space", "no_metanodes", "no_self_attention",
                                               "no_adj_threshold"};
  return kNames;
}

void Ablations::enable(const std::string& name) {
  if (name == "no_semantics") no_semantics = true;
  else if (name == "no_space") no_space = true;
  else if (name == "no_metanodes") no_metanodes = true;
  else if (name == "no_self_attention") no_self_attention = true;
  else if (name == "no_adj_threshold") no_adj_threshold = true;
  else {
    std::string valid;
    for (const auto& n : names()) valid += (valid.empty() ? "" : ", ") + n;
    throw ConfigError("unknown ablation '" + name + "' (valid: " + valid + ")");
  }
}

std::vector<std::string> Ablations::enabled() const {
  const bool flags[] = {no_semantics, no_space, no_metanodes, no_self_attention, no_adj_threshold};
  std::vector<std::string> out;
  for (std::size_t i = 0; i < names().size(); ++i)
    if (flags[i]) out.push_back(names()[i]);
  return out;
}

BysGnnModel::BysGnnModel(const ModelConfig& config, GraphContext context, std::uint64_t seed)
    : config_(config), context_(std::move(context)) {
  const std::size_t s = context_.num_nodes(), n = context_.num_pois;
  const auto& ab = config_.ablations;
  if (s == 0 || n == 0 || n > s) throw ConfigError("model needs at least one POI node");
  if (ab.no_metanodes && s != n) throw ConfigError("no_metanodes: context must contain POI nodes only");
  if (context_.spatial.distances.rows != n) throw ConfigError("spatial context does not match the POI count");
  if (!ab.no_semantics && (context_.raw_embeddings.rows != s || context_.raw_embeddings.cols != config_.embed_dim)) {
    throw ConfigError("raw embeddings must be " + std::to_string(s) + "x" + std::to_string(config_.embed_dim));
  }
  if (!(config_.alpha_init > 0.0 && config_.alpha_init < 1.0)) throw ConfigError("alpha_init must lie in (0, 1)");
  if (config_.window == 0 || config_.horizon == 0) throw ConfigError("window and horizon must be positive");

  std::mt19937_64 rng(seed);
  encoder_ = TemporalEncoder({s, config_.lift_dim, config_.temporal_dim, !ab.no_self_attention}, params_, rng);
  if (!ab.no_semantics) {
    projection_ = SemanticProjection(config_.embed_dim, config_.semantic_dim, params_, rng);
    raw_ = Tensor::from({s, config_.embed_dim}, context_.raw_embeddings.values);
  }
  attention_ = TemporalAttention(config_.temporal_dim, config_.heads, params_, rng);
  if (!ab.no_semantics && !ab.no_space) {
    alpha_raw_ = params_.add_constant("graph.alpha_raw", {}, std::log(config_.alpha_init / (1.0 - config_.alpha_init)));
  }
  if (!ab.no_space) S_D_ = Tensor::from({s, s}, spatial_similarity(context_.spatial, s));
  const std::size_t in_dim = config_.temporal_dim + (ab.no_semantics ? 0 : config_.semantic_dim);
  gnn_ = GnnBlock({in_dim, config_.gnn_hidden, config_.gnn_out, config_.horizon}, params_, rng);
}

double BysGnnModel::alpha() const {
  if (alpha_raw_.defined()) return 1.0 / (1.0 + std::exp(-alpha_raw_.item()));
  return config_.ablations.no_semantics ? 1.0 : 0.0;
}

ForwardResult BysGnnModel::forward(const Tensor& windows) const {
  const auto& ab = config_.ablations;
  if (windows.rank() != 3 || windows.dim(1) != num_nodes() || windows.dim(2) != config_.window) {
    throw ConfigError("model input must be [B, " + std::to_string(num_nodes()) + ", " + std::to_string(config_.window) +
                      "], got " + shape_str(windows.shape()));
  }
  ForwardResult r;
  r.embeddings = encoder_.encode(windows).embeddings;
  r.S_T = attention_.scores(r.embeddings);
  r.S_D = S_D_;
  if (!ab.no_semantics) {
    r.semantic = projection_.project(raw_);
    r.S_E = semantic_similarity(r.semantic);
    r.features = build_node_features(r.embeddings, r.semantic);
  } else {
    r.features = r.embeddings;
  }
  if (ab.no_semantics && ab.no_space) r.fused = r.S_T;
  else if (ab.no_semantics) r.fused = fuse_gate(S_D_, S_D_, r.S_T, Tensor(), GateMode::spatial_only);
  else if (ab.no_space) r.fused = fuse_gate(r.S_E, r.S_E, r.S_T, Tensor(), GateMode::semantic_only);
  else r.fused = fuse_gate(r.S_E, S_D_, r.S_T, alpha_raw_);
  if (ab.no_adj_threshold) {
    r.adjacency = r.fused;
  } else {
    auto th = amplify_threshold(r.fused, config_.amplification, config_.threshold);
    r.adjacency = th.adjacency;
    r.zeroed_rows = std::move(th.zeroed_rows);
  }
  const auto graph = build_graph(r.features, r.adjacency);
  r.gnn_output = gnn_.propagate(graph);
  r.prediction = gnn_.head(r.gnn_output, r.features);
  return r;
}

}  // namespace bysgnn

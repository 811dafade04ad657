#pragma once

// Full forecaster: temporal encoder, semantic projection, dynamic graph and
// GNN block, with the five ablation switches.

#include <cstdint>
#include <string>
#include <vector>

#include "bysgnn/encoder.hpp"
#include "bysgnn/gnn.hpp"
#include "bysgnn/graphgen.hpp"
#include "bysgnn/semantics.hpp"

namespace bysgnn {

struct Ablations {
  bool no_semantics = false;
  bool no_space = false;
  bool no_metanodes = false;
  bool no_self_attention = false;
  bool no_adj_threshold = false;

  static const std::vector<std::string>& names();
  // Sets one flag by name; ConfigError for unknown names.
  void enable(const std::string& name);
  std::vector<std::string> enabled() const;
  bool any() const { return !enabled().empty(); }
};

struct ModelConfig {
  std::size_t window = 24;        // T
  std::size_t horizon = 6;        // H
  std::size_t lift_dim = 64;      // D
  std::size_t temporal_dim = 128; // M
  std::size_t semantic_dim = 168; // P
  std::size_t embed_dim = 768;    // E
  std::size_t heads = 8;          // l
  std::size_t gnn_hidden = 64;
  std::size_t gnn_out = 32;       // M*
  double amplification = 2.5;     // p
  double threshold = 0.15;        // η
  double tau_factor = 2.0;        // τ = factor · σ
  double alpha_init = 0.5;
  Ablations ablations;
};

// Dataset-derived, frozen model inputs for the nodes the model sees.
struct GraphContext {
  SeriesMatrix raw_embeddings;   // S × E
  SpatialContext spatial;        // over the N POIs
  std::vector<std::string> node_labels;
  std::size_t num_pois = 0;

  std::size_t num_nodes() const { return node_labels.size(); }
};

struct ForwardResult {
  Tensor prediction;    // [B, S, H], normalized units
  Tensor embeddings;    // C
  Tensor semantic;      // Û (undefined under no_semantics)
  Tensor S_E, S_D, S_T;
  Tensor fused;         // S
  Tensor adjacency;     // Ŝ
  Tensor features;      // V
  Tensor gnn_output;    // V'
  std::vector<std::size_t> zeroed_rows;
};

class BysGnnModel {
 public:
  BysGnnModel(const ModelConfig& config, GraphContext context, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  const GraphContext& context() const { return context_; }
  std::size_t num_nodes() const { return context_.num_nodes(); }
  ParameterStore& parameters() { return params_; }
  const ParameterStore& parameters() const { return params_; }

  // windows: [B, S, T] normalized inputs.
  ForwardResult forward(const Tensor& windows) const;
  // Gate weight α, or the constant implied by an ablation (1 for spatial
  // only, 0 for semantic only).
  double alpha() const;

 private:
  ModelConfig config_;
  GraphContext context_;
  ParameterStore params_;
  TemporalEncoder encoder_;
  SemanticProjection projection_;
  TemporalAttention attention_;
  GnnBlock gnn_;
  Tensor alpha_raw_;
  Tensor raw_;  // frozen [S, E]
  Tensor S_D_;
};

}  // namespace bysgnn

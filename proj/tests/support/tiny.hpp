#pragma once

// Small synthetic fixtures shared by model, training and acceptance tests.

#include "bysgnn/synthetic.hpp"
#include "bysgnn/training.hpp"

namespace bysgnn::testing {

// 4 POIs in 2 categories, T=8, D=8, M=16, P=8, M*=8, l=2, E=16.
inline RunConfig tiny_config() {
  RunConfig c;
  c.model.window = 8;
  c.model.horizon = 2;
  c.model.lift_dim = 8;
  c.model.temporal_dim = 16;
  c.model.semantic_dim = 8;
  c.model.embed_dim = 16;
  c.model.heads = 2;
  c.model.gnn_hidden = 8;
  c.model.gnn_out = 8;
  c.train.epochs = 2;
  c.train.batch_size = 4;
  return c;
}

inline SyntheticData tiny_synthetic(std::uint64_t seed = 3, std::size_t days = 14) {
  SynthSpec spec;
  spec.n_pois = 4;
  spec.n_categories = 2;
  spec.days = days;
  spec.clusters = 2;
  spec.regime_shift_day = 0;
  return generate_synthetic(spec, seed);
}

inline PreparedData tiny_data(const RunConfig& config, std::uint64_t seed = 3) {
  auto syn = tiny_synthetic(seed);
  return prepare_data(syn.dataset, syn.metadata, config);
}

}  // namespace bysgnn::testing

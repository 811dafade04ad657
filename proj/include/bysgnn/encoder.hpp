#pragma once

// Per-series temporal encoder: scalar lift (1 -> D -> D), GRU over the window,
// attention-weighted summary of the hidden states, residual + layer norm.
//
// Every series owns its lift and GRU weights; they are stored stacked along a
// leading series axis so that all series run in one batched pass. The
// attention vector W_a and the layer-norm affine are shared.

#include <random>
#include <string>
#include <vector>

#include "bysgnn/tensor.hpp"

namespace bysgnn {

struct EncoderConfig {
  std::size_t num_series = 0;
  std::size_t lift_dim = 64;    // D
  std::size_t hidden_dim = 128; // M
  bool self_attention = true;   // false: c = layer_norm(z)
};

struct GruStates {
  std::vector<Tensor> states;  // T tensors of [S, B, M]
  Tensor last;                 // z = states.back()
};

struct AttentionSummary {
  Tensor weights;   // [S*B, 1, T], rows sum to 1
  Tensor pre_norm;  // z + ẑ, [S, B, M]
  Tensor output;    // [S, B, M]
};

struct EncoderOutput {
  Tensor embeddings;  // C, [B, S, M]
  GruStates gru;
  AttentionSummary attention;
};

class TemporalEncoder {
 public:
  TemporalEncoder() = default;
  TemporalEncoder(const EncoderConfig& config, ParameterStore& store, std::mt19937_64& rng,
                  const std::string& prefix = "encoder");

  const EncoderConfig& config() const { return config_; }

  // x: [S, R, 1] scalars -> [S, R, D].
  Tensor lift(const Tensor& x) const;
  // lifted: [S, T*B, D] with time-major rows (row t*B + b).
  GruStates gru(const Tensor& lifted, std::size_t steps, std::size_t batch) const;
  AttentionSummary attend(const GruStates& gru) const;

  // windows: [B, S, T] normalized input values (data, not differentiated).
  EncoderOutput encode(const Tensor& windows) const;

  Tensor W1, b1, W2, b2;      // lift
  Tensor W_x, W_h, b_x, b_h;  // GRU, gate blocks [reset | update | candidate]
  Tensor W_a;                 // [2M, 1]
  Tensor ln_gain, ln_bias;

 private:
  EncoderConfig config_;
};

}  // namespace bysgnn

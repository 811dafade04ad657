#pragma once

// Three-layer graph convolution over the busyness graph and the linear
// forecast head.

#include <array>
#include <random>
#include <string>

#include "bysgnn/graphgen.hpp"
#include "bysgnn/tensor.hpp"

namespace bysgnn {

struct GnnConfig {
  std::size_t in_dim = 0;   // M + P
  std::size_t hidden = 64;
  std::size_t out_dim = 32; // M*
  std::size_t horizon = 6;  // H
};

// D^{-1/2} (max(S, 0) + I) D^{-1/2} with D the row sums of max(S, 0) + I.
// S is [S, S] or [B, S, S].
Tensor normalized_adjacency(const Tensor& S_hat);

// x + b over the last axis for any rank.
Tensor add_bias(const Tensor& x, const Tensor& b);

class GnnBlock {
 public:
  GnnBlock() = default;
  GnnBlock(const GnnConfig& config, ParameterStore& store, std::mt19937_64& rng, const std::string& prefix = "gnn");

  const GnnConfig& config() const { return config_; }

  // V' after layers with tanh, tanh, identity.
  Tensor propagate(const BusynessGraph& graph) const;
  // Ŷ = (V' ∥ V) W + b.
  Tensor head(const Tensor& v_prime, const Tensor& V) const;

  std::array<Tensor, 3> W, b;
  Tensor W_head, b_head;

 private:
  GnnConfig config_;
};

}  // namespace bysgnn

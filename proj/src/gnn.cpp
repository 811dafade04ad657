#include "bysgnn/gnn.hpp"

#include "bysgnn/error.hpp"
#include "bysgnn/ops.hpp"

namespace bysgnn {

Tensor add_bias(const Tensor& x, const Tensor& b) {
  if (x.rank() <= 2) return ops::add(x, b);
  const std::size_t n = x.shape().back();
  return ops::reshape(ops::add(ops::reshape(x, {x.numel() / n, n}), b), x.shape());
}

Tensor normalized_adjacency(const Tensor& S_hat) {
  const std::size_t r = S_hat.rank();
  if (r < 2 || r > 3 || S_hat.dim(r - 1) != S_hat.dim(r - 2)) {
    throw DimensionError("normalized_adjacency: expected square adjacency, got " + shape_str(S_hat.shape()));
  }
  Tensor eye = Tensor::eye(S_hat.dim(r - 1));
  if (r == 3) eye = ops::broadcast_batch(eye, S_hat.dim(0));
  const Tensor A = ops::add(ops::clamp_min(S_hat, 0.0), eye);
  const Tensor dinv = ops::pow(ops::sum_last(A), -0.5);
  // scale columns, then rows (through a transpose)
  const Tensor cols = ops::mul(A, dinv);
  return ops::transpose(ops::mul(ops::transpose(cols), dinv));
}

GnnBlock::GnnBlock(const GnnConfig& config, ParameterStore& store, std::mt19937_64& rng, const std::string& prefix)
    : config_(config) {
  if (config.in_dim == 0 || config.hidden == 0 || config.out_dim == 0 || config.horizon == 0) {
    throw ConfigError("gnn: all dimensions must be positive");
  }
  const std::array<std::size_t, 4> dims{config.in_dim, config.hidden, config.hidden, config.out_dim};
  for (std::size_t l = 0; l < 3; ++l) {
    W[l] = store.add_weight(prefix + ".layer" + std::to_string(l + 1) + ".W", {dims[l], dims[l + 1]}, dims[l], rng);
    b[l] = store.add_zeros(prefix + ".layer" + std::to_string(l + 1) + ".b", {dims[l + 1]});
  }
  const std::size_t head_in = config.out_dim + config.in_dim;
  W_head = store.add_weight(prefix + ".head.W", {head_in, config.horizon}, head_in, rng);
  b_head = store.add_zeros(prefix + ".head.b", {config.horizon});
}

Tensor GnnBlock::propagate(const BusynessGraph& graph) const {
  if (graph.features.shape().back() != config_.in_dim) {
    throw DimensionError("gnn: feature width " + std::to_string(graph.features.shape().back()) + ", expected " +
                         std::to_string(config_.in_dim));
  }
  const Tensor a_hat = normalized_adjacency(graph.adjacency);
  Tensor h = graph.features;
  for (std::size_t l = 0; l < 3; ++l) {
    h = add_bias(ops::matmul(a_hat, ops::matmul(h, W[l])), b[l]);
    if (l < 2) h = ops::tanh(h);
  }
  return h;
}

Tensor GnnBlock::head(const Tensor& v_prime, const Tensor& V) const {
  return add_bias(ops::matmul(ops::concat_last({v_prime, V}), W_head), b_head);
}

}  // namespace bysgnn

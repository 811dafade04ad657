#include "bysgnn/encoder.hpp"

#include "bysgnn/error.hpp"
#include "bysgnn/ops.hpp"

namespace bysgnn {

TemporalEncoder::TemporalEncoder(const EncoderConfig& config, ParameterStore& store, std::mt19937_64& rng,
                                 const std::string& prefix)
    : config_(config) {
  const std::size_t s = config.num_series, d = config.lift_dim, m = config.hidden_dim;
  if (s == 0 || d == 0 || m < 2) throw ConfigError("encoder: series, lift and hidden sizes must be positive (hidden >= 2)");
  W1 = store.add_weight(prefix + ".lift.W1", {s, 1, d}, 1, rng);
  b1 = store.add_zeros(prefix + ".lift.b1", {s, d});
  W2 = store.add_weight(prefix + ".lift.W2", {s, d, d}, d, rng);
  b2 = store.add_zeros(prefix + ".lift.b2", {s, d});
  W_x = store.add_weight(prefix + ".gru.W_x", {s, d, 3 * m}, d, rng);
  W_h = store.add_weight(prefix + ".gru.W_h", {s, m, 3 * m}, m, rng);
  b_x = store.add_zeros(prefix + ".gru.b_x", {s, 3 * m});
  b_h = store.add_zeros(prefix + ".gru.b_h", {s, 3 * m});
  if (config_.self_attention) W_a = store.add_weight(prefix + ".attention.W_a", {2 * m, 1}, 2 * m, rng);
  ln_gain = store.add_constant(prefix + ".norm.gain", {m}, 1.0);
  ln_bias = store.add_zeros(prefix + ".norm.bias", {m});
}

Tensor TemporalEncoder::lift(const Tensor& x) const {
  if (x.rank() != 3 || x.dim(0) != config_.num_series || x.dim(2) != 1) {
    throw DimensionError("encoder lift: expected [" + std::to_string(config_.num_series) + ", R, 1], got " +
                         shape_str(x.shape()));
  }
  const Tensor h = ops::tanh(ops::add(ops::matmul(x, W1), b1));
  return ops::add(ops::matmul(h, W2), b2);
}

GruStates TemporalEncoder::gru(const Tensor& lifted, std::size_t steps, std::size_t batch) const {
  const std::size_t s = config_.num_series, m = config_.hidden_dim;
  if (steps == 0) throw ConfigError("encoder: window length must be >= 1");
  if (lifted.rank() != 3 || lifted.dim(0) != s || lifted.dim(1) != steps * batch) {
    throw DimensionError("encoder gru: bad input shape " + shape_str(lifted.shape()));
  }
  const Tensor xp = ops::add(ops::matmul(lifted, W_x), b_x);
  GruStates out;
  Tensor h = Tensor::zeros({s, batch, m});
  for (std::size_t t = 0; t < steps; ++t) {
    const Tensor xt = ops::slice_rows(xp, t * batch, (t + 1) * batch);
    const Tensor hp = ops::add(ops::matmul(h, W_h), b_h);
    h = ops::gru_cell(xt, hp, h);  // (1 - z) h + z n
    out.states.push_back(h);
  }
  out.last = h;
  return out;
}

AttentionSummary TemporalEncoder::attend(const GruStates& gru) const {
  const Tensor& z = gru.last;
  const std::size_t s = z.dim(0), b = z.dim(1), m = z.dim(2), t = gru.states.size();
  AttentionSummary out;
  if (!config_.self_attention) {
    out.pre_norm = z;
    out.output = ops::layer_norm_last(z, ln_gain, ln_bias);
    return out;
  }
  const Tensor hs = ops::reshape(ops::concat_last(gru.states), {s * b, t, m});
  // W_a [h ∥ z] = W_a[:M] h + W_a[M:] z, the z term shared across steps.
  const Tensor from_h = ops::matmul(hs, ops::slice_rows(W_a, 0, m));                               // [SB, T, 1]
  const Tensor from_z = ops::matmul(ops::reshape(z, {s * b, m}), ops::slice_rows(W_a, m, 2 * m));  // [SB, 1]
  const Tensor scores = ops::tanh(ops::add(from_h, from_z));
  out.weights = ops::softmax_last(ops::reshape(scores, {s * b, 1, t}));
  const Tensor summary = ops::reshape(ops::matmul(out.weights, hs), {s, b, m});
  out.pre_norm = ops::add(z, summary);
  out.output = ops::layer_norm_last(out.pre_norm, ln_gain, ln_bias);
  return out;
}

EncoderOutput TemporalEncoder::encode(const Tensor& windows) const {
  if (windows.rank() != 3 || windows.dim(1) != config_.num_series) {
    throw ConfigError("encoder: expected windows [B, " + std::to_string(config_.num_series) + ", T], got " +
                      shape_str(windows.shape()));
  }
  const std::size_t b = windows.dim(0), s = windows.dim(1), t = windows.dim(2);
  const auto src = windows.data();
  std::vector<double> x(s * t * b);
  for (std::size_t bi = 0; bi < b; ++bi)
    for (std::size_t si = 0; si < s; ++si)
      for (std::size_t ti = 0; ti < t; ++ti) x[(si * t + ti) * b + bi] = src[(bi * s + si) * t + ti];
  EncoderOutput out;
  out.gru = gru(lift(Tensor::from({s, t * b, 1}, std::move(x))), t, b);
  out.attention = attend(out.gru);
  out.embeddings = ops::swap_leading(out.attention.output);
  return out;
}

}  // namespace bysgnn

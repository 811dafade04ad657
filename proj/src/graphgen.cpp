#include "bysgnn/graphgen.hpp"

#include <cmath>
#include <fstream>
#include <numbers>

#include "bysgnn/csv.hpp"
#include "bysgnn/error.hpp"
#include "bysgnn/ops.hpp"

namespace bysgnn {

namespace {
constexpr double kEarthRadius = 6371008.8;
}

SeriesMatrix distance_matrix(const std::vector<PoiMetadata>& metadata) {
  const std::size_t n = metadata.size();
  double lat0 = 0, lon0 = 0;
  for (const auto& m : metadata) {
    lat0 += m.latitude;
    lon0 += m.longitude;
  }
  if (n > 0) {
    lat0 /= static_cast<double>(n);
    lon0 /= static_cast<double>(n);
  }
  const double rad = std::numbers::pi / 180.0;
  const double kx = kEarthRadius * std::cos(lat0 * rad) * rad, ky = kEarthRadius * rad;
  std::vector<double> x(n), y(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = (metadata[i].longitude - lon0) * kx;
    y[i] = (metadata[i].latitude - lat0) * ky;
  }
  SeriesMatrix d(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) d.at(i, j) = d.at(j, i) = std::hypot(x[i] - x[j], y[i] - y[j]);
  return d;
}

SeriesMatrix load_distance_matrix_csv(const std::filesystem::path& path, std::size_t n) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open distance matrix " + path.string());
  const auto rows = csv::read_all(in);
  if (rows.size() != n) throw SchemaError("distance matrix has " + std::to_string(rows.size()) + " rows, expected " + std::to_string(n));
  SeriesMatrix d(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    if (rows[i].fields.size() != n) throw ParseError("expected " + std::to_string(n) + " distances", rows[i].line);
    for (std::size_t j = 0; j < n; ++j) {
      const double v = csv::parse_double(rows[i].fields[j], rows[i].line);
      if (!(v >= 0.0) || !std::isfinite(v)) throw ParseError("distance must be finite and non-negative", rows[i].line);
      d.at(i, j) = v;
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (d.at(i, i) != 0.0) throw SchemaError("distance matrix diagonal must be zero (row " + std::to_string(i) + ")");
    for (std::size_t j = 0; j < i; ++j)
      if (std::fabs(d.at(i, j) - d.at(j, i)) > 1e-9 * std::max(1.0, d.at(i, j)))
        throw SchemaError("distance matrix is not symmetric at (" + std::to_string(i) + "," + std::to_string(j) + ")");
  }
  return d;
}

SpatialContext SpatialContext::from_distances(SeriesMatrix distances, double tau_factor) {
  if (distances.rows != distances.cols) throw DimensionError("distance matrix must be square");
  if (!(tau_factor > 0.0)) throw ConfigError("tau factor must be positive");
  SpatialContext ctx;
  const std::size_t n = distances.rows;
  double sum = 0, sq = 0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      sum += distances.at(i, j);
      ++count;
    }
  const double mean = count ? sum / static_cast<double>(count) : 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) sq += (distances.at(i, j) - mean) * (distances.at(i, j) - mean);
  ctx.sigma = count ? std::sqrt(sq / static_cast<double>(count)) : 0.0;
  ctx.tau = tau_factor * ctx.sigma;
  if (ctx.sigma == 0.0) {
    ctx.sigma_degenerate = true;
    ctx.tau = 1.0;
  }
  ctx.distances = std::move(distances);
  return ctx;
}

double gaussian_kernel(double d, double sigma, double tau) {
  if (d >= tau) return 0.0;
  if (sigma == 0.0) return 1.0;
  return std::exp(-(d * d) / (sigma * sigma));
}

std::vector<double> spatial_similarity(const SpatialContext& ctx, std::size_t num_nodes) {
  const std::size_t n = ctx.distances.rows;
  if (num_nodes < n) throw ConfigError("spatial similarity: fewer nodes than POIs");
  std::vector<double> s(num_nodes * num_nodes, 1.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) s[i * num_nodes + j] = gaussian_kernel(ctx.distances.at(i, j), ctx.sigma, ctx.tau);
  return s;
}

Tensor semantic_similarity(const Tensor& U, std::vector<std::size_t>* zero_rows) {
  if (U.rank() != 2) throw DimensionError("semantic similarity expects [S, P]");
  if (zero_rows) {
    zero_rows->clear();
    const auto v = U.data();
    const std::size_t p = U.dim(1);
    for (std::size_t i = 0; i < U.dim(0); ++i) {
      bool zero = true;
      for (std::size_t j = 0; j < p && zero; ++j) zero = v[i * p + j] == 0.0;
      if (zero) zero_rows->push_back(i);
    }
  }
  return ops::cosine_similarity_rows(U);
}

TemporalAttention::TemporalAttention(std::size_t dim, std::size_t heads, ParameterStore& store, std::mt19937_64& rng,
                                     const std::string& prefix)
    : dim_(dim), heads_(heads) {
  if (heads == 0 || dim % heads != 0) {
    throw ConfigError("temporal dimension " + std::to_string(dim) + " is not divisible by " + std::to_string(heads) +
                      " heads");
  }
  W_Q = store.add_weight(prefix + ".W_Q", {dim, dim}, dim, rng);
  W_K = store.add_weight(prefix + ".W_K", {dim, dim}, dim, rng);
  W_V = store.add_weight(prefix + ".W_V", {dim, dim}, dim, rng);
  W_O = store.add_weight(prefix + ".W_O", {dim, dim}, dim, rng);
}

std::vector<Tensor> TemporalAttention::head_logits(const Tensor& C) const {
  if (C.rank() < 2 || C.shape().back() != dim_) throw DimensionError("temporal attention: bad input " + shape_str(C.shape()));
  const std::size_t dk = dim_ / heads_;
  const Tensor q = ops::matmul(C, W_Q), k = ops::matmul(C, W_K);
  const double inv = 1.0 / std::sqrt(static_cast<double>(dim_));
  std::vector<Tensor> out;
  for (std::size_t h = 0; h < heads_; ++h) {
    const Tensor qh = ops::slice_last(q, h * dk, (h + 1) * dk);
    const Tensor kh = ops::slice_last(k, h * dk, (h + 1) * dk);
    out.push_back(ops::scale(ops::matmul(qh, ops::transpose(kh)), inv));
  }
  return out;
}

Tensor TemporalAttention::scores(const Tensor& C) const {
  Tensor total;
  for (const auto& logits : head_logits(C)) {
    const Tensor a = ops::softmax_last(logits);
    total = total.defined() ? ops::add(total, a) : a;
  }
  return ops::scale(total, 1.0 / static_cast<double>(heads_));
}

Tensor TemporalAttention::multihead_output(const Tensor& C) const {
  const std::size_t dk = dim_ / heads_;
  const Tensor v = ops::matmul(C, W_V);
  const auto logits = head_logits(C);
  std::vector<Tensor> heads;
  for (std::size_t h = 0; h < heads_; ++h)
    heads.push_back(ops::matmul(ops::softmax_last(logits[h]), ops::slice_last(v, h * dk, (h + 1) * dk)));
  return ops::matmul(ops::concat_last(heads), W_O);
}

Tensor fuse_gate(const Tensor& S_E, const Tensor& S_D, const Tensor& S_T, const Tensor& alpha_raw, GateMode mode) {
  if (S_E.shape() != S_D.shape() || S_E.rank() != 2) throw DimensionError("fuse_gate: S_E and S_D must share an [S, S] shape");
  const Shape& st = S_T.shape();
  if (st.size() < 2 || st[st.size() - 1] != S_E.dim(1) || st[st.size() - 2] != S_E.dim(0)) {
    throw DimensionError("fuse_gate: S_T shape " + shape_str(st) + " does not match " + shape_str(S_E.shape()));
  }
  Tensor gate;
  switch (mode) {
    case GateMode::semantic_only: gate = S_E; break;
    case GateMode::spatial_only: gate = S_D; break;
    case GateMode::fused: {
      const Tensor alpha = ops::sigmoid(alpha_raw);
      gate = ops::add(S_E, ops::mul(ops::sub(S_D, S_E), alpha));
      break;
    }
  }
  if (S_T.rank() == 3) gate = ops::broadcast_batch(gate, S_T.dim(0));
  return ops::mul(gate, S_T);
}

std::vector<double> threshold_mask(std::span<const double> values, std::size_t cols, double p, double eta,
                                   std::vector<std::size_t>* zeroed_rows) {
  if (!(p > 0.0)) throw ConfigError("amplification power must be positive");
  if (!(eta > 0.0 && eta < 1.0)) throw ConfigError("threshold eta must lie in (0, 1)");
  std::vector<double> mask(values.size(), 0.0);
  const std::size_t rows = cols ? values.size() / cols : 0;
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = values.data() + r * cols;
    double mx = row[0];
    for (std::size_t j = 1; j < cols; ++j) mx = std::max(mx, row[j]);
    if (!(mx > 0.0)) {
      if (zeroed_rows) zeroed_rows->push_back(r);
      continue;
    }
    for (std::size_t j = 0; j < cols; ++j)
      if (row[j] > 0.0 && std::pow(row[j] / mx, p) > eta) mask[r * cols + j] = 1.0;
  }
  return mask;
}

ThresholdResult amplify_threshold(const Tensor& S, double p, double eta) {
  if (S.rank() < 2) throw DimensionError("amplify_threshold: rank >= 2 required");
  ThresholdResult out;
  const auto mask = threshold_mask(S.data(), S.shape().back(), p, eta, &out.zeroed_rows);
  for (double m : mask) out.kept += m != 0.0;
  out.adjacency = ops::apply_mask(S, mask);
  return out;
}

BusynessGraph build_graph(const Tensor& V, const Tensor& S_hat) {
  const std::size_t r = S_hat.rank();
  if (r < 2 || S_hat.dim(r - 1) != S_hat.dim(r - 2) || V.rank() != r || V.dim(r - 2) != S_hat.dim(r - 1) ||
      (r == 3 && V.dim(0) != S_hat.dim(0))) {
    throw DimensionError("build_graph: features " + shape_str(V.shape()) + " vs adjacency " + shape_str(S_hat.shape()));
  }
  return {V, S_hat};
}

void write_labeled_matrix_csv(const std::filesystem::path& path, const std::vector<std::string>& row_labels,
                              const std::vector<std::string>& col_labels, const SeriesMatrix& values) {
  if (row_labels.size() != values.rows || col_labels.size() != values.cols) throw DimensionError("label count mismatch");
  std::ofstream out(path);
  if (!out) throw SchemaError("cannot write " + path.string());
  out << "node";
  for (const auto& l : col_labels) out << ',' << csv::escape(l);
  out << '\n';
  for (std::size_t i = 0; i < values.rows; ++i) {
    out << csv::escape(row_labels[i]);
    for (double v : values.row(i)) out << ',' << csv::format_double(v);
    out << '\n';
  }
}

LabeledMatrix read_adjacency_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open " + path.string());
  const auto rows = csv::read_all(in);
  if (rows.empty() || rows[0].fields.empty() || rows[0].fields[0] != "node") throw SchemaError("adjacency CSV must start with a 'node' header");
  LabeledMatrix m;
  m.labels.assign(rows[0].fields.begin() + 1, rows[0].fields.end());
  const std::size_t n = m.labels.size();
  if (rows.size() != n + 1) throw SchemaError("adjacency CSV must have one row per node");
  m.values = SeriesMatrix(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& f = rows[i + 1].fields;
    if (f.size() != n + 1) throw ParseError("expected " + std::to_string(n + 1) + " fields", rows[i + 1].line);
    if (f[0] != m.labels[i]) throw SchemaError("row label '" + f[0] + "' does not match column '" + m.labels[i] + "'");
    for (std::size_t j = 0; j < n; ++j) m.values.at(i, j) = csv::parse_double(f[j + 1], rows[i + 1].line);
  }
  return m;
}

}  // namespace bysgnn

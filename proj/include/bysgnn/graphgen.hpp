#pragma once

// Dynamic graph construction: semantic (S_E), spatial (S_D) and temporal
// (S_T) similarity, the learnable gate, and case-amplification thresholding.

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "bysgnn/data.hpp"
#include "bysgnn/tensor.hpp"

namespace bysgnn {

// Pairwise POI distances in meters from an equirectangular projection about
// the coordinate centroid.
SeriesMatrix distance_matrix(const std::vector<PoiMetadata>& metadata);
// Dense N×N CSV of meters, no header. Checked for symmetry, zero diagonal
// and non-negativity.
SeriesMatrix load_distance_matrix_csv(const std::filesystem::path& path, std::size_t n);

struct SpatialContext {
  SeriesMatrix distances;  // N×N
  double sigma = 0.0;      // population std of the off-diagonal upper triangle
  double tau = 0.0;
  bool sigma_degenerate = false;  // σ = 0: τ floored to 1 m, kernel = 1 inside it

  static SpatialContext from_distances(SeriesMatrix distances, double tau_factor = 2.0);
};

// S×S values (S >= N): thresholded Gaussian kernel on the POI block, 1 on
// every row and column that touches a meta-node.
std::vector<double> spatial_similarity(const SpatialContext& ctx, std::size_t num_nodes);
double gaussian_kernel(double d, double sigma, double tau);

// Cosine similarity of Û rows; zero rows are reported through `zero_rows`.
Tensor semantic_similarity(const Tensor& U, std::vector<std::size_t>* zero_rows = nullptr);

// Multi-head scaled dot-product attention over the temporal embeddings, with
// C used as queries, keys and values. The graph uses the head-averaged
// attention weights; the value/output projections only feed
// multihead_output().
class TemporalAttention {
 public:
  TemporalAttention() = default;
  TemporalAttention(std::size_t dim, std::size_t heads, ParameterStore& store, std::mt19937_64& rng,
                    const std::string& prefix = "graph.attention");

  std::size_t heads() const { return heads_; }
  // Pre-softmax QW_i^Q (KW_i^K)^T / sqrt(M) per head; C is [S, M] or [B, S, M].
  std::vector<Tensor> head_logits(const Tensor& C) const;
  // Mean over heads of softmax(head_logits).
  Tensor scores(const Tensor& C) const;
  // Concat_i(softmax_i · C W_i^V) W^O.
  Tensor multihead_output(const Tensor& C) const;

  Tensor W_Q, W_K, W_V, W_O;

 private:
  std::size_t dim_ = 0;
  std::size_t heads_ = 1;
};

enum class GateMode { fused, semantic_only, spatial_only };

// S = ((1-α) S_E + α S_D) ⊙ S_T, α = sigmoid(alpha_raw). S_E and S_D are
// [S, S]; S_T may carry a leading batch axis.
Tensor fuse_gate(const Tensor& S_E, const Tensor& S_D, const Tensor& S_T, const Tensor& alpha_raw,
                 GateMode mode = GateMode::fused);

struct ThresholdResult {
  Tensor adjacency;                        // Ŝ
  std::vector<std::size_t> zeroed_rows;    // flat row indices whose max was <= 0
  std::size_t kept = 0;
};

// Keep S_ij iff S_ij > 0 and (S_ij / max_j S_ij)^p > eta; the mask carries no
// gradient.
std::vector<double> threshold_mask(std::span<const double> values, std::size_t cols, double p, double eta,
                                   std::vector<std::size_t>* zeroed_rows = nullptr);
ThresholdResult amplify_threshold(const Tensor& S, double p = 2.5, double eta = 0.15);

struct BusynessGraph {
  Tensor features;   // V
  Tensor adjacency;  // Ŝ
};

BusynessGraph build_graph(const Tensor& V, const Tensor& S_hat);

struct LabeledMatrix {
  std::vector<std::string> labels;
  SeriesMatrix values;
};

// Dense CSV with a header row `node,<label>...` and one labelled row per node.
void write_labeled_matrix_csv(const std::filesystem::path& path, const std::vector<std::string>& row_labels,
                              const std::vector<std::string>& col_labels, const SeriesMatrix& values);
LabeledMatrix read_adjacency_csv(const std::filesystem::path& path);

}  // namespace bysgnn

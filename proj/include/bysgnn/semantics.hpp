#pragma once

// Sentence descriptions of nodes, frozen text embeddings, the learnable
// projection to P dimensions and the node-feature concatenation.

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "bysgnn/data.hpp"
#include "bysgnn/metanodes.hpp"
#include "bysgnn/tensor.hpp"

namespace bysgnn {

struct SentenceDescription {
  std::size_t node_index = 0;
  std::string text;
  std::vector<std::string> missing_fields;  // rendered as "unknown"
  bool flagged() const { return !missing_fields.empty(); }
};

SentenceDescription render_poi_sentence(std::size_t node_index, const PoiMetadata& poi);
SentenceDescription render_category_sentence(std::size_t node_index, const std::string& city, const std::string& category);
SentenceDescription render_global_sentence(std::size_t node_index, const std::string& city);

// Second comma-separated component of an address ("street, city, state zip").
std::string city_from_address(const std::string& address);
// Most frequent city among the POIs (ties broken alphabetically), "" if none.
std::string dominant_city(const std::vector<PoiMetadata>& metadata);

// One sentence per node in model order. Categories use the dominant city of
// their member POIs.
std::vector<SentenceDescription> render_all(const std::vector<PoiMetadata>& metadata, const CategoryIndex& index);

// Lowercased alphanumeric runs.
std::vector<std::string> tokenize(const std::string& text);

// Bag-of-words signed feature hashing, L2-normalized. Word order is ignored.
class TokenHashEmbedder {
 public:
  explicit TokenHashEmbedder(std::size_t dim = 768) : dim_(dim) {}
  std::size_t dim() const { return dim_; }
  // Zero vector (and *empty = true) when the text has no tokens.
  std::vector<double> embed(const std::string& text, bool* empty = nullptr) const;

 private:
  std::size_t dim_;
};

// Keys of the external embedding file: poi_id, "category:<name>", "global".
std::vector<std::string> node_keys(const std::vector<PoiMetadata>& metadata, const CategoryIndex& index);

struct EmbeddingTable {
  std::size_t dim = 0;
  std::vector<std::string> keys;
  SeriesMatrix values;  // keys.size() × dim

  // Rows reordered to `wanted`; SchemaError if any key is absent.
  SeriesMatrix select(const std::vector<std::string>& wanted) const;
};

// Header `node_key,e_0,...,e_{E-1}`.
EmbeddingTable load_embedding_table(const std::filesystem::path& path);
void write_embedding_table(const std::filesystem::path& path, const std::vector<std::string>& keys,
                           const SeriesMatrix& values);

struct RawEmbeddings {
  SeriesMatrix values;                    // S × E
  std::vector<std::size_t> empty_nodes;   // nodes whose sentence had no tokens
};

RawEmbeddings embed_sentences(const std::vector<SentenceDescription>& sentences, const TokenHashEmbedder& embedder);

// û = raw × W + b with the raw embedding frozen.
class SemanticProjection {
 public:
  SemanticProjection() = default;
  SemanticProjection(std::size_t embed_dim, std::size_t out_dim, ParameterStore& store, std::mt19937_64& rng,
                     const std::string& prefix = "semantics");
  Tensor project(const Tensor& raw) const;

  Tensor W, b;
};

// v_i = c_i ∥ û_i. C is [S, M] or [B, S, M]; U is [S, P].
Tensor build_node_features(const Tensor& C, const Tensor& U);

}  // namespace bysgnn

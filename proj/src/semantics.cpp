#include "bysgnn/semantics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <unordered_map>

#include "bysgnn/csv.hpp"
#include "bysgnn/error.hpp"
#include "bysgnn/ops.hpp"

namespace bysgnn {

namespace {

std::string field(const std::string& value, const char* name, std::vector<std::string>& missing) {
  if (value.empty()) {
    missing.emplace_back(name);
    return "unknown";
  }
  return value;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t") - b + 1);
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace

SentenceDescription render_poi_sentence(std::size_t node_index, const PoiMetadata& poi) {
  SentenceDescription d;
  d.node_index = node_index;
  auto& miss = d.missing_fields;
  const std::string name = field(poi.name, "name", miss);
  const std::string address = field(poi.address, "address", miss);
  const std::string hours = field(poi.hours, "hours", miss);
  const std::string phone = field(poi.phone, "phone", miss);
  const std::string top = field(poi.top_category, "top_category", miss);
  const std::string sub = field(poi.sub_category, "sub_category", miss);
  d.text = "This point of interest is " + name + " located at " + address + ". It is open for business during " +
           hours + ". It can be contacted by phone at " + phone + ". The location belongs to the top-category " + top +
           ", with the sub-category " + sub + ".";
  return d;
}

SentenceDescription render_category_sentence(std::size_t node_index, const std::string& city,
                                             const std::string& category) {
  SentenceDescription d;
  d.node_index = node_index;
  const std::string c = field(city, "city", d.missing_fields);
  const std::string k = field(category, "category", d.missing_fields);
  d.text = "This is the meta-node representing all the points of interest in " + c + " that belong to the top category " +
           k + ".";
  return d;
}

SentenceDescription render_global_sentence(std::size_t node_index, const std::string& city) {
  SentenceDescription d;
  d.node_index = node_index;
  d.text = "This is the meta-node representing all the points of interest in " + field(city, "city", d.missing_fields) +
           " across every category.";
  return d;
}

std::string city_from_address(const std::string& address) {
  const auto first = address.find(',');
  if (first == std::string::npos) return "";
  const auto second = address.find(',', first + 1);
  return trim(address.substr(first + 1, second == std::string::npos ? std::string::npos : second - first - 1));
}

std::string dominant_city(const std::vector<PoiMetadata>& metadata) {
  std::map<std::string, std::size_t> counts;
  for (const auto& m : metadata) {
    auto c = city_from_address(m.address);
    if (!c.empty()) ++counts[c];
  }
  std::string best;
  std::size_t best_n = 0;
  for (const auto& [city, n] : counts) {
    if (n > best_n) {
      best = city;
      best_n = n;
    }
  }
  return best;
}

std::vector<SentenceDescription> render_all(const std::vector<PoiMetadata>& metadata, const CategoryIndex& index) {
  if (metadata.size() != index.num_pois()) throw ConfigError("metadata and category index disagree on POI count");
  std::vector<SentenceDescription> out;
  out.reserve(index.num_nodes());
  for (std::size_t i = 0; i < metadata.size(); ++i) out.push_back(render_poi_sentence(i, metadata[i]));
  for (std::size_t k = 0; k < index.num_categories(); ++k) {
    std::vector<PoiMetadata> members;
    for (std::size_t i = 0; i < metadata.size(); ++i)
      if (index.membership[i] == k) members.push_back(metadata[i]);
    out.push_back(render_category_sentence(index.category_node(k), dominant_city(members), index.categories[k]));
  }
  out.push_back(render_global_sentence(index.global_node(), dominant_city(metadata)));
  return out;
}

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> tokens;
  std::string cur;
  for (unsigned char c : text) {
    if (std::isalnum(c)) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      tokens.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));
  return tokens;
}

std::vector<double> TokenHashEmbedder::embed(const std::string& text, bool* empty) const {
  std::vector<double> v(dim_, 0.0);
  const auto tokens = tokenize(text);
  for (const auto& t : tokens) {
    const std::uint64_t h = fnv1a(t);
    v[h % dim_] += (h >> 63) ? -1.0 : 1.0;
  }
  double norm = 0.0;
  for (double x : v) norm += x * x;
  norm = std::sqrt(norm);
  if (norm > 0.0)
    for (double& x : v) x /= norm;
  if (empty) *empty = norm == 0.0;
  return v;
}

std::vector<std::string> node_keys(const std::vector<PoiMetadata>& metadata, const CategoryIndex& index) {
  std::vector<std::string> keys;
  for (const auto& m : metadata) keys.push_back(m.poi_id);
  for (const auto& c : index.categories) keys.push_back("category:" + c);
  keys.emplace_back("global");
  return keys;
}

SeriesMatrix EmbeddingTable::select(const std::vector<std::string>& wanted) const {
  std::unordered_map<std::string, std::size_t> pos;
  for (std::size_t i = 0; i < keys.size(); ++i) pos.emplace(keys[i], i);
  SeriesMatrix out(wanted.size(), dim);
  for (std::size_t r = 0; r < wanted.size(); ++r) {
    const auto it = pos.find(wanted[r]);
    if (it == pos.end()) throw SchemaError("embedding file has no row for node key '" + wanted[r] + "'");
    std::copy_n(values.row(it->second).begin(), dim, out.row(r).begin());
  }
  return out;
}

EmbeddingTable load_embedding_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open embedding file " + path.string());
  const auto rows = csv::read_all(in);
  if (rows.empty() || rows[0].fields.empty() || rows[0].fields[0] != "node_key") {
    throw SchemaError("embedding file must start with header node_key,e_0,...");
  }
  EmbeddingTable t;
  t.dim = rows[0].fields.size() - 1;
  if (t.dim == 0) throw SchemaError("embedding file has no value columns");
  for (std::size_t j = 0; j < t.dim; ++j) {
    if (rows[0].fields[j + 1] != "e_" + std::to_string(j)) throw SchemaError("embedding header column " + std::to_string(j + 1) + " should be e_" + std::to_string(j));
  }
  t.values = SeriesMatrix(rows.size() - 1, t.dim);
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& f = rows[r].fields;
    if (f.size() != t.dim + 1) throw ParseError("expected " + std::to_string(t.dim + 1) + " fields", rows[r].line);
    t.keys.push_back(f[0]);
    for (std::size_t j = 0; j < t.dim; ++j) t.values.at(r - 1, j) = csv::parse_double(f[j + 1], rows[r].line);
  }
  return t;
}

void write_embedding_table(const std::filesystem::path& path, const std::vector<std::string>& keys,
                           const SeriesMatrix& values) {
  std::ofstream out(path);
  if (!out) throw SchemaError("cannot write " + path.string());
  out << "node_key";
  for (std::size_t j = 0; j < values.cols; ++j) out << ",e_" << j;
  out << '\n';
  for (std::size_t r = 0; r < values.rows; ++r) {
    out << csv::escape(keys[r]);
    for (double v : values.row(r)) out << ',' << csv::format_double(v);
    out << '\n';
  }
}

RawEmbeddings embed_sentences(const std::vector<SentenceDescription>& sentences, const TokenHashEmbedder& embedder) {
  RawEmbeddings out;
  out.values = SeriesMatrix(sentences.size(), embedder.dim());
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    bool empty = false;
    const auto v = embedder.embed(sentences[i].text, &empty);
    std::copy(v.begin(), v.end(), out.values.row(i).begin());
    if (empty) out.empty_nodes.push_back(i);
  }
  return out;
}

SemanticProjection::SemanticProjection(std::size_t embed_dim, std::size_t out_dim, ParameterStore& store,
                                       std::mt19937_64& rng, const std::string& prefix) {
  if (embed_dim == 0 || out_dim == 0) throw ConfigError("semantic projection sizes must be positive");
  W = store.add_weight(prefix + ".proj.W", {embed_dim, out_dim}, embed_dim, rng);
  b = store.add_zeros(prefix + ".proj.b", {out_dim});
}

Tensor SemanticProjection::project(const Tensor& raw) const {
  if (raw.rank() != 2 || raw.dim(1) != W.dim(0)) {
    throw ConfigError("semantic projection expects [S, " + std::to_string(W.dim(0)) + "], got " + shape_str(raw.shape()));
  }
  return ops::add(ops::matmul(raw, W), b);
}

Tensor build_node_features(const Tensor& C, const Tensor& U) {
  if (U.rank() != 2) throw ConfigError("semantic embeddings must be [S, P]");
  const std::size_t s = C.rank() == 3 ? C.dim(1) : C.rank() == 2 ? C.dim(0) : 0;
  if (s != U.dim(0)) {
    throw ConfigError("node features: " + shape_str(C.shape()) + " and " + shape_str(U.shape()) + " disagree on node count");
  }
  if (C.rank() == 2) return ops::concat_last({C, U});
  return ops::concat_last({C, ops::broadcast_batch(U, C.dim(0))});
}

}  // namespace bysgnn

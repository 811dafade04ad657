#pragma once

// Aggregated series for POI categories ("meta-nodes") and the global total.
// Node order everywhere: POIs 0..N-1, categories N..N+K-1, global N+K.

#include <string>
#include <vector>

#include "bysgnn/data.hpp"

namespace bysgnn {

struct CategoryIndex {
  std::vector<std::string> categories;   // K names, sorted
  std::vector<std::size_t> membership;   // POI row -> category index

  std::size_t num_pois() const { return membership.size(); }
  std::size_t num_categories() const { return categories.size(); }
  std::size_t num_nodes() const { return num_pois() + num_categories() + 1; }
  std::size_t category_node(std::size_t k) const { return num_pois() + k; }
  std::size_t global_node() const { return num_pois() + num_categories(); }

  // Categories from top_category; metadata must be aligned with the series rows.
  static CategoryIndex from_metadata(const std::vector<PoiMetadata>& metadata);
};

struct AugmentedSeries {
  SeriesMatrix values;  // (N+K+1) × T
  CategoryIndex index;
};

// Category rows are sums of member POI rows, the global row is the sum of all
// POI rows, and POI rows are copied verbatim.
AugmentedSeries aggregate_by_category(const SeriesMatrix& x, const CategoryIndex& index);

}  // namespace bysgnn

#include "bysgnn/metanodes.hpp"

#include <algorithm>
#include <set>

#include "bysgnn/error.hpp"

namespace bysgnn {

CategoryIndex CategoryIndex::from_metadata(const std::vector<PoiMetadata>& metadata) {
  std::set<std::string> names;
  for (const auto& m : metadata) {
    if (m.top_category.empty()) throw ConfigError("POI " + m.poi_id + " has no top_category");
    names.insert(m.top_category);
  }
  CategoryIndex idx;
  idx.categories.assign(names.begin(), names.end());
  idx.membership.reserve(metadata.size());
  for (const auto& m : metadata) {
    const auto it = std::lower_bound(idx.categories.begin(), idx.categories.end(), m.top_category);
    idx.membership.push_back(static_cast<std::size_t>(it - idx.categories.begin()));
  }
  return idx;
}

AugmentedSeries aggregate_by_category(const SeriesMatrix& x, const CategoryIndex& index) {
  if (index.membership.size() != x.rows) {
    throw ConfigError("category index covers " + std::to_string(index.membership.size()) + " POIs, series has " +
                      std::to_string(x.rows));
  }
  const std::size_t n = x.rows, k = index.num_categories(), t = x.cols;
  for (std::size_t i = 0; i < n; ++i) {
    if (index.membership[i] >= k) throw ConfigError("POI row " + std::to_string(i) + " has no valid category");
  }
  AugmentedSeries out;
  out.index = index;
  out.values = SeriesMatrix(n + k + 1, t);
  std::copy(x.values.begin(), x.values.end(), out.values.values.begin());
  for (std::size_t i = 0; i < n; ++i) {
    auto src = x.row(i);
    auto cat = out.values.row(n + index.membership[i]);
    auto all = out.values.row(n + k);
    for (std::size_t c = 0; c < t; ++c) {
      cat[c] += src[c];
      all[c] += src[c];
    }
  }
  return out;
}

}  // namespace bysgnn

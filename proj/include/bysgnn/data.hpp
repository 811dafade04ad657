#pragma once

// Visit-count ingestion, chronological splitting, z-score normalization and
// window enumeration.

#include <array>
#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "bysgnn/timeutil.hpp"

namespace bysgnn {

struct PoiMetadata {
  std::string poi_id;
  std::string name;
  std::string address;
  std::string hours;
  std::string phone;
  std::string top_category;
  std::string sub_category;
  double latitude = 0.0;
  double longitude = 0.0;
};

// Dense row-major matrix of series: one row per series, one column per hour.
struct SeriesMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  SeriesMatrix() = default;
  SeriesMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), values(r * c, 0.0) {}

  double& at(std::size_t r, std::size_t c) { return values[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
  std::span<const double> row(std::size_t r) const { return {values.data() + r * cols, cols}; }
  std::span<double> row(std::size_t r) { return {values.data() + r * cols, cols}; }
};

struct VisitSeriesDataset {
  std::vector<std::string> poi_ids;  // row order of `visits`
  HourStamp start = 0;               // timestamp of column 0
  SeriesMatrix visits;               // N × T_total, non-negative

  std::size_t num_pois() const { return poi_ids.size(); }
  std::size_t hours() const { return visits.cols; }
  HourStamp timestamp(std::size_t column) const { return start + static_cast<HourStamp>(column); }
};

struct LoadReport {
  std::size_t rows_read = 0;
  std::size_t missing_count = 0;  // cells absent from the file, filled with 0
};

struct LoadedVisits {
  VisitSeriesDataset dataset;
  LoadReport report;
};

// Header `poi_id,timestamp_utc,visits`. POI rows keep first-appearance order.
// Missing hours inside the global [min, max] range become 0 and are counted.
LoadedVisits load_visits_csv(const std::filesystem::path& path);
LoadedVisits parse_visits_csv(std::istream& in);
void write_visits_csv(const std::filesystem::path& path, const VisitSeriesDataset& ds);

// Header `poi_id,name,address,hours,phone,top_category,sub_category,latitude,longitude`.
std::vector<PoiMetadata> load_metadata_csv(const std::filesystem::path& path);
std::vector<PoiMetadata> parse_metadata_csv(std::istream& in);
void write_metadata_csv(const std::filesystem::path& path, const std::vector<PoiMetadata>& metadata);

// Metadata reordered to match ds.poi_ids. Throws SchemaError when a POI has
// no metadata row.
std::vector<PoiMetadata> align_metadata(const VisitSeriesDataset& ds, const std::vector<PoiMetadata>& metadata);

// Half-open column range [begin, end) on the time axis.
struct SplitRange {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t length() const { return end - begin; }
  bool empty() const { return end == begin; }
};

struct DatasetSplits {
  SplitRange train, val, test;
  std::vector<std::string> flags;  // e.g. "val split is empty"
};

// Chronological, non-overlapping split. Each non-empty split must hold at
// least one (window + horizon) sample, otherwise ConfigError.
DatasetSplits split_dataset(std::size_t total_hours, std::array<double, 3> fractions = {0.70, 0.20, 0.10},
                            std::size_t window = 24, std::size_t horizon = 6);

struct NormalizationStats {
  std::vector<double> mean;
  std::vector<double> std;
  std::vector<bool> floored;  // series whose std was 0 and was replaced by 1
};

// Per-row statistics over the training columns only.
NormalizationStats zscore_fit(const SeriesMatrix& series, const DatasetSplits& splits);
// Row r of `x` (rows × cols, row-major) is normalized with stats row r.
std::vector<double> zscore_apply(std::span<const double> x, std::size_t cols, const NormalizationStats& stats);
std::vector<double> zscore_invert(std::span<const double> x, std::size_t cols, const NormalizationStats& stats);

// One training/evaluation sample: input columns [input_begin, input_begin+T),
// target columns [input_begin+T, input_begin+T+H).
struct WindowSample {
  std::size_t input_begin = 0;
  std::size_t window = 24;
  std::size_t horizon = 6;
  HourStamp window_start = 0;

  std::size_t target_begin() const { return input_begin + window; }
  // rows × T and rows × H copies out of `series`.
  std::vector<double> input(const SeriesMatrix& series) const;
  std::vector<double> target(const SeriesMatrix& series) const;
};

// floor((len − T − H)/stride) + 1 windows inside `range`.
std::vector<WindowSample> make_windows(const SplitRange& range, HourStamp series_start, std::size_t window = 24,
                                       std::size_t horizon = 6, std::size_t stride = 1);

}  // namespace bysgnn

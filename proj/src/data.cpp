#include "bysgnn/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <unordered_map>

#include "bysgnn/csv.hpp"
#include "bysgnn/error.hpp"

namespace bysgnn {

namespace {

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write " + path.string());
  return out;
}

void expect_header(const csv::Row& row, const std::vector<std::string>& expected) {
  std::vector<std::string> got = row.fields;
  for (auto& f : got) {
    while (!f.empty() && (f.back() == ' ' || f.back() == '\t')) f.pop_back();
    while (!f.empty() && (f.front() == ' ' || f.front() == '\t' || f.front() == '\xEF' || f.front() == '\xBB' || f.front() == '\xBF')) {
      f.erase(f.begin());
    }
  }
  if (got != expected) throw ParseError("unexpected header, expected " + csv::join(expected), row.line);
}

}  // namespace

LoadedVisits parse_visits_csv(std::istream& in) {
  const auto rows = csv::read_all(in);
  if (rows.empty()) throw ParseError("empty visits file");
  expect_header(rows[0], {"poi_id", "timestamp_utc", "visits"});

  struct Series {
    std::map<HourStamp, double> points;
    HourStamp last = 0;
  };
  std::vector<std::string> order;
  std::unordered_map<std::string, Series> by_poi;
  HourStamp lo = 0, hi = 0;
  bool any = false;

  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.fields.size() != 3) {
      throw ParseError("expected 3 fields, got " + std::to_string(row.fields.size()), row.line);
    }
    const std::string& id = row.fields[0];
    if (id.empty()) throw ParseError("empty poi_id", row.line);
    HourStamp ts = 0;
    try {
      ts = parse_iso_hour(row.fields[1]);
    } catch (const ParseError& e) {
      throw ParseError(e.what(), row.line);
    }
    const double v = csv::parse_double(row.fields[2], row.line);
    if (!std::isfinite(v) || v < 0) throw ParseError("visits must be a finite non-negative number", row.line);

    auto [it, inserted] = by_poi.try_emplace(id);
    Series& s = it->second;
    if (inserted) order.push_back(id);
    if (s.points.count(ts)) {
      throw SchemaError("duplicate (poi_id, timestamp) pair (" + id + ", " + row.fields[1] + ") at line " +
                        std::to_string(row.line));
    }
    if (!s.points.empty() && ts < s.last) {
      throw SchemaError("non-monotone timestamps for " + id + " at line " + std::to_string(row.line));
    }
    s.points.emplace(ts, v);
    s.last = ts;
    lo = any ? std::min(lo, ts) : ts;
    hi = any ? std::max(hi, ts) : ts;
    any = true;
  }
  if (!any) throw ParseError("visits file has no data rows");

  LoadedVisits out;
  auto& ds = out.dataset;
  ds.poi_ids = order;
  ds.start = lo;
  const auto total = static_cast<std::size_t>(hi - lo + 1);
  ds.visits = SeriesMatrix(order.size(), total);
  out.report.rows_read = rows.size() - 1;
  for (std::size_t i = 0; i < order.size(); ++i) {
    const auto& pts = by_poi[order[i]].points;
    for (const auto& [ts, v] : pts) ds.visits.at(i, static_cast<std::size_t>(ts - lo)) = v;
    out.report.missing_count += total - pts.size();
  }
  return out;
}

LoadedVisits load_visits_csv(const std::filesystem::path& path) {
  auto in = open_in(path);
  return parse_visits_csv(in);
}

void write_visits_csv(const std::filesystem::path& path, const VisitSeriesDataset& ds) {
  auto out = open_out(path);
  out << "poi_id,timestamp_utc,visits\n";
  for (std::size_t i = 0; i < ds.num_pois(); ++i) {
    const std::string id = csv::escape(ds.poi_ids[i]);
    for (std::size_t t = 0; t < ds.hours(); ++t) {
      out << id << ',' << format_iso_hour(ds.timestamp(t)) << ',' << csv::format_double(ds.visits.at(i, t)) << '\n';
    }
  }
}

std::vector<PoiMetadata> parse_metadata_csv(std::istream& in) {
  const auto rows = csv::read_all(in);
  if (rows.empty()) throw ParseError("empty metadata file");
  expect_header(rows[0], {"poi_id", "name", "address", "hours", "phone", "top_category", "sub_category", "latitude",
                          "longitude"});
  std::vector<PoiMetadata> out;
  std::set<std::string> seen;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& f = rows[r].fields;
    const long line = rows[r].line;
    if (f.size() != 9) throw ParseError("expected 9 fields, got " + std::to_string(f.size()), line);
    PoiMetadata m{f[0], f[1], f[2], f[3], f[4], f[5], f[6], csv::parse_double(f[7], line), csv::parse_double(f[8], line)};
    if (m.poi_id.empty()) throw ParseError("empty poi_id", line);
    if (!seen.insert(m.poi_id).second) throw SchemaError("duplicate poi_id " + m.poi_id + " at line " + std::to_string(line));
    if (m.top_category.empty()) throw SchemaError("empty top_category for " + m.poi_id + " at line " + std::to_string(line));
    if (!(m.latitude >= -90 && m.latitude <= 90)) throw SchemaError("latitude out of range at line " + std::to_string(line));
    if (!(m.longitude >= -180 && m.longitude <= 180)) {
      throw SchemaError("longitude out of range at line " + std::to_string(line));
    }
    out.push_back(std::move(m));
  }
  return out;
}

std::vector<PoiMetadata> load_metadata_csv(const std::filesystem::path& path) {
  auto in = open_in(path);
  return parse_metadata_csv(in);
}

void write_metadata_csv(const std::filesystem::path& path, const std::vector<PoiMetadata>& metadata) {
  auto out = open_out(path);
  out << "poi_id,name,address,hours,phone,top_category,sub_category,latitude,longitude\n";
  for (const auto& m : metadata) {
    out << csv::join({m.poi_id, m.name, m.address, m.hours, m.phone, m.top_category, m.sub_category,
                      csv::format_double(m.latitude), csv::format_double(m.longitude)})
        << '\n';
  }
}

std::vector<PoiMetadata> align_metadata(const VisitSeriesDataset& ds, const std::vector<PoiMetadata>& metadata) {
  std::unordered_map<std::string, const PoiMetadata*> index;
  for (const auto& m : metadata) index[m.poi_id] = &m;
  std::vector<PoiMetadata> out;
  out.reserve(ds.num_pois());
  for (const auto& id : ds.poi_ids) {
    auto it = index.find(id);
    if (it == index.end()) throw SchemaError("no metadata for poi_id " + id);
    out.push_back(*it->second);
  }
  return out;
}

DatasetSplits split_dataset(std::size_t total_hours, std::array<double, 3> fractions, std::size_t window,
                            std::size_t horizon) {
  for (double f : fractions) {
    if (!(f >= 0.0 && f <= 1.0)) throw ConfigError("split fractions must lie in [0, 1]");
  }
  if (std::fabs(fractions[0] + fractions[1] + fractions[2] - 1.0) > 1e-9) {
    throw ConfigError("split fractions must sum to 1");
  }
  const auto n = static_cast<double>(total_hours);
  const auto train = static_cast<std::size_t>(std::llround(fractions[0] * n));
  const auto val = std::min(total_hours - train, static_cast<std::size_t>(std::llround(fractions[1] * n)));
  DatasetSplits s;
  s.train = {0, train};
  s.val = {train, train + val};
  s.test = {train + val, total_hours};
  const std::size_t need = window + horizon;
  const std::pair<const char*, const SplitRange*> named[] = {{"train", &s.train}, {"val", &s.val}, {"test", &s.test}};
  for (const auto& [name, r] : named) {
    if (r->empty()) {
      s.flags.push_back(std::string(name) + " split is empty");
    } else if (r->length() < need) {
      throw ConfigError(std::string(name) + " split has " + std::to_string(r->length()) +
                        " hours, fewer than one window of " + std::to_string(need));
    }
  }
  if (s.train.empty()) throw ConfigError("train split is empty");
  return s;
}

NormalizationStats zscore_fit(const SeriesMatrix& series, const DatasetSplits& splits) {
  const SplitRange& r = splits.train;
  if (r.empty() || r.end > series.cols) throw ConfigError("training range does not fit the series");
  NormalizationStats st;
  st.mean.resize(series.rows);
  st.std.resize(series.rows);
  st.floored.resize(series.rows);
  const auto n = static_cast<double>(r.length());
  for (std::size_t i = 0; i < series.rows; ++i) {
    double mu = 0.0;
    for (std::size_t t = r.begin; t < r.end; ++t) mu += series.at(i, t);
    mu /= n;
    double var = 0.0;
    for (std::size_t t = r.begin; t < r.end; ++t) var += (series.at(i, t) - mu) * (series.at(i, t) - mu);
    const double sd = std::sqrt(var / n);
    st.mean[i] = mu;
    st.floored[i] = !(sd > 1e-12);
    st.std[i] = st.floored[i] ? 1.0 : sd;
  }
  return st;
}

std::vector<double> zscore_apply(std::span<const double> x, std::size_t cols, const NormalizationStats& stats) {
  if (cols == 0 || x.size() != cols * stats.mean.size()) throw DimensionError("zscore_apply: shape mismatch");
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const std::size_t r = i / cols;
    out[i] = (x[i] - stats.mean[r]) / stats.std[r];
  }
  return out;
}

std::vector<double> zscore_invert(std::span<const double> x, std::size_t cols, const NormalizationStats& stats) {
  if (cols == 0 || x.size() != cols * stats.mean.size()) throw DimensionError("zscore_invert: shape mismatch");
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const std::size_t r = i / cols;
    out[i] = x[i] * stats.std[r] + stats.mean[r];
  }
  return out;
}

std::vector<double> WindowSample::input(const SeriesMatrix& series) const {
  std::vector<double> out(series.rows * window);
  for (std::size_t r = 0; r < series.rows; ++r)
    std::copy_n(series.values.data() + r * series.cols + input_begin, window, out.data() + r * window);
  return out;
}

std::vector<double> WindowSample::target(const SeriesMatrix& series) const {
  std::vector<double> out(series.rows * horizon);
  for (std::size_t r = 0; r < series.rows; ++r)
    std::copy_n(series.values.data() + r * series.cols + target_begin(), horizon, out.data() + r * horizon);
  return out;
}

std::vector<WindowSample> make_windows(const SplitRange& range, HourStamp series_start, std::size_t window,
                                       std::size_t horizon, std::size_t stride) {
  if (window == 0 || horizon == 0 || stride == 0) throw ConfigError("window, horizon and stride must be positive");
  if (range.length() < window + horizon) {
    throw ConfigError("range of " + std::to_string(range.length()) + " hours cannot hold a " + std::to_string(window) +
                      "+" + std::to_string(horizon) + " window");
  }
  const std::size_t count = (range.length() - window - horizon) / stride + 1;
  std::vector<WindowSample> out;
  out.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    const std::size_t begin = range.begin + k * stride;
    out.push_back({begin, window, horizon, series_start + static_cast<HourStamp>(begin)});
  }
  return out;
}

}  // namespace bysgnn

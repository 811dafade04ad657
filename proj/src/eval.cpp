#include "bysgnn/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "bysgnn/csv.hpp"
#include "bysgnn/error.hpp"

namespace bysgnn {

EvaluationReport evaluate_test(const BysGnnModel& model, const PreparedData& data) {
  const auto& visits = data.dataset.visits;
  std::vector<WindowSample> windows;
  EvaluationReport report;
  for (const auto& w : data.test_windows) {
    if (w.target_begin() >= 4 * kHoursPerWeek) windows.push_back(w);
    else ++report.windows_skipped;
  }
  if (windows.empty()) throw ConfigError("no test window has four weeks of history");
  const std::size_t n = data.num_pois(), h = model.config().horizon;
  const auto p = predict(model, data, windows);
  report.rows.push_back({"bysgnn", compute_metrics(p.pred, p.truth, windows.size(), n, h)});
  for (auto kind : {BaselineKind::naive_seasonal, BaselineKind::historical_average}) {
    const auto f = run_baseline(kind, visits, windows);
    report.rows.push_back({baseline_name(kind), compute_metrics(f.pred, f.truth, f.windows.size(), n, h)});
  }
  return report;
}

std::string format_relative(double value, double reference) {
  if (reference == 0.0 || !std::isfinite(value) || !std::isfinite(reference)) return "n/a";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%+.2f%%", 100.0 * (value - reference) / reference);
  return buf;
}

namespace {

std::string num(double v) { return std::isfinite(v) ? csv::format_double(v) : std::string(); }

std::string fixed(double v, int digits = 4) {
  if (!std::isfinite(v)) return "-";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

double mape_or_nan(const MetricsReport& m) { return m.mape.value_or(std::nan("")); }

std::string render_table(const std::vector<std::vector<std::string>>& cells) {
  std::vector<std::size_t> width;
  for (const auto& row : cells)
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (width.size() <= c) width.push_back(0);
      width[c] = std::max(width[c], row[c].size());
    }
  std::ostringstream out;
  for (const auto& row : cells) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c == 0) out << row[c] << std::string(width[c] - row[c].size(), ' ');
      else out << "  " << std::string(width[c] - row[c].size(), ' ') << row[c];
    }
    out << '\n';
  }
  return out.str();
}

const MetricsReport& best_baseline(const EvaluationReport& r) {
  const auto& a = r.rows[1].metrics;
  const auto& b = r.rows[2].metrics;
  return mape_or_nan(b) < mape_or_nan(a) ? b : a;
}

}  // namespace

void write_evaluation_csv(const std::filesystem::path& path, const EvaluationReport& report) {
  std::ofstream out(path);
  if (!out) throw SchemaError("cannot write " + path.string());
  out << "method,mae,mape,rmse,n_windows,mape_masked_count\n";
  for (const auto& r : report.rows) {
    out << r.method << ',' << num(r.metrics.mae) << ',' << num(mape_or_nan(r.metrics)) << ',' << num(r.metrics.rmse)
        << ',' << r.metrics.n_windows << ',' << r.metrics.mape_masked_count << '\n';
  }
  if (report.rows.size() >= 3) {
    const auto& m = report.rows[0].metrics;
    const auto& b = best_baseline(report);
    out << "relative_to_best_baseline," << format_relative(m.mae, b.mae) << ','
        << format_relative(mape_or_nan(m), mape_or_nan(b)) << ',' << format_relative(m.rmse, b.rmse) << ",,\n";
  }
}

std::string format_evaluation_text(const EvaluationReport& report) {
  std::vector<std::vector<std::string>> cells{{"Method", "MAE", "MAPE", "RMSE", "windows", "masked"}};
  for (const auto& r : report.rows) {
    cells.push_back({r.method, fixed(r.metrics.mae), fixed(mape_or_nan(r.metrics)), fixed(r.metrics.rmse),
                     std::to_string(r.metrics.n_windows), std::to_string(r.metrics.mape_masked_count)});
  }
  if (report.rows.size() >= 3) {
    const auto& m = report.rows[0].metrics;
    const auto& b = best_baseline(report);
    cells.push_back({"vs best baseline", format_relative(m.mae, b.mae), format_relative(mape_or_nan(m), mape_or_nan(b)),
                     format_relative(m.rmse, b.rmse), "", ""});
  }
  return render_table(cells);
}

double median(std::vector<double> values) {
  if (values.empty()) return std::nan("");
  std::sort(values.begin(), values.end());
  const std::size_t k = values.size() / 2;
  return values.size() % 2 ? values[k] : 0.5 * (values[k - 1] + values[k]);
}

AblationTable run_ablation(const VisitSeriesDataset& dataset, const std::vector<PoiMetadata>& metadata,
                           const RunConfig& base, const std::vector<std::string>& variants,
                           const std::vector<std::uint64_t>& seeds,
                           const std::function<void(const std::string&, std::uint64_t, const MetricsReport&)>& progress) {
  if (seeds.empty()) throw ConfigError("ablation needs at least one seed");
  AblationTable table;
  table.seeds = seeds;
  std::vector<std::string> all{"full"};
  all.insert(all.end(), variants.begin(), variants.end());
  for (const auto& variant : all) {
    RunConfig cfg = base;
    if (variant != "full") cfg.model.ablations.enable(variant);
    AblationRow row;
    row.variant = variant;
    std::vector<double> mae, mape, rmse;
    for (auto seed : seeds) {
      cfg.train.seed = seed;
      auto fit = fit_model(dataset, metadata, cfg);
      if (fit.train.diverged) throw NumericalError(variant + " seed " + std::to_string(seed) + " diverged: " + fit.train.divergence);
      const auto report = evaluate_test(*fit.model, fit.data);
      const auto& m = report.rows[0].metrics;
      if (progress) progress(variant, seed, m);
      row.per_seed.push_back(m);
      mae.push_back(m.mae);
      mape.push_back(mape_or_nan(m));
      rmse.push_back(m.rmse);
    }
    row.mae = median(mae);
    row.mape = median(mape);
    row.rmse = median(rmse);
    table.rows.push_back(std::move(row));
  }
  return table;
}

void write_ablation_csv(const std::filesystem::path& path, const AblationTable& table) {
  std::ofstream out(path);
  if (!out) throw SchemaError("cannot write " + path.string());
  out << "variant,mae,mape,rmse,mae_change,mape_change,rmse_change,seeds\n";
  const auto& full = table.rows.front();
  for (const auto& r : table.rows) {
    out << r.variant << ',' << num(r.mae) << ',' << num(r.mape) << ',' << num(r.rmse) << ',';
    if (&r == &full) out << ",,";
    else out << format_relative(r.mae, full.mae) << ',' << format_relative(r.mape, full.mape) << ',' << format_relative(r.rmse, full.rmse);
    out << ',' << table.seeds.size() << '\n';
  }
}

std::string format_ablation_text(const AblationTable& table) {
  std::vector<std::vector<std::string>> cells{{"Variant", "MAE", "MAPE", "RMSE"}};
  const auto& full = table.rows.front();
  for (const auto& r : table.rows) {
    cells.push_back({r.variant, fixed(r.mae), fixed(r.mape), fixed(r.rmse)});
    if (&r != &full) {
      cells.push_back({"", format_relative(r.mae, full.mae), format_relative(r.mape, full.mape),
                       format_relative(r.rmse, full.rmse)});
    }
  }
  return render_table(cells);
}

}  // namespace bysgnn

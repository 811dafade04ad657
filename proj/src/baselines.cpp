#include "bysgnn/baselines.hpp"

#include <cmath>

#include "bysgnn/error.hpp"

namespace bysgnn {

MetricsReport compute_metrics(std::span<const double> pred, std::span<const double> truth, std::size_t windows,
                              std::size_t nodes, std::size_t horizon) {
  const std::size_t total = windows * nodes * horizon;
  if (pred.size() != total || truth.size() != total) throw DimensionError("metrics: prediction/truth size mismatch");
  MetricsReport r;
  r.n_windows = windows;
  r.n_points = total;
  std::vector<double> abs_h(horizon, 0.0), sq_h(horizon, 0.0), pct_h(horizon, 0.0);
  std::vector<std::size_t> pct_n(horizon, 0);
  double abs_sum = 0, sq_sum = 0, pct_sum = 0;
  std::size_t pct_count = 0;
  for (std::size_t i = 0; i < total; ++i) {
    const std::size_t h = i % horizon;
    const double e = pred[i] - truth[i];
    abs_h[h] += std::fabs(e);
    sq_h[h] += e * e;
    if (truth[i] > 0.0) {
      pct_h[h] += std::fabs(e) / truth[i];
      ++pct_n[h];
    } else {
      ++r.mape_masked_count;
    }
  }
  const double per_h = static_cast<double>(windows * nodes);
  for (std::size_t h = 0; h < horizon; ++h) {
    abs_sum += abs_h[h];
    sq_sum += sq_h[h];
    pct_sum += pct_h[h];
    pct_count += pct_n[h];
    r.mae_per_horizon.push_back(per_h > 0 ? abs_h[h] / per_h : 0.0);
    r.rmse_per_horizon.push_back(per_h > 0 ? std::sqrt(sq_h[h] / per_h) : 0.0);
    r.mape_per_horizon.push_back(pct_n[h] ? std::optional<double>(pct_h[h] / static_cast<double>(pct_n[h])) : std::nullopt);
  }
  if (total > 0) {
    r.mae = abs_sum / static_cast<double>(total);
    r.rmse = std::sqrt(sq_sum / static_cast<double>(total));
  }
  if (pct_count > 0) r.mape = pct_sum / static_cast<double>(pct_count);
  // RMSE >= MAE by Jensen; allow for rounding in the two sums.
  if (r.rmse < r.mae * (1.0 - 1e-12)) throw ContractError("metrics: RMSE below MAE");
  return r;
}

std::vector<double> naive_seasonal(const SeriesMatrix& visits, std::size_t t, std::size_t horizon) {
  if (t < kHoursPerWeek || t + horizon > visits.cols + kHoursPerWeek) return {};
  std::vector<double> out(visits.rows * horizon);
  for (std::size_t i = 0; i < visits.rows; ++i)
    for (std::size_t h = 0; h < horizon; ++h) out[i * horizon + h] = visits.at(i, t + h - kHoursPerWeek);
  return out;
}

std::vector<double> historical_average(const SeriesMatrix& visits, std::size_t t, std::size_t horizon) {
  if (t < 4 * kHoursPerWeek || t + horizon > visits.cols + kHoursPerWeek) return {};
  std::vector<double> out(visits.rows * horizon);
  for (std::size_t i = 0; i < visits.rows; ++i)
    for (std::size_t h = 0; h < horizon; ++h) {
      double total = 0;
      for (std::size_t w = 1; w <= 4; ++w) total += visits.at(i, t + h - w * kHoursPerWeek);
      out[i * horizon + h] = total / 4.0;
    }
  return out;
}

std::string baseline_name(BaselineKind kind) {
  return kind == BaselineKind::naive_seasonal ? "naive_seasonal" : "historical_average";
}

ForecastSet run_baseline(BaselineKind kind, const SeriesMatrix& visits, const std::vector<WindowSample>& windows) {
  ForecastSet out;
  for (const auto& w : windows) {
    const std::size_t t = w.target_begin();
    auto f = kind == BaselineKind::naive_seasonal ? naive_seasonal(visits, t, w.horizon)
                                                  : historical_average(visits, t, w.horizon);
    if (f.empty()) {
      ++out.skipped;
      continue;
    }
    const auto truth = w.target(visits);
    out.windows.push_back(w);
    out.pred.insert(out.pred.end(), f.begin(), f.end());
    out.truth.insert(out.truth.end(), truth.begin(), truth.end());
  }
  return out;
}

}  // namespace bysgnn

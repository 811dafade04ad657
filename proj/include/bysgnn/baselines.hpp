#pragma once

// Forecast metrics and the two seasonal baselines. Pure functions of the
// dataset; nothing here depends on the model.

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bysgnn/data.hpp"

namespace bysgnn {

constexpr std::size_t kHoursPerWeek = 168;

struct MetricsReport {
  double mae = 0.0;
  double rmse = 0.0;
  std::optional<double> mape;  // absent when every target is zero
  std::vector<double> mae_per_horizon;
  std::vector<double> rmse_per_horizon;
  std::vector<std::optional<double>> mape_per_horizon;
  std::size_t n_windows = 0;
  std::size_t n_points = 0;
  std::size_t mape_masked_count = 0;  // zero targets excluded from MAPE
};

// pred and truth are W × N × H in visit-count units. MAPE is the fraction
// mean |e| / truth over truth > 0.
MetricsReport compute_metrics(std::span<const double> pred, std::span<const double> truth, std::size_t windows,
                              std::size_t nodes, std::size_t horizon);

// Forecast for target columns [t, t+H): visits(t + h − 168). N × H, or empty
// when t < 168.
std::vector<double> naive_seasonal(const SeriesMatrix& visits, std::size_t t, std::size_t horizon);
// Mean of the four previous weeks at the same weekday and hour. N × H, or
// empty when t < 4·168.
std::vector<double> historical_average(const SeriesMatrix& visits, std::size_t t, std::size_t horizon);

enum class BaselineKind { naive_seasonal, historical_average };
std::string baseline_name(BaselineKind kind);

struct ForecastSet {
  std::vector<WindowSample> windows;  // windows that had enough history
  std::vector<double> pred;           // W × N × H
  std::vector<double> truth;
  std::size_t skipped = 0;
};

ForecastSet run_baseline(BaselineKind kind, const SeriesMatrix& visits, const std::vector<WindowSample>& windows);

}  // namespace bysgnn

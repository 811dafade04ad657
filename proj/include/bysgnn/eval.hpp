#pragma once

// Test-split evaluation of a trained model against the baselines, and the
// ablation harness.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "bysgnn/baselines.hpp"
#include "bysgnn/training.hpp"

namespace bysgnn {

struct MethodReport {
  std::string method;
  MetricsReport metrics;
};

struct EvaluationReport {
  std::vector<MethodReport> rows;  // model first, then the baselines
  std::size_t windows_skipped = 0; // test windows without four weeks of history
};

// All methods are scored on the same test windows: those with enough history
// for both baselines.
EvaluationReport evaluate_test(const BysGnnModel& model, const PreparedData& data);

// "+16.47%" style signed percentage of (value − reference) / reference.
std::string format_relative(double value, double reference);

void write_evaluation_csv(const std::filesystem::path& path, const EvaluationReport& report);
std::string format_evaluation_text(const EvaluationReport& report);

struct AblationRow {
  std::string variant;  // "full" or an ablation flag name
  std::vector<MetricsReport> per_seed;
  double mae = 0.0, mape = 0.0, rmse = 0.0;  // medians across seeds
};

struct AblationTable {
  std::vector<AblationRow> rows;  // "full" first
  std::vector<std::uint64_t> seeds;
};

double median(std::vector<double> values);

// One full train + test evaluation per (variant, seed). Each variant adds its
// flag to base.model.ablations.
AblationTable run_ablation(const VisitSeriesDataset& dataset, const std::vector<PoiMetadata>& metadata,
                           const RunConfig& base, const std::vector<std::string>& variants,
                           const std::vector<std::uint64_t>& seeds,
                           const std::function<void(const std::string&, std::uint64_t, const MetricsReport&)>& progress = {});

void write_ablation_csv(const std::filesystem::path& path, const AblationTable& table);
std::string format_ablation_text(const AblationTable& table);

}  // namespace bysgnn

#pragma once

// Data preparation for the model, the optimization loop and batched
// prediction.

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "bysgnn/baselines.hpp"
#include "bysgnn/config.hpp"
#include "bysgnn/metanodes.hpp"
#include "bysgnn/model.hpp"
#include "bysgnn/optimizer.hpp"

namespace bysgnn {

struct PreparedData {
  VisitSeriesDataset dataset;
  std::vector<PoiMetadata> metadata;  // aligned with dataset rows
  CategoryIndex index;
  SeriesMatrix series;                // model nodes × hours, visit counts
  SeriesMatrix normalized;
  NormalizationStats stats;
  DatasetSplits splits;
  std::vector<WindowSample> train_windows, val_windows, test_windows;
  GraphContext context;
  std::vector<std::string> flags;     // data-quality notes (missing fields, degenerate σ, ...)

  std::size_t num_nodes() const { return series.rows; }
  std::size_t num_pois() const { return dataset.num_pois(); }
};

PreparedData prepare_data(VisitSeriesDataset dataset, const std::vector<PoiMetadata>& metadata, const RunConfig& config);

struct Batch {
  Tensor inputs;   // [B, S, T] normalized
  Tensor targets;  // [B, S, H] normalized
};

Batch make_batch(const PreparedData& data, std::span<const WindowSample> windows);

struct EpochLog {
  std::size_t epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_mae = 0.0;
  double val_mape = 0.0;  // NaN when every validation target is zero
  double val_rmse = 0.0;
};

struct TrainResult {
  std::vector<EpochLog> log;
  std::vector<std::vector<double>> best_values;  // parameter values at best val MAE
  std::size_t best_epoch = 0;
  double best_val_mae = 0.0;
  std::size_t steps = 0;
  bool diverged = false;
  std::string divergence;
};

Tensor loss_for(LossKind kind, const Tensor& pred, const Tensor& target);

// Runs the epochs. Validation targets are read only for logging and model
// selection; test windows are never touched. On divergence the loop stops
// with `diverged` set and best_values holding the last good state.
TrainResult train(BysGnnModel& model, const PreparedData& data, const TrainConfig& config,
                  const std::function<void(const EpochLog&)>& on_epoch = {});

void load_values(ParameterStore& store, const std::vector<std::vector<double>>& values);
std::vector<std::vector<double>> snapshot_values(const ParameterStore& store);

void write_training_log(const std::filesystem::path& path, const std::vector<EpochLog>& log);

struct Predictions {
  std::vector<WindowSample> windows;
  std::vector<double> pred;   // W × N × H visit counts for POI rows, clamped at 0
  std::vector<double> truth;  // W × N × H
  double normalized_loss = 0.0;  // over all model nodes
};

Predictions predict(const BysGnnModel& model, const PreparedData& data, const std::vector<WindowSample>& windows,
                    LossKind loss = LossKind::mae, std::size_t batch_size = 64);

}  // namespace bysgnn

namespace bysgnn {

struct FitResult {
  PreparedData data;
  std::unique_ptr<BysGnnModel> model;  // holds the best-validation parameters
  TrainResult train;
};

// prepare_data + model construction (seeded by config.train.seed) + train,
// then restores the best-validation parameters.
FitResult fit_model(const VisitSeriesDataset& dataset, const std::vector<PoiMetadata>& metadata, const RunConfig& config,
                    const std::function<void(const EpochLog&)>& on_epoch = {});

}  // namespace bysgnn

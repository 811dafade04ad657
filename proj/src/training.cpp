#include "bysgnn/training.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>

#include "bysgnn/csv.hpp"
#include "bysgnn/error.hpp"
#include "bysgnn/graphgen.hpp"
#include "bysgnn/ops.hpp"
#include "bysgnn/semantics.hpp"

namespace bysgnn {

PreparedData prepare_data(VisitSeriesDataset dataset, const std::vector<PoiMetadata>& metadata, const RunConfig& config) {
  validate(config);
  const auto& mc = config.model;
  PreparedData d;
  d.metadata = align_metadata(dataset, metadata);
  d.dataset = std::move(dataset);
  d.index = CategoryIndex::from_metadata(d.metadata);
  const std::size_t n = d.dataset.num_pois();
  const bool meta = !mc.ablations.no_metanodes;
  const auto keys = node_keys(d.metadata, d.index);
  if (meta) {
    d.series = aggregate_by_category(d.dataset.visits, d.index).values;
    d.context.node_labels = keys;
  } else {
    d.series = d.dataset.visits;
    d.context.node_labels = d.dataset.poi_ids;
  }
  const std::size_t s = d.series.rows;
  d.context.num_pois = n;

  d.splits = split_dataset(d.series.cols, config.data.split, mc.window, mc.horizon);
  for (const auto& f : d.splits.flags) d.flags.push_back(f);
  d.stats = zscore_fit(d.series, d.splits);
  for (std::size_t r = 0; r < s; ++r)
    if (d.stats.floored[r]) d.flags.push_back("series " + d.context.node_labels[r] + " is constant on the train split");
  d.normalized = SeriesMatrix(s, d.series.cols);
  d.normalized.values = zscore_apply(d.series.values, d.series.cols, d.stats);

  const HourStamp start = d.dataset.start;
  if (!d.splits.train.empty())
    d.train_windows = make_windows(d.splits.train, start, mc.window, mc.horizon, config.train.train_stride);
  if (!d.splits.val.empty())
    d.val_windows = make_windows(d.splits.val, start, mc.window, mc.horizon, config.train.eval_stride);
  if (!d.splits.test.empty())
    d.test_windows = make_windows(d.splits.test, start, mc.window, mc.horizon, config.train.eval_stride);

  if (!mc.ablations.no_semantics) {
    if (!config.data.embeddings_path.empty()) {
      const auto table = load_embedding_table(config.data.embeddings_path);
      if (table.dim != mc.embed_dim) {
        throw ConfigError("embedding file has dimension " + std::to_string(table.dim) + ", config expects " +
                          std::to_string(mc.embed_dim));
      }
      d.context.raw_embeddings = table.select(std::vector<std::string>(keys.begin(), keys.begin() + s));
    } else {
      auto sentences = render_all(d.metadata, d.index);
      sentences.resize(s);
      for (const auto& sd : sentences) {
        if (sd.flagged()) {
          std::string fields;
          for (const auto& f : sd.missing_fields) fields += (fields.empty() ? "" : ",") + f;
          d.flags.push_back("node " + keys[sd.node_index] + " is missing " + fields);
        }
      }
      auto raw = embed_sentences(sentences, TokenHashEmbedder(mc.embed_dim));
      for (auto i : raw.empty_nodes) d.flags.push_back("node " + keys[i] + " has an empty description");
      d.context.raw_embeddings = std::move(raw.values);
    }
  }
  auto distances = config.data.distances_path.empty() ? distance_matrix(d.metadata)
                                                      : load_distance_matrix_csv(config.data.distances_path, n);
  d.context.spatial = SpatialContext::from_distances(std::move(distances), mc.tau_factor);
  if (d.context.spatial.sigma_degenerate) d.flags.push_back("all POIs are colocated; spatial threshold floored to 1 m");
  return d;
}

Batch make_batch(const PreparedData& data, std::span<const WindowSample> windows) {
  if (windows.empty()) throw ContractError("make_batch: no windows");
  const std::size_t b = windows.size(), s = data.num_nodes();
  const std::size_t t = windows[0].window, h = windows[0].horizon;
  std::vector<double> in(b * s * t), out(b * s * h);
  for (std::size_t i = 0; i < b; ++i) {
    const auto x = windows[i].input(data.normalized);
    const auto y = windows[i].target(data.normalized);
    std::copy(x.begin(), x.end(), in.begin() + static_cast<std::ptrdiff_t>(i * s * t));
    std::copy(y.begin(), y.end(), out.begin() + static_cast<std::ptrdiff_t>(i * s * h));
  }
  return {Tensor::from({b, s, t}, std::move(in)), Tensor::from({b, s, h}, std::move(out))};
}

Tensor loss_for(LossKind kind, const Tensor& pred, const Tensor& target) {
  return kind == LossKind::mae ? ops::mae_loss(pred, target) : ops::mse_loss(pred, target);
}

std::vector<std::vector<double>> snapshot_values(const ParameterStore& store) {
  std::vector<std::vector<double>> out;
  for (const auto& p : store.items()) out.emplace_back(p.tensor.data().begin(), p.tensor.data().end());
  return out;
}

void load_values(ParameterStore& store, const std::vector<std::vector<double>>& values) {
  if (values.size() != store.size()) throw ContractError("parameter snapshot does not match the store");
  for (std::size_t i = 0; i < values.size(); ++i) {
    auto dst = store.items()[i].tensor.mutable_data();
    if (dst.size() != values[i].size()) throw ContractError("parameter snapshot size mismatch for " + store.items()[i].name);
    std::copy(values[i].begin(), values[i].end(), dst.begin());
  }
}

Predictions predict(const BysGnnModel& model, const PreparedData& data, const std::vector<WindowSample>& windows,
                    LossKind loss, std::size_t batch_size) {
  NoGradGuard no_grad;
  Predictions out;
  out.windows = windows;
  const std::size_t n = data.num_pois(), s = data.num_nodes();
  const std::size_t h = model.config().horizon;
  double loss_sum = 0.0;
  for (std::size_t begin = 0; begin < windows.size(); begin += batch_size) {
    const std::size_t end = std::min(windows.size(), begin + batch_size);
    const auto batch = make_batch(data, std::span(windows).subspan(begin, end - begin));
    const Tensor pred = model.forward(batch.inputs).prediction;
    loss_sum += loss_for(loss, pred, batch.targets).item() * static_cast<double>(end - begin);
    const auto pv = pred.data();
    for (std::size_t w = 0; w < end - begin; ++w) {
      const auto truth = windows[begin + w].target(data.series);
      for (std::size_t i = 0; i < n; ++i) {
        const double mean = data.stats.mean[i], sd = data.stats.std[i];
        for (std::size_t k = 0; k < h; ++k) {
          out.pred.push_back(std::max(0.0, pv[(w * s + i) * h + k] * sd + mean));
          out.truth.push_back(truth[i * h + k]);
        }
      }
    }
  }
  if (!windows.empty()) out.normalized_loss = loss_sum / static_cast<double>(windows.size());
  return out;
}

TrainResult train(BysGnnModel& model, const PreparedData& data, const TrainConfig& config,
                  const std::function<void(const EpochLog&)>& on_epoch) {
  if (data.train_windows.empty()) throw ConfigError("training split has no windows");
  auto& params = model.parameters().items();
  RmsProp opt(params, config.rho, config.eps);
  TrainResult result;
  result.best_values = snapshot_values(model.parameters());
  result.best_val_mae = std::numeric_limits<double>::infinity();
  std::mt19937_64 rng(config.seed);
  std::vector<std::size_t> order(data.train_windows.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<WindowSample> batch_windows;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    EpochLog log;
    log.epoch = epoch;
    log.lr = lr_schedule(epoch, config);
    // Fisher-Yates with an explicit index draw keeps the order portable
    // across standard libraries.
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng() % i]);
    double loss_sum = 0.0;
    std::size_t seen = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
      const std::size_t end = std::min(order.size(), begin + config.batch_size);
      batch_windows.clear();
      for (std::size_t i = begin; i < end; ++i) batch_windows.push_back(data.train_windows[order[i]]);
      const auto batch = make_batch(data, batch_windows);
      Tensor loss;
      try {
        loss = loss_for(config.loss, model.forward(batch.inputs).prediction, batch.targets);
        if (!std::isfinite(loss.item())) throw NumericalError("training loss is not finite");
        model.parameters().zero_grad();
        loss.backward();
        opt.step(params, log.lr);
      } catch (const NumericalError& e) {
        result.diverged = true;
        result.divergence = "epoch " + std::to_string(epoch) + ", step " + std::to_string(result.steps) + ": " + e.what();
        return result;
      }
      ++result.steps;
      loss_sum += loss.item() * static_cast<double>(end - begin);
      seen += end - begin;
    }
    log.train_loss = loss_sum / static_cast<double>(seen);

    if (!data.val_windows.empty()) {
      const auto p = predict(model, data, data.val_windows, config.loss);
      const auto m = compute_metrics(p.pred, p.truth, p.windows.size(), data.num_pois(), model.config().horizon);
      log.val_loss = p.normalized_loss;
      log.val_mae = m.mae;
      log.val_rmse = m.rmse;
      log.val_mape = m.mape.value_or(std::numeric_limits<double>::quiet_NaN());
    } else {
      log.val_loss = log.val_mae = log.train_loss;
    }
    if (!std::isfinite(log.val_mae)) {
      result.diverged = true;
      result.divergence = "epoch " + std::to_string(epoch) + ": validation error is not finite";
      result.log.push_back(log);
      return result;
    }
    if (log.val_mae < result.best_val_mae) {
      result.best_val_mae = log.val_mae;
      result.best_epoch = epoch;
      result.best_values = snapshot_values(model.parameters());
    }
    result.log.push_back(log);
    if (on_epoch) on_epoch(log);
  }
  return result;
}

void write_training_log(const std::filesystem::path& path, const std::vector<EpochLog>& log) {
  std::ofstream out(path);
  if (!out) throw SchemaError("cannot write " + path.string());
  out << "epoch,lr,train_loss,val_loss,val_mae,val_mape,val_rmse\n";
  for (const auto& e : log) {
    out << e.epoch << ',' << csv::format_double(e.lr) << ',' << csv::format_double(e.train_loss) << ','
        << csv::format_double(e.val_loss) << ',' << csv::format_double(e.val_mae) << ','
        << (std::isnan(e.val_mape) ? std::string() : csv::format_double(e.val_mape)) << ','
        << csv::format_double(e.val_rmse) << '\n';
  }
}

}  // namespace bysgnn

namespace bysgnn {

FitResult fit_model(const VisitSeriesDataset& dataset, const std::vector<PoiMetadata>& metadata, const RunConfig& config,
                    const std::function<void(const EpochLog&)>& on_epoch) {
  FitResult r;
  r.data = prepare_data(dataset, metadata, config);
  r.model = std::make_unique<BysGnnModel>(config.model, r.data.context, config.train.seed);
  r.train = train(*r.model, r.data, config.train, on_epoch);
  load_values(r.model->parameters(), r.train.best_values);
  return r;
}

}  // namespace bysgnn

// bysgnn command-line driver: synth, train, eval, ablate, inspect-graph.
//
// Exit codes: 0 ok, 2 input/configuration error, 3 numerical failure.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "bysgnn/checkpoint.hpp"
#include "bysgnn/error.hpp"
#include "bysgnn/eval.hpp"
#include "bysgnn/graphgen.hpp"
#include "bysgnn/ops.hpp"
#include "bysgnn/synthetic.hpp"
#include "bysgnn/training.hpp"

namespace fs = std::filesystem;
using namespace bysgnn;

namespace {

constexpr int kExitInput = 2;
constexpr int kExitNumerical = 3;

// Exit with a specific code from inside a command.
struct CommandExit {
  int code;
  std::string message;
};

struct Overrides {
  std::string config_file;
  std::optional<std::size_t> epochs, batch_size, train_stride, eval_stride, window, horizon, lift_dim, temporal_dim,
      semantic_dim, embed_dim, heads, gnn_hidden, gnn_out, decay_every;
  std::optional<double> lr, decay_factor, amplification, threshold;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> loss, embeddings, distances;
  std::vector<std::string> ablate;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config_file, "JSON config file (same shape as config.json)");
    cmd->add_option("--epochs", epochs);
    cmd->add_option("--batch-size", batch_size);
    cmd->add_option("--lr", lr, "initial learning rate");
    cmd->add_option("--decay-factor", decay_factor);
    cmd->add_option("--decay-every", decay_every, "epochs between decays, 0 disables");
    cmd->add_option("--seed", seed);
    cmd->add_option("--loss", loss, "mae or mse");
    cmd->add_option("--train-stride", train_stride, "hours between training windows");
    cmd->add_option("--eval-stride", eval_stride, "hours between validation/test windows");
    cmd->add_option("--window", window);
    cmd->add_option("--horizon", horizon);
    cmd->add_option("--lift-dim", lift_dim);
    cmd->add_option("--temporal-dim", temporal_dim);
    cmd->add_option("--semantic-dim", semantic_dim);
    cmd->add_option("--embed-dim", embed_dim);
    cmd->add_option("--heads", heads);
    cmd->add_option("--gnn-hidden", gnn_hidden);
    cmd->add_option("--gnn-out", gnn_out);
    cmd->add_option("--amplification", amplification);
    cmd->add_option("--threshold", threshold);
    cmd->add_option("--embeddings", embeddings, "precomputed node embedding CSV");
    cmd->add_option("--distances", distances, "N x N distance matrix CSV in meters");
    cmd->add_option("--ablate", ablate, "ablation flag (repeatable)");
  }

  RunConfig resolve(unsigned threads) const {
    RunConfig c;
    if (!config_file.empty()) c = load_config_file(config_file, c);
    auto set = [](auto& dst, const auto& src) {
      if (src) dst = *src;
    };
    set(c.train.epochs, epochs);
    set(c.train.batch_size, batch_size);
    set(c.train.lr0, lr);
    set(c.train.decay_factor, decay_factor);
    set(c.train.decay_every, decay_every);
    set(c.train.seed, seed);
    set(c.train.train_stride, train_stride);
    set(c.train.eval_stride, eval_stride);
    if (loss) c.train.loss = parse_loss(*loss);
    set(c.model.window, window);
    set(c.model.horizon, horizon);
    set(c.model.lift_dim, lift_dim);
    set(c.model.temporal_dim, temporal_dim);
    set(c.model.semantic_dim, semantic_dim);
    set(c.model.embed_dim, embed_dim);
    set(c.model.heads, heads);
    set(c.model.gnn_hidden, gnn_hidden);
    set(c.model.gnn_out, gnn_out);
    set(c.model.amplification, amplification);
    set(c.model.threshold, threshold);
    set(c.data.embeddings_path, embeddings);
    set(c.data.distances_path, distances);
    for (const auto& a : ablate) c.model.ablations.enable(a);
    c.threads = threads;
    validate(c);
    return c;
  }
};

struct LoadedData {
  VisitSeriesDataset dataset;
  std::vector<PoiMetadata> metadata;
};

LoadedData load_data_dir(const fs::path& dir) {
  const fs::path visits = dir / "visits.csv", meta = dir / "metadata.csv";
  for (const auto& p : {visits, meta})
    if (!fs::exists(p)) throw CommandExit{kExitInput, "missing input file: " + p.string()};
  LoadedData d;
  auto loaded = load_visits_csv(visits);
  if (loaded.report.missing_count > 0) {
    std::cerr << "warning: " << loaded.report.missing_count << " missing hourly cells filled with 0\n";
  }
  d.dataset = std::move(loaded.dataset);
  d.metadata = load_metadata_csv(meta);
  return d;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw CommandExit{kExitInput, "cannot write " + path.string()};
  out << text;
}

void print_flags(const std::vector<std::string>& flags) {
  for (const auto& f : flags) std::cerr << "note: " << f << '\n';
}

// Rebuilds the prepared data and model a checkpoint was trained with, using
// the checkpoint's normalization statistics.
struct Restored {
  Checkpoint ckpt;
  PreparedData data;
  std::unique_ptr<BysGnnModel> model;
};

Restored restore(const fs::path& checkpoint, const fs::path& data_dir) {
  Restored r;
  if (!fs::exists(checkpoint)) throw CommandExit{kExitInput, "missing checkpoint: " + checkpoint.string()};
  r.ckpt = load_checkpoint(checkpoint);
  auto d = load_data_dir(data_dir);
  if (d.dataset.poi_ids != r.ckpt.poi_ids) {
    std::set<std::string> a(r.ckpt.poi_ids.begin(), r.ckpt.poi_ids.end()), b(d.dataset.poi_ids.begin(), d.dataset.poi_ids.end());
    std::ostringstream msg;
    msg << "dataset POIs do not match the checkpoint";
    for (const auto& id : a)
      if (!b.count(id)) msg << "\n  - " << id << " (checkpoint only)";
    for (const auto& id : b)
      if (!a.count(id)) msg << "\n  + " << id << " (dataset only)";
    if (a == b) msg << "\n  (same POIs in a different order)";
    throw CommandExit{kExitInput, msg.str()};
  }
  r.data = prepare_data(std::move(d.dataset), d.metadata, r.ckpt.config);
  if (r.data.context.node_labels != r.ckpt.node_labels) throw CommandExit{kExitInput, "node labels (categories) differ from the checkpoint"};
  r.data.stats = r.ckpt.stats;
  r.data.normalized.values = zscore_apply(r.data.series.values, r.data.series.cols, r.data.stats);
  r.model = std::make_unique<BysGnnModel>(r.ckpt.config.model, r.data.context, r.ckpt.config.train.seed);
  restore_parameters(r.ckpt, r.model->parameters());
  return r;
}

int cmd_synth(const std::string& spec_path, const fs::path& out, std::uint64_t seed, bool force) {
  SynthSpec spec = spec_path.empty() ? SynthSpec{} : load_synth_spec(spec_path);
  if (fs::exists(out) && !fs::is_empty(out) && !force) {
    throw CommandExit{kExitInput, "output directory " + out.string() + " is not empty (use --force to overwrite)"};
  }
  fs::create_directories(out);
  const auto data = generate_synthetic(spec, seed);
  write_visits_csv(out / "visits.csv", data.dataset);
  write_metadata_csv(out / "metadata.csv", data.metadata);
  write_text(out / "synth_spec.txt", "# seed=" + std::to_string(seed) + "\n" + synth_spec_text(spec));
  std::cout << "wrote " << data.dataset.num_pois() << " POIs x " << data.dataset.hours() << " hours to " << out << '\n';
  return 0;
}

int cmd_train(const fs::path& data_dir, const fs::path& out, const RunConfig& cfg) {
  auto d = load_data_dir(data_dir);
  fs::create_directories(out);
  write_text(out / "config.json", config_to_json(cfg));
  auto fit = fit_model(d.dataset, d.metadata, cfg, [](const EpochLog& e) {
    std::cout << "epoch " << e.epoch << " lr " << e.lr << " train " << e.train_loss << " val_mae " << e.val_mae << '\n';
  });
  print_flags(fit.data.flags);
  write_training_log(out / "train_log.csv", fit.train.log);
  const auto ckpt = make_checkpoint(cfg, fit.data.dataset.poi_ids, fit.data.context.node_labels, fit.data.stats,
                                    fit.model->parameters(), fit.train.best_epoch, fit.train.best_val_mae);
  save_checkpoint(out / "checkpoint.json", ckpt);
  if (fit.train.diverged) {
    throw CommandExit{kExitNumerical, "training diverged (" + fit.train.divergence + "); last good checkpoint written"};
  }
  std::cout << "best epoch " << fit.train.best_epoch << " val_mae " << fit.train.best_val_mae << '\n';
  return 0;
}

int cmd_eval(const fs::path& checkpoint, const fs::path& data_dir, const fs::path& out) {
  auto r = restore(checkpoint, data_dir);
  const auto report = evaluate_test(*r.model, r.data);
  fs::create_directories(out);
  write_evaluation_csv(out / "eval_report.csv", report);
  const auto text = format_evaluation_text(report);
  write_text(out / "eval_report.txt", text);
  std::cout << text;
  if (report.windows_skipped) std::cout << report.windows_skipped << " test windows skipped (insufficient history)\n";
  return 0;
}

int cmd_ablate(const fs::path& data_dir, const fs::path& out, const RunConfig& cfg, const std::vector<std::string>& variants,
               const std::vector<std::uint64_t>& seeds) {
  auto d = load_data_dir(data_dir);
  for (const auto& v : variants) Ablations{}.enable(v);  // validate names early
  fs::create_directories(out);
  write_text(out / "config.json", config_to_json(cfg));
  const auto table = run_ablation(d.dataset, d.metadata, cfg, variants, seeds,
                                  [](const std::string& v, std::uint64_t seed, const MetricsReport& m) {
                                    std::cout << v << " seed " << seed << " mae " << m.mae << " mape "
                                              << m.mape.value_or(std::nan("")) << '\n';
                                  });
  write_ablation_csv(out / "ablation.csv", table);
  const auto text = format_ablation_text(table);
  write_text(out / "ablation.txt", text);
  std::cout << text;
  return 0;
}

int cmd_inspect(const fs::path& checkpoint, const fs::path& data_dir, const std::string& timestamp, const fs::path& out) {
  auto r = restore(checkpoint, data_dir);
  HourStamp t;
  try {
    t = parse_iso_hour(timestamp);
  } catch (const std::exception& e) {
    throw CommandExit{kExitInput, std::string("bad timestamp: ") + e.what()};
  }
  const auto& ds = r.data.dataset;
  const std::size_t window = r.ckpt.config.model.window;
  const HourStamp first = ds.start + static_cast<HourStamp>(window);
  const HourStamp last = ds.start + static_cast<HourStamp>(ds.hours());
  if (t < first || t > last) {
    throw CommandExit{kExitInput, "timestamp " + timestamp + " outside [" + format_iso_hour(first) + ", " +
                                      format_iso_hour(last) + "] (needs a full " + std::to_string(window) + "h input window)"};
  }
  const std::size_t origin = static_cast<std::size_t>(t - ds.start);
  const std::size_t s = r.data.num_nodes();
  std::vector<double> x(s * window);
  for (std::size_t i = 0; i < s; ++i)
    for (std::size_t k = 0; k < window; ++k) x[i * window + k] = r.data.normalized.at(i, origin - window + k);
  NoGradGuard no_grad;
  const auto f = r.model->forward(Tensor::from({1, s, window}, std::move(x)));
  fs::create_directories(out);
  const auto& labels = r.data.context.node_labels;
  SeriesMatrix adj(s, s);
  adj.values.assign(f.adjacency.data().begin(), f.adjacency.data().end());
  write_labeled_matrix_csv(out / "adjacency.csv", labels, labels, adj);
  const std::size_t m = f.gnn_output.dim(2);
  SeriesMatrix emb(s, m);
  emb.values.assign(f.gnn_output.data().begin(), f.gnn_output.data().end());
  std::vector<std::string> cols;
  for (std::size_t j = 0; j < m; ++j) cols.push_back("v" + std::to_string(j));
  write_labeled_matrix_csv(out / "embeddings.csv", labels, cols, emb);
  std::ostringstream alpha;
  alpha.precision(17);
  alpha << r.model->alpha() << '\n';
  write_text(out / "gate_alpha.txt", alpha.str());
  for (auto row : f.zeroed_rows) std::cerr << "note: row " << labels[row] << " had no positive entry and was zeroed\n";
  std::cout << "graph at " << format_iso_hour(t) << ": " << s << " nodes, alpha " << r.model->alpha() << '\n';
  return 0;
}

unsigned default_threads() {
  if (const char* env = std::getenv("BYSGNN_THREADS")) {
    try {
      const long v = std::stol(env);
      if (v >= 1) return static_cast<unsigned>(v);
    } catch (const std::exception&) {
    }
    std::cerr << "warning: ignoring invalid BYSGNN_THREADS='" << env << "'\n";
  }
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  bysgnn::retain_freed_memory();
  CLI::App app{"POI visit forecasting with dynamic busyness graphs"};
  app.require_subcommand(1);
  unsigned threads = default_threads();
  app.add_option("--threads", threads, "worker threads (default 1, env BYSGNN_THREADS)")->check(CLI::PositiveNumber);

  std::string spec_path, data_dir, out_dir, checkpoint, timestamp;
  std::uint64_t synth_seed = 0;
  bool force = false;
  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
  synth->add_option("--spec", spec_path, "key=value spec file (defaults if omitted)");
  synth->add_option("--out", out_dir, "output directory")->required();
  synth->add_option("--seed", synth_seed);
  synth->add_flag("--force", force, "write into a non-empty directory");

  Overrides train_ov, ablate_ov;
  auto* train = app.add_subcommand("train", "train a model and write checkpoint.json, train_log.csv, config.json");
  train->add_option("--data", data_dir, "directory with visits.csv and metadata.csv")->required();
  train->add_option("--out", out_dir, "output directory")->required();
  train_ov.attach(train);

  auto* eval = app.add_subcommand("eval", "score a checkpoint and both baselines on the test split");
  eval->add_option("--checkpoint", checkpoint)->required();
  eval->add_option("--data", data_dir)->required();
  eval->add_option("--out", out_dir)->required();

  std::vector<std::string> variants;
  std::vector<std::uint64_t> seeds{0, 1, 2};
  auto* ablate = app.add_subcommand("ablate", "train the full model and ablated variants over several seeds");
  ablate->add_option("--data", data_dir)->required();
  ablate->add_option("--out", out_dir)->required();
  ablate->add_option("--variants", variants, "ablation flags (default: all five)")->delimiter(',');
  ablate->add_option("--seeds", seeds, "comma-separated seeds")->delimiter(',');
  ablate_ov.attach(ablate);

  auto* inspect = app.add_subcommand("inspect-graph", "export the graph built for one forecast origin");
  inspect->add_option("--checkpoint", checkpoint)->required();
  inspect->add_option("--data", data_dir)->required();
  inspect->add_option("--timestamp", timestamp, "forecast origin, e.g. 2019-03-06T10:00:00Z")->required();
  inspect->add_option("--out", out_dir)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitInput;
  }

  set_num_threads(threads);
  try {
    if (*synth) return cmd_synth(spec_path, out_dir, synth_seed, force);
    if (*train) return cmd_train(data_dir, out_dir, train_ov.resolve(threads));
    if (*eval) return cmd_eval(checkpoint, data_dir, out_dir);
    if (*ablate) {
      if (variants.empty()) variants = Ablations::names();
      return cmd_ablate(data_dir, out_dir, ablate_ov.resolve(threads), variants, seeds);
    }
    if (*inspect) return cmd_inspect(checkpoint, data_dir, timestamp, out_dir);
  } catch (const CommandExit& e) {
    std::cerr << "error: " << e.message << '\n';
    return e.code;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const std::invalid_argument& e) {  // ConfigError, DimensionError
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const std::runtime_error& e) {  // SchemaError and I/O
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <regex>
#include <sstream>

#include "bysgnn/baselines.hpp"
#include "bysgnn/error.hpp"
#include "bysgnn/eval.hpp"
#include "doctest.h"
#include "support/tiny.hpp"

using namespace bysgnn;
using bysgnn::testing::tiny_config;

namespace {

SeriesMatrix weekly_periodic(std::size_t rows, std::size_t weeks) {
  SeriesMatrix m(rows, weeks * kHoursPerWeek);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t t = 0; t < m.cols; ++t)
      m.at(r, t) = 5.0 + 3.0 * static_cast<double>(r) + static_cast<double>((t % kHoursPerWeek) % 13);
  return m;
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("metric examples") {
  SUBCASE("perfect forecast") {
    const std::vector<double> v{1, 2, 3, 4};
    const auto m = compute_metrics(v, v, 1, 2, 2);
    CHECK(m.mae == 0.0);
    CHECK(m.rmse == 0.0);
    CHECK(*m.mape == 0.0);
  }
  SUBCASE("single point") {
    const std::vector<double> p{9}, t{10};
    const auto m = compute_metrics(p, t, 1, 1, 1);
    CHECK(m.mae == 1.0);
    CHECK(*m.mape == doctest::Approx(0.1).epsilon(1e-15));
    CHECK(m.rmse == 1.0);
  }
  SUBCASE("errors {1, -1} and {0, 2}") {
    const std::vector<double> t{5, 5};
    const auto a = compute_metrics(std::vector<double>{6, 4}, t, 1, 1, 2);
    CHECK(a.mae == 1.0);
    CHECK(a.rmse == 1.0);
    const auto b = compute_metrics(std::vector<double>{5, 7}, t, 1, 1, 2);
    CHECK(b.mae == 1.0);
    CHECK(b.rmse == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));
    CHECK(b.mae_per_horizon == std::vector<double>{0.0, 2.0});
  }
  SUBCASE("zero targets are masked from MAPE") {
    const auto m = compute_metrics(std::vector<double>{1, 3}, std::vector<double>{0, 2}, 1, 1, 2);
    CHECK(m.mape_masked_count == 1);
    CHECK(*m.mape == doctest::Approx(0.5).epsilon(1e-15));
    const auto all = compute_metrics(std::vector<double>{1, 3}, std::vector<double>{0, 0}, 1, 1, 2);
    CHECK_FALSE(all.mape.has_value());
    CHECK(all.mape_masked_count == 2);
  }
}

TEST_CASE("metrics: RMSE >= MAE and POI-order invariance (property)") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 20.0);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t w = 3, n = 5, h = 4;
    std::vector<double> p(w * n * h), t(w * n * h);
    for (auto& x : p) x = u(rng);
    for (auto& x : t) x = std::floor(u(rng));
    const auto m = compute_metrics(p, t, w, n, h);
    CHECK(m.rmse >= m.mae);
    // Reverse the POI axis in both arrays.
    std::vector<double> p2(p.size()), t2(t.size());
    for (std::size_t a = 0; a < w; ++a)
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < h; ++k) {
          p2[(a * n + i) * h + k] = p[(a * n + (n - 1 - i)) * h + k];
          t2[(a * n + i) * h + k] = t[(a * n + (n - 1 - i)) * h + k];
        }
    const auto m2 = compute_metrics(p2, t2, w, n, h);
    CHECK(m2.mae == doctest::Approx(m.mae).epsilon(1e-14));
    CHECK(m2.rmse == doctest::Approx(m.rmse).epsilon(1e-14));
    CHECK(*m2.mape == doctest::Approx(*m.mape).epsilon(1e-14));
  }
}

TEST_CASE("naive seasonal examples") {
  const auto series = weekly_periodic(3, 3);
  const auto f = naive_seasonal(series, 200, 6);
  REQUIRE(f.size() == 18);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t h = 0; h < 6; ++h) CHECK(f[i * 6 + h] == series.at(i, 200 + h));
  CHECK(naive_seasonal(series, 167, 6).empty());

  // +c after the first week.
  SeriesMatrix shifted = series;
  for (std::size_t t = kHoursPerWeek; t < shifted.cols; ++t) shifted.at(0, t) += 2.5;
  const auto g = naive_seasonal(shifted, kHoursPerWeek, 6);
  for (std::size_t h = 0; h < 6; ++h) CHECK(shifted.at(0, kHoursPerWeek + h) - g[h] == doctest::Approx(2.5));
}

TEST_CASE("historical average examples") {
  SeriesMatrix c(1, 5 * kHoursPerWeek);
  for (double& v : c.values) v = 7.0;
  const auto f = historical_average(c, 4 * kHoursPerWeek, 3);
  REQUIRE(f.size() == 3);
  for (double v : f) CHECK(v == 7.0);

  SeriesMatrix s(1, 5 * kHoursPerWeek);
  const std::size_t t = 4 * kHoursPerWeek + 10;
  for (std::size_t k = 1; k <= 4; ++k) s.at(0, t - k * kHoursPerWeek) = 2.0 * static_cast<double>(5 - k);  // 8,6,4,2
  CHECK(historical_average(s, t, 1)[0] == 5.0);

  const auto periodic = weekly_periodic(2, 6);
  const auto p = historical_average(periodic, 5 * kHoursPerWeek + 3, 6);
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t h = 0; h < 6; ++h) CHECK(p[i * 6 + h] == periodic.at(i, 5 * kHoursPerWeek + 3 + h));
  CHECK(historical_average(periodic, 4 * kHoursPerWeek - 1, 6).empty());
}

TEST_CASE("run_baseline skips windows without history") {
  const auto series = weekly_periodic(2, 6);
  std::vector<WindowSample> windows;
  for (std::size_t start : {0ul, 100ul, 700ul, 800ul}) windows.push_back(WindowSample{start, 24, 6});
  const auto ns = run_baseline(BaselineKind::naive_seasonal, series, windows);
  CHECK(ns.skipped == 2);  // targets 24 and 124 precede hour 168
  const auto ha = run_baseline(BaselineKind::historical_average, series, windows);
  CHECK(ha.skipped == 2);
  const auto m = compute_metrics(ha.pred, ha.truth, ha.windows.size(), 2, 6);
  CHECK(m.mae == 0.0);
  CHECK(m.rmse == 0.0);
}

TEST_CASE("relative change formatting") {
  CHECK(format_relative(116.47, 100.0) == "+16.47%");
  CHECK(format_relative(131.72, 100.0) == "+31.72%");
  CHECK(format_relative(95.0, 100.0) == "-5.00%");
  CHECK(format_relative(1.0, 1.0) == "+0.00%");
}

TEST_CASE("median") {
  CHECK(median({3.0, 1.0, 2.0}) == 2.0);
  CHECK(median({4.0, 1.0, 3.0, 2.0}) == 2.5);
  CHECK(median({5.0}) == 5.0);
}

TEST_CASE("baselines do not depend on model code") {
  const std::filesystem::path root = BYSGNN_SOURCE_DIR;
  const std::regex include_re("#include\\s*[<\"]([^>\"]+)[>\"]");
  const std::vector<std::string> forbidden{"model", "gnn", "encoder", "graphgen", "semantics", "training",
                                           "tensor", "ops", "optimizer", "metanodes"};
  for (const auto& file : {root / "include/bysgnn/baselines.hpp", root / "src/baselines.cpp"}) {
    const std::string text = read_file(file);
    REQUIRE_FALSE(text.empty());
    std::size_t includes = 0;
    for (std::sregex_iterator it(text.begin(), text.end(), include_re), end; it != end; ++it) {
      ++includes;
      const std::string header = (*it)[1];
      CAPTURE(header);
      for (const auto& f : forbidden) CHECK(header.find("bysgnn/" + f + ".hpp") == std::string::npos);
    }
    CHECK(includes > 0);
  }
}

TEST_CASE("test evaluation scores every method on the same windows") {
  auto spec = SynthSpec{};
  spec.n_pois = 4;
  spec.n_categories = 2;
  spec.days = 36;
  spec.clusters = 2;
  spec.regime_shift_day = 0;
  const auto syn = generate_synthetic(spec, 2);
  auto cfg = tiny_config();
  cfg.train.epochs = 1;
  const auto fit = fit_model(syn.dataset, syn.metadata, cfg);
  const auto report = evaluate_test(*fit.model, fit.data);
  REQUIRE(report.rows.size() == 3);
  CHECK(report.rows[0].method == "bysgnn");
  CHECK(report.rows[1].method == "naive_seasonal");
  CHECK(report.rows[2].method == "historical_average");
  for (const auto& r : report.rows) {
    CHECK(r.metrics.n_windows == report.rows[0].metrics.n_windows);
    CHECK(r.metrics.rmse >= r.metrics.mae);
  }
  CHECK(report.rows[0].metrics.n_windows + report.windows_skipped == fit.data.test_windows.size());

  const auto dir = std::filesystem::temp_directory_path() / "bysgnn_test_eval";
  std::filesystem::create_directories(dir);
  write_evaluation_csv(dir / "e.csv", report);
  const std::string csv = read_file(dir / "e.csv");
  CHECK(csv.rfind("method,mae,mape,rmse,n_windows,mape_masked_count\n", 0) == 0);
  CHECK(csv.find("relative_to_best_baseline") != std::string::npos);
  const std::string text = format_evaluation_text(report);
  CHECK(std::regex_search(text, std::regex("[+-][0-9]+\\.[0-9]{2}%")));
  std::filesystem::remove_all(dir);
}

TEST_CASE("ablation harness: empty variant list and determinism") {
  auto spec = SynthSpec{};
  spec.n_pois = 4;
  spec.n_categories = 2;
  spec.days = 36;
  spec.clusters = 2;
  const auto syn = generate_synthetic(spec, 5);
  auto cfg = tiny_config();
  cfg.train.epochs = 1;
  cfg.train.train_stride = 3;

  const auto only_full = run_ablation(syn.dataset, syn.metadata, cfg, {}, {0});
  REQUIRE(only_full.rows.size() == 1);
  CHECK(only_full.rows[0].variant == "full");

  const auto twice = run_ablation(syn.dataset, syn.metadata, cfg, {"no_space", "no_space"}, {1});
  REQUIRE(twice.rows.size() == 3);
  CHECK(twice.rows[1].mae == twice.rows[2].mae);
  CHECK(twice.rows[1].rmse == twice.rows[2].rmse);
  CHECK(twice.rows[1].mape == twice.rows[2].mape);

  const std::string text = format_ablation_text(twice);
  CHECK(std::regex_search(text, std::regex("[+-][0-9]+\\.[0-9]{2}%")));
  const auto dir = std::filesystem::temp_directory_path() / "bysgnn_test_ablation";
  std::filesystem::create_directories(dir);
  write_ablation_csv(dir / "a.csv", twice);
  const std::string csv = read_file(dir / "a.csv");
  CHECK(csv.rfind("variant,mae,mape,rmse,mae_change,mape_change,rmse_change,seeds\nfull,", 0) == 0);
  std::filesystem::remove_all(dir);

  CHECK_THROWS_AS(run_ablation(syn.dataset, syn.metadata, cfg, {"no_such_variant"}, {0}), ConfigError);
}

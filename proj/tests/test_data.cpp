#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "bysgnn/data.hpp"
#include "bysgnn/error.hpp"
#include "bysgnn/synthetic.hpp"
#include "doctest.h"

using namespace bysgnn;

namespace {

std::string visits_csv(std::size_t pois, std::size_t hours, std::size_t skip_poi = 99, std::size_t skip_hour = 99) {
  std::ostringstream os;
  os << "poi_id,timestamp_utc,visits\n";
  const HourStamp start = parse_iso_hour("2020-01-01T00:00:00Z");
  for (std::size_t i = 0; i < pois; ++i) {
    for (std::size_t t = 0; t < hours; ++t) {
      if (i == skip_poi && t == skip_hour) continue;
      os << "p" << i << ',' << format_iso_hour(start + static_cast<HourStamp>(t)) << ',' << (i * 100 + t) << '\n';
    }
  }
  return os.str();
}

}  // namespace

TEST_CASE("timestamps") {
  const HourStamp t = parse_iso_hour("2020-01-22T10:00:00Z");
  CHECK(format_iso_hour(t) == "2020-01-22T10:00:00Z");
  CHECK(weekday(t) == 2);  // Wednesday
  CHECK(hour_of_day(t) == 10);
  CHECK(parse_iso_hour("2020-01-22 10:00:00") == t);
  CHECK(parse_iso_hour("2020-01-22T10:00:00+00:00") == t);
  CHECK_THROWS_AS(parse_iso_hour("2020-01-22T10:30:00Z"), ParseError);
  CHECK_THROWS_AS(parse_iso_hour("2020-02-30T10:00:00Z"), ParseError);
  CHECK_THROWS_AS(parse_iso_hour("2020-01-22T10:00:00-05:00"), ParseError);
  CHECK_THROWS_AS(parse_iso_hour("yesterday"), ParseError);
}

TEST_CASE("load visits: 2 POIs x 48 hours") {
  std::istringstream in(visits_csv(2, 48));
  const auto loaded = parse_visits_csv(in);
  CHECK(loaded.dataset.num_pois() == 2);
  CHECK(loaded.dataset.hours() == 48);
  CHECK(loaded.report.missing_count == 0);
  CHECK(loaded.dataset.visits.at(1, 47) == 147);
  CHECK(loaded.dataset.poi_ids[0] == "p0");
}

TEST_CASE("writer/reader round trip") {
  const auto tmp = std::filesystem::temp_directory_path() / "bysgnn_test_visits.csv";
  SynthSpec spec;
  spec.n_pois = 3;
  spec.n_categories = 2;
  spec.days = 2;
  spec.noise = 0.0;
  const auto synth = generate_synthetic(spec, 1);
  write_visits_csv(tmp, synth.dataset);
  const auto back = load_visits_csv(tmp);
  CHECK(back.dataset.poi_ids == synth.dataset.poi_ids);
  CHECK(back.dataset.start == synth.dataset.start);
  CHECK(back.dataset.visits.values == synth.dataset.visits.values);  // bit exact

  const auto meta_path = std::filesystem::temp_directory_path() / "bysgnn_test_meta.csv";
  write_metadata_csv(meta_path, synth.metadata);
  const auto meta = load_metadata_csv(meta_path);
  REQUIRE(meta.size() == 3);
  CHECK(meta[1].address == synth.metadata[1].address);  // contains commas
  CHECK(meta[1].latitude == synth.metadata[1].latitude);
  std::filesystem::remove(tmp);
  std::filesystem::remove(meta_path);
}

TEST_CASE("missing hour is filled with zero and counted") {
  std::istringstream in(visits_csv(2, 10, 1, 4));
  const auto loaded = parse_visits_csv(in);
  CHECK(loaded.report.missing_count == 1);
  CHECK(loaded.dataset.visits.at(1, 4) == 0.0);
  CHECK(loaded.dataset.visits.at(1, 5) == 105.0);
}

TEST_CASE("visits schema and parse errors") {
  SUBCASE("duplicate pair") {
    std::istringstream in("poi_id,timestamp_utc,visits\na,2020-01-01T00:00:00Z,1\na,2020-01-01T00:00:00Z,2\n");
    CHECK_THROWS_AS(parse_visits_csv(in), SchemaError);
  }
  SUBCASE("non-monotone") {
    std::istringstream in(
        "poi_id,timestamp_utc,visits\na,2020-01-01T02:00:00Z,1\na,2020-01-01T01:00:00Z,2\n");
    CHECK_THROWS_AS(parse_visits_csv(in), SchemaError);
  }
  SUBCASE("malformed row reports its line") {
    std::istringstream in("poi_id,timestamp_utc,visits\na,2020-01-01T00:00:00Z,1\na,2020-01-01T01:00:00Z,abc\n");
    try {
      parse_visits_csv(in);
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(e.line == 3);
    }
  }
  SUBCASE("negative visits") {
    std::istringstream in("poi_id,timestamp_utc,visits\na,2020-01-01T00:00:00Z,-1\n");
    CHECK_THROWS_AS(parse_visits_csv(in), ParseError);
  }
  SUBCASE("bad header") {
    std::istringstream in("id,ts,v\n");
    CHECK_THROWS_AS(parse_visits_csv(in), ParseError);
  }
}

TEST_CASE("metadata validation") {
  const std::string header = "poi_id,name,address,hours,phone,top_category,sub_category,latitude,longitude\n";
  SUBCASE("quoted fields") {
    std::istringstream in(header + "a,\"Simon mall\",\"5085 Westheimer Rd, Houston, TX, 77056\",h,p,Malls,Sub,29.7,-95.4\n");
    const auto m = parse_metadata_csv(in);
    CHECK(m[0].address == "5085 Westheimer Rd, Houston, TX, 77056");
  }
  SUBCASE("latitude range") {
    std::istringstream in(header + "a,n,addr,h,p,Cat,Sub,91,0\n");
    CHECK_THROWS_AS(parse_metadata_csv(in), SchemaError);
  }
  SUBCASE("empty top category") {
    std::istringstream in(header + "a,n,addr,h,p,,Sub,0,0\n");
    CHECK_THROWS_AS(parse_metadata_csv(in), SchemaError);
  }
  SUBCASE("duplicate id") {
    std::istringstream in(header + "a,n,addr,h,p,C,S,0,0\na,n,addr,h,p,C,S,0,0\n");
    CHECK_THROWS_AS(parse_metadata_csv(in), SchemaError);
  }
}

TEST_CASE("split_dataset") {
  const auto s = split_dataset(400 * 24);
  CHECK(s.train.length() == 280 * 24);
  CHECK(s.val.length() == 80 * 24);
  CHECK(s.test.length() == 40 * 24);
  CHECK(s.train.end == s.val.begin);
  CHECK(s.val.end == s.test.begin);
  CHECK(s.flags.empty());

  CHECK_THROWS_AS(split_dataset(10), ConfigError);

  const auto all = split_dataset(100, {1.0, 0.0, 0.0});
  CHECK(all.train.length() == 100);
  CHECK(all.val.empty());
  CHECK(all.test.empty());
  CHECK(all.flags.size() == 2);

  CHECK_THROWS_AS(split_dataset(1000, {0.5, 0.2, 0.2}), ConfigError);
}

TEST_CASE("z-score") {
  SeriesMatrix m(2, 4);
  for (std::size_t t = 0; t < 4; ++t) m.at(0, t) = 7.0;  // constant
  m.at(1, 0) = 0;
  m.at(1, 1) = 2;
  m.at(1, 2) = 0;
  m.at(1, 3) = 2;
  DatasetSplits s;
  s.train = {0, 4};
  const auto st = zscore_fit(m, s);
  CHECK(st.floored[0]);
  CHECK(st.std[0] == 1.0);
  CHECK_FALSE(st.floored[1]);
  const auto z = zscore_apply(m.values, 4, st);
  for (std::size_t t = 0; t < 4; ++t) CHECK(z[t] == 0.0);
  CHECK(z[4] == -1.0);
  CHECK(z[5] == 1.0);

  NormalizationStats manual{{1.0}, {1.0}, {false}};
  const std::vector<double> series{0.0, 2.0};
  const auto zz = zscore_apply(series, 2, manual);
  CHECK(zz[0] == -1.0);
  CHECK(zz[1] == 1.0);
}

TEST_CASE("z-score round trip and train moments (property)") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-1000, 1000);
  for (int trial = 0; trial < 20; ++trial) {
    SeriesMatrix m(3, 50);
    for (auto& v : m.values) v = u(rng);
    DatasetSplits s;
    s.train = {0, 35};
    const auto st = zscore_fit(m, s);
    const auto z = zscore_apply(m.values, 50, st);
    const auto back = zscore_invert(z, 50, st);
    for (std::size_t i = 0; i < back.size(); ++i) CHECK(std::fabs(back[i] - m.values[i]) <= 1e-10);
    for (std::size_t r = 0; r < 3; ++r) {
      double mu = 0, var = 0;
      for (std::size_t t = 0; t < 35; ++t) mu += z[r * 50 + t];
      mu /= 35;
      for (std::size_t t = 0; t < 35; ++t) var += (z[r * 50 + t] - mu) * (z[r * 50 + t] - mu);
      CHECK(std::fabs(mu) <= 1e-10);
      CHECK(std::fabs(std::sqrt(var / 35) - 1.0) <= 1e-10);
    }
  }
}

TEST_CASE("make_windows boundary arithmetic") {
  CHECK(make_windows({0, 30}, 0).size() == 1);
  CHECK(make_windows({0, 31}, 0).size() == 2);
  CHECK_THROWS_AS(make_windows({0, 29}, 0), ConfigError);
  CHECK(make_windows({10, 110}, 0, 24, 6, 5).size() == (100 - 30) / 5 + 1);

  const auto w = make_windows({100, 200}, 1000);
  for (std::size_t k = 0; k < w.size(); ++k) {
    CHECK(w[k].input_begin == 100 + k);  // exhaustive, duplicate-free
    CHECK(w[k].target_begin() == w[k].input_begin + 24);
    CHECK(w[k].target_begin() + 6 <= 200);
    CHECK(w[k].window_start == 1000 + static_cast<HourStamp>(w[k].input_begin));
  }

  SeriesMatrix m(2, 40);
  for (std::size_t i = 0; i < m.values.size(); ++i) m.values[i] = static_cast<double>(i);
  const auto one = make_windows({0, 40}, 0)[3];
  const auto in = one.input(m);
  const auto tg = one.target(m);
  CHECK(in.size() == 48);
  CHECK(tg.size() == 12);
  CHECK(in[0] == 3);
  CHECK(in[24] == 43);
  CHECK(tg[0] == 27);  // one hour after the input ends
  CHECK(tg[6] == 67);
}

TEST_CASE("synthetic generator") {
  SynthSpec spec;
  const auto a = generate_synthetic(spec, 7);
  CHECK(a.dataset.num_pois() == 40);
  CHECK(a.dataset.hours() == 2160);
  const auto b = generate_synthetic(spec, 7);
  CHECK(a.dataset.visits.values == b.dataset.visits.values);
  CHECK(a.metadata[5].address == b.metadata[5].address);
  const auto c = generate_synthetic(spec, 8);
  CHECK(a.dataset.visits.values != c.dataset.visits.values);
  for (double v : a.dataset.visits.values) CHECK(v >= 0.0);

  SUBCASE("noise 0 and no shift: proportional to the category pattern and weekly periodic") {
    SynthSpec clean = spec;
    clean.noise = 0.0;
    clean.regime_shift_day = 0;
    const auto d = generate_synthetic(clean, 3);
    for (std::size_t i = 0; i < d.dataset.num_pois(); ++i) {
      for (std::size_t j = i + 1; j < d.dataset.num_pois(); ++j) {
        if (d.category_of[i] != d.category_of[j]) continue;
        const double ratio = d.dataset.visits.at(i, 0) / d.dataset.visits.at(j, 0);
        for (std::size_t t = 0; t < d.dataset.hours(); t += 7) {
          CHECK(d.dataset.visits.at(i, t) / d.dataset.visits.at(j, t) == doctest::Approx(ratio).epsilon(1e-12));
        }
      }
      for (std::size_t t = 168; t < d.dataset.hours(); ++t) {
        CHECK(d.dataset.visits.at(i, t) == d.dataset.visits.at(i, t - 168));
      }
    }
  }
}

TEST_CASE("synthetic spec parsing") {
  std::istringstream ok("# comment\nn_pois = 12\nn_categories=3\nnoise=0.5\nregime_shift_day=0\n");
  const auto s = parse_synth_spec(ok);
  CHECK(s.n_pois == 12);
  CHECK(s.n_categories == 3);
  CHECK(s.noise == 0.5);
  CHECK(s.days == 90);
  std::istringstream round(synth_spec_text(s));
  const auto s2 = parse_synth_spec(round);
  CHECK(s2.n_pois == 12);
  CHECK(s2.noise == 0.5);

  std::istringstream bad("n_poiz=3\n");
  try {
    parse_synth_spec(bad);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("regime_shift_day") != std::string::npos);
  }
  std::istringstream neg("days=-3\n");
  CHECK_THROWS_AS(parse_synth_spec(neg), ConfigError);
}

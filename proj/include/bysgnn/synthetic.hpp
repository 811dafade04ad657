#pragma once

// Synthetic POI visit generator used for acceptance testing.
//
// Each POI series is its category's base pattern (daily and weekly harmonics)
// times a POI amplitude, modulated by multi-hour event bumps shared by all
// POIs of a spatial cluster, an optional per-category level change from
// `regime_shift_day` on, and Poisson-like observation noise. `noise` scales
// every stochastic component: at noise = 0 there are no events and each POI
// is exactly proportional to its category pattern.

#include <cstdint>
#include <filesystem>
#include <istream>
#include <string>
#include <vector>

#include "bysgnn/data.hpp"

namespace bysgnn {

struct SynthSpec {
  std::size_t n_pois = 40;
  std::size_t n_categories = 8;
  std::size_t days = 90;
  std::size_t clusters = 5;
  double noise = 1.0;
  std::size_t regime_shift_day = 45;  // 0 disables the shift

  static const std::vector<std::string>& keys();
};

// key=value lines; '#' starts a comment. Unknown keys and bad values throw
// ConfigError naming the valid keys.
SynthSpec parse_synth_spec(std::istream& in);
SynthSpec load_synth_spec(const std::filesystem::path& path);
std::string synth_spec_text(const SynthSpec& spec);

struct SyntheticData {
  VisitSeriesDataset dataset;
  std::vector<PoiMetadata> metadata;  // aligned with dataset.poi_ids
  SeriesMatrix expected;              // noise-free intensity per POI/hour
  std::vector<std::size_t> category_of;
  std::vector<std::size_t> cluster_of;
};

SyntheticData generate_synthetic(const SynthSpec& spec, std::uint64_t seed);

}  // namespace bysgnn

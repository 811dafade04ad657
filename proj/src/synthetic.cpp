#include "bysgnn/synthetic.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include "bysgnn/csv.hpp"
#include "bysgnn/error.hpp"

namespace bysgnn {

const std::vector<std::string>& SynthSpec::keys() {
  static const std::vector<std::string> k{"n_pois", "n_categories", "days", "clusters", "noise", "regime_shift_day"};
  return k;
}

namespace {

std::string valid_keys() {
  std::string s;
  for (const auto& k : SynthSpec::keys()) s += (s.empty() ? "" : ", ") + k;
  return s;
}

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::size_t parse_count(const std::string& key, const std::string& v) {
  std::size_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw ConfigError("synthetic spec: '" + key + "' expects a non-negative integer, got '" + v + "'");
  }
  return out;
}

// Portable draws straight from the 64-bit engine.
struct Rng {
  std::mt19937_64 eng;
  explicit Rng(std::uint64_t seed) : eng(seed) {}
  double uniform() { return static_cast<double>(eng() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  std::size_t index(std::size_t n) { return static_cast<std::size_t>(uniform() * static_cast<double>(n)) % n; }
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }
};

struct CategoryDef {
  const char* top;
  const char* sub;
  const char* hours;
  std::array<const char*, 4> name_words;
};

const CategoryDef kCategories[] = {
    {"Restaurants and Other Eating Places", "Full-Service Restaurants", "Monday - Sunday: 11:00 - 22:00",
     {"Grill", "Kitchen", "Bistro", "Diner"}},
    {"Gasoline Stations", "Gasoline Stations with Convenience Stores", "Monday - Sunday: 00:00 - 24:00",
     {"Fuel", "Gas", "Petro", "Express"}},
    {"Grocery Stores", "Supermarkets and Other Grocery Stores", "Monday - Sunday: 07:00 - 22:00",
     {"Market", "Grocers", "Foods", "Fresh"}},
    {"Lessors of Real Estate", "Malls", "Monday - Friday: 10:00 - 19:00, Saturday 10:00 - 17:00, and closed on Sunday",
     {"Mall", "Galleria", "Center", "Plaza"}},
    {"Spectator Sports", "Sports Teams and Clubs", "Varies by event schedule", {"Stadium", "Arena", "Field", "Park"}},
    {"Museums, Historical Sites, and Similar Institutions", "Museums", "Tuesday - Sunday: 09:00 - 17:00",
     {"Museum", "Gallery", "Heritage Hall", "Science Center"}},
    {"Drinking Places (Alcoholic Beverages)", "Bars", "Monday - Sunday: 16:00 - 02:00",
     {"Tavern", "Pub", "Taproom", "Lounge"}},
    {"Fitness and Recreational Sports Centers", "Fitness Centers", "Monday - Sunday: 05:00 - 23:00",
     {"Fitness", "Gym", "Athletic Club", "Training"}},
    {"Elementary and Secondary Schools", "Schools", "Monday - Friday: 07:30 - 16:00", {"Elementary", "High School", "Academy", "Prep"}},
    {"Coffee Shops", "Snack and Nonalcoholic Beverage Bars", "Monday - Sunday: 06:00 - 18:00",
     {"Coffee", "Roasters", "Espresso Bar", "Cafe"}},
};
constexpr std::size_t kNumCategoryDefs = std::size(kCategories);

const char* kNameStems[] = {"Maple", "Bayou", "Lone Star", "Cedar", "Riverside", "Summit", "Harbor", "Oak",
                            "Magnolia", "Pioneer", "Union", "Sunset", "Willow", "Granite", "Liberty", "Meridian"};
const char* kStreets[] = {"Westheimer Rd", "Main St", "Kirby Dr", "Richmond Ave", "Montrose Blvd", "Shepherd Dr",
                          "Washington Ave", "Bellaire Blvd", "Memorial Dr", "Fannin St", "Louisiana St", "Post Oak Blvd"};
constexpr double kCityLat = 29.7604;
constexpr double kCityLon = -95.3698;
constexpr const char* kCity = "Synthville";

struct CategoryPattern {
  double base, daily_amp, daily_peak, semi_amp, semi_phase, weekly_amp, weekly_phase, shift_factor;
};

}  // namespace

SynthSpec parse_synth_spec(std::istream& in) {
  SynthSpec spec;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("synthetic spec line " + std::to_string(line_no) + ": expected key=value; valid keys: " + valid_keys());
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key == "n_pois") spec.n_pois = parse_count(key, value);
    else if (key == "n_categories") spec.n_categories = parse_count(key, value);
    else if (key == "days") spec.days = parse_count(key, value);
    else if (key == "clusters") spec.clusters = parse_count(key, value);
    else if (key == "regime_shift_day") spec.regime_shift_day = parse_count(key, value);
    else if (key == "noise") {
      try {
        spec.noise = csv::parse_double(value, line_no);
      } catch (const ParseError&) {
        throw ConfigError("synthetic spec: 'noise' expects a number, got '" + value + "'");
      }
      if (!(spec.noise >= 0.0)) throw ConfigError("synthetic spec: 'noise' must be >= 0");
    } else {
      throw ConfigError("unknown synthetic spec key '" + key + "'; valid keys: " + valid_keys());
    }
  }
  if (spec.n_pois == 0 || spec.n_categories == 0 || spec.days == 0 || spec.clusters == 0) {
    throw ConfigError("synthetic spec: n_pois, n_categories, days and clusters must be positive");
  }
  if (spec.n_categories > spec.n_pois) throw ConfigError("synthetic spec: more categories than POIs");
  return spec;
}

SynthSpec load_synth_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open synthetic spec " + path.string());
  return parse_synth_spec(in);
}

std::string synth_spec_text(const SynthSpec& spec) {
  std::ostringstream os;
  os << "n_pois=" << spec.n_pois << "\n"
     << "n_categories=" << spec.n_categories << "\n"
     << "days=" << spec.days << "\n"
     << "clusters=" << spec.clusters << "\n"
     << "noise=" << csv::format_double(spec.noise) << "\n"
     << "regime_shift_day=" << spec.regime_shift_day << "\n";
  return os.str();
}

SyntheticData generate_synthetic(const SynthSpec& spec, std::uint64_t seed) {
  if (spec.n_pois == 0 || spec.n_categories == 0 || spec.days == 0 || spec.clusters == 0) {
    throw ConfigError("synthetic spec: n_pois, n_categories, days and clusters must be positive");
  }
  if (spec.n_categories > spec.n_pois) throw ConfigError("synthetic spec: more categories than POIs");
  Rng rng(seed);
  const std::size_t n = spec.n_pois;
  const std::size_t hours = spec.days * 24;
  constexpr double two_pi = 2.0 * std::numbers::pi;

  std::vector<CategoryPattern> cats(spec.n_categories);
  for (auto& c : cats) {
    c.base = rng.uniform(18.0, 40.0);
    c.daily_amp = rng.uniform(0.6, 1.2);
    c.daily_peak = rng.uniform(8.0, 20.0);
    c.semi_amp = rng.uniform(0.1, 0.4);
    c.semi_phase = rng.uniform(0.0, 12.0);
    c.weekly_amp = rng.uniform(0.1, 0.4);
    c.weekly_phase = rng.uniform(0.0, 7.0);
    const double magnitude = rng.uniform(0.2, 0.45);
    c.shift_factor = std::exp(rng.uniform() < 0.5 ? -magnitude : magnitude);
  }

  // Every category gets at least one POI; the rest are drawn at random.
  std::vector<std::size_t> category_of(n);
  for (std::size_t i = 0; i < n; ++i) category_of[i] = i < spec.n_categories ? i : rng.index(spec.n_categories);
  for (std::size_t i = n - 1; i > 0; --i) std::swap(category_of[i], category_of[rng.index(i + 1)]);

  std::vector<std::array<double, 2>> centers(spec.clusters);
  for (auto& c : centers) c = {kCityLat + rng.uniform(-0.08, 0.08), kCityLon + rng.uniform(-0.08, 0.08)};
  std::vector<std::size_t> cluster_of(n);
  std::vector<double> amplitude(n);
  SyntheticData out;
  out.metadata.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    cluster_of[i] = rng.index(spec.clusters);
    amplitude[i] = std::exp(0.35 * rng.normal());
    const std::size_t k = category_of[i];
    const CategoryDef& def = kCategories[k % kNumCategoryDefs];
    const std::string suffix = k < kNumCategoryDefs ? "" : " " + std::to_string(k / kNumCategoryDefs + 1);
    PoiMetadata& m = out.metadata[i];
    char id[32];
    std::snprintf(id, sizeof id, "poi_%03zu", i);
    m.poi_id = id;
    m.name = std::string(kNameStems[rng.index(std::size(kNameStems))]) + " " + def.name_words[rng.index(4)];
    m.address = std::to_string(100 + rng.index(9900)) + " " + kStreets[rng.index(std::size(kStreets))] + ", " + kCity +
                ", TX, " + std::to_string(77001 + rng.index(98));
    m.hours = def.hours;
    char phone[32];
    std::snprintf(phone, sizeof phone, "(713)555-%04zu", rng.index(10000));
    m.phone = phone;
    m.top_category = def.top + suffix;
    m.sub_category = def.sub + suffix;
    m.latitude = centers[cluster_of[i]][0] + 0.006 * rng.normal();
    m.longitude = centers[cluster_of[i]][1] + 0.006 * rng.normal();
  }

  // Cluster events: on each day an event starts with probability 0.3, lasts
  // 3–8 hours and lifts all member POIs by a smooth bump.
  std::vector<std::vector<double>> event_lift(spec.clusters, std::vector<double>(hours, 1.0));
  if (spec.noise > 0.0) {
    for (std::size_t c = 0; c < spec.clusters; ++c) {
      for (std::size_t d = 0; d < spec.days; ++d) {
        if (rng.uniform() >= 0.3) continue;
        const std::size_t start = d * 24 + 8 + rng.index(13);
        const std::size_t duration = 3 + rng.index(6);
        const double magnitude = spec.noise * rng.uniform(0.4, 1.2);
        for (std::size_t h = 0; h < duration && start + h < hours; ++h) {
          const double phase = std::numbers::pi * (static_cast<double>(h) + 0.5) / static_cast<double>(duration);
          event_lift[c][start + h] += magnitude * std::sin(phase);
        }
      }
    }
  }

  // 2019-01-07 was a Monday.
  const HourStamp start = parse_iso_hour("2019-01-07T00:00:00Z");
  out.dataset.start = start;
  out.dataset.visits = SeriesMatrix(n, hours);
  out.expected = SeriesMatrix(n, hours);
  for (std::size_t i = 0; i < n; ++i) out.dataset.poi_ids.push_back(out.metadata[i].poi_id);

  for (std::size_t t = 0; t < hours; ++t) {
    const double hod = static_cast<double>(t % 24);
    const double dow = static_cast<double>((t / 24) % 7) + hod / 24.0;
    const bool shifted = spec.regime_shift_day > 0 && t / 24 >= spec.regime_shift_day;
    std::vector<double> pattern(spec.n_categories);
    for (std::size_t k = 0; k < spec.n_categories; ++k) {
      const auto& c = cats[k];
      pattern[k] = c.base *
                   std::exp(c.daily_amp * std::cos(two_pi * (hod - c.daily_peak) / 24.0) +
                            c.semi_amp * std::cos(2.0 * two_pi * (hod - c.semi_phase) / 24.0) +
                            c.weekly_amp * std::cos(two_pi * (dow - c.weekly_phase) / 7.0)) *
                   (shifted ? c.shift_factor : 1.0);
    }
    for (std::size_t i = 0; i < n; ++i) {
      const double lambda = amplitude[i] * pattern[category_of[i]] * event_lift[cluster_of[i]][t];
      out.expected.at(i, t) = lambda;
      double v = lambda;
      if (spec.noise > 0.0) v = std::max(0.0, std::round(lambda + spec.noise * std::sqrt(lambda) * rng.normal()));
      out.dataset.visits.at(i, t) = v;
    }
  }
  out.category_of = std::move(category_of);
  out.cluster_of = std::move(cluster_of);
  return out;
}

}  // namespace bysgnn

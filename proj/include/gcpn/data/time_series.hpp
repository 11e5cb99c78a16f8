#pragma once

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "gcpn/error.hpp"

namespace gcpn::data {

enum class SeriesKind { demand, wind };

inline const char* to_string(SeriesKind k) { return k == SeriesKind::demand ? "demand" : "wind"; }

inline SeriesKind series_kind_from_string(const std::string& s) {
  if (s == "demand") return SeriesKind::demand;
  if (s == "wind") return SeriesKind::wind;
  throw ConfigError("unknown series kind '" + s + "'");
}

inline constexpr std::size_t kHoursPerDay = 24;

/// Hourly, nonnegative energy series.
struct TimeSeries {
  SeriesKind kind = SeriesKind::demand;
  std::vector<double> values;

  std::size_t length() const { return values.size(); }
  std::size_t days() const { return values.size() / kHoursPerDay; }
  double operator[](std::size_t t) const { return values[t]; }

  void validate(const std::string& where) const {
    if (values.size() < kHoursPerDay) {
      throw ParseError(where, "series needs at least 24 hourly values, got " +
                                  std::to_string(values.size()));
    }
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (!std::isfinite(values[i]) || values[i] < 0.0) {
        throw ParseError(where, "value " + std::to_string(i) + " must be finite and >= 0");
      }
    }
  }
};

// File schema: one value per line, or "timestamp,value" / "timestamp value"
// with the value in the last column. Blank lines are skipped. Lines starting
// with '#' are comments; "# label=<demand|wind>" is checked if present.

inline TimeSeries load_series(const std::string& path, SeriesKind expected) {
  std::ifstream is(path);
  if (!is) throw ParseError(path, "cannot open file");
  TimeSeries ts;
  ts.kind = expected;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    if (line[first] == '#') {
      const auto pos = line.find("label=");
      if (pos != std::string::npos) {
        std::string label = line.substr(pos + 6);
        label.erase(label.find_last_not_of(" \t\r") + 1);
        if (label != to_string(expected)) {
          throw ParseError(path + ":" + std::to_string(lineno),
                           "label '" + label + "' but expected '" + to_string(expected) + "'");
        }
      }
      continue;
    }
    std::string field = line.substr(first);
    const auto sep = field.find_last_of(", \t");
    if (sep != std::string::npos) {
      // Trailing separators would leave an empty value column.
      std::string tail = field.substr(sep + 1);
      tail.erase(tail.find_last_not_of(" \t\r") + 1);
      if (!tail.empty()) field = tail;
    }
    field.erase(field.find_last_not_of(" \t\r") + 1);
    char* end = nullptr;
    const double v = std::strtod(field.c_str(), &end);
    const std::string where = path + ":" + std::to_string(lineno);
    if (field.empty() || end == field.c_str() || *end != '\0') {
      throw ParseError(where, "malformed value '" + field + "'");
    }
    if (!std::isfinite(v) || v < 0.0) {
      throw ParseError(where, "row " + std::to_string(ts.values.size()) + ": value " + field +
                                  " must be finite and >= 0");
    }
    ts.values.push_back(v);
  }
  if (ts.values.empty()) throw ParseError(path, "file contains no values");
  ts.validate(path);
  return ts;
}

inline void save_series(const std::string& path, const TimeSeries& ts) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  os << "# label=" << to_string(ts.kind) << "\n";
  char buf[64];
  for (double v : ts.values) {
    std::snprintf(buf, sizeof buf, "%.17g\n", v);
    os << buf;
  }
}

struct SynthParams {
  double demand_base = 1.0;        // mean hourly demand
  double demand_amplitude = 0.35;  // relative size of the daily swing
  double demand_noise = 0.05;      // relative noise std
  double wind_mean = 0.6;
  double wind_phi = 0.95;  // AR(1) persistence
  double wind_sigma = 0.12;
};

/// Zero-mean daily shape with a morning and a larger evening peak.
inline double diurnal_shape(double hour) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  return 0.6 * std::cos(two_pi * (hour - 19.0) / 24.0) +
         0.4 * std::cos(2.0 * two_pi * (hour - 8.0) / 24.0);
}

/// Demand: base * (1 + amplitude * shape(hour) + noise), clipped at 0.
/// Wind: AR(1) around wind_mean, clipped at 0.
template <class Rng>
TimeSeries synth_series(Rng& rng, SeriesKind kind, std::size_t days, const SynthParams& p = {}) {
  if (days < 1) throw ConfigError("synth_series: days must be >= 1");
  TimeSeries ts;
  ts.kind = kind;
  ts.values.resize(days * kHoursPerDay);
  std::normal_distribution<double> n01(0.0, 1.0);
  if (kind == SeriesKind::demand) {
    for (std::size_t t = 0; t < ts.values.size(); ++t) {
      const double h = static_cast<double>(t % kHoursPerDay);
      const double v =
          p.demand_base * (1.0 + p.demand_amplitude * diurnal_shape(h) + p.demand_noise * n01(rng));
      ts.values[t] = std::max(0.0, v);
    }
  } else {
    double x = p.wind_mean;
    for (double& v : ts.values) {
      x = p.wind_mean + p.wind_phi * (x - p.wind_mean) + p.wind_sigma * n01(rng);
      v = std::max(0.0, x);
    }
  }
  return ts;
}

/// Demand and wind series for one microgrid.
struct SitePair {
  TimeSeries demand;
  TimeSeries wind;
};

inline std::string site_path(const std::string& dir, SeriesKind kind, std::size_t index) {
  return (std::filesystem::path(dir) / to_string(kind) / ("microgrid_" + std::to_string(index) + ".txt"))
      .string();
}

/// Reads `<dir>/{demand,wind}/microgrid_<i>.txt` for i = 0..n-1.
inline std::vector<SitePair> load_sites(const std::string& dir, std::size_t n) {
  std::vector<SitePair> out;
  for (std::size_t i = 0; i < n; ++i) {
    SitePair s{load_series(site_path(dir, SeriesKind::demand, i), SeriesKind::demand),
               load_series(site_path(dir, SeriesKind::wind, i), SeriesKind::wind)};
    if (s.demand.length() != s.wind.length()) {
      throw ParseError(dir, "demand/wind lengths differ for microgrid " + std::to_string(i));
    }
    out.push_back(std::move(s));
  }
  return out;
}

inline void save_sites(const std::string& dir, const std::vector<SitePair>& sites) {
  for (auto kind : {SeriesKind::demand, SeriesKind::wind}) {
    std::filesystem::create_directories(std::filesystem::path(dir) / to_string(kind));
  }
  for (std::size_t i = 0; i < sites.size(); ++i) {
    save_series(site_path(dir, SeriesKind::demand, i), sites[i].demand);
    save_series(site_path(dir, SeriesKind::wind, i), sites[i].wind);
  }
}

/// Synthetic sites; each microgrid draws from its own stream derived from `seed`.
inline std::vector<SitePair> synth_sites(std::uint64_t seed, std::size_t days,
                                         const std::vector<SynthParams>& params) {
  std::vector<SitePair> out;
  for (std::size_t i = 0; i < params.size(); ++i) {
    std::mt19937_64 rng(seed * 1000003ULL + i);
    TimeSeries d = synth_series(rng, SeriesKind::demand, days, params[i]);
    TimeSeries w = synth_series(rng, SeriesKind::wind, days, params[i]);
    out.push_back({std::move(d), std::move(w)});
  }
  return out;
}

}  // namespace gcpn::data

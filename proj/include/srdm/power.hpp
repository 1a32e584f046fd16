#pragma once

/**
 * @file power.hpp
 * @brief Meteorology-to-power mechanism models: log-law hub-height
 *        extrapolation plus a turbine power curve for wind, and the
 *        temperature-corrected linear PV model. All outputs are per unit.
 */

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "srdm/data_model.hpp"

namespace srdm {

enum class Technology { kWind, kPv };

inline std::string technology_name(Technology t) { return t == Technology::kWind ? "wind" : "pv"; }

inline Technology parse_technology(std::string_view s) {
  if (s == "wind") return Technology::kWind;
  if (s == "pv") return Technology::kPv;
  throw ConfigError("unknown technology '" + std::string(s) + "' (expected wind or pv)");
}

/// One point of a tabulated turbine power curve.
struct CurvePoint {
  double speed_ms = 0.0;
  double power_mw = 0.0;
};

struct WindTurbineSpec {
  double rated_power_mw = 9.0;
  double cut_in = 3.0;
  double rated_speed = 13.0;
  double cut_out = 25.0;
  double hub_height = 100.0;
  double reference_height = 10.0;
  double roughness = 0.018;
  /// Optional tabulated curve used between cut-in and rated speed.
  std::optional<std::vector<CurvePoint>> table;

  void validate() const {
    if (!(cut_in > 0.0 && cut_in < rated_speed && rated_speed < cut_out)) {
      throw ValidationError("wind spec requires 0 < cut_in < rated_speed < cut_out");
    }
    if (!(rated_power_mw > 0.0)) throw ValidationError("rated_power must be > 0");
    if (!(roughness > 0.0 && reference_height > roughness && hub_height >= reference_height)) {
      throw ValidationError("wind spec requires hub_height >= reference_height > roughness > 0");
    }
    if (table) {
      if (table->size() < 2) throw ValidationError("power-curve table needs at least 2 points");
      for (std::size_t i = 0; i < table->size(); ++i) {
        const auto& p = (*table)[i];
        if (!std::isfinite(p.speed_ms) || !std::isfinite(p.power_mw) || p.speed_ms < 0.0) {
          throw ValidationError("power-curve table point " + std::to_string(i + 1) + " is invalid");
        }
        if (p.power_mw < 0.0 || p.power_mw > rated_power_mw) {
          throw ValidationError("power-curve table point " + std::to_string(i + 1) + " outside [0, rated_power]");
        }
        if (i > 0 && !(p.speed_ms > (*table)[i - 1].speed_ms)) {
          throw ValidationError("power-curve table speeds must be strictly increasing");
        }
      }
    }
  }
};

struct PVModuleSpec {
  double derating = 1.0;          // f_pv
  double capacity_kw = 1.0;       // C_pv; power is reported per unit of it
  double temp_coeff = -0.0028;    // mu, fraction per degC
  double g_stc = 1000.0;          // W/m^2
  double t_stc = 25.0;            // degC

  void validate() const {
    if (!(derating > 0.0 && derating <= 1.0)) throw ValidationError("pv derating must lie in (0, 1]");
    if (!(capacity_kw > 0.0)) throw ValidationError("pv capacity must be > 0");
    if (!(temp_coeff >= -0.005 && temp_coeff <= 0.0)) throw ValidationError("pv temp_coeff must lie in [-0.005, 0]");
    if (!(g_stc > 0.0)) throw ValidationError("g_stc must be > 0");
  }
};

/// Euclidean magnitude of the horizontal wind vector.
inline double wind_speed_magnitude(double u, double v) { return std::hypot(u, v); }

/// Log-law extrapolation from the reference height to the hub height.
inline double extrapolate_hub_height(double s_ref, const WindTurbineSpec& spec) {
  if (!(spec.reference_height > spec.roughness) || !(spec.roughness > 0.0) || !(spec.hub_height > spec.roughness)) {
    throw ConfigError("hub-height extrapolation requires heights above the roughness length");
  }
  return s_ref * std::log(spec.hub_height / spec.roughness) / std::log(spec.reference_height / spec.roughness);
}

/// Per-unit turbine output at hub-height speed `s`.
inline double wind_power(double s, const WindTurbineSpec& spec) {
  if (s < spec.cut_in || s >= spec.cut_out) return 0.0;
  if (s >= spec.rated_speed) return 1.0;
  if (spec.table) {
    const auto& t = *spec.table;
    if (s <= t.front().speed_ms) return t.front().power_mw / spec.rated_power_mw;
    if (s >= t.back().speed_ms) return t.back().power_mw / spec.rated_power_mw;
    const auto hi = std::upper_bound(t.begin(), t.end(), s, [](double x, const CurvePoint& p) { return x < p.speed_ms; });
    const auto lo = hi - 1;
    const double w = (s - lo->speed_ms) / (hi->speed_ms - lo->speed_ms);
    return (lo->power_mw + w * (hi->power_mw - lo->power_mw)) / spec.rated_power_mw;
  }
  const double ci3 = spec.cut_in * spec.cut_in * spec.cut_in;
  const double r3 = spec.rated_speed * spec.rated_speed * spec.rated_speed;
  return (s * s * s - ci3) / (r3 - ci3);
}

/// Per-unit PV output, clipped to [0, 1]; the cell temperature is the air temperature.
inline double pv_power(double g, double t, const PVModuleSpec& spec) {
  const double p = spec.derating * (g / spec.g_stc) * (1.0 + spec.temp_coeff * (t - spec.t_stc));
  return std::clamp(p, 0.0, 1.0);
}

inline double wind_power_at(const FeatureVector& f, const WindTurbineSpec& spec) {
  return wind_power(extrapolate_hub_height(wind_speed_magnitude(f.u, f.v), spec), spec);
}

inline double pv_power_at(const FeatureVector& f, const PVModuleSpec& spec) { return pv_power(f.r, f.t, spec); }

// ---------------------------------------------------------------------------
// Power series

struct PowerSeries {
  Resolution resolution = Resolution::kHourly;
  Technology technology = Technology::kWind;
  Date start{2000, 1, 1};
  /// One value per hour (hourly) or per day (daily).
  std::vector<double> values;

  std::size_t steps_per_day() const { return resolution == Resolution::kHourly ? kHoursPerDay : 1; }
  std::size_t days() const { return values.size() / steps_per_day(); }
  Date date_of(std::size_t step) const { return start.plus_days(static_cast<long>(step / steps_per_day())); }
};

namespace power_detail {

template <class Day, class F>
PowerSeries convert(const DaySeries<Day>& series, Technology tech, F&& per_step) {
  PowerSeries out;
  out.resolution = resolution_of<Day>;
  out.technology = tech;
  if (!series.empty()) out.start = series.first_date();
  for (const auto& d : series) {
    if constexpr (std::is_same_v<Day, HighResDay>) {
      for (const auto& h : d.hours) out.values.push_back(per_step(h));
    } else {
      out.values.push_back(per_step(d.mean));
    }
  }
  return out;
}

}  // namespace power_detail

template <class Day>
PowerSeries convert_series(const DaySeries<Day>& series, const WindTurbineSpec& spec) {
  spec.validate();
  return power_detail::convert(series, Technology::kWind, [&](const FeatureVector& f) { return wind_power_at(f, spec); });
}

template <class Day>
PowerSeries convert_series(const DaySeries<Day>& series, const PVModuleSpec& spec) {
  spec.validate();
  return power_detail::convert(series, Technology::kPv, [&](const FeatureVector& f) { return pv_power_at(f, spec); });
}

template <class Day>
PowerSeries convert_series(const DaySeries<Day>& series, Technology tech, const WindTurbineSpec& wind,
                           const PVModuleSpec& pv) {
  return tech == Technology::kWind ? convert_series(series, wind) : convert_series(series, pv);
}

inline std::string to_csv(const PowerSeries& p) {
  const bool hourly = p.resolution == Resolution::kHourly;
  std::string out = hourly ? "timestamp,p\n" : "date,p\n";
  for (std::size_t i = 0; i < p.values.size(); ++i) {
    const Date d = p.date_of(i);
    out += hourly ? detail::hour_timestamp(d, i % kHoursPerDay) : d.to_string();
    out += ',';
    out += text::format_double(p.values[i]);
    out += '\n';
  }
  return out;
}

inline void write_power(const std::string& path, const PowerSeries& p) { text::write_file(path, to_csv(p)); }

/**
 * @brief Parses a `timestamp,p` or `date,p` file. Rows must be contiguous
 *        and in order; whole days only for hourly files.
 */
inline PowerSeries parse_power_csv(std::string_view contents, Technology tech) {
  const auto lines = text::split(contents, '\n');
  if (lines.empty()) throw ParseError("line 1: empty power file");
  const std::string_view header = text::trim_eol(lines[0]);
  PowerSeries out;
  out.technology = tech;
  if (header == "timestamp,p") {
    out.resolution = Resolution::kHourly;
  } else if (header == "date,p") {
    out.resolution = Resolution::kDaily;
  } else {
    throw ParseError("line 1: expected header 'timestamp,p' or 'date,p'");
  }
  const bool hourly = out.resolution == Resolution::kHourly;
  std::size_t step = 0;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const std::string_view line = text::trim_eol(lines[i]);
    if (line.empty()) continue;
    const std::string where = "line " + std::to_string(i + 1) + ": ";
    const auto cells = text::split(line, ',');
    if (cells.size() != 2) throw ParseError(where + "expected 2 fields");
    const std::string key(cells[0]);
    Date date{2000, 1, 1};
    std::size_t hour = 0;
    try {
      if (hourly) {
        if (key.size() != 19 || key[10] != 'T' || key.substr(13) != ":00:00") throw ParseError("bad timestamp");
        date = Date::parse(key.substr(0, 10));
        hour = static_cast<std::size_t>(std::stoi(key.substr(11, 2)));
        if (hour >= kHoursPerDay) throw ParseError("bad hour");
      } else {
        date = Date::parse(key);
      }
    } catch (const std::exception&) {
      throw ParseError(where + "malformed timestamp '" + key + "'");
    }
    double value = 0.0;
    if (!text::parse_double(cells[1], value)) {
      throw ParseError(where + "malformed value '" + std::string(cells[1]) + "'");
    }
    if (!(value >= 0.0 && value <= 1.0)) throw ValidationError(where + "per-unit power outside [0, 1]");
    if (step == 0) {
      if (hour != 0) throw ContinuityError(where + "hourly power must start at hour 0");
      out.start = date;
    }
    if (date != out.date_of(step) || (hourly && hour != step % kHoursPerDay)) {
      throw ContinuityError(where + "expected step at " + out.date_of(step).to_string());
    }
    out.values.push_back(value);
    ++step;
  }
  if (hourly && out.values.size() % kHoursPerDay != 0) throw ContinuityError("hourly power ends mid-day");
  return out;
}

inline PowerSeries read_power(const std::string& path, Technology tech) {
  return parse_power_csv(text::read_file(path), tech);
}

/// Reads a `speed_ms,power_mw` curve table.
inline std::vector<CurvePoint> parse_power_curve(std::string_view contents) {
  const auto lines = text::split(contents, '\n');
  if (lines.empty() || text::trim_eol(lines[0]) != "speed_ms,power_mw") {
    throw ParseError("line 1: expected header 'speed_ms,power_mw'");
  }
  std::vector<CurvePoint> out;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const std::string_view line = text::trim_eol(lines[i]);
    if (line.empty()) continue;
    const auto cells = text::split(line, ',');
    if (cells.size() != 2) throw ParseError("line " + std::to_string(i + 1) + ": expected 2 fields");
    CurvePoint point;
    if (!text::parse_double(cells[0], point.speed_ms) || !text::parse_double(cells[1], point.power_mw)) {
      throw ParseError("line " + std::to_string(i + 1) + ": malformed number");
    }
    out.push_back(point);
    if (out.size() > 1 && !(out.back().speed_ms > out[out.size() - 2].speed_ms)) {
      throw ValidationError("line " + std::to_string(i + 1) + ": speeds must be strictly increasing");
    }
  }
  return out;
}

inline std::vector<CurvePoint> read_power_curve(const std::string& path) {
  return parse_power_curve(text::read_file(path));
}

}  // namespace srdm

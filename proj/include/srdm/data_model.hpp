#pragma once

/**
 * @file data_model.hpp
 * @brief Meteorological day types, contiguous day series, CSV ingestion,
 *        daily aggregation, normalization and train/validation splitting.
 *
 * A day of high-resolution data is 24 hourly feature vectors; a day of
 * low-resolution data is a single daily-mean feature vector. Features are
 * always ordered (u, v, r, t).
 */

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <map>
#include <random>
#include <string>
#include <string_view>
#include <type_traits>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "srdm/calendar.hpp"
#include "srdm/error.hpp"
#include "srdm/text.hpp"

namespace srdm {

inline constexpr std::size_t kHoursPerDay = 24;
inline constexpr std::size_t kFeatureCount = 4;
inline constexpr std::array<const char*, kFeatureCount> kFeatureNames{"u", "v", "r", "t"};

enum class Feature : std::size_t { kU = 0, kV = 1, kR = 2, kT = 3 };

/**
 * @brief One observation of the four meteorological features.
 *
 * u/v are east-west / north-south wind (m/s), r is downward solar radiation
 * (W/m^2) and t is near-surface air temperature (deg C).
 */
struct FeatureVector {
  double u{};
  double v{};
  double r{};
  double t{};

  double& operator[](std::size_t i) {
    switch (i) {
      case 0: return u;
      case 1: return v;
      case 2: return r;
      default: return t;
    }
  }
  double operator[](std::size_t i) const { return const_cast<FeatureVector&>(*this)[i]; }
  double operator[](Feature f) const { return (*this)[static_cast<std::size_t>(f)]; }

  bool finite() const {
    return std::isfinite(u) && std::isfinite(v) && std::isfinite(r) && std::isfinite(t);
  }
  /// Physical invariant: finite and non-negative radiation.
  bool physical() const { return finite() && r >= 0.0; }

  friend bool operator==(const FeatureVector&, const FeatureVector&) = default;
};

struct HighResDay {
  Date date;
  std::array<FeatureVector, kHoursPerDay> hours{};

  friend bool operator==(const HighResDay&, const HighResDay&) = default;
};

struct LowResDay {
  Date date;
  FeatureVector mean{};

  friend bool operator==(const LowResDay&, const LowResDay&) = default;
};

enum class Resolution { kHourly, kDaily };

template <class Day>
inline constexpr Resolution resolution_of =
    std::is_same_v<Day, HighResDay> ? Resolution::kHourly : Resolution::kDaily;

namespace detail {

inline bool day_finite(const HighResDay& d) {
  return std::all_of(d.hours.begin(), d.hours.end(), [](const FeatureVector& f) { return f.finite(); });
}
inline bool day_finite(const LowResDay& d) { return d.mean.finite(); }

inline bool day_physical(const HighResDay& d) {
  return std::all_of(d.hours.begin(), d.hours.end(), [](const FeatureVector& f) { return f.physical(); });
}
inline bool day_physical(const LowResDay& d) { return d.mean.physical(); }

}  // namespace detail

/**
 * @brief Contiguous, gap-free sequence of days at a single resolution.
 *
 * Construction checks that dates increase by exactly one calendar day and
 * that every value is finite. Radiation non-negativity is a property of
 * physical-unit data only (normalized series may dip below zero), so it is
 * checked separately by `require_physical`.
 */
template <class Day>
class DaySeries {
 public:
  using day_type = Day;
  static constexpr Resolution resolution = resolution_of<Day>;

  DaySeries() = default;
  explicit DaySeries(std::vector<Day> days) : days_(std::move(days)) {
    for (std::size_t i = 0; i < days_.size(); ++i) {
      if (!detail::day_finite(days_[i])) {
        throw ValidationError("non-finite value on " + days_[i].date.to_string());
      }
      if (i > 0 && days_[i - 1].date.next() != days_[i].date) {
        throw ContinuityError("expected " + days_[i - 1].date.next().to_string() + " after " +
                              days_[i - 1].date.to_string() + ", got " + days_[i].date.to_string());
      }
    }
  }

  const std::vector<Day>& days() const { return days_; }
  std::size_t size() const { return days_.size(); }
  bool empty() const { return days_.empty(); }
  const Day& operator[](std::size_t i) const { return days_[i]; }
  auto begin() const { return days_.begin(); }
  auto end() const { return days_.end(); }
  const Date& first_date() const { return days_.front().date; }
  const Date& last_date() const { return days_.back().date; }

  /// Days [first, first + count).
  DaySeries slice(std::size_t first, std::size_t count) const {
    if (first + count > days_.size()) throw IndexError("slice out of range");
    return DaySeries(std::vector<Day>(days_.begin() + static_cast<std::ptrdiff_t>(first),
                                      days_.begin() + static_cast<std::ptrdiff_t>(first + count)));
  }

  void require_physical() const {
    for (const auto& d : days_) {
      if (!detail::day_physical(d)) {
        throw ValidationError("negative radiation on " + d.date.to_string());
      }
    }
  }

  friend bool operator==(const DaySeries&, const DaySeries&) = default;

 private:
  std::vector<Day> days_;
};

using HourlySeries = DaySeries<HighResDay>;
using DailySeries = DaySeries<LowResDay>;

// ---------------------------------------------------------------------------
// Aggregation

inline LowResDay daily_mean(const HighResDay& day) {
  LowResDay out{day.date, {}};
  for (std::size_t f = 0; f < kFeatureCount; ++f) {
    double sum = 0.0;
    for (const auto& h : day.hours) sum += h[f];
    out.mean[f] = sum / static_cast<double>(kHoursPerDay);
  }
  return out;
}

inline DailySeries daily_mean(const HourlySeries& series) {
  std::vector<LowResDay> out;
  out.reserve(series.size());
  for (const auto& d : series) out.push_back(daily_mean(d));
  return DailySeries(std::move(out));
}

// ---------------------------------------------------------------------------
// CSV

namespace detail {

inline std::string format_row_values(const FeatureVector& f) {
  std::string s;
  for (std::size_t i = 0; i < kFeatureCount; ++i) {
    s += ',';
    s += text::format_double(f[i]);
  }
  return s;
}

inline std::string hour_timestamp(const Date& d, std::size_t hour) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "T%02zu:00:00", hour);
  return d.to_string() + buf;
}

struct ParsedRow {
  long long key;  // serial hour or serial day
  FeatureVector values;
  std::size_t line;
};

}  // namespace detail

inline std::string to_csv(const HourlySeries& series) {
  std::string out = "timestamp,u,v,r,t\n";
  for (const auto& d : series) {
    for (std::size_t h = 0; h < kHoursPerDay; ++h) {
      out += detail::hour_timestamp(d.date, h);
      out += detail::format_row_values(d.hours[h]);
      out += '\n';
    }
  }
  return out;
}

inline std::string to_csv(const DailySeries& series) {
  std::string out = "date,u,v,r,t\n";
  for (const auto& d : series) {
    out += d.date.to_string();
    out += detail::format_row_values(d.mean);
    out += '\n';
  }
  return out;
}

template <class Series>
void write_series(const std::string& path, const Series& series) {
  text::write_file(path, to_csv(series));
}

namespace detail {

inline std::vector<ParsedRow> parse_rows(std::string_view contents, Resolution resolution) {
  const std::string_view expected_header =
      resolution == Resolution::kHourly ? "timestamp,u,v,r,t" : "date,u,v,r,t";
  std::vector<ParsedRow> rows;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  bool header_seen = false;
  while (pos <= contents.size()) {
    auto end = contents.find('\n', pos);
    if (end == std::string_view::npos) end = contents.size();
    const std::string_view line = text::trim_eol(contents.substr(pos, end - pos));
    pos = end + 1;
    ++line_no;
    if (line.empty()) {
      if (end == contents.size()) break;
      continue;
    }
    if (!header_seen) {
      if (line != expected_header) {
        throw ParseError("line " + std::to_string(line_no) + ": expected header '" +
                         std::string(expected_header) + "'");
      }
      header_seen = true;
      continue;
    }
    const auto fields = text::split(line, ',');
    if (fields.size() != 1 + kFeatureCount) {
      throw ParseError("line " + std::to_string(line_no) + ": expected 5 fields, got " +
                       std::to_string(fields.size()));
    }
    ParsedRow row{0, {}, line_no};
    try {
      if (resolution == Resolution::kHourly) {
        const std::string_view ts = fields[0];
        if (ts.size() != 19 || ts[10] != 'T' || ts.substr(13) != ":00:00") {
          throw ParseError("timestamp must be YYYY-MM-DDTHH:00:00");
        }
        const Date date = Date::parse(ts.substr(0, 10));
        int hour = -1;
        const auto hs = ts.substr(11, 2);
        const auto [p, ec] = std::from_chars(hs.data(), hs.data() + 2, hour);
        if (ec != std::errc{} || p != hs.data() + 2 || hour < 0 || hour > 23) {
          throw ParseError("bad hour");
        }
        row.key = date.serial() * 24 + hour;
      } else {
        row.key = Date::parse(fields[0]).serial();
      }
    } catch (const Error& e) {
      throw ParseError("line " + std::to_string(line_no) + ": " + e.what());
    }
    for (std::size_t f = 0; f < kFeatureCount; ++f) {
      if (!text::parse_double(fields[f + 1], row.values[f]) || !std::isfinite(row.values[f])) {
        throw ParseError("line " + std::to_string(line_no) + ": bad value in column '" +
                         kFeatureNames[f] + "'");
      }
    }
    if (row.values.r < 0.0) {
      throw ValidationError("line " + std::to_string(line_no) + ": negative radiation " +
                            text::format_double(row.values.r));
    }
    rows.push_back(row);
  }
  if (!header_seen) throw ParseError("empty file");
  std::stable_sort(rows.begin(), rows.end(),
                   [](const ParsedRow& a, const ParsedRow& b) { return a.key < b.key; });
  return rows;
}

inline long long floor_div(long long a, long long b) { return a >= 0 ? a / b : -((-a + b - 1) / b); }

inline Date date_from_serial(long long serial) {
  return Date(std::chrono::sys_days{std::chrono::days{serial}});
}

}  // namespace detail

inline HourlySeries parse_hourly_csv(std::string_view contents) {
  const auto rows = detail::parse_rows(contents, Resolution::kHourly);
  if (rows.empty()) return HourlySeries{};
  const auto hour_of = [](long long key) { return key - detail::floor_div(key, 24) * 24; };
  if (hour_of(rows.front().key) != 0) {
    throw ContinuityError("hourly series must start at hour 00 (line " +
                          std::to_string(rows.front().line) + ")");
  }
  std::vector<HighResDay> days;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (i > 0 && rows[i].key != rows[i - 1].key + 1) {
      throw ContinuityError("gap or duplicate at line " + std::to_string(rows[i].line));
    }
    const long long serial_day = detail::floor_div(rows[i].key, 24);
    const auto hour = static_cast<std::size_t>(hour_of(rows[i].key));
    if (hour == 0) days.push_back(HighResDay{detail::date_from_serial(serial_day), {}});
    days.back().hours[hour] = rows[i].values;
  }
  if (hour_of(rows.back().key) != 23) {
    throw ContinuityError("hourly series ends mid-day (line " + std::to_string(rows.back().line) + ")");
  }
  return HourlySeries(std::move(days));
}

inline DailySeries parse_daily_csv(std::string_view contents) {
  const auto rows = detail::parse_rows(contents, Resolution::kDaily);
  std::vector<LowResDay> days;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (i > 0 && rows[i].key != rows[i - 1].key + 1) {
      throw ContinuityError("gap or duplicate at line " + std::to_string(rows[i].line) + " (" +
                            detail::date_from_serial(rows[i - 1].key).to_string() + " -> " +
                            detail::date_from_serial(rows[i].key).to_string() + ")");
    }
    days.push_back(LowResDay{detail::date_from_serial(rows[i].key), rows[i].values});
  }
  return DailySeries(std::move(days));
}

inline HourlySeries ingest_hourly(const std::string& path) {
  return parse_hourly_csv(text::read_file(path));
}

inline DailySeries ingest_daily(const std::string& path) {
  return parse_daily_csv(text::read_file(path));
}

// ---------------------------------------------------------------------------
// Normalization

/**
 * @brief Per-feature mean and standard deviation.
 */
struct NormStats {
  std::array<double, kFeatureCount> mean{};
  std::array<double, kFeatureCount> std{1.0, 1.0, 1.0, 1.0};

  void validate() const {
    for (std::size_t f = 0; f < kFeatureCount; ++f) {
      if (!(std[f] > 0.0) || !std::isfinite(std[f]) || !std::isfinite(mean[f])) {
        throw ConfigError(std::string("normalization std for '") + kFeatureNames[f] +
                          "' must be positive and finite");
      }
    }
  }

  double normalize(std::size_t f, double x) const { return (x - mean[f]) / std[f]; }
  double denormalize(std::size_t f, double z) const { return z * std[f] + mean[f]; }

  FeatureVector normalize(const FeatureVector& x) const {
    FeatureVector out;
    for (std::size_t f = 0; f < kFeatureCount; ++f) out[f] = normalize(f, x[f]);
    return out;
  }
  FeatureVector denormalize(const FeatureVector& z) const {
    FeatureVector out;
    for (std::size_t f = 0; f < kFeatureCount; ++f) out[f] = denormalize(f, z[f]);
    return out;
  }

  nlohmann::json to_json() const {
    nlohmann::json j = nlohmann::json::object();
    for (std::size_t f = 0; f < kFeatureCount; ++f) {
      j[kFeatureNames[f]] = {{"mean", mean[f]}, {"std", std[f]}};
    }
    return j;
  }

  static NormStats from_json(const nlohmann::json& j) {
    NormStats s;
    try {
      for (std::size_t f = 0; f < kFeatureCount; ++f) {
        s.mean[f] = j.at(kFeatureNames[f]).at("mean").get<double>();
        s.std[f] = j.at(kFeatureNames[f]).at("std").get<double>();
      }
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("norm stats: ") + e.what());
    }
    s.validate();
    return s;
  }

  friend bool operator==(const NormStats&, const NormStats&) = default;
};

/// Statistics of the hourly values of all `segments` (population standard deviation).
inline NormStats compute_norm_stats(const std::vector<HourlySeries>& segments) {
  std::size_t days = 0;
  for (const auto& seg : segments) days += seg.size();
  if (days == 0) throw InsufficientDataError("cannot compute normalization of an empty series");
  NormStats s;
  const double n = static_cast<double>(days * kHoursPerDay);
  for (std::size_t f = 0; f < kFeatureCount; ++f) {
    double sum = 0.0;
    for (const auto& seg : segments)
      for (const auto& d : seg)
        for (const auto& h : d.hours) sum += h[f];
    const double mean = sum / n;
    double sq = 0.0;
    for (const auto& seg : segments)
      for (const auto& d : seg)
        for (const auto& h : d.hours) sq += (h[f] - mean) * (h[f] - mean);
    s.mean[f] = mean;
    s.std[f] = std::sqrt(sq / n);
  }
  s.validate();
  return s;
}

inline NormStats compute_norm_stats(const HourlySeries& series) {
  return compute_norm_stats(std::vector<HourlySeries>{series});
}

inline HighResDay normalize(const HighResDay& d, const NormStats& s) {
  HighResDay out{d.date, {}};
  for (std::size_t h = 0; h < kHoursPerDay; ++h) out.hours[h] = s.normalize(d.hours[h]);
  return out;
}
inline LowResDay normalize(const LowResDay& d, const NormStats& s) { return {d.date, s.normalize(d.mean)}; }
inline HighResDay denormalize(const HighResDay& d, const NormStats& s) {
  HighResDay out{d.date, {}};
  for (std::size_t h = 0; h < kHoursPerDay; ++h) out.hours[h] = s.denormalize(d.hours[h]);
  return out;
}
inline LowResDay denormalize(const LowResDay& d, const NormStats& s) {
  return {d.date, s.denormalize(d.mean)};
}

template <class Day>
DaySeries<Day> normalize(const DaySeries<Day>& series, const NormStats& stats) {
  stats.validate();
  std::vector<Day> out;
  out.reserve(series.size());
  for (const auto& d : series) out.push_back(normalize(d, stats));
  return DaySeries<Day>(std::move(out));
}

template <class Day>
DaySeries<Day> denormalize(const DaySeries<Day>& series, const NormStats& stats) {
  stats.validate();
  std::vector<Day> out;
  out.reserve(series.size());
  for (const auto& d : series) out.push_back(denormalize(d, stats));
  return DaySeries<Day>(std::move(out));
}

// ---------------------------------------------------------------------------
// Splitting

/**
 * @brief Whole-day train/validation split.
 *
 * The validation days form one contiguous block at a seeded random offset;
 * the training days are the (up to two) contiguous segments around it.
 * Day pairs are only ever formed inside a segment, so no (previous, current)
 * pair straddles the boundary.
 */
struct DaySplit {
  std::vector<HourlySeries> train;
  std::vector<HourlySeries> validation;

  static std::size_t day_count(const std::vector<HourlySeries>& segments) {
    std::size_t n = 0;
    for (const auto& s : segments) n += s.size();
    return n;
  }
  std::size_t train_days() const { return day_count(train); }
  std::size_t validation_days() const { return day_count(validation); }
};

/// Consecutive (previous day, current day) pairs inside each segment.
inline std::vector<std::pair<HighResDay, HighResDay>> consecutive_pairs(
    const std::vector<HourlySeries>& segments) {
  std::vector<std::pair<HighResDay, HighResDay>> out;
  for (const auto& s : segments)
    for (std::size_t i = 1; i < s.size(); ++i) out.emplace_back(s[i - 1], s[i]);
  return out;
}

inline std::vector<std::pair<HighResDay, HighResDay>> consecutive_pairs(const HourlySeries& s) {
  return consecutive_pairs(std::vector<HourlySeries>{s});
}

inline DaySplit split_days(const HourlySeries& series, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw ConfigError("train_fraction must lie strictly between 0 and 1");
  }
  const std::size_t n = series.size();
  if (n < 3) throw InsufficientDataError("need at least 3 days to split, got " + std::to_string(n));
  auto train_n = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(n)));
  train_n = std::clamp<std::size_t>(train_n, 1, n - 1);
  const std::size_t val_n = n - train_n;

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, train_n);
  const std::size_t offset = pick(rng);

  DaySplit split;
  if (offset > 0) split.train.push_back(series.slice(0, offset));
  split.validation.push_back(series.slice(offset, val_n));
  if (offset + val_n < n) split.train.push_back(series.slice(offset + val_n, n - offset - val_n));
  return split;
}

}  // namespace srdm

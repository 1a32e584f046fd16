#pragma once

/**
 * @file analytics.hpp
 * @brief Quantification layer: annual utilization hours, Theil-Sen slopes,
 *        Mann-Kendall significance, ensemble interval widths, daily-mean
 *        MAE, day-boundary continuity, resolution bias and parameter sweeps.
 */

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "srdm/data_model.hpp"
#include "srdm/generator.hpp"
#include "srdm/power.hpp"

namespace srdm {

// ---------------------------------------------------------------------------
// Trend statistics

enum class TrendClass { kIncreasing, kDecreasing, kNoTrend };

inline std::string trend_name(TrendClass c) {
  switch (c) {
    case TrendClass::kIncreasing: return "increasing";
    case TrendClass::kDecreasing: return "decreasing";
    default: return "no trend";
  }
}

struct LinearTrend {
  double slope = 0.0;
  double intercept = 0.0;
};

/// Median with the mean of the middle two for even counts; sorts `v`.
inline double median_of(std::vector<double>& v) {
  if (v.empty()) throw DegenerateInputError("median of an empty set");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

/**
 * @brief Median of all pairwise slopes; intercept is the median of
 *        y - slope * x. Pairs with equal x are skipped.
 */
inline LinearTrend theil_sen(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw DimensionError("theil_sen: x and y differ in length");
  if (x.size() < 2) throw InsufficientDataError("theil_sen needs at least 2 points");
  std::vector<double> slopes;
  slopes.reserve(x.size() * (x.size() - 1) / 2);
  for (std::size_t i = 0; i < x.size(); ++i) {
    for (std::size_t j = i + 1; j < x.size(); ++j) {
      if (x[j] == x[i]) continue;
      slopes.push_back((y[j] - y[i]) / (x[j] - x[i]));
    }
  }
  if (slopes.empty()) throw DegenerateInputError("theil_sen: all x values are equal");
  LinearTrend out;
  out.slope = median_of(slopes);
  std::vector<double> residual(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) residual[i] = y[i] - out.slope * x[i];
  out.intercept = median_of(residual);
  return out;
}

struct MannKendallResult {
  long long s = 0;
  double variance = 0.0;
  double z = 0.0;
  double p_value = 1.0;
  TrendClass classification = TrendClass::kNoTrend;
};

/// Two-sided Mann-Kendall test with tie correction and continuity correction.
inline MannKendallResult mann_kendall(std::span<const double> y, double alpha = 0.05) {
  const std::size_t n = y.size();
  if (n < 4) throw InsufficientDataError("mann_kendall needs at least 4 values, got " + std::to_string(n));
  MannKendallResult r;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) r.s += (y[j] > y[i]) - (y[j] < y[i]);
  }
  std::map<double, std::size_t> counts;
  for (double v : y) ++counts[v];
  const double nd = static_cast<double>(n);
  double var = nd * (nd - 1.0) * (2.0 * nd + 5.0);
  for (const auto& [value, t] : counts) {
    const double td = static_cast<double>(t);
    var -= td * (td - 1.0) * (2.0 * td + 5.0);
  }
  r.variance = var / 18.0;
  if (r.s > 0) {
    r.z = (static_cast<double>(r.s) - 1.0) / std::sqrt(r.variance);
  } else if (r.s < 0) {
    r.z = (static_cast<double>(r.s) + 1.0) / std::sqrt(r.variance);
  }
  r.p_value = r.variance > 0.0 ? std::erfc(std::abs(r.z) / std::sqrt(2.0)) : 1.0;
  if (r.p_value < alpha) r.classification = r.s > 0 ? TrendClass::kIncreasing : TrendClass::kDecreasing;
  return r;
}

struct TrendResult {
  double slope = 0.0;      // units per year
  double intercept = 0.0;  // value at the first year
  double p_value = 1.0;
  TrendClass classification = TrendClass::kNoTrend;
  double alpha = 0.05;
};

/// Theil-Sen with x in years since the first year, plus Mann-Kendall.
inline TrendResult trend_analysis(std::span<const int> years, std::span<const double> values, double alpha = 0.05) {
  std::vector<double> x(years.size());
  for (std::size_t i = 0; i < years.size(); ++i) x[i] = static_cast<double>(years[i] - years.front());
  const auto line = theil_sen(x, values);
  const auto mk = mann_kendall(values, alpha);
  return {line.slope, line.intercept, mk.p_value, mk.classification, alpha};
}

inline nlohmann::json to_json(const TrendResult& t) {
  return {{"trend", trend_name(t.classification)}, {"slope", t.slope}, {"intercept", t.intercept},
          {"p_value", t.p_value}, {"alpha", t.alpha}};
}

// ---------------------------------------------------------------------------
// Annual utilization hours

/// Sum of hourly per-unit power over `year`; the year must be fully covered.
inline double annual_utilization_hours(const PowerSeries& p, int year) {
  if (p.resolution != Resolution::kHourly) throw ConfigError("annual utilization hours need hourly power");
  const Date first(year, 1, 1);
  const Date last(year, 12, 31);
  const auto offset = p.start.days_until(first);
  if (offset < 0 || p.days() == 0 || p.start.plus_days(static_cast<long long>(p.days()) - 1) < last) {
    throw CoverageError("power series does not cover all of " + std::to_string(year));
  }
  const std::size_t begin = static_cast<std::size_t>(offset) * kHoursPerDay;
  const std::size_t end = begin + static_cast<std::size_t>(days_in_year(year)) * kHoursPerDay;
  double sum = 0.0;
  for (std::size_t i = begin; i < end; ++i) sum += p.values[i];
  return sum;
}

/// Calendar years fully covered by `p`.
inline std::vector<int> full_years(const PowerSeries& p) {
  std::vector<int> out;
  if (p.days() == 0) return out;
  const Date last = p.start.plus_days(static_cast<long long>(p.days()) - 1);
  for (int y = p.start.year(); y <= last.year(); ++y) {
    if (!(Date(y, 1, 1) < p.start) && !(last < Date(y, 12, 31))) out.push_back(y);
  }
  return out;
}

struct AUHRecord {
  int year = 0;
  std::size_t member = 0;
  Technology technology = Technology::kWind;
  double auh = 0.0;
};

/// One record per member and fully covered year.
inline std::vector<AUHRecord> auh_records(std::span<const PowerSeries> members) {
  std::vector<AUHRecord> out;
  for (std::size_t m = 0; m < members.size(); ++m) {
    for (int y : full_years(members[m])) {
      out.push_back({y, m, members[m].technology, annual_utilization_hours(members[m], y)});
    }
  }
  return out;
}

/// Cross-member mean AUH per year, ordered by year.
inline std::map<int, double> mean_auh_by_year(std::span<const AUHRecord> records) {
  std::map<int, std::pair<double, std::size_t>> acc;
  for (const auto& r : records) {
    acc[r.year].first += r.auh;
    ++acc[r.year].second;
  }
  std::map<int, double> out;
  for (const auto& [y, s] : acc) out[y] = s.first / static_cast<double>(s.second);
  return out;
}

struct IntervalWidth {
  double width = 0.0;
  bool degenerate = false;  // fewer than two members: width reported as 0
};

/// Mean over years of the cross-member AUH range (max - min).
inline IntervalWidth ensemble_interval_width(std::span<const AUHRecord> records) {
  if (records.empty()) throw InsufficientDataError("no AUH records");
  std::map<int, std::pair<double, double>> range;
  std::map<int, std::size_t> members;
  for (const auto& r : records) {
    auto [it, inserted] = range.try_emplace(r.year, r.auh, r.auh);
    if (!inserted) {
      it->second.first = std::min(it->second.first, r.auh);
      it->second.second = std::max(it->second.second, r.auh);
    }
    ++members[r.year];
  }
  IntervalWidth out;
  for (const auto& [y, n] : members) out.degenerate = out.degenerate || n < 2;
  double sum = 0.0;
  for (const auto& [y, mm] : range) sum += mm.second - mm.first;
  out.width = sum / static_cast<double>(range.size());
  return out;
}

// ---------------------------------------------------------------------------
// Generation quality

/// Mean |daily_mean(generated) - lowres| per feature over days and members.
inline FeatureVector daily_mean_mae(const ScenarioEnsemble& ensemble, const DailySeries& lowres) {
  if (ensemble.members.empty()) throw InsufficientDataError("ensemble has no members");
  FeatureVector sum{};
  std::size_t count = 0;
  for (const auto& m : ensemble.members) {
    if (m.size() != lowres.size() || m.first_date() != lowres.first_date()) {
      throw ContinuityError("ensemble and daily series cover different dates");
    }
    for (std::size_t d = 0; d < m.size(); ++d) {
      const auto mean = daily_mean(m[d]).mean;
      for (std::size_t f = 0; f < kFeatureCount; ++f) sum[f] += std::abs(mean[f] - lowres[d].mean[f]);
      ++count;
    }
  }
  for (std::size_t f = 0; f < kFeatureCount; ++f) sum[f] /= static_cast<double>(count);
  return sum;
}

struct ContinuityStats {
  FeatureVector boundary{};  // mean |x(d+1, 0) - x(d, 23)|
  FeatureVector within{};    // mean |x(h+1) - x(h)| inside a day
  FeatureVector ratio() const {
    FeatureVector r{};
    for (std::size_t f = 0; f < kFeatureCount; ++f) r[f] = within[f] > 0.0 ? boundary[f] / within[f] : 0.0;
    return r;
  }
};

/// Day-boundary versus within-day step sizes, pooled over all members.
inline ContinuityStats continuity_stats(std::span<const HourlySeries> members) {
  ContinuityStats out;
  std::size_t nb = 0, nw = 0;
  for (const auto& s : members) {
    for (std::size_t d = 0; d < s.size(); ++d) {
      for (std::size_t h = 0; h + 1 < kHoursPerDay; ++h) {
        for (std::size_t f = 0; f < kFeatureCount; ++f) out.within[f] += std::abs(s[d].hours[h + 1][f] - s[d].hours[h][f]);
        ++nw;
      }
      if (d > 0) {
        for (std::size_t f = 0; f < kFeatureCount; ++f) {
          out.boundary[f] += std::abs(s[d].hours[0][f] - s[d - 1].hours[kHoursPerDay - 1][f]);
        }
        ++nb;
      }
    }
  }
  if (nb == 0) throw InsufficientDataError("continuity needs at least two consecutive days");
  for (std::size_t f = 0; f < kFeatureCount; ++f) {
    out.boundary[f] /= static_cast<double>(nb);
    out.within[f] /= static_cast<double>(nw);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Resolution bias

struct BiasYear {
  int year = 0;
  double low_auh = 0.0;   // daily per-unit power x 24 h, summed over the year
  double high_auh = 0.0;  // hourly per-unit power summed, averaged over members
  double deviation_pct = 0.0;
};

struct BiasReport {
  Technology technology = Technology::kWind;
  std::vector<BiasYear> years;
};

namespace analytics_detail {

/// Per-year sums over the days present (partial years allowed).
inline std::map<int, double> yearly_sums(const PowerSeries& p, double scale) {
  std::map<int, double> out;
  for (std::size_t i = 0; i < p.values.size(); ++i) out[p.date_of(i).year()] += scale * p.values[i];
  return out;
}

}  // namespace analytics_detail

/**
 * @brief Low- versus high-resolution AUH per calendar year from converted
 *        power: 100 * (low - high) / high, where low is daily per-unit power
 *        x 24 h and high is the member mean of summed hourly power. Years are
 *        taken over the days present, so short runs report partial-year totals.
 */
inline BiasReport resolution_bias(const PowerSeries& low, std::span<const PowerSeries> high) {
  if (high.empty()) throw InsufficientDataError("resolution bias needs at least one member");
  if (low.resolution != Resolution::kDaily) throw ConfigError("low-resolution power must be daily");
  for (const auto& m : high) {
    if (m.resolution != Resolution::kHourly || m.technology != low.technology) {
      throw ConfigError("high-resolution power must be hourly and of the same technology");
    }
    if (m.days() != low.days() || m.start != low.start) {
      throw ContinuityError("low- and high-resolution power cover different dates");
    }
  }
  const auto lows = analytics_detail::yearly_sums(low, static_cast<double>(kHoursPerDay));
  std::map<int, double> highs;
  for (const auto& m : high) {
    for (const auto& [y, v] : analytics_detail::yearly_sums(m, 1.0)) highs[y] += v;
  }
  BiasReport report{low.technology, {}};
  for (const auto& [y, lo] : lows) {
    const double hi = highs[y] / static_cast<double>(high.size());
    if (!(hi > 0.0)) {
      throw DegenerateInputError("high-resolution AUH is zero in " + std::to_string(y) + "; deviation undefined");
    }
    report.years.push_back({y, lo, hi, 100.0 * (lo - hi) / hi});
  }
  return report;
}

/// Converts both resolutions with the given specs, then compares them.
inline BiasReport resolution_bias(const DailySeries& lowres, std::span<const HourlySeries> members, Technology tech,
                                  const WindTurbineSpec& wind, const PVModuleSpec& pv) {
  for (const auto& m : members) {
    if (m.size() != lowres.size() || m.first_date() != lowres.first_date()) {
      throw ContinuityError("ensemble and daily series cover different dates");
    }
  }
  std::vector<PowerSeries> high;
  for (const auto& m : members) high.push_back(convert_series(m, tech, wind, pv));
  return resolution_bias(convert_series(lowres, tech, wind, pv), high);
}

inline BiasReport resolution_bias(const DailySeries& lowres, const ScenarioEnsemble& ensemble, Technology tech,
                                  const WindTurbineSpec& wind, const PVModuleSpec& pv) {
  return resolution_bias(lowres, std::span<const HourlySeries>(ensemble.members), tech, wind, pv);
}

inline std::string bias_csv_header() { return "year,tech,low_auh,high_auh,deviation_pct\n"; }

inline std::string to_csv_rows(const BiasReport& r) {
  std::string out;
  for (const auto& y : r.years) {
    out += std::to_string(y.year) + ',' + technology_name(r.technology) + ',' + text::format_double(y.low_auh) + ',' +
           text::format_double(y.high_auh) + ',' + text::format_double(y.deviation_pct) + '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// Parameter sweep

enum class SweepParameter { kCutIn, kTempCoeff };

inline SweepParameter parse_sweep_parameter(std::string_view s) {
  if (s == "cut_in") return SweepParameter::kCutIn;
  if (s == "temp_coeff") return SweepParameter::kTempCoeff;
  throw ConfigError("unknown sweep parameter '" + std::string(s) + "' (expected cut_in or temp_coeff)");
}

inline std::string sweep_parameter_name(SweepParameter p) { return p == SweepParameter::kCutIn ? "cut_in" : "temp_coeff"; }

struct SweepRow {
  double value = 0.0;
  std::map<int, double> auh;  // member-mean AUH per year
  LinearTrend trend;           // Theil-Sen over the yearly means, x in years since the first
  std::optional<MannKendallResult> significance;  // present when there are >= 4 years
};

/**
 * @brief Re-runs conversion, AUH and the trend fit for every parameter
 *        value. The technology follows from the parameter.
 */
inline std::vector<SweepRow> parameter_sweep(std::span<const HourlySeries> members, SweepParameter parameter,
                                             std::span<const double> values, const WindTurbineSpec& base_wind,
                                             const PVModuleSpec& base_pv, double alpha = 0.05) {
  if (members.empty()) throw InsufficientDataError("parameter sweep needs at least one member");
  std::vector<SweepRow> rows;
  for (double value : values) {
    std::vector<PowerSeries> power;
    if (parameter == SweepParameter::kCutIn) {
      WindTurbineSpec spec = base_wind;
      spec.cut_in = value;
      spec.validate();
      for (const auto& m : members) power.push_back(convert_series(m, spec));
    } else {
      PVModuleSpec spec = base_pv;
      spec.temp_coeff = value;
      spec.validate();
      for (const auto& m : members) power.push_back(convert_series(m, spec));
    }
    const auto records = auh_records(power);
    SweepRow row;
    row.value = value;
    row.auh = mean_auh_by_year(records);
    if (row.auh.size() < 2) throw InsufficientDataError("parameter sweep needs at least 2 full years");
    std::vector<double> x, y;
    for (const auto& [year, v] : row.auh) {
      x.push_back(static_cast<double>(year - row.auh.begin()->first));
      y.push_back(v);
    }
    row.trend = theil_sen(x, y);
    if (y.size() >= 4) row.significance = mann_kendall(y, alpha);
    rows.push_back(std::move(row));
  }
  return rows;
}

inline std::string sweep_csv(SweepParameter parameter, const std::vector<SweepRow>& rows) {
  std::string out = "parameter,value,slope,intercept,p_value\n";
  for (const auto& r : rows) {
    out += sweep_parameter_name(parameter) + ',' + text::format_double(r.value) + ',' + text::format_double(r.trend.slope) +
           ',' + text::format_double(r.trend.intercept) + ',' +
           (r.significance ? text::format_double(r.significance->p_value) : std::string()) + '\n';
  }
  return out;
}

/// Parses "start:step:stop" into an inclusive grid (tolerant to rounding at the end).
inline std::vector<double> parse_range(std::string_view spec) {
  const auto parts = text::split(spec, ':');
  double a = 0.0, step = 0.0, b = 0.0;
  if (parts.size() != 3 || !text::parse_double(parts[0], a) || !text::parse_double(parts[1], step) ||
      !text::parse_double(parts[2], b)) {
    throw ConfigError("range must look like start:step:stop, got '" + std::string(spec) + "'");
  }
  if (!(step > 0.0) || b < a) throw ConfigError("range needs step > 0 and stop >= start");
  std::vector<double> out;
  const auto n = static_cast<std::size_t>(std::floor((b - a) / step + 1e-9));
  for (std::size_t i = 0; i <= n; ++i) out.push_back(a + static_cast<double>(i) * step);
  return out;
}

// ---------------------------------------------------------------------------
// Feature trends

inline constexpr std::array<const char*, kFeatureCount> kTrendFeatureNames{"|u|", "|v|", "r", "t"};

struct FeatureTrend {
  std::string feature;
  TrendResult trend;
  std::vector<int> years;
  std::vector<double> member_mean;                 // per year, mean over members
  std::vector<std::vector<double>> distribution;  // per year, one annual mean per member
};

/**
 * @brief Annual means of |u|, |v|, r and t per member, then Theil-Sen and
 *        Mann-Kendall on the member-mean yearly series. Years are those fully
 *        covered by the ensemble.
 */
inline std::vector<FeatureTrend> feature_trends(std::span<const HourlySeries> members, double alpha = 0.05) {
  if (members.empty()) throw InsufficientDataError("feature trends need at least one member");
  const auto& first = members.front();
  for (const auto& m : members) {
    if (m.size() != first.size() || m.first_date() != first.first_date()) {
      throw ContinuityError("ensemble members span different dates");
    }
  }
  std::vector<int> years;
  for (int y = first.first_date().year(); y <= first.last_date().year(); ++y) {
    if (!(Date(y, 1, 1) < first.first_date()) && !(first.last_date() < Date(y, 12, 31))) years.push_back(y);
  }
  if (years.size() < 4) {
    throw InsufficientDataError("feature trends need at least 4 full years, got " + std::to_string(years.size()));
  }
  std::vector<FeatureTrend> out(kFeatureCount);
  for (std::size_t f = 0; f < kFeatureCount; ++f) {
    out[f].feature = kTrendFeatureNames[f];
    out[f].years = years;
    out[f].distribution.assign(years.size(), std::vector<double>(members.size(), 0.0));
  }
  for (std::size_t m = 0; m < members.size(); ++m) {
    std::vector<FeatureVector> sums(years.size());
    std::vector<std::size_t> counts(years.size(), 0);
    for (const auto& day : members[m]) {
      const auto it = std::find(years.begin(), years.end(), day.date.year());
      if (it == years.end()) continue;
      const auto yi = static_cast<std::size_t>(it - years.begin());
      for (const auto& h : day.hours) {
        sums[yi].u += std::abs(h.u);
        sums[yi].v += std::abs(h.v);
        sums[yi].r += h.r;
        sums[yi].t += h.t;
      }
      counts[yi] += kHoursPerDay;
    }
    for (std::size_t yi = 0; yi < years.size(); ++yi) {
      for (std::size_t f = 0; f < kFeatureCount; ++f) {
        out[f].distribution[yi][m] = sums[yi][f] / static_cast<double>(counts[yi]);
      }
    }
  }
  for (auto& ft : out) {
    for (const auto& d : ft.distribution) {
      double s = 0.0;
      for (double v : d) s += v;
      ft.member_mean.push_back(s / static_cast<double>(d.size()));
    }
    ft.trend = trend_analysis(ft.years, ft.member_mean, alpha);
  }
  return out;
}

/// Trend report row: `{feature|tech, pathway, trend, slope, intercept, p_value, interval_width?}`.
inline nlohmann::json trend_row(const std::string& key, const std::string& name, const std::string& pathway,
                                const TrendResult& t, std::optional<double> interval_width = std::nullopt) {
  nlohmann::json j = to_json(t);
  j[key] = name;
  j["pathway"] = pathway;
  if (interval_width) j["interval_width"] = *interval_width;
  return j;
}

}  // namespace srdm

#pragma once

// Synthetic hourly weather with known structure: AR(1) wind components,
// a clipped-sinusoid radiation bump driven by day length, and diurnal plus
// seasonal temperature. Used as a desk-scale stand-in for reanalysis data.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <utility>
#include <vector>

#include "srdm/data_model.hpp"

namespace srdm {

struct SynthConfig {
  std::size_t days = 250;
  Date start{2024, 1, 1};
  std::uint64_t seed = 7;

  /// Innovation amplitudes of the stochastic parts, ordered (u, v, r, t).
  /// u/v/t are hourly innovation standard deviations in physical units; r is
  /// the hourly innovation of the cloudiness index (dimensionless).
  std::array<double, kFeatureCount> noise{0.2, 0.17, 0.25, 0.2};

  /// Hourly AR(1) coefficient of the wind anomalies.
  double ar_coefficient = 0.97;

  double wind_u_mean = 3.0;
  double wind_v_mean = 1.0;
  double wind_diurnal = 2.5;  // amplitude of the afternoon wind maximum (m/s)

  double latitude_deg = 41.5;
  double radiation_peak = 950.0;  // clear-sky noon radiation with the sun overhead (W/m^2)

  double temperature_mean = 9.0;
  double seasonal_amplitude = 14.0;
  double diurnal_temperature = 6.0;
  double temperature_trend_per_year = 0.0;

  void validate() const {
    if (!(ar_coefficient >= 0.0 && ar_coefficient < 1.0)) {
      throw ConfigError("ar_coefficient must lie in [0, 1)");
    }
    for (double a : noise) {
      if (!(a >= 0.0) || !std::isfinite(a)) throw ConfigError("noise amplitudes must be >= 0");
    }
    if (seasonal_amplitude < 0.0 || diurnal_temperature < 0.0 || wind_diurnal < 0.0 ||
        radiation_peak < 0.0) {
      throw ConfigError("amplitudes must be >= 0");
    }
    if (!(std::abs(latitude_deg) < 66.0)) throw ConfigError("latitude_deg must lie in (-66, 66)");
  }
};

namespace synth_detail {

inline constexpr double kPi = std::numbers::pi;

/// Hours of daylight from solar declination and latitude.
inline double day_length_hours(double latitude_deg, int day_of_year) {
  const double decl = 23.44 * kPi / 180.0 * std::sin(2.0 * kPi * (day_of_year - 81) / 365.0);
  const double phi = latitude_deg * kPi / 180.0;
  const double x = std::clamp(-std::tan(phi) * std::tan(decl), -1.0, 1.0);
  return 2.0 * std::acos(x) * 180.0 / kPi / 15.0;
}

inline double noon_elevation_factor(double latitude_deg, int day_of_year) {
  const double decl = 23.44 * kPi / 180.0 * std::sin(2.0 * kPi * (day_of_year - 81) / 365.0);
  const double phi = latitude_deg * kPi / 180.0;
  return std::max(0.0, std::cos(phi - decl));
}

}  // namespace synth_detail

/**
 * @brief Normalized diurnal radiation shape for one day: zero outside
 *        daylight, a half-sine bump evaluated at hour centres inside it.
 *        Peak value is 1.
 */
inline std::array<double, kHoursPerDay> diurnal_radiation_shape(double latitude_deg, int day_of_year) {
  using synth_detail::kPi;
  const double length = synth_detail::day_length_hours(latitude_deg, day_of_year);
  const double sunrise = 12.0 - 0.5 * length;
  std::array<double, kHoursPerDay> shape{};
  for (std::size_t h = 0; h < kHoursPerDay; ++h) {
    const double phase = (static_cast<double>(h) + 0.5 - sunrise) / length;
    shape[h] = (phase > 0.0 && phase < 1.0) ? std::sin(kPi * phase) : 0.0;
  }
  return shape;
}

/// Hourly synthetic series and its exact daily-mean companion.
inline std::pair<HourlySeries, DailySeries> synth_generate(const SynthConfig& cfg) {
  using synth_detail::kPi;
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  const double phi = cfg.ar_coefficient;
  const double stationary = 1.0 / std::sqrt(1.0 - phi * phi);
  // Slow processes for cloudiness and temperature anomaly.
  constexpr double kSlow = 0.97;
  const double slow_stationary = 1.0 / std::sqrt(1.0 - kSlow * kSlow);

  double au = cfg.noise[0] * stationary * normal(rng);
  double av = cfg.noise[1] * stationary * normal(rng);
  double cloud = cfg.noise[2] * slow_stationary * normal(rng);
  double at = cfg.noise[3] * slow_stationary * normal(rng);

  std::vector<HighResDay> days;
  days.reserve(cfg.days);
  Date date = cfg.start;
  for (std::size_t d = 0; d < cfg.days; ++d, date = date.next()) {
    const int doy = date.day_of_year();
    const auto shape = diurnal_radiation_shape(cfg.latitude_deg, doy);
    const double peak = cfg.radiation_peak * synth_detail::noon_elevation_factor(cfg.latitude_deg, doy);
    const double season = std::sin(2.0 * kPi * (doy - 110) / 365.25);
    const double years = static_cast<double>(cfg.start.days_until(date)) / 365.25;

    HighResDay day{date, {}};
    for (std::size_t h = 0; h < kHoursPerDay; ++h) {
      au = phi * au + cfg.noise[0] * normal(rng);
      av = phi * av + cfg.noise[1] * normal(rng);
      cloud = kSlow * cloud + cfg.noise[2] * normal(rng);
      at = kSlow * at + cfg.noise[3] * normal(rng);

      const double hour = static_cast<double>(h);
      const double diurnal_wind = std::sin(2.0 * kPi * (hour - 8.0) / 24.0);
      auto& fv = day.hours[h];
      fv.u = cfg.wind_u_mean + cfg.wind_diurnal * diurnal_wind + au;
      fv.v = cfg.wind_v_mean + 0.75 * cfg.wind_diurnal * diurnal_wind + av;
      const double clearness = 0.75 + 0.2 * std::tanh(cloud);
      fv.r = shape[h] > 0.0 ? peak * clearness * shape[h] : 0.0;
      fv.t = cfg.temperature_mean + cfg.seasonal_amplitude * season +
             cfg.diurnal_temperature * std::sin(2.0 * kPi * (hour - 9.0) / 24.0) + at +
             cfg.temperature_trend_per_year * years;
    }
    days.push_back(day);
  }
  HourlySeries hourly(std::move(days));
  DailySeries daily = daily_mean(hourly);
  return {std::move(hourly), std::move(daily)};
}

}  // namespace srdm

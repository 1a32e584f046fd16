// Converts one synthetic week to wind and PV power at hourly and daily
// resolution and prints the resulting resolution bias. No training needed.

#include <cstdio>

#include "srdm/srdm.hpp"

int main() {
  srdm::SynthConfig cfg;
  cfg.days = 7;
  cfg.start = srdm::Date(2025, 6, 1);
  const auto [hourly, daily] = srdm::synth_generate(cfg);

  const srdm::WindTurbineSpec wind;
  const srdm::PVModuleSpec pv;
  std::printf("hub-height factor: %.4f\n", srdm::extrapolate_hub_height(1.0, wind));
  for (auto tech : {srdm::Technology::kWind, srdm::Technology::kPv}) {
    const auto report = srdm::resolution_bias(daily, std::span(&hourly, 1), tech, wind, pv);
    for (const auto& y : report.years) {
      std::printf("%-4s %d  low %.2f h  high %.2f h  deviation %+.2f%%\n", srdm::technology_name(tech).c_str(), y.year,
                  y.low_auh, y.high_auh, y.deviation_pct);
    }
  }
  return 0;
}

#include <gtest/gtest.h>

#include "oracle_values.hpp"
#include "srdm/power.hpp"
#include "srdm/synth.hpp"

using namespace srdm;

namespace {

HourlySeries constant_series(std::size_t days, const FeatureVector& f) {
  std::vector<HighResDay> out;
  Date d(2025, 1, 1);
  for (std::size_t i = 0; i < days; ++i, d = d.next()) {
    HighResDay day{d, {}};
    day.hours.fill(f);
    out.push_back(day);
  }
  return HourlySeries(std::move(out));
}

}  // namespace

TEST(WindSpeed, Magnitude) {
  EXPECT_DOUBLE_EQ(wind_speed_magnitude(3, 4), 5.0);
  EXPECT_DOUBLE_EQ(wind_speed_magnitude(0, 0), 0.0);
  EXPECT_DOUBLE_EQ(wind_speed_magnitude(-6, 8), 10.0);
}

TEST(HubHeight, LogLawExamples) {
  const WindTurbineSpec spec;
  EXPECT_NEAR(extrapolate_hub_height(10.0, spec), 10.0 * oracle::kHubFactor, 1e-12);
  EXPECT_NEAR(extrapolate_hub_height(10.0, spec), 13.643, 1e-3);
  EXPECT_EQ(extrapolate_hub_height(0.0, spec), 0.0);
  WindTurbineSpec same = spec;
  same.hub_height = same.reference_height;
  EXPECT_DOUBLE_EQ(extrapolate_hub_height(7.25, same), 7.25);
  WindTurbineSpec bad = spec;
  bad.reference_height = 0.01;
  EXPECT_THROW(extrapolate_hub_height(5.0, bad), ConfigError);
}

TEST(WindPower, Anchors) {
  const WindTurbineSpec spec;
  EXPECT_EQ(wind_power(2.0, spec), 0.0);
  EXPECT_EQ(wind_power(13.0, spec), 1.0);
  EXPECT_EQ(wind_power(20.0, spec), 1.0);
  EXPECT_EQ(wind_power(25.0, spec), 0.0);
  EXPECT_EQ(wind_power(30.0, spec), 0.0);
  EXPECT_NEAR(wind_power(10.0, spec), oracle::kWindP10, 1e-15);
  EXPECT_NEAR(wind_power(10.0, spec), 0.44839, 1e-5);
}

TEST(WindPower, MonotoneAndContinuous) {
  const WindTurbineSpec spec;
  double prev = 0.0;
  for (double s = 0.0; s < 25.0; s += 0.01) {
    const double p = wind_power(s, spec);
    EXPECT_GE(p, prev - 1e-15) << s;
    prev = p;
  }
  EXPECT_NEAR(wind_power(3.0 + 1e-9, spec), 0.0, 1e-9);
  EXPECT_NEAR(wind_power(13.0 - 1e-9, spec), 1.0, 1e-9);
}

TEST(WindPower, TableInterpolation) {
  WindTurbineSpec spec;
  spec.table = parse_power_curve("speed_ms,power_mw\n3,0\n8,3\n13,9\n");
  spec.validate();
  EXPECT_NEAR(wind_power(5.5, spec), 1.5 / 9.0, 1e-12);
  EXPECT_NEAR(wind_power(10.5, spec), 6.0 / 9.0, 1e-12);
  EXPECT_THROW(parse_power_curve("speed_ms,power_mw\n3,0\n3,1\n"), ValidationError);
  EXPECT_THROW(parse_power_curve("speed,power\n3,0\n"), ParseError);
  WindTurbineSpec over = spec;
  over.table = std::vector<CurvePoint>{{3, 0}, {10, 12}};
  EXPECT_THROW(over.validate(), ValidationError);
}

TEST(WindPower, JensenDirectionOnMixtureGrid) {
  const WindTurbineSpec spec;
  for (double a = 0.0; a <= 13.0; a += 0.25) {
    for (double b = a; b <= 13.0; b += 0.25) {
      for (double w = 0.1; w < 1.0; w += 0.1) {
        const double mean_of_power = w * wind_power(a, spec) + (1.0 - w) * wind_power(b, spec);
        const double power_of_mean = wind_power(w * a + (1.0 - w) * b, spec);
        EXPECT_GE(mean_of_power, power_of_mean - 1e-12) << a << " " << b << " " << w;
      }
    }
  }
}

TEST(PvPower, Examples) {
  const PVModuleSpec spec;
  EXPECT_EQ(pv_power(1000.0, 25.0, spec), 1.0);
  EXPECT_EQ(pv_power(0.0, -10.0, spec), 0.0);
  EXPECT_EQ(pv_power(0.0, 40.0, spec), 0.0);
  EXPECT_NEAR(pv_power(800.0, 45.0, spec), oracle::kPv800At45, 1e-12);
  EXPECT_NEAR(pv_power(800.0, 45.0, spec), 0.7552, 1e-9);
}

TEST(PvPower, LinearInIrradianceAndTemperatureSlope) {
  const PVModuleSpec spec;
  EXPECT_NEAR(pv_power(600.0, 30.0, spec), 2.0 * pv_power(300.0, 30.0, spec), 1e-15);
  const double h = 1e-3;
  const double slope = (pv_power(700.0, 30.0 + h, spec) - pv_power(700.0, 30.0 - h, spec)) / (2.0 * h);
  EXPECT_NEAR(slope, 0.7 * spec.temp_coeff, 1e-9);
  EXPECT_LE(slope, 0.0);
}

TEST(PvPower, ClampsAboveRated) {
  const PVModuleSpec spec;
  EXPECT_EQ(pv_power(1100.0, -10.0, spec), 1.0);
  PVModuleSpec bad;
  bad.temp_coeff = -0.01;
  EXPECT_THROW(bad.validate(), ValidationError);
}

TEST(ConvertSeries, Examples) {
  const WindTurbineSpec wind;
  const PVModuleSpec pv;
  const auto calm = convert_series(constant_series(2, {1.0, 1.0, 0.0, 5.0}), wind);
  EXPECT_EQ(calm.values.size(), 48u);
  for (double p : calm.values) EXPECT_EQ(p, 0.0);

  const auto stc = convert_series(constant_series(1, {0.0, 0.0, 1000.0, 25.0}), pv);
  for (double p : stc.values) EXPECT_EQ(p, 1.0);

  SynthConfig sc;
  sc.days = 5;
  const auto [h, d] = synth_generate(sc);
  const auto daily = convert_series(d, wind);
  EXPECT_EQ(daily.resolution, Resolution::kDaily);
  EXPECT_EQ(daily.values.size(), 5u);
  EXPECT_EQ(daily.start, d.first_date());
}

TEST(ConvertSeries, CommutesWithConcatenation) {
  SynthConfig sc;
  sc.days = 10;
  const auto h = synth_generate(sc).first;
  const PVModuleSpec pv;
  const auto whole = convert_series(h, pv);
  auto first = convert_series(h.slice(0, 4), pv);
  const auto second = convert_series(h.slice(4, 6), pv);
  first.values.insert(first.values.end(), second.values.begin(), second.values.end());
  EXPECT_EQ(first.values, whole.values);
}

TEST(PowerCsv, RoundTripAndValidation) {
  SynthConfig sc;
  sc.days = 3;
  const auto [h, d] = synth_generate(sc);
  for (const auto& p : {convert_series(h, WindTurbineSpec{}), convert_series(d, WindTurbineSpec{})}) {
    const auto back = parse_power_csv(to_csv(p), Technology::kWind);
    EXPECT_EQ(back.values, p.values);
    EXPECT_EQ(back.start, p.start);
    EXPECT_EQ(back.resolution, p.resolution);
  }
  EXPECT_THROW(parse_power_csv("date,p\n2025-01-01,1.5\n", Technology::kPv), ValidationError);
  EXPECT_THROW(parse_power_csv("date,p\n2025-01-01,0.5\n2025-01-03,0.5\n", Technology::kPv), ContinuityError);
  EXPECT_EQ(parse_technology("pv"), Technology::kPv);
  EXPECT_THROW(parse_technology("hydro"), ConfigError);
}

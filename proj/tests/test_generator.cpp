#include <gtest/gtest.h>

#include <filesystem>

#include "srdm/analytics.hpp"
#include "srdm/generator.hpp"
#include "srdm/synth.hpp"

using namespace srdm;

namespace {

/// Untrained but fully wired models: enough to exercise the recurrence.
struct Models {
  VAEParams vae;
  DenoiserParams denoiser{DiffusionConfig{}, 24};
  HourlySeries observed;
  DailySeries lowres;

  Models() {
    SynthConfig sc;
    sc.days = 12;
    sc.start = Date(2024, 12, 28);
    const auto [h, d] = synth_generate(sc);
    observed = h;
    lowres = d.slice(4, 8);  // 2025-01-01 .. 2025-01-08
    vae.init(1);
    vae.set_norm(compute_norm_stats(h));
    DiffusionConfig dc;
    dc.steps = 10;
    denoiser = DenoiserParams(dc, vae.latent_length());
    denoiser.init(2);
    denoiser.set_vae_fingerprint(vae.fingerprint());
  }

  HighResDay x0() const { return choose_initial_day(lowres, &observed, InitialDaySource::kObservedDay); }
};

}  // namespace

TEST(GenerateDay, DeterministicGivenSeedAndStochasticAcrossSeeds) {
  Models m;
  std::mt19937_64 a(5), b(5), c(6);
  const auto x0 = m.x0();
  const auto da = generate_day(m.vae, m.denoiser, x0, m.lowres[0], a);
  const auto db = generate_day(m.vae, m.denoiser, x0, m.lowres[0], b);
  const auto dc = generate_day(m.vae, m.denoiser, x0, m.lowres[0], c);
  EXPECT_EQ(da, db);
  EXPECT_NE(da, dc);
  EXPECT_EQ(da.date, m.lowres[0].date);
}

TEST(GenerateSeries, ShapeClampAndMemberIsolation) {
  Models m;
  GenerationConfig gc;
  gc.members = 3;
  const auto e = generate_series(m.vae, m.denoiser, m.x0(), m.lowres, gc);
  e.validate();
  ASSERT_EQ(e.size(), 3u);
  EXPECT_EQ(e.first_date(), Date(2025, 1, 1));
  EXPECT_EQ(e.last_date(), Date(2025, 1, 8));
  EXPECT_EQ(e.seeds, (std::vector<std::uint64_t>{1000, 1001, 1002}));
  for (const auto& member : e.members)
    for (const auto& d : member)
      for (const auto& h : d.hours) EXPECT_GE(h.r, 0.0);
  EXPECT_EQ(generate_member(m.vae, m.denoiser, m.x0(), m.lowres, gc, 2), e.members[2]);
  EXPECT_NE(e.members[0], e.members[1]);
}

TEST(GenerateSeries, ThreadCountDoesNotChangeOutput) {
  Models m;
  GenerationConfig gc;
  gc.members = 3;
  const auto serial = generate_series(m.vae, m.denoiser, m.x0(), m.lowres, gc);
  gc.threads = 2;
  const auto parallel = generate_series(m.vae, m.denoiser, m.x0(), m.lowres, gc);
  EXPECT_EQ(serial.members, parallel.members);
}

TEST(GenerateSeries, ShiftingSeedsPermutesMembers) {
  Models m;
  GenerationConfig gc;
  gc.members = 3;
  const auto a = generate_series(m.vae, m.denoiser, m.x0(), m.lowres, gc);
  gc.base_seed = 1001;
  const auto b = generate_series(m.vae, m.denoiser, m.x0(), m.lowres, gc);
  EXPECT_EQ(a.members[1], b.members[0]);
  EXPECT_EQ(a.members[2], b.members[1]);
}

TEST(GenerateSeries, PreconditionErrors) {
  Models m;
  GenerationConfig gc;
  gc.members = 1;
  auto wrong_day = m.x0();
  wrong_day.date = wrong_day.date.prev();
  EXPECT_THROW(generate_series(m.vae, m.denoiser, wrong_day, m.lowres, gc), ContinuityError);
  EXPECT_THROW(generate_series(m.vae, m.denoiser, m.x0(), DailySeries{}, gc), InsufficientDataError);
  gc.members = 0;
  EXPECT_THROW(generate_series(m.vae, m.denoiser, m.x0(), m.lowres, gc), ConfigError);
  gc.members = 1;
  auto other = m.denoiser;
  other.set_vae_fingerprint("something else");
  EXPECT_THROW(generate_series(m.vae, other, m.x0(), m.lowres, gc), ConfigError);
}

TEST(InitialDay, ObservedWhenAvailableElseBootstrap) {
  Models m;
  const auto observed = m.x0();
  EXPECT_EQ(observed, m.observed[3]);
  const auto boot = choose_initial_day(m.lowres, nullptr, InitialDaySource::kObservedDay);
  EXPECT_EQ(boot.date, Date(2024, 12, 31));
  const auto mean = daily_mean(boot).mean;
  for (std::size_t f = 0; f < kFeatureCount; ++f) EXPECT_NEAR(mean[f], m.lowres[0].mean[f], 1e-9);
  EXPECT_EQ(boot.hours[0].r, 0.0);
  EXPECT_EQ(choose_initial_day(m.lowres, &m.observed, InitialDaySource::kTiledDailyMean), boot);
}

TEST(Ensemble, WriteReadRoundTrip) {
  Models m;
  GenerationConfig gc;
  gc.members = 2;
  const auto e = generate_series(m.vae, m.denoiser, m.x0(), m.lowres, gc);
  const auto dir = std::filesystem::temp_directory_path() / "srdm_test_ensemble";
  std::filesystem::remove_all(dir);
  write_ensemble(dir, e, "2025-01-01T00:00:00Z");
  EXPECT_TRUE(std::filesystem::exists(dir / "manifest.json"));
  EXPECT_TRUE(std::filesystem::exists(dir / "member_1.csv"));
  const auto back = read_ensemble(dir);
  EXPECT_EQ(back.members, e.members);
  EXPECT_EQ(back.seeds, e.seeds);
  EXPECT_EQ(back.pathway, e.pathway);
  std::filesystem::remove_all(dir);
}

TEST(Continuity, RatioOfSmoothSeriesIsOne) {
  // Linear ramp across day boundaries: boundary and within steps are equal.
  std::vector<HighResDay> days;
  Date d(2025, 1, 1);
  for (int i = 0; i < 3; ++i, d = d.next()) {
    HighResDay day{d, {}};
    for (std::size_t h = 0; h < 24; ++h) {
      const double x = static_cast<double>(i * 24 + static_cast<int>(h));
      day.hours[h] = {x, -x, x, 2.0 * x};
    }
    days.push_back(day);
  }
  const std::vector<HourlySeries> members{HourlySeries(days)};
  const auto r = continuity_stats(members).ratio();
  for (std::size_t f = 0; f < kFeatureCount; ++f) EXPECT_NEAR(r[f], 1.0, 1e-12);
}

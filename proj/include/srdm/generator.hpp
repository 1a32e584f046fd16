#pragma once

/**
 * @file generator.hpp
 * @brief Recurrent super-resolution: each hourly day is sampled from the
 *        latent diffusion model conditioned on the previous generated day
 *        and the current daily mean, then decoded and denormalized.
 */

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <future>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "srdm/data_model.hpp"
#include "srdm/diffusion.hpp"
#include "srdm/synth.hpp"
#include "srdm/vae.hpp"

namespace srdm {

enum class InitialDaySource { kObservedDay, kTiledDailyMean };

struct GenerationConfig {
  std::size_t members = 100;
  std::uint64_t base_seed = 1000;
  InitialDaySource initial_day = InitialDaySource::kObservedDay;
  std::string pathway = "SSP126";
  bool clamp_radiation = true;
  /// Replace the daily-mean embedding with zeros (conditioning ablation).
  bool ablate_lowres = false;
  /// Worker threads for member-level parallelism; output does not depend on it.
  std::size_t threads = 1;

  void validate() const {
    if (members < 1) throw ConfigError("ensemble size must be >= 1");
    if (threads < 1) throw ConfigError("threads must be >= 1");
  }
};

struct ScenarioEnsemble {
  std::vector<HourlySeries> members;
  std::string pathway;
  std::vector<std::uint64_t> seeds;
  std::string vae_fingerprint;
  std::string denoiser_fingerprint;

  std::size_t size() const { return members.size(); }
  const Date& first_date() const { return members.front().first_date(); }
  const Date& last_date() const { return members.front().last_date(); }

  void validate() const {
    if (members.empty()) throw ValidationError("ensemble has no members");
    for (const auto& m : members) {
      if (m.size() != members.front().size() || m.empty() || m.first_date() != members.front().first_date()) {
        throw ContinuityError("ensemble members span different dates");
      }
      m.require_physical();
    }
  }
};

/**
 * @brief Hourly day whose values are the daily means, except radiation,
 *        which follows the clear-sky diurnal shape scaled to keep the mean.
 */
inline HighResDay bootstrap_initial_day(const LowResDay& lowres, double latitude_deg = 41.5) {
  const auto shape = diurnal_radiation_shape(latitude_deg, lowres.date.day_of_year());
  double total = 0.0;
  for (double s : shape) total += s;
  HighResDay day{lowres.date, {}};
  for (std::size_t h = 0; h < kHoursPerDay; ++h) {
    day.hours[h] = lowres.mean;
    day.hours[h].r = total > 0.0 ? lowres.mean.r * static_cast<double>(kHoursPerDay) * shape[h] / total : 0.0;
  }
  return day;
}

inline void check_compatible(const VAEParams& vae, const DenoiserParams& denoiser) {
  if (denoiser.vae_fingerprint() != vae.fingerprint()) {
    throw ConfigError("denoiser was trained against vae " + denoiser.vae_fingerprint() + ", got " + vae.fingerprint());
  }
  if (denoiser.latent_length() != vae.latent_length()) throw ConfigError("latent length mismatch");
}

/**
 * @brief Samples one hourly day (physical units) given the previous hourly
 *        day and the current daily mean (both physical units).
 */
inline HighResDay generate_day(const VAEParams& vae, const DenoiserParams& denoiser, const HighResDay& x_prev,
                               const LowResDay& xbar, std::mt19937_64& rng, bool ablate_lowres = false,
                               bool clamp_radiation = true) {
  check_compatible(vae, denoiser);
  const auto& norm = vae.norm();
  const auto& schedule = denoiser.schedule();
  const nn::Tensor prev = day_to_tensor(normalize(x_prev, norm));
  const auto conditions = denoiser.day_conditions(prev, norm.normalize(xbar.mean), ablate_lowres);

  std::normal_distribution<double> normal(0.0, 1.0);
  const std::size_t T = vae.latent_length();
  std::vector<double> z(T);
  for (auto& v : z) v = normal(rng);
  std::vector<double> eps(T);
  for (std::size_t n = schedule.steps(); n >= 1; --n) {
    const auto eps_theta = denoiser.predict_noise(conditions, n, z);
    if (n > 1) {
      for (auto& e : eps) e = normal(rng);
    } else {
      std::fill(eps.begin(), eps.end(), 0.0);
    }
    z = denoise_step(z, n, eps_theta, schedule, eps);
  }
  const double inv_scale = 1.0 / denoiser.latent_scale();
  for (auto& v : z) v *= inv_scale;
  HighResDay day = denormalize(tensor_to_day(vae.decode(LatentSample{z}), xbar.date), norm);
  if (clamp_radiation) {
    for (auto& h : day.hours) h.r = std::max(0.0, h.r);
  }
  return day;
}

/// One ensemble member, generated day by day with seed base_seed + member.
inline HourlySeries generate_member(const VAEParams& vae, const DenoiserParams& denoiser, const HighResDay& x0,
                                    const DailySeries& lowres, const GenerationConfig& config, std::size_t member) {
  std::mt19937_64 rng(config.base_seed + member);
  std::vector<HighResDay> days;
  days.reserve(lowres.size());
  HighResDay prev = x0;
  for (const auto& low : lowres) {
    prev = generate_day(vae, denoiser, prev, low, rng, config.ablate_lowres, config.clamp_radiation);
    days.push_back(prev);
  }
  return HourlySeries(std::move(days));
}

/**
 * @brief Runs the recurrence for every member over the full daily series.
 *
 * `x0` must be dated the day before `lowres` starts. Members only share
 * read-only parameters, so they may run on several threads; results are
 * assembled by member index.
 */
inline ScenarioEnsemble generate_series(const VAEParams& vae, const DenoiserParams& denoiser, const HighResDay& x0,
                                        const DailySeries& lowres, const GenerationConfig& config) {
  config.validate();
  check_compatible(vae, denoiser);
  if (lowres.empty()) throw InsufficientDataError("no daily values to downscale");
  if (x0.date.next() != lowres.first_date()) {
    throw ContinuityError("initial day " + x0.date.to_string() + " is not the day before " +
                          lowres.first_date().to_string());
  }
  ScenarioEnsemble out;
  out.pathway = config.pathway;
  out.vae_fingerprint = vae.fingerprint();
  out.denoiser_fingerprint = denoiser.fingerprint();
  out.members.resize(config.members);
  for (std::size_t m = 0; m < config.members; ++m) out.seeds.push_back(config.base_seed + m);

  if (config.threads <= 1) {
    for (std::size_t m = 0; m < config.members; ++m) out.members[m] = generate_member(vae, denoiser, x0, lowres, config, m);
    return out;
  }
  for (std::size_t start = 0; start < config.members; start += config.threads) {
    const std::size_t end = std::min(config.members, start + config.threads);
    std::vector<std::future<HourlySeries>> jobs;
    for (std::size_t m = start; m < end; ++m) {
      jobs.push_back(std::async(std::launch::async, [&, m] { return generate_member(vae, denoiser, x0, lowres, config, m); }));
    }
    for (std::size_t m = start; m < end; ++m) out.members[m] = jobs[m - start].get();
  }
  return out;
}

/// Initial day per the configured source: the observed hourly day before
/// `lowres` starts when available, otherwise the bootstrap day.
inline HighResDay choose_initial_day(const DailySeries& lowres, const HourlySeries* observed, InitialDaySource source,
                                     double latitude_deg = 41.5) {
  const Date want = lowres.first_date().prev();
  if (source == InitialDaySource::kObservedDay && observed != nullptr) {
    for (const auto& d : *observed) {
      if (d.date == want) return d;
    }
  }
  LowResDay seed_day = lowres[0];
  seed_day.date = want;
  return bootstrap_initial_day(seed_day, latitude_deg);
}

// ---------------------------------------------------------------------------
// Persistence: member_<m>.csv per member plus manifest.json.

inline std::string member_filename(std::size_t m) { return "member_" + std::to_string(m) + ".csv"; }

inline nlohmann::json ensemble_manifest(const ScenarioEnsemble& e, const std::string& generated_at) {
  return {{"pathway", e.pathway},
          {"members", e.size()},
          {"seeds", e.seeds},
          {"first_date", e.first_date().to_string()},
          {"last_date", e.last_date().to_string()},
          {"vae_fingerprint", e.vae_fingerprint},
          {"denoiser_fingerprint", e.denoiser_fingerprint},
          {"generated_at", generated_at}};
}

inline void write_member(const std::filesystem::path& dir, const ScenarioEnsemble& e, std::size_t m) {
  write_series((dir / member_filename(m)).string(), e.members.at(m));
}

inline void write_ensemble(const std::filesystem::path& dir, const ScenarioEnsemble& e, const std::string& generated_at) {
  std::filesystem::create_directories(dir);
  for (std::size_t m = 0; m < e.size(); ++m) write_member(dir, e, m);
  text::write_file((dir / "manifest.json").string(), ensemble_manifest(e, generated_at).dump(2) + "\n");
}

inline ScenarioEnsemble read_ensemble(const std::filesystem::path& dir) {
  const auto manifest_path = dir / "manifest.json";
  if (!std::filesystem::exists(manifest_path)) {
    throw DependencyError("no ensemble manifest at '" + manifest_path.string() + "'");
  }
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text::read_file(manifest_path.string()));
  } catch (const nlohmann::json::exception& ex) {
    throw ParseError("ensemble manifest: " + std::string(ex.what()));
  }
  ScenarioEnsemble e;
  e.pathway = j.value("pathway", std::string{});
  e.seeds = j.value("seeds", std::vector<std::uint64_t>{});
  e.vae_fingerprint = j.value("vae_fingerprint", std::string{});
  e.denoiser_fingerprint = j.value("denoiser_fingerprint", std::string{});
  const auto members = j.at("members").get<std::size_t>();
  for (std::size_t m = 0; m < members; ++m) e.members.push_back(ingest_hourly((dir / member_filename(m)).string()));
  e.validate();
  return e;
}

}  // namespace srdm

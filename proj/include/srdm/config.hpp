#pragma once

/**
 * @file config.hpp
 * @brief Flat run configuration shared by every CLI command.
 *
 * Keys are flat (`vae_epochs`, `wind_cut_in`, ...). Precedence, lowest to
 * highest: built-in default, config file, SRDM_OUTPUT_DIR (output_dir only),
 * command-line override. Unknown keys are rejected so typos surface early.
 */

#include <cstdlib>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "srdm/diffusion.hpp"
#include "srdm/generator.hpp"
#include "srdm/power.hpp"
#include "srdm/synth.hpp"
#include "srdm/vae.hpp"

namespace srdm {

struct RunConfig {
  // Paths. Empty means "derive from output_dir" (see the resolved_* helpers).
  std::string output_dir = "srdm_out";
  std::string hourly_path;          // observed / synthetic hourly CSV
  std::string daily_path;           // daily CSV to downscale (and low-res bias input)
  std::string initial_hourly_path;  // optional hourly CSV holding the day before daily_path starts
  std::string vae_params;
  std::string denoiser_params;
  std::string ensemble_dir;
  std::string power_dir;
  std::string analysis_dir;
  std::string power_curve_path;  // optional speed_ms,power_mw table

  SynthConfig synth;
  VAEConfig vae;
  DiffusionConfig diffusion;
  GenerationConfig generation;
  WindTurbineSpec wind;
  PVModuleSpec pv;

  double alpha = 0.05;
  std::string interval_width = "mean_yearly_range";

  std::filesystem::path out() const { return output_dir; }
  std::string resolved_hourly() const { return hourly_path.empty() ? (out() / "hourly.csv").string() : hourly_path; }
  std::string resolved_daily() const { return daily_path.empty() ? (out() / "daily.csv").string() : daily_path; }
  std::string resolved_vae() const { return vae_params.empty() ? (out() / "vae.params").string() : vae_params; }
  std::string resolved_denoiser() const {
    return denoiser_params.empty() ? (out() / "denoiser.params").string() : denoiser_params;
  }
  std::string resolved_ensemble() const { return ensemble_dir.empty() ? (out() / "ensemble").string() : ensemble_dir; }
  std::string resolved_power() const { return power_dir.empty() ? (out() / "power").string() : power_dir; }
  std::string resolved_analysis() const { return analysis_dir.empty() ? (out() / "analysis").string() : analysis_dir; }

  void validate() const {
    synth.validate();
    vae.validate();
    diffusion.validate();
    generation.validate();
    wind.validate();
    pv.validate();
    if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
    if (interval_width != "mean_yearly_range") {
      throw ConfigError("interval_width '" + interval_width + "' is not supported (use mean_yearly_range)");
    }
  }
};

namespace config_detail {

struct Field {
  std::string key;
  std::function<nlohmann::json(const RunConfig&)> get;
  std::function<void(RunConfig&, const nlohmann::json&)> set;
};

/// Field bound to a member reached through `access` (callable on RunConfig&).
template <class Access>
Field field(std::string key, Access access) {
  return {key,
          [access](const RunConfig& c) { return nlohmann::json(access(const_cast<RunConfig&>(c))); },
          [access, key](RunConfig& c, const nlohmann::json& j) {
            using T = std::decay_t<decltype(access(c))>;
            try {
              access(c) = j.get<T>();
            } catch (const nlohmann::json::exception&) {
              throw ConfigError("config key '" + key + "' has the wrong type");
            }
          }};
}

inline std::string weighting_name(LossWeighting w) { return w == LossWeighting::kElbo ? "elbo" : "simple"; }
inline std::string initial_day_name(InitialDaySource s) {
  return s == InitialDaySource::kObservedDay ? "observed" : "bootstrap";
}

inline const std::vector<Field>& fields() {
  static const std::vector<Field> table = [] {
    std::vector<Field> f;
#define SRDM_FIELD(key, expr) f.push_back(field(key, [](RunConfig& c) -> auto& { return expr; }))
    SRDM_FIELD("output_dir", c.output_dir);
    SRDM_FIELD("hourly_path", c.hourly_path);
    SRDM_FIELD("daily_path", c.daily_path);
    SRDM_FIELD("initial_hourly_path", c.initial_hourly_path);
    SRDM_FIELD("vae_params", c.vae_params);
    SRDM_FIELD("denoiser_params", c.denoiser_params);
    SRDM_FIELD("ensemble_dir", c.ensemble_dir);
    SRDM_FIELD("power_dir", c.power_dir);
    SRDM_FIELD("analysis_dir", c.analysis_dir);
    SRDM_FIELD("power_curve_path", c.power_curve_path);

    SRDM_FIELD("synth_days", c.synth.days);
    SRDM_FIELD("synth_seed", c.synth.seed);
    SRDM_FIELD("synth_noise", c.synth.noise);
    SRDM_FIELD("synth_ar_coefficient", c.synth.ar_coefficient);
    SRDM_FIELD("synth_wind_u_mean", c.synth.wind_u_mean);
    SRDM_FIELD("synth_wind_v_mean", c.synth.wind_v_mean);
    SRDM_FIELD("synth_wind_diurnal", c.synth.wind_diurnal);
    SRDM_FIELD("synth_latitude_deg", c.synth.latitude_deg);
    SRDM_FIELD("synth_radiation_peak", c.synth.radiation_peak);
    SRDM_FIELD("synth_temperature_mean", c.synth.temperature_mean);
    SRDM_FIELD("synth_seasonal_amplitude", c.synth.seasonal_amplitude);
    SRDM_FIELD("synth_diurnal_temperature", c.synth.diurnal_temperature);
    SRDM_FIELD("synth_temperature_trend_per_year", c.synth.temperature_trend_per_year);

    SRDM_FIELD("vae_latent_length", c.vae.latent_length);
    SRDM_FIELD("vae_encoder_channels", c.vae.encoder_channels);
    SRDM_FIELD("vae_decoder_channels", c.vae.decoder_channels);
    SRDM_FIELD("vae_kernel", c.vae.kernel);
    SRDM_FIELD("vae_kl_weight", c.vae.kl_weight);
    SRDM_FIELD("vae_refine_channels", c.vae.refine_channels);
    SRDM_FIELD("vae_learning_rate", c.vae.learning_rate);
    SRDM_FIELD("vae_epochs", c.vae.epochs);
    SRDM_FIELD("vae_batch_size", c.vae.batch_size);
    SRDM_FIELD("train_fraction", c.vae.train_fraction);
    SRDM_FIELD("vae_seed", c.vae.seed);

    SRDM_FIELD("diffusion_steps", c.diffusion.steps);
    SRDM_FIELD("diffusion_beta_min", c.diffusion.beta_min);
    SRDM_FIELD("diffusion_beta_max", c.diffusion.beta_max);
    SRDM_FIELD("diffusion_latent_channels", c.diffusion.latent_channels);
    SRDM_FIELD("diffusion_embed_channels", c.diffusion.embed_channels);
    SRDM_FIELD("diffusion_hidden_channels", c.diffusion.hidden_channels);
    SRDM_FIELD("diffusion_step_dim", c.diffusion.step_dim);
    SRDM_FIELD("diffusion_fusion_layers", c.diffusion.fusion_layers);
    SRDM_FIELD("diffusion_sample_latent", c.diffusion.sample_latent);
    SRDM_FIELD("diffusion_learning_rate", c.diffusion.learning_rate);
    SRDM_FIELD("diffusion_iterations", c.diffusion.iterations);
    SRDM_FIELD("diffusion_batch_size", c.diffusion.batch_size);
    SRDM_FIELD("diffusion_eval_every", c.diffusion.eval_every);
    SRDM_FIELD("diffusion_eval_draws", c.diffusion.eval_draws);
    SRDM_FIELD("diffusion_seed", c.diffusion.seed);

    SRDM_FIELD("members", c.generation.members);
    SRDM_FIELD("base_seed", c.generation.base_seed);
    SRDM_FIELD("pathway", c.generation.pathway);
    SRDM_FIELD("clamp_radiation", c.generation.clamp_radiation);
    SRDM_FIELD("threads", c.generation.threads);

    SRDM_FIELD("wind_rated_power_mw", c.wind.rated_power_mw);
    SRDM_FIELD("wind_cut_in", c.wind.cut_in);
    SRDM_FIELD("wind_rated_speed", c.wind.rated_speed);
    SRDM_FIELD("wind_cut_out", c.wind.cut_out);
    SRDM_FIELD("wind_hub_height", c.wind.hub_height);
    SRDM_FIELD("wind_reference_height", c.wind.reference_height);
    SRDM_FIELD("wind_roughness", c.wind.roughness);

    SRDM_FIELD("pv_derating", c.pv.derating);
    SRDM_FIELD("pv_capacity_kw", c.pv.capacity_kw);
    SRDM_FIELD("pv_temp_coeff", c.pv.temp_coeff);

    SRDM_FIELD("alpha", c.alpha);
    SRDM_FIELD("interval_width", c.interval_width);
#undef SRDM_FIELD

    f.push_back({"synth_start", [](const RunConfig& c) { return nlohmann::json(c.synth.start.to_string()); },
                 [](RunConfig& c, const nlohmann::json& j) {
                   if (!j.is_string()) throw ConfigError("config key 'synth_start' must be a YYYY-MM-DD string");
                   c.synth.start = Date::parse(j.get<std::string>());
                 }});
    f.push_back({"diffusion_weighting", [](const RunConfig& c) { return nlohmann::json(weighting_name(c.diffusion.weighting)); },
                 [](RunConfig& c, const nlohmann::json& j) {
                   const auto s = j.is_string() ? j.get<std::string>() : std::string();
                   if (s == "simple") {
                     c.diffusion.weighting = LossWeighting::kSimple;
                   } else if (s == "elbo") {
                     c.diffusion.weighting = LossWeighting::kElbo;
                   } else {
                     throw ConfigError("diffusion_weighting must be 'simple' or 'elbo'");
                   }
                 }});
    f.push_back({"initial_day", [](const RunConfig& c) { return nlohmann::json(initial_day_name(c.generation.initial_day)); },
                 [](RunConfig& c, const nlohmann::json& j) {
                   const auto s = j.is_string() ? j.get<std::string>() : std::string();
                   if (s == "observed") {
                     c.generation.initial_day = InitialDaySource::kObservedDay;
                   } else if (s == "bootstrap") {
                     c.generation.initial_day = InitialDaySource::kTiledDailyMean;
                   } else {
                     throw ConfigError("initial_day must be 'observed' or 'bootstrap'");
                   }
                 }});
    return f;
  }();
  return table;
}

inline const Field& find_field(const std::string& key) {
  for (const auto& f : fields()) {
    if (f.key == key) return f;
  }
  throw ConfigError("unknown config key '" + key + "'");
}

}  // namespace config_detail

/// Effective configuration as flat JSON (sorted keys).
inline nlohmann::json to_json(const RunConfig& c) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& f : config_detail::fields()) j[f.key] = f.get(c);
  return j;
}

/// Applies every key of a flat JSON object.
inline void apply_json(RunConfig& c, const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config file must hold a JSON object");
  for (const auto& [key, value] : j.items()) config_detail::find_field(key).set(c, value);
}

/**
 * @brief Applies a `key=value` override. The value is read as JSON when it
 *        parses as JSON, otherwise as a plain string.
 */
inline void apply_override(RunConfig& c, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override must look like key=value, got '" + assignment + "'");
  const std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  nlohmann::json value = nlohmann::json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;
  config_detail::find_field(key).set(c, value);
}

inline RunConfig load_config_file(const std::string& path) {
  RunConfig c;
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text::read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("config '" + path + "': " + e.what());
  }
  apply_json(c, j);
  return c;
}

/**
 * @brief Builds the effective configuration: defaults, then `config_path`
 *        (if non-empty), then SRDM_OUTPUT_DIR, then `overrides` in order.
 */
inline RunConfig resolve_config(const std::string& config_path, const std::vector<std::string>& overrides) {
  RunConfig c = config_path.empty() ? RunConfig{} : load_config_file(config_path);
  if (const char* env = std::getenv("SRDM_OUTPUT_DIR"); env != nullptr && *env != '\0') c.output_dir = env;
  for (const auto& o : overrides) apply_override(c, o);
  c.validate();
  return c;
}

}  // namespace srdm

#pragma once

/**
 * @file pipeline.hpp
 * @brief Two-stage training from a physical-unit hourly series: the VAE
 *        first (normalization fitted on its training days), then the
 *        denoiser on consecutive-day pairs from the same split.
 */

#include "srdm/data_model.hpp"
#include "srdm/diffusion.hpp"
#include "srdm/vae.hpp"

namespace srdm {

/// Train/validation split shared by both stages, normalized with `norm`.
struct NormalizedSplit {
  std::vector<HourlySeries> train;
  std::vector<HourlySeries> validation;
};

inline NormalizedSplit normalized_split(const HourlySeries& physical, const NormStats& norm, double train_fraction,
                                        std::uint64_t seed) {
  const auto split = split_days(physical, train_fraction, seed);
  NormalizedSplit out;
  for (const auto& s : split.train) out.train.push_back(normalize(s, norm));
  for (const auto& s : split.validation) out.validation.push_back(normalize(s, norm));
  return out;
}

/// Normalization statistics of the training days only.
inline NormStats training_norm_stats(const HourlySeries& physical, double train_fraction, std::uint64_t seed) {
  return compute_norm_stats(split_days(physical, train_fraction, seed).train);
}

/// Fits the VAE on a physical-unit series; the result carries its NormStats.
inline VAETrainResult fit_vae(const HourlySeries& physical, const VAEConfig& config) {
  config.validate();
  physical.require_physical();
  if (physical.size() < 3) throw InsufficientDataError("training needs at least 3 days");
  const NormStats norm = training_norm_stats(physical, config.train_fraction, config.seed);
  const auto split = normalized_split(physical, norm, config.train_fraction, config.seed);
  auto result = train_vae(day_tensors(split.train), day_tensors(split.validation), config);
  result.params.set_norm(norm);
  return result;
}

/// Fits the denoiser against a trained VAE, reusing the VAE's day split.
inline DenoiserTrainResult fit_denoiser(const HourlySeries& physical, const VAEParams& vae,
                                        const DiffusionConfig& config) {
  physical.require_physical();
  const auto& vc = vae.config();
  const auto split = normalized_split(physical, vae.norm(), vc.train_fraction, vc.seed);
  return train_denoiser(consecutive_pairs(split.train), consecutive_pairs(split.validation), vae, config);
}

}  // namespace srdm

#pragma once

/**
 * @file diffusion.hpp
 * @brief Latent denoising diffusion: noise schedule, closed-form forward
 *        noising, the reverse step, the noise-prediction loss and a
 *        conditional noise-prediction network.
 *
 * The latent vector of length T' is viewed as (latent_channels x steps),
 * steps = T' / latent_channels. The four condition groups are mapped onto
 * that temporal axis:
 *   previous day (4 x 24)  -> stride-2 temporal convolutions
 *   daily mean   (4 x 1)   -> temporal transposed convolution
 *   step n                 -> sinusoidal code, linear map, reshape
 *   noisy latent           -> length-preserving convolution
 * and fused by a stack of length-preserving convolutions.
 */

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "srdm/data_model.hpp"
#include "srdm/error.hpp"
#include "srdm/nn.hpp"
#include "srdm/params_io.hpp"
#include "srdm/vae.hpp"

namespace srdm {

/**
 * @brief beta_n and the derived alpha_n, alpha_bar_n, beta_tilde_n.
 *
 * Accessors take the 1-based step index n in [1, N]; alpha_bar(0) = 1.
 */
class NoiseSchedule {
 public:
  NoiseSchedule() = default;

  static NoiseSchedule from_betas(std::vector<double> betas) {
    if (betas.empty()) throw ConfigError("noise schedule needs at least one step");
    for (std::size_t i = 0; i < betas.size(); ++i) {
      if (!(betas[i] > 0.0 && betas[i] < 1.0)) throw ConfigError("beta must lie in (0, 1)");
      if (i > 0 && betas[i] < betas[i - 1]) throw ConfigError("beta must be non-decreasing");
    }
    NoiseSchedule s;
    s.beta_ = std::move(betas);
    const std::size_t N = s.beta_.size();
    s.alpha_.resize(N);
    s.alpha_bar_.resize(N);
    s.beta_tilde_.resize(N);
    double prod = 1.0;
    for (std::size_t i = 0; i < N; ++i) {
      s.alpha_[i] = 1.0 - s.beta_[i];
      const double prev = prod;
      prod *= s.alpha_[i];
      s.alpha_bar_[i] = prod;
      s.beta_tilde_[i] = i == 0 ? 0.0 : s.beta_[i] * (1.0 - prev) / (1.0 - prod);
    }
    return s;
  }

  std::size_t steps() const { return beta_.size(); }
  double beta(std::size_t n) const { return beta_.at(check(n) - 1); }
  double alpha(std::size_t n) const { return alpha_.at(check(n) - 1); }
  double alpha_bar(std::size_t n) const { return n == 0 ? 1.0 : alpha_bar_.at(check(n) - 1); }
  double beta_tilde(std::size_t n) const { return beta_tilde_.at(check(n) - 1); }

  const std::vector<double>& betas() const { return beta_; }

  std::size_t check(std::size_t n) const {
    if (n < 1 || n > steps()) {
      throw IndexError("diffusion step " + std::to_string(n) + " outside [1, " + std::to_string(steps()) + "]");
    }
    return n;
  }

 private:
  std::vector<double> beta_, alpha_, alpha_bar_, beta_tilde_;
};

/// Linearly spaced betas from beta_min to beta_max.
inline NoiseSchedule build_schedule(std::size_t steps, double beta_min, double beta_max) {
  if (steps < 1) throw ConfigError("schedule needs N >= 1");
  if (!(beta_min > 0.0 && beta_min <= beta_max && beta_max < 1.0)) {
    throw ConfigError("schedule bounds must satisfy 0 < beta_min <= beta_max < 1");
  }
  std::vector<double> b(steps);
  for (std::size_t i = 0; i < steps; ++i) {
    b[i] = steps == 1 ? beta_min
                      : beta_min + (beta_max - beta_min) * static_cast<double>(i) / static_cast<double>(steps - 1);
  }
  return NoiseSchedule::from_betas(std::move(b));
}

/// sqrt(alpha_bar_n) z0 + sqrt(1 - alpha_bar_n) eps.
inline std::vector<double> forward_diffuse(std::span<const double> z0, std::size_t n, const NoiseSchedule& schedule,
                                           std::span<const double> eps) {
  if (z0.size() != eps.size()) throw DimensionError("z0 and eps differ in length");
  const double ab = schedule.alpha_bar(schedule.check(n));
  const double a = std::sqrt(ab);
  const double b = std::sqrt(1.0 - ab);
  std::vector<double> out(z0.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a * z0[i] + b * eps[i];
  return out;
}

/// One stepwise forward transition: sqrt(1 - beta_n) z + sqrt(beta_n) eps.
inline std::vector<double> forward_step(std::span<const double> z, std::size_t n, const NoiseSchedule& schedule,
                                        std::span<const double> eps) {
  if (z.size() != eps.size()) throw DimensionError("z and eps differ in length");
  const double b = schedule.beta(n);
  std::vector<double> out(z.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::sqrt(1.0 - b) * z[i] + std::sqrt(b) * eps[i];
  return out;
}

/**
 * @brief Reverse step
 *        z_{n-1} = (z_n - beta_n / sqrt(1 - alpha_bar_n) eps_theta) / sqrt(alpha_n)
 *                  + sqrt(beta_tilde_n) eps.
 *
 * `eps` is ignored at n = 1 (beta_tilde_1 = 0); it may be empty there.
 */
inline std::vector<double> denoise_step(std::span<const double> z_n, std::size_t n, std::span<const double> eps_theta,
                                        const NoiseSchedule& schedule, std::span<const double> eps) {
  schedule.check(n);
  if (eps_theta.size() != z_n.size() || (n > 1 && eps.size() != z_n.size())) {
    throw DimensionError("denoise_step length mismatch");
  }
  const double coef = schedule.beta(n) / std::sqrt(1.0 - schedule.alpha_bar(n));
  const double inv_sqrt_alpha = 1.0 / std::sqrt(schedule.alpha(n));
  const double sigma = n > 1 ? std::sqrt(schedule.beta_tilde(n)) : 0.0;
  std::vector<double> out(z_n.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = (z_n[i] - coef * eps_theta[i]) * inv_sqrt_alpha + (n > 1 ? sigma * eps[i] : 0.0);
  }
  return out;
}

enum class LossWeighting { kSimple, kElbo };

/// beta_n^2 / (2 alpha_n (1 - alpha_bar_n) beta_tilde_n); undefined at n = 1.
inline double elbo_weight(std::size_t n, const NoiseSchedule& s) {
  if (s.check(n) == 1 || s.beta_tilde(n) <= 0.0) {
    throw ConfigError("elbo weight is undefined at n = 1 (beta_tilde_1 = 0)");
  }
  return s.beta(n) * s.beta(n) / (2.0 * s.alpha(n) * (1.0 - s.alpha_bar(n)) * s.beta_tilde(n));
}

/// Mean squared noise error, optionally scaled by the ELBO weight.
inline double diffusion_loss(std::span<const double> eps, std::span<const double> eps_theta, std::size_t n,
                             const NoiseSchedule& schedule, LossWeighting weighting) {
  if (eps.size() != eps_theta.size() || eps.empty()) throw DimensionError("loss inputs differ in length");
  schedule.check(n);
  double sum = 0.0;
  for (std::size_t i = 0; i < eps.size(); ++i) sum += (eps[i] - eps_theta[i]) * (eps[i] - eps_theta[i]);
  const double mse = sum / static_cast<double>(eps.size());
  return weighting == LossWeighting::kSimple ? mse : elbo_weight(n, schedule) * mse;
}

/// Sinusoidal position code of a diffusion step.
inline std::vector<double> step_encoding(std::size_t n, std::size_t dim) {
  std::vector<double> out(dim, 0.0);
  const std::size_t half = dim / 2;
  for (std::size_t i = 0; i < half; ++i) {
    const double freq = std::exp(-std::log(10000.0) * static_cast<double>(i) / static_cast<double>(half));
    out[i] = std::sin(static_cast<double>(n) * freq);
    out[half + i] = std::cos(static_cast<double>(n) * freq);
  }
  return out;
}

// ---------------------------------------------------------------------------

struct DiffusionConfig {
  std::size_t steps = 100;
  double beta_min = 1e-4;
  double beta_max = 0.1;

  std::size_t latent_channels = 4;
  std::size_t embed_channels = 16;
  std::size_t hidden_channels = 64;
  std::size_t step_dim = 32;
  std::size_t fusion_layers = 3;

  LossWeighting weighting = LossWeighting::kSimple;
  bool sample_latent = false;  // reparameterized z0 instead of the encoder mean

  double learning_rate = 2e-3;
  std::size_t iterations = 1400;
  std::size_t batch_size = 32;
  std::size_t eval_every = 200;
  std::size_t eval_draws = 4;  // (n, eps) draws per validation pair
  std::uint64_t seed = 2;

  void validate() const {
    if (latent_channels == 0 || embed_channels == 0 || hidden_channels == 0 || step_dim < 2) {
      throw ConfigError("network widths must be positive");
    }
    if (fusion_layers < 1) throw ConfigError("fusion_layers must be >= 1");
    if (batch_size == 0 || learning_rate <= 0.0 || eval_every == 0) throw ConfigError("invalid training hyperparameters");
    build_schedule(steps, beta_min, beta_max);
  }

  NoiseSchedule schedule() const { return build_schedule(steps, beta_min, beta_max); }

  nlohmann::json to_json() const {
    return {{"steps", steps}, {"beta_min", beta_min}, {"beta_max", beta_max},
            {"latent_channels", latent_channels}, {"embed_channels", embed_channels},
            {"hidden_channels", hidden_channels}, {"step_dim", step_dim}, {"fusion_layers", fusion_layers},
            {"weighting", weighting == LossWeighting::kSimple ? "simple" : "elbo"},
            {"sample_latent", sample_latent}, {"learning_rate", learning_rate}, {"iterations", iterations},
            {"batch_size", batch_size}, {"eval_every", eval_every}, {"eval_draws", eval_draws}, {"seed", seed}};
  }

  static DiffusionConfig from_json(const nlohmann::json& j) {
    DiffusionConfig c;
    c.steps = j.value("steps", c.steps);
    c.beta_min = j.value("beta_min", c.beta_min);
    c.beta_max = j.value("beta_max", c.beta_max);
    c.latent_channels = j.value("latent_channels", c.latent_channels);
    c.embed_channels = j.value("embed_channels", c.embed_channels);
    c.hidden_channels = j.value("hidden_channels", c.hidden_channels);
    c.step_dim = j.value("step_dim", c.step_dim);
    c.fusion_layers = j.value("fusion_layers", c.fusion_layers);
    const std::string w = j.value("weighting", std::string("simple"));
    if (w != "simple" && w != "elbo") throw ConfigError("weighting must be 'simple' or 'elbo'");
    c.weighting = w == "simple" ? LossWeighting::kSimple : LossWeighting::kElbo;
    c.sample_latent = j.value("sample_latent", c.sample_latent);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.iterations = j.value("iterations", c.iterations);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.eval_every = j.value("eval_every", c.eval_every);
    c.eval_draws = j.value("eval_draws", c.eval_draws);
    c.seed = j.value("seed", c.seed);
    return c;
  }
};

/// Spliced condition representation: four channel groups on the latent axis.
struct EmbeddingBundle {
  static constexpr std::size_t kGroups = 4;
  enum Group : std::size_t { kPrevious = 0, kLowRes = 1, kStep = 2, kNoisy = 3 };

  nn::Tensor z_e;
  std::array<std::size_t, kGroups> group_channels{};

  nn::Tensor group(Group g) const {
    const std::vector<std::size_t> sizes(group_channels.begin(), group_channels.end());
    return nn::split_channels(z_e, sizes)[g];
  }
};

/**
 * @brief Condition embedding modules E1..E4 and the fusion stack.
 */
class DenoiserParams {
 public:
  struct Trace {
    std::vector<nn::Tensor> prev_in, prev_pre;  // E1 stages
    nn::Tensor low_raw, low_pre, low_out;       // E2
    nn::Tensor step_in, step_pre;               // E3
    nn::Tensor noisy_in, noisy_pre;             // E4
    EmbeddingBundle bundle;
    std::vector<nn::Tensor> fuse_in, fuse_pre;
    nn::Tensor out;
  };

  DenoiserParams(DiffusionConfig config, std::size_t latent_length)
      : config_(std::move(config)), latent_length_(latent_length) {
    config_.validate();
    schedule_ = config_.schedule();
    if (latent_length_ % config_.latent_channels != 0) {
      throw ConfigError("latent_length must be divisible by latent_channels");
    }
    steps_ = latent_length_ / config_.latent_channels;
    std::size_t len = kHoursPerDay;
    std::size_t in = kFeatureCount;
    while (len > steps_) {
      if (len % 2 != 0) break;
      prev_.emplace_back(in, config_.embed_channels, 5, 2, 2);
      in = config_.embed_channels;
      len /= 2;
    }
    if (len != steps_) throw ConfigError("24 hours must reach the latent axis by halving");
    if (prev_.empty()) prev_.emplace_back(in, config_.embed_channels, 5, 1, 2);
    const std::size_t E = config_.embed_channels;
    low_ = nn::ConvTranspose1d(kFeatureCount, E, steps_, 1, 0, 0);
    step_ = nn::Linear(config_.step_dim, E, steps_);
    noisy_ = nn::Conv1d(config_.latent_channels, E, 3, 1, 1);
    std::size_t c = 4 * E;
    for (std::size_t l = 0; l < config_.fusion_layers; ++l) {
      const std::size_t out = l + 1 < config_.fusion_layers ? config_.hidden_channels : config_.latent_channels;
      fuse_.emplace_back(c, out, 3, 1, 1);
      c = out;
    }
  }

  void init(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    for (auto& c : prev_) c.init(rng);
    low_.init(rng);
    step_.init(rng);
    noisy_.init(rng);
    for (auto& c : fuse_) c.init(rng);
  }

  const DiffusionConfig& config() const { return config_; }
  const NoiseSchedule& schedule() const { return schedule_; }
  std::size_t latent_length() const { return latent_length_; }
  std::size_t latent_steps() const { return steps_; }
  std::string fingerprint() const { return config_fingerprint(fingerprint_json()); }

  /// Multiplier applied to encoder means to bring latents near unit scale.
  double latent_scale() const { return latent_scale_; }
  void set_latent_scale(double s) {
    if (!(s > 0.0) || !std::isfinite(s)) throw ConfigError("latent_scale must be positive");
    latent_scale_ = s;
  }
  const std::string& vae_fingerprint() const { return vae_fingerprint_; }
  void set_vae_fingerprint(std::string f) { vae_fingerprint_ = std::move(f); }

  nn::ParamList params() {
    nn::ParamList out;
    for (auto& c : prev_) append(out, c.params());
    append(out, low_.params());
    append(out, step_.params());
    append(out, noisy_.params());
    for (auto& c : fuse_) append(out, c.params());
    return out;
  }

  // -- inference ------------------------------------------------------------

  EmbeddingBundle embed_conditions(const nn::Tensor& x_prev, const FeatureVector& xbar, std::size_t n,
                                   std::span<const double> z_n) const {
    Trace tr;
    run_embed(x_prev, xbar, n, z_n, tr);
    return tr.bundle;
  }

  std::vector<double> predict_noise(const EmbeddingBundle& bundle) const {
    check_bundle(bundle);
    Trace tr;
    tr.bundle = bundle;
    run_fusion(tr);
    return tr.out.data;
  }

  std::vector<double> predict_noise(const nn::Tensor& x_prev, const FeatureVector& xbar, std::size_t n,
                                    std::span<const double> z_n) const {
    Trace tr;
    run_embed(x_prev, xbar, n, z_n, tr);
    run_fusion(tr);
    return tr.out.data;
  }

  /// Full forward pass retaining activations. When `ablate_lowres` is set the
  /// daily-mean group is replaced by zeros.
  Trace trace(const nn::Tensor& x_prev, const FeatureVector& xbar, std::size_t n, std::span<const double> z_n,
              bool ablate_lowres = false) const {
    Trace tr;
    run_embed(x_prev, xbar, n, z_n, tr, ablate_lowres);
    run_fusion(tr);
    return tr;
  }

  /// Condition groups that do not depend on n or z_n, computed once per day.
  struct DayConditions {
    nn::Tensor previous;
    nn::Tensor lowres;
  };

  DayConditions day_conditions(const nn::Tensor& x_prev, const FeatureVector& xbar, bool ablate_lowres) const {
    Trace tr;
    embed_previous(x_prev, tr);
    embed_lowres(xbar, tr, ablate_lowres);
    return {tr.prev_in.back(), tr.low_out};
  }

  std::vector<double> predict_noise(const DayConditions& day, std::size_t n, std::span<const double> z_n) const {
    Trace tr;
    const nn::Tensor step = embed_step(n, tr);
    const nn::Tensor noisy = embed_noisy(z_n, tr);
    const std::array<nn::Tensor, 4> parts{day.previous, day.lowres, step, noisy};
    tr.bundle.z_e = nn::concat_channels(parts);
    tr.bundle.group_channels = {parts[0].channels, parts[1].channels, parts[2].channels, parts[3].channels};
    run_fusion(tr);
    return tr.out.data;
  }

  // -- training -------------------------------------------------------------

  /// Adds weight * d(loss)/d(theta) to parameter gradients; returns the loss.
  double accumulate_gradients(const nn::Tensor& x_prev, const FeatureVector& xbar, std::size_t n,
                              std::span<const double> z_n, std::span<const double> eps, double weight) {
    const auto tr = trace(x_prev, xbar, n, z_n);
    const double value = diffusion_loss(eps, tr.out.data, n, schedule_, config_.weighting);
    const double w = config_.weighting == LossWeighting::kSimple ? 1.0 : elbo_weight(n, schedule_);
    nn::Tensor g(tr.out.channels, tr.out.length);
    const double scale = weight * w * 2.0 / static_cast<double>(eps.size());
    for (std::size_t i = 0; i < eps.size(); ++i) g.data[i] = -scale * (eps[i] - tr.out.data[i]);

    for (std::size_t l = fuse_.size(); l-- > 0;) {
      const nn::Tensor gpre = (l + 1 == fuse_.size()) ? g : nn::silu_backward(tr.fuse_pre[l], g);
      g = fuse_[l].backward(tr.fuse_in[l], gpre);
    }
    const std::vector<std::size_t> sizes(tr.bundle.group_channels.begin(), tr.bundle.group_channels.end());
    const auto groups = nn::split_channels(g, sizes);

    nn::Tensor gp = groups[EmbeddingBundle::kPrevious];
    for (std::size_t s = prev_.size(); s-- > 0;) gp = prev_[s].backward(tr.prev_in[s], nn::silu_backward(tr.prev_pre[s], gp));
    low_.backward(tr.low_raw, nn::silu_backward(tr.low_pre, groups[EmbeddingBundle::kLowRes]));
    step_.backward(tr.step_in, nn::silu_backward(tr.step_pre, groups[EmbeddingBundle::kStep]));
    noisy_.backward(tr.noisy_in, nn::silu_backward(tr.noisy_pre, groups[EmbeddingBundle::kNoisy]));
    return value;
  }

  double loss(const nn::Tensor& x_prev, const FeatureVector& xbar, std::size_t n, std::span<const double> z_n,
              std::span<const double> eps) const {
    return diffusion_loss(eps, predict_noise(x_prev, xbar, n, z_n), n, schedule_, config_.weighting);
  }

  // -- persistence ------------------------------------------------------------

  void save(const std::string& path) {
    ParamsBlob blob;
    blob.kind = "denoiser";
    blob.fingerprint = fingerprint();
    blob.metadata = fingerprint_json_wrapped();
    blob.metadata["latent_scale"] = latent_scale_;
    blob.metadata["vae_fingerprint"] = vae_fingerprint_;
    blob.values = nn::flatten_values(params());
    save_params(path, blob);
  }

  static DenoiserParams load(const std::string& path) {
    const auto blob = load_params(path, "denoiser");
    const auto& cfg = blob.metadata.at("config");
    DenoiserParams p(DiffusionConfig::from_json(cfg.at("diffusion")), cfg.at("latent_length").get<std::size_t>());
    if (p.fingerprint() != blob.fingerprint) throw ConfigError("denoiser fingerprint mismatch in '" + path + "'");
    const auto betas = cfg.at("schedule").get<std::vector<double>>();
    if (betas != p.schedule_.betas()) throw ConfigError("stored schedule does not match config");
    if (blob.values.size() != nn::parameter_count(p.params())) {
      throw ConfigError("denoiser parameter count does not match its config");
    }
    nn::assign_values(p.params(), blob.values);
    p.set_latent_scale(blob.metadata.at("latent_scale").get<double>());
    p.vae_fingerprint_ = blob.metadata.at("vae_fingerprint").get<std::string>();
    return p;
  }

 private:
  static void append(nn::ParamList& out, const nn::ParamList& more) { out.insert(out.end(), more.begin(), more.end()); }

  nlohmann::json fingerprint_json() const {
    return {{"diffusion", config_.to_json()}, {"latent_length", latent_length_}, {"schedule", schedule_.betas()}};
  }
  nlohmann::json fingerprint_json_wrapped() const { return {{"config", fingerprint_json()}}; }

  void check_bundle(const EmbeddingBundle& b) const {
    if (b.z_e.length != steps_ || b.z_e.channels != 4 * config_.embed_channels) {
      throw DimensionError("embedding bundle has the wrong shape");
    }
  }

  void embed_previous(const nn::Tensor& x_prev, Trace& tr) const {
    if (x_prev.channels != kFeatureCount || x_prev.length != kHoursPerDay) {
      throw DimensionError("previous day must be 4x24");
    }
    tr.prev_in.push_back(x_prev);
    for (const auto& c : prev_) {
      tr.prev_pre.push_back(c.forward(tr.prev_in.back()));
      tr.prev_in.push_back(nn::silu(tr.prev_pre.back()));
    }
  }

  void embed_lowres(const FeatureVector& xbar, Trace& tr, bool ablate) const {
    nn::Tensor x(kFeatureCount, 1);
    for (std::size_t f = 0; f < kFeatureCount; ++f) x(f, 0) = xbar[f];
    if (!xbar.finite()) throw DimensionError("non-finite daily condition");
    tr.low_raw = x;
    tr.low_pre = low_.forward(x);
    tr.low_out = ablate ? nn::Tensor(tr.low_pre.channels, tr.low_pre.length) : nn::silu(tr.low_pre);
  }

  nn::Tensor embed_step(std::size_t n, Trace& tr) const {
    schedule_.check(n);
    tr.step_in = nn::Tensor(1, config_.step_dim);
    tr.step_in.data = step_encoding(n, config_.step_dim);
    tr.step_pre = step_.forward(tr.step_in);
    return nn::silu(tr.step_pre);
  }

  nn::Tensor embed_noisy(std::span<const double> z_n, Trace& tr) const {
    if (z_n.size() != latent_length_) throw DimensionError("noisy latent length mismatch");
    tr.noisy_in = nn::Tensor(config_.latent_channels, steps_);
    std::copy(z_n.begin(), z_n.end(), tr.noisy_in.data.begin());
    tr.noisy_pre = noisy_.forward(tr.noisy_in);
    return nn::silu(tr.noisy_pre);
  }

  void run_embed(const nn::Tensor& x_prev, const FeatureVector& xbar, std::size_t n, std::span<const double> z_n,
                 Trace& tr, bool ablate_lowres = false) const {
    embed_previous(x_prev, tr);
    embed_lowres(xbar, tr, ablate_lowres);
    const nn::Tensor step = embed_step(n, tr);
    const nn::Tensor noisy = embed_noisy(z_n, tr);
    const std::array<nn::Tensor, 4> parts{tr.prev_in.back(), tr.low_out, step, noisy};
    tr.bundle.z_e = nn::concat_channels(parts);
    tr.bundle.group_channels = {parts[0].channels, parts[1].channels, parts[2].channels, parts[3].channels};
  }

  void run_fusion(Trace& tr) const {
    tr.fuse_in.push_back(tr.bundle.z_e);
    for (std::size_t l = 0; l < fuse_.size(); ++l) {
      tr.fuse_pre.push_back(fuse_[l].forward(tr.fuse_in.back()));
      if (l + 1 < fuse_.size()) tr.fuse_in.push_back(nn::silu(tr.fuse_pre.back()));
    }
    tr.out = tr.fuse_pre.back();
  }

  DiffusionConfig config_;
  std::size_t latent_length_ = 0;
  std::size_t steps_ = 0;
  NoiseSchedule schedule_;
  double latent_scale_ = 1.0;
  std::string vae_fingerprint_;
  std::vector<nn::Conv1d> prev_;
  nn::ConvTranspose1d low_;
  nn::Linear step_;
  nn::Conv1d noisy_;
  std::vector<nn::Conv1d> fuse_;
};

// ---------------------------------------------------------------------------
// Training

/// A normalized (previous day, current day) pair with the current day's
/// latent posterior precomputed.
struct LatentPair {
  nn::Tensor previous;
  FeatureVector xbar;
  LatentStats latent;
};

inline std::vector<LatentPair> encode_pairs(const std::vector<std::pair<HighResDay, HighResDay>>& pairs,
                                            const VAEParams& vae) {
  std::vector<LatentPair> out;
  out.reserve(pairs.size());
  for (const auto& [prev, day] : pairs) {
    out.push_back({day_to_tensor(prev), daily_mean(day).mean, vae.encode(day_to_tensor(day))});
  }
  return out;
}

struct DenoiserEvalLog {
  std::size_t iteration = 0;
  double train_loss = 0.0;  // mean over iterations since the previous evaluation
  double val_loss = 0.0;
  double best_val_loss = 0.0;
};

struct DenoiserTrainResult {
  DenoiserParams params;
  std::vector<DenoiserEvalLog> log;
  double initial_val_loss = 0.0;
};

namespace diffusion_detail {

inline std::size_t draw_step(std::mt19937_64& rng, const DiffusionConfig& cfg) {
  // The ELBO weight is undefined at n = 1, so that weighting trains on 2..N.
  const std::size_t lo = cfg.weighting == LossWeighting::kElbo && cfg.steps > 1 ? 2 : 1;
  std::uniform_int_distribution<std::size_t> d(lo, cfg.steps);
  return d(rng);
}

inline std::vector<double> target_latent(const LatentPair& p, double scale, bool sample, std::mt19937_64& rng,
                                         std::normal_distribution<double>& normal) {
  std::vector<double> z(p.latent.mu.size());
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double e = sample ? normal(rng) : 0.0;
    z[i] = scale * (p.latent.mu[i] + (sample ? std::exp(0.5 * p.latent.log_var[i]) * e : 0.0));
  }
  return z;
}

}  // namespace diffusion_detail

/// Validation loss over fixed (n, eps) draws per pair.
inline double denoiser_validation_loss(const DenoiserParams& model, const std::vector<LatentPair>& val,
                                       std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto& cfg = model.config();
  double sum = 0.0;
  std::size_t count = 0;
  std::vector<double> eps(model.latent_length());
  for (const auto& p : val) {
    const auto z0 = diffusion_detail::target_latent(p, model.latent_scale(), false, rng, normal);
    for (std::size_t k = 0; k < std::max<std::size_t>(1, cfg.eval_draws); ++k) {
      const std::size_t n = diffusion_detail::draw_step(rng, cfg);
      for (auto& e : eps) e = normal(rng);
      const auto zn = forward_diffuse(z0, n, model.schedule(), eps);
      sum += model.loss(p.previous, p.xbar, n, zn, eps);
      ++count;
    }
  }
  return sum / static_cast<double>(count);
}

/**
 * @brief Fits the conditional noise predictor on latent pairs.
 *
 * Each iteration draws a batch of pairs, a step n ~ U{1..N} and noise eps
 * per sample, forms z_n in closed form and takes an Adam step on the loss.
 * The parameters with the best validation loss are returned.
 */
inline DenoiserTrainResult train_denoiser(const std::vector<LatentPair>& train, const std::vector<LatentPair>& validation,
                                          const VAEParams& vae, const DiffusionConfig& config) {
  config.validate();
  if (train.size() < 2) throw InsufficientDataError("denoiser training needs at least 2 day pairs");
  const auto& val = validation.empty() ? train : validation;

  DenoiserParams model(config, vae.latent_length());
  model.init(config.seed);
  model.set_vae_fingerprint(vae.fingerprint());
  double sq = 0.0;
  std::size_t count = 0;
  for (const auto& p : train) {
    for (double m : p.latent.mu) sq += m * m;
    count += p.latent.mu.size();
  }
  const double rms = std::sqrt(sq / static_cast<double>(count));
  model.set_latent_scale(rms > 1e-12 ? 1.0 / rms : 1.0);

  auto params = model.params();
  nn::Adam opt(config.learning_rate);
  std::mt19937_64 rng(config.seed ^ 0x5851f42d4c957f2dULL);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> pick(0, train.size() - 1);
  const std::uint64_t val_seed = config.seed + 1000003;

  DenoiserTrainResult result{model, {}, denoiser_validation_loss(model, val, val_seed)};
  double best = result.initial_val_loss;
  double running = 0.0;
  std::size_t running_n = 0;
  std::vector<double> eps(model.latent_length());
  const double w = 1.0 / static_cast<double>(config.batch_size);

  for (std::size_t it = 1; it <= config.iterations; ++it) {
    nn::zero_grad(params);
    for (std::size_t b = 0; b < config.batch_size; ++b) {
      const auto& p = train[pick(rng)];
      const std::size_t n = diffusion_detail::draw_step(rng, config);
      const auto z0 = diffusion_detail::target_latent(p, model.latent_scale(), config.sample_latent, rng, normal);
      for (auto& e : eps) e = normal(rng);
      const auto zn = forward_diffuse(z0, n, model.schedule(), eps);
      running += model.accumulate_gradients(p.previous, p.xbar, n, zn, eps, w);
      ++running_n;
    }
    opt.step(params);
    if (it % config.eval_every == 0 || it == config.iterations) {
      const double train_loss = running / static_cast<double>(running_n);
      const double vl = denoiser_validation_loss(model, val, val_seed);
      if (!std::isfinite(train_loss) || !std::isfinite(vl)) {
        throw TrainingError("denoiser loss diverged at iteration " + std::to_string(it));
      }
      if (vl < best) {
        best = vl;
        result.params = model;
      }
      result.log.push_back({it, train_loss, vl, best});
      running = 0.0;
      running_n = 0;
    }
  }
  return result;
}

inline DenoiserTrainResult train_denoiser(const std::vector<std::pair<HighResDay, HighResDay>>& train_pairs,
                                          const std::vector<std::pair<HighResDay, HighResDay>>& validation_pairs,
                                          const VAEParams& vae, const DiffusionConfig& config) {
  if (train_pairs.size() < 2) throw InsufficientDataError("denoiser training needs at least 2 day pairs");
  return train_denoiser(encode_pairs(train_pairs, vae), encode_pairs(validation_pairs, vae), vae, config);
}

}  // namespace srdm

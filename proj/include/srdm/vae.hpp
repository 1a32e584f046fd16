#pragma once

/**
 * @file vae.hpp
 * @brief Temporal-convolution variational auto-encoder for one normalized
 *        day (4 features x 24 hours) with a layer-matched L1 perceptual
 *        reconstruction loss plus a weighted KL term.
 *
 * Encoder: L stride-2 conv stages (kernel 5, SiLU) then a linear head that
 * emits mu and log-variance of length latent_length. Decoder: linear map
 * back to the deepest encoder shape, then L stride-2 transposed conv stages
 * mirroring the encoder (SiLU on all but the last).
 *
 * Perceptual pairing: encoder stage l output is compared with decoder stage
 * (L - l) output for l = 1..L-1, and the input with the reconstruction as
 * the l = 0 term; the terms are averaged with uniform weight.
 */

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "srdm/data_model.hpp"
#include "srdm/error.hpp"
#include "srdm/nn.hpp"
#include "srdm/params_io.hpp"

namespace srdm {

struct VAEConfig {
  std::size_t latent_length = 24;
  std::vector<std::size_t> encoder_channels{32, 64};
  std::vector<std::size_t> decoder_channels{64, 32};  // mirror of encoder_channels
  std::size_t kernel = 5;
  double kl_weight = 0.02;
  /// Channels of the length-preserving output refinement conv after the last
  /// upsampling stage (0 disables it).
  std::size_t refine_channels = 0;

  double learning_rate = 5e-3;
  std::size_t epochs = 150;
  std::size_t batch_size = 16;
  double train_fraction = 0.8;
  std::uint64_t seed = 1;

  std::size_t stages() const { return encoder_channels.size(); }

  void validate() const {
    if (latent_length == 0 || latent_length >= kHoursPerDay * kFeatureCount) {
      throw ConfigError("latent_length must lie in [1, 96)");
    }
    if (!(kl_weight >= 0.0)) throw ConfigError("kl_weight must be >= 0");
    if (encoder_channels.empty()) throw ConfigError("encoder needs at least one stage");
    if (decoder_channels.size() != encoder_channels.size()) {
      throw ConfigError("encoder/decoder stage count mismatch (" + std::to_string(encoder_channels.size()) +
                        " vs " + std::to_string(decoder_channels.size()) + ")");
    }
    if (!std::equal(encoder_channels.begin(), encoder_channels.end(), decoder_channels.rbegin())) {
      throw ConfigError("decoder channels must mirror encoder channels");
    }
    if (kHoursPerDay % (std::size_t{1} << stages()) != 0) {
      throw ConfigError("24 hours must be divisible by 2^stages");
    }
    if (kernel % 2 == 0 || kernel < 3) throw ConfigError("kernel must be odd and >= 3");
    if (batch_size == 0 || learning_rate <= 0.0) throw ConfigError("invalid training hyperparameters");
  }

  nlohmann::json to_json() const {
    return {{"latent_length", latent_length}, {"encoder_channels", encoder_channels},
            {"decoder_channels", decoder_channels}, {"kernel", kernel}, {"kl_weight", kl_weight},
            {"refine_channels", refine_channels},
            {"learning_rate", learning_rate}, {"epochs", epochs}, {"batch_size", batch_size},
            {"train_fraction", train_fraction}, {"seed", seed}};
  }

  static VAEConfig from_json(const nlohmann::json& j) {
    VAEConfig c;
    c.latent_length = j.value("latent_length", c.latent_length);
    c.encoder_channels = j.value("encoder_channels", c.encoder_channels);
    c.decoder_channels = j.value("decoder_channels", c.decoder_channels);
    c.kernel = j.value("kernel", c.kernel);
    c.kl_weight = j.value("kl_weight", c.kl_weight);
    c.refine_channels = j.value("refine_channels", c.refine_channels);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.epochs = j.value("epochs", c.epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.train_fraction = j.value("train_fraction", c.train_fraction);
    c.seed = j.value("seed", c.seed);
    return c;
  }
};

/// Posterior mean and natural-log variance of the latent code.
struct LatentStats {
  std::vector<double> mu;
  std::vector<double> log_var;
};

struct LatentSample {
  std::vector<double> z;
};

/// z = mu + exp(log_var / 2) * eps.
inline LatentSample reparameterize(const LatentStats& stats, std::span<const double> eps) {
  if (eps.size() != stats.mu.size() || stats.log_var.size() != stats.mu.size()) {
    throw DimensionError("eps length must equal latent length");
  }
  LatentSample s{std::vector<double>(stats.mu.size())};
  for (std::size_t i = 0; i < s.z.size(); ++i) s.z[i] = stats.mu[i] + std::exp(0.5 * stats.log_var[i]) * eps[i];
  return s;
}

/// Mean over latent dimensions of 0.5 (mu^2 + sigma^2 - ln sigma^2 - 1).
inline double kl_divergence(const LatentStats& stats) {
  if (stats.mu.empty() || stats.mu.size() != stats.log_var.size()) throw DimensionError("bad latent stats");
  double sum = 0.0;
  for (std::size_t i = 0; i < stats.mu.size(); ++i) {
    const double lv = stats.log_var[i];
    sum += 0.5 * (stats.mu[i] * stats.mu[i] + std::exp(lv) - lv - 1.0);
  }
  return sum / static_cast<double>(stats.mu.size());
}

inline double mean_abs_diff(const nn::Tensor& a, const nn::Tensor& b) {
  if (!a.same_shape(b)) throw DimensionError("compared activations differ in shape");
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += std::abs(a.data[i] - b.data[i]);
  return sum / static_cast<double>(a.size());
}

/// An (encoder activation, decoder activation) pair compared by the loss.
struct ActivationPair {
  const nn::Tensor* encoder;
  const nn::Tensor* decoder;
};

/**
 * @brief Uniform average over pairs of the mean L1 distance, plus
 *        kl_weight times the KL term.
 */
inline double perceptual_objective(std::span<const ActivationPair> pairs, const LatentStats& stats,
                                   double kl_weight) {
  if (pairs.empty()) throw ConfigError("perceptual loss needs at least one layer pair");
  double rec = 0.0;
  for (const auto& p : pairs) rec += mean_abs_diff(*p.encoder, *p.decoder);
  return rec / static_cast<double>(pairs.size()) + kl_weight * kl_divergence(stats);
}

/// Normalized day as a (feature x hour) tensor.
inline nn::Tensor day_to_tensor(const HighResDay& day) {
  nn::Tensor t(kFeatureCount, kHoursPerDay);
  for (std::size_t h = 0; h < kHoursPerDay; ++h)
    for (std::size_t f = 0; f < kFeatureCount; ++f) t(f, h) = day.hours[h][f];
  return t;
}

inline HighResDay tensor_to_day(const nn::Tensor& t, const Date& date) {
  if (t.channels != kFeatureCount || t.length != kHoursPerDay) throw DimensionError("expected 4x24 tensor");
  HighResDay day{date, {}};
  for (std::size_t h = 0; h < kHoursPerDay; ++h)
    for (std::size_t f = 0; f < kFeatureCount; ++f) day.hours[h][f] = t(f, h);
  return day;
}

/**
 * @brief Learned encoder/decoder weights plus the normalization the model
 *        was trained under.
 */
class VAEParams {
 public:
  struct Trace {
    std::vector<nn::Tensor> enc_pre, enc_act;  // enc_act[0] is the input
    nn::Tensor stats;                            // 2 x latent_length
    nn::Tensor z;                                // 1 x latent_length
    std::vector<nn::Tensor> dec_pre, dec_act;  // dec_act[k] is decoder stage-k output
    nn::Tensor refine_act;                      // SiLU of the last upsampling stage, input to the refinement conv
  };

  explicit VAEParams(VAEConfig config = {}) : config_(std::move(config)) {
    config_.validate();
    const std::size_t L = config_.stages();
    const std::size_t pad = config_.kernel / 2;
    std::size_t in = kFeatureCount;
    for (std::size_t c : config_.encoder_channels) {
      enc_.emplace_back(in, c, config_.kernel, 2, pad);
      in = c;
    }
    deep_channels_ = config_.encoder_channels.back();
    deep_length_ = kHoursPerDay >> L;
    head_ = nn::Linear(deep_channels_ * deep_length_, 2, config_.latent_length);
    dec_in_ = nn::Linear(config_.latent_length, deep_channels_, deep_length_);
    for (std::size_t s = 0; s < L; ++s) {
      const std::size_t cin = config_.decoder_channels[s];
      const std::size_t last_out = config_.refine_channels > 0 ? config_.refine_channels : kFeatureCount;
      const std::size_t cout = s + 1 < L ? config_.decoder_channels[s + 1] : last_out;
      dec_.emplace_back(cin, cout, config_.kernel, 2, pad, 1);
    }
    if (config_.refine_channels > 0) refine_ = nn::Conv1d(config_.refine_channels, kFeatureCount, config_.kernel, 1, pad);
  }

  void init(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    for (auto& c : enc_) c.init(rng);
    head_.init(rng);
    dec_in_.init(rng);
    for (auto& c : dec_) c.init(rng);
    if (refined()) refine_.init(rng);
  }

  const VAEConfig& config() const { return config_; }
  std::string fingerprint() const { return config_fingerprint(config_.to_json()); }
  std::size_t latent_length() const { return config_.latent_length; }

  const NormStats& norm() const { return norm_; }
  void set_norm(const NormStats& n) {
    n.validate();
    norm_ = n;
  }

  nn::ParamList params() {
    nn::ParamList out;
    for (auto& c : enc_) append(out, c.params());
    append(out, head_.params());
    append(out, dec_in_.params());
    for (auto& c : dec_) append(out, c.params());
    if (refined()) append(out, refine_.params());
    return out;
  }

  // -- inference ------------------------------------------------------------

  LatentStats encode(const nn::Tensor& x) const {
    check_input(x);
    Trace tr;
    run_encoder(x, tr);
    return split_stats(tr.stats);
  }

  nn::Tensor decode(const LatentSample& z) const {
    if (z.z.size() != config_.latent_length) throw DimensionError("latent length mismatch");
    nn::Tensor zt(1, config_.latent_length);
    zt.data = z.z;
    Trace tr;
    run_decoder(zt, tr);
    return tr.dec_act.back();
  }

  /// Full forward pass with eps-driven reparameterization, keeping all activations.
  Trace trace(const nn::Tensor& x, std::span<const double> eps) const {
    check_input(x);
    Trace tr;
    run_encoder(x, tr);
    const auto stats = split_stats(tr.stats);
    const auto sample = reparameterize(stats, eps);
    tr.z = nn::Tensor(1, config_.latent_length);
    tr.z.data = sample.z;
    run_decoder(tr.z, tr);
    return tr;
  }

  /// Layer pairs compared by the perceptual loss, l = 0 first.
  std::vector<ActivationPair> activation_pairs(const Trace& tr) const {
    const std::size_t L = config_.stages();
    std::vector<ActivationPair> pairs;
    pairs.push_back({&tr.enc_act[0], &tr.dec_act[L]});
    for (std::size_t l = 1; l < L; ++l) pairs.push_back({&tr.enc_act[l], &tr.dec_act[L - l]});
    return pairs;
  }

  /// Total loss for one day under a given latent noise draw.
  double loss(const nn::Tensor& x, std::span<const double> eps) const {
    const auto tr = trace(x, eps);
    const auto pairs = activation_pairs(tr);
    return perceptual_objective(pairs, split_stats(tr.stats), config_.kl_weight);
  }

  /// Deterministic loss (eps = 0, i.e. z = mu).
  double perceptual_loss(const nn::Tensor& x) const {
    const std::vector<double> zero(config_.latent_length, 0.0);
    return loss(x, zero);
  }

  /// Adds weight * d(loss)/d(theta) into the parameter gradients; returns the loss.
  double accumulate_gradients(const nn::Tensor& x, std::span<const double> eps, double weight) {
    const std::size_t L = config_.stages();
    const std::size_t T = config_.latent_length;
    const auto tr = trace(x, eps);
    const auto pairs = activation_pairs(tr);
    const auto stats = split_stats(tr.stats);
    const double value = perceptual_objective(pairs, stats, config_.kl_weight);
    const double pair_weight = weight / static_cast<double>(pairs.size());

    // L1 pair gradients into encoder activation l and decoder activation L - l.
    std::vector<nn::Tensor> g_enc(L + 1), g_dec(L + 1);
    for (std::size_t l = 0; l <= L; ++l) {
      g_enc[l] = nn::Tensor(tr.enc_act[l].channels, tr.enc_act[l].length);
      g_dec[l] = nn::Tensor(tr.dec_act[l].channels, tr.dec_act[l].length);
    }
    for (std::size_t l = 0; l < L; ++l) {
      const auto& a = tr.enc_act[l];
      const auto& b = tr.dec_act[L - l];
      const double scale = pair_weight / static_cast<double>(a.size());
      for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a.data[i] - b.data[i];
        const double s = d > 0.0 ? scale : (d < 0.0 ? -scale : 0.0);
        g_enc[l].data[i] += s;
        g_dec[L - l].data[i] -= s;
      }
    }

    // Decoder, last stage first.
    nn::Tensor g = g_dec[L];
    if (refined()) g = refine_.backward(tr.refine_act, g);  // SiLU handled in the loop
    for (std::size_t k = L; k >= 1; --k) {
      const nn::Tensor gpre = (k == L && !refined()) ? g : nn::silu_backward(tr.dec_pre[k], g);
      g = dec_[k - 1].backward(tr.dec_act[k - 1], gpre);
      for (std::size_t i = 0; i < g.size(); ++i) g.data[i] += g_dec[k - 1].data[i];
    }
    const nn::Tensor gz = dec_in_.backward(tr.z, nn::silu_backward(tr.dec_pre[0], g));

    // Through the reparameterization and the KL term into (mu, log_var).
    nn::Tensor gstats(2, T);
    const double kl_scale = weight * config_.kl_weight / static_cast<double>(T);
    for (std::size_t i = 0; i < T; ++i) {
      const double lv = stats.log_var[i];
      gstats(0, i) = gz.data[i] + kl_scale * stats.mu[i];
      gstats(1, i) = gz.data[i] * 0.5 * std::exp(0.5 * lv) * eps[i] + kl_scale * 0.5 * (std::exp(lv) - 1.0);
    }
    const nn::Tensor deep = tr.enc_act[L].reshaped(1, tr.enc_act[L].size());
    g = head_.backward(deep, gstats).reshaped(deep_channels_, deep_length_);

    // Encoder, deepest stage first.
    for (std::size_t l = L; l >= 1; --l) {
      if (l < L) {
        for (std::size_t i = 0; i < g.size(); ++i) g.data[i] += g_enc[l].data[i];
      }
      g = enc_[l - 1].backward(tr.enc_act[l - 1], nn::silu_backward(tr.enc_pre[l - 1], g));
    }
    return value;
  }

  // -- persistence ------------------------------------------------------------

  void save(const std::string& path) {
    ParamsBlob blob;
    blob.kind = "vae";
    blob.fingerprint = fingerprint();
    blob.metadata = {{"config", config_.to_json()}, {"norm_stats", norm_.to_json()}};
    blob.values = nn::flatten_values(params());
    save_params(path, blob);
  }

  static VAEParams load(const std::string& path) {
    const auto blob = load_params(path, "vae");
    VAEParams p(VAEConfig::from_json(blob.metadata.at("config")));
    if (p.fingerprint() != blob.fingerprint) throw ConfigError("vae fingerprint mismatch in '" + path + "'");
    if (blob.values.size() != nn::parameter_count(p.params())) {
      throw ConfigError("vae parameter count does not match its config");
    }
    nn::assign_values(p.params(), blob.values);
    p.set_norm(NormStats::from_json(blob.metadata.at("norm_stats")));
    return p;
  }

 private:
  static void append(nn::ParamList& out, const nn::ParamList& more) { out.insert(out.end(), more.begin(), more.end()); }

  static void check_input(const nn::Tensor& x) {
    if (x.channels != kFeatureCount || x.length != kHoursPerDay) throw DimensionError("expected a 4x24 day");
    for (double v : x.data) {
      if (!std::isfinite(v)) throw DimensionError("non-finite value in day array");
    }
  }

  LatentStats split_stats(const nn::Tensor& s) const {
    const std::size_t T = config_.latent_length;
    LatentStats out{std::vector<double>(T), std::vector<double>(T)};
    for (std::size_t i = 0; i < T; ++i) {
      out.mu[i] = s(0, i);
      out.log_var[i] = s(1, i);
    }
    return out;
  }

  void run_encoder(const nn::Tensor& x, Trace& tr) const {
    tr.enc_act.push_back(x);
    for (const auto& c : enc_) {
      tr.enc_pre.push_back(c.forward(tr.enc_act.back()));
      tr.enc_act.push_back(nn::silu(tr.enc_pre.back()));
    }
    tr.stats = head_.forward(tr.enc_act.back());
  }

  void run_decoder(const nn::Tensor& z, Trace& tr) const {
    tr.dec_pre.push_back(dec_in_.forward(z));
    tr.dec_act.push_back(nn::silu(tr.dec_pre.back()));
    for (std::size_t s = 0; s < dec_.size(); ++s) {
      tr.dec_pre.push_back(dec_[s].forward(tr.dec_act.back()));
      const bool last = s + 1 == dec_.size();
      if (!last) {
        tr.dec_act.push_back(nn::silu(tr.dec_pre.back()));
      } else if (refined()) {
        tr.refine_act = nn::silu(tr.dec_pre.back());
        tr.dec_act.push_back(refine_.forward(tr.refine_act));
      } else {
        tr.dec_act.push_back(tr.dec_pre.back());
      }
    }
  }

  bool refined() const { return config_.refine_channels > 0; }

  VAEConfig config_;
  NormStats norm_{};
  std::size_t deep_channels_ = 0, deep_length_ = 0;
  std::vector<nn::Conv1d> enc_;
  nn::Linear head_;
  nn::Linear dec_in_;
  std::vector<nn::ConvTranspose1d> dec_;
  nn::Conv1d refine_;
};

// ---------------------------------------------------------------------------
// Training

struct VAEEpochLog {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_mae = 0.0;       // mean absolute reconstruction error, normalized units
  double best_val_loss = 0.0;
};

struct VAETrainResult {
  VAEParams params;
  std::vector<VAEEpochLog> log;
  double initial_val_mae = 0.0;
};

/// Mean over days and features of |x - decode(mu(x))|, normalized units.
inline double reconstruction_mae(const VAEParams& vae, std::span<const nn::Tensor> days) {
  if (days.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& x : days) {
    const auto rec = vae.decode(LatentSample{vae.encode(x).mu});
    sum += mean_abs_diff(x, rec);
  }
  return sum / static_cast<double>(days.size());
}

inline std::vector<nn::Tensor> day_tensors(const std::vector<HourlySeries>& segments) {
  std::vector<nn::Tensor> out;
  for (const auto& s : segments)
    for (const auto& d : s) out.push_back(day_to_tensor(d));
  return out;
}

/**
 * @brief Fits the VAE on already-normalized training days, keeping the
 *        parameters with the best validation loss.
 */
inline VAETrainResult train_vae(const std::vector<nn::Tensor>& train, const std::vector<nn::Tensor>& validation,
                                const VAEConfig& config) {
  config.validate();
  if (train.size() < 2) throw InsufficientDataError("vae training needs at least 2 days");
  const auto& val = validation.empty() ? train : validation;

  VAEParams model(config);
  model.init(config.seed);
  auto params = model.params();
  nn::Adam opt(config.learning_rate);
  std::mt19937_64 rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  std::normal_distribution<double> normal(0.0, 1.0);

  const auto val_loss_of = [&](const VAEParams& m) {
    double s = 0.0;
    for (const auto& x : val) s += m.perceptual_loss(x);
    return s / static_cast<double>(val.size());
  };

  VAETrainResult result{model, {}, reconstruction_mae(model, val)};
  double best = val_loss_of(model);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> eps(config.latent_length);

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double train_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      const double w = 1.0 / static_cast<double>(end - start);
      nn::zero_grad(params);
      for (std::size_t b = start; b < end; ++b) {
        for (auto& e : eps) e = normal(rng);
        train_sum += model.accumulate_gradients(train[order[b]], eps, w);
      }
      opt.step(params);
    }
    const double train_loss = train_sum / static_cast<double>(order.size());
    const double vl = val_loss_of(model);
    if (!std::isfinite(train_loss) || !std::isfinite(vl)) {
      throw TrainingError("vae loss diverged at epoch " + std::to_string(epoch));
    }
    if (vl < best) {
      best = vl;
      result.params = model;
    }
    result.log.push_back({epoch, train_loss, vl, reconstruction_mae(model, val), best});
  }
  return result;
}

/// Splits a normalized hourly series by whole days and trains on it.
inline VAETrainResult train_vae(const HourlySeries& normalized, const VAEConfig& config) {
  config.validate();
  if (normalized.size() < 2) throw InsufficientDataError("vae training needs at least 2 days");
  if (normalized.size() < 3) return train_vae(day_tensors({normalized}), {}, config);
  const auto split = split_days(normalized, config.train_fraction, config.seed);
  return train_vae(day_tensors(split.train), day_tensors(split.validation), config);
}

}  // namespace srdm

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>

#include "grad_check.hpp"
#include "oracle_values.hpp"
#include "srdm/pipeline.hpp"
#include "srdm/synth.hpp"
#include "srdm/vae.hpp"

using namespace srdm;

namespace {

nn::Tensor random_day(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  nn::Tensor x(kFeatureCount, kHoursPerDay);
  for (auto& v : x.data) v = n(rng);
  return x;
}

std::vector<double> random_vec(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d(0.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

VAEParams fresh_vae(VAEConfig c = {}) {
  VAEParams p(c);
  p.init(c.seed);
  return p;
}

/// Trained once on the 200-day oracle dataset and shared by several tests.
struct TrainedVae {
  HourlySeries physical;
  VAETrainResult result;
  std::vector<nn::Tensor> validation;

  static const TrainedVae& get() {
    static const TrainedVae instance = [] {
      TrainedVae t;
      SynthConfig sc;
      sc.days = 200;
      t.physical = synth_generate(sc).first;
      VAEConfig vc;
      t.result = fit_vae(t.physical, vc);
      const auto split = normalized_split(t.physical, t.result.params.norm(), vc.train_fraction, vc.seed);
      t.validation = day_tensors(split.validation);
      return t;
    }();
    return instance;
  }
};

}  // namespace

TEST(Nn, ConvShapes) {
  std::mt19937_64 rng(1);
  nn::Conv1d conv(4, 8, 5, 2, 2);
  conv.init(rng);
  const auto y = conv.forward(random_day(1));
  EXPECT_EQ(y.channels, 8u);
  EXPECT_EQ(y.length, 12u);
  nn::ConvTranspose1d up(8, 4, 5, 2, 2, 1);
  up.init(rng);
  const auto z = up.forward(y);
  EXPECT_EQ(z.channels, 4u);
  EXPECT_EQ(z.length, 24u);
}

TEST(Reparameterize, Examples) {
  const LatentStats s{{1.0}, {std::log(4.0)}};
  EXPECT_DOUBLE_EQ(reparameterize(s, std::vector<double>{0.5}).z[0], 2.0);
  EXPECT_DOUBLE_EQ(reparameterize(s, std::vector<double>{0.0}).z[0], 1.0);
  const LatentStats unit{{0.0, 0.0}, {0.0, 0.0}};
  const std::vector<double> e{0.3, -1.7};
  EXPECT_EQ(reparameterize(unit, e).z, e);
}

TEST(Reparameterize, AffineInEps) {
  const LatentStats s{random_vec(24, 1), random_vec(24, 2)};
  const auto eps = random_vec(24, 3);
  std::vector<double> scaled = eps;
  for (auto& v : scaled) v *= 3.0;
  const auto a = reparameterize(s, eps).z;
  const auto b = reparameterize(s, scaled).z;
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(b[i] - s.mu[i], 3.0 * (a[i] - s.mu[i]), 1e-12);
  EXPECT_THROW(reparameterize(s, std::vector<double>(3)), DimensionError);
}

TEST(KlDivergence, ClosedForm) {
  EXPECT_NEAR(kl_divergence({{0.0}, {0.0}}), 0.0, 1e-12);
  EXPECT_NEAR(kl_divergence({{1.0}, {0.0}}), 0.5, 1e-12);
  EXPECT_NEAR(kl_divergence({{0.0}, {1.0}}), oracle::kKlMu0VarE, 1e-12);
  EXPECT_NEAR(kl_divergence({{0.0}, {1.0}}), 0.3591, 1e-4);
}

TEST(KlDivergence, NonNegativeZeroOnlyAtPrior) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n(0.0, 2.0);
  for (int i = 0; i < 1000; ++i) {
    const LatentStats s{{n(rng), n(rng)}, {n(rng), n(rng)}};
    EXPECT_GT(kl_divergence(s), 0.0);
  }
  EXPECT_LT(kl_divergence({{0.0, 0.0}, {0.0, 0.0}}), 1e-12);
}

TEST(Vae, ShapesAndDeterminism) {
  const auto vae = fresh_vae();
  const auto x = random_day(7);
  const auto a = vae.encode(x);
  EXPECT_EQ(a.mu.size(), 24u);
  EXPECT_EQ(a.log_var.size(), 24u);
  const auto b = vae.encode(x);
  EXPECT_EQ(a.mu, b.mu);
  EXPECT_EQ(a.log_var, b.log_var);
  const auto y = vae.decode(LatentSample{a.mu});
  EXPECT_EQ(y.channels, kFeatureCount);
  EXPECT_EQ(y.length, kHoursPerDay);
  EXPECT_EQ(y, vae.decode(LatentSample{a.mu}));
  for (double v : y.data) EXPECT_TRUE(std::isfinite(v));
}

TEST(Vae, RejectsBadInput) {
  const auto vae = fresh_vae();
  auto x = random_day(1);
  x.data[17] = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(vae.encode(x), Error);
  EXPECT_THROW(vae.encode(nn::Tensor(3, 24)), DimensionError);
  EXPECT_THROW(vae.decode(LatentSample{std::vector<double>(5)}), DimensionError);
}

TEST(PerceptualLoss, ZeroDistanceAndLambdaLinearity) {
  nn::Tensor a = random_day(2);
  const std::vector<ActivationPair> same{{&a, &a}};
  EXPECT_DOUBLE_EQ(perceptual_objective(same, {{0.0, 0.0}, {0.0, 0.0}}, 0.02), 0.0);

  VAEConfig c;
  c.kl_weight = 0.0;
  const auto x = random_day(3);
  const auto vae0 = fresh_vae(c);
  const auto tr = vae0.trace(x, std::vector<double>(24, 0.0));
  const auto pairs = vae0.activation_pairs(tr);
  double rec = 0.0;
  for (const auto& p : pairs) rec += mean_abs_diff(*p.encoder, *p.decoder);
  rec /= static_cast<double>(pairs.size());
  EXPECT_NEAR(vae0.perceptual_loss(x), rec, 1e-14);

  const LatentStats stats{random_vec(24, 5), random_vec(24, 6)};
  const double kl = kl_divergence(stats);
  const double l1 = perceptual_objective(pairs, stats, 0.02);
  const double l2 = perceptual_objective(pairs, stats, 0.04);
  EXPECT_NEAR(l2 - l1, 0.02 * kl, 1e-12);
}

TEST(Vae, GradientCheck) {
  for (std::size_t refine : {0u, 8u}) {
    VAEConfig c;
    c.refine_channels = refine;
    auto vae = fresh_vae(c);
    const auto x = random_day(11);
    const auto eps = random_vec(24, 12);
    const auto params = vae.params();
    const auto r = testutil::check_gradients(
        params, [&] { return vae.loss(x, eps); }, [&] { vae.accumulate_gradients(x, eps, 1.0); }, 10, 99);
    EXPECT_LT(r.max_rel_error, 1e-3) << "refine_channels=" << refine;
  }
}

TEST(Vae, SaveLoadRoundTrip) {
  auto vae = fresh_vae();
  vae.set_norm(compute_norm_stats(synth_generate(SynthConfig{}).first));
  const auto path = std::filesystem::temp_directory_path() / "srdm_test_vae.params";
  vae.save(path.string());
  const auto back = VAEParams::load(path.string());
  EXPECT_EQ(back.fingerprint(), vae.fingerprint());
  EXPECT_EQ(back.norm(), vae.norm());
  const auto x = random_day(4);
  EXPECT_EQ(back.encode(x).mu, vae.encode(x).mu);
  std::filesystem::remove(path);
}

TEST(VaeTraining, OneDayIsInsufficient) {
  SynthConfig sc;
  sc.days = 1;
  const auto h = synth_generate(sc).first;
  EXPECT_THROW(fit_vae(h, VAEConfig{}), InsufficientDataError);
  EXPECT_THROW(train_vae(h, VAEConfig{}), InsufficientDataError);
}

TEST(VaeTraining, SameSeedSameFinalLoss) {
  SynthConfig sc;
  sc.days = 30;
  const auto h = synth_generate(sc).first;
  VAEConfig vc;
  vc.epochs = 3;
  const auto a = fit_vae(h, vc);
  const auto b = fit_vae(h, vc);
  EXPECT_EQ(a.log.back().train_loss, b.log.back().train_loss);
  EXPECT_EQ(a.log.back().val_loss, b.log.back().val_loss);
}

TEST(VaeTraining, ReconstructionImprovesByHalf) {
  const auto& t = TrainedVae::get();
  const double final_mae = reconstruction_mae(t.result.params, t.validation);
  EXPECT_LE(final_mae, 0.5 * t.result.initial_val_mae)
      << "initial " << t.result.initial_val_mae << " final " << final_mae;
}

TEST(VaeTraining, PriorSamplesArePlausible) {
  const auto& t = TrainedVae::get();
  const auto& vae = t.result.params;
  std::array<double, kFeatureCount> lo{}, hi{};
  lo.fill(1e300);
  hi.fill(-1e300);
  for (const auto& d : t.physical)
    for (const auto& h : d.hours)
      for (std::size_t f = 0; f < kFeatureCount; ++f) {
        lo[f] = std::min(lo[f], h[f]);
        hi[f] = std::max(hi[f], h[f]);
      }
  const auto& norm = vae.norm();
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0.0, 1.0);
  std::array<int, kFeatureCount> inside{};
  const int draws = 1000;
  for (int k = 0; k < draws; ++k) {
    std::vector<double> z(vae.latent_length());
    for (auto& v : z) v = n(rng);
    const auto day = denormalize(tensor_to_day(vae.decode(LatentSample{z}), Date(2025, 1, 1)), norm);
    for (std::size_t f = 0; f < kFeatureCount; ++f) {
      bool ok = true;
      for (const auto& h : day.hours) {
        ok = ok && h[f] >= lo[f] - 2.0 * norm.std[f] && h[f] <= hi[f] + 2.0 * norm.std[f];
      }
      inside[f] += ok ? 1 : 0;
    }
  }
  for (std::size_t f = 0; f < kFeatureCount; ++f) EXPECT_GE(inside[f], 990) << kFeatureNames[f];
}

#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <random>

#include "grad_check.hpp"
#include "oracle_values.hpp"
#include "srdm/diffusion.hpp"
#include "srdm/pipeline.hpp"
#include "srdm/synth.hpp"

using namespace srdm;

namespace {

std::vector<double> random_vec(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> d(0.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

nn::Tensor random_day(std::mt19937_64& rng) {
  nn::Tensor x(kFeatureCount, kHoursPerDay);
  x.data = random_vec(x.size(), rng);
  return x;
}

DenoiserParams fresh_denoiser(DiffusionConfig c = {}) {
  DenoiserParams p(c, 24);
  p.init(c.seed);
  return p;
}

void expect_schedule_identities(const NoiseSchedule& s) {
  EXPECT_EQ(s.beta_tilde(1), 0.0);
  for (std::size_t n = 1; n <= s.steps(); ++n) {
    EXPECT_NEAR(s.beta_tilde(n) * (1.0 - s.alpha_bar(n)), s.beta(n) * (1.0 - s.alpha_bar(n - 1)), 1e-12);
    EXPECT_NEAR(s.alpha(n), 1.0 - s.beta(n), 1e-12);
    if (n > 1) {
      EXPECT_LT(s.alpha_bar(n), s.alpha_bar(n - 1));
      EXPECT_GE(s.beta(n), s.beta(n - 1));
    }
  }
}

}  // namespace

TEST(Schedule, SingleStepExample) {
  const auto s = NoiseSchedule::from_betas({0.19});
  EXPECT_NEAR(s.alpha(1), 0.81, 1e-15);
  EXPECT_NEAR(s.alpha_bar(1), 0.81, 1e-15);
  EXPECT_EQ(s.beta_tilde(1), 0.0);
}

TEST(Schedule, TwoStepExample) {
  const auto s = NoiseSchedule::from_betas({0.1, 0.2});
  EXPECT_NEAR(s.alpha_bar(1), 0.9, 1e-15);
  EXPECT_NEAR(s.alpha_bar(2), 0.72, 1e-15);
  EXPECT_NEAR(s.beta_tilde(2), 0.2 * 0.1 / 0.28, 1e-15);
}

TEST(Schedule, IdentitiesForSeveralLengths) {
  expect_schedule_identities(build_schedule(1, 1e-4, 0.1));
  expect_schedule_identities(NoiseSchedule::from_betas({0.1, 0.2}));
  expect_schedule_identities(build_schedule(2, 1e-4, 0.1));
  expect_schedule_identities(build_schedule(100, 1e-4, 0.1));
  expect_schedule_identities(build_schedule(100, 1e-4, 0.05));
}

TEST(Schedule, LinearSpacingAndDefaultPrior) {
  const auto s = build_schedule(100, 1e-4, 0.1);
  EXPECT_DOUBLE_EQ(s.beta(1), 1e-4);
  EXPECT_DOUBLE_EQ(s.beta(100), 0.1);
  EXPECT_NEAR(s.beta(51) - s.beta(50), (0.1 - 1e-4) / 99.0, 1e-15);
  EXPECT_NEAR(s.alpha_bar(100), oracle::kAlphaBarDefault, 1e-12);
  EXPECT_LT(s.alpha_bar(100), 0.01);
}

TEST(Schedule, InvalidInputs) {
  EXPECT_THROW(build_schedule(10, 0.2, 0.1), ConfigError);
  EXPECT_THROW(build_schedule(0, 1e-4, 0.1), ConfigError);
  EXPECT_THROW(NoiseSchedule::from_betas({0.2, 0.1}), ConfigError);
  EXPECT_THROW(NoiseSchedule::from_betas({1.0}), ConfigError);
  EXPECT_THROW(build_schedule(3, 1e-4, 0.1).beta(4), IndexError);
}

TEST(ForwardDiffuse, Limits) {
  const auto s = build_schedule(100, 1e-4, 0.1);
  const std::vector<double> z0{1.0, -2.0, 0.5};
  const std::vector<double> zero(3, 0.0);
  const std::vector<double> eps{0.3, 0.7, -1.1};
  const auto a = forward_diffuse(z0, 40, s, zero);
  const auto b = forward_diffuse(zero, 40, s, eps);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_DOUBLE_EQ(a[i], std::sqrt(s.alpha_bar(40)) * z0[i]);
    EXPECT_DOUBLE_EQ(b[i], std::sqrt(1.0 - s.alpha_bar(40)) * eps[i]);
  }
}

TEST(ForwardDiffuse, TerminalMarginalIsStandardNormal) {
  const auto s = build_schedule(100, 1e-4, 0.1);
  std::mt19937_64 rng(17);
  const std::size_t dims = 24, draws = 10000;
  std::vector<double> sum(dims, 0.0), sq(dims, 0.0);
  const std::vector<double> z0(dims, 0.0);
  for (std::size_t k = 0; k < draws; ++k) {
    const auto z = forward_diffuse(z0, 100, s, random_vec(dims, rng));
    for (std::size_t i = 0; i < dims; ++i) {
      sum[i] += z[i];
      sq[i] += z[i] * z[i];
    }
  }
  for (std::size_t i = 0; i < dims; ++i) {
    const double mean = sum[i] / draws;
    const double var = sq[i] / draws - mean * mean;
    EXPECT_NEAR(mean, 0.0, 0.05);
    EXPECT_NEAR(var, 1.0, 0.05);
  }
}

TEST(ForwardDiffuse, ClosedFormMatchesIteratedSteps) {
  const auto s = NoiseSchedule::from_betas({0.1, 0.25, 0.4});
  std::mt19937_64 rng(3);
  const std::vector<double> z0{1.5, -0.5};
  const std::size_t trials = 100000;
  std::vector<double> sum(2, 0.0), sq(2, 0.0);
  for (std::size_t k = 0; k < trials; ++k) {
    std::vector<double> z = z0;
    for (std::size_t n = 1; n <= 3; ++n) z = forward_step(z, n, s, random_vec(2, rng));
    for (std::size_t i = 0; i < 2; ++i) {
      sum[i] += z[i];
      sq[i] += z[i] * z[i];
    }
  }
  for (std::size_t i = 0; i < 2; ++i) {
    const double mean = sum[i] / trials;
    EXPECT_NEAR(mean, std::sqrt(s.alpha_bar(3)) * z0[i], 0.02);
    EXPECT_NEAR(sq[i] / trials - mean * mean, 1.0 - s.alpha_bar(3), 0.02);
  }
}

TEST(DenoiseStep, SingleStepExample) {
  const auto s = NoiseSchedule::from_betas({0.19});
  const auto z0 = denoise_step(std::vector<double>{0.9}, 1, std::vector<double>{0.0}, s, {});
  EXPECT_NEAR(z0[0], 1.0, 1e-15);
}

TEST(DenoiseStep, SmallBetaIsNearIdentity) {
  const auto s = NoiseSchedule::from_betas({1e-12, 1e-12});
  const std::vector<double> z{0.4, -1.3};
  const std::vector<double> zero(2, 0.0);
  const auto out = denoise_step(z, 2, zero, s, zero);
  for (std::size_t i = 0; i < 2; ++i) EXPECT_NEAR(out[i], z[i], 1e-9);
}

TEST(DenoiseStep, InvertsForwardAtFirstStep) {
  std::mt19937_64 rng(8);
  for (double beta : {1e-4, 0.05, 0.19, 0.5}) {
    const auto s = NoiseSchedule::from_betas({beta});
    const auto z0 = random_vec(24, rng);
    const auto eps = random_vec(24, rng);
    const auto back = denoise_step(forward_diffuse(z0, 1, s, eps), 1, eps, s, {});
    for (std::size_t i = 0; i < z0.size(); ++i) EXPECT_NEAR(back[i], z0[i], 1e-9);
  }
}

TEST(DiffusionLoss, Examples) {
  const auto s = NoiseSchedule::from_betas({0.1, 0.2});
  const std::vector<double> eps{1.0, 0.0};
  EXPECT_DOUBLE_EQ(diffusion_loss(eps, eps, 1, s, LossWeighting::kSimple), 0.0);
  EXPECT_DOUBLE_EQ(diffusion_loss(eps, std::vector<double>{0.0, 0.0}, 1, s, LossWeighting::kSimple), 0.5);
  const double bt = 0.2 * 0.1 / 0.28;
  const double w = 0.2 * 0.2 / (2.0 * 0.8 * (1.0 - 0.72) * bt);
  EXPECT_NEAR(elbo_weight(2, s), w, 1e-12);
  EXPECT_NEAR(diffusion_loss(eps, std::vector<double>{0.0, 0.0}, 2, s, LossWeighting::kElbo), 0.5 * w, 1e-12);
  EXPECT_THROW(elbo_weight(1, s), ConfigError);
}

TEST(DiffusionLoss, PermutationInvariant) {
  std::mt19937_64 rng(5);
  const auto s = build_schedule(10, 1e-4, 0.1);
  auto a = random_vec(24, rng);
  auto b = random_vec(24, rng);
  const double base = diffusion_loss(a, b, 3, s, LossWeighting::kSimple);
  std::vector<std::size_t> perm(24);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<double> pa(24), pb(24);
  for (std::size_t i = 0; i < 24; ++i) {
    pa[i] = a[perm[i]];
    pb[i] = b[perm[i]];
  }
  EXPECT_NEAR(diffusion_loss(pa, pb, 3, s, LossWeighting::kSimple), base, 1e-14);
}

TEST(Embedding, ShapesDeterminismAndStepDependence) {
  const auto d = fresh_denoiser();
  std::mt19937_64 rng(1);
  const auto x = random_day(rng);
  const FeatureVector xbar{0.1, -0.2, 0.3, 0.4};
  const auto z = random_vec(24, rng);
  const auto a = d.embed_conditions(x, xbar, 10, z);
  EXPECT_EQ(a.z_e.length, d.latent_steps());
  for (std::size_t g = 0; g < 4; ++g) EXPECT_GT(a.group_channels[g], 0u);
  EXPECT_EQ(a.z_e.channels, a.group_channels[0] + a.group_channels[1] + a.group_channels[2] + a.group_channels[3]);
  EXPECT_EQ(a.z_e, d.embed_conditions(x, xbar, 10, z).z_e);

  const auto b = d.embed_conditions(x, xbar, 11, z);
  using G = EmbeddingBundle::Group;
  EXPECT_NE(a.group(G::kStep), b.group(G::kStep));
  for (G g : {G::kPrevious, G::kLowRes, G::kNoisy}) EXPECT_EQ(a.group(g), b.group(g));

  const auto eps = d.predict_noise(a);
  EXPECT_EQ(eps.size(), 24u);
  EXPECT_EQ(eps, d.predict_noise(a));
  EXPECT_EQ(eps, d.predict_noise(x, xbar, 10, z));
}

TEST(Denoiser, GradientCheck) {
  for (auto weighting : {LossWeighting::kSimple, LossWeighting::kElbo}) {
    DiffusionConfig c;
    c.weighting = weighting;
    auto d = fresh_denoiser(c);
    std::mt19937_64 rng(21);
    const auto x = random_day(rng);
    const FeatureVector xbar{0.5, -0.1, 1.2, -0.7};
    const auto z = random_vec(24, rng);
    const auto eps = random_vec(24, rng);
    const auto params = d.params();
    const auto r = testutil::check_gradients(
        params, [&] { return d.loss(x, xbar, 37, z, eps); },
        [&] { d.accumulate_gradients(x, xbar, 37, z, eps, 1.0); }, 10, 7);
    EXPECT_LT(r.max_rel_error, 1e-3);
  }
}

TEST(Denoiser, SaveLoadAndFingerprint) {
  auto d = fresh_denoiser();
  d.set_latent_scale(1.7);
  d.set_vae_fingerprint("abc");
  const auto path = std::filesystem::temp_directory_path() / "srdm_test_denoiser.params";
  d.save(path.string());
  const auto back = DenoiserParams::load(path.string());
  EXPECT_EQ(back.fingerprint(), d.fingerprint());
  EXPECT_EQ(back.latent_scale(), 1.7);
  EXPECT_EQ(back.vae_fingerprint(), "abc");
  std::mt19937_64 rng(2);
  const auto x = random_day(rng);
  const auto z = random_vec(24, rng);
  EXPECT_EQ(back.predict_noise(x, {}, 5, z), d.predict_noise(x, {}, 5, z));
  std::filesystem::remove(path);
}

TEST(DenoiserTraining, NoPairsIsInsufficient) {
  VAEParams vae;
  vae.init(1);
  EXPECT_THROW(train_denoiser(std::vector<std::pair<HighResDay, HighResDay>>{}, {}, vae, DiffusionConfig{}),
               InsufficientDataError);
}

TEST(DenoiserTraining, DeterministicForSameSeed) {
  SynthConfig sc;
  sc.days = 30;
  const auto h = synth_generate(sc).first;
  VAEConfig vc;
  vc.epochs = 2;
  const auto vae = fit_vae(h, vc).params;
  DiffusionConfig dc;
  dc.iterations = 20;
  dc.eval_every = 10;
  const auto a = fit_denoiser(h, vae, dc);
  const auto b = fit_denoiser(h, vae, dc);
  EXPECT_EQ(a.log.back().train_loss, b.log.back().train_loss);
  EXPECT_EQ(a.log.back().val_loss, b.log.back().val_loss);
}

TEST(DenoiserTraining, ValidationLossHalves) {
  SynthConfig sc;
  sc.days = 200;
  const auto h = synth_generate(sc).first;
  const auto vae = fit_vae(h, VAEConfig{}).params;
  const auto r = fit_denoiser(h, vae, DiffusionConfig{});
  EXPECT_LE(r.log.back().best_val_loss, 0.5 * r.initial_val_loss)
      << "initial " << r.initial_val_loss << " best " << r.log.back().best_val_loss;
}

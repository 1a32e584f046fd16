#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>

#include "srdm/config.hpp"

using namespace srdm;

namespace {

std::string write_temp(const std::string& name, const std::string& contents) {
  const auto path = (std::filesystem::temp_directory_path() / name).string();
  text::write_file(path, contents);
  return path;
}

}  // namespace

TEST(Config, DefaultsMatchDocumentedValues) {
  const RunConfig c;
  EXPECT_EQ(c.wind.cut_in, 3.0);
  EXPECT_EQ(c.wind.rated_speed, 13.0);
  EXPECT_EQ(c.wind.cut_out, 25.0);
  EXPECT_EQ(c.wind.hub_height, 100.0);
  EXPECT_EQ(c.wind.roughness, 0.018);
  EXPECT_EQ(c.pv.temp_coeff, -0.0028);
  EXPECT_EQ(c.vae.kl_weight, 0.02);
  EXPECT_EQ(c.alpha, 0.05);
  EXPECT_EQ(c.diffusion.steps, 100u);
  EXPECT_NO_THROW(c.validate());
}

TEST(Config, JsonRoundTrip) {
  RunConfig c;
  c.wind.cut_in = 2.8;
  c.generation.members = 7;
  c.synth.start = Date(2030, 5, 1);
  c.diffusion.weighting = LossWeighting::kElbo;
  RunConfig back;
  apply_json(back, to_json(c));
  EXPECT_EQ(to_json(back), to_json(c));
  EXPECT_EQ(back.synth.start, Date(2030, 5, 1));
}

TEST(Config, UnknownKeysAndBadValuesRejected) {
  RunConfig c;
  EXPECT_THROW(apply_json(c, {{"no_such_key", 1}}), ConfigError);
  EXPECT_THROW(apply_override(c, "members"), ConfigError);
  EXPECT_THROW(apply_override(c, "initial_day=yesterday"), ConfigError);
  EXPECT_THROW(apply_override(c, "members=\"three\""), ConfigError);
  RunConfig bad;
  bad.pv.temp_coeff = 0.01;
  EXPECT_THROW(bad.validate(), ValidationError);
}

TEST(Config, OverridesParseJsonOrPlainStrings) {
  RunConfig c;
  apply_override(c, "wind_cut_in=2.6");
  apply_override(c, "pathway=SSP585");
  apply_override(c, "pathway=\"SSP126\"");
  apply_override(c, "synth_noise=[0,0,0,0]");
  EXPECT_EQ(c.wind.cut_in, 2.6);
  EXPECT_EQ(c.generation.pathway, "SSP126");
  EXPECT_EQ(c.synth.noise[2], 0.0);
}

TEST(Config, PrecedenceDefaultFileEnvFlag) {
  const auto path = write_temp("srdm_test_config.json", R"({"output_dir": "from_file", "members": 4, "wind_cut_in": 2.9})");
  ::unsetenv("SRDM_OUTPUT_DIR");
  auto c = resolve_config(path, {});
  EXPECT_EQ(c.output_dir, "from_file");
  EXPECT_EQ(c.generation.members, 4u);
  ::setenv("SRDM_OUTPUT_DIR", "from_env", 1);
  c = resolve_config(path, {});
  EXPECT_EQ(c.output_dir, "from_env");
  EXPECT_EQ(c.wind.cut_in, 2.9);
  c = resolve_config(path, {"output_dir=from_flag", "members=9"});
  EXPECT_EQ(c.output_dir, "from_flag");
  EXPECT_EQ(c.generation.members, 9u);
  ::unsetenv("SRDM_OUTPUT_DIR");
  EXPECT_EQ(resolve_config("", {}).output_dir, "srdm_out");
  std::filesystem::remove(path);
}

TEST(Config, MalformedFileIsParseError) {
  const auto path = write_temp("srdm_test_bad_config.json", "{not json");
  EXPECT_THROW(load_config_file(path), ParseError);
  std::filesystem::remove(path);
}

TEST(Config, ResolvedPathsDeriveFromOutputDir) {
  RunConfig c;
  c.output_dir = "run1";
  EXPECT_EQ(c.resolved_hourly(), (std::filesystem::path("run1") / "hourly.csv").string());
  EXPECT_EQ(c.resolved_ensemble(), (std::filesystem::path("run1") / "ensemble").string());
  c.ensemble_dir = "elsewhere";
  EXPECT_EQ(c.resolved_ensemble(), "elsewhere");
}

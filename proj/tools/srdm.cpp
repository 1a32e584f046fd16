// srdm: command-line pipeline — synth -> train -> generate -> convert -> analyze.
//
// Exit codes: 0 success, 1 internal error, 2 user/configuration error.

#include <chrono>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "srdm/srdm.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInternal = 1;
constexpr int kExitUser = 2;

std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// Wall-clock stage timer feeding the run manifest.
class Timings {
 public:
  void start(const std::string& stage) {
    stage_ = stage;
    t0_ = std::chrono::steady_clock::now();
  }
  void stop() {
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
    j_[stage_] = s;
  }
  const json& json_value() const { return j_; }

 private:
  std::string stage_;
  std::chrono::steady_clock::time_point t0_;
  json j_ = json::object();
};

/// Options shared by every subcommand.
struct Common {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string output_dir;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config_path, "flat JSON config file")->check(CLI::ExistingFile);
  app->add_option("--set", c.overrides, "override a config key (key=value), repeatable");
  app->add_option("--output-dir", c.output_dir, "output directory (overrides config and SRDM_OUTPUT_DIR)");
}

srdm::RunConfig resolve(const Common& c, std::vector<std::string> extra) {
  std::vector<std::string> all = c.overrides;
  all.insert(all.end(), extra.begin(), extra.end());
  if (!c.output_dir.empty()) all.push_back("output_dir=" + json(c.output_dir).dump());
  return srdm::resolve_config(c.config_path, all);
}

void write_manifest(const fs::path& dir, const std::string& command, const srdm::RunConfig& cfg, const json& extra,
                    const Timings& timings) {
  fs::create_directories(dir);
  json m = {{"command", command},
            {"version", SRDM_VERSION},
            {"created_at", utc_now()},
            {"config", srdm::to_json(cfg)},
            {"timings_s", timings.json_value()}};
  for (const auto& [k, v] : extra.items()) m[k] = v;
  srdm::text::write_file((dir / ("run_manifest_" + command + ".json")).string(), m.dump(2) + "\n");
}

void require_file(const std::string& path, const std::string& what) {
  if (!fs::exists(path)) throw srdm::DependencyError(what + " not found at '" + path + "'");
}

std::string json_string(const std::string& s) { return json(s).dump(); }

// ---------------------------------------------------------------------------

int cmd_synth(const srdm::RunConfig& cfg) {
  Timings t;
  t.start("synth");
  fs::create_directories(cfg.out());
  const auto [hourly, daily] = srdm::synth_generate(cfg.synth);
  srdm::write_series(cfg.resolved_hourly(), hourly);
  srdm::write_series(cfg.resolved_daily(), daily);
  t.stop();
  write_manifest(cfg.out(), "synth", cfg,
                 {{"outputs", {cfg.resolved_hourly(), cfg.resolved_daily()}}, {"seeds", {{"synth", cfg.synth.seed}}}}, t);
  std::cout << "wrote " << hourly.size() << " days to " << cfg.resolved_hourly() << " and " << cfg.resolved_daily()
            << "\n";
  return kExitOk;
}

int cmd_train(const srdm::RunConfig& cfg, const std::string& stage) {
  Timings t;
  fs::create_directories(cfg.out());
  require_file(cfg.resolved_hourly(), "hourly training data");
  t.start("ingest");
  const auto hourly = srdm::ingest_hourly(cfg.resolved_hourly());
  t.stop();
  if (stage == "vae") {
    t.start("train_vae");
    auto result = srdm::fit_vae(hourly, cfg.vae);
    t.stop();
    result.params.save(cfg.resolved_vae());
    std::string log = "epoch,train_loss,val_loss,val_mae,best_val_loss\n";
    for (const auto& e : result.log) {
      log += std::to_string(e.epoch) + ',' + srdm::text::format_double(e.train_loss) + ',' +
             srdm::text::format_double(e.val_loss) + ',' + srdm::text::format_double(e.val_mae) + ',' +
             srdm::text::format_double(e.best_val_loss) + '\n';
    }
    const auto log_path = (cfg.out() / "vae_log.csv").string();
    srdm::text::write_file(log_path, log);
    write_manifest(cfg.out(), "train_vae", cfg,
                   {{"outputs", {cfg.resolved_vae(), log_path}},
                    {"fingerprints", {{"vae", result.params.fingerprint()}}},
                    {"seeds", {{"vae", cfg.vae.seed}}},
                    {"initial_val_mae", result.initial_val_mae},
                    {"final_val_mae", result.log.empty() ? result.initial_val_mae : result.log.back().val_mae}},
                   t);
    std::cout << "vae trained: " << cfg.resolved_vae() << "\n";
    return kExitOk;
  }
  require_file(cfg.resolved_vae(), "trained VAE params (train --stage vae first)");
  const auto vae = srdm::VAEParams::load(cfg.resolved_vae());
  t.start("train_diffusion");
  auto result = srdm::fit_denoiser(hourly, vae, cfg.diffusion);
  t.stop();
  result.params.save(cfg.resolved_denoiser());
  std::string log = "iteration,train_loss,val_loss,best_val_loss\n";
  for (const auto& e : result.log) {
    log += std::to_string(e.iteration) + ',' + srdm::text::format_double(e.train_loss) + ',' +
           srdm::text::format_double(e.val_loss) + ',' + srdm::text::format_double(e.best_val_loss) + '\n';
  }
  const auto log_path = (cfg.out() / "denoiser_log.csv").string();
  srdm::text::write_file(log_path, log);
  write_manifest(cfg.out(), "train_diffusion", cfg,
                 {{"outputs", {cfg.resolved_denoiser(), log_path}},
                  {"fingerprints", {{"vae", vae.fingerprint()}, {"denoiser", result.params.fingerprint()}}},
                  {"seeds", {{"diffusion", cfg.diffusion.seed}}},
                  {"initial_val_loss", result.initial_val_loss}},
                 t);
  std::cout << "denoiser trained: " << cfg.resolved_denoiser() << "\n";
  return kExitOk;
}

int cmd_generate(const srdm::RunConfig& cfg, std::optional<std::size_t> only_member) {
  Timings t;
  require_file(cfg.resolved_daily(), "daily input");
  require_file(cfg.resolved_vae(), "trained VAE params");
  require_file(cfg.resolved_denoiser(), "trained denoiser params");
  t.start("load");
  const auto daily = srdm::ingest_daily(cfg.resolved_daily());
  daily.require_physical();
  const auto vae = srdm::VAEParams::load(cfg.resolved_vae());
  const auto denoiser = srdm::DenoiserParams::load(cfg.resolved_denoiser());
  srdm::check_compatible(vae, denoiser);
  std::optional<srdm::HourlySeries> observed;
  if (!cfg.initial_hourly_path.empty()) {
    require_file(cfg.initial_hourly_path, "initial hourly data");
    observed = srdm::ingest_hourly(cfg.initial_hourly_path);
  } else if (fs::exists(cfg.resolved_hourly())) {
    observed = srdm::ingest_hourly(cfg.resolved_hourly());
  }
  const auto x0 = srdm::choose_initial_day(daily, observed ? &*observed : nullptr, cfg.generation.initial_day,
                                           cfg.synth.latitude_deg);
  t.stop();

  const fs::path dir = cfg.resolved_ensemble();
  fs::create_directories(dir);
  t.start("generate");
  if (only_member) {
    auto one = cfg.generation;
    if (*only_member >= one.members) throw srdm::ConfigError("--member must be < members");
    const auto series = srdm::generate_member(vae, denoiser, x0, daily, one, *only_member);
    srdm::write_series((dir / srdm::member_filename(*only_member)).string(), series);
    t.stop();
    std::cout << "regenerated member " << *only_member << " in " << dir.string() << "\n";
    return kExitOk;
  }
  const auto ensemble = srdm::generate_series(vae, denoiser, x0, daily, cfg.generation);
  t.stop();
  t.start("write");
  srdm::write_ensemble(dir, ensemble, utc_now());
  t.stop();
  write_manifest(dir, "generate", cfg,
                 {{"fingerprints", {{"vae", vae.fingerprint()}, {"denoiser", denoiser.fingerprint()}}},
                  {"seeds", ensemble.seeds},
                  {"initial_day", x0.date.to_string()}},
                 t);
  std::cout << "generated " << ensemble.size() << " members x " << daily.size() << " days in " << dir.string() << "\n";
  return kExitOk;
}

srdm::WindTurbineSpec wind_spec(const srdm::RunConfig& cfg) {
  auto spec = cfg.wind;
  if (!cfg.power_curve_path.empty()) {
    require_file(cfg.power_curve_path, "power-curve table");
    spec.table = srdm::read_power_curve(cfg.power_curve_path);
  }
  spec.validate();
  return spec;
}

int cmd_convert(const srdm::RunConfig& cfg, const std::string& tech_name, bool hourly, bool daily_out) {
  Timings t;
  const auto tech = srdm::parse_technology(tech_name);
  const auto wind = wind_spec(cfg);
  const auto& pv = cfg.pv;
  if (!hourly && !daily_out) hourly = daily_out = true;
  const fs::path dir = fs::path(cfg.resolved_power()) / tech_name;
  fs::create_directories(dir);
  json outputs = json::array();
  if (hourly) {
    t.start("convert_hourly");
    const auto ensemble = srdm::read_ensemble(cfg.resolved_ensemble());
    for (std::size_t m = 0; m < ensemble.size(); ++m) {
      const auto path = (dir / srdm::member_filename(m)).string();
      srdm::write_power(path, srdm::convert_series(ensemble.members[m], tech, wind, pv));
      outputs.push_back(path);
    }
    t.stop();
  }
  if (daily_out) {
    t.start("convert_daily");
    require_file(cfg.resolved_daily(), "daily input");
    const auto daily = srdm::ingest_daily(cfg.resolved_daily());
    const auto path = (dir / "daily.csv").string();
    srdm::write_power(path, srdm::convert_series(daily, tech, wind, pv));
    outputs.push_back(path);
    t.stop();
  }
  write_manifest(dir, "convert", cfg, {{"technology", tech_name}, {"outputs", outputs}}, t);
  std::cout << "converted " << tech_name << " into " << dir.string() << "\n";
  return kExitOk;
}

std::vector<srdm::PowerSeries> read_member_power(const fs::path& dir, srdm::Technology tech) {
  std::vector<srdm::PowerSeries> out;
  for (std::size_t m = 0;; ++m) {
    const auto path = dir / srdm::member_filename(m);
    if (!fs::exists(path)) break;
    out.push_back(srdm::read_power(path.string(), tech));
  }
  return out;
}

int cmd_analyze(const srdm::RunConfig& cfg, const std::vector<std::string>& sweeps, bool plots) {
  Timings t;
  const fs::path power_root = cfg.resolved_power();
  std::vector<srdm::Technology> techs;
  for (auto tech : {srdm::Technology::kWind, srdm::Technology::kPv}) {
    if (fs::exists(power_root / srdm::technology_name(tech) / srdm::member_filename(0))) techs.push_back(tech);
  }
  if (techs.empty()) {
    throw srdm::DependencyError("no converted power under '" + power_root.string() + "' (run convert first)");
  }
  t.start("load");
  const auto ensemble = srdm::read_ensemble(cfg.resolved_ensemble());
  std::optional<srdm::DailySeries> daily;
  if (fs::exists(cfg.resolved_daily())) daily = srdm::ingest_daily(cfg.resolved_daily());
  t.stop();

  const fs::path dir = cfg.resolved_analysis();
  fs::create_directories(dir);
  json outputs = json::array();

  t.start("trends");
  const auto features = srdm::feature_trends(ensemble.members, cfg.alpha);
  json rows = json::array();
  for (const auto& ft : features) rows.push_back(srdm::trend_row("feature", ft.feature, ensemble.pathway, ft.trend));
  std::vector<srdm::BiasReport> bias;
  for (auto tech : techs) {
    const auto name = srdm::technology_name(tech);
    const auto members = read_member_power(power_root / name, tech);
    const auto records = srdm::auh_records(members);
    const auto by_year = srdm::mean_auh_by_year(records);
    std::vector<int> years;
    std::vector<double> values;
    for (const auto& [y, v] : by_year) {
      years.push_back(y);
      values.push_back(v);
    }
    if (years.size() < 4) {
      throw srdm::InsufficientDataError("trend analysis needs at least 4 full years of power, got " +
                                        std::to_string(years.size()));
    }
    const auto width = srdm::ensemble_interval_width(records);
    if (width.degenerate) std::cerr << "warning: fewer than two members; interval width reported as 0\n";
    rows.push_back(srdm::trend_row("tech", name, ensemble.pathway, srdm::trend_analysis(years, values, cfg.alpha),
                                   width.width));
    const auto low_path = power_root / name / "daily.csv";
    if (fs::exists(low_path)) bias.push_back(srdm::resolution_bias(srdm::read_power(low_path.string(), tech), members));
  }
  const auto trends_path = (dir / "trends.json").string();
  srdm::text::write_file(trends_path, rows.dump(2) + "\n");
  outputs.push_back(trends_path);
  t.stop();

  if (!bias.empty()) {
    std::string csv = srdm::bias_csv_header();
    for (const auto& b : bias) csv += srdm::to_csv_rows(b);
    const auto path = (dir / "bias.csv").string();
    srdm::text::write_file(path, csv);
    outputs.push_back(path);
  }

  if (daily) {
    const auto mae = srdm::daily_mean_mae(ensemble, *daily);
    json j = json::object();
    for (std::size_t f = 0; f < srdm::kFeatureCount; ++f) j[srdm::kFeatureNames[f]] = mae[f];
    const auto path = (dir / "daily_mae.json").string();
    srdm::text::write_file(path, j.dump(2) + "\n");
    outputs.push_back(path);
  }

  if (!sweeps.empty()) {
    t.start("sweep");
    std::string csv;
    for (const auto& spec : sweeps) {
      const auto eq = spec.find('=');
      if (eq == std::string::npos) throw srdm::ConfigError("--sweep must look like name=start:step:stop");
      const auto param = srdm::parse_sweep_parameter(spec.substr(0, eq));
      const auto values = srdm::parse_range(spec.substr(eq + 1));
      const auto rows_out = srdm::parameter_sweep(ensemble.members, param, values, wind_spec(cfg), cfg.pv, cfg.alpha);
      const auto table = srdm::sweep_csv(param, rows_out);
      csv += csv.empty() ? table : table.substr(table.find('\n') + 1);
    }
    const auto path = (dir / "sweep.csv").string();
    srdm::text::write_file(path, csv);
    outputs.push_back(path);
    t.stop();
  }

  if (plots) {
    for (const auto& ft : features) {
      std::string name = ft.feature;
      std::erase(name, '|');
      const auto path = (dir / ("trend_" + name + ".svg")).string();
      srdm::text::write_file(path, srdm::boxplot_svg(ft));
      outputs.push_back(path);
    }
    if (!bias.empty()) {
      const auto path = (dir / "bias.svg").string();
      srdm::text::write_file(path, srdm::bias_svg(bias));
      outputs.push_back(path);
    }
  }
  write_manifest(dir, "analyze", cfg,
                 {{"outputs", outputs},
                  {"fingerprints", {{"vae", ensemble.vae_fingerprint}, {"denoiser", ensemble.denoiser_fingerprint}}},
                  {"seeds", ensemble.seeds}},
                 t);
  std::cout << "analysis written to " << dir.string() << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"srdm: daily-to-hourly climate super-resolution and renewable capacity analysis"};
  app.set_version_flag("--version", std::string(SRDM_VERSION));
  app.require_subcommand(1);

  Common synth_c, train_c, gen_c, conv_c, an_c;

  auto* synth = app.add_subcommand("synth", "write a synthetic hourly series and its daily means");
  add_common(synth, synth_c);
  std::optional<std::size_t> synth_days;
  std::optional<std::uint64_t> synth_seed;
  std::string synth_start;
  synth->add_option("--days", synth_days, "number of days");
  synth->add_option("--seed", synth_seed, "random seed");
  synth->add_option("--start", synth_start, "first date (YYYY-MM-DD)");

  auto* train = app.add_subcommand("train", "train the VAE or the denoiser");
  add_common(train, train_c);
  std::string stage;
  std::string train_hourly;
  train->add_option("--stage", stage, "vae or diffusion")->required()->check(CLI::IsMember({"vae", "diffusion"}));
  train->add_option("--hourly", train_hourly, "hourly training CSV");

  auto* gen = app.add_subcommand("generate", "generate an hourly ensemble from a daily series");
  add_common(gen, gen_c);
  std::string gen_daily;
  std::optional<std::size_t> members;
  std::optional<std::size_t> only_member;
  gen->add_option("--daily", gen_daily, "daily input CSV");
  gen->add_option("--members", members, "ensemble size");
  gen->add_option("--member", only_member, "regenerate only this member index");

  auto* conv = app.add_subcommand("convert", "convert weather to per-unit wind or PV power");
  add_common(conv, conv_c);
  std::string tech;
  bool conv_hourly = false, conv_daily = false;
  conv->add_option("--tech", tech, "wind or pv")->required()->check(CLI::IsMember({"wind", "pv"}));
  conv->add_flag("--hourly", conv_hourly, "convert the hourly ensemble members");
  conv->add_flag("--daily", conv_daily, "convert the daily input");

  auto* an = app.add_subcommand("analyze", "trends, interval widths, bias, sweeps and daily-mean MAE");
  add_common(an, an_c);
  std::vector<std::string> sweeps;
  bool plots = false;
  an->add_option("--sweep", sweeps, "parameter sweep, e.g. cut_in=2.6:0.2:3.4 (repeatable)");
  an->add_flag("--plots", plots, "also write SVG plots");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUser;
  }

  try {
    if (synth->parsed()) {
      std::vector<std::string> extra;
      if (synth_days) extra.push_back("synth_days=" + std::to_string(*synth_days));
      if (synth_seed) extra.push_back("synth_seed=" + std::to_string(*synth_seed));
      if (!synth_start.empty()) extra.push_back("synth_start=" + json_string(synth_start));
      return cmd_synth(resolve(synth_c, extra));
    }
    if (train->parsed()) {
      std::vector<std::string> extra;
      if (!train_hourly.empty()) extra.push_back("hourly_path=" + json_string(train_hourly));
      return cmd_train(resolve(train_c, extra), stage);
    }
    if (gen->parsed()) {
      std::vector<std::string> extra;
      if (!gen_daily.empty()) extra.push_back("daily_path=" + json_string(gen_daily));
      if (members) extra.push_back("members=" + std::to_string(*members));
      return cmd_generate(resolve(gen_c, extra), only_member);
    }
    if (conv->parsed()) return cmd_convert(resolve(conv_c, {}), tech, conv_hourly, conv_daily);
    if (an->parsed()) return cmd_analyze(resolve(an_c, {}), sweeps, plots);
  } catch (const srdm::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    // Training divergence and shape/index faults are internal; everything else is the user's input.
    const auto k = e.kind();
    const bool internal = k == srdm::ErrorKind::kTraining || k == srdm::ErrorKind::kDimension || k == srdm::ErrorKind::kIndex;
    return internal ? kExitInternal : kExitUser;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitInternal;
}

#include <cstdio>
#include <string>

#include <CLI11.hpp>

#include "crowdsim/diagnostics.hpp"
#include "crowdsim/numeric.hpp"
#include "crowdsim/scenario.hpp"

namespace {

struct Overrides {
  std::optional<int> steps;
  std::optional<double> dt;
  bool allow_boundary_loss = false;
  bool pgm = false;
  std::optional<double> pgm_scale;
};

void add_override_flags(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--steps", o.steps, "Override the step count");
  cmd->add_option("--dt", o.dt, "Override the time step");
  cmd->add_flag("--allow-boundary-loss", o.allow_boundary_loss,
                "Record and discard mass leaving the domain instead of "
                "aborting");
  cmd->add_flag("--pgm", o.pgm, "Also write 8-bit PGM images per frame");
  cmd->add_option("--pgm-scale", o.pgm_scale,
                  "Density mapped to full white (default: initial max)");
}

int execute(crowdsim::ScenarioConfig cfg, const std::string& out_dir,
            const Overrides& o) {
  if (o.steps) cfg.steps = *o.steps;
  if (o.dt) cfg.dt = *o.dt;
  if (o.allow_boundary_loss) cfg.allow_boundary_loss = true;
  crowdsim::RunOptions options;
  options.write_pgm = o.pgm;
  options.pgm_scale = o.pgm_scale;
  const auto summary = crowdsim::run(cfg, out_dir, options);
  if (summary.exit_status != 0)
    std::fprintf(stderr, "error: %s\n", summary.error.c_str());
  else
    std::printf("completed %d steps -> %s\n", summary.steps_completed,
                out_dir.c_str());
  return summary.exit_status;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-scale crowd transport simulator"};
  app.require_subcommand(1);

  std::string config_path, out_dir, preset_name, audit_dir;
  Overrides run_overrides, preset_overrides;

  auto* run_cmd = app.add_subcommand("run", "Run a scenario from a config file");
  run_cmd->add_option("config", config_path, "Scenario config file")
      ->required()
      ->check(CLI::ExistingFile);
  run_cmd->add_option("--out", out_dir, "Output directory")->required();
  add_override_flags(run_cmd, run_overrides);

  auto* preset_cmd = app.add_subcommand("preset", "Run a built-in scenario");
  std::string names;
  for (const auto& n : crowdsim::preset_names()) names += n + " ";
  preset_cmd->add_option("name", preset_name, "One of: " + names)->required();
  preset_cmd->add_option("--out", out_dir, "Output directory")->required();
  add_override_flags(preset_cmd, preset_overrides);

  auto* audit_cmd = app.add_subcommand(
      "audit", "Re-check conservation and entropy from an output directory");
  audit_cmd->add_option("dir", audit_dir, "Output directory of a previous run")
      ->required()
      ->check(CLI::ExistingDirectory);

  auto* predict_cmd =
      app.add_subcommand("predict", "Print closed-form predictions");
  predict_cmd->require_subcommand(1);
  double arg_strength = 0.0, arg_rr = 0.0, arg_speed = 0.0, arg_weight = 0.0;
  auto* eq_cmd = predict_cmd->add_subcommand(
      "eq", "Equilibrium separation of two opposing walkers");
  eq_cmd->add_option("F", arg_strength, "Kernel strength")->required();
  eq_cmd->add_option("Rr", arg_rr, "Repulsion radius")->required();
  eq_cmd->add_option("speed", arg_speed, "Desired speed")->required();
  auto* zone_cmd = predict_cmd->add_subcommand(
      "zone", "Empty-zone radius around an intruding point mass");
  zone_cmd->add_option("M", arg_weight, "Point mass weight")->required();
  zone_cmd->add_option("F", arg_strength, "Kernel strength")->required();
  zone_cmd->add_option("Rr", arg_rr, "Repulsion radius")->required();
  zone_cmd->add_option("speed", arg_speed, "Desired speed")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run_cmd->parsed())
      return execute(crowdsim::load_config(config_path), out_dir,
                     run_overrides);
    if (preset_cmd->parsed())
      return execute(crowdsim::preset(preset_name), out_dir, preset_overrides);
    if (audit_cmd->parsed()) {
      const auto summary = crowdsim::audit_output_dir(audit_dir);
      std::fputs(summary.report.c_str(), stdout);
      return summary.ok ? 0 : 1;
    }
    if (eq_cmd->parsed()) {
      std::printf("%s\n", crowdsim::format_shortest(
                              crowdsim::predicted_equilibrium_distance(
                                  arg_strength, arg_rr, arg_speed))
                              .c_str());
      return 0;
    }
    if (zone_cmd->parsed()) {
      std::printf("%s\n",
                  crowdsim::format_shortest(
                      crowdsim::predicted_empty_zone_radius(
                          arg_weight, arg_strength, arg_rr, arg_speed))
                      .c_str());
      return 0;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}

#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "crowdsim/population.hpp"
#include "crowdsim/transport.hpp"

namespace crowdsim {

struct PopulationSpec {
  enum class Kind { Discrete, Density };

  std::string id;
  Kind kind = Kind::Discrete;
  double weight = 1.0;               // discrete: mass per particle
  std::vector<Vec2> positions;       // discrete
  Rect block{{0, 0}, {0, 0}};        // density: uniform initial rectangle
  double rho = 0.0;                  // density: uniform initial value
  Vec2 vdes{0.0, 0.0};
  double sigma = 1.0;
};

struct InteractionSpec {
  std::string src;  // population exerting the influence
  std::string dst;  // population experiencing it
  KernelKind kind = KernelKind::RepelOnly;
  double strength = 0.0;
  double repel_radius = 0.0;
  double attract_radius = 0.0;  // AttractRepel only
};

struct ScenarioConfig {
  double length = 50.0;
  double width = 50.0;
  int nx = 50;
  int ny = 50;
  double dt = 0.01;
  int steps = 1000;
  int frame_stride = 100;
  std::vector<PopulationSpec> populations;
  std::vector<InteractionSpec> interactions;
  bool allow_boundary_loss = false;
  bool entropy_audit = false;
};

/// Parse the sectioned key-value config format. Throws std::runtime_error
/// with file name and line number on parse errors, and with field name and
/// constraint on validation errors. Unknown keys are rejected.
ScenarioConfig parse_config(const std::string& text,
                            const std::string& filename = "<config>");
ScenarioConfig load_config(const std::filesystem::path& path);

/// Serialize a resolved config back to the same format.
std::string write_config(const ScenarioConfig& cfg);

std::vector<std::string> preset_names();
ScenarioConfig preset(const std::string& name);

SimState make_initial_state(const ScenarioConfig& cfg);

struct RunOptions {
  bool write_pgm = false;
  std::optional<double> pgm_scale;  // default: global initial max density
};

struct RunSummary {
  int exit_status = 0;
  int steps_completed = 0;
  std::string error;
};

/// Execute the configured run and emit density frames, particle rows, a
/// per-step diagnostics CSV, a resolved config echo and (gate permitting)
/// an entropy audit summary into the output directory.
RunSummary run(const ScenarioConfig& cfg, const std::filesystem::path& out_dir,
               const RunOptions& options = {});

struct AuditSummary {
  bool ok = false;
  std::string report;
};

/// Re-check conservation (and the entropy column, when present) from the
/// files a previous run emitted.
AuditSummary audit_output_dir(const std::filesystem::path& dir);

}  // namespace crowdsim

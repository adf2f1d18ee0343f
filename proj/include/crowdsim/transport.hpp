#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "crowdsim/errors.hpp"
#include "crowdsim/population.hpp"
#include "crowdsim/velocity.hpp"

namespace crowdsim {

enum class BoundaryPolicy { Error, AllowLoss };

/// Boundary loss below this fraction of the population's mass does not
/// count as "mass reaching the boundary". The remap's numerical support
/// grows one cell per step regardless of speed, carrying a tail of
/// (dt*|v|/h)^n-scale densities, so a strict loss > 0 test would abort long
/// runs on mass many orders below the conservation resolution. Losses are
/// still tallied exactly.
inline constexpr double kBoundaryLossRelTolerance = 1e-12;

struct StepOptions {
  BoundaryPolicy boundary = BoundaryPolicy::Error;
};

/// Per-population accounting of one step; mass_after + boundary_loss equals
/// mass_before up to rounding.
struct PopulationReport {
  std::string id;
  double mass_before = 0.0;
  double mass_after = 0.0;
  double boundary_loss = 0.0;
  std::optional<double> max_density;  // density populations only
};

struct StepReport {
  std::vector<PopulationReport> populations;
  double dt = 0.0;
  bool cfl_advisory = false;  // dt * max speed exceeded one cell size
};

struct PushResult {
  std::vector<Vec2> centers;
  std::vector<std::pair<std::size_t, Vec2>> lost;  // original index, position
};

/// Explicit update x + dt*v for every center; each new center must stay
/// strictly inside the domain. Under BoundaryPolicy::Error a leaving
/// particle throws; under AllowLoss it is dropped and reported.
PushResult push_particles(const std::vector<Vec2>& centers,
                          const std::vector<Vec2>& velocities, double dt,
                          const Grid& grid,
                          BoundaryPolicy policy = BoundaryPolicy::Error,
                          const std::string& population_id = {});

struct AdvectResult {
  DensityField field;
  double boundary_loss = 0.0;
};

/// Conservative remap: each cell translates by dt times its midpoint
/// velocity and deposits its mass into the grid cells it overlaps, in
/// row-major source order. Mass translated outside the domain is tallied
/// as boundary loss (an error under BoundaryPolicy::Error).
AdvectResult advect_density(const DensityField& field,
                            const std::vector<Vec2>& cell_velocities,
                            double dt,
                            BoundaryPolicy policy = BoundaryPolicy::Error,
                            const std::string& population_id = {});

/// One explicit step: build the velocity plan from the time-n state, then
/// push every measure forward.
std::pair<SimState, StepReport> step(const SimState& state,
                                     const StepOptions& options = {});

}  // namespace crowdsim

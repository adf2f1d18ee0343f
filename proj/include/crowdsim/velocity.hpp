#pragma once

#include <vector>

#include "crowdsim/errors.hpp"
#include "crowdsim/population.hpp"

namespace crowdsim {

/// Distance below which two interacting mass points trigger a merge-guard
/// abort instead of a kernel evaluation.
inline constexpr double kMergeGuardDistance = 1e-12;

/// Coincidence tolerance for "lies on a vertex / midpoint" decisions,
/// scale-relative so behavior is mesh-independent.
inline double vertex_tolerance(const Grid& g) {
  return 1e-9 * std::min(g.hx(), g.hy());
}

/// All velocities of one explicit step, computed solely from the time-n
/// state: one vector per particle for discrete populations, one vector per
/// cell midpoint (row-major) for density populations.
struct VelocityPlan {
  std::vector<std::vector<Vec2>> entries;
  double max_speed = 0.0;
};

/// Social velocity at x for the given observer population: sum over all
/// source populations of the interaction integral, evaluated exactly
/// against point masses and by the four-vertex trapezoid quadrature against
/// densities (with the midpoint fallback when x lies on a cell vertex).
Vec2 social_velocity_at(Vec2 x, int observer, const SimState& state);

/// Desired plus social velocity at the midpoint of a cell, for a density
/// observer. A point mass lying on the midpoint contributes the average of
/// its interactions with the four cell vertices.
Vec2 midpoint_velocity(CellIndex cell, int observer, const SimState& state);

VelocityPlan build_velocity_plan(const SimState& state);

}  // namespace crowdsim

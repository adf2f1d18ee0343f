#include "crowdsim/transport.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "crowdsim/numeric.hpp"

namespace crowdsim {

PushResult push_particles(const std::vector<Vec2>& centers,
                          const std::vector<Vec2>& velocities, double dt,
                          const Grid& grid, BoundaryPolicy policy,
                          const std::string& population_id) {
  if (centers.size() != velocities.size())
    throw std::invalid_argument("push_particles: shape mismatch");
  if (!(dt > 0.0)) throw std::invalid_argument("push_particles: dt must be > 0");

  PushResult out;
  out.centers.reserve(centers.size());
  for (std::size_t i = 0; i < centers.size(); ++i) {
    const Vec2 x = centers[i] + dt * velocities[i];
    if (!grid.strictly_inside(x)) {
      if (policy == BoundaryPolicy::Error) {
        std::ostringstream msg;
        msg << "particle " << i << " of population '" << population_id
            << "' left the domain at (" << x.x << ", " << x.y << ")";
        throw BoundaryLossError(msg.str(), population_id, 0.0, x);
      }
      out.lost.emplace_back(i, x);
      continue;
    }
    out.centers.push_back(x);
  }
  return out;
}

AdvectResult advect_density(const DensityField& field,
                            const std::vector<Vec2>& cell_velocities,
                            double dt, BoundaryPolicy policy,
                            const std::string& population_id) {
  const Grid& g = field.grid();
  if (cell_velocities.size() != static_cast<std::size_t>(g.cell_count()))
    throw std::invalid_argument("advect_density: shape mismatch");
  if (!(dt > 0.0)) throw std::invalid_argument("advect_density: dt must be > 0");

  const Rect domain = g.bounds();
  const double cell_area = g.hx() * g.hy();
  AdvectResult out{DensityField(g), 0.0};
  NeumaierSum loss;
  NeumaierSum mass_in;

  for (int q = 1; q <= g.ny(); ++q) {
    for (int p = 1; p <= g.nx(); ++p) {
      const CellIndex src{p, q};
      const double rho = field(src);
      if (rho == 0.0) continue;
      mass_in.add(rho * cell_area);
      const Vec2 shift = dt * cell_velocities[g.flat(src)];
      const Rect moved = g.cell_rect(src).translated(shift);
      const double moved_area = moved.area();
      const double area_inside = overlap_area(moved, domain);
      if (area_inside < moved_area) loss.add(rho * (moved_area - area_inside));
      if (area_inside <= 0.0) continue;

      // Destination index range from the shifted corners; the translation
      // may exceed one cell width.
      const int j_lo = std::max(1, static_cast<int>(std::floor(moved.lo.x / g.hx())));
      const int j_hi = std::min(g.nx(), static_cast<int>(std::floor(moved.hi.x / g.hx())) + 2);
      const int k_lo = std::max(1, static_cast<int>(std::floor(moved.lo.y / g.hy())));
      const int k_hi = std::min(g.ny(), static_cast<int>(std::floor(moved.hi.y / g.hy())) + 2);
      for (int k = k_lo; k <= k_hi; ++k) {
        for (int j = j_lo; j <= j_hi; ++j) {
          const CellIndex dst{j, k};
          const double a = overlap_area(moved, g.cell_rect(dst));
          if (a > 0.0) out.field(dst) += rho * a;
        }
      }
    }
  }

  for (double& v : out.field.values()) v /= cell_area;
  out.boundary_loss = loss.value();
  if (out.boundary_loss > kBoundaryLossRelTolerance * mass_in.value() &&
      policy == BoundaryPolicy::Error) {
    std::ostringstream msg;
    msg << "density population '" << population_id << "' lost "
        << out.boundary_loss << " mass through the boundary";
    throw BoundaryLossError(msg.str(), population_id, out.boundary_loss);
  }
  return out;
}

std::pair<SimState, StepReport> step(const SimState& state,
                                     const StepOptions& options) {
  const VelocityPlan plan = build_velocity_plan(state);

  StepReport report;
  report.dt = state.dt;
  report.cfl_advisory =
      state.dt * plan.max_speed > std::min(state.grid.hx(), state.grid.hy());

  SimState next = state;
  next.step_index = state.step_index + 1;
  next.time = next.step_index * state.dt;

  for (std::size_t a = 0; a < state.populations.size(); ++a) {
    const Population& pop = state.populations[a];
    PopulationReport pr;
    pr.id = pop.id;
    pr.mass_before = total_mass(pop);
    if (pop.is_discrete()) {
      auto pushed = push_particles(pop.discrete().centers, plan.entries[a],
                                   state.dt, state.grid, options.boundary,
                                   pop.id);
      pr.boundary_loss =
          pop.discrete().weight * static_cast<double>(pushed.lost.size());
      next.populations[a].discrete().centers = std::move(pushed.centers);
    } else {
      auto advected = advect_density(pop.density(), plan.entries[a], state.dt,
                                     options.boundary, pop.id);
      pr.boundary_loss = advected.boundary_loss;
      pr.max_density = advected.field.max_value();
      next.populations[a].density() = std::move(advected.field);
    }
    pr.mass_after = total_mass(next.populations[a]);
    report.populations.push_back(std::move(pr));
  }
  return {std::move(next), std::move(report)};
}

}  // namespace crowdsim

#include "crowdsim/velocity.hpp"

#include <cmath>
#include <optional>
#include <sstream>

namespace crowdsim {
namespace {

double perception_weight(Vec2 x, Vec2 source, Vec2 v_des,
                         const Anisotropy& a) {
  const auto c = cos_angle(x, source, v_des);
  return c ? a.weight(*c) : 1.0;
}

/// Quadrature weights of one density source against observer midpoints,
/// tabulated per lattice offset (source cell minus observer cell). Valid
/// for every observer cell of the same grid, which also makes midpoint
/// velocities exactly equivariant under lattice translations.
struct AcStencil {
  int rx = 0;
  int ry = 0;
  std::vector<Vec2> weights;  // (2ry+1) x (2rx+1), row-major over dk then dj

  const Vec2& at(int dj, int dk) const {
    return weights[static_cast<std::size_t>(dk + ry) * (2 * rx + 1) +
                   (dj + rx)];
  }
};

AcStencil build_ac_stencil(const Grid& g, const InteractionKernel& kernel,
                           Vec2 observer_vdes, const Anisotropy& aniso) {
  const double support = kernel.support_radius();
  AcStencil st;
  st.rx = static_cast<int>(std::ceil(support / g.hx() + 0.5)) + 1;
  st.ry = static_cast<int>(std::ceil(support / g.hy() + 0.5)) + 1;
  st.weights.assign(static_cast<std::size_t>(2 * st.ry + 1) * (2 * st.rx + 1),
                    Vec2{});
  const double cell_quarter = g.hx() * g.hy() / 4.0;
  for (int dk = -st.ry; dk <= st.ry; ++dk) {
    for (int dj = -st.rx; dj <= st.rx; ++dj) {
      Vec2 sum{};
      for (int ay = 0; ay <= 1; ++ay) {
        for (int ax = 0; ax <= 1; ++ax) {
          // source-cell vertex minus observer midpoint
          const Vec2 d{(dj + (ax - 0.5)) * g.hx(), (dk + (ay - 0.5)) * g.hy()};
          const double s = d.norm();
          if (s >= support) continue;
          const double fv = kernel(s);
          if (fv == 0.0) continue;
          const double w =
              perception_weight({0.0, 0.0}, d, observer_vdes, aniso);
          sum += (fv * w / s) * d;
        }
      }
      st.weights[static_cast<std::size_t>(dk + st.ry) * (2 * st.rx + 1) +
                 (dj + st.rx)] = cell_quarter * sum;
    }
  }
  return st;
}

Vec2 gather_from_density(const DensityField& field, CellIndex obs,
                         const AcStencil& st) {
  const Grid& g = field.grid();
  Vec2 acc{};
  for (int dk = -st.ry; dk <= st.ry; ++dk) {
    const int q = obs.k + dk;
    if (q < 1 || q > g.ny()) continue;
    for (int dj = -st.rx; dj <= st.rx; ++dj) {
      const int p = obs.j + dj;
      if (p < 1 || p > g.nx()) continue;
      const double rho = field(CellIndex{p, q});
      if (rho == 0.0) continue;
      acc += rho * st.at(dj, dk);
    }
  }
  return acc;
}

[[noreturn]] void throw_merge_guard(Vec2 x, Vec2 other, double distance,
                                    const std::string& observer_id,
                                    const std::string& source_id) {
  std::ostringstream msg;
  msg << "merge guard: mass points of '" << observer_id << "' at (" << x.x
      << ", " << x.y << ") and '" << source_id << "' at (" << other.x << ", "
      << other.y << ") are " << distance
      << " apart; velocity field is singular";
  throw MergeGuardError(msg.str(), x, distance);
}

/// Interaction of a free point (particle center or probe) with a discrete
/// source measure. Source points equal to x are skipped.
Vec2 point_from_discrete(Vec2 x, const DiscreteMeasure& src,
                         const InteractionKernel& kernel, Vec2 obs_vdes,
                         const Anisotropy& aniso,
                         const std::string& observer_id,
                         const std::string& source_id) {
  const double support = kernel.support_radius();
  Vec2 acc{};
  for (const Vec2& c : src.centers) {
    if (c == x) continue;
    const Vec2 d = c - x;
    const double s = d.norm();
    if (s < kMergeGuardDistance)
      throw_merge_guard(x, c, s, observer_id, source_id);
    if (s >= support) continue;
    const double fv = kernel(s);
    if (fv == 0.0) continue;
    acc += (fv * perception_weight(x, c, obs_vdes, aniso) / s) * d;
  }
  return src.weight * acc;
}

/// Interaction of a free point with a density source: four-vertex trapezoid
/// rule per cell, single-midpoint rule for cells that have x as a vertex.
Vec2 point_from_density(Vec2 x, const DensityField& field,
                        const InteractionKernel& kernel, Vec2 obs_vdes,
                        const Anisotropy& aniso) {
  const Grid& g = field.grid();
  const double support = kernel.support_radius();
  const double tol = vertex_tolerance(g);
  const double cell_area = g.hx() * g.hy();

  const int p_lo = std::max(1, static_cast<int>(std::floor((x.x - support) / g.hx())));
  const int p_hi = std::min(g.nx(), static_cast<int>(std::floor((x.x + support) / g.hx())) + 2);
  const int q_lo = std::max(1, static_cast<int>(std::floor((x.y - support) / g.hy())));
  const int q_hi = std::min(g.ny(), static_cast<int>(std::floor((x.y + support) / g.hy())) + 2);

  Vec2 acc{};
  for (int q = q_lo; q <= q_hi; ++q) {
    for (int p = p_lo; p <= p_hi; ++p) {
      const CellIndex cell{p, q};
      const double rho = field(cell);
      if (rho == 0.0) continue;
      const auto verts = g.vertices(cell);
      bool on_vertex = false;
      for (const Vec2& v : verts)
        if ((v - x).norm() <= tol) on_vertex = true;
      if (on_vertex) {
        const Vec2 ym = g.midpoint(cell);
        const Vec2 d = ym - x;
        const double s = d.norm();
        if (s >= support) continue;
        const double fv = kernel(s);
        if (fv == 0.0) continue;
        acc += (rho * cell_area * fv *
                perception_weight(x, ym, obs_vdes, aniso) / s) *
               d;
      } else {
        Vec2 sum{};
        for (const Vec2& v : verts) {
          const Vec2 d = v - x;
          const double s = d.norm();
          if (s >= support) continue;
          const double fv = kernel(s);
          if (fv == 0.0) continue;
          sum += (fv * perception_weight(x, v, obs_vdes, aniso) / s) * d;
        }
        acc += (rho * cell_area / 4.0) * sum;
      }
    }
  }
  return acc;
}

/// Interaction of a density-observer midpoint with a discrete source.
/// A source point on the midpoint is replaced by the average of its
/// interactions with the four cell vertices.
Vec2 midpoint_from_discrete(CellIndex obs, const Grid& g,
                            const DiscreteMeasure& src,
                            const InteractionKernel& kernel, Vec2 obs_vdes,
                            const Anisotropy& aniso) {
  const double support = kernel.support_radius();
  const double tol = vertex_tolerance(g);
  const Vec2 ym = g.midpoint(obs);
  Vec2 acc{};
  for (const Vec2& c : src.centers) {
    const Vec2 d = c - ym;
    const double s = d.norm();
    if (s <= tol) {
      Vec2 sum{};
      for (const Vec2& v : g.vertices(obs)) {
        const Vec2 dv = c - v;
        const double sv = dv.norm();
        if (sv >= support) continue;
        const double fv = kernel(sv);
        if (fv == 0.0) continue;
        sum += (fv * perception_weight(v, c, obs_vdes, aniso) / sv) * dv;
      }
      acc += 0.25 * sum;
      continue;
    }
    if (s >= support) continue;
    const double fv = kernel(s);
    if (fv == 0.0) continue;
    acc += (fv * perception_weight(ym, c, obs_vdes, aniso) / s) * d;
  }
  return src.weight * acc;
}

/// Per-observer prepared source data; stencils only exist for density
/// sources with an active kernel.
struct PreparedSources {
  std::vector<std::optional<AcStencil>> stencils;
};

PreparedSources prepare_sources(int observer, const SimState& state) {
  PreparedSources out;
  out.stencils.resize(state.populations.size());
  const Population& obs = state.populations[observer];
  for (std::size_t b = 0; b < state.populations.size(); ++b) {
    const auto& kernel = state.interactions.get(observer, static_cast<int>(b));
    if (!kernel || state.populations[b].is_discrete()) continue;
    out.stencils[b] = build_ac_stencil(state.grid, *kernel,
                                       obs.desired_velocity, obs.anisotropy);
  }
  return out;
}

Vec2 midpoint_velocity_impl(CellIndex cell, int observer,
                            const SimState& state,
                            const PreparedSources& prepared) {
  const Population& obs = state.populations[observer];
  Vec2 v = obs.desired_velocity;
  for (std::size_t b = 0; b < state.populations.size(); ++b) {
    const auto& kernel = state.interactions.get(observer, static_cast<int>(b));
    if (!kernel) continue;
    const Population& src = state.populations[b];
    if (src.is_discrete()) {
      v += midpoint_from_discrete(cell, state.grid, src.discrete(), *kernel,
                                  obs.desired_velocity, obs.anisotropy);
    } else {
      v += gather_from_density(src.density(), cell, *prepared.stencils[b]);
    }
  }
  return v;
}

struct IndexBox {
  int j_lo, j_hi, k_lo, k_hi;
  bool contains(int j, int k) const {
    return j >= j_lo && j <= j_hi && k >= k_lo && k <= k_hi;
  }
};

/// Observer cells outside every box provably receive zero social velocity
/// (all source contributions lie beyond the kernel support).
std::vector<IndexBox> influence_boxes(int observer, const SimState& state,
                                      const PreparedSources& prepared) {
  const Grid& g = state.grid;
  std::vector<IndexBox> boxes;
  for (std::size_t b = 0; b < state.populations.size(); ++b) {
    const auto& kernel = state.interactions.get(observer, static_cast<int>(b));
    if (!kernel) continue;
    const Population& src = state.populations[b];
    if (src.is_discrete()) {
      const double support = kernel->support_radius();
      for (const Vec2& c : src.discrete().centers) {
        boxes.push_back(
            {std::max(1, static_cast<int>(std::floor((c.x - support) / g.hx()))),
             std::min(g.nx(),
                      static_cast<int>(std::floor((c.x + support) / g.hx())) + 2),
             std::max(1, static_cast<int>(std::floor((c.y - support) / g.hy()))),
             std::min(g.ny(),
                      static_cast<int>(std::floor((c.y + support) / g.hy())) + 2)});
      }
    } else {
      const auto occ = src.density().occupied_box();
      if (!occ) continue;
      const AcStencil& st = *prepared.stencils[b];
      boxes.push_back({std::max(1, occ->j_lo - st.rx),
                       std::min(g.nx(), occ->j_hi + st.rx),
                       std::max(1, occ->k_lo - st.ry),
                       std::min(g.ny(), occ->k_hi + st.ry)});
    }
  }
  return boxes;
}

}  // namespace

Vec2 social_velocity_at(Vec2 x, int observer, const SimState& state) {
  const Population& obs = state.populations[observer];
  Vec2 v{};
  for (std::size_t b = 0; b < state.populations.size(); ++b) {
    const auto& kernel = state.interactions.get(observer, static_cast<int>(b));
    if (!kernel) continue;
    const Population& src = state.populations[b];
    if (src.is_discrete()) {
      v += point_from_discrete(x, src.discrete(), *kernel,
                               obs.desired_velocity, obs.anisotropy, obs.id,
                               src.id);
    } else {
      v += point_from_density(x, src.density(), *kernel, obs.desired_velocity,
                              obs.anisotropy);
    }
  }
  return v;
}

Vec2 midpoint_velocity(CellIndex cell, int observer, const SimState& state) {
  return midpoint_velocity_impl(cell, observer, state,
                                prepare_sources(observer, state));
}

VelocityPlan build_velocity_plan(const SimState& state) {
  VelocityPlan plan;
  plan.entries.resize(state.populations.size());
  for (std::size_t a = 0; a < state.populations.size(); ++a) {
    const int observer = static_cast<int>(a);
    const Population& pop = state.populations[a];
    if (pop.is_discrete()) {
      const auto& centers = pop.discrete().centers;
      plan.entries[a].reserve(centers.size());
      for (const Vec2& c : centers)
        plan.entries[a].push_back(pop.desired_velocity +
                                  social_velocity_at(c, observer, state));
    } else {
      const Grid& g = state.grid;
      const PreparedSources prepared = prepare_sources(observer, state);
      const auto boxes = influence_boxes(observer, state, prepared);
      auto& entries = plan.entries[a];
      entries.resize(static_cast<std::size_t>(g.cell_count()),
                     pop.desired_velocity);
      for (int k = 1; k <= g.ny(); ++k) {
        for (int j = 1; j <= g.nx(); ++j) {
          bool inside = false;
          for (const auto& box : boxes)
            if (box.contains(j, k)) {
              inside = true;
              break;
            }
          if (!inside) continue;  // social velocity provably zero
          entries[g.flat(CellIndex{j, k})] =
              midpoint_velocity_impl(CellIndex{j, k}, observer, state, prepared);
        }
      }
    }
    for (const Vec2& v : plan.entries[a])
      plan.max_speed = std::max(plan.max_speed, v.norm());
  }
  return plan;
}

}  // namespace crowdsim

#include "crowdsim/diagnostics.hpp"

#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>
#include <tuple>

#include "crowdsim/numeric.hpp"
#include "crowdsim/velocity.hpp"

namespace crowdsim {
namespace {

/// Scalar analogue of the velocity quadrature stencil: potential weights of
/// a density source against observer midpoints, per lattice offset.
struct PotentialStencil {
  int rx = 0;
  int ry = 0;
  std::vector<double> weights;

  double at(int dj, int dk) const {
    return weights[static_cast<std::size_t>(dk + ry) * (2 * rx + 1) +
                   (dj + rx)];
  }
};

PotentialStencil build_potential_stencil(const Grid& g,
                                         const RadialPotential& w) {
  const double support = w.support_radius();
  PotentialStencil st;
  st.rx = static_cast<int>(std::ceil(support / g.hx() + 0.5)) + 1;
  st.ry = static_cast<int>(std::ceil(support / g.hy() + 0.5)) + 1;
  st.weights.assign(static_cast<std::size_t>(2 * st.ry + 1) * (2 * st.rx + 1),
                    0.0);
  const double cell_quarter = g.hx() * g.hy() / 4.0;
  for (int dk = -st.ry; dk <= st.ry; ++dk) {
    for (int dj = -st.rx; dj <= st.rx; ++dj) {
      double sum = 0.0;
      for (int ay = 0; ay <= 1; ++ay) {
        for (int ax = 0; ax <= 1; ++ax) {
          const Vec2 d{(dj + (ax - 0.5)) * g.hx(), (dk + (ay - 0.5)) * g.hy()};
          const double s = d.norm();
          if (s >= support) continue;
          sum += w(s);
        }
      }
      st.weights[static_cast<std::size_t>(dk + st.ry) * (2 * st.rx + 1) +
                 (dj + st.rx)] = cell_quarter * sum;
    }
  }
  return st;
}

double gather_potential(const DensityField& field, CellIndex obs,
                        const PotentialStencil& st) {
  const Grid& g = field.grid();
  double acc = 0.0;
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

/// (W * mu_src)(x) for a free point x against a density source:
/// four-vertex rule per cell, midpoint rule when x lies on a cell vertex.
double point_potential_from_density(Vec2 x, const DensityField& field,
                                    const RadialPotential& w) {
  const Grid& g = field.grid();
  const double support = w.support_radius();
  const double tol = vertex_tolerance(g);
  const double cell_area = g.hx() * g.hy();

  const int p_lo = std::max(1, static_cast<int>(std::floor((x.x - support) / g.hx())));
  const int p_hi = std::min(g.nx(), static_cast<int>(std::floor((x.x + support) / g.hx())) + 2);
  const int q_lo = std::max(1, static_cast<int>(std::floor((x.y - support) / g.hy())));
  const int q_hi = std::min(g.ny(), static_cast<int>(std::floor((x.y + support) / g.hy())) + 2);

  double acc = 0.0;
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
        const double s = (g.midpoint(cell) - x).norm();
        if (s < support) acc += rho * cell_area * w(s);
      } else {
        double sum = 0.0;
        for (const Vec2& v : verts) {
          const double s = (v - x).norm();
          if (s < support) sum += w(s);
        }
        acc += rho * (cell_area / 4.0) * sum;
      }
    }
  }
  return acc;
}

/// (W * mu_src)(ym) for an observer midpoint against a discrete source; a
/// source point on the midpoint is averaged over the four cell vertices.
double midpoint_potential_from_discrete(CellIndex obs, const Grid& g,
                                        const DiscreteMeasure& src,
                                        const RadialPotential& w) {
  const double support = w.support_radius();
  const double tol = vertex_tolerance(g);
  const Vec2 ym = g.midpoint(obs);
  double acc = 0.0;
  for (const Vec2& c : src.centers) {
    const double s = (c - ym).norm();
    if (s <= tol) {
      double sum = 0.0;
      for (const Vec2& v : g.vertices(obs)) {
        const double sv = (c - v).norm();
        if (sv < support) sum += w(sv);
      }
      acc += 0.25 * sum;
      continue;
    }
    if (s < support) acc += w(s);
  }
  return src.weight * acc;
}

}  // namespace

EntropyConfig EntropyConfig::build(const SimState& state) {
  EntropyConfig cfg;
  cfg.count_ = static_cast<int>(state.populations.size());
  cfg.confinement_slopes_.reserve(state.populations.size());
  for (const auto& p : state.populations)
    cfg.confinement_slopes_.push_back(p.desired_velocity);
  cfg.potentials_.resize(static_cast<std::size_t>(cfg.count_) * cfg.count_);
  for (int a = 0; a < cfg.count_; ++a)
    for (int b = 0; b < cfg.count_; ++b) {
      const auto& k = state.interactions.get(a, b);
      if (k)
        cfg.potentials_[static_cast<std::size_t>(a) * cfg.count_ + b] =
            RadialPotential(*k);
    }

  for (const auto& p : state.populations) {
    if (p.anisotropy.sigma() != 1.0) {
      cfg.reason_ = "population '" + p.id +
                    "' has sigma != 1 (anisotropic perception breaks the "
                    "gradient structure)";
      return cfg;
    }
  }
  if (!state.interactions.symmetric()) {
    cfg.reason_ =
        "interaction table is asymmetric (symmetric interactions are "
        "required for the entropy inequality)";
  }
  return cfg;
}

double entropy(const SimState& state, const EntropyConfig& cfg) {
  if (!cfg.valid()) throw EntropyGateError(cfg.invalid_reason());

  const Grid& g = state.grid;
  const double cell_area = g.hx() * g.hy();
  const int n = static_cast<int>(state.populations.size());
  NeumaierSum total;

  for (int a = 0; a < n; ++a) {
    const Population& pop = state.populations[a];
    if (pop.is_discrete()) {
      const DiscreteMeasure& mine = pop.discrete();
      NeumaierSum part;
      for (std::size_t i = 0; i < mine.centers.size(); ++i) {
        const Vec2 x = mine.centers[i];
        double pair_term = 0.0;
        for (int b = 0; b < n; ++b) {
          const auto& w = cfg.potential(a, b);
          if (!w) continue;
          const Population& src = state.populations[b];
          if (src.is_discrete()) {
            const DiscreteMeasure& other = src.discrete();
            double sum = 0.0;
            for (std::size_t j = 0; j < other.centers.size(); ++j) {
              if (b == a && j == i) continue;  // no self-interaction
              if (other.centers[j] == x) continue;
              const double s = (other.centers[j] - x).norm();
              if (s < w->support_radius()) sum += (*w)(s);
            }
            pair_term += other.weight * sum;
          } else {
            pair_term += point_potential_from_density(x, src.density(), *w);
          }
        }
        part.add(cfg.confinement(a, x) + 0.5 * pair_term);
      }
      total.add(mine.weight * part.value());
    } else {
      const DensityField& field = pop.density();
      std::vector<std::optional<PotentialStencil>> stencils(n);
      for (int b = 0; b < n; ++b) {
        const auto& w = cfg.potential(a, b);
        if (w && !state.populations[b].is_discrete())
          stencils[b] = build_potential_stencil(g, *w);
      }
      NeumaierSum part;
      for (int k = 1; k <= g.ny(); ++k) {
        for (int j = 1; j <= g.nx(); ++j) {
          const CellIndex cell{j, k};
          const double rho = field(cell);
          if (rho == 0.0) continue;
          const Vec2 ym = g.midpoint(cell);
          double pair_term = 0.0;
          for (int b = 0; b < n; ++b) {
            const auto& w = cfg.potential(a, b);
            if (!w) continue;
            const Population& src = state.populations[b];
            if (src.is_discrete()) {
              pair_term += midpoint_potential_from_discrete(cell, g,
                                                            src.discrete(), *w);
            } else {
              pair_term += gather_potential(src.density(), cell, *stencils[b]);
            }
          }
          part.add(rho * (cfg.confinement(a, ym) + 0.5 * pair_term));
        }
      }
      total.add(cell_area * part.value());
    }
  }
  return total.value();
}

EntropyAuditResult entropy_monotonicity_audit(const SimState& initial,
                                              int steps,
                                              const StepOptions& options) {
  const EntropyConfig cfg = EntropyConfig::build(initial);
  if (!cfg.valid()) throw EntropyGateError(cfg.invalid_reason());

  const auto worst_change = [&](SimState state, int n_steps) {
    double prev = entropy(state, cfg);
    const double first = prev;
    double worst = std::numeric_limits<double>::infinity();
    for (int n = 0; n < n_steps; ++n) {
      auto [next, report] = step(state, options);
      state = std::move(next);
      const double s = entropy(state, cfg);
      worst = std::min(worst, s - prev);
      prev = s;
    }
    return std::make_tuple(worst, first, prev);
  };

  EntropyAuditResult out;
  auto [worst, first, last] = worst_change(initial, steps);
  out.worst_change = worst;
  out.initial_entropy = first;
  out.final_entropy = last;

  SimState halved = initial;
  halved.dt = initial.dt / 2.0;
  auto [worst_half, first_half, last_half] = worst_change(halved, 2 * steps);
  (void)first_half;
  (void)last_half;
  out.worst_change_half = worst_half;

  out.empirical_constant =
      std::max(0.0, -out.worst_change) / (initial.dt * initial.dt);
  return out;
}

double predicted_equilibrium_distance(double strength, double repel_radius,
                                      double speed) {
  return strength * repel_radius / (speed + strength);
}

double predicted_empty_zone_radius(double weight, double strength,
                                   double repel_radius, double speed) {
  return weight * strength * repel_radius / (2.0 * speed + weight * strength);
}

ShapeMetrics shape_metrics(const DensityField& field, double threshold) {
  const Grid& g = field.grid();
  const double cell_area = g.hx() * g.hy();
  double mass = 0.0;
  Vec2 first_moment{};
  for (int k = 1; k <= g.ny(); ++k)
    for (int j = 1; j <= g.nx(); ++j) {
      const double rho = field(CellIndex{j, k});
      if (rho < threshold) continue;
      const double m = rho * cell_area;
      mass += m;
      first_moment += m * g.midpoint(CellIndex{j, k});
    }
  if (!(mass > 0.0))
    throw std::invalid_argument("shape_metrics: no mass above threshold");

  ShapeMetrics out;
  out.centroid = first_moment / mass;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (int k = 1; k <= g.ny(); ++k)
    for (int j = 1; j <= g.nx(); ++j) {
      const double rho = field(CellIndex{j, k});
      if (rho < threshold) continue;
      const Vec2 d = g.midpoint(CellIndex{j, k}) - out.centroid;
      const double m = rho * cell_area;
      sxx += m * d.x * d.x;
      sxy += m * d.x * d.y;
      syy += m * d.y * d.y;
    }
  const double mean = 0.5 * (sxx + syy);
  const double disc = std::sqrt(0.25 * (sxx - syy) * (sxx - syy) + sxy * sxy);
  out.lambda_max = (mean + disc) / mass;
  out.lambda_min = (mean - disc) / mass;
  return out;
}

double front_gap(const DensityField& field, Vec2 origin, Vec2 direction,
                 double threshold) {
  const Grid& g = field.grid();
  const double dn = direction.norm();
  if (!(dn > 0.0))
    throw std::invalid_argument("front_gap: direction must be nonzero");
  const Vec2 dir = direction / dn;
  const double lateral_tol = 0.5 * std::max(g.hx(), g.hy());

  double best = std::numeric_limits<double>::infinity();
  for (int k = 1; k <= g.ny(); ++k)
    for (int j = 1; j <= g.nx(); ++j) {
      if (field(CellIndex{j, k}) < threshold) continue;
      const Vec2 d = g.midpoint(CellIndex{j, k}) - origin;
      const double along = d.dot(dir);
      if (along <= 0.0) continue;
      const Vec2 lateral = d - along * dir;
      if (lateral.norm() > lateral_tol) continue;
      best = std::min(best, along);
    }
  return best;
}

McEstimate mc_overlap_oracle(const Rect& a, const Rect& b, int samples,
                             std::uint64_t seed) {
  if (samples < 1)
    throw std::invalid_argument("mc_overlap_oracle: samples must be >= 1");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ux(a.lo.x, a.hi.x);
  std::uniform_real_distribution<double> uy(a.lo.y, a.hi.y);
  long hits = 0;
  for (int i = 0; i < samples; ++i)
    if (b.contains({ux(rng), uy(rng)})) ++hits;
  const double p = static_cast<double>(hits) / samples;
  McEstimate out;
  out.value = p * a.area();
  out.standard_error = a.area() * std::sqrt(p * (1.0 - p) / samples);
  return out;
}

}  // namespace crowdsim

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "crowdsim/errors.hpp"
#include "crowdsim/population.hpp"
#include "crowdsim/transport.hpp"

namespace crowdsim {

/// Entropy ingredients of a state: per-population confinement potential
/// V(x) = v_des . x and the interaction-potential table recovered from the
/// kernels. Valid only for isotropic perception (sigma = 1 everywhere) and
/// a symmetric kernel table.
class EntropyConfig {
 public:
  static EntropyConfig build(const SimState& state);

  bool valid() const { return reason_.empty(); }
  const std::string& invalid_reason() const { return reason_; }

  double confinement(int pop, Vec2 x) const {
    return confinement_slopes_[pop].dot(x);
  }
  const std::optional<RadialPotential>& potential(int observer,
                                                  int source) const {
    return potentials_[static_cast<std::size_t>(observer) * count_ + source];
  }
  int population_count() const { return count_; }

 private:
  int count_ = 0;
  std::vector<Vec2> confinement_slopes_;
  std::vector<std::optional<RadialPotential>> potentials_;
  std::string reason_;
};

/// Entropy S = sum over populations of the integral of V + (1/2) W * mu
/// against the population's measure, quadratured exactly like the dynamics
/// (midpoint rule outside, four-vertex rule inside, same fallbacks).
/// Throws EntropyGateError when the config is invalid.
double entropy(const SimState& state, const EntropyConfig& cfg);

struct EntropyAuditResult {
  double worst_change = 0.0;       // min over n of S_{n+1} - S_n
  double worst_change_half = 0.0;  // same for a re-run at dt/2
  double empirical_constant = 0.0; // max(0, -worst_change) / dt^2
  double initial_entropy = 0.0;
  double final_entropy = 0.0;
};

/// Runs the scheme from the given state for `steps` steps, then again at
/// half the time step, and reports the worst per-step entropy change of
/// each run. Deficits are expected to shrink at least quadratically.
EntropyAuditResult entropy_monotonicity_audit(const SimState& initial,
                                              int steps,
                                              const StepOptions& options = {});

/// Separation at which desired velocity and repulsion balance for two
/// opposing walkers: F*Rr/(speed + F).
double predicted_equilibrium_distance(double strength, double repel_radius,
                                      double speed);

/// Radius of the empty zone a point mass of weight M carves into an
/// oncoming crowd: M*F*Rr/(2*speed + M*F).
double predicted_empty_zone_radius(double weight, double strength,
                                   double repel_radius, double speed);

struct ShapeMetrics {
  Vec2 centroid;
  double lambda_max = 0.0;
  double lambda_min = 0.0;
  double isotropy() const { return lambda_max > 0.0 ? lambda_min / lambda_max : 1.0; }
};

/// Mass-weighted centroid and principal second moments over cells with
/// density >= threshold. Throws std::invalid_argument when no mass
/// qualifies.
ShapeMetrics shape_metrics(const DensityField& field, double threshold);

/// Distance along `direction` from `origin` to the nearest above-threshold
/// cell midpoint within half a cell of the ray; +infinity when none exists.
double front_gap(const DensityField& field, Vec2 origin, Vec2 direction,
                 double threshold);

struct McEstimate {
  double value = 0.0;
  double standard_error = 0.0;
};

/// Monte-Carlo overlap estimate (hit fraction times area of a), used as an
/// independent oracle for the exact closed form.
McEstimate mc_overlap_oracle(const Rect& a, const Rect& b, int samples,
                             std::uint64_t seed = 12345);

}  // namespace crowdsim

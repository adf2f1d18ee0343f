#pragma once

#include <cassert>
#include <optional>
#include <stdexcept>

#include "crowdsim/geometry.hpp"

namespace crowdsim {

enum class KernelKind { AttractRepel, RepelOnly };

/// Radial interaction law. Negative values repel (the magnitude multiplies
/// the unit vector from observer toward source), positive values attract.
///
/// RepelOnly:    f(s) = F*(1 - Rr/s)                         on (0, Rr], 0 beyond.
/// AttractRepel: f(s) = F*(1 - Rr/s)                         on (0, Rr],
///               f(s) = -F/(Rr*(Ra-Rr)) * (s-Rr)*(s-Ra)      on (Rr, Ra], 0 beyond.
class InteractionKernel {
 public:
  static InteractionKernel attract_repel(double strength, double repel_radius,
                                         double attract_radius) {
    if (!(strength >= 0.0))
      throw std::invalid_argument("kernel: strength must be >= 0");
    if (!(repel_radius > 0.0) || !(repel_radius < attract_radius))
      throw std::invalid_argument("kernel: requires 0 < Rr < Ra");
    return InteractionKernel(KernelKind::AttractRepel, strength, repel_radius,
                             attract_radius);
  }

  static InteractionKernel repel_only(double strength, double repel_radius) {
    if (!(strength >= 0.0))
      throw std::invalid_argument("kernel: strength must be >= 0");
    if (!(repel_radius > 0.0))
      throw std::invalid_argument("kernel: requires Rr > 0");
    return InteractionKernel(KernelKind::RepelOnly, strength, repel_radius,
                             repel_radius);
  }

  KernelKind kind() const { return kind_; }
  double strength() const { return strength_; }
  double repel_radius() const { return repel_radius_; }
  double attract_radius() const {
    assert(kind_ == KernelKind::AttractRepel);
    return attract_radius_;
  }
  /// Radius beyond which the interaction vanishes identically.
  double support_radius() const { return attract_radius_; }

  /// Signed magnitude at distance s. Pre: s > 0 (callers exclude
  /// self-interaction).
  double operator()(double s) const {
    assert(s > 0.0);
    if (s <= repel_radius_) return strength_ * (1.0 - repel_radius_ / s);
    if (kind_ == KernelKind::AttractRepel && s <= attract_radius_) {
      return -strength_ / (repel_radius_ * (attract_radius_ - repel_radius_)) *
             (s - repel_radius_) * (s - attract_radius_);
    }
    return 0.0;
  }

  bool operator==(const InteractionKernel&) const = default;

 private:
  InteractionKernel(KernelKind kind, double strength, double repel_radius,
                    double attract_radius)
      : kind_(kind),
        strength_(strength),
        repel_radius_(repel_radius),
        attract_radius_(attract_radius) {}

  KernelKind kind_;
  double strength_;
  double repel_radius_;
  double attract_radius_;  // == repel_radius_ for RepelOnly
};

/// Directional perception weight g(theta) = sigma + (1-sigma)*(1+cos)/2.
/// sigma = 1 means isotropic perception.
class Anisotropy {
 public:
  explicit Anisotropy(double sigma) : sigma_(sigma) {
    if (!(sigma >= 0.0 && sigma <= 1.0))
      throw std::invalid_argument("anisotropy: sigma must be in [0,1]");
  }

  double sigma() const { return sigma_; }

  /// Weight in [sigma, 1]; tiny numerical overshoot of |cos| is clamped.
  double weight(double cos_theta) const {
    const double c = std::clamp(cos_theta, -1.0, 1.0);
    return sigma_ + (1.0 - sigma_) * 0.5 * (1.0 + c);
  }

  bool operator==(const Anisotropy&) const = default;

 private:
  double sigma_;
};

/// Cosine of the angle under which x sees y when heading along v_des.
/// Returns nullopt when v_des vanishes; callers then use weight 1.
/// Pre: y != x.
inline std::optional<double> cos_angle(Vec2 x, Vec2 y, Vec2 v_des) {
  if (v_des.x == 0.0 && v_des.y == 0.0) return std::nullopt;
  const Vec2 d = y - x;
  const double dn = d.norm();
  assert(dn > 0.0);
  return std::clamp(d.dot(v_des) / (dn * v_des.norm()), -1.0, 1.0);
}

/// Radial interaction potential W with W' = -f, normalized so that W
/// vanishes identically outside the kernel support and is continuous at
/// every breakpoint.
class RadialPotential {
 public:
  explicit RadialPotential(const InteractionKernel& k)
      : strength_(k.strength()),
        repel_radius_(k.repel_radius()),
        attract_radius_(k.support_radius()) {
    if (k.kind() == KernelKind::AttractRepel) {
      const double rr = repel_radius_, ra = attract_radius_;
      cubic_scale_ = strength_ / (rr * (ra - rr));
      value_at_rr_ = poly_antiderivative(ra) - poly_antiderivative(rr);
    } else {
      cubic_scale_ = 0.0;
      value_at_rr_ = 0.0;
    }
  }

  double support_radius() const { return attract_radius_; }

  /// Pre: s > 0.
  double operator()(double s) const {
    assert(s > 0.0);
    if (s >= attract_radius_) return 0.0;
    if (s >= repel_radius_) {
      // W(s) = integral of f from s to Ra
      return poly_antiderivative(attract_radius_) - poly_antiderivative(s);
    }
    // W(s) = W(Rr) + integral of f from s to Rr, with f = F*(1 - Rr/u)
    return value_at_rr_ +
           strength_ * (repel_radius_ * std::log(s / repel_radius_) +
                        (repel_radius_ - s));
  }

 private:
  // Antiderivative of the attraction branch f(u) = -c*(u-Rr)*(u-Ra).
  double poly_antiderivative(double u) const {
    const double rr = repel_radius_, ra = attract_radius_;
    return -cubic_scale_ *
           (u * u * u / 3.0 - (rr + ra) * u * u / 2.0 + rr * ra * u);
  }

  double strength_;
  double repel_radius_;
  double attract_radius_;
  double cubic_scale_;
  double value_at_rr_;
};

}  // namespace crowdsim

#pragma once

#include <stdexcept>
#include <string>

#include "crowdsim/geometry.hpp"

namespace crowdsim {

/// Two mass points closer than the merge-guard distance; the velocity field
/// is no longer trustworthy and the step must abort.
class MergeGuardError : public std::runtime_error {
 public:
  MergeGuardError(std::string message, Vec2 position, double distance)
      : std::runtime_error(std::move(message)),
        position_(position),
        distance_(distance) {}

  Vec2 position() const { return position_; }
  double distance() const { return distance_; }

 private:
  Vec2 position_;
  double distance_;
};

/// Mass left the domain while boundary loss is disallowed.
class BoundaryLossError : public std::runtime_error {
 public:
  BoundaryLossError(std::string message, std::string population_id,
                    double lost_mass, Vec2 position = {})
      : std::runtime_error(std::move(message)),
        population_id_(std::move(population_id)),
        lost_mass_(lost_mass),
        position_(position) {}

  const std::string& population_id() const { return population_id_; }
  double lost_mass() const { return lost_mass_; }
  Vec2 position() const { return position_; }

 private:
  std::string population_id_;
  double lost_mass_;
  Vec2 position_;
};

/// Entropy requested for a configuration outside the validity gate.
class EntropyGateError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace crowdsim

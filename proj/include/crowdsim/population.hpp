#pragma once

#include <limits>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "crowdsim/geometry.hpp"
#include "crowdsim/kernels.hpp"

namespace crowdsim {

/// Weighted sum of point masses: mass M per particle (the proportionality
/// constant comparing head counts to kilograms).
struct DiscreteMeasure {
  double weight = 1.0;
  std::vector<Vec2> centers;
};

/// Piecewise-constant density on a grid, mass per unit area, row-major
/// storage (k outer, j inner).
class DensityField {
 public:
  explicit DensityField(const Grid& grid, double fill = 0.0)
      : grid_(grid),
        values_(static_cast<std::size_t>(grid.cell_count()), fill) {}

  const Grid& grid() const { return grid_; }
  double operator()(CellIndex c) const { return values_[grid_.flat(c)]; }
  double& operator()(CellIndex c) { return values_[grid_.flat(c)]; }
  const std::vector<double>& values() const { return values_; }
  std::vector<double>& values() { return values_; }

  double total_mass() const;
  double max_value() const;

  /// Smallest index box covering all cells with a value above the
  /// threshold; nullopt when none qualifies.
  struct IndexBox {
    int j_lo, j_hi, k_lo, k_hi;
  };
  std::optional<IndexBox> occupied_box(double threshold = 0.0) const;

 private:
  Grid grid_;
  std::vector<double> values_;
};

struct Population {
  std::string id;
  std::variant<DiscreteMeasure, DensityField> measure;
  Vec2 desired_velocity{0.0, 0.0};
  Anisotropy anisotropy{1.0};

  bool is_discrete() const {
    return std::holds_alternative<DiscreteMeasure>(measure);
  }
  const DiscreteMeasure& discrete() const {
    return std::get<DiscreteMeasure>(measure);
  }
  DiscreteMeasure& discrete() { return std::get<DiscreteMeasure>(measure); }
  const DensityField& density() const {
    return std::get<DensityField>(measure);
  }
  DensityField& density() { return std::get<DensityField>(measure); }
};

double total_mass(const Population& p);

/// Kernel per ordered (observer, source) pair; absent entries mean no
/// interaction.
class InteractionTable {
 public:
  explicit InteractionTable(int population_count)
      : n_(population_count),
        kernels_(static_cast<std::size_t>(n_) * n_, std::nullopt) {}

  void set(int observer, int source, const InteractionKernel& k) {
    kernels_[index(observer, source)] = k;
  }
  const std::optional<InteractionKernel>& get(int observer, int source) const {
    return kernels_[index(observer, source)];
  }
  int population_count() const { return n_; }

  /// True when every pair (a,b) carries the same kernel as (b,a),
  /// including both-absent.
  bool symmetric() const {
    for (int a = 0; a < n_; ++a)
      for (int b = a + 1; b < n_; ++b)
        if (get(a, b) != get(b, a)) return false;
    return true;
  }

 private:
  std::size_t index(int observer, int source) const {
    return static_cast<std::size_t>(observer) * n_ + source;
  }

  int n_;
  std::vector<std::optional<InteractionKernel>> kernels_;
};

/// Whole simulation state at one time slice. Immutable during a step's
/// velocity phase; replaced wholesale at step commit.
struct SimState {
  Grid grid;
  double dt = 0.01;
  int step_index = 0;
  double time = 0.0;
  std::vector<Population> populations;
  InteractionTable interactions{0};

  int index_of(const std::string& id) const;
};

/// Minimum distance over all pairs of particle centers across all discrete
/// populations; +infinity when fewer than two particles exist.
double min_pairwise_distance(const SimState& s);

}  // namespace crowdsim

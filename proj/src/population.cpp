#include "crowdsim/population.hpp"

#include <stdexcept>

#include "crowdsim/numeric.hpp"

namespace crowdsim {

double DensityField::total_mass() const {
  NeumaierSum sum;
  for (double v : values_) sum.add(v);
  return sum.value() * (grid_.hx() * grid_.hy());
}

double DensityField::max_value() const {
  double m = 0.0;
  for (double v : values_) m = std::max(m, v);
  return m;
}

std::optional<DensityField::IndexBox> DensityField::occupied_box(
    double threshold) const {
  IndexBox box{grid_.nx() + 1, 0, grid_.ny() + 1, 0};
  bool any = false;
  for (int k = 1; k <= grid_.ny(); ++k) {
    for (int j = 1; j <= grid_.nx(); ++j) {
      if ((*this)(CellIndex{j, k}) > threshold) {
        any = true;
        box.j_lo = std::min(box.j_lo, j);
        box.j_hi = std::max(box.j_hi, j);
        box.k_lo = std::min(box.k_lo, k);
        box.k_hi = std::max(box.k_hi, k);
      }
    }
  }
  if (!any) return std::nullopt;
  return box;
}

double total_mass(const Population& p) {
  if (p.is_discrete()) {
    const auto& d = p.discrete();
    return d.weight * static_cast<double>(d.centers.size());
  }
  return p.density().total_mass();
}

int SimState::index_of(const std::string& id) const {
  for (std::size_t i = 0; i < populations.size(); ++i)
    if (populations[i].id == id) return static_cast<int>(i);
  throw std::out_of_range("no population with id '" + id + "'");
}

double min_pairwise_distance(const SimState& s) {
  std::vector<Vec2> all;
  for (const auto& p : s.populations)
    if (p.is_discrete())
      all.insert(all.end(), p.discrete().centers.begin(),
                 p.discrete().centers.end());
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + 1 < all.size(); ++i)
    for (std::size_t j = i + 1; j < all.size(); ++j)
      best = std::min(best, (all[j] - all[i]).norm());
  return best;
}

}  // namespace crowdsim

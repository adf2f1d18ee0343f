#pragma once

// Test-only oracles, kept independent of the implementation paths they
// check.

#include <cmath>
#include <vector>

#include "crowdsim/geometry.hpp"

namespace crowdsim::testing {

/// Independent remap oracle: clip one rectangle against another as a
/// general polygon (Sutherland-Hodgman) and measure the result with the
/// shoelace formula.
inline double polygon_clip_area(const Rect& subject, const Rect& clip) {
  std::vector<Vec2> poly = {subject.lo,
                            {subject.hi.x, subject.lo.y},
                            subject.hi,
                            {subject.lo.x, subject.hi.y}};
  struct Edge {
    int axis;
    double value;
    bool keep_below;
  };
  const Edge edges[4] = {{0, clip.lo.x, false},
                         {0, clip.hi.x, true},
                         {1, clip.lo.y, false},
                         {1, clip.hi.y, true}};
  for (const Edge& e : edges) {
    std::vector<Vec2> next;
    const auto inside = [&](Vec2 p) {
      const double v = e.axis == 0 ? p.x : p.y;
      return e.keep_below ? v <= e.value : v >= e.value;
    };
    const auto intersect = [&](Vec2 a, Vec2 b) {
      const double va = e.axis == 0 ? a.x : a.y;
      const double vb = e.axis == 0 ? b.x : b.y;
      const double t = (e.value - va) / (vb - va);
      return a + t * (b - a);
    };
    for (std::size_t i = 0; i < poly.size(); ++i) {
      const Vec2 cur = poly[i];
      const Vec2 prev = poly[(i + poly.size() - 1) % poly.size()];
      if (inside(cur)) {
        if (!inside(prev)) next.push_back(intersect(prev, cur));
        next.push_back(cur);
      } else if (inside(prev)) {
        next.push_back(intersect(prev, cur));
      }
    }
    poly = std::move(next);
    if (poly.empty()) return 0.0;
  }
  double twice_area = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Vec2 a = poly[i];
    const Vec2 b = poly[(i + 1) % poly.size()];
    twice_area += a.x * b.y - b.x * a.y;
  }
  return std::abs(twice_area) / 2.0;
}

}  // namespace crowdsim::testing

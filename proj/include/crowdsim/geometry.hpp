#pragma once

#include <array>
#include <cmath>
#include <optional>
#include <stdexcept>

namespace crowdsim {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  constexpr Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
  constexpr Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
  constexpr Vec2 operator*(double s) const { return {x * s, y * s}; }
  constexpr Vec2 operator/(double s) const { return {x / s, y / s}; }
  constexpr Vec2& operator+=(Vec2 o) {
    x += o.x;
    y += o.y;
    return *this;
  }
  constexpr bool operator==(const Vec2&) const = default;

  constexpr double dot(Vec2 o) const { return x * o.x + y * o.y; }
  double norm() const { return std::hypot(x, y); }
};

constexpr Vec2 operator*(double s, Vec2 v) { return {s * v.x, s * v.y}; }

/// Axis-aligned rectangle, lo <= hi componentwise.
struct Rect {
  Vec2 lo;
  Vec2 hi;

  constexpr double width() const { return hi.x - lo.x; }
  constexpr double height() const { return hi.y - lo.y; }
  constexpr double area() const { return width() * height(); }
  constexpr Rect translated(Vec2 d) const { return {lo + d, hi + d}; }
  constexpr bool contains(Vec2 p) const {
    return p.x >= lo.x && p.x <= hi.x && p.y >= lo.y && p.y <= hi.y;
  }
};

/// Area of the intersection of two axis-aligned rectangles, 0 if disjoint.
constexpr double overlap_area(const Rect& a, const Rect& b) {
  const double w = std::min(a.hi.x, b.hi.x) - std::max(a.lo.x, b.lo.x);
  const double h = std::min(a.hi.y, b.hi.y) - std::max(a.lo.y, b.lo.y);
  if (w <= 0.0 || h <= 0.0) return 0.0;
  return w * h;
}

/// 1-based cell index: j along the length axis, k along the width axis.
struct CellIndex {
  int j = 0;
  int k = 0;
  constexpr bool operator==(const CellIndex&) const = default;
};

/// Rectangular domain [0,L]x[0,W] tiled by nx*ny cells.
///
/// Cells are half-open for point lookup; the top/right domain boundary is
/// closed so the whole domain is covered.
class Grid {
 public:
  Grid() : Grid(1.0, 1.0, 1, 1) {}

  Grid(double length, double width, int nx, int ny)
      : length_(length), width_(width), nx_(nx), ny_(ny) {
    if (!(length > 0.0) || !(width > 0.0))
      throw std::invalid_argument("Grid: domain extents must be positive");
    if (nx < 1 || ny < 1)
      throw std::invalid_argument("Grid: cell counts must be >= 1");
    hx_ = length_ / nx_;
    hy_ = width_ / ny_;
  }

  double length() const { return length_; }
  double width() const { return width_; }
  int nx() const { return nx_; }
  int ny() const { return ny_; }
  double hx() const { return hx_; }
  double hy() const { return hy_; }
  int cell_count() const { return nx_ * ny_; }
  Rect bounds() const { return {{0.0, 0.0}, {length_, width_}}; }

  bool contains(Vec2 p) const {
    return p.x >= 0.0 && p.x <= length_ && p.y >= 0.0 && p.y <= width_;
  }
  bool strictly_inside(Vec2 p) const {
    return p.x > 0.0 && p.x < length_ && p.y > 0.0 && p.y < width_;
  }

  /// Cell containing p, or nullopt if p lies outside the domain.
  std::optional<CellIndex> cell_of(Vec2 p) const {
    if (!contains(p)) return std::nullopt;
    const int j = std::min(nx_, static_cast<int>(std::floor(p.x / hx_)) + 1);
    const int k = std::min(ny_, static_cast<int>(std::floor(p.y / hy_)) + 1);
    return CellIndex{std::max(1, j), std::max(1, k)};
  }

  bool valid(CellIndex c) const {
    return c.j >= 1 && c.j <= nx_ && c.k >= 1 && c.k <= ny_;
  }

  Vec2 midpoint(CellIndex c) const {
    return {(c.j - 0.5) * hx_, (c.k - 0.5) * hy_};
  }

  /// The four cell corners, in the order min-min, max-min, min-max, max-max.
  std::array<Vec2, 4> vertices(CellIndex c) const {
    const double x0 = (c.j - 1) * hx_, x1 = c.j * hx_;
    const double y0 = (c.k - 1) * hy_, y1 = c.k * hy_;
    return {Vec2{x0, y0}, Vec2{x1, y0}, Vec2{x0, y1}, Vec2{x1, y1}};
  }

  Rect cell_rect(CellIndex c) const {
    return {{(c.j - 1) * hx_, (c.k - 1) * hy_}, {c.j * hx_, c.k * hy_}};
  }

  /// Row-major flat index, k outer and j inner.
  std::size_t flat(CellIndex c) const {
    return static_cast<std::size_t>(c.k - 1) * nx_ + (c.j - 1);
  }

  bool operator==(const Grid& o) const {
    return length_ == o.length_ && width_ == o.width_ && nx_ == o.nx_ &&
           ny_ == o.ny_;
  }

 private:
  double length_;
  double width_;
  int nx_;
  int ny_;
  double hx_;
  double hy_;
};

}  // namespace crowdsim

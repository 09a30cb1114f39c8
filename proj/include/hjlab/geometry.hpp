#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace hjlab {

struct Point {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point&, const Point&) = default;
};

inline double distance(Point a, Point b) { return std::hypot(a.x - b.x, a.y - b.y); }

/// Closed axis-aligned rectangle [x0,x1] x [y0,y1].
struct Rect {
  double x0 = 0.0;
  double x1 = 0.0;
  double y0 = 0.0;
  double y1 = 0.0;

  double width() const { return x1 - x0; }
  double height() const { return y1 - y0; }

  Rect inflated(double r) const { return Rect{x0 - r, x1 + r, y0 - r, y1 + r}; }

  bool contains(Point p) const { return p.x >= x0 && p.x <= x1 && p.y >= y0 && p.y <= y1; }

  friend bool operator==(const Rect&, const Rect&) = default;
};

/// Gap between the real value v and the closed interval [lo, hi] (0 inside).
inline double gap(double v, double lo, double hi) {
  if (v < lo) return lo - v;
  if (v > hi) return v - hi;
  return 0.0;
}

/// Gap between two closed intervals on the line.
inline double interval_gap(double a0, double a1, double b0, double b1) {
  if (a1 < b0) return b0 - a1;
  if (b1 < a0) return a0 - b1;
  return 0.0;
}

struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  friend bool operator==(const Interval&, const Interval&) = default;
};

/// Sorted, disjoint list of closed intervals. Degenerate [a,a] entries are allowed.
using IntervalList = std::vector<Interval>;

/// Removes the open interval (a, b) from every closed interval in `set`.
/// Endpoints a and b survive when they were present.
inline void subtract_open(IntervalList& set, double a, double b) {
  if (!(a < b)) return;
  IntervalList out;
  out.reserve(set.size() + 1);
  for (const Interval& iv : set) {
    if (b <= iv.lo || a >= iv.hi) {
      out.push_back(iv);
      continue;
    }
    if (iv.lo <= a) out.push_back(Interval{iv.lo, a});
    if (iv.hi >= b) out.push_back(Interval{b, iv.hi});
  }
  set = std::move(out);
}

/// Distance from v to the closure of the union; +inf when empty.
inline double distance_to(const IntervalList& set, double v) {
  double best = INFINITY;
  for (const Interval& iv : set) best = std::min(best, gap(v, iv.lo, iv.hi));
  return best;
}

inline bool covers(const IntervalList& set, double v) {
  return std::any_of(set.begin(), set.end(), [v](const Interval& iv) { return v >= iv.lo && v <= iv.hi; });
}

/// Floor division for signed integers.
constexpr std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

}  // namespace hjlab

#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>

#include "hjlab/geometry.hpp"

namespace hjlab {

inline constexpr int kMaxScale = 15;

/// T_k = 4^k, exact in 64-bit integers for k <= 15.
constexpr std::int64_t scale_length(int k) { return std::int64_t{1} << (2 * k); }

/// Green segments are horizontal and carry weight 1; red ones are vertical and carry weight 2.
enum class Color { green = 1, red = 2 };

inline std::string_view to_string(Color c) { return c == Color::green ? "green" : "red"; }

inline Color parse_color(std::string_view text) {
  if (text == "green" || text == "g") return Color::green;
  if (text == "red" || text == "r") return Color::red;
  throw std::invalid_argument("unknown color '" + std::string(text) + "'");
}

inline void check_scale(int k) {
  if (k < 1 || k > kMaxScale) throw std::invalid_argument("scale index must lie in [1, 15]");
}

/// A green or red segment of length 10 T_k centered on the lattice site (l, m).
struct Segment {
  Color color = Color::green;
  int k = 1;
  std::int64_t l = 0;
  std::int64_t m = 0;

  std::int64_t half_length() const { return 5 * scale_length(k); }

  /// Axial extent: abscissae for green, ordinates for red.
  double axial_lo() const { return static_cast<double>((color == Color::green ? l : m) - half_length()); }
  double axial_hi() const { return static_cast<double>((color == Color::green ? l : m) + half_length()); }
  /// The fixed transverse coordinate: the row of a green, the abscissa of a red.
  double transverse() const { return static_cast<double>(color == Color::green ? m : l); }

  Rect bounds() const {
    if (color == Color::green) return Rect{axial_lo(), axial_hi(), transverse(), transverse()};
    return Rect{transverse(), transverse(), axial_lo(), axial_hi()};
  }

  double distance_to(Point p) const {
    if (color == Color::green) return std::hypot(gap(p.x, axial_lo(), axial_hi()), p.y - transverse());
    return std::hypot(p.x - transverse(), gap(p.y, axial_lo(), axial_hi()));
  }

  double distance_to(const Rect& r) const {
    Rect b = bounds();
    return std::hypot(interval_gap(b.x0, b.x1, r.x0, r.x1), interval_gap(b.y0, b.y1, r.y0, r.y1));
  }

  Segment translated(std::int64_t dx, std::int64_t dy) const { return Segment{color, k, l + dx, m + dy}; }

  friend auto operator<=>(const Segment&, const Segment&) = default;
};

struct SegmentHash {
  std::size_t operator()(const Segment& s) const noexcept {
    std::uint64_t h = static_cast<std::uint64_t>(s.l) * 0x9E3779B97F4A7C15ull;
    h ^= static_cast<std::uint64_t>(s.m) + 0xBF58476D1CE4E5B9ull + (h << 6) + (h >> 2);
    h ^= static_cast<std::uint64_t>(s.k * 2 + (s.color == Color::red ? 1 : 0)) + (h << 6) + (h >> 2);
    return static_cast<std::size_t>(h);
  }
};

/// Surviving portion of a segment after the crossing rules.
///
/// `kept` lists the closed axial intervals whose points keep the segment's own
/// value (1 for green, 2 for red). `crossing_points` are green abscissae that a
/// dominating red overwrote with value 2.
struct ActiveSet {
  Segment owner;
  IntervalList kept;
  std::vector<double> crossing_points;
};

}  // namespace hjlab

#pragma once

// Brute-force reconstruction of the weight field from sampled segment points.
//
// Phases 1-3 are replayed point by point on a delta-spaced sampling of every
// segment near the window: each sample receives its value from the literal
// per-point crossing predicate, and c(x) is the explicit maximum of
// value - |x - y| over all positive samples, floored at 1. Nothing here uses
// Environment::active_set or Environment::eval_c, so the two can check each other.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "hjlab/environment.hpp"
#include "hjlab/geometry.hpp"
#include "hjlab/segment.hpp"

namespace hjlab {

class PhaseOracle {
 public:
  static constexpr std::size_t kMaxSamples = 20'000'000;

  struct Sample {
    Point p;
    double value;
  };

  PhaseOracle(const Environment& env, const Rect& window, double delta) : window_(window), delta_(delta) {
    if (!(delta > 0.0)) throw std::invalid_argument("delta must be positive");
    segments_ = env.segments_in(window.inflated(3.0), 0.0);
    const Rect reach = window.inflated(1.0);
    for (const Segment& s : segments_) {
      const double lo = std::max(s.axial_lo(), s.color == Color::green ? reach.x0 : reach.y0);
      const double hi = std::min(s.axial_hi(), s.color == Color::green ? reach.x1 : reach.y1);
      if (lo > hi) continue;
      if (s.color == Color::green && (s.transverse() < reach.y0 || s.transverse() > reach.y1)) continue;
      if (s.color == Color::red && (s.transverse() < reach.x0 || s.transverse() > reach.x1)) continue;
      std::vector<double> axial;
      const auto steps = static_cast<std::size_t>(std::floor((hi - lo) / delta));
      if (steps > kMaxSamples) throw std::length_error("oracle sampling exceeds the memory guard");
      for (std::size_t i = 0; i <= steps; ++i) axial.push_back(lo + static_cast<double>(i) * delta);
      axial.push_back(hi);
      for (double v = std::ceil(lo); v <= hi; v += 1.0) axial.push_back(v);
      std::sort(axial.begin(), axial.end());
      axial.erase(std::unique(axial.begin(), axial.end()), axial.end());
      for (double a : axial) {
        const Point p = s.color == Color::green ? Point{a, s.transverse()} : Point{s.transverse(), a};
        const double value = s.color == Color::green ? green_value(p) : red_value(p);
        if (value > 0.0) samples_.push_back(Sample{p, value});
      }
      if (samples_.size() > kMaxSamples) throw std::length_error("oracle sampling exceeds the memory guard");
    }
    std::sort(samples_.begin(), samples_.end(), [](const Sample& a, const Sample& b) { return a.p.x < b.p.x; });
  }

  const std::vector<Sample>& samples() const { return samples_; }

  /// max(1, max over samples of value - |x - y|). Only meaningful inside the window.
  double operator()(Point x) const {
    double best = 1.0;
    auto it = std::lower_bound(samples_.begin(), samples_.end(), x.x - 1.0,
                               [](const Sample& s, double v) { return s.p.x < v; });
    for (; it != samples_.end() && it->p.x <= x.x + 1.0; ++it) {
      best = std::max(best, it->value - std::hypot(x.x - it->p.x, x.y - it->p.y));
    }
    return best;
  }

  /// Values on the delta-grid of the window, row-major from (x0, y0).
  std::vector<double> raster(std::size_t& nx, std::size_t& ny) const {
    nx = static_cast<std::size_t>(std::floor(window_.width() / delta_)) + 1;
    ny = static_cast<std::size_t>(std::floor(window_.height() / delta_)) + 1;
    if (nx * ny > kMaxSamples) throw std::length_error("oracle raster exceeds the memory guard");
    std::vector<double> out;
    out.reserve(nx * ny);
    for (std::size_t j = 0; j < ny; ++j) {
      for (std::size_t i = 0; i < nx; ++i) {
        out.push_back((*this)(Point{window_.x0 + static_cast<double>(i) * delta_, window_.y0 + static_cast<double>(j) * delta_}));
      }
    }
    return out;
  }

 private:
  static double to_segment(const Segment& s, Point p) {
    const double half = static_cast<double>(s.half_length());
    if (s.color == Color::green) {
      const double along = std::max(0.0, std::abs(p.x - static_cast<double>(s.l)) - half);
      return std::sqrt(along * along + (p.y - static_cast<double>(s.m)) * (p.y - static_cast<double>(s.m)));
    }
    const double along = std::max(0.0, std::abs(p.y - static_cast<double>(s.m)) - half);
    return std::sqrt(along * along + (p.x - static_cast<double>(s.l)) * (p.x - static_cast<double>(s.l)));
  }

  static bool covers_ordinate(const Segment& red, double y) {
    return std::abs(y - static_cast<double>(red.m)) <= static_cast<double>(red.half_length());
  }

  // The red point (red.l, y) is set to 2 unless a green of scale >= red.k is closer than 1.
  bool activates(const Segment& red, double y) const {
    const Point p{static_cast<double>(red.l), y};
    for (const Segment& g : segments_) {
      if (g.color == Color::green && g.k >= red.k && to_segment(g, p) < 1.0) return false;
    }
    return true;
  }

  double red_value(Point p) const {
    bool on_green = false;
    for (const Segment& s : segments_) {
      if (s.color == Color::red && static_cast<double>(s.l) == p.x && covers_ordinate(s, p.y) && activates(s, p.y)) {
        return 2.0;
      }
      if (s.color == Color::green && to_segment(s, p) == 0.0) on_green = true;
    }
    return on_green ? 1.0 : 0.0;
  }

  double green_value(Point p) const {
    bool zeroed = false;
    for (const Segment& s : segments_) {
      if (s.color != Color::red || !covers_ordinate(s, p.y)) continue;
      const double dx = std::abs(p.x - static_cast<double>(s.l));
      if (dx >= 1.0) continue;
      if (!activates(s, p.y)) continue;
      if (dx == 0.0) return 2.0;
      zeroed = true;
    }
    return zeroed ? 0.0 : 1.0;
  }

  Rect window_;
  double delta_;
  std::vector<Segment> segments_;
  std::vector<Sample> samples_;
};

}  // namespace hjlab

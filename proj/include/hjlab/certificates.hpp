#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "hjlab/environment.hpp"
#include "hjlab/hamiltonian.hpp"
#include "hjlab/prf.hpp"
#include "hjlab/segment.hpp"
#include "hjlab/solver.hpp"

namespace hjlab {

/// Barrier built around a complete segment of scale k centered at X.
///
/// Green: u+(x,t) = 3|x2 - X2| + t + (|x1 - X1| - 5T + 2t)_+ is a supersolution.
/// Red:   u-(x,t) = 2t - 3|x1 - X1| + (5T - |x2 - X2| - s t)_- is a subsolution
///        for s >= 3; the endpoint identity u-(0,T) = 2T - 3|X1| needs s <= 5 - |X2|/T.
struct Certificate {
  Color color = Color::green;
  std::int64_t X1 = 0;
  std::int64_t X2 = 0;
  int k = 2;
  double s = 3.0;

  double horizon() const { return static_cast<double>(scale_length(k)); }
  Segment segment() const { return Segment{color, k, X1, X2}; }
};

inline double positive_part(double f) { return std::max(f, 0.0); }
inline double negative_part(double f) { return std::min(f, 0.0); }

inline double u_plus(Point x, double t, const Certificate& cert) {
  const double T = cert.horizon();
  return 3.0 * std::abs(x.y - static_cast<double>(cert.X2)) + t +
         positive_part(std::abs(x.x - static_cast<double>(cert.X1)) - 5.0 * T + 2.0 * t);
}

inline double u_minus(Point x, double t, const Certificate& cert) {
  const double T = cert.horizon();
  return 2.0 * t - 3.0 * std::abs(x.x - static_cast<double>(cert.X1)) +
         negative_part(5.0 * T - std::abs(x.y - static_cast<double>(cert.X2)) - cert.s * t);
}

/// Time derivative and spatial gradient of a barrier at a smooth point.
struct Jet {
  double dt = 0.0;
  double p1 = 0.0;
  double p2 = 0.0;
};

namespace detail {

inline double sgn(double v) { return (v > 0.0) - (v < 0.0); }

inline double plus_switch(Point x, double t, const Certificate& c) {
  return std::abs(x.x - static_cast<double>(c.X1)) - 5.0 * c.horizon() + 2.0 * t;
}

inline double minus_switch(Point x, double t, const Certificate& c) {
  return 5.0 * c.horizon() - std::abs(x.y - static_cast<double>(c.X2)) - c.s * t;
}

}  // namespace detail

/// Analytic jet of u+ off its kinks (x2 = X2 and the (.)_+ switching locus).
inline Jet u_plus_jet(Point x, double t, const Certificate& c) {
  const bool active = detail::plus_switch(x, t, c) > 0.0;
  return Jet{active ? 3.0 : 1.0, active ? detail::sgn(x.x - static_cast<double>(c.X1)) : 0.0,
             3.0 * detail::sgn(x.y - static_cast<double>(c.X2))};
}

/// Analytic jet of u- off its kinks (x1 = X1 and the (.)_- switching locus).
inline Jet u_minus_jet(Point x, double t, const Certificate& c) {
  const bool active = detail::minus_switch(x, t, c) < 0.0;
  return Jet{active ? 2.0 - c.s : 2.0, -3.0 * detail::sgn(x.x - static_cast<double>(c.X1)),
             active ? -detail::sgn(x.y - static_cast<double>(c.X2)) : 0.0};
}

enum class Side { super, sub };

struct ResidualReport {
  Side side = Side::super;
  /// Worst smooth-point residual: min for super (needs >= 0), max for sub (needs <= 0).
  double worst = 0.0;
  Point worst_x;
  double worst_t = 0.0;
  /// Worst residual over the kink slope sweeps, same sign convention.
  double kink_worst = 0.0;
  Point kink_x;
  double kink_t = 0.0;
  std::size_t samples = 0;
  std::size_t kink_samples = 0;

  /// Worst of the smooth and kink residuals.
  double overall() const { return side == Side::super ? std::min(worst, kink_worst) : std::max(worst, kink_worst); }

  bool passed(double tol) const {
    if (side == Side::super) return worst >= -tol && kink_worst >= -tol;
    return worst <= tol && kink_worst <= tol;
  }
};

struct ResidualOptions {
  std::size_t samples = 10000;
  std::size_t kink_samples = 2000;
  double margin = 0.05;
  int sweep_points = 41;
  Seed128 seed{0x5eed5eed5eed5eedull, 0x0123456789abcdefull};
};

/// Samples (x, t) off the kink sets and evaluates dt phi + H(D phi, c(x)); then sweeps
/// the sub/superdifferential slopes available at kink points.
inline ResidualReport residual_check(const Certificate& cert, const Environment& env, const ResidualOptions& opt = {}) {
  const Side side = cert.color == Color::green ? Side::super : Side::sub;
  const double T = cert.horizon();
  const double X1 = static_cast<double>(cert.X1);
  const double X2 = static_cast<double>(cert.X2);
  ResidualReport rep;
  rep.side = side;
  rep.worst = side == Side::super ? INFINITY : -INFINITY;
  rep.kink_worst = rep.worst;

  auto better_worse = [side](double candidate, double current) {
    return side == Side::super ? candidate < current : candidate > current;
  };
  auto residual = [&](const Jet& j, Point x) { return j.dt + hamiltonian(Momentum{j.p1, j.p2}, env.eval_c(x)); };

  // Box large enough to reach both branches of the (.)_+/(.)_- switch.
  const double along = 5.0 * T + 10.0;
  const double across = 10.0;
  std::uint64_t counter = 0;
  auto uniform = [&](double lo, double hi) {
    return lo + (hi - lo) * to_unit(prf_u64(opt.seed, {tags::kSample, counter++}));
  };
  auto draw_point = [&]() {
    if (side == Side::super) return Point{uniform(X1 - along, X1 + along), uniform(X2 - across, X2 + across)};
    return Point{uniform(X1 - across, X1 + across), uniform(X2 - along, X2 + along)};
  };

  while (rep.samples < opt.samples) {
    const Point x = draw_point();
    const double t = uniform(0.0, T);
    double r = 0.0;
    if (side == Side::super) {
      if (std::abs(x.y - X2) < opt.margin || std::abs(detail::plus_switch(x, t, cert)) < opt.margin) continue;
      r = residual(u_plus_jet(x, t, cert), x);
    } else {
      if (std::abs(x.x - X1) < opt.margin || std::abs(detail::minus_switch(x, t, cert)) < opt.margin ||
          std::abs(x.y - X2) < opt.margin) {
        continue;
      }
      r = residual(u_minus_jet(x, t, cert), x);
    }
    ++rep.samples;
    if (better_worse(r, rep.worst)) {
      rep.worst = r;
      rep.worst_x = x;
      rep.worst_t = t;
    }
  }

  // Kink points: project samples onto each kink set and sweep the convex hull of
  // the one-sided gradients (subdifferential for super, superdifferential for sub).
  const int m = std::max(2, opt.sweep_points);
  auto lerp = [m](double a, double b, int i) { return a + (b - a) * static_cast<double>(i) / (m - 1); };
  auto consider = [&](const Jet& j, Point x, double t) {
    const double r = residual(j, x);
    if (better_worse(r, rep.kink_worst)) {
      rep.kink_worst = r;
      rep.kink_x = x;
      rep.kink_t = t;
    }
  };
  for (std::size_t s = 0; s < opt.kink_samples; ++s) {
    const double t = uniform(0.0, T);
    Point x = draw_point();
    const int which = static_cast<int>(s % 3);
    if (side == Side::super) {
      const double sign1 = x.x >= X1 ? 1.0 : -1.0;
      if (which != 0) x.x = X1 + sign1 * (5.0 * T - 2.0 * t);  // on the (.)_+ locus
      if (which != 1) x.y = X2;                                  // on the row kink
      const bool on_row = which != 1;
      const bool on_switch = which != 0;
      const double sign2 = x.y >= X2 ? 1.0 : -1.0;
      for (int a = 0; a < (on_switch ? m : 1); ++a) {
        const double mu = on_switch ? lerp(0.0, 1.0, a) : (detail::plus_switch(x, t, cert) > 0.0 ? 1.0 : 0.0);
        for (int b = 0; b < (on_row ? m : 1); ++b) {
          const double p2 = on_row ? lerp(-3.0, 3.0, b) : 3.0 * sign2;
          consider(Jet{1.0 + 2.0 * mu, mu * sign1, p2}, x, t);
        }
      }
    } else {
      const double sign2 = x.y >= X2 ? 1.0 : -1.0;
      const double sign1 = x.x >= X1 ? 1.0 : -1.0;
      const double reach = 5.0 * T - cert.s * t;
      const bool on_switch = which != 0 && reach > 0.0;
      if (on_switch) x.y = X2 + sign2 * reach;  // on the (.)_- locus
      const bool on_col = which != 1;
      if (on_col) x.x = X1;  // on the column kink
      const bool active = detail::minus_switch(x, t, cert) < 0.0;
      for (int a = 0; a < (on_switch ? m : 1); ++a) {
        const double lam = on_switch ? lerp(0.0, 1.0, a) : (active ? 1.0 : 0.0);
        for (int b = 0; b < (on_col ? m : 1); ++b) {
          const double p1 = on_col ? lerp(-3.0, 3.0, b) : -3.0 * sign1;
          consider(Jet{2.0 - lam * cert.s, p1, -lam * sign2}, x, t);
        }
      }
    }
    ++rep.kink_samples;
  }
  return rep;
}

struct EndpointCheck {
  double value = 0.0;
  double expected = 0.0;
  bool ok = false;
};

/// u+(0,T) against 3|X2| + T, or u-(0,T) against 2T - 3|X1|.
inline EndpointCheck endpoint_check(const Certificate& cert, double tol = 1e-12) {
  const double T = cert.horizon();
  EndpointCheck out;
  if (cert.color == Color::green) {
    out.value = u_plus(Point{0.0, 0.0}, T, cert);
    out.expected = 3.0 * std::abs(static_cast<double>(cert.X2)) + T;
  } else {
    out.value = u_minus(Point{0.0, 0.0}, T, cert);
    out.expected = 2.0 * T - 3.0 * std::abs(static_cast<double>(cert.X1));
  }
  out.ok = std::abs(out.value - out.expected) <= tol;
  return out;
}

struct SandwichReport {
  bool ok = false;
  /// Largest violation amount (negative when every node clears the bound).
  double worst = -INFINITY;
  Point worst_node;
  std::size_t nodes_checked = 0;
};

/// Green: u_h <= u+ + tol; red: u_h >= u- - tol, on nodes isolated from the boundary.
inline SandwichReport sandwich_check(const SolutionField& field, const Certificate& cert, double tol) {
  SandwichReport rep;
  for (int j = 0; j < field.n; ++j) {
    for (int i = 0; i < field.n; ++i) {
      if (!field.isolated(i, j)) continue;
      const Point x = field.node(i, j);
      const double u = field.at(i, j);
      const double violation = cert.color == Color::green ? u - (u_plus(x, field.time, cert) + tol)
                                                          : (u_minus(x, field.time, cert) - tol) - u;
      ++rep.nodes_checked;
      if (violation > rep.worst) {
        rep.worst = violation;
        rep.worst_node = x;
      }
    }
  }
  rep.ok = rep.nodes_checked > 0 && rep.worst <= 0.0;
  return rep;
}

/// Spatial step used for scale k; coarsened for large T to bound the grid size.
struct GridPolicy {
  double h = 0.1;
  double cells_per_horizon = 160.0;
  double pad = 4.0;

  GridSpec grid_for(double T) const {
    const double step = std::max(h, T / cells_per_horizon);
    return GridSpec::isolated(step, T, pad);
  }
};

struct NonhomogRow {
  int k = 0;
  double T = 0.0;
  Color color = Color::green;
  std::int64_t X1 = 0;
  std::int64_t X2 = 0;
  double h = 0.0;
  double u00_over_T = 0.0;
  double certificate_value = 0.0;  ///< u+(0,T)/T or u-(0,T)/T
  double residual_worst = 0.0;
  /// Green: u/T <= 1 + 3 floor(eps T)/T + tol; red: u/T >= 2 - 3 floor(eps T)/T - tol.
  bool within_bound = false;
};

struct NonhomogOptions {
  double eps = 0.05;
  GridPolicy grid;
  double tol = 0.1;
  std::size_t residual_samples = 2000;
  /// Displacements of the planted centers; each must satisfy |X| <= floor(eps T_k).
  std::int64_t green_X1 = 0, green_X2 = 0, red_X1 = 0, red_X2 = 0;
  int threads = 1;
};

/// For each k, solves the green- and red-conditioned problems and tabulates u_h(0,T_k)/T_k.
inline std::vector<NonhomogRow> nonhomog_table(const std::vector<int>& ks, const NonhomogOptions& opt) {
  std::vector<NonhomogRow> rows;
  for (int k : ks) {
    check_scale(k);
    const double T = static_cast<double>(scale_length(k));
    const double reach = std::floor(opt.eps * T);
    for (Color color : {Color::green, Color::red}) {
      Certificate cert{color, color == Color::green ? opt.green_X1 : opt.red_X1,
                       color == Color::green ? opt.green_X2 : opt.red_X2, k, 3.0};
      if (std::hypot(static_cast<double>(cert.X1), static_cast<double>(cert.X2)) > reach) {
        throw std::invalid_argument("planted center lies farther than floor(eps T_k) from the origin");
      }
      const Environment env = Environment::planted({cert.segment()});
      const GridSpec grid = opt.grid.grid_for(T);
      SolveOptions so;
      so.threads = opt.threads;
      const SolveResult sol = solve(env, grid, so);
      ResidualOptions ro;
      ro.samples = opt.residual_samples;
      ro.kink_samples = opt.residual_samples / 5;
      const ResidualReport res = residual_check(cert, env, ro);

      NonhomogRow row;
      row.k = k;
      row.T = T;
      row.color = color;
      row.X1 = cert.X1;
      row.X2 = cert.X2;
      row.h = grid.h;
      row.u00_over_T = probe_origin(sol.field) / T;
      row.certificate_value =
          (color == Color::green ? u_plus(Point{}, T, cert) : u_minus(Point{}, T, cert)) / T;
      row.residual_worst = res.overall();
      row.within_bound = color == Color::green ? row.u00_over_T <= 1.0 + 3.0 * reach / T + opt.tol
                                               : row.u00_over_T >= 2.0 - 3.0 * reach / T - opt.tol;
      rows.push_back(row);
    }
  }
  return rows;
}

}  // namespace hjlab

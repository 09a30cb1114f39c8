#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "hjlab/environment.hpp"
#include "hjlab/geometry.hpp"
#include "hjlab/hamiltonian.hpp"

namespace hjlab {

/// Space-time grid on [-R, R]^2 x [0, T] with nodes x_i = (i - half) h.
struct GridSpec {
  double h = 0.1;
  double R = 36.0;
  double T = 16.0;
  double dt = 0.05;

  /// Grid at the CFL limit dt = h / 2.
  static GridSpec at_cfl(double h, double R, double T) { return GridSpec{h, R, T, h / 2.0}; }

  /// Smallest isolated domain for horizon T: R = 2T + pad, rounded up to a node.
  static GridSpec isolated(double h, double T, double pad = 4.0) {
    const double cells = std::ceil((2.0 * T + pad) / h - 1e-9);
    return GridSpec{h, cells * h, T, h / 2.0};
  }

  int half_nodes() const { return static_cast<int>(std::llround(R / h)); }
  int nodes() const { return 2 * half_nodes() + 1; }
  long steps() const { return std::lround(T / dt); }

  double coordinate(int i) const { return static_cast<double>(i - half_nodes()) * h; }

  /// Throws std::invalid_argument unless CFL and isolation hold.
  void validate() const {
    if (!(h > 0.0) || !(dt > 0.0) || !(R > 0.0) || !(T >= 0.0)) {
      throw std::invalid_argument("grid parameters must be positive");
    }
    const auto [a1, a2] = lipschitz_consts();
    if (dt > h / (a1 + a2) * (1.0 + 1e-12)) throw std::invalid_argument("CFL violated: dt > h / 2");
    if (std::abs(R / h - std::round(R / h)) > 1e-9 * std::max(1.0, R / h)) {
      throw std::invalid_argument("R must be a multiple of h");
    }
    if (std::abs(static_cast<double>(steps()) * dt - T) > 1e-9 * std::max(1.0, T)) {
      throw std::invalid_argument("T must be a multiple of dt");
    }
    if (R < (h / dt) * T + 2.0 * h - 1e-9 * R) {
      throw std::invalid_argument("isolation violated: R < (h/dt) T + 2h");
    }
  }

  /// Nodes at least this many cells from the boundary are never reached by boundary data.
  int isolated_margin() const { return static_cast<int>(steps()) + 1; }
};

/// Nodal values u_h(., time) on the square grid, row-major with y as the slow index.
struct SolutionField {
  GridSpec grid;
  int n = 0;
  double time = 0.0;
  std::vector<double> values;

  double at(int i, int j) const { return values[static_cast<std::size_t>(j) * static_cast<std::size_t>(n) + static_cast<std::size_t>(i)]; }
  double& at(int i, int j) { return values[static_cast<std::size_t>(j) * static_cast<std::size_t>(n) + static_cast<std::size_t>(i)]; }
  Point node(int i, int j) const { return Point{grid.coordinate(i), grid.coordinate(j)}; }

  /// True for nodes outside the boundary's domain of influence at `time`.
  bool isolated(int i, int j) const {
    const int margin = static_cast<int>(std::lround(time / grid.dt)) + 1;
    return i >= margin && j >= margin && i < n - margin && j < n - margin;
  }

  /// Bilinear interpolation; clamps to the grid.
  double sample(Point p) const {
    const double fx = std::clamp(p.x / grid.h + grid.half_nodes(), 0.0, static_cast<double>(n - 1));
    const double fy = std::clamp(p.y / grid.h + grid.half_nodes(), 0.0, static_cast<double>(n - 1));
    const int i = std::min(static_cast<int>(fx), n - 2);
    const int j = std::min(static_cast<int>(fy), n - 2);
    const double sx = fx - i;
    const double sy = fy - j;
    return (1 - sx) * (1 - sy) * at(i, j) + sx * (1 - sy) * at(i + 1, j) + (1 - sx) * sy * at(i, j + 1) +
           sx * sy * at(i + 1, j + 1);
  }
};

/// Lax-Friedrichs numerical Hamiltonian with dissipation set to the Lipschitz constants.
/// Nonincreasing in pE, pN and nondecreasing in pW, pS.
inline double lf_flux(double pW, double pE, double pS, double pN, double c) {
  const auto [a1, a2] = lipschitz_consts();
  return hamiltonian(Momentum{0.5 * (pW + pE), 0.5 * (pS + pN)}, c) - a1 * 0.5 * (pE - pW) - a2 * 0.5 * (pN - pS);
}

struct ProbeRow {
  double t = 0.0;
  double u00 = 0.0;
  double umin = 0.0;
  double umax = 0.0;
};

struct SolveOptions {
  int threads = 1;
  /// Times (multiples of dt) at which origin/min/max probes are recorded.
  std::vector<double> probe_times;
  /// Point reported in ProbeRow::u00 (bilinear when off the grid).
  Point probe{};
  /// Initial data (n*n); zero when absent. Boundary nodes hold initial + 2t.
  std::optional<std::vector<double>> initial;
};

struct SolveResult {
  SolutionField field;
  std::vector<ProbeRow> probes;
};

namespace detail {

template <class Body>
void parallel_rows(int first, int last, int threads, Body&& body) {
  const int rows = last - first;
  threads = std::clamp(threads, 1, std::max(1, rows));
  if (threads == 1) {
    body(first, last);
    return;
  }
  std::vector<std::jthread> pool;
  pool.reserve(static_cast<std::size_t>(threads));
  for (int t = 0; t < threads; ++t) {
    const int lo = first + rows * t / threads;
    const int hi = first + rows * (t + 1) / threads;
    pool.emplace_back([&body, lo, hi] { body(lo, hi); });
  }
}

inline ProbeRow probe_row(const SolutionField& f, Point probe) {
  const double u = probe.x == 0.0 && probe.y == 0.0 ? f.at(f.n / 2, f.n / 2) : f.sample(probe);
  ProbeRow row{f.time, u, INFINITY, -INFINITY};
  for (int j = 1; j < f.n - 1; ++j) {
    for (int i = 1; i < f.n - 1; ++i) {
      row.umin = std::min(row.umin, f.at(i, j));
      row.umax = std::max(row.umax, f.at(i, j));
    }
  }
  return row;
}

}  // namespace detail

/// Samples a weight callable at every node (parallel over rows, order-free).
template <class Weight>
std::vector<double> sample_weights(const Weight& weight, const GridSpec& grid, int threads = 1) {
  const int n = grid.nodes();
  std::vector<double> out(static_cast<std::size_t>(n) * static_cast<std::size_t>(n));
  detail::parallel_rows(0, n, threads, [&](int lo, int hi) {
    for (int j = lo; j < hi; ++j) {
      for (int i = 0; i < n; ++i) {
        out[static_cast<std::size_t>(j) * static_cast<std::size_t>(n) + static_cast<std::size_t>(i)] =
            weight(Point{grid.coordinate(i), grid.coordinate(j)});
      }
    }
  });
  return out;
}

/// Explicit monotone time stepping of du/dt + H(Du, c(x)) = 0 from nodal weights.
inline SolveResult solve_weights(std::span<const double> weights, const GridSpec& grid, const SolveOptions& options = {}) {
  grid.validate();
  const int n = grid.nodes();
  const std::size_t size = static_cast<std::size_t>(n) * static_cast<std::size_t>(n);
  if (weights.size() != size) throw std::invalid_argument("weight array does not match the grid");
  if (options.initial && options.initial->size() != size) {
    throw std::invalid_argument("initial data does not match the grid");
  }

  SolutionField cur{grid, n, 0.0, options.initial ? *options.initial : std::vector<double>(size, 0.0)};
  SolutionField next = cur;
  const std::vector<double> base = cur.values;

  std::vector<long> probe_steps;
  for (double t : options.probe_times) {
    const long s = std::lround(t / grid.dt);
    if (s < 0 || s > grid.steps() || std::abs(static_cast<double>(s) * grid.dt - t) > 1e-9 * std::max(1.0, t)) {
      throw std::invalid_argument("probe time is not a grid time");
    }
    probe_steps.push_back(s);
  }
  SolveResult result;
  auto record = [&](long step, const SolutionField& f) {
    for (long s : probe_steps) {
      if (s == step) result.probes.push_back(detail::probe_row(f, options.probe));
    }
  };
  record(0, cur);

  const double inv_h = 1.0 / grid.h;
  const long steps = grid.steps();
  for (long step = 0; step < steps; ++step) {
    const double t_next = static_cast<double>(step + 1) * grid.dt;
    detail::parallel_rows(0, n, options.threads, [&](int lo, int hi) {
      for (int j = lo; j < hi; ++j) {
        const std::size_t row = static_cast<std::size_t>(j) * static_cast<std::size_t>(n);
        if (j == 0 || j == n - 1) {
          for (int i = 0; i < n; ++i) next.values[row + i] = base[row + i] + 2.0 * t_next;
          continue;
        }
        next.values[row] = base[row] + 2.0 * t_next;
        next.values[row + n - 1] = base[row + n - 1] + 2.0 * t_next;
        const double* u = cur.values.data() + row;
        for (int i = 1; i < n - 1; ++i) {
          const double center = u[i];
          const double pW = (center - u[i - 1]) * inv_h;
          const double pE = (u[i + 1] - center) * inv_h;
          const double pS = (center - u[i - n]) * inv_h;
          const double pN = (u[i + n] - center) * inv_h;
          next.values[row + i] = center - grid.dt * lf_flux(pW, pE, pS, pN, weights[row + i]);
        }
      }
    });
    next.time = t_next;
    std::swap(cur, next);
    record(step + 1, cur);
  }
  std::sort(result.probes.begin(), result.probes.end(), [](const ProbeRow& a, const ProbeRow& b) { return a.t < b.t; });
  result.field = std::move(cur);
  return result;
}

template <class Weight>
SolveResult solve(const Weight& weight, const GridSpec& grid, const SolveOptions& options = {}) {
  grid.validate();
  const auto weights = sample_weights(weight, grid, options.threads);
  return solve_weights(weights, grid, options);
}

/// Solves on an environment; c is sampled once per node from the frozen local field.
inline SolveResult solve(const Environment& env, const GridSpec& grid, const SolveOptions& options = {}) {
  grid.validate();
  const LocalField field(env, Rect{-grid.R, grid.R, -grid.R, grid.R});
  return solve(field, grid, options);
}

/// u_h(0, t) read from the node at the origin.
inline double probe_origin(const SolutionField& field) { return field.at(field.n / 2, field.n / 2); }

struct ConstantWeight {
  double value = 1.0;
  double operator()(Point) const { return value; }
};

/// c shifted by a constant (used for monotonicity experiments; may leave [1,2]).
template <class Weight>
struct ShiftedWeight {
  Weight base;
  double shift = 0.0;
  double operator()(Point p) const { return base(p) + shift; }
};

struct ScalingResult {
  double direct = 0.0;    ///< u^eps(0, t) on the eps-grid
  double rescaled = 0.0;  ///< eps * u(0, t / eps) on the unit grid
};

/// Compares u^eps(0,t), solved with weights c(x/eps) on the grid (eps h, eps dt, eps R),
/// against eps u(0, t/eps) solved on `grid`, whose horizon must equal t / eps.
template <class Weight>
ScalingResult scaling_check(const Weight& weight, double eps, double t, const GridSpec& grid, int threads = 1) {
  if (!(eps > 0.0)) throw std::invalid_argument("eps must be positive");
  if (std::abs(grid.T - t / eps) > 1e-9 * std::max(1.0, grid.T)) {
    throw std::invalid_argument("grid horizon must equal t / eps");
  }
  const GridSpec scaled{eps * grid.h, eps * grid.R, t, eps * grid.dt};
  auto weight_eps = [&weight, eps](Point p) { return weight(Point{p.x / eps, p.y / eps}); };
  SolveOptions opt;
  opt.threads = threads;
  const double direct = probe_origin(solve(weight_eps, scaled, opt).field);
  const double rescaled = eps * probe_origin(solve(weight, grid, opt).field);
  return ScalingResult{direct, rescaled};
}

inline ScalingResult scaling_check(const Environment& env, double eps, double t, const GridSpec& grid, int threads = 1) {
  const LocalField field(env, Rect{-grid.R, grid.R, -grid.R, grid.R});
  return scaling_check(field, eps, t, grid, threads);
}

}  // namespace hjlab

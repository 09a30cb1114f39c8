#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <utility>

namespace hjlab {

/// Player controls live in [-1,1]^2.
struct Control {
  double a1 = 0.0;
  double a2 = 0.0;

  static Control clamped(double a1, double a2) { return Control{std::clamp(a1, -1.0, 1.0), std::clamp(a2, -1.0, 1.0)}; }
};

struct Momentum {
  double p1 = 0.0;
  double p2 = 0.0;
};

/// l(x, a) = c(x) + 10 |a1|: horizontal moves of the minimizing player are expensive.
inline double running_cost(double c, Control a) { return c + 10.0 * std::abs(a.a1); }

/// Closed form of max_a min_b { -l(x,a) - p.(2a + b) }.
///
///   min_b  -p.b               = -|p1| - |p2|
///   max_a2 -2 p2 a2           = 2|p2|
///   max_a1 -10|a1| - 2 p1 a1  = (2|p1| - 10)_+
inline double hamiltonian(Momentum p, double c) {
  const double q1 = std::abs(p.p1);
  const double q2 = std::abs(p.p2);
  return -c + std::max(2.0 * q1 - 10.0, 0.0) - q1 + q2;
}

enum class OracleMode {
  /// Grid a1 only; a2 and b resolved by sign arguments.
  reduced,
  /// Grid a1, a2, b1 and b2 literally (O(N^4); keep N small).
  literal,
};

/// Brute-force max-min over an N-point control grid. For the reduced mode the
/// error is at most (10 + 2(|p1| + |p2|)) * 2 / N.
inline double hamiltonian_oracle(Momentum p, double c, int n, OracleMode mode = OracleMode::reduced) {
  if (n < 2) throw std::invalid_argument("control grid needs at least two points");
  auto node = [n](int i) { return -1.0 + 2.0 * static_cast<double>(i) / static_cast<double>(n - 1); };
  double best = -std::numeric_limits<double>::infinity();
  if (mode == OracleMode::reduced) {
    const double a2_term = 2.0 * std::abs(p.p2);
    const double b_term = -std::abs(p.p1) - std::abs(p.p2);
    for (int i = 0; i < n; ++i) {
      const double a1 = node(i);
      best = std::max(best, -running_cost(c, Control{a1, 0.0}) - 2.0 * p.p1 * a1 + a2_term + b_term);
    }
    return best;
  }
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const Control a{node(i), node(j)};
      double inner = std::numeric_limits<double>::infinity();
      for (int s = 0; s < n; ++s) {
        for (int t = 0; t < n; ++t) {
          const double b1 = node(s);
          const double b2 = node(t);
          const double value = -running_cost(c, a) - (p.p1 * (2.0 * a.a1 + b1) + p.p2 * (2.0 * a.a2 + b2));
          inner = std::min(inner, value);
        }
      }
      best = std::max(best, inner);
    }
  }
  return best;
}

/// Per-axis Lipschitz constants of the Hamiltonian in p (slopes are +-1 on each axis).
constexpr std::pair<double, double> lipschitz_consts() { return {1.0, 1.0}; }

}  // namespace hjlab

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <thread>
#include <vector>

#include "hjlab/environment.hpp"
#include "hjlab/prf.hpp"
#include "hjlab/segment.hpp"

namespace hjlab {

inline constexpr double kZ95 = 1.959963984540054;

/// Monte Carlo frequency with a 95% Wilson score interval.
struct Estimate {
  std::size_t n = 0;
  std::size_t hits = 0;
  double p_hat = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 1.0;
  Seed128 seed;

  double midpoint() const { return 0.5 * (ci_lo + ci_hi); }
  /// Binomial standard error of p_hat.
  double sigma() const { return n == 0 ? 0.0 : std::sqrt(p_hat * (1.0 - p_hat) / static_cast<double>(n)); }
};

inline Estimate wilson(std::size_t n, std::size_t hits, Seed128 seed = {}, double z = kZ95) {
  if (n == 0) throw std::invalid_argument("wilson interval needs n >= 1");
  const double nn = static_cast<double>(n);
  const double p = static_cast<double>(hits) / nn;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / nn;
  const double center = (p + z2 / (2.0 * nn)) / denom;
  const double half = z * std::sqrt(p * (1.0 - p) / nn + z2 / (4.0 * nn * nn)) / denom;
  Estimate e{n, hits, p, std::max(0.0, center - half), std::min(1.0, center + half), seed};
  // Rounding can push the bounds past p_hat at the extremes.
  e.ci_lo = std::min(e.ci_lo, p);
  e.ci_hi = std::max(e.ci_hi, p);
  return e;
}

/// Evaluates fn(index, sample_seed) for index in [0, n), in index order per worker,
/// and returns the results in index order.
template <class Fn>
auto map_samples(std::size_t n, Seed128 master, int threads, Fn&& fn) {
  using R = decltype(fn(std::size_t{0}, Seed128{}));
  std::vector<R> out(n);
  const std::size_t workers = std::max<std::size_t>(1, std::min<std::size_t>(static_cast<std::size_t>(std::max(threads, 1)), n));
  auto run = [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) out[i] = fn(i, derive_seed(master, i));
  };
  if (workers == 1) {
    run(0, n);
    return out;
  }
  std::vector<std::jthread> pool;
  for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(run, n * w / workers, n * (w + 1) / workers);
  pool.clear();
  return out;
}

/// Generic harness: n independent environments keyed by derive_seed(seed, i).
inline Estimate mc_estimate(const std::function<bool(const Seed128&)>& event, std::size_t n, Seed128 seed,
                            int threads = 1) {
  if (n == 0) throw std::invalid_argument("mc_estimate needs n >= 1");
  const auto flags = map_samples(n, seed, threads, [&](std::size_t, const Seed128& s) -> char { return event(s) ? 1 : 0; });
  std::size_t hits = 0;
  for (char f : flags) hits += static_cast<std::size_t>(f);
  return wilson(n, hits, seed);
}

// ---------------------------------------------------------------------------
// Analytic event bounds

/// Number of lattice points with Euclidean norm <= r.
inline std::int64_t lattice_points_within(std::int64_t r) {
  std::int64_t count = 0;
  for (std::int64_t l = -r; l <= r; ++l) {
    const std::int64_t rest = r * r - l * l;
    auto m = static_cast<std::int64_t>(std::sqrt(static_cast<double>(rest)));
    while (m * m > rest) --m;
    while ((m + 1) * (m + 1) <= rest) ++m;
    count += 2 * m + 1;
  }
  return count;
}

struct CkValues {
  int k = 0;
  double eps = 0.0;
  std::int64_t radius = 0;         ///< floor(eps T_k)
  std::int64_t lattice_count = 0;  ///< N(radius)
  double printed = 0.0;            ///< 1 - (1 - T^-2)^(radius^2)
  double exact = 0.0;              ///< 1 - (1 - T^-2)^N(radius)
};

/// Probability that some scale-k site within distance floor(eps T_k) of the origin is active.
inline CkValues exact_Ck(int k, double eps) {
  check_scale(k);
  if (!(eps > 0.0 && eps <= 0.05)) throw std::invalid_argument("eps must lie in (0, 1/20]");
  const double T = static_cast<double>(scale_length(k));
  CkValues v;
  v.k = k;
  v.eps = eps;
  v.radius = static_cast<std::int64_t>(std::floor(eps * T));
  v.lattice_count = lattice_points_within(v.radius);
  const double log_miss = std::log1p(-1.0 / (T * T));
  v.printed = -std::expm1(static_cast<double>(v.radius * v.radius) * log_miss);
  v.exact = -std::expm1(static_cast<double>(v.lattice_count) * log_miss);
  return v;
}

struct DkBound {
  int k = 0;
  int k_max = 0;
  bool primed = false;
  double log_truncated = 0.0;  ///< log of the product over k' <= k_max
  double log_tail = 0.0;       ///< lower bound on the log of the factors k' > k_max
  double truncated() const { return std::exp(log_truncated); }
  /// Lower bound on the full infinite product.
  double full_lower() const { return std::exp(log_truncated + log_tail); }
};

/// prod_{k'} (1 - T_{k'}^-2)^{(10 T_{k'} + 1)(10 T_k + 1)} over k' >= k+1 (green) or k' >= k (primed, red),
/// accumulated in log space.
inline DkBound bound_Dk(int k, int k_max, bool primed) {
  check_scale(k);
  if (k_max < k) throw std::invalid_argument("bound_Dk requires k <= k_max");
  DkBound b{k, k_max, primed, 0.0, 0.0};
  const double len_k = 10.0 * static_cast<double>(scale_length(k)) + 1.0;
  for (int kp = primed ? k : k + 1; kp <= k_max; ++kp) {
    const double Tp = static_cast<double>(scale_length(kp));
    b.log_truncated += (10.0 * Tp + 1.0) * len_k * std::log1p(-1.0 / (Tp * Tp));
  }
  // log(1 - x) >= -x / (1 - x) and (10T + 1)/(T^2 - 1) <= (11/T)(16/15) for T >= 4,
  // so the tail is at least -len_k (176/15) sum_{k' > K} 4^{-k'}.
  const int first_tail = std::max(k_max, primed ? k - 1 : k);
  b.log_tail = -len_k * (176.0 / 15.0) * std::pow(4.0, -first_tail) / 3.0;
  return b;
}

// ---------------------------------------------------------------------------
// Event detectors

inline std::int64_t event_radius(int k, double eps) {
  return static_cast<std::int64_t>(std::floor(eps * static_cast<double>(scale_length(k))));
}

/// Scale-k centers of one color within Euclidean distance floor(eps T_k) of the origin.
inline std::vector<Segment> centers_near_origin(const Environment& env, Color color, int k, double eps) {
  const auto r = static_cast<double>(event_radius(k, eps));
  std::vector<Segment> out;
  const SegmentFilter f{color == Color::green, color == Color::red, k, k};
  // Every segment centered in the box meets it; the distance filter is on the center.
  for (const Segment& s : env.segments_in(Rect{-r, r, -r, r}, 0.0, f)) {
    if (std::hypot(static_cast<double>(s.l), static_cast<double>(s.m)) <= r) out.push_back(s);
  }
  return out;
}

/// C_k (primed: C'_k): a scale-k center of the right color lies within floor(eps T_k).
inline bool detect_Ck(const Environment& env, int k, double eps, bool primed) {
  return !centers_near_origin(env, primed ? Color::red : Color::green, k, eps).empty();
}

/// B_k (primed: B'_k): such a center carries a complete segment.
inline bool detect_Bk(const Environment& env, int k, double eps, bool primed) {
  for (const Segment& s : centers_near_origin(env, primed ? Color::red : Color::green, k, eps)) {
    if (env.is_complete(s)) return true;
  }
  return false;
}

/// Dominating-red incidences on a green: scale > seg.k, covering its row, abscissa within
/// distance < 1 of its span. Activation is not required.
inline std::size_t crossing_count(const Environment& env, const Segment& seg) {
  if (seg.color != Color::green) throw std::invalid_argument("crossing_count expects a green segment");
  std::size_t count = 0;
  const double row = seg.transverse();
  env.for_each_segment(seg.bounds(), 1.0, SegmentFilter::reds(seg.k + 1), [&](const Segment& r) {
    if (row >= r.axial_lo() && row <= r.axial_hi() && gap(r.transverse(), seg.axial_lo(), seg.axial_hi()) < 1.0) {
      ++count;
    }
  });
  return count;
}

/// E[crossing_count] for a green of scale k over scales k+1..k_max.
inline double expected_crossings(int k, int k_max) {
  const double span = 10.0 * static_cast<double>(scale_length(k)) + 1.0;
  double lambda = 0.0;
  for (int kp = k + 1; kp <= k_max; ++kp) {
    const double Tp = static_cast<double>(scale_length(kp));
    lambda += span * (10.0 * Tp + 1.0) / (Tp * Tp);
  }
  return lambda;
}

struct Moments {
  std::size_t n = 0;
  double mean = 0.0;
  double variance = 0.0;  ///< unbiased sample variance
  double standard_error() const { return std::sqrt(variance / static_cast<double>(n)); }
};

template <class T>
Moments sample_moments(const std::vector<T>& xs) {
  Moments m;
  m.n = xs.size();
  if (m.n == 0) return m;
  double sum = 0.0;
  for (const T& x : xs) sum += static_cast<double>(x);
  m.mean = sum / static_cast<double>(m.n);
  double ss = 0.0;
  for (const T& x : xs) ss += (static_cast<double>(x) - m.mean) * (static_cast<double>(x) - m.mean);
  m.variance = m.n > 1 ? ss / static_cast<double>(m.n - 1) : 0.0;
  return m;
}

/// Crossing counts of a planted scale-k green at the origin over n random backgrounds.
inline Moments crossing_stats(int k, int k_max, std::size_t n, Seed128 seed, int threads = 1) {
  const Segment green{Color::green, k, 0, 0};
  const auto counts = map_samples(n, seed, threads, [&](std::size_t, const Seed128& s) {
    const Environment env = Environment::planted({green}, BackgroundPolicy{s, k_max, std::nullopt});
    return crossing_count(env, green);
  });
  return sample_moments(counts);
}

// ---------------------------------------------------------------------------
// Long-range correlation witnesses (E, F) with r = 3 T_k

struct WitnessScan {
  /// Smallest integer a1 >= 1 with an E-witness (red covering [r, 2r] at a1 and c(a1, 3r) < 2).
  std::optional<std::int64_t> first_e;
  /// Smallest integer a1 >= 1 with an F-witness (red covering [0, r/2] at a1).
  std::optional<std::int64_t> first_f;

  bool e(std::int64_t x1) const { return first_e && *first_e < x1; }
  bool f(std::int64_t x1) const { return first_f && *first_f < x1; }
};

/// Scans abscissae 1..a_max once; E(x1) and F(x1) for every x1 <= a_max + 1 follow.
inline WitnessScan scan_witnesses(const Environment& env, int k, std::int64_t a_max) {
  if (k < 2) throw std::invalid_argument("witness events need k >= 2");
  WitnessScan out;
  if (a_max < 1) return out;
  const double r = 3.0 * static_cast<double>(scale_length(k));
  const Rect strip_e{1.0, static_cast<double>(a_max), r, 2.0 * r};
  std::vector<std::int64_t> abscissae;
  env.for_each_segment(strip_e, 0.0, SegmentFilter::reds(), [&](const Segment& s) {
    if (s.axial_lo() <= r && s.axial_hi() >= 2.0 * r) abscissae.push_back(s.l);
  });
  std::sort(abscissae.begin(), abscissae.end());
  abscissae.erase(std::unique(abscissae.begin(), abscissae.end()), abscissae.end());
  for (std::int64_t a : abscissae) {
    if (env.eval_c(Point{static_cast<double>(a), 3.0 * r}) < 2.0) {
      out.first_e = a;
      break;
    }
  }
  const Rect strip_f{1.0, static_cast<double>(a_max), 0.0, 0.5 * r};
  env.for_each_segment(strip_f, 0.0, SegmentFilter::reds(), [&](const Segment& s) {
    if (s.axial_lo() <= 0.0 && s.axial_hi() >= 0.5 * r) {
      if (!out.first_f || s.l < *out.first_f) out.first_f = s.l;
    }
  });
  return out;
}

/// E(x1): some integer a1 in (0, x1) has a red through (a1, r) and (a1, 2r) and c(a1, 3r) < 2.
inline bool event_E(const Environment& env, int k, std::int64_t x1) {
  if (x1 < 1) throw std::invalid_argument("x1 must be >= 1");
  return scan_witnesses(env, k, x1 - 1).e(x1);
}

/// F(x1): some integer a1 in (0, x1) has a red through (a1, 0) and (a1, r/2).
inline bool event_F(const Environment& env, int k, std::int64_t x1) {
  if (x1 < 1) throw std::invalid_argument("x1 must be >= 1");
  return scan_witnesses(env, k, x1 - 1).f(x1);
}

struct CalibrationStep {
  std::int64_t x1 = 0;
  Estimate e;
};

struct Calibration {
  std::optional<std::int64_t> x1;  ///< empty when no x1 lands in the band
  std::vector<CalibrationStep> trail;
  double band_lo = 0.5;
  double band_hi = 2.0 / 3.0;
};

struct WitnessOptions {
  int k_max = 8;
  std::int64_t a_max = 64;
  int threads = 1;
};

inline std::vector<WitnessScan> witness_scans(int k, std::size_t n, Seed128 seed, const WitnessOptions& opt) {
  return map_samples(n, seed, opt.threads, [&](std::size_t, const Seed128& s) {
    return scan_witnesses(Environment::random(s, opt.k_max), k, opt.a_max);
  });
}

/// Estimates P(E(x1)) for x1 = 2, 3, ... from one batch of environments.
inline std::vector<CalibrationStep> e_curve(const std::vector<WitnessScan>& scans, Seed128 seed, std::int64_t x1_max) {
  std::vector<CalibrationStep> out;
  for (std::int64_t x1 = 2; x1 <= x1_max; ++x1) {
    std::size_t hits = 0;
    for (const WitnessScan& w : scans) hits += w.e(x1) ? 1 : 0;
    out.push_back(CalibrationStep{x1, wilson(scans.size(), hits, seed)});
  }
  return out;
}

/// Smallest x1 whose Wilson-interval midpoint for P(E(x1)) lies in [1/2, 2/3].
inline Calibration calibrate_x1(int k, std::size_t n, Seed128 seed, const WitnessOptions& opt = {}) {
  Calibration cal;
  const auto scans = witness_scans(k, n, seed, opt);
  for (const CalibrationStep& step : e_curve(scans, seed, opt.a_max + 1)) {
    cal.trail.push_back(step);
    const double mid = step.e.midpoint();
    if (mid >= cal.band_lo && mid <= cal.band_hi) {
      cal.x1 = step.x1;
      break;
    }
    if (mid > cal.band_hi) break;
  }
  return cal;
}

struct CorrelationEstimate {
  int k = 0;
  std::int64_t x1 = 0;
  std::size_t n = 0;
  double pEF = 0.0;
  double pE = 0.0;
  double pF = 0.0;
  double pE_pF = 0.0;
  double rho_hat = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  std::size_t e_without_f = 0;  ///< samples where E holds but F fails
};

/// P(E and F) - P(E) P(F) from one batch, with a delta-method 95% interval.
inline CorrelationEstimate rho2_from_scans(const std::vector<WitnessScan>& scans, int k, std::int64_t x1) {
  CorrelationEstimate c;
  c.k = k;
  c.x1 = x1;
  c.n = scans.size();
  if (c.n == 0) throw std::invalid_argument("rho2 needs samples");
  std::size_t ne = 0, nf = 0, nef = 0;
  for (const WitnessScan& w : scans) {
    const bool e = w.e(x1), f = w.f(x1);
    ne += e;
    nf += f;
    nef += e && f;
    c.e_without_f += e && !f;
  }
  const double n = static_cast<double>(c.n);
  c.pE = static_cast<double>(ne) / n;
  c.pF = static_cast<double>(nf) / n;
  c.pEF = static_cast<double>(nef) / n;
  c.pE_pF = c.pE * c.pF;
  c.rho_hat = c.pEF - c.pE_pF;
  // Influence function of the sample covariance: (e - pE)(f - pF) - rho.
  double ss = 0.0;
  for (const WitnessScan& w : scans) {
    const double psi = (w.e(x1) - c.pE) * (w.f(x1) - c.pF) - c.rho_hat;
    ss += psi * psi;
  }
  const double se = std::sqrt(ss / (n - 1.0) / n);
  c.ci_lo = c.rho_hat - kZ95 * se;
  c.ci_hi = c.rho_hat + kZ95 * se;
  return c;
}

inline CorrelationEstimate rho2_estimate(int k, std::int64_t x1, std::size_t n, Seed128 seed,
                                         const WitnessOptions& opt = {}) {
  WitnessOptions o = opt;
  o.a_max = std::max<std::int64_t>(x1 - 1, 1);
  return rho2_from_scans(witness_scans(k, n, seed, o), k, x1);
}

// ---------------------------------------------------------------------------
// Mixing: U = [0,d]^2 and V = [d + r, 2d + r] x [0,d], at distance r

struct MixingGeometry {
  Rect U;
  Rect V;
  static MixingGeometry make(double r, double d) {
    return MixingGeometry{Rect{0.0, d, 0.0, d}, Rect{d + r, 2.0 * d + r, 0.0, d}};
  }
};

/// Smallest scale whose length 10 T_k exceeds r / 4.
inline int long_scale(double r) {
  int k = 1;
  while (k <= kMaxScale && !(10.0 * static_cast<double>(scale_length(k)) > r / 4.0)) ++k;
  return k;
}

/// Complement of A(r,U,V): some segment longer than r/4 crosses U or V.
inline bool long_segment_crosses(const Environment& env, const MixingGeometry& g, double r) {
  const SegmentFilter f{true, true, long_scale(r), kMaxScale};
  bool hit = false;
  auto mark = [&hit](const Segment&) { hit = true; };
  env.for_each_segment(g.U, 0.0, f, mark);
  if (!hit) env.for_each_segment(g.V, 0.0, f, mark);
  return hit;
}

struct MixingRow {
  double r = 0.0;
  double d = 0.0;
  std::size_t n = 0;
  Estimate q;
  double r_times_q() const { return r * q.p_hat; }
};

inline std::vector<MixingRow> mixing_decay(const std::vector<double>& r_list, double d, std::size_t n, Seed128 seed,
                                           int k_max = 8, int threads = 1) {
  std::vector<MixingRow> rows;
  for (double r : r_list) {
    const MixingGeometry g = MixingGeometry::make(r, d);
    const Estimate q = mc_estimate(
        [&](const Seed128& s) { return long_segment_crosses(Environment::random(s, k_max), g, r); }, n, seed, threads);
    rows.push_back(MixingRow{r, d, n, q});
  }
  return rows;
}

struct ConditionalCorrelation {
  std::size_t n = 0;
  std::size_t conditioned = 0;  ///< samples in A(r,U,V)
  double covariance = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
};

/// Within A(r,U,V), covariance of {c > 1 at the center of U} and {c > 1 at the center of V}.
inline ConditionalCorrelation conditional_correlation(double r, double d, std::size_t n, Seed128 seed, int k_max = 8,
                                                      int threads = 1) {
  const MixingGeometry g = MixingGeometry::make(r, d);
  struct Obs {
    bool in_a = false;
    bool e = false;
    bool f = false;
  };
  const auto obs = map_samples(n, seed, threads, [&](std::size_t, const Seed128& s) {
    const Environment env = Environment::random(s, k_max);
    Obs o;
    o.in_a = !long_segment_crosses(env, g, r);
    if (o.in_a) {
      o.e = env.eval_c(Point{0.5 * (g.U.x0 + g.U.x1), 0.5 * (g.U.y0 + g.U.y1)}) > 1.0;
      o.f = env.eval_c(Point{0.5 * (g.V.x0 + g.V.x1), 0.5 * (g.V.y0 + g.V.y1)}) > 1.0;
    }
    return o;
  });
  ConditionalCorrelation out;
  out.n = n;
  double se = 0.0, sf = 0.0, sef = 0.0;
  for (const Obs& o : obs) {
    if (!o.in_a) continue;
    ++out.conditioned;
    se += o.e;
    sf += o.f;
    sef += o.e && o.f;
  }
  if (out.conditioned < 2) return out;
  const double m = static_cast<double>(out.conditioned);
  const double pe = se / m, pf = sf / m;
  out.covariance = sef / m - pe * pf;
  double ss = 0.0;
  for (const Obs& o : obs) {
    if (!o.in_a) continue;
    const double psi = (o.e - pe) * (o.f - pf) - out.covariance;
    ss += psi * psi;
  }
  const double sd = std::sqrt(ss / (m - 1.0) / m);
  out.ci_lo = out.covariance - kZ95 * sd;
  out.ci_hi = out.covariance + kZ95 * sd;
  return out;
}

// ---------------------------------------------------------------------------
// Stationarity

/// Two-sample Kolmogorov-Smirnov distance (ties handled by merging equal values).
inline double ks_distance(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("ks_distance needs nonempty samples");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::size_t i = 0, j = 0;
  double worst = 0.0;
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  while (i < a.size() || j < b.size()) {
    const double v = j >= b.size() || (i < a.size() && a[i] <= b[j]) ? a[i] : b[j];
    while (i < a.size() && a[i] == v) ++i;
    while (j < b.size() && b[j] == v) ++j;
    worst = std::max(worst, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return worst;
}

struct StationarityReport {
  std::int64_t vx = 0;
  std::int64_t vy = 0;
  std::size_t n = 0;
  double ks = 0.0;
  double threshold = 0.0;  ///< alpha = 0.001 two-sample critical value
  bool passed = false;
};

/// Compares the laws of c(x) and c(x + v) over independent environments.
inline StationarityReport stationarity_check(std::int64_t vx, std::int64_t vy, std::size_t n, Seed128 seed,
                                             int k_max = 8, Point x = Point{0.3, 0.7}, int threads = 1) {
  const auto values = map_samples(2 * n, seed, threads, [&](std::size_t i, const Seed128& s) {
    const Environment env = Environment::random(s, k_max);
    const Point p = i < n ? x : Point{x.x + static_cast<double>(vx), x.y + static_cast<double>(vy)};
    // snapped to 1e-9
    return std::round(env.eval_c(p) * 1e9) / 1e9;
  });
  StationarityReport rep{vx, vy, n};
  rep.ks = ks_distance(std::vector<double>(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(n)),
                       std::vector<double>(values.begin() + static_cast<std::ptrdiff_t>(n), values.end()));
  const double c_alpha = std::sqrt(-0.5 * std::log(0.001 / 2.0));
  rep.threshold = c_alpha * std::sqrt(2.0 / static_cast<double>(n));
  rep.passed = rep.ks <= rep.threshold;
  return rep;
}

}  // namespace hjlab

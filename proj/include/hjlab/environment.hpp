#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "hjlab/geometry.hpp"
#include "hjlab/prf.hpp"
#include "hjlab/segment.hpp"

namespace hjlab {

enum class Mode { random, planted };

/// Restricts a segment enumeration to colors and a scale range.
struct SegmentFilter {
  bool green = true;
  bool red = true;
  int k_min = 1;
  int k_max = kMaxScale;

  static SegmentFilter greens(int k_min = 1, int k_max = kMaxScale) { return {true, false, k_min, k_max}; }
  static SegmentFilter reds(int k_min = 1, int k_max = kMaxScale) { return {false, true, k_min, k_max}; }

  bool accepts(const Segment& s) const {
    if (s.color == Color::green ? !green : !red) return false;
    return s.k >= k_min && s.k <= k_max;
  }
};

/// Random segments layered under a planted manifest. When `protect` names a
/// planted segment, every background segment that could break its completeness
/// is dropped (dominating reds crossing a protected green; greens of scale
/// >= k within distance < 1 of a protected red).
struct BackgroundPolicy {
  Seed128 seed;
  int k_max = 8;
  std::optional<std::size_t> protect;

  friend bool operator==(const BackgroundPolicy&, const BackgroundPolicy&) = default;
};

using LatticeSite = std::pair<std::int64_t, std::int64_t>;

namespace detail {

/// Inverse CDF of Binomial(trials, p) at u, summed left to right.
inline std::int64_t binomial_inverse_cdf(double u, std::uint64_t trials, double p) {
  const double n = static_cast<double>(trials);
  double pmf = std::exp(n * std::log1p(-p));
  double cdf = pmf;
  const double odds = p / (1.0 - p);
  std::uint64_t count = 0;
  while (u >= cdf && count < trials) {
    double next = pmf * (n - static_cast<double>(count)) / static_cast<double>(count + 1) * odds;
    if (next <= 0.0) break;
    pmf = next;
    ++count;
    cdf += pmf;
  }
  return static_cast<std::int64_t>(count);
}

struct BlockKey {
  int color;
  int k;
  std::int64_t bx;
  std::int64_t by;
  friend bool operator==(const BlockKey&, const BlockKey&) = default;
};

struct BlockKeyHash {
  std::size_t operator()(const BlockKey& key) const noexcept {
    return static_cast<std::size_t>(prf_u64(Seed128{0x243f6a8885a308d3ull, 0x13198a2e03707344ull},
                                            {static_cast<std::uint64_t>(key.color * 16 + key.k),
                                             as_word(key.bx), as_word(key.by)}));
  }
};

}  // namespace detail

/// Immutable handle to a lazily realized segment field.
///
/// Random mode realizes the i.i.d. Bernoulli(T_k^{-2}) site field for scales
/// 1..k_max block by block. Planted mode is a fixed manifest, optionally over a
/// random background. Copies share one memoization cache; every query is a pure
/// function of the construction arguments.
class Environment {
 public:
  static Environment random(Seed128 seed, int k_max = 8) {
    check_scale(k_max);
    auto state = std::make_shared<State>();
    state->mode = Mode::random;
    state->random_layer = RandomLayer{seed, k_max};
    return Environment(std::move(state));
  }

  static Environment planted(std::vector<Segment> manifest, std::optional<BackgroundPolicy> background = {}) {
    for (const Segment& s : manifest) check_scale(s.k);
    auto state = std::make_shared<State>();
    state->mode = Mode::planted;
    state->manifest = manifest;
    std::sort(manifest.begin(), manifest.end());
    manifest.erase(std::unique(manifest.begin(), manifest.end()), manifest.end());
    state->planted = std::move(manifest);
    if (background) {
      check_scale(background->k_max);
      if (background->protect && *background->protect >= state->manifest.size()) {
        throw std::invalid_argument("protected segment index is out of range");
      }
      state->random_layer = RandomLayer{background->seed, background->k_max};
      state->background = background;
    }
    Environment env(std::move(state));
    if (background && background->protect) env.compute_exclusions(env.state_->manifest[*background->protect]);
    return env;
  }

  Mode mode() const { return state_->mode; }
  /// Truncation scale of the random layer; 0 for a purely planted field.
  int k_max() const { return state_->random_layer ? state_->random_layer->k_max : 0; }
  Seed128 seed() const { return state_->random_layer ? state_->random_layer->seed : Seed128{}; }
  bool has_random_layer() const { return state_->random_layer.has_value(); }
  /// Planted segments in manifest order.
  const std::vector<Segment>& manifest() const { return state_->manifest; }
  const std::optional<BackgroundPolicy>& background() const { return state_->background; }
  /// Background segments dropped to honor the protection rule.
  std::size_t rejected_background() const { return state_->excluded.size(); }
  const std::vector<Segment>& rejected_segments() const { return state_->excluded_list; }

  /// Active sites of one color and scale inside the T_k x T_k block (bx, by).
  std::vector<LatticeSite> block_sites(Color color, int k, std::int64_t bx, std::int64_t by) const {
    if (!state_->random_layer) throw std::logic_error("block_sites requires a random layer");
    if (k < 1 || k > state_->random_layer->k_max) throw std::out_of_range("scale exceeds k_max");
    return *cached_block(detail::BlockKey{static_cast<int>(color), k, bx, by});
  }

  /// Calls fn(segment) for every segment whose extent is within `radius` of `rect`.
  template <class Fn>
  void for_each_segment(const Rect& rect, double radius, const SegmentFilter& filter, Fn&& fn) const {
    for (const Segment& s : state_->planted) {
      if (filter.accepts(s) && s.distance_to(rect) <= radius) fn(s);
    }
    if (!state_->random_layer) return;
    const int top = std::min(filter.k_max, state_->random_layer->k_max);
    for (int colour = 1; colour <= 2; ++colour) {
      const Color color = static_cast<Color>(colour);
      if (color == Color::green ? !filter.green : !filter.red) continue;
      for (int k = std::max(1, filter.k_min); k <= top; ++k) {
        const std::int64_t T = scale_length(k);
        const double half = static_cast<double>(5 * T);
        const double along = color == Color::green ? half : 0.0;
        const double across = color == Color::green ? 0.0 : half;
        const auto l_lo = static_cast<std::int64_t>(std::ceil(rect.x0 - along - radius));
        const auto l_hi = static_cast<std::int64_t>(std::floor(rect.x1 + along + radius));
        const auto m_lo = static_cast<std::int64_t>(std::ceil(rect.y0 - across - radius));
        const auto m_hi = static_cast<std::int64_t>(std::floor(rect.y1 + across + radius));
        if (l_lo > l_hi || m_lo > m_hi) continue;
        for (std::int64_t bx = floor_div(l_lo, T); bx <= floor_div(l_hi, T); ++bx) {
          for (std::int64_t by = floor_div(m_lo, T); by <= floor_div(m_hi, T); ++by) {
            auto sites = cached_block(detail::BlockKey{colour, k, bx, by});
            for (const auto& [l, m] : *sites) {
              if (l < l_lo || l > l_hi || m < m_lo || m > m_hi) continue;
              Segment s{color, k, l, m};
              if (s.distance_to(rect) > radius) continue;
              if (!state_->excluded.empty() && state_->excluded.count(s)) continue;
              fn(s);
            }
          }
        }
      }
    }
  }

  std::vector<Segment> segments_in(const Rect& rect, double radius, const SegmentFilter& filter = {}) const {
    std::vector<Segment> out;
    for_each_segment(rect, radius, filter, [&out](const Segment& s) { out.push_back(s); });
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

  /// Every segment whose extent lies at Euclidean distance <= radius from p.
  std::vector<Segment> segments_near(Point p, double radius) const {
    if (!(radius >= 0.0)) throw std::invalid_argument("radius must be nonnegative");
    return segments_in(Rect{p.x, p.x, p.y, p.y}, radius);
  }

  /// False iff a green of scale >= red.k lies at distance strictly below 1
  /// from (red.l, y).
  bool red_activated(const Segment& red, double y) const {
    if (red.color != Color::red) throw std::invalid_argument("red_activated expects a red segment");
    const Point p{red.transverse(), y};
    bool suppressed = false;
    for_each_segment(Rect{p.x, p.x, p.y, p.y}, 1.0, SegmentFilter::greens(red.k), [&](const Segment& g) {
      const double dx = gap(p.x, g.axial_lo(), g.axial_hi());
      const double dy = y - g.transverse();
      if (dx * dx + dy * dy < 1.0) suppressed = true;
    });
    return !suppressed;
  }

  ActiveSet active_set(const Segment& seg) const { return *cached_active(seg); }

  bool is_complete(const Segment& seg) const {
    auto as = cached_active(seg);
    return as->kept.size() == 1 && as->kept.front().lo == seg.axial_lo() && as->kept.front().hi == seg.axial_hi() &&
           as->crossing_points.empty();
  }

  /// The weight c(x) = max(1, sup over value-2 points y of 2 - |x - y|).
  /// Value-1 points contribute at most 1 and are absorbed by the outer max.
  double eval_c(Point x) const {
    double best = 1.0;
    for_each_segment(Rect{x.x, x.x, x.y, x.y}, 1.0, SegmentFilter::reds(), [&](const Segment& red) {
      auto as = cached_active(red);
      const double d = std::hypot(x.x - red.transverse(), distance_to(as->kept, x.y));
      best = std::max(best, 2.0 - d);
    });
    return best;
  }

 private:
  struct RandomLayer {
    Seed128 seed;
    int k_max = 8;
  };

  struct State {
    Mode mode = Mode::random;
    std::optional<RandomLayer> random_layer;
    std::optional<BackgroundPolicy> background;
    std::vector<Segment> manifest;
    std::vector<Segment> planted;
    std::unordered_set<Segment, SegmentHash> excluded;
    std::vector<Segment> excluded_list;

    mutable std::shared_mutex mutex;
    mutable std::unordered_map<detail::BlockKey, std::shared_ptr<const std::vector<LatticeSite>>, detail::BlockKeyHash>
        blocks;
    mutable std::unordered_map<Segment, std::shared_ptr<const ActiveSet>, SegmentHash> active;
  };

  explicit Environment(std::shared_ptr<State> state) : state_(std::move(state)) {}

  std::vector<LatticeSite> realize_block(const detail::BlockKey& key) const {
    const Seed128 seed = state_->random_layer->seed;
    const std::int64_t T = scale_length(key.k);
    const std::uint64_t cells = static_cast<std::uint64_t>(T) * static_cast<std::uint64_t>(T);
    const std::uint64_t color = static_cast<std::uint64_t>(key.color);
    const std::uint64_t k = static_cast<std::uint64_t>(key.k);
    const double u = to_unit(prf_u64(seed, {tags::kCount, color, k, as_word(key.bx), as_word(key.by)}));
    const std::int64_t count = detail::binomial_inverse_cdf(u, cells, 1.0 / static_cast<double>(cells));

    std::vector<std::uint64_t> chosen;
    chosen.reserve(static_cast<std::size_t>(count));
    for (std::int64_t i = 0; i < count; ++i) {
      for (std::uint64_t attempt = 0;; ++attempt) {
        const std::uint64_t h = prf_u64(seed, {tags::kPosition, color, k, as_word(key.bx), as_word(key.by),
                                               static_cast<std::uint64_t>(i), attempt});
        const std::uint64_t cell = h & (cells - 1);
        if (std::find(chosen.begin(), chosen.end(), cell) == chosen.end()) {
          chosen.push_back(cell);
          break;
        }
      }
    }
    std::vector<LatticeSite> sites;
    sites.reserve(chosen.size());
    for (std::uint64_t cell : chosen) {
      const auto dx = static_cast<std::int64_t>(cell % static_cast<std::uint64_t>(T));
      const auto dy = static_cast<std::int64_t>(cell / static_cast<std::uint64_t>(T));
      sites.emplace_back(key.bx * T + dx, key.by * T + dy);
    }
    std::sort(sites.begin(), sites.end());
    return sites;
  }

  std::shared_ptr<const std::vector<LatticeSite>> cached_block(const detail::BlockKey& key) const {
    {
      std::shared_lock lock(state_->mutex);
      auto it = state_->blocks.find(key);
      if (it != state_->blocks.end()) return it->second;
    }
    auto sites = std::make_shared<const std::vector<LatticeSite>>(realize_block(key));
    std::unique_lock lock(state_->mutex);
    return state_->blocks.emplace(key, std::move(sites)).first->second;
  }

  ActiveSet compute_active(const Segment& seg) const {
    ActiveSet out{seg, {Interval{seg.axial_lo(), seg.axial_hi()}}, {}};
    if (seg.color == Color::red) {
      const double abscissa = seg.transverse();
      for_each_segment(seg.bounds(), 1.0, SegmentFilter::greens(seg.k), [&](const Segment& g) {
        const double dx = gap(abscissa, g.axial_lo(), g.axial_hi());
        if (dx < 1.0) {
          const double w = std::sqrt(1.0 - dx * dx);
          subtract_open(out.kept, g.transverse() - w, g.transverse() + w);
        }
      });
      return out;
    }
    const double row = seg.transverse();
    const double lo = seg.axial_lo();
    const double hi = seg.axial_hi();
    std::vector<Segment> dominating;
    for_each_segment(seg.bounds(), 1.0, SegmentFilter::reds(seg.k + 1), [&](const Segment& r) {
      if (row < r.axial_lo() || row > r.axial_hi()) return;
      if (gap(r.transverse(), lo, hi) >= 1.0) return;
      dominating.push_back(r);
    });
    for (const Segment& r : dominating) {
      if (!red_activated(r, row)) continue;
      const double a = r.transverse();
      subtract_open(out.kept, a - 1.0, a + 1.0);
      if (a >= lo && a <= hi) out.crossing_points.push_back(a);
    }
    std::sort(out.crossing_points.begin(), out.crossing_points.end());
    out.crossing_points.erase(std::unique(out.crossing_points.begin(), out.crossing_points.end()),
                              out.crossing_points.end());
    return out;
  }

  std::shared_ptr<const ActiveSet> cached_active(const Segment& seg) const {
    {
      std::shared_lock lock(state_->mutex);
      auto it = state_->active.find(seg);
      if (it != state_->active.end()) return it->second;
    }
    auto as = std::make_shared<const ActiveSet>(compute_active(seg));
    std::unique_lock lock(state_->mutex);
    return state_->active.emplace(seg, std::move(as)).first->second;
  }

  // Runs once at construction, before the handle is shared.
  void compute_exclusions(const Segment& guarded) {
    auto& st = *state_;
    const std::vector<Segment> planted = std::move(st.planted);
    st.planted.clear();
    std::vector<Segment> drop;
    if (guarded.color == Color::green) {
      const double row = guarded.transverse();
      for_each_segment(guarded.bounds(), 1.0, SegmentFilter::reds(guarded.k + 1), [&](const Segment& r) {
        if (row >= r.axial_lo() && row <= r.axial_hi() &&
            gap(r.transverse(), guarded.axial_lo(), guarded.axial_hi()) < 1.0) {
          drop.push_back(r);
        }
      });
    } else {
      for_each_segment(guarded.bounds(), 1.0, SegmentFilter::greens(guarded.k), [&](const Segment& g) {
        if (g.distance_to(guarded.bounds()) < 1.0) drop.push_back(g);
      });
    }
    st.planted = planted;
    std::sort(drop.begin(), drop.end());
    drop.erase(std::unique(drop.begin(), drop.end()), drop.end());
    for (const Segment& s : drop) {
      // A manifest entry is never rejected; only random background is filtered.
      if (std::binary_search(st.planted.begin(), st.planted.end(), s)) continue;
      st.excluded.insert(s);
      st.excluded_list.push_back(s);
    }
    st.blocks.clear();
    st.active.clear();
  }

  std::shared_ptr<State> state_;
};

/// Upper bound on the probability that a segment of scale > k_max passes within
/// distance 1 of `window` inflated by `horizon`, summed in closed form over all
/// scales above k_max.
inline double truncation_bound(int k_max, const Rect& window, double horizon) {
  if (k_max < 1) throw std::invalid_argument("truncation_bound requires k_max >= 1");
  const Rect w = window.inflated(horizon);
  if (!(w.width() > 0.0 && w.height() > 0.0) || !std::isfinite(w.width()) || !std::isfinite(w.height())) {
    throw std::invalid_argument("degenerate window");
  }
  const double wx = w.width();
  const double wy = w.height();
  // Per scale and color: (W_par + 10 T + 2)(W_perp + 3) T^{-2}.
  const double inv_t_sum = std::pow(4.0, -k_max) / 3.0;
  const double inv_t2_sum = std::pow(16.0, -k_max) / 15.0;
  const double constant = (wx + 2.0) * (wy + 3.0) + (wy + 2.0) * (wx + 3.0);
  const double linear = 10.0 * ((wy + 3.0) + (wx + 3.0));
  return std::min(1.0, constant * inv_t2_sum + linear * inv_t_sum);
}

inline double truncation_bound(const Environment& env, const Rect& window, double horizon) {
  if (!env.has_random_layer()) return 0.0;
  return truncation_bound(env.k_max(), window, horizon);
}

/// Reds within distance 1 of a window, frozen with their active sets, for fast
/// repeated evaluation of c inside that window.
class LocalField {
 public:
  LocalField(const Environment& env, const Rect& window) : window_(window) {
    for (const Segment& red : env.segments_in(window, 1.0, SegmentFilter::reds())) {
      ActiveSet as = env.active_set(red);
      if (!as.kept.empty()) reds_.push_back(Entry{red.transverse(), std::move(as.kept)});
    }
    std::stable_sort(reds_.begin(), reds_.end(), [](const Entry& a, const Entry& b) { return a.abscissa < b.abscissa; });
  }

  const Rect& window() const { return window_; }
  std::size_t red_count() const { return reds_.size(); }

  double operator()(Point x) const {
    double best = 1.0;
    auto it = std::lower_bound(reds_.begin(), reds_.end(), x.x - 1.0,
                               [](const Entry& e, double v) { return e.abscissa < v; });
    for (; it != reds_.end() && it->abscissa <= x.x + 1.0; ++it) {
      const double d = std::hypot(x.x - it->abscissa, distance_to(it->kept, x.y));
      best = std::max(best, 2.0 - d);
    }
    return best;
  }

 private:
  struct Entry {
    double abscissa;
    IntervalList kept;
  };
  Rect window_;
  std::vector<Entry> reds_;
};

}  // namespace hjlab

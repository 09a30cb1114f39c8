#pragma once

// Manifests, CSV numerics and graymap rendering.

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <type_traits>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "hjlab/environment.hpp"
#include "hjlab/geometry.hpp"
#include "hjlab/prf.hpp"
#include "hjlab/segment.hpp"

namespace hjlab {

using ordered_json = nlohmann::ordered_json;

/// Twelve significant digits, shortest general form, independent of the locale.
inline std::string format_number(double v) {
  if (v == 0.0) return "0";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 12);
  if (res.ec != std::errc{}) throw std::runtime_error("number formatting failed");
  return std::string(buf, res.ptr);
}

inline std::string format_number(std::int64_t v) { return std::to_string(v); }
inline std::string format_number(int v) { return std::to_string(v); }
inline std::string format_number(std::size_t v) { return std::to_string(v); }

/// Comma-joined row with a trailing newline.
class CsvRow {
 public:
  CsvRow& operator<<(std::string_view text) {
    sep();
    line_.append(text);
    return *this;
  }
  CsvRow& operator<<(const std::string& text) { return *this << std::string_view(text); }
  CsvRow& operator<<(const char* text) { return *this << std::string_view(text); }
  template <class T>
    requires std::is_arithmetic_v<T>
  CsvRow& operator<<(T v) {
    sep();
    if constexpr (std::is_floating_point_v<T>) {
      line_ += format_number(static_cast<double>(v));
    } else if constexpr (std::is_same_v<T, bool>) {
      line_ += v ? "1" : "0";
    } else {
      line_ += std::to_string(v);
    }
    return *this;
  }
  std::string str() const { return line_ + "\n"; }

 private:
  void sep() {
    if (!first_) line_ += ',';
    first_ = false;
  }
  std::string line_;
  bool first_ = true;
};

// ---------------------------------------------------------------------------
// Environment manifests

inline ordered_json segment_to_json(const Segment& s) {
  ordered_json j;
  j["color"] = std::string(to_string(s.color));
  j["k"] = s.k;
  j["l"] = s.l;
  j["m"] = s.m;
  return j;
}

inline Segment segment_from_json(const ordered_json& j) {
  Segment s{parse_color(j.at("color").get<std::string>()), j.at("k").get<int>(), j.at("l").get<std::int64_t>(),
            j.at("m").get<std::int64_t>()};
  check_scale(s.k);
  return s;
}

inline ordered_json environment_to_json(const Environment& env) {
  ordered_json j;
  j["seed"] = env.seed().to_hex();
  j["k_max"] = env.k_max();
  j["mode"] = env.mode() == Mode::random ? "random" : "planted";
  ordered_json planted = ordered_json::array();
  for (const Segment& s : env.manifest()) planted.push_back(segment_to_json(s));
  j["planted"] = std::move(planted);
  if (const auto& bg = env.background()) {
    ordered_json b;
    b["seed"] = bg->seed.to_hex();
    b["k_max"] = bg->k_max;
    b["protect"] = bg->protect ? ordered_json(*bg->protect) : ordered_json(nullptr);
    b["rejected"] = env.rejected_background();
    j["background"] = std::move(b);
  } else {
    j["background"] = nullptr;
  }
  return j;
}

/// Canonical text: two-space indentation, fixed key order, trailing newline.
inline std::string environment_manifest(const Environment& env) { return environment_to_json(env).dump(2) + "\n"; }

inline Environment environment_from_json(const ordered_json& j) {
  const std::string mode = j.at("mode").get<std::string>();
  if (mode == "random") {
    return Environment::random(Seed128::from_hex(j.at("seed").get<std::string>()), j.at("k_max").get<int>());
  }
  if (mode != "planted") throw std::invalid_argument("unknown environment mode: " + mode);
  std::vector<Segment> planted;
  for (const auto& item : j.at("planted")) planted.push_back(segment_from_json(item));
  std::optional<BackgroundPolicy> bg;
  if (j.contains("background") && !j.at("background").is_null()) {
    const auto& b = j.at("background");
    BackgroundPolicy policy{Seed128::from_hex(b.at("seed").get<std::string>()), b.at("k_max").get<int>(), {}};
    if (b.contains("protect") && !b.at("protect").is_null()) policy.protect = b.at("protect").get<std::size_t>();
    bg = policy;
  }
  return Environment::planted(std::move(planted), bg);
}

inline Environment parse_environment_manifest(std::string_view text) {
  return environment_from_json(ordered_json::parse(text));
}

/// "red,2,0,0;green,1,-3,4" -> segments. Whitespace around fields is ignored.
inline std::vector<Segment> parse_planted(std::string_view text) {
  std::vector<Segment> out;
  auto trim = [](std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
    return s;
  };
  auto integer = [](std::string_view s, auto& value) {
    const auto res = std::from_chars(s.data(), s.data() + s.size(), value);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
      throw std::invalid_argument("malformed integer in planted segment: " + std::string(s));
    }
  };
  while (!text.empty()) {
    const auto cut = text.find(';');
    std::string_view item = trim(text.substr(0, cut));
    text = cut == std::string_view::npos ? std::string_view{} : text.substr(cut + 1);
    if (item.empty()) continue;
    std::vector<std::string_view> fields;
    while (true) {
      const auto comma = item.find(',');
      fields.push_back(trim(item.substr(0, comma)));
      if (comma == std::string_view::npos) break;
      item.remove_prefix(comma + 1);
    }
    if (fields.size() != 4) throw std::invalid_argument("planted segment needs color,k,l,m");
    Segment s{parse_color(fields[0]), 0, 0, 0};
    integer(fields[1], s.k);
    integer(fields[2], s.l);
    integer(fields[3], s.m);
    check_scale(s.k);
    out.push_back(s);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Graymaps

/// Sample grid for rendering: nx by ny pixel centres over the window.
struct Raster {
  Rect window;
  std::size_t nx = 0;
  std::size_t ny = 0;

  /// Pixel (i, j) with j = 0 the top row.
  Point centre(std::size_t i, std::size_t j) const {
    const double px = window.width() / static_cast<double>(nx);
    const double py = window.height() / static_cast<double>(ny);
    return Point{window.x0 + (static_cast<double>(i) + 0.5) * px, window.y1 - (static_cast<double>(j) + 0.5) * py};
  }
};

/// P5, maxval 65535, big-endian samples. `values` are row-major from the top-left
/// and are mapped by round((v - lo) / (hi - lo) * 65535), clamped.
inline std::string graymap(const Raster& raster, const std::vector<double>& values, double lo, double hi,
                           std::string_view note = {}) {
  if (values.size() != raster.nx * raster.ny) throw std::invalid_argument("graymap size mismatch");
  std::ostringstream head;
  head << "P5\n# window " << format_number(raster.window.x0) << ' ' << format_number(raster.window.x1) << ' '
       << format_number(raster.window.y0) << ' ' << format_number(raster.window.y1) << " resolution " << raster.nx
       << 'x' << raster.ny;
  if (!note.empty()) head << ' ' << note;
  head << '\n' << raster.nx << ' ' << raster.ny << "\n65535\n";
  std::string out = head.str();
  out.reserve(out.size() + 2 * values.size());
  for (double v : values) {
    const double scaled = std::clamp((v - lo) / (hi - lo), 0.0, 1.0) * 65535.0;
    const auto px = static_cast<std::uint16_t>(std::lround(scaled));
    out.push_back(static_cast<char>(px >> 8));
    out.push_back(static_cast<char>(px & 0xFF));
  }
  return out;
}

inline std::vector<double> sample_weight(const Environment& env, const Raster& raster) {
  std::vector<double> values;
  values.reserve(raster.nx * raster.ny);
  for (std::size_t j = 0; j < raster.ny; ++j) {
    for (std::size_t i = 0; i < raster.nx; ++i) values.push_back(env.eval_c(raster.centre(i, j)));
  }
  return values;
}

/// Weight field rendered with pixel = round((c - 1) * 65535).
inline std::string render(const Environment& env, const Raster& raster) {
  return graymap(raster, sample_weight(env, raster), 1.0, 2.0, "value c-1");
}

// ---------------------------------------------------------------------------
// Run manifests

inline std::string utc_timestamp(std::chrono::system_clock::time_point tp) {
  const std::time_t t = std::chrono::system_clock::to_time_t(tp);
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

struct RunManifest {
  std::string command;
  ordered_json parameters = ordered_json::object();
  /// Settings that do not change results (thread count, output paths); not hashed.
  ordered_json runtime = ordered_json::object();
  Seed128 seed;
  int k_max = 0;
  std::optional<double> truncation_bound;
  std::string started;
  std::string finished;
  std::vector<std::pair<std::string, std::string>> outputs;  // path, content hash

  /// Hash over the command, parameters, seed and k_max (timestamps excluded).
  std::string input_hash() const {
    ordered_json j;
    j["command"] = command;
    j["parameters"] = parameters;
    j["seed"] = seed.to_hex();
    j["k_max"] = k_max;
    return content_hash(j.dump());
  }

  ordered_json to_json() const {
    ordered_json j;
    j["command"] = command;
    j["parameters"] = parameters;
    j["seed"] = seed.to_hex();
    j["k_max"] = k_max;
    j["input_hash"] = input_hash();
    j["runtime"] = runtime;
    j["truncation_bound"] = truncation_bound ? ordered_json(*truncation_bound) : ordered_json(nullptr);
    j["started"] = started;
    j["finished"] = finished;
    ordered_json outs = ordered_json::array();
    for (const auto& [path, hash] : outputs) outs.push_back(ordered_json{{"path", path}, {"hash", hash}});
    j["outputs"] = std::move(outs);
    return j;
  }

  std::string dump() const { return to_json().dump(2) + "\n"; }
};

inline void write_file(const std::string& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write to " + path + " failed");
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace hjlab

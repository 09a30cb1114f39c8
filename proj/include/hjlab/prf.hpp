#pragma once

#include <array>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>

namespace hjlab {

/// 128-bit seed. Serialized as 32 hex characters, high word first.
struct Seed128 {
  std::uint64_t lo = 0;
  std::uint64_t hi = 0;

  friend bool operator==(const Seed128&, const Seed128&) = default;

  std::string to_hex() const {
    static constexpr char digits[] = "0123456789abcdef";
    std::string out(32, '0');
    for (int i = 0; i < 16; ++i) {
      out[15 - i] = digits[(hi >> (4 * i)) & 0xF];
      out[31 - i] = digits[(lo >> (4 * i)) & 0xF];
    }
    return out;
  }

  static Seed128 from_hex(std::string_view text) {
    if (text.size() != 32) {
      throw std::invalid_argument("seed must be exactly 32 hex characters");
    }
    auto nibble = [](char ch) -> std::uint64_t {
      if (ch >= '0' && ch <= '9') return static_cast<std::uint64_t>(ch - '0');
      if (ch >= 'a' && ch <= 'f') return static_cast<std::uint64_t>(ch - 'a' + 10);
      if (ch >= 'A' && ch <= 'F') return static_cast<std::uint64_t>(ch - 'A' + 10);
      throw std::invalid_argument("seed contains a non-hex character");
    };
    Seed128 seed;
    for (int i = 0; i < 16; ++i) {
      seed.hi = (seed.hi << 4) | nibble(text[static_cast<std::size_t>(i)]);
      seed.lo = (seed.lo << 4) | nibble(text[static_cast<std::size_t>(16 + i)]);
    }
    return seed;
  }

  static Seed128 from_entropy() {
    std::random_device rd;
    auto word = [&rd] {
      return (static_cast<std::uint64_t>(rd()) << 32) ^ static_cast<std::uint64_t>(rd());
    };
    return Seed128{word(), word()};
  }
};

namespace detail {

inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

constexpr std::uint64_t finalize(std::uint64_t z) {
  z ^= z >> 30;
  z *= 0xBF58476D1CE4E5B9ull;
  z ^= z >> 27;
  z *= 0x94D049BB133111EBull;
  z ^= z >> 31;
  return z;
}

constexpr std::uint64_t tag(std::string_view name) {
  std::uint64_t out = 0;
  for (char ch : name) out = (out << 8) | static_cast<unsigned char>(ch);
  return out;
}

}  // namespace detail

// Domain-separation tags for the PRF word streams.
namespace tags {
inline constexpr std::uint64_t kSite = detail::tag("site");
inline constexpr std::uint64_t kCount = detail::tag("cnt");
inline constexpr std::uint64_t kPosition = detail::tag("pos");
inline constexpr std::uint64_t kSample = detail::tag("smp");
inline constexpr std::uint64_t kSampleHi = detail::tag("smphi");
inline constexpr std::uint64_t kBytes = detail::tag("bytes");
}  // namespace tags

/// Keyed 64-bit pseudorandom function.
///
/// h starts at seed.lo, then absorbs seed.hi and every word w in order through
/// h = finalize(h ^ (w + golden)), all modulo 2^64. The bit pattern is part of
/// the manifest contract: changing it changes every sampled environment.
constexpr std::uint64_t prf_u64(const Seed128& seed, std::span<const std::uint64_t> words) {
  std::uint64_t h = seed.lo;
  h = detail::finalize(h ^ (seed.hi + detail::kGolden));
  for (std::uint64_t w : words) h = detail::finalize(h ^ (w + detail::kGolden));
  return h;
}

constexpr std::uint64_t prf_u64(const Seed128& seed, std::initializer_list<std::uint64_t> words) {
  return prf_u64(seed, std::span<const std::uint64_t>(words.begin(), words.size()));
}

constexpr std::uint64_t as_word(std::int64_t v) { return static_cast<std::uint64_t>(v); }

/// Uniform double in [0,1) from the top 53 bits.
constexpr double to_unit(std::uint64_t h) {
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

/// Site-wise Bernoulli(4^{-2k}) test: h < 2^(64-4k). Exact for 1 <= k <= 15.
constexpr bool bernoulli_activity(std::uint64_t h, int k) {
  return h < (std::uint64_t{1} << (64 - 4 * k));
}

/// Seed of the i-th independent sample drawn from a master seed.
constexpr Seed128 derive_seed(const Seed128& master, std::uint64_t index) {
  return Seed128{prf_u64(master, {tags::kSample, index}), prf_u64(master, {tags::kSampleHi, index})};
}

/// Content hash of a byte string (used for manifest input hashes).
inline std::string content_hash(std::string_view bytes) {
  Seed128 key{0x6a09e667f3bcc908ull, 0xbb67ae8584caa73bull};
  std::uint64_t lo = prf_u64(key, {tags::kBytes, bytes.size()});
  std::uint64_t hi = lo ^ 0xa54ff53a5f1d36f1ull;
  std::uint64_t word = 0;
  int filled = 0;
  auto absorb = [&](std::uint64_t w) {
    lo = detail::finalize(lo ^ (w + detail::kGolden));
    hi = detail::finalize(hi ^ (w + 0x3c6ef372fe94f82bull));
  };
  for (char ch : bytes) {
    word = (word << 8) | static_cast<unsigned char>(ch);
    if (++filled == 8) {
      absorb(word);
      word = 0;
      filled = 0;
    }
  }
  if (filled > 0) absorb(word ^ (static_cast<std::uint64_t>(filled) << 60));
  return Seed128{lo, hi}.to_hex();
}

}  // namespace hjlab

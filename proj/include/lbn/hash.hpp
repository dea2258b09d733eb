#pragma once

#include <cstdint>
#include <string_view>

namespace lbn {

inline constexpr std::uint64_t kFnvOffsetBasis = 0xcbf29ce484222325ULL;
inline constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

/// 64-bit FNV-1a, continued from `state`.
constexpr std::uint64_t fnv1a(std::string_view bytes, std::uint64_t state = kFnvOffsetBasis) noexcept {
  for (const char c : bytes) {
    state ^= static_cast<std::uint8_t>(c);
    state *= kFnvPrime;
  }
  return state;
}

/// Feeds the eight little-endian bytes of `value` into an FNV-1a state.
constexpr std::uint64_t fnv1a_u64(std::uint64_t value, std::uint64_t state = kFnvOffsetBasis) noexcept {
  for (int i = 0; i < 8; ++i) {
    state ^= (value >> (8 * i)) & 0xffU;
    state *= kFnvPrime;
  }
  return state;
}

/// Avalanche finalizer (splitmix64). FNV alone leaves the high bits of short
/// keys poorly mixed, which matters when comparing against a threshold.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ULL;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebULL;
  x ^= x >> 31;
  return x;
}

}  // namespace lbn

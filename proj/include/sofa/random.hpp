#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace sofa {

/// FNV-1a, stable across platforms.
constexpr std::uint64_t stable_hash(std::string_view text) noexcept {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

/// Independent generator for one (key, round) pair under a master seed.
/// Keying by agent id rather than position keeps draws stable when the
/// population is reordered.
inline std::mt19937_64 substream(std::uint64_t master_seed, std::string_view key,
                                 std::uint64_t round) {
  const std::uint64_t k = stable_hash(key);
  std::seed_seq seq{static_cast<std::uint32_t>(master_seed), static_cast<std::uint32_t>(master_seed >> 32),
                    static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(k >> 32),
                    static_cast<std::uint32_t>(round), static_cast<std::uint32_t>(round >> 32)};
  return std::mt19937_64(seq);
}

}  // namespace sofa

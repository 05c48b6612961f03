#pragma once
// Stable hashing and seeding helpers. std::hash is not guaranteed stable
// across standard libraries, so anything persisted or used for seeding
// goes through these.

#include <cstdint>
#include <string>
#include <string_view>

namespace mbti {

constexpr uint64_t fnv1a64(std::string_view s) {
  uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

constexpr uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Sub-seed for unit k of a run seeded with master_seed.
constexpr uint64_t derive_seed(uint64_t master_seed, uint64_t k) {
  return splitmix64(splitmix64(master_seed) ^ splitmix64(k + 0x9e3779b97f4a7c15ull));
}

inline std::string hash_hex(std::string_view s) {
  static const char* digits = "0123456789abcdef";
  uint64_t h = fnv1a64(s);
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = digits[h & 0xf];
    h >>= 4;
  }
  return out;
}

// Deterministic bounded draw, independent of the standard library's
// uniform_int_distribution implementation.
template <class Rng>
uint64_t bounded_draw(Rng& rng, uint64_t n) {
  // Rejection sampling over the top of the range to avoid modulo bias.
  const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  uint64_t v;
  do {
    v = rng();
  } while (v >= limit);
  return v % n;
}

}  // namespace mbti

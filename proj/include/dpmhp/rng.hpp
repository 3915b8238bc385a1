#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace dpmhp {

using Engine = std::mt19937_64;

/// FNV-1a over the bytes of `text`.
constexpr std::uint64_t hash_purpose(std::string_view text) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : text) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Independent generator for one named consumer of a run seed.
///
/// Every random consumer asks for its own stream by purpose string
/// ("init", "shuffle", "sample/call-center", ...). Adding a consumer never
/// shifts the draws seen by the others.
inline Engine make_stream(std::uint64_t seed, std::string_view purpose) {
  return Engine(splitmix64(seed ^ splitmix64(hash_purpose(purpose))));
}

/// Uniform draw in (0, 1]; safe as an argument to log.
inline double uniform_open_zero(Engine& eng) {
  return 1.0 - std::generate_canonical<double, 53>(eng);
}

} // namespace dpmhp

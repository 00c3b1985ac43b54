#pragma once

#include <cstdint>
#include <string_view>

namespace lagtrend {

/// splitmix64 finalizer; a bijective 64-bit mixer.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t fnv1a(std::string_view text) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Child seed for a named task. Independent of scheduling order, so per-stock
/// work can run on any thread without changing results.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::string_view label) noexcept {
  return mix64(master ^ mix64(fnv1a(label)));
}

constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) noexcept {
  return mix64(master ^ mix64(index + 0x632be59bd9b4e019ULL));
}

}  // namespace lagtrend

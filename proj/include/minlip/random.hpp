#pragma once

#include <cstdint>
#include <initializer_list>

namespace minlip {

/// SplitMix64 finalizer; a bijective mixer on 64-bit words.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Derives a child seed as a pure function of a parent seed and a tuple of
/// labels. Distinct label tuples give statistically independent streams.
constexpr std::uint64_t derive_seed(std::uint64_t parent,
                                    std::initializer_list<std::uint64_t> labels) noexcept {
  std::uint64_t h = splitmix64(parent);
  for (std::uint64_t v : labels) h = splitmix64(h ^ splitmix64(v + 0x632be59bd9b4e019ULL));
  return h;
}

// Stream labels for the independent random draws of one simulation cell.
enum class Stream : std::uint64_t { system = 1, input = 2, noise = 3, method = 4 };

constexpr std::uint64_t stream_seed(std::uint64_t parent, Stream s) noexcept {
  return derive_seed(parent, {static_cast<std::uint64_t>(s)});
}

}  // namespace minlip

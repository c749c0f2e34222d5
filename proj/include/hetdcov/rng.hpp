#ifndef HETDCOV_RNG_HPP
#define HETDCOV_RNG_HPP

#include <cstdint>
#include <random>
#include <string_view>

namespace hetdcov {

namespace detail {

inline constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline constexpr std::uint64_t fnv1a(std::string_view s) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace detail

using Engine = std::mt19937_64;

/// Source of independent random streams keyed by (master seed, purpose tag, index).
///
/// A stream depends only on that triple, so results never depend on the order in
/// which streams are drawn or on how work is split across threads.
struct RngSpec {
  std::uint64_t master_seed = 0;

  std::uint64_t derive(std::string_view tag, std::uint64_t index) const noexcept {
    std::uint64_t h = detail::splitmix64(master_seed);
    h = detail::splitmix64(h ^ detail::fnv1a(tag));
    h = detail::splitmix64(h ^ index);
    return h;
  }

  Engine stream(std::string_view tag, std::uint64_t index) const { return Engine(derive(tag, index)); }

  /// Child spec whose master seed is derived from this one.
  RngSpec child(std::string_view tag, std::uint64_t index) const { return RngSpec{derive(tag, index)}; }
};

}  // namespace hetdcov

#endif  // HETDCOV_RNG_HPP

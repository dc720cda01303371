#pragma once

#include <cstdint>
#include <random>

namespace coarsen {

// SplitMix64 finalizer; used to derive well-separated seeds from small
// integers.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Seed of stream `stream` under `master`. Distinct (master, stream) pairs give
// independent-looking engine seeds.
constexpr std::uint64_t derive_seed(std::uint64_t master,
                                    std::uint64_t stream) noexcept {
  return splitmix64(splitmix64(master) ^ splitmix64(stream + 0x632be59bd9b4e019ULL));
}

constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a,
                                    std::uint64_t b) noexcept {
  return derive_seed(derive_seed(master, a), b);
}

// Deterministic generator. std::mt19937_64 has a fully specified output
// sequence, and bounded() does not depend on the standard library's
// distribution implementations, so draws are identical across platforms.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t operator()() { return engine_(); }

  // Unbiased integer in [0, range), range > 0 (Lemire's multiply-shift with
  // rejection).
  std::uint64_t bounded(std::uint64_t range) {
    __uint128_t m = static_cast<__uint128_t>(engine_()) * range;
    auto low = static_cast<std::uint64_t>(m);
    if (low < range) {
      const std::uint64_t threshold = (0 - range) % range;
      while (low < threshold) {
        m = static_cast<__uint128_t>(engine_()) * range;
        low = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace coarsen

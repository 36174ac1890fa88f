#pragma once

#include <array>
#include <cstdint>

namespace nestcov {

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11).
class Philox4x32 {
 public:
  using Block = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  explicit Philox4x32(std::uint64_t seed)
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)} {}

  static Block apply(Block counter, Key key);

  Block operator()(std::uint64_t index) const {
    return apply({static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32), 0u,
                  0u},
                 key_);
  }

 private:
  Key key_;
};

/// Deterministic stream of uniforms and standard normals keyed by a seed.
/// Draw i depends only on (seed, i).
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : philox_(seed) {}

  /// Uniform on the open interval (0, 1).
  double uniform();
  double normal();
  /// Uniform integer in [0, bound).
  std::uint64_t below(std::uint64_t bound);

 private:
  void refill();

  Philox4x32 philox_;
  std::uint64_t counter_ = 0;
  Philox4x32::Block block_{};
  int used_ = 4;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t x) noexcept;

/// Order-sensitive hash of a seed with two stream coordinates.
std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) noexcept;

}  // namespace nestcov

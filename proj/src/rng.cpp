#include "nestcov/rng.hpp"

#include <cmath>
#include <numbers>

namespace nestcov {

Philox4x32::Block Philox4x32::apply(Block ctr, Key key) {
  constexpr std::uint32_t kM0 = 0xD2511F53u, kM1 = 0xCD9E8D57u;
  constexpr std::uint32_t kW0 = 0x9E3779B9u, kW1 = 0xBB67AE85u;
  for (int round = 0; round < 10; ++round) {
    const std::uint64_t p0 = static_cast<std::uint64_t>(kM0) * ctr[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(kM1) * ctr[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32), lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32), lo1 = static_cast<std::uint32_t>(p1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += kW0;
    key[1] += kW1;
  }
  return ctr;
}

void RandomStream::refill() {
  block_ = philox_(counter_++);
  used_ = 0;
}

double RandomStream::uniform() {
  if (used_ > 2) refill();
  const std::uint64_t a = block_[static_cast<std::size_t>(used_)];
  const std::uint64_t b = block_[static_cast<std::size_t>(used_ + 1)];
  used_ += 2;
  const std::uint64_t bits = ((a << 32) | b) >> 11;  // 53 bits
  return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
}

double RandomStream::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const double u1 = uniform();
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  spare_ = radius * std::sin(angle);
  has_spare_ = true;
  return radius * std::cos(angle);
}

std::uint64_t RandomStream::below(std::uint64_t bound) {
  // Lemire-style rejection keeps the draw exactly uniform.
  const std::uint64_t limit = bound == 0 ? 0 : (~std::uint64_t{0} - bound + 1) % bound;
  for (;;) {
    if (used_ > 2) refill();
    const std::uint64_t x = (static_cast<std::uint64_t>(block_[static_cast<std::size_t>(used_)]) << 32) |
                            block_[static_cast<std::size_t>(used_ + 1)];
    used_ += 2;
    if (x >= limit) return bound == 0 ? 0 : x % bound;
  }
}

std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) noexcept {
  return mix64(mix64(mix64(seed) ^ a) ^ b);
}

}  // namespace nestcov

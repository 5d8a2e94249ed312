#pragma once

// Counter-based Gaussian source. Every variate is a pure function of
// (seed, domain, stream, step, index), so replica streams do not depend on
// execution order or thread count.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>

namespace hecop {

/// Philox4x32-10 (Salmon et al., SC'11).
class Philox4x32 {
 public:
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static Counter generate(Counter ctr, Key key) noexcept {
    for (int round = 0; round < 10; ++round) {
      ctr = single_round(ctr, key);
      key[0] += kWeyl0;
      key[1] += kWeyl1;
    }
    return ctr;
  }

 private:
  static constexpr std::uint32_t kMul0 = 0xD2511F53u;
  static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

  static Counter single_round(const Counter& c, const Key& k) noexcept {
    const std::uint64_t p0 = std::uint64_t{kMul0} * c[0];
    const std::uint64_t p1 = std::uint64_t{kMul1} * c[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const auto lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
    const auto lo1 = static_cast<std::uint32_t>(p1);
    return {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
  }
};

/// Separates the random streams used by different samplers sharing a seed.
enum class RngDomain : std::uint32_t {
  kSde = 1,
  kHermitian = 2,
  kSkew = 3,
  kImportance = 4,
  kTest = 99,
};

/// Gaussian variates addressed by (stream, step, index).
///
/// Two normals come out of each Philox block via Box-Muller, using 53-bit
/// uniforms built from pairs of 32-bit words.
class GaussianStream {
 public:
  GaussianStream(std::uint64_t seed, RngDomain domain, std::uint64_t stream) noexcept
      : key_{static_cast<std::uint32_t>(seed) ^ (static_cast<std::uint32_t>(domain) * 0x85EBCA6Bu),
             static_cast<std::uint32_t>(seed >> 32)},
        stream_lo_(static_cast<std::uint32_t>(stream)),
        stream_hi_(static_cast<std::uint32_t>(stream >> 32)) {}

  /// Fills `out` with independent N(0,1) variates for the given step.
  void fill(std::uint32_t step, std::span<double> out) const noexcept {
    const std::size_t n = out.size();
    for (std::size_t b = 0; 2 * b < n; ++b) {
      const auto pair = normal_pair(step, static_cast<std::uint32_t>(b));
      out[2 * b] = pair[0];
      if (2 * b + 1 < n) out[2 * b + 1] = pair[1];
    }
  }

  double normal(std::uint32_t step, std::uint32_t index) const noexcept {
    return normal_pair(step, index / 2)[index % 2];
  }

  /// Uniform on (0, 1).
  double uniform(std::uint32_t step, std::uint32_t index) const noexcept {
    const auto r = Philox4x32::generate({index, step, stream_lo_, stream_hi_ ^ 0x5A5A5A5Au}, key_);
    return to_open_unit(r[0], r[1]);
  }

 private:
  std::array<double, 2> normal_pair(std::uint32_t step, std::uint32_t block) const noexcept {
    const auto r = Philox4x32::generate({block, step, stream_lo_, stream_hi_}, key_);
    const double u1 = to_open_unit(r[0], r[1]);
    const double u2 = to_open_unit(r[2], r[3]);
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    return {radius * std::cos(angle), radius * std::sin(angle)};
  }

  static double to_open_unit(std::uint32_t a, std::uint32_t b) noexcept {
    const std::uint64_t bits = (std::uint64_t{a} << 21) ^ (std::uint64_t{b} >> 11);
    const std::uint64_t m53 = bits & ((std::uint64_t{1} << 53) - 1);
    return (static_cast<double>(m53) + 0.5) * 0x1.0p-53;
  }

  Philox4x32::Key key_;
  std::uint32_t stream_lo_;
  std::uint32_t stream_hi_;
};

}  // namespace hecop

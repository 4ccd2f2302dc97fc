#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>

namespace neld {

/// Philox4x32-10 block function (Salmon et al., SC'11).
inline std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr, std::array<std::uint32_t, 2> key) {
  constexpr std::uint32_t kM0 = 0xD2511F53u, kM1 = 0xCD9E8D57u;
  constexpr std::uint32_t kW0 = 0x9E3779B9u, kW1 = 0xBB67AE85u;
  for (int round = 0; round < 10; ++round) {
    const std::uint64_t p0 = std::uint64_t(kM0) * ctr[0];
    const std::uint64_t p1 = std::uint64_t(kM1) * ctr[2];
    ctr = {std::uint32_t(p1 >> 32) ^ ctr[1] ^ key[0], std::uint32_t(p1), std::uint32_t(p0 >> 32) ^ ctr[3] ^ key[1],
           std::uint32_t(p0)};
    key[0] += kW0;
    key[1] += kW1;
  }
  return ctr;
}

/// Stateless stream of variates addressed by (seed, stream, step, block).
///
/// Counter words are (block, step & 0xffffffff, step >> 32, stream); the key is
/// (seed & 0xffffffff, seed >> 32). Each block gives two doubles built from
/// 53 bits of two consecutive words, u = ((w0 << 32 | w1) >> 11) * 2^-53,
/// and two Box-Muller normals sqrt(-2 ln(1 - u0)) * (cos, sin)(2 pi u1).
class CounterRng {
 public:
  // Step index reserved for drawing initial conditions.
  static constexpr std::uint64_t kInitStep = ~std::uint64_t(0);

  CounterRng(std::uint64_t seed, std::uint32_t stream) : key_{std::uint32_t(seed), std::uint32_t(seed >> 32)}, stream_(stream) {}

  void uniforms(std::uint64_t step, std::span<double> out) const {
    for (std::size_t i = 0; i < out.size(); i += 2) {
      const auto pair = uniform_pair(step, std::uint32_t(i / 2));
      out[i] = pair[0];
      if (i + 1 < out.size()) out[i + 1] = pair[1];
    }
  }

  void normals(std::uint64_t step, std::span<double> out) const {
    for (std::size_t i = 0; i < out.size(); i += 2) {
      const auto u = uniform_pair(step, std::uint32_t(i / 2));
      const double radius = std::sqrt(-2.0 * std::log1p(-u[0]));
      const double angle = 2.0 * std::numbers::pi * u[1];
      out[i] = radius * std::cos(angle);
      if (i + 1 < out.size()) out[i + 1] = radius * std::sin(angle);
    }
  }

 private:
  std::array<double, 2> uniform_pair(std::uint64_t step, std::uint32_t block) const {
    const auto w = philox4x32({block, std::uint32_t(step), std::uint32_t(step >> 32), stream_}, key_);
    constexpr double kScale = 1.0 / 9007199254740992.0;  // 2^-53
    const std::uint64_t a = (std::uint64_t(w[0]) << 32 | w[1]) >> 11;
    const std::uint64_t b = (std::uint64_t(w[2]) << 32 | w[3]) >> 11;
    return {double(a) * kScale, double(b) * kScale};
  }

  std::array<std::uint32_t, 2> key_;
  std::uint32_t stream_;
};

}  // namespace neld

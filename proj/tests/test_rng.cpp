#include <doctest.h>

#include <cmath>
#include <vector>

#include "neld/rng.hpp"

using namespace neld;

// Known-answer vectors from the Random123 distribution (kat_vectors).
TEST_CASE("philox4x32-10 known answers") {
  using W = std::array<std::uint32_t, 4>;
  CHECK(philox4x32({0, 0, 0, 0}, {0, 0}) == W{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
  CHECK(philox4x32({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff}) ==
        W{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
  CHECK(philox4x32({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0}) ==
        W{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("streams are deterministic and distinct") {
  std::vector<double> a(7), b(7), c(7), d(7);
  CounterRng(42, 3).normals(10, a);
  CounterRng(42, 3).normals(10, b);
  CounterRng(42, 4).normals(10, c);
  CounterRng(42, 3).normals(11, d);
  CHECK(a == b);
  CHECK(a != c);
  CHECK(a != d);
}

TEST_CASE("uniforms lie in [0, 1)") {
  std::vector<double> u(100000);
  CounterRng(7, 0).uniforms(0, u);
  double sum = 0.0;
  for (double x : u) {
    CHECK(x >= 0.0);
    CHECK(x < 1.0);
    sum += x;
  }
  const double mean = sum / u.size();
  CHECK(std::abs(mean - 0.5) < 5.0 * std::sqrt(1.0 / 12.0 / u.size()));
}

TEST_CASE("normals have unit variance") {
  const std::size_t n = 200000;
  std::vector<double> z(n);
  CounterRng(9, 1).normals(5, z);
  double s1 = 0.0, s2 = 0.0, s4 = 0.0;
  for (double x : z) {
    s1 += x;
    s2 += x * x;
    s4 += x * x * x * x;
  }
  CHECK(std::abs(s1 / n) < 5.0 / std::sqrt(double(n)));
  CHECK(std::abs(s2 / n - 1.0) < 5.0 * std::sqrt(2.0 / n));
  CHECK(std::abs(s4 / n - 3.0) < 5.0 * std::sqrt(96.0 / n));
}

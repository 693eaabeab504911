#include <doctest.h>

#include <cmath>
#include <vector>

#include "supercam/rng.hpp"

using supercam::KeyedRng;
using supercam::Philox4x32;
using supercam::StreamPurpose;

namespace {

Philox4x32 with_key(std::uint32_t k0, std::uint32_t k1) {
  return Philox4x32((static_cast<std::uint64_t>(k1) << 32) | k0);
}

}  // namespace

TEST_CASE("philox known answers") {
  using C = Philox4x32::Counter;
  CHECK(with_key(0, 0)(C{0, 0, 0, 0}) == C{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u});
  CHECK(with_key(0xffffffffu, 0xffffffffu)(C{0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu}) ==
        C{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu});
  CHECK(with_key(0xa4093822u, 0x299f31d0u)(C{0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u}) ==
        C{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u});
}

TEST_CASE("streams are separated by purpose and seed") {
  const KeyedRng a(7, StreamPurpose::kPhotonDetection);
  const KeyedRng b(7, StreamPurpose::kSeedPlacement);
  const KeyedRng c(8, StreamPurpose::kPhotonDetection);
  CHECK(a.block(1, 2, 3) != b.block(1, 2, 3));
  CHECK(a.block(1, 2, 3) != c.block(1, 2, 3));
  CHECK(a.block(1, 2, 3) == KeyedRng(7, StreamPurpose::kPhotonDetection).block(1, 2, 3));
}

TEST_CASE("uniform lies in [0, 1) with the right mean") {
  const KeyedRng rng(42, StreamPurpose::kSynthesis);
  double sum = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform(static_cast<std::uint32_t>(i), 0, 0);
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    sum += u;
  }
  CHECK(std::abs(sum / n - 0.5) < 4.0 * std::sqrt(1.0 / 12.0 / n));
  CHECK(KeyedRng::to_unit(0xffffffffu, 0xffffffffu) < 1.0);
  CHECK(KeyedRng::to_unit(0, 0) == 0.0);
}

TEST_CASE("below is bounded and roughly uniform") {
  const KeyedRng rng(3, StreamPurpose::kSeedPlacement);
  std::vector<int> counts(7, 0);
  const int n = 70000;
  for (int i = 0; i < n; ++i) {
    const auto v = rng.below(7, static_cast<std::uint32_t>(i), 1, 2);
    REQUIRE(v < 7);
    ++counts[v];
  }
  double chi2 = 0.0;
  for (int c : counts) chi2 += (c - 10000.0) * (c - 10000.0) / 10000.0;
  CHECK(chi2 < 22.46);  // df = 6, p = 0.001
  CHECK(rng.below(1, 5, 5, 5) == 0);
}

#pragma once

#include <array>
#include <cstdint>

namespace supercam {

/// Philox4x32-10 counter-based generator (Salmon et al., "Parallel random
/// numbers: as easy as 1, 2, 3"). Every draw is a pure function of
/// (key, counter), so any pixel or frame can be sampled independently and in
/// any order with identical results.
class Philox4x32 {
public:
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  explicit constexpr Philox4x32(std::uint64_t seed) noexcept
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)} {}

  constexpr Counter operator()(Counter ctr) const noexcept {
    Key key = key_;
    for (int round = 0; round < 10; ++round) {
      if (round > 0) {
        key[0] += kWeyl0;
        key[1] += kWeyl1;
      }
      const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * ctr[0];
      const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * ctr[2];
      ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0], static_cast<std::uint32_t>(p1),
             static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1], static_cast<std::uint32_t>(p0)};
    }
    return ctr;
  }

  const Key& key() const noexcept { return key_; }

private:
  static constexpr std::uint32_t kMul0 = 0xD2511F53u;
  static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

  Key key_;
};

/// Independent streams drawn from one seed. The purpose tag occupies the high
/// half of the last counter word so streams for different jobs never collide.
enum class StreamPurpose : std::uint32_t {
  kPhotonDetection = 1,
  kSeedPlacement = 2,
  kSynthesis = 3,
};

/// Keyed random source: a seed plus a purpose, addressed by up to three
/// 32-bit coordinates and a 16-bit sub-stream.
class KeyedRng {
public:
  constexpr KeyedRng(std::uint64_t seed, StreamPurpose purpose) noexcept
      : philox_(seed), purpose_(static_cast<std::uint32_t>(purpose)) {}

  constexpr Philox4x32::Counter block(std::uint32_t a, std::uint32_t b, std::uint32_t c,
                                      std::uint16_t sub = 0) const noexcept {
    return philox_({a, b, c, (purpose_ << 16) | sub});
  }

  /// Uniform double in [0, 1) with 53 random bits.
  constexpr double uniform(std::uint32_t a, std::uint32_t b, std::uint32_t c,
                           std::uint16_t sub = 0) const noexcept {
    const auto out = block(a, b, c, sub);
    return to_unit(out[0], out[1]);
  }

  /// Uniform integer in [0, n) by 64-bit multiply-shift.
  constexpr std::uint64_t below(std::uint64_t n, std::uint32_t a, std::uint32_t b,
                                std::uint32_t c, std::uint16_t sub = 0) const noexcept {
    const auto out = block(a, b, c, sub);
    const std::uint64_t bits = (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
    return static_cast<std::uint64_t>((static_cast<unsigned __int128>(bits) * n) >> 64);
  }

  static constexpr double to_unit(std::uint32_t hi, std::uint32_t lo) noexcept {
    const std::uint64_t bits = (static_cast<std::uint64_t>(hi >> 5) << 26) | (lo >> 6);
    return static_cast<double>(bits) * 0x1.0p-53;
  }

private:
  Philox4x32 philox_;
  std::uint32_t purpose_;
};

}  // namespace supercam

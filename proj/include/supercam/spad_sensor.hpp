#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "supercam/image.hpp"

namespace supercam::spad {

/// Passive SPAD array parameters. Exposure time is folded into the exposure
/// scale, so there is no separate tau here.
struct SensorConfig {
  double quantum_efficiency = 1.0;  // eta, in (0, 1]
  double dark_count_rate = 0.0;     // r_q, in image-flux units; >= 0
  int frames = 1024;                // F, binary frames per exposure
  double mean_photons_per_pixel = 2.0;  // p, target detections per pixel over F frames

  /// Throws ConfigError unless 0 < eta <= 1, r_q >= 0, F >= 1, p > 0, p/F < 1.
  void validate() const;
};

/// Per-image multiplier mapping intensity to Bernoulli log-odds, c = p/(F * mean(I)).
struct ExposureScale {
  double c = 1.0;
};

/// Stack of binary detection frames for one channel, stored in the on-disk
/// layout: frame-major, row-major, each row padded to a byte, MSB first.
class PhotonCube {
public:
  PhotonCube() = default;
  PhotonCube(int width, int height, int frame_count);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  int frame_count() const noexcept { return frame_count_; }
  std::size_t row_bytes() const noexcept { return (static_cast<std::size_t>(width_) + 7) / 8; }
  std::size_t frame_bytes() const noexcept { return row_bytes() * static_cast<std::size_t>(height_); }

  bool bit(int frame, int x, int y) const noexcept;
  void set_bit(int frame, int x, int y, bool value) noexcept;

  /// Detection count S(x, y) over all frames.
  std::uint32_t sum(int x, int y) const noexcept {
    return sums_[static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
                 static_cast<std::size_t>(x)];
  }

  std::span<const std::uint8_t> packed() const noexcept { return bits_; }
  std::span<std::uint8_t> packed() noexcept { return bits_; }

  /// Recomputes S from the packed bits.
  void recompute_sums();

  /// True when every S(x, y) equals the popcount of its bit column.
  bool sums_consistent() const;

  friend bool operator==(const PhotonCube&, const PhotonCube&) = default;

private:
  std::size_t byte_index(int frame, int x, int y) const noexcept {
    return static_cast<std::size_t>(frame) * frame_bytes() +
           static_cast<std::size_t>(y) * row_bytes() + static_cast<std::size_t>(x) / 8;
  }

  int width_ = 0;
  int height_ = 0;
  int frame_count_ = 0;
  std::vector<std::uint8_t> bits_;
  std::vector<std::uint32_t> sums_;
};

/// c = p / (F * I_avg). Throws DegenerateInputError for an all-zero image.
ExposureScale compute_exposure_scale(const IntensityImage& image, const SensorConfig& config);

/// Probability that one frame registers a detection: 1 - exp(-c (eta I + r_q)).
double detection_probability(double intensity, ExposureScale scale, const SensorConfig& config);

/// Exact per-frame detection rate averaged over all samples of `image`.
double mean_detection_probability(const IntensityImage& image, ExposureScale scale,
                                  const SensorConfig& config);

/// Inverts the detection model for a count of `detections` out of F frames.
/// S = F is clamped to F - 1/2 and negative estimates clamp to zero.
double estimate_intensity(std::uint32_t detections, ExposureScale scale,
                          const SensorConfig& config);

/// Samples every frame of one channel. Pixel (x, y) in frame f always uses
/// the stream keyed by (seed, f, x, y, channel), so this agrees bit for bit
/// with `expose_pixel`.
PhotonCube sample_photon_cube(const IntensityImage& image, ExposureScale scale,
                              const SensorConfig& config, std::uint64_t seed, int channel = 0);

/// Applies `estimate_intensity` per pixel.
IntensityImage recover_intensity(const PhotonCube& cube, ExposureScale scale,
                                 const SensorConfig& config);

/// Result of exposing a single pixel: detection count per channel and the
/// recovered estimate per channel.
struct PixelExposure {
  std::vector<std::uint32_t> detections;
  std::vector<double> estimate;
};

/// Draws F Bernoulli samples for every channel of the single pixel (x, y)
/// given its flux values, without looking at any other pixel.
PixelExposure expose_flux(std::span<const double> flux, int x, int y, ExposureScale scale,
                          const SensorConfig& config, std::uint64_t seed);

/// Convenience over `expose_flux` that reads (x, y) from `image`.
/// Throws ConfigError when (x, y) lies outside the image.
PixelExposure expose_pixel(const IntensityImage& image, int x, int y, ExposureScale scale,
                           const SensorConfig& config, std::uint64_t seed);

/// Writes the "SPC1" cube format.
void save_photon_cube(const PhotonCube& cube, const std::filesystem::path& path);

/// Expected cube geometry. Zero fields are taken from the file header.
struct CubeLayout {
  int width = 0;
  int height = 0;
  int frame_count = 0;
};

/// Reads an "SPC1" cube. Throws FormatError on bad magic, truncation, trailing
/// bytes, or a header that disagrees with `layout`.
PhotonCube load_photon_cube(const std::filesystem::path& path, CubeLayout layout = {});

/// Parses an in-memory "SPC1" buffer.
PhotonCube parse_photon_cube(std::span<const std::uint8_t> bytes, CubeLayout layout = {});
std::vector<std::uint8_t> serialize_photon_cube(const PhotonCube& cube);

}  // namespace supercam::spad

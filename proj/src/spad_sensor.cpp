#include "supercam/spad_sensor.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <string>

#include "supercam/rng.hpp"

namespace supercam::spad {
namespace {

constexpr std::uint8_t kCubeMagic[4] = {'S', 'P', 'C', '1'};
constexpr std::size_t kCubeHeaderBytes = 16;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(std::span<const std::uint8_t> bytes, std::size_t offset) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes[offset + i]) << (8 * i);
  return v;
}

// One Philox block serves two consecutive frames: words (0,1) for the even
// frame, (2,3) for the odd one. Calls hit(f) for every detecting frame.
template <class Hit>
void draw_frames(const KeyedRng& rng, int frames, int x, int y, int channel, double prob, Hit hit) {
  for (int f = 0; f < frames; f += 2) {
    const auto b = rng.block(static_cast<std::uint32_t>(f / 2), static_cast<std::uint32_t>(x),
                             static_cast<std::uint32_t>(y), static_cast<std::uint16_t>(channel));
    if (KeyedRng::to_unit(b[0], b[1]) < prob) hit(f);
    if (f + 1 < frames && KeyedRng::to_unit(b[2], b[3]) < prob) hit(f + 1);
  }
}

}  // namespace

void SensorConfig::validate() const {
  if (!(quantum_efficiency > 0.0 && quantum_efficiency <= 1.0)) {
    throw ConfigError("quantum efficiency must lie in (0, 1]");
  }
  if (!(dark_count_rate >= 0.0) || !std::isfinite(dark_count_rate)) {
    throw ConfigError("dark count rate must be >= 0");
  }
  if (frames < 1) {
    throw ConfigError("frame count must be >= 1");
  }
  if (!(mean_photons_per_pixel > 0.0) || !std::isfinite(mean_photons_per_pixel)) {
    throw ConfigError("mean photons per pixel must be > 0");
  }
  if (mean_photons_per_pixel / frames >= 1.0) {
    throw ConfigError("mean photons per pixel / frames must be < 1, got " +
                      std::to_string(mean_photons_per_pixel / frames));
  }
}

PhotonCube::PhotonCube(int width, int height, int frame_count)
    : width_(width), height_(height), frame_count_(frame_count) {
  if (width < 1 || height < 1 || frame_count < 1) {
    throw ConfigError("photon cube dimensions must be >= 1");
  }
  bits_.assign(frame_bytes() * static_cast<std::size_t>(frame_count), 0);
  sums_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), 0);
}

bool PhotonCube::bit(int frame, int x, int y) const noexcept {
  return (bits_[byte_index(frame, x, y)] >> (7 - (x & 7))) & 1u;
}

void PhotonCube::set_bit(int frame, int x, int y, bool value) noexcept {
  auto& byte = bits_[byte_index(frame, x, y)];
  const auto mask = static_cast<std::uint8_t>(0x80u >> (x & 7));
  const bool old = byte & mask;
  if (old == value) return;
  auto& s = sums_[static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
                  static_cast<std::size_t>(x)];
  if (value) {
    byte |= mask;
    ++s;
  } else {
    byte &= static_cast<std::uint8_t>(~mask);
    --s;
  }
}

void PhotonCube::recompute_sums() {
  std::fill(sums_.begin(), sums_.end(), 0u);
  for (int f = 0; f < frame_count_; ++f) {
    for (int y = 0; y < height_; ++y) {
      for (int x = 0; x < width_; ++x) {
        sums_[static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
              static_cast<std::size_t>(x)] += bit(f, x, y) ? 1u : 0u;
      }
    }
  }
}

bool PhotonCube::sums_consistent() const {
  for (int y = 0; y < height_; ++y) {
    for (int x = 0; x < width_; ++x) {
      std::uint32_t count = 0;
      for (int f = 0; f < frame_count_; ++f) count += bit(f, x, y) ? 1u : 0u;
      if (count != sum(x, y) || count > static_cast<std::uint32_t>(frame_count_)) return false;
    }
  }
  return true;
}

ExposureScale compute_exposure_scale(const IntensityImage& image, const SensorConfig& config) {
  config.validate();
  const double mean = image.mean();
  if (!(mean > 0.0)) {
    throw DegenerateInputError("cannot calibrate exposure on an all-zero image");
  }
  return ExposureScale{config.mean_photons_per_pixel / (config.frames * mean)};
}

double detection_probability(double intensity, ExposureScale scale, const SensorConfig& config) {
  const double rate =
      scale.c * (config.quantum_efficiency * intensity + config.dark_count_rate);
  return -std::expm1(-rate);
}

double mean_detection_probability(const IntensityImage& image, ExposureScale scale,
                                  const SensorConfig& config) {
  double total = 0.0;
  for (double v : image.values()) total += detection_probability(v, scale, config);
  return total / static_cast<double>(image.values().size());
}

double estimate_intensity(std::uint32_t detections, ExposureScale scale,
                          const SensorConfig& config) {
  const double frames = static_cast<double>(config.frames);
  double s = static_cast<double>(std::min<std::uint32_t>(
      detections, static_cast<std::uint32_t>(config.frames)));
  if (s >= frames) s = frames - 0.5;
  const double phi = -std::log1p(-s / frames) / (scale.c * config.quantum_efficiency) -
                     config.dark_count_rate / config.quantum_efficiency;
  return std::max(phi, 0.0);
}

PhotonCube sample_photon_cube(const IntensityImage& image, ExposureScale scale,
                              const SensorConfig& config, std::uint64_t seed, int channel) {
  config.validate();
  if (image.empty()) throw ConfigError("cannot sample an empty image");
  if (channel < 0 || channel >= image.channels()) {
    throw ConfigError("channel index out of range");
  }
  if (!(scale.c > 0.0)) throw ConfigError("exposure scale must be > 0");

  const KeyedRng rng(seed, StreamPurpose::kPhotonDetection);
  PhotonCube cube(image.width(), image.height(), config.frames);
  for (int y = 0; y < image.height(); ++y) {
    for (int x = 0; x < image.width(); ++x) {
      const double prob = detection_probability(image.at(x, y, channel), scale, config);
      if (prob <= 0.0) continue;
      draw_frames(rng, config.frames, x, y, channel, prob,
                  [&](int f) { cube.set_bit(f, x, y, true); });
    }
  }
  return cube;
}

IntensityImage recover_intensity(const PhotonCube& cube, ExposureScale scale,
                                 const SensorConfig& config) {
  if (cube.frame_count() != config.frames) {
    throw ConfigError("cube frame count " + std::to_string(cube.frame_count()) +
                      " does not match sensor frames " + std::to_string(config.frames));
  }
  IntensityImage out(cube.width(), cube.height(), 1);
  for (int y = 0; y < cube.height(); ++y) {
    for (int x = 0; x < cube.width(); ++x) {
      out.at(x, y) = estimate_intensity(cube.sum(x, y), scale, config);
    }
  }
  return out;
}

PixelExposure expose_flux(std::span<const double> flux, int x, int y, ExposureScale scale,
                          const SensorConfig& config, std::uint64_t seed) {
  const KeyedRng rng(seed, StreamPurpose::kPhotonDetection);
  PixelExposure result;
  result.detections.assign(flux.size(), 0u);
  result.estimate.assign(flux.size(), 0.0);
  for (std::size_t c = 0; c < flux.size(); ++c) {
    const double prob = detection_probability(flux[c], scale, config);
    std::uint32_t count = 0;
    if (prob > 0.0) {
      draw_frames(rng, config.frames, x, y, static_cast<int>(c), prob, [&](int) { ++count; });
    }
    result.detections[c] = count;
    result.estimate[c] = estimate_intensity(count, scale, config);
  }
  return result;
}

PixelExposure expose_pixel(const IntensityImage& image, int x, int y, ExposureScale scale,
                           const SensorConfig& config, std::uint64_t seed) {
  config.validate();
  if (!image.contains(x, y)) {
    throw ConfigError("pixel (" + std::to_string(x) + ", " + std::to_string(y) +
                      ") lies outside the image");
  }
  std::vector<double> flux(static_cast<std::size_t>(image.channels()));
  for (int c = 0; c < image.channels(); ++c) flux[static_cast<std::size_t>(c)] = image.at(x, y, c);
  return expose_flux(flux, x, y, scale, config, seed);
}

std::vector<std::uint8_t> serialize_photon_cube(const PhotonCube& cube) {
  std::vector<std::uint8_t> out;
  out.reserve(kCubeHeaderBytes + cube.packed().size());
  out.insert(out.end(), std::begin(kCubeMagic), std::end(kCubeMagic));
  put_u32(out, static_cast<std::uint32_t>(cube.width()));
  put_u32(out, static_cast<std::uint32_t>(cube.height()));
  put_u32(out, static_cast<std::uint32_t>(cube.frame_count()));
  out.insert(out.end(), cube.packed().begin(), cube.packed().end());
  return out;
}

PhotonCube parse_photon_cube(std::span<const std::uint8_t> bytes, CubeLayout layout) {
  if (bytes.size() < kCubeHeaderBytes) {
    throw FormatError("photon cube header truncated", bytes.size());
  }
  if (!std::equal(std::begin(kCubeMagic), std::end(kCubeMagic), bytes.begin())) {
    throw FormatError("bad photon cube magic, expected \"SPC1\"", 0);
  }
  const auto width = get_u32(bytes, 4);
  const auto height = get_u32(bytes, 8);
  const auto frames = get_u32(bytes, 12);
  constexpr std::uint32_t kMaxDim = 1u << 30;
  if (width == 0 || height == 0 || frames == 0 || width > kMaxDim || height > kMaxDim ||
      frames > kMaxDim) {
    throw FormatError("photon cube dimensions out of range", 4);
  }
  const auto check = [](int expected, std::uint32_t actual, const char* name, std::size_t at) {
    if (expected != 0 && static_cast<std::uint32_t>(expected) != actual) {
      throw FormatError(std::string("photon cube ") + name + " mismatch: expected " +
                            std::to_string(expected) + ", file has " + std::to_string(actual),
                        at);
    }
  };
  check(layout.width, width, "width", 4);
  check(layout.height, height, "height", 8);
  check(layout.frame_count, frames, "frame count", 12);

  PhotonCube cube(static_cast<int>(width), static_cast<int>(height), static_cast<int>(frames));
  const std::size_t payload = cube.packed().size();
  if (bytes.size() < kCubeHeaderBytes + payload) {
    throw FormatError("photon cube frame data truncated: need " + std::to_string(payload) +
                          " bytes, have " + std::to_string(bytes.size() - kCubeHeaderBytes),
                      bytes.size());
  }
  if (bytes.size() > kCubeHeaderBytes + payload) {
    throw FormatError("trailing bytes after photon cube frame data", kCubeHeaderBytes + payload);
  }
  std::copy_n(bytes.begin() + kCubeHeaderBytes, payload, cube.packed().begin());
  cube.recompute_sums();
  if (!cube.sums_consistent()) {
    throw FormatError("photon cube detection sums inconsistent", kCubeHeaderBytes);
  }
  return cube;
}

void save_photon_cube(const PhotonCube& cube, const std::filesystem::path& path) {
  const auto bytes = serialize_photon_cube(cube);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

PhotonCube load_photon_cube(const std::filesystem::path& path, CubeLayout layout) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                        std::istreambuf_iterator<char>());
  return parse_photon_cube(bytes, layout);
}

}  // namespace supercam::spad

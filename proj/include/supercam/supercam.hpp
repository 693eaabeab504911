#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "supercam/budget.hpp"
#include "supercam/image.hpp"
#include "supercam/spad_sensor.hpp"

namespace supercam {

struct Rect {
  int x0 = 0;  // inclusive
  int y0 = 0;
  int x1 = 0;  // exclusive
  int y1 = 0;

  int width() const noexcept { return x1 - x0; }
  int height() const noexcept { return y1 - y0; }
  bool contains(int x, int y) const noexcept { return x >= x0 && x < x1 && y >= y0 && y < y1; }
};

/// Image split into cols x rows near-equal rectangles. Cell edges are
/// floor(k * extent / count), so cell extents differ by at most one pixel.
class GridSpec {
public:
  GridSpec(int width, int height, int cols, int rows);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  int cols() const noexcept { return cols_; }
  int rows() const noexcept { return rows_; }
  int cell_count() const noexcept { return cols_ * rows_; }

  /// Nominal (real-valued) cell extents.
  double cell_width() const noexcept { return static_cast<double>(width_) / cols_; }
  double cell_height() const noexcept { return static_cast<double>(height_) / rows_; }

  /// Cells are numbered row-major.
  Rect cell(int index) const noexcept;
  int cell_of(int x, int y) const noexcept;

  std::span<const int> col_edges() const noexcept { return col_edges_; }
  std::span<const int> row_edges() const noexcept { return row_edges_; }

private:
  int width_;
  int height_;
  int cols_;
  int rows_;
  std::vector<int> col_edges_;
  std::vector<int> row_edges_;
};

/// Grid with cols * rows <= target, aspect matched to the image. Throws
/// ConfigError when target is outside [1, width * height].
GridSpec partition_grid(int width, int height, std::int64_t target_cells);

struct SeedPoint {
  int x = 0;
  int y = 0;
  friend bool operator==(const SeedPoint&, const SeedPoint&) = default;
};

/// One uniformly random pixel per cell, in cell order.
std::vector<SeedPoint> seed_cells(const GridSpec& grid, std::uint64_t seed);

/// The only way the sensor side sees the scene: single-pixel reads, each one
/// counted. Never hands out the dense buffer.
class SceneProbe {
public:
  explicit SceneProbe(const IntensityImage& scene) : scene_(&scene) {}

  int width() const noexcept { return scene_->width(); }
  int height() const noexcept { return scene_->height(); }
  int channels() const noexcept { return scene_->channels(); }

  /// Flux values of pixel (x, y), one per channel.
  std::array<double, 3> read(int x, int y);
  void record_draws(std::uint64_t count) noexcept { draws_ += count; }

  std::uint64_t reads() const noexcept { return reads_; }
  std::uint64_t draws() const noexcept { return draws_; }

private:
  const IntensityImage* scene_;
  std::uint64_t reads_ = 0;
  std::uint64_t draws_ = 0;
};

enum class MeasureMode { kSpad, kDirect };

struct SensorSetup {
  spad::SensorConfig config;
  spad::ExposureScale scale;
  std::uint64_t seed = 0;
};

struct Superpixel {
  int x = 0;
  int y = 0;
  std::array<double, 3> intensity{};
  int cell = 0;
};

/// The sparse on-sensor state: one (seed, intensity) entry per grid cell.
struct SuperpixelSet {
  int width = 0;
  int height = 0;
  int channels = 1;
  std::vector<Superpixel> entries;

  std::uint64_t footprint_bytes() const noexcept {
    return kBytesPerSuperpixel * static_cast<std::uint64_t>(entries.size());
  }
};

/// Exposes each seed once. Spad mode runs F Bernoulli draws at the seed only;
/// direct mode copies the scene value (noise-free upper bound).
SuperpixelSet measure_seeds(SceneProbe& scene, std::span<const SeedPoint> seeds,
                            const GridSpec& grid, MeasureMode mode,
                            const std::optional<SensorSetup>& sensor = std::nullopt);

struct FillResult {
  LabelMap labels;
  IntensityImage image;
};

/// Voronoi fill: each pixel takes the id and intensity of its Euclidean-nearest
/// seed, equidistant pixels going to the lowest id. Ids are entry indices.
FillResult nearest_fill(const SuperpixelSet& set);

/// Exact nearest-seed labels for arbitrary seeds, same tie rule.
LabelMap voronoi_labels(int width, int height, std::span<const SeedPoint> seeds);

/// Separable Gaussian blur kernel with taps at offsets [-(r+1), r+1].
struct BlurKernel {
  int radius_x = 0;
  int radius_y = 0;
  double sigma_x = 0.0;
  double sigma_y = 0.0;
  std::vector<double> taps_x;
  std::vector<double> taps_y;
};

/// sigma such that 255 * exp(-(r+1)^2 / (2 sigma^2)) = 1, i.e. the kernel
/// falls below one 8-bit level just past the radius.
double sigma_for_radius(int radius);

/// Normalized taps for one axis.
std::vector<double> gaussian_taps(int radius, double sigma);

BlurKernel make_blur_kernel(int radius_x, int radius_y);

/// Radii are half the nominal cell extents, rounded half-up.
BlurKernel derive_blur_kernel(const GridSpec& grid);

/// Horizontal then vertical 1-D passes, replicating the border.
IntensityImage gaussian_blur(const IntensityImage& image, const BlurKernel& kernel);

struct SuperCamResult {
  IntensityImage filled;    // Voronoi fill before blur
  IntensityImage rendered;  // after blur
  LabelMap labels;
  SuperpixelSet set;
  GridSpec grid;
  BlurKernel kernel;
  BudgetReport report;
};

/// Full pipeline at P = floor(budget / 10). Without a sensor config the seeds
/// are read directly. With one, the exposure scale is metered from the scene
/// before capture (the simulator's auto-exposure, not a sensor readout).
SuperCamResult run_supercam(const IntensityImage& image, std::uint64_t budget_bytes,
                            const std::optional<spad::SensorConfig>& sensor,
                            std::uint64_t seed);

/// SuperCam on a captured photon cube. Each seed looks only at the detection
/// count of its own pixel; intensities are the relative flux -ln(1 - S/F)
/// (saturation clamped as in recovery), scaled so the brightest seed is 1.
SuperCamResult run_supercam_on_cube(const spad::PhotonCube& cube, std::uint64_t budget_bytes,
                                    std::uint64_t seed);

/// "SPS1" serialization: magic, P, width, height (u32 LE), then 10 bytes per
/// entry: x u16 | y u16 | R G B u8 | cell u16 (low 16 bits) | reserved u8.
std::vector<std::uint8_t> serialize_superpixel_set(const SuperpixelSet& set);
SuperpixelSet parse_superpixel_set(std::span<const std::uint8_t> bytes);
void save_superpixel_set(const SuperpixelSet& set, const std::filesystem::path& path);
SuperpixelSet load_superpixel_set(const std::filesystem::path& path);

/// 8-bit quantization used for files: round(clamp(v, 0, 1) * 255).
std::uint8_t quantize_unit(double value) noexcept;

}  // namespace supercam

#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "supercam/budget.hpp"
#include "supercam/image.hpp"
#include "supercam/supercam.hpp"

namespace supercam::snic {

/// Centroid state priced per SNIC superpixel: five running means (l, a, b, x, y)
/// at four bytes each.
inline constexpr std::uint64_t kDefaultBytesPerSuperpixel = 20;
inline constexpr double kDefaultRatio = 5.0;
inline constexpr int kDefaultBytesPerPixel = 3;
inline constexpr double kDefaultCompactness = 10.0;

struct BudgetOptions {
  double ratio = kDefaultRatio;  // image bytes : superpixel bytes
  std::uint64_t bytes_per_superpixel = kDefaultBytesPerSuperpixel;
  int bytes_per_pixel = kDefaultBytesPerPixel;
};

struct BudgetSplit {
  std::uint64_t total_bytes = 0;
  std::uint64_t image_bytes = 0;
  std::uint64_t superpixel_bytes = 0;
  double ratio = kDefaultRatio;
  int scaled_width = 0;
  int scaled_height = 0;
  std::int64_t superpixels = 0;  // K
};

/// superpixel_bytes = floor(total / (ratio + 1)), image_bytes =
/// floor(ratio * superpixel_bytes). The downsampled image keeps the source
/// aspect, is never larger than the source, and fits in image_bytes.
BudgetSplit allocate_budget(std::uint64_t total_bytes, int source_width, int source_height,
                            const BudgetOptions& options = {});

/// Area-average resampling (exact fractional pixel overlaps).
IntensityImage downsample(const IntensityImage& image, int target_width, int target_height);

/// sRGB (D65) to CIELAB for values in [0, 1]. Gray images use r = g = b.
std::array<double, 3> srgb_to_lab(double r, double g, double b);

struct Segmentation {
  LabelMap labels;
  /// Mean of member pixels per segment, in the input's channel space.
  std::vector<std::array<double, 3>> means;
  int channels = 1;
};

/// Simple Non-Iterative Clustering. Seeds sit at cell centres of the
/// `partition_grid` for K; the queue pops the candidate with the smallest
/// squared distance |dLab|^2 + (compactness / s)^2 |dxy|^2, s = sqrt(M / K),
/// ties going to the earlier push.
Segmentation snic_segment(const IntensityImage& image, std::int64_t superpixels,
                          double compactness = kDefaultCompactness);

/// Paints segment means and nearest-neighbour upsamples to the target size.
IntensityImage render_and_upsample(const Segmentation& segmentation, int target_width,
                                   int target_height);

/// Nearest-neighbour upsampling of labels, same index mapping as the render.
LabelMap upsample_labels(const LabelMap& labels, int target_width, int target_height);

struct RestrictedResult {
  IntensityImage rendered;
  LabelMap labels;  // at source resolution
  BudgetReport report;
  BudgetSplit split;
};

/// Memory-restricted SNIC: split, downsample, segment, render, upsample and,
/// when `with_blur`, apply the blur kernel SuperCam would use at this budget.
RestrictedResult run_snic_restricted(const IntensityImage& image, std::uint64_t budget_bytes,
                                     bool with_blur, double compactness = kDefaultCompactness,
                                     const BudgetOptions& options = {});

}  // namespace supercam::snic

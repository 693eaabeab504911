#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "supercam/image.hpp"

namespace supercam::metrics {

/// Binary image, one byte per pixel (0 or 1), row-major.
struct BoundaryMap {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> bits;

  std::uint8_t at(int x, int y) const noexcept {
    return bits[static_cast<std::size_t>(y) * static_cast<std::size_t>(width) +
                static_cast<std::size_t>(x)];
  }
  std::uint64_t count() const noexcept;
};

/// Single-channel depth map with an optional validity mask (nonzero = valid).
struct DepthMap {
  int width = 0;
  int height = 0;
  std::vector<double> depth;
  std::vector<std::uint8_t> mask;  // empty means all valid
};

/// Ground truth: a partition (void pixels allowed) and optionally depth.
struct GroundTruth {
  LabelMap labels;
  std::optional<DepthMap> depth;
};

struct BoundaryScore {
  double precision = 1.0;
  double recall = 1.0;
  std::uint64_t true_positives = 0;
  std::uint64_t false_positives = 0;
  std::uint64_t false_negatives = 0;
};

struct DepthScore {
  double abs_rel = 0.0;
  double delta1 = 0.0;
};

struct MetricReport {
  double ue = 0.0;
  BoundaryScore boundary;
  double miou_error = 0.0;
  std::optional<DepthScore> depth;
};

/// UE = (1/N) sum over G_i, over S_j meeting G_i, of min(|S_j & G_i|, |S_j - G_i|).
/// Void ground-truth pixels are excluded from N and from every count.
double under_segmentation_error(const LabelMap& segments, const LabelMap& ground_truth);

/// A pixel is on the boundary when its label differs from its right or bottom
/// neighbour.
BoundaryMap boundary_map(const LabelMap& labels);

/// Tolerance half-width r = ceil(0.0025 * diagonal); the window is (2r+1)^2.
int tolerance_radius(int width, int height);

/// TP counts predicted boundary pixels with a ground-truth boundary pixel
/// within Chebyshev distance `radius`; FP the rest; FN = max(0, |G| - TP).
/// Precision (recall) is 1 when there are no predicted (ground-truth) pixels.
BoundaryScore boundary_precision_recall(const BoundaryMap& predicted,
                                        const BoundaryMap& ground_truth, int radius);

/// Same, with the radius derived from the image diagonal.
BoundaryScore boundary_precision_recall(const BoundaryMap& predicted,
                                        const BoundaryMap& ground_truth);

/// Mean over predicted segments of 1 - IoU with the ground-truth segment of
/// maximum overlap (ties: lowest ground-truth id). Segments that lie entirely
/// in void are skipped. Throws DegenerateInputError if nothing remains.
double miou_error(const LabelMap& segments, const LabelMap& ground_truth);

/// AbsRel and delta_1 over valid pixels of one image.
DepthScore depth_metrics(const DepthMap& predicted, const DepthMap& ground_truth);

/// Dataset level: mean of per-image scores.
DepthScore mean_depth_metrics(std::span<const DepthScore> per_image);

/// UE, boundary P/R and mIOU error (plus depth when both depths are given).
MetricReport evaluate(const LabelMap& segments, const GroundTruth& ground_truth,
                      const DepthMap* predicted_depth = nullptr);

}  // namespace supercam::metrics

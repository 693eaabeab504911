#include "supercam/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <unordered_map>

namespace supercam::metrics {
namespace {

void require_same_size(const LabelMap& a, const LabelMap& b) {
  if (a.width() != b.width() || a.height() != b.height()) {
    throw ConfigError("label maps differ in size: " + std::to_string(a.width()) + "x" +
                      std::to_string(a.height()) + " vs " + std::to_string(b.width()) + "x" +
                      std::to_string(b.height()));
  }
}

// Sparse contingency table between predicted segments and non-void GT
// segments, plus the non-void size of every predicted and GT segment.
struct Overlaps {
  std::vector<std::unordered_map<std::int32_t, std::int64_t>> by_segment;
  std::vector<std::int64_t> segment_size;
  std::vector<std::int64_t> truth_size;
  std::int64_t total = 0;
};

Overlaps count_overlaps(const LabelMap& segments, const LabelMap& truth) {
  require_same_size(segments, truth);
  Overlaps o;
  o.by_segment.resize(static_cast<std::size_t>(std::max(segments.segment_count(), 0)));
  o.segment_size.assign(o.by_segment.size(), 0);
  o.truth_size.assign(static_cast<std::size_t>(std::max(truth.segment_count(), 0)), 0);
  const auto s = segments.ids();
  const auto g = truth.ids();
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (g[i] == LabelMap::kVoidLabel) continue;
    if (s[i] < 0) throw ConfigError("predicted labels must be nonnegative");
    ++o.by_segment[static_cast<std::size_t>(s[i])][g[i]];
    ++o.segment_size[static_cast<std::size_t>(s[i])];
    ++o.truth_size[static_cast<std::size_t>(g[i])];
    ++o.total;
  }
  return o;
}

bool valid_at(const DepthMap& d, std::size_t i) { return d.mask.empty() || d.mask[i] != 0; }

}  // namespace

std::uint64_t BoundaryMap::count() const noexcept {
  return static_cast<std::uint64_t>(std::count(bits.begin(), bits.end(), std::uint8_t{1}));
}

double under_segmentation_error(const LabelMap& segments, const LabelMap& ground_truth) {
  const Overlaps o = count_overlaps(segments, ground_truth);
  if (o.total == 0) throw DegenerateInputError("ground truth has no labeled pixels");
  std::int64_t leak = 0;
  for (std::size_t j = 0; j < o.by_segment.size(); ++j) {
    for (const auto& [gid, inter] : o.by_segment[j]) {
      leak += std::min(inter, o.segment_size[j] - inter);
    }
  }
  return static_cast<double>(leak) / static_cast<double>(o.total);
}

BoundaryMap boundary_map(const LabelMap& labels) {
  BoundaryMap b{labels.width(), labels.height(), std::vector<std::uint8_t>(labels.pixel_count(), 0)};
  for (int y = 0; y < labels.height(); ++y) {
    for (int x = 0; x < labels.width(); ++x) {
      const auto id = labels.at(x, y);
      const bool right = x + 1 < labels.width() && labels.at(x + 1, y) != id;
      const bool below = y + 1 < labels.height() && labels.at(x, y + 1) != id;
      b.bits[static_cast<std::size_t>(y) * labels.width() + x] = (right || below) ? 1 : 0;
    }
  }
  return b;
}

int tolerance_radius(int width, int height) {
  const double diagonal = std::hypot(static_cast<double>(width), static_cast<double>(height));
  return static_cast<int>(std::ceil(0.0025 * diagonal));
}

BoundaryScore boundary_precision_recall(const BoundaryMap& predicted,
                                        const BoundaryMap& ground_truth, int radius) {
  if (predicted.width != ground_truth.width || predicted.height != ground_truth.height) {
    throw ConfigError("boundary maps differ in size");
  }
  if (radius < 0) throw ConfigError("tolerance radius must be >= 0");
  const int w = predicted.width;
  const int h = predicted.height;

  // Dilate the ground truth by a (2r+1)^2 square: rows first, then columns.
  std::vector<std::uint8_t> horiz(ground_truth.bits.size(), 0);
  for (int y = 0; y < h; ++y) {
    int last = -1 - radius;  // most recent GT column at or before x + radius
    for (int x = 0; x < std::min(w, radius); ++x) {
      if (ground_truth.at(x, y)) last = x;
    }
    for (int x = 0; x < w; ++x) {
      const int ahead = x + radius;
      if (ahead < w && ground_truth.at(ahead, y)) last = ahead;
      horiz[static_cast<std::size_t>(y) * w + x] = (last >= x - radius) ? 1 : 0;
    }
  }
  std::vector<std::uint8_t> near(ground_truth.bits.size(), 0);
  for (int x = 0; x < w; ++x) {
    int last = -1 - radius;
    for (int y = 0; y < std::min(h, radius); ++y) {
      if (horiz[static_cast<std::size_t>(y) * w + x]) last = y;
    }
    for (int y = 0; y < h; ++y) {
      const int ahead = y + radius;
      if (ahead < h && horiz[static_cast<std::size_t>(ahead) * w + x]) last = ahead;
      near[static_cast<std::size_t>(y) * w + x] = (last >= y - radius) ? 1 : 0;
    }
  }

  BoundaryScore score;
  for (std::size_t i = 0; i < predicted.bits.size(); ++i) {
    if (!predicted.bits[i]) continue;
    if (near[i]) {
      ++score.true_positives;
    } else {
      ++score.false_positives;
    }
  }
  const std::uint64_t truth_count = ground_truth.count();
  score.false_negatives = truth_count > score.true_positives ? truth_count - score.true_positives : 0;
  const auto predicted_count = score.true_positives + score.false_positives;
  score.precision = predicted_count > 0
                        ? static_cast<double>(score.true_positives) / static_cast<double>(predicted_count)
                        : 1.0;
  const auto recall_den = score.true_positives + score.false_negatives;
  score.recall = recall_den > 0
                     ? static_cast<double>(score.true_positives) / static_cast<double>(recall_den)
                     : 1.0;
  return score;
}

BoundaryScore boundary_precision_recall(const BoundaryMap& predicted,
                                        const BoundaryMap& ground_truth) {
  return boundary_precision_recall(predicted, ground_truth,
                                   tolerance_radius(predicted.width, predicted.height));
}

double miou_error(const LabelMap& segments, const LabelMap& ground_truth) {
  const Overlaps o = count_overlaps(segments, ground_truth);
  double total = 0.0;
  std::int64_t counted = 0;
  for (std::size_t j = 0; j < o.by_segment.size(); ++j) {
    if (o.by_segment[j].empty()) continue;
    std::int32_t best_id = -1;
    std::int64_t best = -1;
    for (const auto& [gid, inter] : o.by_segment[j]) {
      if (inter > best || (inter == best && gid < best_id)) {
        best = inter;
        best_id = gid;
      }
    }
    const auto uni = o.segment_size[j] + o.truth_size[static_cast<std::size_t>(best_id)] - best;
    total += 1.0 - static_cast<double>(best) / static_cast<double>(uni);
    ++counted;
  }
  if (counted == 0) throw DegenerateInputError("no predicted segment overlaps labeled ground truth");
  return total / static_cast<double>(counted);
}

DepthScore depth_metrics(const DepthMap& predicted, const DepthMap& ground_truth) {
  if (predicted.width != ground_truth.width || predicted.height != ground_truth.height ||
      predicted.depth.size() != ground_truth.depth.size()) {
    throw ConfigError("depth maps differ in size");
  }
  double abs_rel = 0.0;
  std::int64_t within = 0;
  std::int64_t n = 0;
  for (std::size_t i = 0; i < ground_truth.depth.size(); ++i) {
    if (!valid_at(ground_truth, i)) continue;
    const double d = ground_truth.depth[i];
    const double p = predicted.depth[i];
    if (!(d > 0.0) || !(p > 0.0)) {
      throw ConfigError("depths must be positive on valid pixels");
    }
    abs_rel += std::abs(d - p) / d;
    if (std::max(d / p, p / d) < 1.25) ++within;
    ++n;
  }
  if (n == 0) throw DegenerateInputError("depth mask selects no pixels");
  return {abs_rel / static_cast<double>(n), static_cast<double>(within) / static_cast<double>(n)};
}

DepthScore mean_depth_metrics(std::span<const DepthScore> per_image) {
  if (per_image.empty()) throw DegenerateInputError("no depth scores to average");
  DepthScore mean;
  for (const auto& s : per_image) {
    mean.abs_rel += s.abs_rel;
    mean.delta1 += s.delta1;
  }
  mean.abs_rel /= static_cast<double>(per_image.size());
  mean.delta1 /= static_cast<double>(per_image.size());
  return mean;
}

MetricReport evaluate(const LabelMap& segments, const GroundTruth& ground_truth,
                      const DepthMap* predicted_depth) {
  MetricReport report;
  report.ue = under_segmentation_error(segments, ground_truth.labels);
  report.boundary =
      boundary_precision_recall(boundary_map(segments), boundary_map(ground_truth.labels));
  report.miou_error = miou_error(segments, ground_truth.labels);
  if (predicted_depth != nullptr && ground_truth.depth) {
    report.depth = depth_metrics(*predicted_depth, *ground_truth.depth);
  }
  return report;
}

}  // namespace supercam::metrics

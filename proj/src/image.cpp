#include "supercam/image.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace supercam {
namespace {

std::size_t pixel_count_for(int width, int height) {
  return static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
}

}  // namespace

IntensityImage::IntensityImage(int width, int height, int channels, double fill)
    : width_(width), height_(height), channels_(channels) {
  if (width < 1 || height < 1) {
    throw ConfigError("image dimensions must be >= 1");
  }
  if (channels != 1 && channels != 3) {
    throw ConfigError("image must have 1 or 3 channels, got " + std::to_string(channels));
  }
  values_.assign(pixel_count() * static_cast<std::size_t>(channels), fill);
}

double IntensityImage::mean() const {
  if (values_.empty()) return 0.0;
  return std::accumulate(values_.begin(), values_.end(), 0.0) /
         static_cast<double>(values_.size());
}

double IntensityImage::max() const {
  if (values_.empty()) return 0.0;
  return *std::max_element(values_.begin(), values_.end());
}

void IntensityImage::validate() const {
  if (width_ < 1 || height_ < 1) {
    throw ConfigError("image dimensions must be >= 1");
  }
  for (double v : values_) {
    if (!std::isfinite(v) || v < 0.0) {
      throw ConfigError("image values must be finite and nonnegative");
    }
  }
}

LabelMap::LabelMap(int width, int height, std::int32_t fill)
    : width_(width), height_(height) {
  if (width < 1 || height < 1) {
    throw ConfigError("label map dimensions must be >= 1");
  }
  ids_.assign(pixel_count_for(width, height), fill);
}

LabelMap::LabelMap(int width, int height, std::vector<std::int32_t> ids)
    : width_(width), height_(height), ids_(std::move(ids)) {
  if (width < 1 || height < 1) {
    throw ConfigError("label map dimensions must be >= 1");
  }
  if (ids_.size() != pixel_count_for(width, height)) {
    throw ConfigError("label map size does not match its dimensions");
  }
}

std::int32_t LabelMap::segment_count() const {
  std::int32_t hi = -1;
  for (auto id : ids_) hi = std::max(hi, id);
  return hi + 1;
}

void LabelMap::compact() {
  std::vector<std::int32_t> distinct;
  distinct.reserve(ids_.size());
  for (auto id : ids_) {
    if (id != kVoidLabel) distinct.push_back(id);
  }
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  for (auto& id : ids_) {
    if (id == kVoidLabel) continue;
    id = static_cast<std::int32_t>(
        std::lower_bound(distinct.begin(), distinct.end(), id) - distinct.begin());
  }
}

bool LabelMap::is_contiguous() const {
  const auto count = segment_count();
  std::vector<bool> seen(static_cast<std::size_t>(std::max(count, 0)), false);
  for (auto id : ids_) {
    if (id == kVoidLabel) continue;
    if (id < 0) return false;
    seen[static_cast<std::size_t>(id)] = true;
  }
  return std::all_of(seen.begin(), seen.end(), [](bool b) { return b; });
}

}  // namespace supercam

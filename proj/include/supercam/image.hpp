#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "supercam/errors.hpp"

namespace supercam {

/// Dense planar-interleaved image of linear intensity values.
///
/// Values are stored row-major with channels interleaved, i.e. the sample for
/// (x, y, c) lives at `(y * width + x) * channels + c`. One channel is a
/// grayscale image, three is RGB. Everything downstream treats values as
/// photon-flux proxies; nothing here applies a gamma curve.
class IntensityImage {
public:
  IntensityImage() = default;
  IntensityImage(int width, int height, int channels = 1, double fill = 0.0);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  int channels() const noexcept { return channels_; }
  std::size_t pixel_count() const noexcept {
    return static_cast<std::size_t>(width_) * static_cast<std::size_t>(height_);
  }
  bool empty() const noexcept { return values_.empty(); }

  double& at(int x, int y, int c = 0) noexcept { return values_[index(x, y, c)]; }
  double at(int x, int y, int c = 0) const noexcept { return values_[index(x, y, c)]; }

  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }

  bool contains(int x, int y) const noexcept {
    return x >= 0 && y >= 0 && x < width_ && y < height_;
  }

  double mean() const;
  double max() const;

  /// Checks dimensions >= 1 and that every value is finite and nonnegative.
  void validate() const;

  friend bool operator==(const IntensityImage&, const IntensityImage&) = default;

private:
  std::size_t index(int x, int y, int c) const noexcept {
    return (static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
            static_cast<std::size_t>(x)) *
               static_cast<std::size_t>(channels_) +
           static_cast<std::size_t>(c);
  }

  int width_ = 0;
  int height_ = 0;
  int channels_ = 1;
  std::vector<double> values_;
};

/// Dense map of segment ids. Ids are contiguous in [0, segment_count()).
/// Ground-truth maps may additionally carry `kVoidLabel` for unlabeled pixels.
class LabelMap {
public:
  static constexpr std::int32_t kVoidLabel = -1;

  LabelMap() = default;
  LabelMap(int width, int height, std::int32_t fill = 0);
  LabelMap(int width, int height, std::vector<std::int32_t> ids);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t pixel_count() const noexcept { return ids_.size(); }

  std::int32_t& at(int x, int y) noexcept { return ids_[index(x, y)]; }
  std::int32_t at(int x, int y) const noexcept { return ids_[index(x, y)]; }

  std::span<std::int32_t> ids() noexcept { return ids_; }
  std::span<const std::int32_t> ids() const noexcept { return ids_; }

  /// One past the largest non-void id.
  std::int32_t segment_count() const;

  /// Renumbers the distinct non-void ids, in ascending order, to 0..K-1.
  /// Geometry is preserved and void stays void.
  void compact();

  bool is_contiguous() const;

  friend bool operator==(const LabelMap&, const LabelMap&) = default;

private:
  std::size_t index(int x, int y) const noexcept {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(x);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<std::int32_t> ids_;
};

}  // namespace supercam

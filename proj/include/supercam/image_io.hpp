#pragma once

#include <filesystem>
#include <vector>

#include "supercam/image.hpp"

namespace supercam::io {

/// Loads PNG (8/16-bit gray or RGB, alpha dropped) or binary PGM/PPM (P5/P6)
/// and scales values to [0, 1] by the format maximum. No gamma transform.
/// Throws FormatError for corrupt or truncated files.
IntensityImage load_image(const std::filesystem::path& path);

/// PPM/PGM parser over an in-memory buffer.
IntensityImage parse_pnm(const std::vector<std::uint8_t>& bytes);

/// 8-bit writers; values are clamped to [0, 1] and rounded.
void save_png(const IntensityImage& image, const std::filesystem::path& path);
void save_pnm(const IntensityImage& image, const std::filesystem::path& path);

/// Writes PNG or PNM depending on the extension.
void save_image(const IntensityImage& image, const std::filesystem::path& path);

struct LabelLoadOptions {
  /// Treat raw id 0 as unlabeled (void).
  bool zero_is_void = false;
};

/// Loads a label map from a PGM (8- or 16-bit, value = id), a gray PNG, or a
/// CSV of ids (rows separated by newlines or ';'). Ids are compacted to a
/// contiguous range preserving their order.
LabelMap load_labels(const std::filesystem::path& path, const LabelLoadOptions& options = {});
LabelMap parse_label_csv(const std::string& text, const LabelLoadOptions& options = {});

/// 16-bit PGM with value = id (+1 when `void_as_zero`, so void maps to 0).
void save_labels_pgm(const LabelMap& labels, const std::filesystem::path& path,
                     bool void_as_zero = false);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);

}  // namespace supercam::io

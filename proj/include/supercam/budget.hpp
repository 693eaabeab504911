#pragma once

#include <cstdint>
#include <string>

namespace supercam {

/// Decimal kilobyte, the unit budgets are quoted in ("68 KB" = 68,000 bytes).
inline constexpr std::uint64_t kKilobyte = 1000;

/// Serialized size of one SuperCam superpixel entry.
inline constexpr std::uint64_t kBytesPerSuperpixel = 10;

/// Memory accounting for one pipeline run.
struct BudgetReport {
  std::string pipeline;
  std::uint64_t budget_bytes = 0;
  /// Superpixel count the budget allows before grid factorization.
  std::uint64_t requested_units = 0;
  /// Superpixel count actually produced (grid cells or SNIC seeds).
  std::uint64_t realized_units = 0;
  /// Bytes the run actually holds: the serialized superpixel set for SuperCam,
  /// downsampled image plus centroid state for SNIC.
  std::uint64_t footprint_bytes = 0;

  // SNIC budget split; zero for SuperCam.
  double ratio = 0.0;
  std::uint64_t image_bytes = 0;
  std::uint64_t superpixel_bytes = 0;
  int scaled_width = 0;
  int scaled_height = 0;

  // SuperCam sensor-side instrumentation.
  std::uint64_t ground_truth_reads = 0;
  std::uint64_t bernoulli_draws = 0;

  /// Transient work memory (SNIC's priority queue) is never charged.
  bool work_memory_charged = false;
};

}  // namespace supercam

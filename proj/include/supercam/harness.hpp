#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "supercam/image.hpp"
#include "supercam/metrics.hpp"
#include "supercam/snic.hpp"
#include "supercam/spad_sensor.hpp"
#include "supercam/supercam.hpp"

namespace supercam::harness {

enum class Pipeline { kSuperCam, kSnic, kSnicBlur };

std::string pipeline_name(Pipeline p);
Pipeline parse_pipeline(const std::string& name);

/// Parses byte counts such as "68000", "68k", "68KB", "0.5M" (decimal units).
std::uint64_t parse_budget(const std::string& text);

// ---------------------------------------------------------------------------
// Synthetic corpus

struct SynthOptions {
  int width = 321;
  int height = 481;
  int min_regions = 5;
  int max_regions = 30;
  /// Standard deviation of additive Gaussian texture noise (0 = flat regions).
  double texture_noise = 0.0;
};

struct SynthScene {
  IntensityImage image;
  LabelMap labels;
  int regions = 0;
};

/// Piecewise-constant RGB scene over a random Voronoi partition with distinct
/// region colors. Deterministic in (seed, index).
SynthScene synth_scene(const SynthOptions& options, std::uint64_t seed, int index);

/// Writes `scene_NNN.ppm` and `scene_NNN.gt.pgm` pairs; returns the ids.
std::vector<std::string> synth_corpus(int count, std::uint64_t seed,
                                      const std::filesystem::path& out_dir,
                                      const SynthOptions& options = {});

// ---------------------------------------------------------------------------
// Corpus and sweep

struct CorpusEntry {
  std::string id;
  std::filesystem::path image;
  std::optional<std::filesystem::path> ground_truth;
};

/// Images are *.png / *.ppm / *.pgm; the ground truth for `name.ext` is
/// `name.gt.{pgm,png,csv}`. Sorted by id.
std::vector<CorpusEntry> scan_corpus(const std::filesystem::path& dir);

struct SweepConfig {
  std::vector<std::uint64_t> budgets;
  std::vector<Pipeline> pipelines;
  std::filesystem::path corpus;
  std::vector<std::uint64_t> seeds = {0, 1, 2};
  /// SPAD capture for SuperCam; nullopt reads seeds directly.
  std::optional<spad::SensorConfig> sensor = spad::SensorConfig{};
  double compactness = snic::kDefaultCompactness;
  snic::BudgetOptions snic_budget;
  bool zero_is_void = false;
  int workers = 1;
  /// Fill the wall_ms column. Off by default so reruns are byte-identical.
  bool record_timing = false;
  std::filesystem::path out_dir;

  /// Throws ConfigError on an empty pipeline/seed/budget list, budgets that
  /// are not strictly increasing, or a missing corpus directory.
  void validate() const;
};

struct SweepRow {
  std::string image_id;
  Pipeline pipeline = Pipeline::kSuperCam;
  std::uint64_t budget_bytes = 0;
  std::uint64_t realized_units = 0;
  std::uint64_t seed = 0;
  std::optional<metrics::MetricReport> metrics;
  std::uint64_t footprint_bytes = 0;
  std::uint64_t ground_truth_reads = 0;
  std::optional<double> wall_ms;
  std::string status = "ok";
};

struct SweepResult {
  std::vector<SweepRow> rows;  // canonical order: image, pipeline, budget, seed
  std::size_t failed_rows = 0;
  std::filesystem::path csv_path;
  std::vector<std::filesystem::path> svg_paths;
  bool partial_failure() const noexcept { return failed_rows > 0; }
};

inline constexpr const char* kCsvHeader =
    "image,pipeline,budget_bytes,realized_units,seed,ue,precision,recall,miou_error,abs_rel,"
    "delta1,footprint_bytes,wall_ms,status";

std::string format_csv(const std::vector<SweepRow>& rows);

/// Runs every (image, pipeline, budget, seed) combination and writes
/// sweep.csv, summary.csv and one SVG chart per metric into `out_dir`.
SweepResult run_sweep(const SweepConfig& config);

/// Line chart of mean metric vs budget, one polyline per pipeline.
std::string render_svg_chart(const std::vector<SweepRow>& rows, const std::string& metric);

// ---------------------------------------------------------------------------
// Rendering

/// Marks boundary pixels (right/bottom label change): red on RGB, white on gray.
IntensityImage overlay_boundaries(const IntensityImage& image, const LabelMap& labels);

/// Writes <stem>_fill.png, <stem>_blur.png and <stem>_overlay.png.
std::vector<std::filesystem::path> render_outputs(const SuperCamResult& result,
                                                  const std::filesystem::path& out_dir,
                                                  const std::string& stem);

/// Writes <stem>_render.png and <stem>_overlay.png.
std::vector<std::filesystem::path> render_outputs(const snic::RestrictedResult& result,
                                                  const std::filesystem::path& out_dir,
                                                  const std::string& stem);

/// Depth map as CSV of floats, rows on lines; nonpositive entries are invalid.
metrics::DepthMap load_depth_csv(const std::filesystem::path& path);

}  // namespace supercam::harness

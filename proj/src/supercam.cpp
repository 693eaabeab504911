#include "supercam/supercam.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <limits>
#include <string>

#include "supercam/rng.hpp"

namespace supercam {
namespace {

constexpr std::uint8_t kSetMagic[4] = {'S', 'P', 'S', '1'};
constexpr std::size_t kSetHeaderBytes = 16;

std::vector<int> spread_edges(int extent, int count) {
  std::vector<int> edges(static_cast<std::size_t>(count) + 1);
  for (int k = 0; k <= count; ++k) {
    edges[static_cast<std::size_t>(k)] = static_cast<int>(
        static_cast<std::int64_t>(k) * extent / count);
  }
  return edges;
}

void put_u16(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_le(std::span<const std::uint8_t> bytes, std::size_t offset, int width) {
  std::uint32_t v = 0;
  for (int i = 0; i < width; ++i) v |= static_cast<std::uint32_t>(bytes[offset + i]) << (8 * i);
  return v;
}

int round_half_up(double v) { return static_cast<int>(std::floor(v + 0.5)); }

}  // namespace

GridSpec::GridSpec(int width, int height, int cols, int rows)
    : width_(width), height_(height), cols_(cols), rows_(rows) {
  if (width < 1 || height < 1) throw ConfigError("grid image dimensions must be >= 1");
  if (cols < 1 || rows < 1 || cols > width || rows > height) {
    throw ConfigError("grid of " + std::to_string(cols) + "x" + std::to_string(rows) +
                      " cells does not fit a " + std::to_string(width) + "x" +
                      std::to_string(height) + " image");
  }
  col_edges_ = spread_edges(width, cols);
  row_edges_ = spread_edges(height, rows);
}

Rect GridSpec::cell(int index) const noexcept {
  const int cx = index % cols_;
  const int cy = index / cols_;
  return Rect{col_edges_[static_cast<std::size_t>(cx)], row_edges_[static_cast<std::size_t>(cy)],
              col_edges_[static_cast<std::size_t>(cx) + 1],
              row_edges_[static_cast<std::size_t>(cy) + 1]};
}

int GridSpec::cell_of(int x, int y) const noexcept {
  const auto cx = std::upper_bound(col_edges_.begin(), col_edges_.end(), x) - col_edges_.begin() - 1;
  const auto cy = std::upper_bound(row_edges_.begin(), row_edges_.end(), y) - row_edges_.begin() - 1;
  return static_cast<int>(cy) * cols_ + static_cast<int>(cx);
}

GridSpec partition_grid(int width, int height, std::int64_t target_cells) {
  if (width < 1 || height < 1) throw ConfigError("image dimensions must be >= 1");
  const std::int64_t pixels = static_cast<std::int64_t>(width) * height;
  if (target_cells < 1 || target_cells > pixels) {
    throw ConfigError("superpixel count " + std::to_string(target_cells) +
                      " must lie in [1, " + std::to_string(pixels) + "]");
  }
  const std::int64_t max_cols = std::min<std::int64_t>(width, target_cells);
  const auto ideal = std::clamp<std::int64_t>(
      std::llround(std::sqrt(static_cast<double>(target_cells) * width / height)), 1, max_cols);

  // Search a +-10% window around the aspect-matched column count for the
  // largest realizable cols * rows <= target; ties go to the column count
  // nearest the ideal.
  const auto lo = std::max<std::int64_t>(1, static_cast<std::int64_t>(std::floor(ideal * 0.9)));
  const auto hi = std::min<std::int64_t>(max_cols, static_cast<std::int64_t>(std::ceil(ideal * 1.1)));
  std::int64_t best_cols = 0;
  std::int64_t best_rows = 0;
  for (std::int64_t cols = lo; cols <= hi; ++cols) {
    const std::int64_t rows = std::min<std::int64_t>(target_cells / cols, height);
    if (rows < 1) continue;
    const std::int64_t cells = cols * rows;
    const std::int64_t best_cells = best_cols * best_rows;
    if (cells > best_cells ||
        (cells == best_cells && std::llabs(cols - ideal) < std::llabs(best_cols - ideal))) {
      best_cols = cols;
      best_rows = rows;
    }
  }
  return GridSpec(width, height, static_cast<int>(best_cols), static_cast<int>(best_rows));
}

std::vector<SeedPoint> seed_cells(const GridSpec& grid, std::uint64_t seed) {
  const KeyedRng rng(seed, StreamPurpose::kSeedPlacement);
  std::vector<SeedPoint> seeds(static_cast<std::size_t>(grid.cell_count()));
  for (int k = 0; k < grid.cell_count(); ++k) {
    const Rect r = grid.cell(k);
    const auto area = static_cast<std::uint64_t>(r.width()) * static_cast<std::uint64_t>(r.height());
    const auto pick = rng.below(area, static_cast<std::uint32_t>(k), 0, 0);
    seeds[static_cast<std::size_t>(k)] =
        SeedPoint{r.x0 + static_cast<int>(pick % static_cast<std::uint64_t>(r.width())),
                  r.y0 + static_cast<int>(pick / static_cast<std::uint64_t>(r.width()))};
  }
  return seeds;
}

std::array<double, 3> SceneProbe::read(int x, int y) {
  if (!scene_->contains(x, y)) {
    throw ConfigError("scene read at (" + std::to_string(x) + ", " + std::to_string(y) +
                      ") lies outside the image");
  }
  ++reads_;
  std::array<double, 3> flux{};
  for (int c = 0; c < scene_->channels(); ++c) flux[static_cast<std::size_t>(c)] = scene_->at(x, y, c);
  return flux;
}

SuperpixelSet measure_seeds(SceneProbe& scene, std::span<const SeedPoint> seeds,
                            const GridSpec& grid, MeasureMode mode,
                            const std::optional<SensorSetup>& sensor) {
  if (seeds.size() != static_cast<std::size_t>(grid.cell_count())) {
    throw ConfigError("expected one seed per grid cell");
  }
  if (mode == MeasureMode::kSpad) {
    if (!sensor) throw ConfigError("spad measurement requires a sensor setup");
    sensor->config.validate();
    if (!(sensor->scale.c > 0.0)) throw ConfigError("exposure scale must be > 0");
  }

  SuperpixelSet set;
  set.width = scene.width();
  set.height = scene.height();
  set.channels = scene.channels();
  set.entries.reserve(seeds.size());
  const auto channels = static_cast<std::size_t>(scene.channels());
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    const SeedPoint s = seeds[i];
    if (!grid.cell(static_cast<int>(i)).contains(s.x, s.y)) {
      throw ConfigError("seed " + std::to_string(i) + " lies outside its grid cell");
    }
    const auto flux = scene.read(s.x, s.y);
    Superpixel entry{s.x, s.y, {}, static_cast<int>(i)};
    if (mode == MeasureMode::kDirect) {
      entry.intensity = flux;
    } else {
      const auto exposure = spad::expose_flux(std::span(flux.data(), channels), s.x, s.y,
                                              sensor->scale, sensor->config, sensor->seed);
      scene.record_draws(static_cast<std::uint64_t>(sensor->config.frames));
      std::copy(exposure.estimate.begin(), exposure.estimate.end(), entry.intensity.begin());
    }
    set.entries.push_back(entry);
  }
  return set;
}

LabelMap voronoi_labels(int width, int height, std::span<const SeedPoint> seeds) {
  if (seeds.empty()) throw ConfigError("nearest fill needs at least one seed");
  LabelMap labels(width, height);

  // Uniform bucket grid. A bucket at Chebyshev ring R+1 from the pixel's own
  // bucket is at least R*b+1 pixels away along one axis, which bounds the
  // search exactly.
  const double area = static_cast<double>(width) * height;
  const int b = std::max(1, static_cast<int>(std::lround(std::sqrt(area / seeds.size()))));
  const int nbx = (width + b - 1) / b;
  const int nby = (height + b - 1) / b;
  std::vector<std::vector<std::int32_t>> buckets(static_cast<std::size_t>(nbx) * nby);
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    const auto s = seeds[i];
    if (s.x < 0 || s.y < 0 || s.x >= width || s.y >= height) {
      throw ConfigError("seed lies outside the image");
    }
    buckets[static_cast<std::size_t>(s.y / b) * nbx + static_cast<std::size_t>(s.x / b)]
        .push_back(static_cast<std::int32_t>(i));
  }
  const int max_ring = std::max(nbx, nby);

  for (int y = 0; y < height; ++y) {
    const int by = y / b;
    for (int x = 0; x < width; ++x) {
      const int bx = x / b;
      std::int64_t best_d2 = std::numeric_limits<std::int64_t>::max();
      std::int32_t best_id = -1;
      const auto visit = [&](int cx, int cy) {
        if (cx < 0 || cy < 0 || cx >= nbx || cy >= nby) return;
        for (auto id : buckets[static_cast<std::size_t>(cy) * nbx + static_cast<std::size_t>(cx)]) {
          const auto s = seeds[static_cast<std::size_t>(id)];
          const std::int64_t dx = s.x - x;
          const std::int64_t dy = s.y - y;
          const std::int64_t d2 = dx * dx + dy * dy;
          if (d2 < best_d2 || (d2 == best_d2 && id < best_id)) {
            best_d2 = d2;
            best_id = id;
          }
        }
      };
      for (int ring = 0; ring <= max_ring; ++ring) {
        if (ring == 0) {
          visit(bx, by);
        } else {
          for (int cx = bx - ring; cx <= bx + ring; ++cx) {
            visit(cx, by - ring);
            visit(cx, by + ring);
          }
          for (int cy = by - ring + 1; cy <= by + ring - 1; ++cy) {
            visit(bx - ring, cy);
            visit(bx + ring, cy);
          }
        }
        const std::int64_t bound = static_cast<std::int64_t>(ring) * b + 1;
        if (best_id >= 0 && best_d2 < bound * bound) break;
      }
      labels.at(x, y) = best_id;
    }
  }
  return labels;
}

FillResult nearest_fill(const SuperpixelSet& set) {
  std::vector<SeedPoint> seeds;
  seeds.reserve(set.entries.size());
  for (const auto& e : set.entries) seeds.push_back({e.x, e.y});
  FillResult result{voronoi_labels(set.width, set.height, seeds),
                    IntensityImage(set.width, set.height, set.channels)};
  for (int y = 0; y < set.height; ++y) {
    for (int x = 0; x < set.width; ++x) {
      const auto& e = set.entries[static_cast<std::size_t>(result.labels.at(x, y))];
      for (int c = 0; c < set.channels; ++c) {
        result.image.at(x, y, c) = e.intensity[static_cast<std::size_t>(c)];
      }
    }
  }
  return result;
}

double sigma_for_radius(int radius) {
  if (radius < 0) throw ConfigError("blur radius must be >= 0");
  return (radius + 1.0) / std::sqrt(2.0 * std::log(255.0));
}

std::vector<double> gaussian_taps(int radius, double sigma) {
  if (radius < 0) throw ConfigError("blur radius must be >= 0");
  if (!(sigma > 0.0)) throw ConfigError("blur sigma must be > 0");
  const int reach = radius + 1;
  std::vector<double> taps(2 * static_cast<std::size_t>(reach) + 1);
  double total = 0.0;
  for (int k = -reach; k <= reach; ++k) {
    const double w = std::exp(-static_cast<double>(k) * k / (2.0 * sigma * sigma));
    taps[static_cast<std::size_t>(k + reach)] = w;
    total += w;
  }
  for (auto& w : taps) w /= total;
  return taps;
}

BlurKernel make_blur_kernel(int radius_x, int radius_y) {
  BlurKernel k;
  k.radius_x = radius_x;
  k.radius_y = radius_y;
  k.sigma_x = sigma_for_radius(radius_x);
  k.sigma_y = sigma_for_radius(radius_y);
  k.taps_x = gaussian_taps(radius_x, k.sigma_x);
  k.taps_y = gaussian_taps(radius_y, k.sigma_y);
  return k;
}

BlurKernel derive_blur_kernel(const GridSpec& grid) {
  return make_blur_kernel(round_half_up(grid.cell_width() / 2.0),
                          round_half_up(grid.cell_height() / 2.0));
}

IntensityImage gaussian_blur(const IntensityImage& image, const BlurKernel& kernel) {
  if (kernel.taps_x.size() % 2 == 0 || kernel.taps_y.size() % 2 == 0) {
    throw ConfigError("blur kernel taps must have odd length");
  }
  const int w = image.width();
  const int h = image.height();
  const int ch = image.channels();
  const int rx = static_cast<int>(kernel.taps_x.size() / 2);
  const int ry = static_cast<int>(kernel.taps_y.size() / 2);

  IntensityImage tmp(w, h, ch);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < ch; ++c) {
        double acc = 0.0;
        for (int k = -rx; k <= rx; ++k) {
          acc += kernel.taps_x[static_cast<std::size_t>(k + rx)] *
                 image.at(std::clamp(x + k, 0, w - 1), y, c);
        }
        tmp.at(x, y, c) = acc;
      }
    }
  }
  IntensityImage out(w, h, ch);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < ch; ++c) {
        double acc = 0.0;
        for (int k = -ry; k <= ry; ++k) {
          acc += kernel.taps_y[static_cast<std::size_t>(k + ry)] *
                 tmp.at(x, std::clamp(y + k, 0, h - 1), c);
        }
        out.at(x, y, c) = acc;
      }
    }
  }
  return out;
}

SuperCamResult run_supercam(const IntensityImage& image, std::uint64_t budget_bytes,
                            const std::optional<spad::SensorConfig>& sensor,
                            std::uint64_t seed) {
  image.validate();
  if (budget_bytes < kBytesPerSuperpixel) {
    throw BudgetError("budget of " + std::to_string(budget_bytes) +
                      " bytes cannot hold a single superpixel");
  }
  const std::uint64_t requested = budget_bytes / kBytesPerSuperpixel;
  const auto cells = static_cast<std::int64_t>(std::min<std::uint64_t>(requested, image.pixel_count()));
  GridSpec grid = partition_grid(image.width(), image.height(), cells);
  const auto seeds = seed_cells(grid, seed);

  std::optional<SensorSetup> setup;
  if (sensor) {
    setup = SensorSetup{*sensor, spad::compute_exposure_scale(image, *sensor), seed};
  }
  SceneProbe probe(image);
  SuperpixelSet set = measure_seeds(probe, seeds, grid,
                                    setup ? MeasureMode::kSpad : MeasureMode::kDirect, setup);
  FillResult fill = nearest_fill(set);
  BlurKernel kernel = derive_blur_kernel(grid);
  IntensityImage rendered = gaussian_blur(fill.image, kernel);

  BudgetReport report;
  report.pipeline = "supercam";
  report.budget_bytes = budget_bytes;
  report.requested_units = requested;
  report.realized_units = set.entries.size();
  report.footprint_bytes = set.footprint_bytes();
  report.ground_truth_reads = probe.reads();
  report.bernoulli_draws = probe.draws();

  return SuperCamResult{std::move(fill.image), std::move(rendered), std::move(fill.labels),
                        std::move(set),        std::move(grid),     std::move(kernel),
                        std::move(report)};
}

SuperCamResult run_supercam_on_cube(const spad::PhotonCube& cube, std::uint64_t budget_bytes,
                                    std::uint64_t seed) {
  if (budget_bytes < kBytesPerSuperpixel) {
    throw BudgetError("budget of " + std::to_string(budget_bytes) +
                      " bytes cannot hold a single superpixel");
  }
  const std::uint64_t requested = budget_bytes / kBytesPerSuperpixel;
  const auto pixels = static_cast<std::uint64_t>(cube.width()) * static_cast<std::uint64_t>(cube.height());
  GridSpec grid = partition_grid(cube.width(), cube.height(),
                                 static_cast<std::int64_t>(std::min(requested, pixels)));
  const auto seeds = seed_cells(grid, seed);

  spad::SensorConfig unit;
  unit.frames = cube.frame_count();
  SuperpixelSet set;
  set.width = cube.width();
  set.height = cube.height();
  set.channels = 1;
  double brightest = 0.0;
  for (int i = 0; i < grid.cell_count(); ++i) {
    const SeedPoint s = seeds[static_cast<std::size_t>(i)];
    Superpixel e{s.x, s.y, {}, i};
    e.intensity[0] = spad::estimate_intensity(cube.sum(s.x, s.y), spad::ExposureScale{1.0}, unit);
    brightest = std::max(brightest, e.intensity[0]);
    set.entries.push_back(e);
  }
  if (brightest > 0.0) {
    for (auto& e : set.entries) e.intensity[0] /= brightest;
  }

  FillResult fill = nearest_fill(set);
  BlurKernel kernel = derive_blur_kernel(grid);
  IntensityImage rendered = gaussian_blur(fill.image, kernel);
  BudgetReport report;
  report.pipeline = "supercam";
  report.budget_bytes = budget_bytes;
  report.requested_units = requested;
  report.realized_units = set.entries.size();
  report.footprint_bytes = set.footprint_bytes();
  report.ground_truth_reads = set.entries.size();
  return SuperCamResult{std::move(fill.image), std::move(rendered), std::move(fill.labels),
                        std::move(set),        std::move(grid),     std::move(kernel),
                        std::move(report)};
}

std::uint8_t quantize_unit(double value) noexcept {
  if (!(value > 0.0)) return 0;
  if (value >= 1.0) return 255;
  return static_cast<std::uint8_t>(std::lround(value * 255.0));
}

std::vector<std::uint8_t> serialize_superpixel_set(const SuperpixelSet& set) {
  if (set.width < 1 || set.height < 1 || set.width > 65536 || set.height > 65536) {
    throw ConfigError("superpixel set dimensions must lie in [1, 65536]");
  }
  std::vector<std::uint8_t> out;
  out.reserve(kSetHeaderBytes + set.footprint_bytes());
  out.insert(out.end(), std::begin(kSetMagic), std::end(kSetMagic));
  put_u32(out, static_cast<std::uint32_t>(set.entries.size()));
  put_u32(out, static_cast<std::uint32_t>(set.width));
  put_u32(out, static_cast<std::uint32_t>(set.height));
  for (const auto& e : set.entries) {
    put_u16(out, static_cast<std::uint32_t>(e.x));
    put_u16(out, static_cast<std::uint32_t>(e.y));
    for (int c = 0; c < 3; ++c) {
      const int src = set.channels == 3 ? c : 0;
      out.push_back(quantize_unit(e.intensity[static_cast<std::size_t>(src)]));
    }
    // Only the low 16 bits of the cell index fit; entries are stored in cell
    // order so the full index is the entry position.
    put_u16(out, static_cast<std::uint32_t>(e.cell) & 0xFFFFu);
    out.push_back(0);  // reserved
  }
  return out;
}

SuperpixelSet parse_superpixel_set(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kSetHeaderBytes) throw FormatError("superpixel set header truncated", bytes.size());
  if (!std::equal(std::begin(kSetMagic), std::end(kSetMagic), bytes.begin())) {
    throw FormatError("bad superpixel set magic, expected \"SPS1\"", 0);
  }
  const auto count = get_le(bytes, 4, 4);
  SuperpixelSet set;
  set.width = static_cast<int>(get_le(bytes, 8, 4));
  set.height = static_cast<int>(get_le(bytes, 12, 4));
  if (set.width < 1 || set.height < 1) throw FormatError("superpixel set dimensions invalid", 8);
  const std::size_t need = kSetHeaderBytes + static_cast<std::size_t>(count) * kBytesPerSuperpixel;
  if (bytes.size() != need) {
    throw FormatError("superpixel set size mismatch: expected " + std::to_string(need) +
                          " bytes, have " + std::to_string(bytes.size()),
                      std::min(bytes.size(), need));
  }
  set.channels = 3;
  set.entries.reserve(count);
  bool gray = true;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::size_t at = kSetHeaderBytes + static_cast<std::size_t>(i) * kBytesPerSuperpixel;
    Superpixel e;
    e.x = static_cast<int>(get_le(bytes, at, 2));
    e.y = static_cast<int>(get_le(bytes, at + 2, 2));
    for (int c = 0; c < 3; ++c) e.intensity[static_cast<std::size_t>(c)] = bytes[at + 4 + c] / 255.0;
    if (get_le(bytes, at + 7, 2) != (i & 0xFFFFu)) {
      throw FormatError("superpixel entries out of cell order", at + 7);
    }
    e.cell = static_cast<int>(i);
    if (e.x >= set.width || e.y >= set.height) throw FormatError("seed outside image", at);
    gray = gray && bytes[at + 4] == bytes[at + 5] && bytes[at + 5] == bytes[at + 6];
    set.entries.push_back(e);
  }
  if (gray) set.channels = 1;
  return set;
}

void save_superpixel_set(const SuperpixelSet& set, const std::filesystem::path& path) {
  const auto bytes = serialize_superpixel_set(set);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

SuperpixelSet load_superpixel_set(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                        std::istreambuf_iterator<char>());
  return parse_superpixel_set(bytes);
}

}  // namespace supercam

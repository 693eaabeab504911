#include "supercam/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "supercam/image_io.hpp"
#include "supercam/rng.hpp"

namespace supercam::harness {
namespace {

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

std::string fmt_fixed(double v, int digits) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

bool is_image_extension(const std::string& ext) {
  return ext == ".png" || ext == ".ppm" || ext == ".pgm";
}

std::optional<double> metric_value(const SweepRow& row, const std::string& metric) {
  if (!row.metrics) return std::nullopt;
  const auto& m = *row.metrics;
  if (metric == "ue") return m.ue;
  if (metric == "precision") return m.boundary.precision;
  if (metric == "recall") return m.boundary.recall;
  if (metric == "miou_error") return m.miou_error;
  if (metric == "abs_rel" && m.depth) return m.depth->abs_rel;
  if (metric == "delta1" && m.depth) return m.depth->delta1;
  return std::nullopt;
}

struct LoadedEntry {
  std::string id;
  std::optional<IntensityImage> image;
  std::optional<metrics::GroundTruth> truth;
  std::string error;
};

LoadedEntry load_entry(const CorpusEntry& entry, bool zero_is_void) {
  LoadedEntry loaded{entry.id, std::nullopt, std::nullopt, {}};
  try {
    IntensityImage image = io::load_image(entry.image);
    if (!entry.ground_truth) throw std::runtime_error("no ground truth for " + entry.image.string());
    LabelMap labels = io::load_labels(*entry.ground_truth, {zero_is_void});
    if (labels.width() != image.width() || labels.height() != image.height()) {
      throw ConfigError("ground truth " + std::to_string(labels.width()) + "x" +
                        std::to_string(labels.height()) + " does not match image " +
                        std::to_string(image.width()) + "x" + std::to_string(image.height()));
    }
    loaded.image = std::move(image);
    loaded.truth = metrics::GroundTruth{std::move(labels), std::nullopt};
  } catch (const std::exception& e) {
    loaded.error = e.what();
  }
  return loaded;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

std::string sanitize_status(std::string s) {
  for (auto& c : s) {
    if (c == ',' || c == '\n' || c == '\r' || c == '"') c = ' ';
  }
  return s;
}

const std::vector<std::string> kChartMetrics = {"ue", "precision", "recall", "miou_error"};

}  // namespace

std::string pipeline_name(Pipeline p) {
  switch (p) {
    case Pipeline::kSuperCam: return "supercam";
    case Pipeline::kSnic: return "snic";
    case Pipeline::kSnicBlur: return "snic_blur";
  }
  return "unknown";
}

Pipeline parse_pipeline(const std::string& name) {
  const auto n = lower(name);
  if (n == "supercam") return Pipeline::kSuperCam;
  if (n == "snic") return Pipeline::kSnic;
  if (n == "snic_blur") return Pipeline::kSnicBlur;
  throw ConfigError("unknown pipeline '" + name + "' (expected supercam, snic or snic_blur)");
}

std::uint64_t parse_budget(const std::string& text) {
  std::string t = lower(text);
  t.erase(std::remove_if(t.begin(), t.end(), [](unsigned char c) { return std::isspace(c); }), t.end());
  double multiplier = 1.0;
  const auto strip = [&](const std::string& suffix, double mult) {
    if (t.size() > suffix.size() && t.ends_with(suffix)) {
      t.resize(t.size() - suffix.size());
      multiplier = mult;
      return true;
    }
    return false;
  };
  strip("kb", 1e3) || strip("k", 1e3) || strip("mb", 1e6) || strip("m", 1e6) || strip("b", 1.0);
  std::size_t used = 0;
  double value = 0.0;
  try {
    value = std::stod(t, &used);
  } catch (const std::exception&) {
    throw ConfigError("invalid budget '" + text + "'");
  }
  if (used != t.size() || !(value > 0.0) || !std::isfinite(value)) {
    throw ConfigError("invalid budget '" + text + "'");
  }
  return static_cast<std::uint64_t>(std::llround(value * multiplier));
}

SynthScene synth_scene(const SynthOptions& options, std::uint64_t seed, int index) {
  if (options.width < 1 || options.height < 1) throw ConfigError("synthetic size must be >= 1");
  if (options.min_regions < 1 || options.max_regions < options.min_regions) {
    throw ConfigError("synthetic region bounds must satisfy 1 <= min <= max");
  }
  const std::int64_t pixels = static_cast<std::int64_t>(options.width) * options.height;
  if (options.max_regions > pixels) throw ConfigError("more regions than pixels");
  if (options.texture_noise < 0.0) throw ConfigError("texture noise must be >= 0");

  const KeyedRng rng(seed, StreamPurpose::kSynthesis);
  const auto idx = static_cast<std::uint32_t>(index);
  std::uint32_t draw = 0;
  const auto span = static_cast<std::uint64_t>(options.max_regions - options.min_regions + 1);
  const int regions = options.min_regions + static_cast<int>(rng.below(span, idx, draw++, 0));

  // Distinct site pixels.
  std::vector<SeedPoint> sites;
  while (static_cast<int>(sites.size()) < regions) {
    const auto p = rng.below(static_cast<std::uint64_t>(pixels), idx, draw++, 1);
    const SeedPoint s{static_cast<int>(p % options.width), static_cast<int>(p / options.width)};
    if (std::find(sites.begin(), sites.end(), s) == sites.end()) sites.push_back(s);
  }

  // Colors at least 0.12 apart in some channel; relax if the draw keeps failing.
  std::vector<std::array<double, 3>> colors;
  double separation = 0.12;
  int attempts = 0;
  while (static_cast<int>(colors.size()) < regions) {
    const auto block = rng.block(idx, draw++, 2);
    const std::array<double, 3> c = {KeyedRng::to_unit(block[0], block[1]),
                                     KeyedRng::to_unit(block[2], block[3]),
                                     rng.uniform(idx, draw++, 3)};
    const bool distinct = std::all_of(colors.begin(), colors.end(), [&](const auto& o) {
      double d = 0.0;
      for (int k = 0; k < 3; ++k) d = std::max(d, std::abs(o[k] - c[k]));
      return d >= separation;
    });
    if (distinct) {
      colors.push_back(c);
    } else if (++attempts % 1000 == 0) {
      separation *= 0.5;
    }
  }

  SynthScene scene{IntensityImage(options.width, options.height, 3),
                   voronoi_labels(options.width, options.height, sites), regions};
  for (int y = 0; y < options.height; ++y) {
    for (int x = 0; x < options.width; ++x) {
      const auto& c = colors[static_cast<std::size_t>(scene.labels.at(x, y))];
      for (int k = 0; k < 3; ++k) {
        double v = c[static_cast<std::size_t>(k)];
        if (options.texture_noise > 0.0) {
          // Box-Muller on a per-pixel keyed draw.
          const auto b = rng.block(idx, static_cast<std::uint32_t>(y * options.width + x),
                                   static_cast<std::uint16_t>(16 + k));
          const double u1 = 1.0 - KeyedRng::to_unit(b[0], b[1]);
          const double u2 = KeyedRng::to_unit(b[2], b[3]);
          v += options.texture_noise * std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
        }
        scene.image.at(x, y, k) = std::clamp(v, 0.0, 1.0);
      }
    }
  }
  return scene;
}

std::vector<std::string> synth_corpus(int count, std::uint64_t seed,
                                      const std::filesystem::path& out_dir,
                                      const SynthOptions& options) {
  if (count < 1) throw ConfigError("synthetic corpus size must be >= 1");
  std::filesystem::create_directories(out_dir);
  std::vector<std::string> ids;
  for (int i = 0; i < count; ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "scene_%03d", i);
    const SynthScene scene = synth_scene(options, seed, i);
    io::save_pnm(scene.image, out_dir / (std::string(name) + ".ppm"));
    io::save_labels_pgm(scene.labels, out_dir / (std::string(name) + ".gt.pgm"));
    ids.emplace_back(name);
  }
  return ids;
}

std::vector<CorpusEntry> scan_corpus(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw ConfigError("corpus directory '" + dir.string() + "' does not exist");
  }
  std::vector<CorpusEntry> entries;
  for (const auto& item : std::filesystem::directory_iterator(dir)) {
    if (!item.is_regular_file()) continue;
    const auto path = item.path();
    const auto stem = path.stem().string();
    if (!is_image_extension(lower(path.extension().string()))) continue;
    if (lower(stem).ends_with(".gt")) continue;
    CorpusEntry entry{stem, path, std::nullopt};
    for (const char* ext : {".gt.pgm", ".gt.png", ".gt.csv"}) {
      const auto candidate = dir / (stem + ext);
      if (std::filesystem::exists(candidate)) {
        entry.ground_truth = candidate;
        break;
      }
    }
    entries.push_back(std::move(entry));
  }
  std::sort(entries.begin(), entries.end(),
            [](const CorpusEntry& a, const CorpusEntry& b) { return a.id < b.id; });
  return entries;
}

void SweepConfig::validate() const {
  if (pipelines.empty()) throw ConfigError("no pipelines selected");
  if (budgets.empty()) throw ConfigError("no budgets given");
  if (seeds.empty()) throw ConfigError("no seeds given");
  for (std::size_t i = 1; i < budgets.size(); ++i) {
    if (budgets[i] <= budgets[i - 1]) throw ConfigError("budgets must be strictly increasing");
  }
  if (workers < 1) throw ConfigError("worker count must be >= 1");
  if (sensor) sensor->validate();
  if (corpus.empty() || !std::filesystem::is_directory(corpus)) {
    throw ConfigError("corpus directory '" + corpus.string() + "' does not exist");
  }
  if (out_dir.empty()) throw ConfigError("no output directory given");
}

std::string format_csv(const std::vector<SweepRow>& rows) {
  std::ostringstream out;
  out << kCsvHeader << '\n';
  for (const auto& r : rows) {
    out << r.image_id << ',' << pipeline_name(r.pipeline) << ',' << r.budget_bytes << ','
        << r.realized_units << ',' << r.seed << ',';
    for (const char* metric : {"ue", "precision", "recall", "miou_error", "abs_rel", "delta1"}) {
      if (auto v = metric_value(r, metric)) out << fmt_double(*v);
      out << ',';
    }
    out << r.footprint_bytes << ',';
    if (r.wall_ms) out << fmt_fixed(*r.wall_ms, 3);
    out << ',' << sanitize_status(r.status) << '\n';
  }
  return out.str();
}

std::string render_svg_chart(const std::vector<SweepRow>& rows, const std::string& metric) {
  // Mean per (pipeline, budget) over images and seeds.
  std::map<std::string, std::map<std::uint64_t, std::pair<double, int>>> series;
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  std::uint64_t bmin = std::numeric_limits<std::uint64_t>::max();
  std::uint64_t bmax = 0;
  for (const auto& r : rows) {
    const auto v = metric_value(r, metric);
    if (!v) continue;
    auto& cell = series[pipeline_name(r.pipeline)][r.budget_bytes];
    cell.first += *v;
    cell.second += 1;
    bmin = std::min(bmin, r.budget_bytes);
    bmax = std::max(bmax, r.budget_bytes);
  }
  for (auto& [name, points] : series) {
    for (auto& [budget, acc] : points) {
      acc.first /= acc.second;
      lo = std::min(lo, acc.first);
      hi = std::max(hi, acc.first);
    }
  }
  if (series.empty()) {
    lo = 0.0;
    hi = 1.0;
    bmin = 0;
    bmax = 1;
  }
  if (hi - lo < 1e-12) {
    lo -= 0.5;
    hi += 0.5;
  }
  if (bmax == bmin) ++bmax;

  constexpr double kW = 640, kH = 400, kLeft = 70, kRight = 150, kTop = 40, kBottom = 50;
  const auto px = [&](std::uint64_t b) {
    return kLeft + (static_cast<double>(b - bmin) / static_cast<double>(bmax - bmin)) * (kW - kLeft - kRight);
  };
  const auto py = [&](double v) { return kH - kBottom - (v - lo) / (hi - lo) * (kH - kTop - kBottom); };
  const std::array<const char*, 6> palette = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

  std::ostringstream svg;
  svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH
      << "\" viewBox=\"0 0 " << kW << ' ' << kH << "\">\n"
      << "  <title>" << metric << " vs memory budget</title>\n"
      << "  <rect x=\"0\" y=\"0\" width=\"" << kW << "\" height=\"" << kH << "\" fill=\"white\"/>\n"
      << "  <line x1=\"" << kLeft << "\" y1=\"" << kH - kBottom << "\" x2=\"" << kW - kRight
      << "\" y2=\"" << kH - kBottom << "\" stroke=\"black\"/>\n"
      << "  <line x1=\"" << kLeft << "\" y1=\"" << kTop << "\" x2=\"" << kLeft << "\" y2=\""
      << kH - kBottom << "\" stroke=\"black\"/>\n"
      << "  <text x=\"" << (kW - kRight + kLeft) / 2 << "\" y=\"" << kH - 10
      << "\" text-anchor=\"middle\" font-size=\"13\">budget (KB)</text>\n"
      << "  <text x=\"15\" y=\"" << kTop - 15 << "\" font-size=\"13\">" << metric << "</text>\n"
      << "  <text x=\"" << kLeft - 5 << "\" y=\"" << fmt_fixed(py(lo), 2)
      << "\" text-anchor=\"end\" font-size=\"11\">" << fmt_fixed(lo, 4) << "</text>\n"
      << "  <text x=\"" << kLeft - 5 << "\" y=\"" << fmt_fixed(py(hi), 2)
      << "\" text-anchor=\"end\" font-size=\"11\">" << fmt_fixed(hi, 4) << "</text>\n";
  std::size_t color = 0;
  int legend_y = static_cast<int>(kTop);
  std::map<std::uint64_t, bool> ticks;
  for (const auto& [name, points] : series) {
    const char* stroke = palette[color++ % palette.size()];
    svg << "  <polyline class=\"series\" data-pipeline=\"" << name << "\" data-metric=\"" << metric
        << "\" fill=\"none\" stroke=\"" << stroke << "\" stroke-width=\"2\" points=\"";
    bool first = true;
    for (const auto& [budget, acc] : points) {
      svg << (first ? "" : " ") << fmt_fixed(px(budget), 2) << ',' << fmt_fixed(py(acc.first), 2);
      first = false;
      ticks[budget] = true;
    }
    svg << "\"/>\n";
    svg << "  <text x=\"" << kW - kRight + 10 << "\" y=\"" << legend_y << "\" fill=\"" << stroke
        << "\" font-size=\"12\">" << name << "</text>\n";
    legend_y += 18;
  }
  for (const auto& [budget, unused] : ticks) {
    svg << "  <text x=\"" << fmt_fixed(px(budget), 2) << "\" y=\"" << kH - kBottom + 16
        << "\" text-anchor=\"middle\" font-size=\"11\">"
        << fmt_double(static_cast<double>(budget) / static_cast<double>(kKilobyte)) << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

SweepResult run_sweep(const SweepConfig& config) {
  config.validate();
  const auto corpus = scan_corpus(config.corpus);
  if (corpus.empty()) throw ConfigError("corpus '" + config.corpus.string() + "' has no images");

  std::vector<LoadedEntry> loaded;
  loaded.reserve(corpus.size());
  for (const auto& entry : corpus) {
    loaded.push_back(load_entry(entry, config.zero_is_void));
    if (!loaded.back().error.empty()) {
      std::cerr << "warning: skipping " << entry.id << ": " << loaded.back().error << '\n';
    }
  }

  struct Task {
    std::size_t entry;
    Pipeline pipeline;
    std::uint64_t budget;
    std::uint64_t seed;
  };
  std::vector<Task> tasks;
  for (std::size_t e = 0; e < loaded.size(); ++e) {
    for (auto p : config.pipelines) {
      for (auto b : config.budgets) {
        for (auto s : config.seeds) tasks.push_back({e, p, b, s});
      }
    }
  }

  std::vector<SweepRow> rows(tasks.size());
  std::atomic<std::size_t> next{0};
  const auto work = [&]() {
    for (std::size_t i = next++; i < tasks.size(); i = next++) {
      const Task& t = tasks[i];
      const LoadedEntry& entry = loaded[t.entry];
      SweepRow row;
      row.image_id = entry.id;
      row.pipeline = t.pipeline;
      row.budget_bytes = t.budget;
      row.seed = t.seed;
      if (!entry.error.empty()) {
        row.status = "error: " + entry.error;
        rows[i] = std::move(row);
        continue;
      }
      try {
        const auto start = std::chrono::steady_clock::now();
        LabelMap labels;
        if (t.pipeline == Pipeline::kSuperCam) {
          auto result = run_supercam(*entry.image, t.budget, config.sensor, t.seed);
          row.realized_units = result.report.realized_units;
          row.footprint_bytes = result.report.footprint_bytes;
          row.ground_truth_reads = result.report.ground_truth_reads;
          labels = std::move(result.labels);
        } else {
          auto result = snic::run_snic_restricted(*entry.image, t.budget,
                                                  t.pipeline == Pipeline::kSnicBlur,
                                                  config.compactness, config.snic_budget);
          row.realized_units = result.report.realized_units;
          row.footprint_bytes = result.report.footprint_bytes;
          labels = std::move(result.labels);
        }
        const auto stop = std::chrono::steady_clock::now();
        row.metrics = metrics::evaluate(labels, *entry.truth);
        if (config.record_timing) {
          row.wall_ms = std::chrono::duration<double, std::milli>(stop - start).count();
        }
      } catch (const std::exception& e) {
        row.status = std::string("error: ") + e.what();
        row.metrics.reset();
      }
      rows[i] = std::move(row);
    }
  };
  if (config.workers == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (int w = 0; w < config.workers; ++w) pool.emplace_back(work);
  }

  std::stable_sort(rows.begin(), rows.end(), [](const SweepRow& a, const SweepRow& b) {
    return std::tie(a.image_id, a.pipeline, a.budget_bytes, a.seed) <
           std::tie(b.image_id, b.pipeline, b.budget_bytes, b.seed);
  });

  SweepResult result;
  result.failed_rows = static_cast<std::size_t>(
      std::count_if(rows.begin(), rows.end(), [](const SweepRow& r) { return r.status != "ok"; }));

  std::filesystem::create_directories(config.out_dir);
  result.csv_path = config.out_dir / "sweep.csv";
  write_text(result.csv_path, format_csv(rows));

  // Mean and range per (pipeline, budget) across images and seeds.
  std::ostringstream summary;
  summary << "pipeline,budget_bytes,metric,mean,min,max,count\n";
  for (auto p : config.pipelines) {
    for (auto b : config.budgets) {
      for (const auto& metric : kChartMetrics) {
        double sum = 0.0, mn = std::numeric_limits<double>::infinity(), mx = -mn;
        int n = 0;
        for (const auto& r : rows) {
          if (r.pipeline != p || r.budget_bytes != b) continue;
          if (auto v = metric_value(r, metric)) {
            sum += *v;
            mn = std::min(mn, *v);
            mx = std::max(mx, *v);
            ++n;
          }
        }
        if (n == 0) continue;
        summary << pipeline_name(p) << ',' << b << ',' << metric << ',' << fmt_double(sum / n) << ','
                << fmt_double(mn) << ',' << fmt_double(mx) << ',' << n << '\n';
      }
    }
  }
  write_text(config.out_dir / "summary.csv", summary.str());

  for (const auto& metric : kChartMetrics) {
    const auto path = config.out_dir / (metric + ".svg");
    write_text(path, render_svg_chart(rows, metric));
    result.svg_paths.push_back(path);
  }
  result.rows = std::move(rows);
  return result;
}

IntensityImage overlay_boundaries(const IntensityImage& image, const LabelMap& labels) {
  if (labels.width() != image.width() || labels.height() != image.height()) {
    throw ConfigError("overlay labels do not match image size");
  }
  const auto boundary = metrics::boundary_map(labels);
  IntensityImage out = image;
  for (int y = 0; y < image.height(); ++y) {
    for (int x = 0; x < image.width(); ++x) {
      if (!boundary.at(x, y)) continue;
      if (image.channels() == 3) {
        out.at(x, y, 0) = 1.0;
        out.at(x, y, 1) = 0.0;
        out.at(x, y, 2) = 0.0;
      } else {
        out.at(x, y) = 1.0;
      }
    }
  }
  return out;
}

std::vector<std::filesystem::path> render_outputs(const SuperCamResult& result,
                                                  const std::filesystem::path& out_dir,
                                                  const std::string& stem) {
  std::filesystem::create_directories(out_dir);
  std::vector<std::filesystem::path> written = {out_dir / (stem + "_fill.png"),
                                                out_dir / (stem + "_blur.png"),
                                                out_dir / (stem + "_overlay.png")};
  io::save_png(result.filled, written[0]);
  io::save_png(result.rendered, written[1]);
  io::save_png(overlay_boundaries(result.filled, result.labels), written[2]);
  return written;
}

std::vector<std::filesystem::path> render_outputs(const snic::RestrictedResult& result,
                                                  const std::filesystem::path& out_dir,
                                                  const std::string& stem) {
  std::filesystem::create_directories(out_dir);
  std::vector<std::filesystem::path> written = {out_dir / (stem + "_render.png"),
                                                out_dir / (stem + "_overlay.png")};
  io::save_png(result.rendered, written[0]);
  io::save_png(overlay_boundaries(result.rendered, result.labels), written[1]);
  return written;
}

metrics::DepthMap load_depth_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  metrics::DepthMap map;
  std::string line;
  int row = 0;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::stringstream fields(line);
    std::string field;
    int cols = 0;
    while (std::getline(fields, field, ',')) {
      try {
        map.depth.push_back(std::stod(field));
      } catch (const std::exception&) {
        throw FormatError("invalid depth value '" + field + "' on row " + std::to_string(row), 0);
      }
      ++cols;
    }
    if (row == 0) {
      map.width = cols;
    } else if (cols != map.width) {
      throw FormatError("depth CSV row " + std::to_string(row) + " has " + std::to_string(cols) +
                            " values, expected " + std::to_string(map.width),
                        0);
    }
    ++row;
  }
  map.height = row;
  if (map.width < 1 || map.height < 1) throw FormatError("depth CSV is empty", 0);
  map.mask.resize(map.depth.size());
  for (std::size_t i = 0; i < map.depth.size(); ++i) map.mask[i] = map.depth[i] > 0.0 ? 1 : 0;
  return map;
}

}  // namespace supercam::harness

#include "supercam/snic.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <string>

namespace supercam::snic {
namespace {

double srgb_to_linear(double v) {
  v = std::clamp(v, 0.0, 1.0);
  return v <= 0.04045 ? v / 12.92 : std::pow((v + 0.055) / 1.055, 2.4);
}

double lab_f(double t) {
  constexpr double kDelta = 6.0 / 29.0;
  return t > kDelta * kDelta * kDelta ? std::cbrt(t) : t / (3.0 * kDelta * kDelta) + 4.0 / 29.0;
}

struct Candidate {
  double key;
  std::uint64_t order;
  std::int32_t pixel;
  std::int32_t label;
};

struct LaterFirst {
  bool operator()(const Candidate& a, const Candidate& b) const noexcept {
    if (a.key != b.key) return a.key > b.key;
    return a.order > b.order;
  }
};

struct Centroid {
  std::array<double, 3> lab{};
  double x = 0.0;
  double y = 0.0;
  std::array<double, 3> color{};
  std::int64_t count = 0;
};

}  // namespace

BudgetSplit allocate_budget(std::uint64_t total_bytes, int source_width, int source_height,
                            const BudgetOptions& options) {
  if (source_width < 1 || source_height < 1) throw ConfigError("source dimensions must be >= 1");
  if (!(options.ratio > 0.0) || options.bytes_per_superpixel == 0 || options.bytes_per_pixel < 1) {
    throw ConfigError("budget ratio and per-unit byte costs must be positive");
  }
  BudgetSplit split;
  split.total_bytes = total_bytes;
  split.ratio = options.ratio;
  split.superpixel_bytes =
      static_cast<std::uint64_t>(std::floor(static_cast<double>(total_bytes) / (options.ratio + 1.0)));
  split.image_bytes = static_cast<std::uint64_t>(
      std::floor(options.ratio * static_cast<double>(split.superpixel_bytes)));

  const auto max_pixels = split.image_bytes / static_cast<std::uint64_t>(options.bytes_per_pixel);
  const double source_pixels = static_cast<double>(source_width) * source_height;
  const double scale = std::min(1.0, std::sqrt(static_cast<double>(max_pixels) / source_pixels));
  split.scaled_width = std::max(1, static_cast<int>(std::floor(scale * source_width)));
  split.scaled_height = std::max(1, static_cast<int>(std::floor(scale * source_height)));
  const auto pixels = static_cast<std::uint64_t>(split.scaled_width) * split.scaled_height;
  split.superpixels = static_cast<std::int64_t>(std::min<std::uint64_t>(
      split.superpixel_bytes / options.bytes_per_superpixel, pixels));
  if (max_pixels < 1 || pixels > max_pixels || split.superpixels < 1) {
    throw BudgetError("budget of " + std::to_string(total_bytes) +
                      " bytes cannot hold one pixel and one superpixel");
  }
  return split;
}

IntensityImage downsample(const IntensityImage& image, int target_width, int target_height) {
  if (target_width < 1 || target_height < 1 || target_width > image.width() ||
      target_height > image.height()) {
    throw ConfigError("downsample targets must lie in [1, source size]");
  }
  if (target_width == image.width() && target_height == image.height()) return image;

  // Separable box filter: each target pixel integrates the source interval
  // [t * src / dst, (t + 1) * src / dst) with fractional end weights.
  const auto weights = [](int src, int dst) {
    std::vector<std::vector<std::pair<int, double>>> w(static_cast<std::size_t>(dst));
    const double step = static_cast<double>(src) / dst;
    for (int t = 0; t < dst; ++t) {
      const double a = t * step;
      const double b = (t + 1) * step;
      for (int s = static_cast<int>(std::floor(a)); s < src && s < b; ++s) {
        const double overlap = std::min(b, s + 1.0) - std::max(a, static_cast<double>(s));
        if (overlap > 0.0) w[static_cast<std::size_t>(t)].emplace_back(s, overlap / step);
      }
    }
    return w;
  };
  const auto wx = weights(image.width(), target_width);
  const auto wy = weights(image.height(), target_height);
  const int ch = image.channels();

  IntensityImage rows(target_width, image.height(), ch);
  for (int y = 0; y < image.height(); ++y) {
    for (int t = 0; t < target_width; ++t) {
      for (int c = 0; c < ch; ++c) {
        double acc = 0.0;
        for (auto [s, w] : wx[static_cast<std::size_t>(t)]) acc += w * image.at(s, y, c);
        rows.at(t, y, c) = acc;
      }
    }
  }
  IntensityImage out(target_width, target_height, ch);
  for (int t = 0; t < target_height; ++t) {
    for (int x = 0; x < target_width; ++x) {
      for (int c = 0; c < ch; ++c) {
        double acc = 0.0;
        for (auto [s, w] : wy[static_cast<std::size_t>(t)]) acc += w * rows.at(x, s, c);
        out.at(x, t, c) = acc;
      }
    }
  }
  return out;
}

std::array<double, 3> srgb_to_lab(double r, double g, double b) {
  const double lr = srgb_to_linear(r);
  const double lg = srgb_to_linear(g);
  const double lb = srgb_to_linear(b);
  // IEC 61966-2-1 sRGB -> XYZ, D65 white.
  const double X = 0.4124564 * lr + 0.3575761 * lg + 0.1804375 * lb;
  const double Y = 0.2126729 * lr + 0.7151522 * lg + 0.0721750 * lb;
  const double Z = 0.0193339 * lr + 0.1191920 * lg + 0.9503041 * lb;
  const double fx = lab_f(X / 0.95047);
  const double fy = lab_f(Y / 1.00000);
  const double fz = lab_f(Z / 1.08883);
  return {116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)};
}

Segmentation snic_segment(const IntensityImage& image, std::int64_t superpixels,
                          double compactness) {
  const int w = image.width();
  const int h = image.height();
  const auto m = static_cast<std::int64_t>(image.pixel_count());
  if (superpixels < 1 || superpixels > m) {
    throw ConfigError("SNIC superpixel count must lie in [1, pixel count]");
  }
  if (!(compactness > 0.0)) throw ConfigError("SNIC compactness must be > 0");
  const int ch = image.channels();

  std::vector<std::array<double, 3>> lab(static_cast<std::size_t>(m));
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double r = image.at(x, y, 0);
      const double g = ch == 3 ? image.at(x, y, 1) : r;
      const double b = ch == 3 ? image.at(x, y, 2) : r;
      lab[static_cast<std::size_t>(y) * w + x] = srgb_to_lab(r, g, b);
    }
  }

  const GridSpec grid = partition_grid(w, h, superpixels);
  const int k = grid.cell_count();
  const double spacing = std::sqrt(static_cast<double>(m) / k);
  const double position_weight = (compactness / spacing) * (compactness / spacing);

  std::vector<Centroid> centroids(static_cast<std::size_t>(k));
  std::vector<std::int32_t> labels(static_cast<std::size_t>(m), LabelMap::kVoidLabel);
  std::priority_queue<Candidate, std::vector<Candidate>, LaterFirst> queue;
  std::uint64_t order = 0;
  for (int i = 0; i < k; ++i) {
    const Rect r = grid.cell(i);
    const int sx = r.x0 + r.width() / 2;
    const int sy = r.y0 + r.height() / 2;
    queue.push({0.0, order++, static_cast<std::int32_t>(sy * w + sx), i});
  }

  while (!queue.empty()) {
    const Candidate top = queue.top();
    queue.pop();
    auto& slot = labels[static_cast<std::size_t>(top.pixel)];
    if (slot != LabelMap::kVoidLabel) continue;
    slot = top.label;

    const int px = top.pixel % w;
    const int py = top.pixel / w;
    auto& cen = centroids[static_cast<std::size_t>(top.label)];
    const auto& f = lab[static_cast<std::size_t>(top.pixel)];
    for (int c = 0; c < 3; ++c) cen.lab[static_cast<std::size_t>(c)] += f[static_cast<std::size_t>(c)];
    cen.x += px;
    cen.y += py;
    for (int c = 0; c < ch; ++c) cen.color[static_cast<std::size_t>(c)] += image.at(px, py, c);
    ++cen.count;

    const double inv = 1.0 / static_cast<double>(cen.count);
    const std::array<int, 4> dx = {-1, 1, 0, 0};
    const std::array<int, 4> dy = {0, 0, -1, 1};
    for (int n = 0; n < 4; ++n) {
      const int nx = px + dx[static_cast<std::size_t>(n)];
      const int ny = py + dy[static_cast<std::size_t>(n)];
      if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
      const auto idx = static_cast<std::size_t>(ny) * w + nx;
      if (labels[idx] != LabelMap::kVoidLabel) continue;
      double color_d2 = 0.0;
      for (int c = 0; c < 3; ++c) {
        const double d = lab[idx][static_cast<std::size_t>(c)] - cen.lab[static_cast<std::size_t>(c)] * inv;
        color_d2 += d * d;
      }
      const double ddx = nx - cen.x * inv;
      const double ddy = ny - cen.y * inv;
      queue.push({color_d2 + position_weight * (ddx * ddx + ddy * ddy), order++,
                  static_cast<std::int32_t>(idx), top.label});
    }
  }

  Segmentation seg{LabelMap(w, h, std::move(labels)), {}, ch};
  seg.means.resize(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) {
    const auto& cen = centroids[static_cast<std::size_t>(i)];
    for (int c = 0; c < ch; ++c) {
      seg.means[static_cast<std::size_t>(i)][static_cast<std::size_t>(c)] =
          cen.color[static_cast<std::size_t>(c)] / static_cast<double>(cen.count);
    }
  }
  return seg;
}

LabelMap upsample_labels(const LabelMap& labels, int target_width, int target_height) {
  if (target_width < labels.width() || target_height < labels.height()) {
    throw ConfigError("upsample target must not be smaller than the label map");
  }
  LabelMap out(target_width, target_height);
  for (int y = 0; y < target_height; ++y) {
    const int sy = static_cast<int>(static_cast<std::int64_t>(y) * labels.height() / target_height);
    for (int x = 0; x < target_width; ++x) {
      const int sx = static_cast<int>(static_cast<std::int64_t>(x) * labels.width() / target_width);
      out.at(x, y) = labels.at(sx, sy);
    }
  }
  return out;
}

IntensityImage render_and_upsample(const Segmentation& segmentation, int target_width,
                                   int target_height) {
  const LabelMap up = upsample_labels(segmentation.labels, target_width, target_height);
  IntensityImage out(target_width, target_height, segmentation.channels);
  for (int y = 0; y < target_height; ++y) {
    for (int x = 0; x < target_width; ++x) {
      const auto& mean = segmentation.means.at(static_cast<std::size_t>(up.at(x, y)));
      for (int c = 0; c < segmentation.channels; ++c) {
        out.at(x, y, c) = mean[static_cast<std::size_t>(c)];
      }
    }
  }
  return out;
}

RestrictedResult run_snic_restricted(const IntensityImage& image, std::uint64_t budget_bytes,
                                     bool with_blur, double compactness,
                                     const BudgetOptions& options) {
  image.validate();
  const BudgetSplit split = allocate_budget(budget_bytes, image.width(), image.height(), options);
  const IntensityImage small = downsample(image, split.scaled_width, split.scaled_height);
  const Segmentation seg = snic_segment(small, split.superpixels, compactness);

  RestrictedResult result;
  result.rendered = render_and_upsample(seg, image.width(), image.height());
  result.labels = upsample_labels(seg.labels, image.width(), image.height());
  if (with_blur) {
    const auto cells = static_cast<std::int64_t>(std::clamp<std::uint64_t>(
        budget_bytes / kBytesPerSuperpixel, 1, image.pixel_count()));
    const BlurKernel kernel = derive_blur_kernel(partition_grid(image.width(), image.height(), cells));
    result.rendered = gaussian_blur(result.rendered, kernel);
  }

  const auto realized = static_cast<std::uint64_t>(seg.means.size());
  BudgetReport& report = result.report;
  report.pipeline = with_blur ? "snic_blur" : "snic";
  report.budget_bytes = budget_bytes;
  report.requested_units = static_cast<std::uint64_t>(split.superpixels);
  report.realized_units = realized;
  report.ratio = split.ratio;
  report.image_bytes = split.image_bytes;
  report.superpixel_bytes = split.superpixel_bytes;
  report.scaled_width = split.scaled_width;
  report.scaled_height = split.scaled_height;
  report.footprint_bytes = static_cast<std::uint64_t>(options.bytes_per_pixel) *
                               static_cast<std::uint64_t>(split.scaled_width) *
                               static_cast<std::uint64_t>(split.scaled_height) +
                           options.bytes_per_superpixel * realized;
  report.work_memory_charged = false;
  result.split = split;
  return result;
}

}  // namespace supercam::snic

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <limits>
#include <set>

#include "supercam/errors.hpp"
#include "supercam/rng.hpp"
#include "supercam/supercam.hpp"

using namespace supercam;

namespace {

LabelMap brute_voronoi(int w, int h, const std::vector<SeedPoint>& seeds) {
  LabelMap out(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      long best = std::numeric_limits<long>::max();
      int id = -1;
      for (std::size_t i = 0; i < seeds.size(); ++i) {
        const long dx = seeds[i].x - x;
        const long dy = seeds[i].y - y;
        if (dx * dx + dy * dy < best) {
          best = dx * dx + dy * dy;
          id = static_cast<int>(i);
        }
      }
      out.at(x, y) = id;
    }
  return out;
}

IntensityImage blur_2d(const IntensityImage& img, const BlurKernel& k) {
  const int rx = static_cast<int>(k.taps_x.size() / 2);
  const int ry = static_cast<int>(k.taps_y.size() / 2);
  IntensityImage out(img.width(), img.height(), img.channels());
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x)
      for (int c = 0; c < img.channels(); ++c) {
        double acc = 0.0;
        for (int j = -ry; j <= ry; ++j)
          for (int i = -rx; i <= rx; ++i)
            acc += k.taps_x[i + rx] * k.taps_y[j + ry] *
                   img.at(std::clamp(x + i, 0, img.width() - 1), std::clamp(y + j, 0, img.height() - 1), c);
        out.at(x, y, c) = acc;
      }
  return out;
}

IntensityImage noise_image(int w, int h, int ch, std::uint64_t seed) {
  const KeyedRng rng(seed, StreamPurpose::kSynthesis);
  IntensityImage img(w, h, ch);
  auto v = img.values();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = rng.uniform(static_cast<std::uint32_t>(i), 9, 9);
  return img;
}

}  // namespace

TEST_CASE("grid factorization examples") {
  const auto g = partition_grid(321, 481, 6800);
  CHECK(g.cols() == 68);
  CHECK(g.rows() == 100);
  CHECK(g.cell_count() == 6800);
  const auto small = partition_grid(6, 4, 6);
  CHECK(small.cols() == 3);
  CHECK(small.rows() == 2);
  CHECK(small.cell(0).x1 == 2);
  CHECK(small.cell(5).x0 == 4);
  CHECK(small.cell(5).y0 == 2);
  CHECK(partition_grid(5, 5, 1).cell_count() == 1);
  CHECK(partition_grid(4, 3, 12).cell_count() == 12);
  CHECK_THROWS_AS(partition_grid(4, 3, 13), ConfigError);
  CHECK_THROWS_AS(partition_grid(4, 3, 0), ConfigError);
}

TEST_CASE("grid never exceeds the target and tiles the image") {
  for (int w : {1, 7, 33, 100, 321}) {
    for (int h : {1, 5, 48, 481}) {
      for (std::int64_t p : {1, 2, 3, 5, 17, 100, 999}) {
        if (p > std::int64_t(w) * h) continue;
        const auto g = partition_grid(w, h, p);
        CHECK(g.cell_count() <= p);
        CHECK(g.cell_count() >= 1);
        std::vector<int> hits(static_cast<std::size_t>(w) * h, 0);
        for (int k = 0; k < g.cell_count(); ++k) {
          const Rect r = g.cell(k);
          REQUIRE(r.width() >= 1);
          REQUIRE(r.height() >= 1);
          for (int y = r.y0; y < r.y1; ++y)
            for (int x = r.x0; x < r.x1; ++x) ++hits[static_cast<std::size_t>(y) * w + x];
        }
        for (int v : hits) REQUIRE(v == 1);
        CHECK(g.cell_of(w - 1, h - 1) == g.cell_count() - 1);
      }
    }
  }
}

TEST_CASE("seeds lie in their cells and are uniform within a cell") {
  const GridSpec g(40, 30, 4, 3);
  const auto seeds = seed_cells(g, 1);
  REQUIRE(seeds.size() == 12);
  for (int k = 0; k < 12; ++k) CHECK(g.cell(k).contains(seeds[k].x, seeds[k].y));
  CHECK(seeds == seed_cells(g, 1));
  CHECK_FALSE(seeds == seed_cells(g, 2));

  // 1x1 grid over a 4x4 image: 16 equally likely positions
  const GridSpec one(4, 4, 1, 1);
  std::vector<int> counts(16, 0);
  const int n = 8000;
  for (int s = 0; s < n; ++s) {
    const auto p = seed_cells(one, static_cast<std::uint64_t>(s))[0];
    ++counts[p.y * 4 + p.x];
  }
  double chi2 = 0.0;
  for (int c : counts) chi2 += (c - n / 16.0) * (c - n / 16.0) / (n / 16.0);
  CHECK(chi2 < 37.7);  // df = 15, p = 0.001
}

TEST_CASE("measure counts reads and draws") {
  const auto img = noise_image(20, 10, 3, 4);
  const auto g = partition_grid(20, 10, 8);
  const auto seeds = seed_cells(g, 0);
  SceneProbe probe(img);
  const auto direct = measure_seeds(probe, seeds, g, MeasureMode::kDirect);
  CHECK(probe.reads() == static_cast<std::uint64_t>(g.cell_count()));
  CHECK(probe.draws() == 0);
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    CHECK(direct.entries[i].intensity[1] == img.at(seeds[i].x, seeds[i].y, 1));
    CHECK(direct.entries[i].cell == static_cast<int>(i));
  }
  CHECK(direct.footprint_bytes() == 10u * g.cell_count());

  spad::SensorConfig cfg;
  cfg.frames = 64;
  const SensorSetup setup{cfg, spad::compute_exposure_scale(img, cfg), 5};
  SceneProbe probe2(img);
  const auto measured = measure_seeds(probe2, seeds, g, MeasureMode::kSpad, setup);
  CHECK(probe2.reads() == static_cast<std::uint64_t>(g.cell_count()));
  CHECK(probe2.draws() == 64u * g.cell_count());
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    const auto e = spad::expose_pixel(img, seeds[i].x, seeds[i].y, setup.scale, cfg, 5);
    CHECK(measured.entries[i].intensity[2] == e.estimate[2]);
  }
  SceneProbe probe3(img);
  CHECK_THROWS_AS(measure_seeds(probe3, seeds, g, MeasureMode::kSpad), ConfigError);
}

TEST_CASE("voronoi matches brute force and breaks ties low") {
  for (int t = 0; t < 60; ++t) {
    const KeyedRng rng(static_cast<std::uint64_t>(t), StreamPurpose::kSynthesis);
    const int w = 1 + static_cast<int>(rng.below(40, 0, 0, 0));
    const int h = 1 + static_cast<int>(rng.below(40, 1, 0, 0));
    const int n = 1 + static_cast<int>(rng.below(50, 2, 0, 0));
    std::vector<SeedPoint> seeds;
    for (int i = 0; i < n; ++i)
      seeds.push_back({static_cast<int>(rng.below(w, 3, i, 0)), static_cast<int>(rng.below(h, 4, i, 0))});
    CHECK(voronoi_labels(w, h, seeds) == brute_voronoi(w, h, seeds));
  }
  // equidistant pixel between two seeds goes to the lower id
  const std::vector<SeedPoint> pair = {{4, 0}, {0, 0}};
  CHECK(voronoi_labels(5, 1, pair).at(2, 0) == 0);
  const std::vector<SeedPoint> swapped = {{0, 0}, {4, 0}};
  CHECK(voronoi_labels(5, 1, swapped).at(2, 0) == 0);
}

TEST_CASE("nearest fill on a lattice reproduces cell rectangles") {
  // seeds at the centres of 3x3 blocks: each pixel's nearest seed is its block centre
  SuperpixelSet set;
  set.width = 9;
  set.height = 6;
  for (int by = 0; by < 2; ++by)
    for (int bx = 0; bx < 3; ++bx)
      set.entries.push_back({bx * 3 + 1, by * 3 + 1, {0.1 * (by * 3 + bx), 0, 0}, by * 3 + bx});
  const auto fill = nearest_fill(set);
  for (int y = 0; y < 6; ++y)
    for (int x = 0; x < 9; ++x) {
      CHECK(fill.labels.at(x, y) == (y / 3) * 3 + x / 3);
      CHECK(fill.image.at(x, y) == doctest::Approx(0.1 * fill.labels.at(x, y)));
    }
}

TEST_CASE("blur sigma identity") {
  CHECK(sigma_for_radius(4) == doctest::Approx(5.0 / std::sqrt(2.0 * std::log(255.0))));
  CHECK(sigma_for_radius(4) == doctest::Approx(1.50193).epsilon(1e-5));
  for (int r = 0; r <= 64; ++r) {
    const double s = sigma_for_radius(r);
    CHECK(std::abs(255.0 * std::exp(-(r + 1.0) * (r + 1.0) / (2 * s * s)) - 1.0) < 1e-10);
  }
  CHECK_THROWS_AS(sigma_for_radius(-1), ConfigError);
}

TEST_CASE("taps are normalized and symmetric") {
  const auto taps = gaussian_taps(3, sigma_for_radius(3));
  REQUIRE(taps.size() == 9);
  double sum = 0.0;
  for (double t : taps) sum += t;
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-15));
  for (int i = 0; i < 4; ++i) CHECK(taps[i] == taps[8 - i]);
  CHECK(taps[0] / taps[4] == doctest::Approx(1.0 / 255.0));
}

TEST_CASE("blur preserves constants and matches the 2-D convolution") {
  const auto k = make_blur_kernel(3, 2);
  const IntensityImage flat(17, 11, 3, 0.42);
  const auto out = gaussian_blur(flat, k);
  for (double v : out.values()) CHECK(std::abs(v - 0.42) < 1e-12);

  const auto img = noise_image(23, 19, 1, 8);
  const auto sep = gaussian_blur(img, k);
  const auto full = blur_2d(img, k);
  for (std::size_t i = 0; i < sep.values().size(); ++i)
    CHECK(std::abs(sep.values()[i] - full.values()[i]) <= 1e-9);
}

TEST_CASE("blur impulse response is the outer product of taps") {
  IntensityImage img(21, 21, 1, 0.0);
  img.at(10, 10) = 1.0;
  const auto k = make_blur_kernel(2, 4);
  const auto out = gaussian_blur(img, k);
  for (int dy = -5; dy <= 5; ++dy)
    for (int dx = -3; dx <= 3; ++dx)
      CHECK(out.at(10 + dx, 10 + dy) == doctest::Approx(k.taps_x[dx + 3] * k.taps_y[dy + 5]));
  CHECK(out.at(10 + 4, 10) == 0.0);
  CHECK(out.at(10, 10 + 6) == 0.0);
}

TEST_CASE("derived kernel follows the cell extent") {
  const GridSpec g(321, 481, 68, 100);
  const auto k = derive_blur_kernel(g);
  CHECK(k.radius_x == 2);  // 4.72 / 2 = 2.36
  CHECK(k.radius_y == 2);  // 4.81 / 2 = 2.405
  const GridSpec g2(100, 100, 10, 20);
  CHECK(derive_blur_kernel(g2).radius_x == 5);
  CHECK(derive_blur_kernel(g2).radius_y == 3);  // 2.5 rounds half up
}

TEST_CASE("supercam pipeline at the 68 KB setting") {
  const auto img = noise_image(321, 481, 3, 2);
  const auto res = run_supercam(img, 68 * kKilobyte, std::nullopt, 0);
  CHECK(res.set.entries.size() == 6800);
  CHECK(res.report.footprint_bytes == 68000);
  CHECK(res.report.ground_truth_reads == 6800);
  CHECK(res.report.realized_units == 6800);
  CHECK(serialize_superpixel_set(res.set).size() - 16 == 68000);
  CHECK(res.labels.segment_count() == 6800);
  CHECK(res.rendered.width() == 321);

  spad::SensorConfig cfg;
  cfg.frames = 32;
  const auto small = noise_image(30, 20, 1, 3);
  const auto spadres = run_supercam(small, 600, cfg, 4);
  CHECK(spadres.report.ground_truth_reads == 60);
  CHECK(spadres.report.bernoulli_draws == 60u * 32u);
  CHECK_THROWS_AS(run_supercam(small, 9, std::nullopt, 0), BudgetError);
  // budget beyond the pixel count saturates at one superpixel per pixel
  CHECK(run_supercam(small, 100000, std::nullopt, 0).report.realized_units == 600);
}

TEST_CASE("supercam on a photon cube") {
  IntensityImage img(16, 8, 1, 0.2);
  for (int y = 0; y < 8; ++y)
    for (int x = 8; x < 16; ++x) img.at(x, y) = 0.8;
  spad::SensorConfig cfg;
  cfg.frames = 512;
  cfg.mean_photons_per_pixel = 100;
  const auto cube = spad::sample_photon_cube(img, spad::compute_exposure_scale(img, cfg), cfg, 1);
  const auto res = run_supercam_on_cube(cube, 80, 0);
  REQUIRE(res.set.entries.size() == 8);
  double left = 0.0;
  double right = 0.0;
  for (const auto& e : res.set.entries) {
    if (e.x < 8) {
      left = std::max(left, e.intensity[0]);
    } else {
      right = std::max(right, e.intensity[0]);
    }
  }
  CHECK(right == doctest::Approx(1.0));
  CHECK(left < 0.5);
  CHECK(res.report.ground_truth_reads == 8);
}

TEST_CASE("superpixel set round trip and format errors") {
  const auto img = noise_image(50, 40, 3, 6);
  const auto res = run_supercam(img, 1000, std::nullopt, 3);
  const auto bytes = serialize_superpixel_set(res.set);
  CHECK(bytes.size() == 16 + 10 * res.set.entries.size());
  const auto back = parse_superpixel_set(bytes);
  REQUIRE(back.entries.size() == res.set.entries.size());
  CHECK(back.width == 50);
  CHECK(back.channels == 3);
  for (std::size_t i = 0; i < back.entries.size(); ++i) {
    CHECK(back.entries[i].x == res.set.entries[i].x);
    CHECK(back.entries[i].y == res.set.entries[i].y);
    CHECK(back.entries[i].cell == static_cast<int>(i));
    for (int c = 0; c < 3; ++c)
      CHECK(std::abs(back.entries[i].intensity[c] - res.set.entries[i].intensity[c]) <= 0.5 / 255.0 + 1e-12);
  }
  const auto path = std::filesystem::temp_directory_path() / "supercam_test_set.sps";
  save_superpixel_set(res.set, path);
  CHECK(load_superpixel_set(path).entries.size() == res.set.entries.size());
  std::filesystem::remove(path);

  auto bad = bytes;
  bad[0] = 'Q';
  CHECK_THROWS_AS(parse_superpixel_set(bad), FormatError);
  auto cut = bytes;
  cut.resize(cut.size() - 3);
  CHECK_THROWS_AS(parse_superpixel_set(cut), FormatError);
  auto order = bytes;
  order[16 + 7] = 9;
  CHECK_THROWS_AS(parse_superpixel_set(order), FormatError);

  SuperpixelSet gray;
  gray.width = 2;
  gray.height = 1;
  gray.entries.push_back({1, 0, {0.5, 0, 0}, 0});
  CHECK(parse_superpixel_set(serialize_superpixel_set(gray)).channels == 1);
  CHECK(quantize_unit(-1.0) == 0);
  CHECK(quantize_unit(2.0) == 255);
  CHECK(quantize_unit(0.5) == 128);
}

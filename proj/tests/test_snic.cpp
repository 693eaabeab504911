#include <doctest.h>

#include <cmath>
#include <queue>

#include "supercam/errors.hpp"
#include "supercam/metrics.hpp"
#include "supercam/rng.hpp"
#include "supercam/snic.hpp"

using namespace supercam;
using namespace supercam::snic;

namespace {

IntensityImage two_tone(int w, int h, int split_x, std::array<double, 3> a, std::array<double, 3> b) {
  IntensityImage img(w, h, 3);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) img.at(x, y, c) = x < split_x ? a[c] : b[c];
  return img;
}

IntensityImage noise_image(int w, int h, int ch, std::uint64_t seed) {
  const KeyedRng rng(seed, StreamPurpose::kSynthesis);
  IntensityImage img(w, h, ch);
  auto v = img.values();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = rng.uniform(static_cast<std::uint32_t>(i), 1, 1);
  return img;
}

bool four_connected(const LabelMap& labels, int id) {
  int sx = -1;
  int sy = -1;
  int total = 0;
  for (int y = 0; y < labels.height(); ++y)
    for (int x = 0; x < labels.width(); ++x)
      if (labels.at(x, y) == id) {
        ++total;
        if (sx < 0) {
          sx = x;
          sy = y;
        }
      }
  if (total == 0) return false;
  std::vector<char> seen(labels.pixel_count(), 0);
  std::queue<std::pair<int, int>> q;
  q.push({sx, sy});
  seen[sy * labels.width() + sx] = 1;
  int reached = 0;
  while (!q.empty()) {
    auto [x, y] = q.front();
    q.pop();
    ++reached;
    const int nx[4] = {x - 1, x + 1, x, x};
    const int ny[4] = {y, y, y - 1, y + 1};
    for (int n = 0; n < 4; ++n) {
      if (nx[n] < 0 || ny[n] < 0 || nx[n] >= labels.width() || ny[n] >= labels.height()) continue;
      const int i = ny[n] * labels.width() + nx[n];
      if (seen[i] || labels.at(nx[n], ny[n]) != id) continue;
      seen[i] = 1;
      q.push({nx[n], ny[n]});
    }
  }
  return reached == total;
}

}  // namespace

TEST_CASE("budget split at the default ratio") {
  const auto s = allocate_budget(600, 100, 100);
  CHECK(s.superpixel_bytes == 100);
  CHECK(s.image_bytes == 500);
  CHECK(s.superpixels == 5);
  CHECK(3 * s.scaled_width * s.scaled_height <= 500);

  const auto bsd = allocate_budget(68 * kKilobyte, 321, 481);
  CHECK(bsd.superpixel_bytes == 11333);
  CHECK(bsd.image_bytes == 56665);
  CHECK(bsd.superpixels == 566);
  CHECK(static_cast<std::uint64_t>(3 * bsd.scaled_width * bsd.scaled_height) <= bsd.image_bytes);
  const double aspect = double(bsd.scaled_width) / bsd.scaled_height;
  CHECK(std::abs(aspect - 321.0 / 481.0) < 0.01);
  CHECK(3 * bsd.scaled_width * bsd.scaled_height + 20 * bsd.superpixels <= 68000);

  // a huge budget leaves the image at full resolution
  const auto big = allocate_budget(10'000'000, 40, 30);
  CHECK(big.scaled_width == 40);
  CHECK(big.scaled_height == 30);
  CHECK_THROWS_AS(allocate_budget(5, 40, 30), BudgetError);
  BudgetOptions bad;
  bad.ratio = 0.0;
  CHECK_THROWS_AS(allocate_budget(1000, 40, 30, bad), ConfigError);
}

TEST_CASE("downsample is an exact area average") {
  IntensityImage checker(8, 6, 1);
  for (int y = 0; y < 6; ++y)
    for (int x = 0; x < 8; ++x) checker.at(x, y) = (x + y) % 2;
  const auto half = downsample(checker, 4, 3);
  for (double v : half.values()) CHECK(v == doctest::Approx(0.5));
  const auto odd = downsample(checker, 3, 2);
  double total = 0.0;
  for (double v : odd.values()) total += v;
  CHECK(total / 6.0 == doctest::Approx(checker.mean()));
  const IntensityImage flat(9, 7, 3, 0.3);
  const auto shrunk = downsample(flat, 5, 4);
  for (double v : shrunk.values()) CHECK(v == doctest::Approx(0.3));
  CHECK(downsample(flat, 9, 7) == flat);
  CHECK_THROWS_AS(downsample(flat, 10, 7), ConfigError);
}

TEST_CASE("srgb to lab reference colors") {
  const auto white = srgb_to_lab(1, 1, 1);
  CHECK(white[0] == doctest::Approx(100.0).epsilon(1e-4));
  CHECK(std::abs(white[1]) < 1e-3);
  CHECK(std::abs(white[2]) < 1e-3);
  const auto black = srgb_to_lab(0, 0, 0);
  CHECK(std::abs(black[0]) < 1e-9);
  const auto red = srgb_to_lab(1, 0, 0);
  CHECK(red[0] == doctest::Approx(53.24).epsilon(1e-3));
  CHECK(red[1] == doctest::Approx(80.09).epsilon(1e-3));
  CHECK(red[2] == doctest::Approx(67.20).epsilon(1e-3));
}

TEST_CASE("one superpixel covers everything with the global mean") {
  const auto img = noise_image(13, 9, 3, 2);
  const auto seg = snic_segment(img, 1);
  for (auto id : seg.labels.ids()) CHECK(id == 0);
  for (int c = 0; c < 3; ++c) {
    double sum = 0.0;
    for (int y = 0; y < 9; ++y)
      for (int x = 0; x < 13; ++x) sum += img.at(x, y, c);
    CHECK(std::abs(seg.means[0][c] - sum / (13 * 9)) < 1e-12);
  }
}

TEST_CASE("two-tone split is recovered with K = 2") {
  const auto img = two_tone(20, 10, 10, {0.9, 0.1, 0.1}, {0.1, 0.2, 0.9});
  const auto seg = snic_segment(img, 2);
  for (int y = 0; y < 10; ++y)
    for (int x = 0; x < 20; ++x) CHECK(seg.labels.at(x, y) == (x < 10 ? 0 : 1));
  CHECK(seg.means[0][0] == doctest::Approx(0.9));
  CHECK(seg.means[1][2] == doctest::Approx(0.9));
}

TEST_CASE("segments are 4-connected with exact member means") {
  for (std::uint64_t s = 0; s < 5; ++s) {
    const auto img = noise_image(30, 22, s % 2 ? 3 : 1, s);
    const auto seg = snic_segment(img, 12, 5.0);
    REQUIRE(seg.means.size() == 12);
    for (auto id : seg.labels.ids()) REQUIRE(id >= 0);
    for (int id = 0; id < 12; ++id) {
      CHECK(four_connected(seg.labels, id));
      std::array<double, 3> sum{};
      int n = 0;
      for (int y = 0; y < 22; ++y)
        for (int x = 0; x < 30; ++x)
          if (seg.labels.at(x, y) == id) {
            ++n;
            for (int c = 0; c < img.channels(); ++c) sum[c] += img.at(x, y, c);
          }
      for (int c = 0; c < img.channels(); ++c) CHECK(std::abs(seg.means[id][c] - sum[c] / n) <= 1e-6);
    }
  }
}

TEST_CASE("snic is deterministic") {
  const auto img = noise_image(25, 25, 3, 7);
  CHECK(snic_segment(img, 9).labels == snic_segment(img, 9).labels);
  CHECK_THROWS_AS(snic_segment(img, 0), ConfigError);
  CHECK_THROWS_AS(snic_segment(img, 626), ConfigError);
}

TEST_CASE("nearest upsampling") {
  LabelMap small(2, 2, std::vector<std::int32_t>{0, 1, 2, 3});
  const auto up = upsample_labels(small, 5, 3);
  CHECK(up.at(0, 0) == 0);
  CHECK(up.at(2, 0) == 0);  // floor(2 * 2 / 5) = 0
  CHECK(up.at(3, 0) == 1);
  CHECK(up.at(4, 2) == 3);
  CHECK(up.at(0, 1) == 0);  // floor(1 * 2 / 3) = 0
  CHECK(up.at(0, 2) == 2);
}

TEST_CASE("restricted pipeline honours the budget") {
  const auto img = noise_image(321, 481, 3, 1);
  for (std::uint64_t kb : {68, 205}) {
    const auto r = run_snic_restricted(img, kb * kKilobyte, false);
    CHECK(r.report.footprint_bytes <= kb * kKilobyte);
    CHECK(r.report.footprint_bytes ==
          3u * r.split.scaled_width * r.split.scaled_height + 20u * r.report.realized_units);
    CHECK(r.labels.width() == 321);
    CHECK(r.rendered.height() == 481);
    CHECK(r.report.pipeline == "snic");
  }
  const auto blurred = run_snic_restricted(img, 68 * kKilobyte, true);
  CHECK(blurred.report.pipeline == "snic_blur");
  CHECK(blurred.labels == run_snic_restricted(img, 68 * kKilobyte, false).labels);
}

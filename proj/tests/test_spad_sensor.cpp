#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "supercam/errors.hpp"
#include "supercam/spad_sensor.hpp"

using namespace supercam;
using namespace supercam::spad;

namespace {

IntensityImage ramp(int w, int h) {
  IntensityImage img(w, h, 1);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) img.at(x, y) = 0.05 + 0.9 * (x + w * y) / double(w * h);
  return img;
}

}  // namespace

TEST_CASE("config validation") {
  SensorConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.quantum_efficiency = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  cfg.quantum_efficiency = 1.5;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  cfg.dark_count_rate = -0.1;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  cfg.frames = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  cfg.frames = 4;
  cfg.mean_photons_per_pixel = 4.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("exposure scale hand example") {
  // 2x2 image of mean 0.5, p = 2, F = 200: c = 2 / (200 * 0.5) = 0.02
  IntensityImage img(2, 2, 1);
  img.at(0, 0) = 0.2;
  img.at(1, 0) = 0.8;
  img.at(0, 1) = 0.4;
  img.at(1, 1) = 0.6;
  SensorConfig cfg;
  cfg.frames = 200;
  const auto scale = compute_exposure_scale(img, cfg);
  CHECK(scale.c == doctest::Approx(0.02).epsilon(1e-14));
  CHECK(detection_probability(0.8, scale, cfg) == doctest::Approx(1.0 - std::exp(-0.016)));
  CHECK_THROWS_AS(compute_exposure_scale(IntensityImage(3, 3, 1, 0.0), cfg), DegenerateInputError);
}

TEST_CASE("detection probability is monotone in intensity") {
  SensorConfig cfg;
  cfg.quantum_efficiency = 0.7;
  cfg.dark_count_rate = 0.01;
  const ExposureScale scale{0.5};
  double prev = -1.0;
  for (int i = 0; i <= 100; ++i) {
    const double p = detection_probability(i / 10.0, scale, cfg);
    CHECK(p > prev);
    CHECK(p < 1.0);
    prev = p;
  }
  CHECK(detection_probability(0.0, scale, cfg) == doctest::Approx(1.0 - std::exp(-0.005)));
}

TEST_CASE("recovery inverts the expected count") {
  SensorConfig cfg;
  cfg.frames = 1000;
  cfg.quantum_efficiency = 0.8;
  cfg.dark_count_rate = 0.02;
  const ExposureScale scale{0.003};
  for (double phi : {0.1, 0.5, 1.0, 3.0, 10.0}) {
    const double prob = detection_probability(phi, scale, cfg);
    // invert the continuous count S = F * P exactly
    const double s = cfg.frames * prob;
    const double back = -std::log1p(-s / cfg.frames) / (scale.c * cfg.quantum_efficiency) -
                        cfg.dark_count_rate / cfg.quantum_efficiency;
    CHECK(std::abs(back - phi) < 1e-12 * std::max(1.0, phi));
  }
  CHECK(estimate_intensity(0, scale, cfg) == 0.0);
  // saturation clamps to F - 1/2
  const double sat = estimate_intensity(1000, scale, cfg);
  CHECK(std::isfinite(sat));
  CHECK(sat == doctest::Approx(-std::log(0.5 / 1000.0) / (0.003 * 0.8) - 0.02 / 0.8));
}

TEST_CASE("per-pixel counts follow the binomial law") {
  const IntensityImage img(64, 64, 1, 0.5);
  SensorConfig cfg;
  cfg.frames = 256;
  cfg.mean_photons_per_pixel = 16.0;
  const auto scale = compute_exposure_scale(img, cfg);
  const auto cube = sample_photon_cube(img, scale, cfg, 11);
  const double prob = detection_probability(0.5, scale, cfg);
  double sum = 0.0;
  double sq = 0.0;
  for (int y = 0; y < 64; ++y)
    for (int x = 0; x < 64; ++x) {
      sum += cube.sum(x, y);
      sq += double(cube.sum(x, y)) * cube.sum(x, y);
    }
  const double n = 64.0 * 64.0;
  const double mean = sum / n;
  const double var = sq / n - mean * mean;
  const double mu = cfg.frames * prob;
  const double sigma2 = cfg.frames * prob * (1 - prob);
  CHECK(std::abs(mean - mu) < 3.0 * std::sqrt(sigma2 / n));
  CHECK(var == doctest::Approx(sigma2).epsilon(0.1));
  CHECK(cube.sums_consistent());
}

TEST_CASE("sampling is deterministic and seed dependent") {
  const auto img = ramp(13, 7);
  SensorConfig cfg;
  cfg.frames = 64;
  const auto scale = compute_exposure_scale(img, cfg);
  const auto a = sample_photon_cube(img, scale, cfg, 5);
  const auto b = sample_photon_cube(img, scale, cfg, 5);
  const auto c = sample_photon_cube(img, scale, cfg, 6);
  CHECK(a == b);
  CHECK_FALSE(a == c);
}

TEST_CASE("single-pixel exposure matches the cube") {
  IntensityImage img(9, 5, 3);
  for (int y = 0; y < 5; ++y)
    for (int x = 0; x < 9; ++x)
      for (int c = 0; c < 3; ++c) img.at(x, y, c) = 0.1 + 0.1 * ((x + 2 * y + c) % 8);
  SensorConfig cfg;
  cfg.frames = 128;
  cfg.mean_photons_per_pixel = 8.0;
  const auto scale = compute_exposure_scale(img, cfg);
  for (int c = 0; c < 3; ++c) {
    const auto cube = sample_photon_cube(img, scale, cfg, 99, c);
    const auto rec = recover_intensity(cube, scale, cfg);
    for (int y = 0; y < 5; ++y)
      for (int x = 0; x < 9; ++x) {
        const auto e = expose_pixel(img, x, y, scale, cfg, 99);
        CHECK(e.detections[c] == cube.sum(x, y));
        CHECK(e.estimate[c] == rec.at(x, y));
      }
  }
  CHECK_THROWS_AS(expose_pixel(img, 9, 0, scale, cfg, 1), ConfigError);
}

TEST_CASE("recover rejects a frame mismatch") {
  PhotonCube cube(2, 2, 8);
  SensorConfig cfg;
  cfg.frames = 16;
  CHECK_THROWS_AS(recover_intensity(cube, ExposureScale{1.0}, cfg), ConfigError);
}

TEST_CASE("photon cube bit layout") {
  PhotonCube cube(10, 2, 3);
  CHECK(cube.row_bytes() == 2);
  cube.set_bit(1, 0, 1, true);
  cube.set_bit(2, 9, 0, true);
  cube.set_bit(2, 9, 0, true);
  CHECK(cube.packed()[1 * 4 + 2] == 0x80);
  CHECK(cube.packed()[2 * 4 + 1] == 0x40);
  CHECK(cube.sum(9, 0) == 1);
  cube.set_bit(2, 9, 0, false);
  CHECK(cube.sum(9, 0) == 0);
  CHECK(cube.sums_consistent());
}

TEST_CASE("photon cube file round trip and errors") {
  const auto img = ramp(11, 4);
  SensorConfig cfg;
  cfg.frames = 32;
  const auto scale = compute_exposure_scale(img, cfg);
  const auto cube = sample_photon_cube(img, scale, cfg, 3);
  const auto path = std::filesystem::temp_directory_path() / "supercam_test_cube.spc";
  save_photon_cube(cube, path);
  const auto back = load_photon_cube(path);
  CHECK(back == cube);
  CHECK(back.sums_consistent());
  CHECK(load_photon_cube(path, CubeLayout{11, 4, 32}) == cube);
  CHECK_THROWS_AS(load_photon_cube(path, CubeLayout{12, 4, 32}), FormatError);

  auto bytes = serialize_photon_cube(cube);
  CHECK(bytes.size() == 16 + 2 * 4 * 32);
  auto truncated = bytes;
  truncated.pop_back();
  CHECK_THROWS_AS(parse_photon_cube(truncated), FormatError);
  auto padded = bytes;
  padded.push_back(0);
  CHECK_THROWS_AS(parse_photon_cube(padded), FormatError);
  auto bad = bytes;
  bad[0] = 'X';
  CHECK_THROWS_AS(parse_photon_cube(bad), FormatError);
  try {
    parse_photon_cube(truncated);
  } catch (const FormatError& e) {
    CHECK(e.offset() > 0);
  }
  std::filesystem::remove(path);
}

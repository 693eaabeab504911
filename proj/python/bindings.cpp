#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <string>

#include "supercam/errors.hpp"
#include "supercam/harness.hpp"
#include "supercam/metrics.hpp"
#include "supercam/snic.hpp"
#include "supercam/spad_sensor.hpp"
#include "supercam/supercam.hpp"

namespace py = pybind11;
using namespace supercam;

namespace {

using Doubles = py::array_t<double, py::array::c_style | py::array::forcecast>;
using Labels = py::array_t<std::int32_t, py::array::c_style | py::array::forcecast>;

IntensityImage to_image(const Doubles& a) {
  if (a.ndim() != 2 && !(a.ndim() == 3 && (a.shape(2) == 1 || a.shape(2) == 3))) {
    throw ConfigError("image must have shape (H, W) or (H, W, 1|3)");
  }
  const int h = static_cast<int>(a.shape(0));
  const int w = static_cast<int>(a.shape(1));
  const int ch = a.ndim() == 3 ? static_cast<int>(a.shape(2)) : 1;
  IntensityImage img(w, h, ch);
  std::copy(a.data(), a.data() + a.size(), img.values().begin());
  return img;
}

Doubles from_image(const IntensityImage& img) {
  std::vector<py::ssize_t> shape = {img.height(), img.width()};
  if (img.channels() == 3) shape.push_back(3);
  Doubles out(shape);
  std::copy(img.values().begin(), img.values().end(), out.mutable_data());
  return out;
}

LabelMap to_labels(const Labels& a) {
  if (a.ndim() != 2) throw ConfigError("label map must have shape (H, W)");
  std::vector<std::int32_t> ids(a.data(), a.data() + a.size());
  return LabelMap(static_cast<int>(a.shape(1)), static_cast<int>(a.shape(0)), std::move(ids));
}

Labels from_labels(const LabelMap& m) {
  Labels out({m.height(), m.width()});
  std::copy(m.ids().begin(), m.ids().end(), out.mutable_data());
  return out;
}

metrics::DepthMap to_depth(const Doubles& a, const std::optional<py::array_t<bool>>& mask) {
  if (a.ndim() != 2) throw ConfigError("depth map must have shape (H, W)");
  metrics::DepthMap d{static_cast<int>(a.shape(1)), static_cast<int>(a.shape(0)),
                      std::vector<double>(a.data(), a.data() + a.size()), {}};
  if (mask) {
    auto m = py::array_t<bool, py::array::c_style | py::array::forcecast>::ensure(*mask);
    if (m.size() != a.size()) throw ConfigError("depth mask size mismatch");
    d.mask.assign(m.data(), m.data() + m.size());
  }
  return d;
}

py::dict report_dict(const BudgetReport& r) {
  py::dict d;
  d["pipeline"] = r.pipeline;
  d["budget_bytes"] = r.budget_bytes;
  d["requested_units"] = r.requested_units;
  d["realized_units"] = r.realized_units;
  d["footprint_bytes"] = r.footprint_bytes;
  d["ratio"] = r.ratio;
  d["image_bytes"] = r.image_bytes;
  d["superpixel_bytes"] = r.superpixel_bytes;
  d["scaled_width"] = r.scaled_width;
  d["scaled_height"] = r.scaled_height;
  d["ground_truth_reads"] = r.ground_truth_reads;
  d["bernoulli_draws"] = r.bernoulli_draws;
  d["work_memory_charged"] = r.work_memory_charged;
  return d;
}

py::dict boundary_dict(const metrics::BoundaryScore& b) {
  py::dict d;
  d["precision"] = b.precision;
  d["recall"] = b.recall;
  d["true_positives"] = b.true_positives;
  d["false_positives"] = b.false_positives;
  d["false_negatives"] = b.false_negatives;
  return d;
}

}  // namespace

PYBIND11_MODULE(_supercam, m) {
  m.doc() = "SuperCam core bindings";

  auto config_error = py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<BudgetError>(m, "BudgetError", config_error.ptr());
  py::register_exception<DegenerateInputError>(m, "DegenerateInputError", PyExc_ValueError);
  py::register_exception<FormatError>(m, "FormatError", PyExc_RuntimeError);

  py::class_<spad::SensorConfig>(m, "SensorConfig")
      .def(py::init([](double qe, double dark, int frames, double ppp) {
             spad::SensorConfig c{qe, dark, frames, ppp};
             c.validate();
             return c;
           }),
           py::arg("quantum_efficiency") = 1.0, py::arg("dark_count_rate") = 0.0,
           py::arg("frames") = spad::SensorConfig{}.frames,
           py::arg("mean_photons_per_pixel") = spad::SensorConfig{}.mean_photons_per_pixel)
      .def_readwrite("quantum_efficiency", &spad::SensorConfig::quantum_efficiency)
      .def_readwrite("dark_count_rate", &spad::SensorConfig::dark_count_rate)
      .def_readwrite("frames", &spad::SensorConfig::frames)
      .def_readwrite("mean_photons_per_pixel", &spad::SensorConfig::mean_photons_per_pixel)
      .def("__repr__", [](const spad::SensorConfig& c) {
        return "SensorConfig(quantum_efficiency=" + std::to_string(c.quantum_efficiency) +
               ", dark_count_rate=" + std::to_string(c.dark_count_rate) + ", frames=" +
               std::to_string(c.frames) + ", mean_photons_per_pixel=" +
               std::to_string(c.mean_photons_per_pixel) + ")";
      });

  m.def("compute_exposure_scale",
        [](const Doubles& image, const spad::SensorConfig& cfg) {
          return spad::compute_exposure_scale(to_image(image), cfg).c;
        },
        py::arg("image"), py::arg("config"));

  m.def("sample_photon_cube",
        [](const Doubles& image, double c, const spad::SensorConfig& cfg, std::uint64_t seed, int channel) {
          const auto cube = spad::sample_photon_cube(to_image(image), spad::ExposureScale{c}, cfg, seed, channel);
          py::array_t<std::uint32_t> sums({cube.height(), cube.width()});
          auto* out = sums.mutable_data();
          for (int y = 0; y < cube.height(); ++y)
            for (int x = 0; x < cube.width(); ++x) out[y * cube.width() + x] = cube.sum(x, y);
          py::array_t<std::uint8_t> bits({cube.frame_count(), cube.height(), cube.width()});
          auto* b = bits.mutable_data();
          for (int f = 0; f < cube.frame_count(); ++f)
            for (int y = 0; y < cube.height(); ++y)
              for (int x = 0; x < cube.width(); ++x)
                b[(static_cast<std::size_t>(f) * cube.height() + y) * cube.width() + x] = cube.bit(f, x, y);
          return py::make_tuple(bits, sums);
        },
        py::arg("image"), py::arg("scale"), py::arg("config"), py::arg("seed") = 0, py::arg("channel") = 0,
        "Returns (frames[F, H, W] uint8, sums[H, W] uint32).");

  m.def("recover_intensity",
        [](const py::array_t<std::uint32_t, py::array::c_style | py::array::forcecast>& sums, double c,
           const spad::SensorConfig& cfg) {
          Doubles out(std::vector<py::ssize_t>(sums.shape(), sums.shape() + sums.ndim()));
          for (py::ssize_t i = 0; i < sums.size(); ++i)
            out.mutable_data()[i] = spad::estimate_intensity(sums.data()[i], spad::ExposureScale{c}, cfg);
          return out;
        },
        py::arg("sums"), py::arg("scale"), py::arg("config"));

  m.def("partition_grid",
        [](int w, int h, std::int64_t p) {
          const auto g = partition_grid(w, h, p);
          return py::make_tuple(g.cols(), g.rows());
        },
        py::arg("width"), py::arg("height"), py::arg("target_cells"), "Returns (cols, rows).");

  m.def("sigma_for_radius", &sigma_for_radius, py::arg("radius"));

  m.def("gaussian_blur",
        [](const Doubles& image, int rx, int ry) {
          return from_image(gaussian_blur(to_image(image), make_blur_kernel(rx, ry)));
        },
        py::arg("image"), py::arg("radius_x"), py::arg("radius_y"));

  m.def("nearest_fill",
        [](int w, int h, const py::array_t<int, py::array::c_style | py::array::forcecast>& seeds,
           const Doubles& values) {
          if (seeds.ndim() != 2 || seeds.shape(1) != 2) throw ConfigError("seeds must have shape (N, 2) as (x, y)");
          if (values.ndim() != 1 || values.shape(0) != seeds.shape(0)) throw ConfigError("one value per seed");
          SuperpixelSet set;
          set.width = w;
          set.height = h;
          for (py::ssize_t i = 0; i < seeds.shape(0); ++i)
            set.entries.push_back({seeds.at(i, 0), seeds.at(i, 1), {values.at(i), 0, 0}, static_cast<int>(i)});
          const auto fill = nearest_fill(set);
          return py::make_tuple(from_labels(fill.labels), from_image(fill.image));
        },
        py::arg("width"), py::arg("height"), py::arg("seeds"), py::arg("values"),
        "Voronoi fill of a gray value per seed. Returns (labels, image).");

  m.def("run_supercam",
        [](const Doubles& image, std::uint64_t budget, const std::string& mode,
           std::optional<spad::SensorConfig> config, std::uint64_t seed) {
          if (mode != "spad" && mode != "direct") throw ConfigError("mode must be 'spad' or 'direct'");
          std::optional<spad::SensorConfig> sensor;
          if (mode == "spad") sensor = config.value_or(spad::SensorConfig{});
          const auto res = run_supercam(to_image(image), budget, sensor, seed);
          py::array_t<int> seeds({static_cast<py::ssize_t>(res.set.entries.size()), py::ssize_t{2}});
          Doubles values({static_cast<py::ssize_t>(res.set.entries.size()), py::ssize_t{res.set.channels}});
          for (std::size_t i = 0; i < res.set.entries.size(); ++i) {
            seeds.mutable_at(i, 0) = res.set.entries[i].x;
            seeds.mutable_at(i, 1) = res.set.entries[i].y;
            for (int c = 0; c < res.set.channels; ++c) values.mutable_at(i, c) = res.set.entries[i].intensity[c];
          }
          py::dict d;
          d["filled"] = from_image(res.filled);
          d["rendered"] = from_image(res.rendered);
          d["labels"] = from_labels(res.labels);
          d["seeds"] = seeds;
          d["intensities"] = values;
          d["grid"] = py::make_tuple(res.grid.cols(), res.grid.rows());
          d["blur_radius"] = py::make_tuple(res.kernel.radius_x, res.kernel.radius_y);
          d["report"] = report_dict(res.report);
          d["serialized"] = py::bytes(reinterpret_cast<const char*>(serialize_superpixel_set(res.set).data()),
                                      16 + res.set.footprint_bytes());
          return d;
        },
        py::arg("image"), py::arg("budget_bytes"), py::arg("mode") = "spad", py::arg("config") = std::nullopt,
        py::arg("seed") = 0);

  m.def("run_snic",
        [](const Doubles& image, std::uint64_t budget, bool blur, double compactness, double ratio) {
          snic::BudgetOptions opts;
          opts.ratio = ratio;
          const auto res = snic::run_snic_restricted(to_image(image), budget, blur, compactness, opts);
          py::dict d;
          d["rendered"] = from_image(res.rendered);
          d["labels"] = from_labels(res.labels);
          d["report"] = report_dict(res.report);
          return d;
        },
        py::arg("image"), py::arg("budget_bytes"), py::arg("blur") = false,
        py::arg("compactness") = snic::kDefaultCompactness, py::arg("ratio") = snic::kDefaultRatio);

  m.def("snic_segment",
        [](const Doubles& image, std::int64_t k, double compactness) {
          const auto seg = snic::snic_segment(to_image(image), k, compactness);
          Doubles means({static_cast<py::ssize_t>(seg.means.size()), py::ssize_t{seg.channels}});
          for (std::size_t i = 0; i < seg.means.size(); ++i)
            for (int c = 0; c < seg.channels; ++c) means.mutable_at(i, c) = seg.means[i][c];
          return py::make_tuple(from_labels(seg.labels), means);
        },
        py::arg("image"), py::arg("superpixels"), py::arg("compactness") = snic::kDefaultCompactness,
        "Returns (labels, means[K, C]).");

  m.def("downsample",
        [](const Doubles& image, int w, int h) { return from_image(snic::downsample(to_image(image), w, h)); },
        py::arg("image"), py::arg("width"), py::arg("height"));

  m.def("under_segmentation_error",
        [](const Labels& s, const Labels& g) { return metrics::under_segmentation_error(to_labels(s), to_labels(g)); },
        py::arg("segments"), py::arg("ground_truth"));
  m.def("miou_error", [](const Labels& s, const Labels& g) { return metrics::miou_error(to_labels(s), to_labels(g)); },
        py::arg("segments"), py::arg("ground_truth"));
  m.def("tolerance_radius", &metrics::tolerance_radius, py::arg("width"), py::arg("height"));
  m.def("boundary_map",
        [](const Labels& l) {
          const auto b = metrics::boundary_map(to_labels(l));
          py::array_t<std::uint8_t> out({b.height, b.width});
          std::copy(b.bits.begin(), b.bits.end(), out.mutable_data());
          return out;
        },
        py::arg("labels"));
  m.def("boundary_precision_recall",
        [](const Labels& s, const Labels& g, std::optional<int> radius) {
          const auto bs = metrics::boundary_map(to_labels(s));
          const auto bg = metrics::boundary_map(to_labels(g));
          return boundary_dict(radius ? metrics::boundary_precision_recall(bs, bg, *radius)
                                      : metrics::boundary_precision_recall(bs, bg));
        },
        py::arg("segments"), py::arg("ground_truth"), py::arg("radius") = std::nullopt);
  m.def("depth_metrics",
        [](const Doubles& pred, const Doubles& gt, std::optional<py::array_t<bool>> mask) {
          const auto s = metrics::depth_metrics(to_depth(pred, std::nullopt), to_depth(gt, mask));
          return py::make_tuple(s.abs_rel, s.delta1);
        },
        py::arg("predicted"), py::arg("ground_truth"), py::arg("mask") = std::nullopt,
        "Returns (abs_rel, delta1).");
  m.def("evaluate",
        [](const Labels& s, const Labels& g) {
          const auto r = metrics::evaluate(to_labels(s), metrics::GroundTruth{to_labels(g), std::nullopt});
          py::dict d;
          d["ue"] = r.ue;
          d["boundary"] = boundary_dict(r.boundary);
          d["miou_error"] = r.miou_error;
          return d;
        },
        py::arg("segments"), py::arg("ground_truth"));

  m.def("synth_scene",
        [](int w, int h, std::uint64_t seed, int index, int min_regions, int max_regions, double noise) {
          harness::SynthOptions o{w, h, min_regions, max_regions, noise};
          const auto s = harness::synth_scene(o, seed, index);
          return py::make_tuple(from_image(s.image), from_labels(s.labels));
        },
        py::arg("width") = 321, py::arg("height") = 481, py::arg("seed") = 0, py::arg("index") = 0,
        py::arg("min_regions") = 5, py::arg("max_regions") = 30, py::arg("noise") = 0.0,
        "Returns (image[H, W, 3], labels[H, W]).");

  m.def("parse_budget", &harness::parse_budget, py::arg("text"));
}

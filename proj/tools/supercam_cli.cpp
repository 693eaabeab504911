// supercam command-line front end.

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "supercam/errors.hpp"
#include "supercam/harness.hpp"
#include "supercam/image_io.hpp"
#include "supercam/metrics.hpp"
#include "supercam/snic.hpp"
#include "supercam/spad_sensor.hpp"
#include "supercam/supercam.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace supercam;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInvalid = 1;
constexpr int kExitPartial = 2;

struct SensorFlags {
  int frames = spad::SensorConfig{}.frames;
  double ppp = spad::SensorConfig{}.mean_photons_per_pixel;
  double qe = 1.0;
  double dark = 0.0;

  spad::SensorConfig config() const {
    spad::SensorConfig c;
    c.frames = frames;
    c.mean_photons_per_pixel = ppp;
    c.quantum_efficiency = qe;
    c.dark_count_rate = dark;
    c.validate();
    return c;
  }
};

void add_sensor_flags(CLI::App* app, SensorFlags& s) {
  app->add_option("--frames", s.frames, "binary frames per exposure")->capture_default_str();
  app->add_option("--ppp", s.ppp, "mean photons per pixel")->capture_default_str();
  app->add_option("--qe", s.qe, "quantum efficiency")->capture_default_str();
  app->add_option("--dark", s.dark, "dark count rate")->capture_default_str();
}

json report_json(const BudgetReport& r) {
  return {{"pipeline", r.pipeline},
          {"budget_bytes", r.budget_bytes},
          {"requested_units", r.requested_units},
          {"realized_units", r.realized_units},
          {"footprint_bytes", r.footprint_bytes},
          {"ratio", r.ratio},
          {"image_bytes", r.image_bytes},
          {"superpixel_bytes", r.superpixel_bytes},
          {"scaled_width", r.scaled_width},
          {"scaled_height", r.scaled_height},
          {"ground_truth_reads", r.ground_truth_reads},
          {"bernoulli_draws", r.bernoulli_draws},
          {"work_memory_charged", r.work_memory_charged}};
}

json metrics_json(const metrics::MetricReport& m) {
  json j = {{"ue", m.ue},
            {"precision", m.boundary.precision},
            {"recall", m.boundary.recall},
            {"true_positives", m.boundary.true_positives},
            {"false_positives", m.boundary.false_positives},
            {"false_negatives", m.boundary.false_negatives},
            {"miou_error", m.miou_error}};
  if (m.depth) {
    j["abs_rel"] = m.depth->abs_rel;
    j["delta1"] = m.depth->delta1;
  }
  return j;
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << j.dump(2) << '\n';
}

std::string stem_of(const fs::path& p) { return p.stem().string(); }

bool parse_on_off(const std::string& v) {
  if (v == "on") return true;
  if (v == "off") return false;
  throw ConfigError("expected on or off, got '" + v + "'");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SuperCam: sparse superpixel capture, SNIC baseline and evaluation"};
  app.set_config("--config", "", "TOML config file supplying any flag");
  app.require_subcommand(1);

  // simulate
  auto* simulate = app.add_subcommand("simulate", "capture a photon cube from an image");
  fs::path sim_input;
  fs::path sim_out = "out";
  std::uint64_t sim_seed = 0;
  SensorFlags sim_sensor;
  simulate->add_option("--input,-i", sim_input, "input image (PNG/PGM/PPM)")->required();
  simulate->add_option("--out,-o", sim_out, "output directory")->capture_default_str();
  simulate->add_option("--seed", sim_seed)->capture_default_str();
  add_sensor_flags(simulate, sim_sensor);

  // supercam
  auto* sc = app.add_subcommand("supercam", "run the SuperCam pipeline");
  fs::path sc_input;
  fs::path sc_cube;
  fs::path sc_out = "out";
  std::string sc_budget = "68k";
  std::string sc_mode = "spad";
  std::string sc_blur = "on";
  std::uint64_t sc_seed = 0;
  SensorFlags sc_sensor;
  auto* sc_in_opt = sc->add_option("--input,-i", sc_input, "input image");
  auto* sc_cube_opt = sc->add_option("--cube", sc_cube, "captured photon cube (.spc) instead of an image");
  sc_in_opt->excludes(sc_cube_opt);
  sc->add_option("--budget,-b", sc_budget, "memory budget, e.g. 68k")->capture_default_str();
  sc->add_option("--mode", sc_mode, "measurement mode")
      ->check(CLI::IsMember({"spad", "direct"}))
      ->capture_default_str();
  sc->add_option("--blur", sc_blur, "apply the derived blur to the rendered image")
      ->check(CLI::IsMember({"on", "off"}))
      ->capture_default_str();
  sc->add_option("--seed", sc_seed)->capture_default_str();
  sc->add_option("--out,-o", sc_out)->capture_default_str();
  add_sensor_flags(sc, sc_sensor);

  // snic
  auto* sn = app.add_subcommand("snic", "run memory-restricted SNIC");
  fs::path sn_input;
  fs::path sn_out = "out";
  std::string sn_budget = "68k";
  std::string sn_blur = "off";
  double sn_compactness = snic::kDefaultCompactness;
  double sn_ratio = snic::kDefaultRatio;
  sn->add_option("--input,-i", sn_input)->required();
  sn->add_option("--budget,-b", sn_budget)->capture_default_str();
  sn->add_option("--blur", sn_blur)->check(CLI::IsMember({"on", "off"}))->capture_default_str();
  sn->add_option("--compactness", sn_compactness)->capture_default_str();
  sn->add_option("--ratio", sn_ratio, "image : superpixel byte ratio")->capture_default_str();
  sn->add_option("--out,-o", sn_out)->capture_default_str();

  // eval
  auto* ev = app.add_subcommand("eval", "score a label map against ground truth");
  fs::path ev_labels;
  fs::path ev_gt;
  fs::path ev_depth_pred;
  fs::path ev_depth_gt;
  bool ev_zero_void = false;
  ev->add_option("--labels", ev_labels, "predicted labels (PGM/PNG/CSV)")->required();
  ev->add_option("--gt", ev_gt, "ground-truth labels")->required();
  ev->add_option("--depth-pred", ev_depth_pred, "predicted depth CSV");
  ev->add_option("--depth-gt", ev_depth_gt, "ground-truth depth CSV");
  ev->add_flag("--zero-void", ev_zero_void, "treat GT label 0 as void");

  // sweep
  auto* sw = app.add_subcommand("sweep", "benchmark pipelines over a corpus");
  fs::path sw_corpus;
  fs::path sw_out = "sweep_out";
  std::vector<std::string> sw_budgets = {"68k", "205k", "615k"};
  std::vector<std::string> sw_pipelines = {"supercam", "snic", "snic_blur"};
  std::vector<std::uint64_t> sw_seeds = {0, 1, 2};
  std::string sw_mode = "spad";
  int sw_workers = 1;
  bool sw_timing = false;
  bool sw_zero_void = false;
  double sw_compactness = snic::kDefaultCompactness;
  SensorFlags sw_sensor;
  sw->add_option("--corpus", sw_corpus)->required();
  sw->add_option("--budget,-b", sw_budgets, "budgets (repeatable)")->capture_default_str();
  sw->add_option("--pipeline", sw_pipelines, "pipelines (repeatable)")->capture_default_str();
  sw->add_option("--seed", sw_seeds, "seeds (repeatable)")->capture_default_str();
  sw->add_option("--mode", sw_mode)->check(CLI::IsMember({"spad", "direct"}))->capture_default_str();
  sw->add_option("--workers,-j", sw_workers)->capture_default_str();
  sw->add_option("--compactness", sw_compactness)->capture_default_str();
  sw->add_flag("--timing", sw_timing, "fill the wall_ms column");
  sw->add_flag("--zero-void", sw_zero_void, "treat GT label 0 as void");
  sw->add_option("--out,-o", sw_out)->capture_default_str();
  add_sensor_flags(sw, sw_sensor);

  // synth
  auto* sy = app.add_subcommand("synth", "generate a synthetic corpus");
  int sy_count = 20;
  std::uint64_t sy_seed = 0;
  fs::path sy_out = "corpus";
  harness::SynthOptions sy_opts;
  sy->add_option("--count,-n", sy_count)->capture_default_str();
  sy->add_option("--seed", sy_seed)->capture_default_str();
  sy->add_option("--width", sy_opts.width)->capture_default_str();
  sy->add_option("--height", sy_opts.height)->capture_default_str();
  sy->add_option("--min-regions", sy_opts.min_regions)->capture_default_str();
  sy->add_option("--max-regions", sy_opts.max_regions)->capture_default_str();
  sy->add_option("--noise", sy_opts.texture_noise, "texture noise std")->capture_default_str();
  sy->add_option("--out,-o", sy_out)->capture_default_str();

  // render
  auto* rd = app.add_subcommand("render", "write fill, blur and overlay images");
  fs::path rd_input;
  fs::path rd_out = "render";
  std::string rd_budget = "68k";
  std::string rd_pipeline = "supercam";
  std::uint64_t rd_seed = 0;
  rd->add_option("--input,-i", rd_input)->required();
  rd->add_option("--budget,-b", rd_budget)->capture_default_str();
  rd->add_option("--pipeline", rd_pipeline)->capture_default_str();
  rd->add_option("--seed", rd_seed)->capture_default_str();
  rd->add_option("--out,-o", rd_out)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitInvalid;
  }

  try {
    if (*simulate) {
      const auto img = io::load_image(sim_input);
      const auto cfg = sim_sensor.config();
      const auto scale = spad::compute_exposure_scale(img, cfg);
      fs::create_directories(sim_out);
      const auto stem = stem_of(sim_input);
      json j = {{"input", sim_input.string()},
                {"width", img.width()},
                {"height", img.height()},
                {"frames", cfg.frames},
                {"mean_photons_per_pixel", cfg.mean_photons_per_pixel},
                {"quantum_efficiency", cfg.quantum_efficiency},
                {"dark_count_rate", cfg.dark_count_rate},
                {"exposure_scale", scale.c},
                {"seed", sim_seed},
                {"cubes", json::array()}};
      IntensityImage recovered(img.width(), img.height(), img.channels());
      for (int c = 0; c < img.channels(); ++c) {
        const auto cube = spad::sample_photon_cube(img, scale, cfg, sim_seed, c);
        const auto name = img.channels() == 1 ? stem + ".spc" : stem + "_c" + std::to_string(c) + ".spc";
        spad::save_photon_cube(cube, sim_out / name);
        j["cubes"].push_back(name);
        const auto rec = spad::recover_intensity(cube, scale, cfg);
        for (int y = 0; y < img.height(); ++y)
          for (int x = 0; x < img.width(); ++x) recovered.at(x, y, c) = rec.at(x, y);
      }
      // Display scale: recovered flux relative to the input's brightest value.
      const double peak = recovered.max();
      if (peak > 0.0) {
        for (auto& v : recovered.values()) v /= peak;
      }
      io::save_png(recovered, sim_out / (stem + "_recovered.png"));
      j["mean_detection_probability"] = spad::mean_detection_probability(img, scale, cfg);
      write_json(sim_out / (stem + "_simulate.json"), j);
      std::cout << j.dump(2) << '\n';
    } else if (*sc) {
      if (sc_input.empty() && sc_cube.empty()) throw ConfigError("give --input or --cube");
      const auto budget = harness::parse_budget(sc_budget);
      fs::create_directories(sc_out);
      SuperCamResult res = [&] {
        if (!sc_cube.empty()) return run_supercam_on_cube(spad::load_photon_cube(sc_cube), budget, sc_seed);
        const auto img = io::load_image(sc_input);
        std::optional<spad::SensorConfig> sensor;
        if (sc_mode == "spad") sensor = sc_sensor.config();
        return run_supercam(img, budget, sensor, sc_seed);
      }();
      const auto stem = stem_of(sc_cube.empty() ? sc_input : sc_cube);
      save_superpixel_set(res.set, sc_out / (stem + ".sps"));
      io::save_png(parse_on_off(sc_blur) ? res.rendered : res.filled, sc_out / (stem + "_supercam.png"));
      io::save_labels_pgm(res.labels, sc_out / (stem + "_labels.pgm"));
      json j = report_json(res.report);
      j["grid"] = {{"cols", res.grid.cols()}, {"rows", res.grid.rows()}};
      j["blur"] = {{"radius_x", res.kernel.radius_x},
                   {"radius_y", res.kernel.radius_y},
                   {"sigma_x", res.kernel.sigma_x},
                   {"sigma_y", res.kernel.sigma_y}};
      write_json(sc_out / (stem + "_report.json"), j);
      std::cout << j.dump(2) << '\n';
    } else if (*sn) {
      const auto img = io::load_image(sn_input);
      snic::BudgetOptions opts;
      opts.ratio = sn_ratio;
      const auto res = snic::run_snic_restricted(img, harness::parse_budget(sn_budget),
                                                 parse_on_off(sn_blur), sn_compactness, opts);
      fs::create_directories(sn_out);
      const auto stem = stem_of(sn_input);
      io::save_png(res.rendered, sn_out / (stem + "_" + res.report.pipeline + ".png"));
      io::save_labels_pgm(res.labels, sn_out / (stem + "_labels.pgm"));
      const json j = report_json(res.report);
      write_json(sn_out / (stem + "_report.json"), j);
      std::cout << j.dump(2) << '\n';
    } else if (*ev) {
      const auto pred = io::load_labels(ev_labels);
      metrics::GroundTruth gt{io::load_labels(ev_gt, {ev_zero_void}), std::nullopt};
      std::optional<metrics::DepthMap> depth_pred;
      if (!ev_depth_gt.empty()) gt.depth = harness::load_depth_csv(ev_depth_gt);
      if (!ev_depth_pred.empty()) depth_pred = harness::load_depth_csv(ev_depth_pred);
      if (gt.depth.has_value() != depth_pred.has_value()) {
        throw ConfigError("--depth-pred and --depth-gt must be given together");
      }
      const auto m = metrics::evaluate(pred, gt, depth_pred ? &*depth_pred : nullptr);
      std::cout << metrics_json(m).dump(2) << '\n';
    } else if (*sw) {
      harness::SweepConfig cfg;
      cfg.corpus = sw_corpus;
      cfg.out_dir = sw_out;
      for (const auto& b : sw_budgets) cfg.budgets.push_back(harness::parse_budget(b));
      for (const auto& p : sw_pipelines) cfg.pipelines.push_back(harness::parse_pipeline(p));
      cfg.seeds = sw_seeds;
      cfg.workers = sw_workers;
      cfg.record_timing = sw_timing;
      cfg.zero_is_void = sw_zero_void;
      cfg.compactness = sw_compactness;
      if (sw_mode == "spad") {
        cfg.sensor = sw_sensor.config();
      } else {
        cfg.sensor.reset();
      }
      const auto res = harness::run_sweep(cfg);
      std::cout << "wrote " << res.csv_path.string() << " (" << res.rows.size() << " rows, "
                << res.failed_rows << " failed)\n";
      return res.partial_failure() ? kExitPartial : kExitOk;
    } else if (*sy) {
      const auto ids = harness::synth_corpus(sy_count, sy_seed, sy_out, sy_opts);
      std::cout << "wrote " << ids.size() << " scenes to " << sy_out.string() << '\n';
    } else if (*rd) {
      const auto img = io::load_image(rd_input);
      const auto budget = harness::parse_budget(rd_budget);
      const auto pipeline = harness::parse_pipeline(rd_pipeline);
      const auto stem = stem_of(rd_input);
      std::vector<fs::path> files;
      if (pipeline == harness::Pipeline::kSuperCam) {
        files = harness::render_outputs(run_supercam(img, budget, std::nullopt, rd_seed), rd_out, stem);
      } else {
        files = harness::render_outputs(
            snic::run_snic_restricted(img, budget, pipeline == harness::Pipeline::kSnicBlur), rd_out, stem);
      }
      for (const auto& f : files) std::cout << f.string() << '\n';
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInvalid;
  }
  return kExitOk;
}

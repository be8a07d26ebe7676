// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The aofuse Authors

#include "aofuse/cli.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>

#include "CLI11.hpp"
#include "aofuse/parallel.hpp"
#include "aofuse/render.hpp"
#include "aofuse/rng.hpp"

namespace aofuse {

namespace fs = std::filesystem;

namespace {

void make_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create " + dir.string() + ": " + ec.message());
}

void write_json(const json& j, const fs::path& file) {
  std::ofstream out(file);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + file.string());
  out << j.dump(2) << '\n';
}

json read_json(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + file.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::BadConfig, file.string() + ": " + e.what());
  }
}

void log(const std::string& msg) { std::cerr << "aofuse: " << msg << '\n'; }

}  // namespace

void simulate_to(const RunConfig& cfg, const fs::path& out) {
  make_dir(out);
  generate_dataset(cfg.dataset, out);
  write_json(config_to_json(cfg), out / "config.json");
}

TrainResult reconstruct_to(const fs::path& dataset_dir, Mode mode, const RunConfig& cfg, std::uint64_t seed,
                           const fs::path& out, bool quiet) {
  const Dataset data = load_dataset(dataset_dir);
  make_dir(out);
  const int every = std::max(1, (cfg.train.iterations >= 0 ? cfg.train.iterations : cfg.train.loss.schedule.E_e) / 20);
  ProgressFn progress;
  if (!quiet) {
    progress = [every](const TrainReport::Row& r) {
      if (r.iteration % every != 0) return;
      char buf[200];
      std::snprintf(buf, sizeof(buf), "iter %5d  total %.5f  son %.5f  cam %.5f  eik %.5f  q %.1f", r.iteration,
                    r.loss.total, r.loss.sonar, r.loss.camera, r.loss.eikonal, r.q);
      log(buf);
    };
  }
  TrainResult res = reconstruct(data, mode, cfg.train, seed, progress);
  save_checkpoint(res.field, out / "field.ckpt");
  res.report.write_csv(out / "train.csv");
  try {
    write_ply(marching_cubes(res.field), out / "mesh.ply");
  } catch (const Error& e) {
    if (e.code() != ErrorCode::EmptyMesh) throw;
    if (!quiet) log("reconstruction has no surface; mesh.ply not written");
  }
  json run = {{"dataset", fs::absolute(dataset_dir).lexically_normal().string()},
              {"mode", to_string(mode)},
              {"seed", seed},
              {"iterations", res.report.rows.size()},
              {"diverged", res.report.diverged},
              {"config", config_to_json(cfg)}};
  if (res.report.diverged) run["divergence"] = res.report.divergence;
  // The thread count lives in timing.json so run.json does not depend on it.
  run["config"].erase("threads");
  write_json(run, out / "run.json");
  write_json({{"wall_seconds", res.report.wall_seconds}, {"threads", resolve_threads(cfg.train.threads)}},
             out / "timing.json");
  return res;
}

Evaluation evaluate_field(const FieldModel& field, const AnalyticScene& gt, const EvalConfig& eval,
                          std::uint64_t seed) {
  const Mesh mesh = marching_cubes(field);
  Evaluation ev;
  ev.metrics = chamfer_precision_recall(mesh, gt, eval.tau, eval.n_samples, seed);
  ev.axes = per_axis_errors(mesh, gt, eval.n_samples, seed, eval.bin_width, eval.n_bins);
  return ev;
}

std::string metrics_csv_header() {
  return "dataset,mode,seed,tau,chamfer_l1,precision,recall,recon_to_gt,gt_to_recon,n_samples\n";
}

std::string metrics_csv_row(const std::string& dataset, const std::string& mode, std::uint64_t seed, double tau,
                            const ReconMetrics& m) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), "%s,%s,%llu,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%zu\n", dataset.c_str(),
                mode.c_str(), static_cast<unsigned long long>(seed), tau, m.chamfer_l1, m.precision, m.recall,
                m.recon_to_gt, m.gt_to_recon, m.n_samples);
  return buf;
}

Dataset render_dataset(const FieldModel& field, const Manifest& manifest, const SamplingConfig& sampling,
                       int threads) {
  Dataset ds;
  ds.manifest = manifest;
  const auto& cam = manifest.camera;
  const auto& son = manifest.sonar;
  for (const auto& frame : manifest.frames) {
    CameraImage ci(cam, frame.camera_pose);
    parallel_for(static_cast<std::size_t>(cam.height), threads, [&](std::size_t row) {
      const int v = static_cast<int>(row);
      for (int u = 0; u < cam.width; ++u) {
        const Ray ray = camera_ray(cam, frame.camera_pose, u + 0.5, v + 0.5);
        const auto span = intersect_box(ray, field.lo, field.hi);
        if (!span) continue;
        const auto c = render_camera_pixel(field, ray, sampling.camera_samples, (*span)[0], (*span)[1]);
        for (int ch = 0; ch < 3; ++ch) ci.rgb[ci.index(u, v, ch)] = std::clamp(c[ch], 0.0, 1.0);
      }
    });
    SonarImage si(son, frame.sonar_pose);
    const auto phis = stratified_elevations(son.phi_min, son.phi_max, sampling.sonar_elevations);
    parallel_for(static_cast<std::size_t>(son.n_azimuth_bins), threads, [&](std::size_t col) {
      const int j = static_cast<int>(col);
      std::vector<BeamColumn> cols;
      for (double phi : phis) {
        cols.push_back(render_sonar_column(field, son, frame.sonar_pose, son.azimuth_center(j), phi,
                                           sampling.sonar_radial));
      }
      const auto bins = combine_columns(son, cols);
      for (int r = 0; r < son.n_range_bins; ++r) si.intensities[si.index(r, j)] = std::max(0.0, bins[r]);
    });
    ds.camera.push_back(std::move(ci));
    ds.sonar.push_back(std::move(si));
  }
  return ds;
}

namespace {

// The evaluation scene may come from a run config or a dataset manifest.
AnalyticScene load_scene(const fs::path& file) {
  const json j = read_json(file);
  if (j.is_object() && j.value("format", "") == "aofuse-dataset") {
    const Manifest m = manifest_from_json(j);
    if (!m.scene) throw Error(ErrorCode::BadConfig, file.string() + " has no ground-truth scene");
    return *m.scene;
  }
  auto res = validate_config_doc(j);
  if (!res.ok()) {
    std::string msg = file.string() + " is not a valid config:";
    for (const auto& v : res.violations) msg += "\n  " + v.pointer + ": " + v.message;
    throw Error(ErrorCode::BadConfig, msg);
  }
  return res.config->dataset.scene;
}

RunConfig config_or_default(const std::string& path) {
  if (path.empty()) return *validate_config_doc(json::object()).config;
  return load_config(path);
}

struct SweepCase {
  std::string name;
  RunConfig cfg;
};

std::vector<SweepCase> expand_sweep(const RunConfig& base, const std::string& kind) {
  std::vector<SweepCase> cases;
  if (kind == "baseline") {
    const double spacing = base.dataset.baseline / (base.dataset.n_poses - 1);
    for (double b : {1.2, 0.96, 0.72, 0.48, 0.24}) {
      RunConfig c = base;
      // Keep the pose spacing, move the scene with the trajectory centre.
      const Vec3 shift((b - base.dataset.baseline) * 0.5, 0.0, 0.0);
      std::vector<Primitive> prims = base.dataset.scene.primitives();
      for (auto& p : prims) p.pose.t += shift;
      c.dataset.scene = AnalyticScene(prims, base.dataset.scene.material());
      c.dataset.baseline = b;
      c.dataset.n_poses = std::max(2, static_cast<int>(std::lround(b / spacing)) + 1);
      char name[32];
      std::snprintf(name, sizeof(name), "baseline_%.2f", b);
      cases.push_back({name, c});
    }
  } else if (kind == "specularity") {
    for (double s : {1.0, 0.5, 0.1}) {
      RunConfig c = base;
      Material m = base.dataset.scene.material();
      m.C_dl = 0.0;
      m.C_sl = 1.0;
      m.sigma_alpha = s;
      c.dataset.scene = AnalyticScene(base.dataset.scene.primitives(), m);
      char name[32];
      std::snprintf(name, sizeof(name), "sigma_%.1f", s);
      cases.push_back({name, c});
    }
  } else {
    throw Error(ErrorCode::BadConfig, "sweep kind must be baseline or specularity");
  }
  return cases;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

void write_text(const fs::path& file, const std::string& text) {
  std::ofstream out(file);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + file.string());
  out << text;
}

}  // namespace

int dispatch(const std::vector<std::string>& args) {
  CLI::App app{"aofuse: acoustic-optical surface reconstruction toolkit"};
  app.require_subcommand(1);
  app.fallthrough();
  int threads = 0;
  app.add_option("--threads", threads, "worker count (default: AOFUSE_THREADS or all cores)")
      ->check(CLI::NonNegativeNumber);

  std::string config_path, out_path, dataset_path, checkpoint_path, scene_path, mode_name = "fused";
  std::uint64_t seed = 0;
  int iterations = -1;

  auto* sim = app.add_subcommand("simulate", "synthesize a camera + sonar dataset");
  sim->add_option("--config", config_path, "run config (JSON)")->check(CLI::ExistingFile);
  sim->add_option("--out", out_path, "dataset directory")->required();

  auto* rec = app.add_subcommand("reconstruct", "fit a field to a dataset");
  rec->add_option("--dataset", dataset_path, "dataset directory")->required();
  rec->add_option("--mode", mode_name, "fused|camera|sonar")
      ->check(CLI::IsMember({"fused", "camera", "sonar"}));
  rec->add_option("--config", config_path, "run config (JSON)")->check(CLI::ExistingFile);
  rec->add_option("--seed", seed, "training seed");
  rec->add_option("--iterations", iterations, "override the iteration count");
  rec->add_option("--out", out_path, "output directory")->required();

  auto* ren = app.add_subcommand("render", "render a checkpoint at every dataset pose");
  ren->add_option("--checkpoint", checkpoint_path, "field checkpoint")->required();
  ren->add_option("--dataset", dataset_path, "dataset directory")->required();
  ren->add_option("--config", config_path, "run config for sampling counts")->check(CLI::ExistingFile);
  ren->add_option("--out", out_path, "output directory")->required();

  double tau = kDefaultTau;
  std::string label = "dataset";
  std::string axes_path;
  std::size_t eval_samples = 0;
  auto* eva = app.add_subcommand("evaluate", "score a checkpoint against a ground-truth scene");
  eva->add_option("--checkpoint", checkpoint_path, "field checkpoint")->required();
  eva->add_option("--scene", scene_path, "run config or dataset manifest holding the scene")
      ->required()
      ->check(CLI::ExistingFile);
  eva->add_option("--tau", tau, "precision / recall threshold (m)")->check(CLI::PositiveNumber);
  eva->add_option("--samples", eval_samples, "surface samples per side");
  eva->add_option("--seed", seed, "sampling seed, also the seed column");
  eva->add_option("--mode", mode_name, "mode column");
  eva->add_option("--label", label, "dataset column");
  eva->add_option("--axes", axes_path, "per-axis histogram CSV");
  eva->add_option("--out", out_path, "metrics CSV")->required();

  std::size_t samples = 50000;
  double length_unit = 1e-3;
  auto* con = app.add_subcommand("conditioning", "two-view Monte Carlo conditioning study");
  con->add_option("--samples", samples, "number of draws")->check(CLI::PositiveNumber);
  con->add_option("--seed", seed, "seed");
  con->add_option("--length-unit", length_unit, "length unit in metres for the constraint matrices")
      ->check(CLI::PositiveNumber);
  con->add_option("--out", out_path, "output directory")->required();

  std::string kind, seeds_list = "0,1,2,3,4", modes_list;
  bool dry_run = false;
  auto* swp = app.add_subcommand("sweep", "baseline or specularity experiment grid");
  swp->add_option("--config", config_path, "base run config")->check(CLI::ExistingFile);
  swp->add_option("--kind", kind, "baseline|specularity")->required()->check(CLI::IsMember({"baseline", "specularity"}));
  swp->add_option("--seeds", seeds_list, "comma-separated training seeds");
  swp->add_option("--modes", modes_list, "comma-separated modes (default: all for baseline, fused for specularity)");
  swp->add_option("--iterations", iterations, "override the iteration count");
  swp->add_flag("--dry-run", dry_run, "only write the expanded configs");
  swp->add_option("--out", out_path, "output directory")->required();

  std::vector<std::string> argv_rev(args.rbegin(), args.rend());
  try {
    app.parse(argv_rev);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    std::cerr << app.help();
    return kExitUsage;
  }

  try {
    auto with_threads = [&](RunConfig c) {
      if (threads > 0) {
        c.train.threads = threads;
        c.dataset.threads = threads;
      }
      return c;
    };

    if (*sim) {
      const RunConfig cfg = with_threads(config_or_default(config_path));
      log("simulating " + std::to_string(cfg.dataset.n_poses) + " poses into " + out_path);
      simulate_to(cfg, out_path);
      return kExitOk;
    }
    if (*rec) {
      RunConfig cfg = with_threads(config_or_default(config_path));
      if (iterations >= 0) cfg.train.iterations = iterations;
      const Mode mode = parse_mode(mode_name);
      log(std::string("reconstructing (") + to_string(mode) + ", seed " + std::to_string(seed) + ")");
      const auto res = reconstruct_to(dataset_path, mode, cfg, seed, out_path);
      if (res.report.diverged) {
        log("training diverged: " + res.report.divergence + "; last good checkpoint written");
        return kExitRuntime;
      }
      return kExitOk;
    }
    if (*ren) {
      const RunConfig cfg = with_threads(config_or_default(config_path));
      const FieldModel field = load_checkpoint(checkpoint_path);
      const Manifest m = read_manifest(fs::path(dataset_path) / "manifest.json");
      make_dir(out_path);
      write_dataset(render_dataset(field, m, cfg.train.sampling, resolve_threads(cfg.train.threads)), out_path);
      return kExitOk;
    }
    if (*eva) {
      const FieldModel field = load_checkpoint(checkpoint_path);
      const AnalyticScene gt = load_scene(scene_path);
      EvalConfig ev;
      ev.tau = tau;
      if (eval_samples > 0) ev.n_samples = eval_samples;
      const auto res = evaluate_field(field, gt, ev, seed);
      const fs::path out(out_path);
      if (out.has_parent_path()) make_dir(out.parent_path());
      write_text(out, metrics_csv_header() + metrics_csv_row(label, mode_name, seed, tau, res.metrics));
      if (!axes_path.empty()) res.axes.write_csv(axes_path);
      char buf[160];
      std::snprintf(buf, sizeof(buf), "chamfer %.5f m  precision %.3f  recall %.3f", res.metrics.chamfer_l1,
                    res.metrics.precision, res.metrics.recall);
      log(buf);
      return kExitOk;
    }
    if (*con) {
      CondDistribution dist;
      dist.length_unit = length_unit;
      const auto s = monte_carlo_conditioning(samples, seed, dist, resolve_threads(threads));
      make_dir(out_path);
      write_kappa_histogram(s, fs::path(out_path) / "kappa_histogram.csv");
      write_kappa_medians(s, fs::path(out_path) / "kappa_medians.csv");
      write_kappa_samples(s, fs::path(out_path) / "kappa_samples.csv");
      char buf[200];
      std::snprintf(buf, sizeof(buf), "median kappa: camera %.4g  sonar %.4g  multi %.4g", s.median[0], s.median[1],
                    s.median[2]);
      log(buf);
      return kExitOk;
    }
    if (*swp) {
      RunConfig base = with_threads(config_or_default(config_path));
      if (iterations >= 0) base.train.iterations = iterations;
      std::vector<std::string> modes = split_list(modes_list);
      if (modes.empty()) modes = kind == "baseline" ? std::vector<std::string>{"fused", "camera", "sonar"}
                                                    : std::vector<std::string>{"fused"};
      std::vector<std::uint64_t> seeds;
      for (const auto& s : split_list(seeds_list)) {
        try {
          seeds.push_back(std::stoull(s));
        } catch (const std::exception&) {
          throw Error(ErrorCode::BadConfig, "bad seed '" + s + "'");
        }
      }
      for (const auto& m : modes) parse_mode(m);
      const fs::path out(out_path);
      make_dir(out);
      std::string csv = metrics_csv_header();
      for (const auto& c : expand_sweep(base, kind)) {
        const fs::path dir = out / c.name;
        make_dir(dir);
        write_json(config_to_json(c.cfg), dir / "config.json");
        if (dry_run) continue;
        log("sweep case " + c.name);
        simulate_to(c.cfg, dir / "dataset");
        for (const auto& m : modes) {
          for (auto s : seeds) {
            const fs::path run = dir / (m + "_s" + std::to_string(s));
            const auto res = reconstruct_to(dir / "dataset", parse_mode(m), c.cfg, s, run, true);
            ReconMetrics metrics;
            try {
              metrics = evaluate_field(res.field, c.cfg.dataset.scene, c.cfg.eval, s).metrics;
            } catch (const Error& e) {
              if (e.code() != ErrorCode::EmptyMesh) throw;
              metrics.chamfer_l1 = std::numeric_limits<double>::infinity();
            }
            csv += metrics_csv_row(c.name, m, s, c.cfg.eval.tau, metrics);
            log(c.name + " " + m + " seed " + std::to_string(s) + ": chamfer " + std::to_string(metrics.chamfer_l1));
          }
        }
      }
      if (!dry_run) write_text(out / "metrics.csv", csv);
      return kExitOk;
    }
  } catch (const Error& e) {
    log(e.what());
    return e.code() == ErrorCode::BadConfig ? kExitUsage : kExitRuntime;
  } catch (const std::exception& e) {
    log(e.what());
    return kExitRuntime;
  }
  std::cerr << app.help();
  return kExitUsage;
}

int dispatch(int argc, const char* const* argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return dispatch(args);
}

}  // namespace aofuse

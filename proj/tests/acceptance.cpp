// Acceptance checks. Each criterion prints one line:
//   criterion <n> <name>: PASS|FAIL  <detail>
// Exit status is 0 only if every selected criterion passes.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iterator>
#include <limits>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "aofuse/cli.hpp"
#include "aofuse/rng.hpp"
#include "train_fixtures.hpp"

using namespace aofuse;
using namespace aofuse::test;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::string s{std::istreambuf_iterator<char>(in), {}};
  // run.json names the dataset directory, which differs between run roots.
  if (p.filename() == "run.json" && !s.empty()) {
    auto j = json::parse(s);
    j.erase("dataset");
    s = j.dump();
  }
  return s;
}

fs::path work_root;

fs::path workdir(const std::string& name) {
  const fs::path d = work_root / name;
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

// Random draw in metres from the conditioning distribution.
struct Geometry {
  Mat3 R;
  Vec3 t, P;
  double f;
};

Geometry draw_geometry(std::uint64_t seed, std::uint64_t i) {
  const auto s = draw_conditioning_sample(seed, i, {});
  return {s.R, s.t, s.P, s.f};
}

// ---------------------------------------------------------------------------

Outcome conditioning() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto s = monte_carlo_conditioning(50000, 1, {}, 0);
  const double secs = seconds_since(t0);
  CondDistribution metres;
  metres.length_unit = 1.0;
  const auto sm = monte_carlo_conditioning(50000, 1, metres, 0);
  const auto& m = s.median;
  const bool pass = m[2] < m[1] && m[2] < m[0] && m[2] < 0.5 * m[0] && secs < 60.0;
  return {pass, fmt("median kappa (mm) cam %.4g son %.4g multi %.4g; (m) cam %.4g son %.4g multi %.4g; "
                    "degenerate %zu/%zu/%zu; %.1f s",
                    m[0], m[1], m[2], sm.median[0], sm.median[1], sm.median[2], s.degenerate[0], s.degenerate[1],
                    s.degenerate[2], secs)};
}

Outcome residuals() {
  std::array<double, 7> worst{};
  for (std::uint64_t i = 0; i < 10000; ++i) {
    const auto g = draw_geometry(2, i);
    const auto sys = build_constraints(observe_two_view(g.f, g.R, g.t, g.P), g.f, g.R, g.t);
    const Eigen::Matrix<double, 7, 1> r = sys.A * g.P - sys.b;
    for (int k = 0; k < 7; ++k) worst[k] = std::max(worst[k], std::abs(r[k]));
  }
  const double w = *std::max_element(worst.begin(), worst.end());
  std::string rows;
  for (int k = 0; k < 7; ++k) rows += fmt(" %.1e", worst[k]);
  return {w < 1e-10, "max |A_i P - b_i| per row:" + rows};
}

Outcome triangulation() {
  double worst = 0.0;
  int used = 0;
  for (std::uint64_t i = 0; used < 1000; ++i) {
    const auto g = draw_geometry(3, i);
    const auto sys = build_constraints(observe_two_view(g.f, g.R, g.t, g.P), g.f, g.R, g.t);
    if (!(condition_number(sys.rows_A(Modality::Multi)) < 1e6)) continue;
    ++used;
    worst = std::max(worst, (triangulate(sys, Modality::Multi) - g.P).norm() / g.P.norm());
  }
  std::vector<double> em, ec;
  Rng noise(4);
  for (std::uint64_t i = 0; em.size() < 1000; ++i) {
    const auto g = draw_geometry(5, i);
    auto obs = observe_two_view(g.f, g.R, g.t, g.P);
    for (double* v : {&obs.xc1, &obs.yc1, &obs.range1, &obs.theta1, &obs.xc2, &obs.yc2, &obs.range2, &obs.theta2})
      *v += 1e-4 * noise.normal();
    try {
      const auto sys = build_constraints(obs, g.f, g.R, g.t);
      const double a = (triangulate(sys, Modality::Multi) - g.P).norm();
      const double b = (triangulate(sys, Modality::Camera) - g.P).norm();
      em.push_back(a);
      ec.push_back(b);
    } catch (const Error&) {
    }
  }
  const double mm = median(em), mc = median(ec);
  return {worst < 1e-9 && mm <= mc,
          fmt("noiseless max rel err %.2e over %d draws; noisy median err multi %.3e m, camera %.3e m", worst, used,
              mm, mc)};
}

Outcome gradients() {
  const auto t0 = std::chrono::steady_clock::now();
  int cases = 0, bad = 0;
  double worst = 0.0;
  std::array<std::size_t, 4> classes{};
  const Mode modes[] = {Mode::Fused, Mode::Camera, Mode::Sonar};
  for (std::uint64_t seed = 1; seed <= 8; ++seed) {
    for (Mode mode : modes) {
      auto p = tiny_problem(100 + seed, 4 + static_cast<int>(seed % 5));
      const auto r = check_loss_gradient(p, mode, seed, static_cast<int>(seed * 7));
      ++cases;
      if (r.failures) ++bad;
      worst = std::max(worst, r.max_rel);
      for (int k = 0; k < 4; ++k) classes[k] += r.nonzero[k];
    }
  }
  const double secs = seconds_since(t0);
  const bool all_classes = std::all_of(classes.begin(), classes.end(), [](auto n) { return n > 0; });
  return {bad == 0 && cases >= 20 && all_classes && secs < 30.0,
          fmt("%d cases, %d failing, max rel err %.2e, checked sdf/acoustic/optical/log_q %zu/%zu/%zu/%zu, %.1f s",
              cases, bad, worst, classes[0], classes[1], classes[2], classes[3], secs)};
}

Ray random_ray(const FieldModel& f, Rng& rng) {
  const Vec3 o(rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1), 0.0);
  const Vec3 target = f.lo + (f.hi - f.lo).cwiseProduct(Vec3(rng.uniform(), rng.uniform(), rng.uniform()));
  return {o, (target - o).normalized()};
}

Outcome renderer() {
  Rng rng(6);
  long alpha_bad = 0, t_bad = 0, sum_bad = 0, marches = 0;
  double worst_sum = 0.0, worst_rel = 0.0;
  int compared = 0;
  FieldModel f;
  auto check = [&](const MarchState& m) {
    ++marches;
    double sum = 0.0;
    for (std::size_t i = 0; i < m.intervals(); ++i) {
      if (!(m.alpha(i) >= 0.0 && m.alpha(i) <= 1.0)) ++alpha_bad;
      if (i > 0 && m.T[i] > m.T[i - 1]) ++t_bad;
      sum += m.weight(i);
    }
    worst_sum = std::max(worst_sum, sum);
    if (!(sum <= 1.0 + 1e-9)) ++sum_bad;
  };
  for (int k = 0; k < 10000; ++k) {
    if (k % 100 == 0) {
      const int n = 3 + static_cast<int>(rng.below(6));
      f = random_render_field(rng, {n, n, n}, Vec3(-0.4, -0.4, 0.6), Vec3(0.4, 0.4, 1.5));
    }
    if (k % 2 == 0) {
      const Ray ray = random_ray(f, rng);
      const auto span = intersect_box(ray, f.lo, f.hi);
      if (!span || (*span)[1] - (*span)[0] < 1e-9) continue;
      check(trace_camera(f, ray, 8 + static_cast<int>(rng.below(120)), (*span)[0], (*span)[1], &rng).march);
    } else {
      const SonarModel son = test_sonar(4 + static_cast<int>(rng.below(20)), 4);
      Pose pose;
      pose.R = rotation_ypr(rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1));
      pose.t = Vec3(rng.uniform(-0.05, 0.05), rng.uniform(-0.05, 0.05), rng.uniform(-0.05, 0.05));
      const int n_radial = 8 + static_cast<int>(rng.below(120));
      const double theta = son.azimuth_center(static_cast<int>(rng.below(4)));
      const double phi = rng.uniform(son.phi_min, son.phi_max);
      const auto col = render_sonar_column(f, son, pose, theta, phi, n_radial, &rng);
      check(col.march);
      if (k % 20 == 1) {
        const int n_phi = 1 + static_cast<int>(rng.below(4));
        std::vector<BeamColumn> cols;
        for (double ph : stratified_elevations(son.phi_min, son.phi_max, n_phi))
          cols.push_back(render_sonar_column(f, son, pose, theta, ph, n_radial));
        const auto bins = combine_columns(son, cols);
        for (int r = 0; r < son.n_range_bins; ++r) {
          const double ref = render_sonar_pixel(f, son, pose, r, theta, n_phi, n_radial);
          const double scale = std::max(std::abs(ref), std::abs(bins[r]));
          if (scale > 0) worst_rel = std::max(worst_rel, std::abs(bins[r] - ref) / scale);
          ++compared;
        }
      }
    }
  }
  const bool pass = alpha_bad == 0 && t_bad == 0 && sum_bad == 0 && worst_rel < 1e-9 && marches > 9000;
  return {pass, fmt("%ld marches: alpha out of range %ld, T increases %ld, max sum T*alpha %.12f; "
                    "column vs per-pixel max rel diff %.2e over %d bins",
                    marches, alpha_bad, t_bad, worst_sum, worst_rel, compared)};
}

// Default run config for the desk-scale reconstruction experiments.
RunConfig experiment_config() { return *validate_config("{}").config; }

double chamfer_of(const FieldModel& field, const RunConfig& cfg, std::uint64_t seed) {
  try {
    return evaluate_field(field, cfg.dataset.scene, cfg.eval, seed).metrics.chamfer_l1;
  } catch (const Error& e) {
    if (e.code() != ErrorCode::EmptyMesh) throw;
    return std::numeric_limits<double>::infinity();
  }
}

struct SeedRuns {
  std::vector<double> chamfer;
  double max_seconds = 0.0;
};

SeedRuns run_seeds(const Dataset& data, Mode mode, const RunConfig& cfg, int n_seeds, const std::string& label) {
  SeedRuns out;
  for (int s = 0; s < n_seeds; ++s) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto res = reconstruct(data, mode, cfg.train, static_cast<std::uint64_t>(s));
    out.max_seconds = std::max(out.max_seconds, seconds_since(t0));
    out.chamfer.push_back(res.report.diverged ? std::numeric_limits<double>::infinity()
                                              : chamfer_of(res.field, cfg, static_cast<std::uint64_t>(s)));
    std::fprintf(stderr, "  %s seed %d: chamfer %.5f (%.0f s)\n", label.c_str(), s, out.chamfer.back(),
                 seconds_since(t0));
  }
  return out;
}

Outcome fusion() {
  const RunConfig cfg = experiment_config();
  const fs::path dir = workdir("fusion");
  generate_dataset(cfg.dataset, dir / "data");
  const Dataset data = load_dataset(dir / "data");
  const auto fused = run_seeds(data, Mode::Fused, cfg, 5, "fused");
  const auto cam = run_seeds(data, Mode::Camera, cfg, 5, "camera");
  const auto son = run_seeds(data, Mode::Sonar, cfg, 5, "sonar");
  const double mf = median(fused.chamfer), mc = median(cam.chamfer), ms = median(son.chamfer);
  const double slowest = std::max({fused.max_seconds, cam.max_seconds, son.max_seconds});
  return {mf < mc && mf < ms && slowest < 900.0,
          fmt("median chamfer fused %.5f, camera %.5f, sonar %.5f m; slowest run %.0f s", mf, mc, ms, slowest)};
}

bool same_field(const FieldModel& a, const FieldModel& b) {
  return a.shape == b.shape && a.sdf == b.sdf && a.acoustic == b.acoustic && a.optical == b.optical &&
         a.log_q == b.log_q;
}

RunConfig small_config() {
  return *validate_config(R"({
    "camera": {"width": 32, "height": 24, "pixel_pitch": 0.0025},
    "sonar": {"n_range_bins": 48, "n_azimuth_bins": 24},
    "trajectory": {"n_poses": 6},
    "simulation": {"n_phi": 32},
    "field": {"resolution": 24},
    "sampling": {"camera_rays": 128, "sonar_bins": 96, "camera_samples": 32, "sonar_elevations": 8,
                 "sonar_radial": 48, "eikonal_uniform": 128},
    "training": {"iterations": 150}})")
              .config;
}

Outcome collapse() {
  RunConfig cfg = small_config();
  const fs::path dir = workdir("collapse");
  generate_dataset(cfg.dataset, dir / "data");
  const Dataset data = load_dataset(dir / "data");
  bool ok = true;
  std::string detail;
  for (double a : {1.0, 0.0}) {
    RunConfig fused = cfg;
    fused.train.loss.schedule = {ScheduleMode::Constant, a, a, 0, fused.train.loss.schedule.E_e};
    const Mode single = a == 1.0 ? Mode::Sonar : Mode::Camera;
    for (std::uint64_t seed : {0, 7}) {
      const auto f = reconstruct(data, Mode::Fused, fused.train, seed);
      const auto s = reconstruct(data, single, cfg.train, seed);
      bool same = same_field(f.field, s.field) && f.report.rows.size() == s.report.rows.size();
      for (std::size_t i = 0; same && i < f.report.rows.size(); ++i)
        same = f.report.rows[i].loss.total == s.report.rows[i].loss.total;
      ok = ok && same;
      detail += fmt("alpha=%g vs %s seed %llu: %s; ", a, to_string(single), static_cast<unsigned long long>(seed),
                    same ? "identical" : "DIFFERENT");
    }
  }
  return {ok, detail + fmt("%d iterations each", cfg.train.iterations)};
}

Outcome specularity() {
  std::vector<double> med;
  std::string detail;
  double slowest = 0.0;
  for (double sigma : {1.0, 0.1}) {
    RunConfig cfg = experiment_config();
    Material m = cfg.dataset.scene.material();
    m.C_dl = 0.0;
    m.C_sl = 1.0;
    m.sigma_alpha = sigma;
    cfg.dataset.scene = AnalyticScene(cfg.dataset.scene.primitives(), m);
    const fs::path dir = workdir(fmt("specularity_%.1f", sigma));
    generate_dataset(cfg.dataset, dir / "data");
    const Dataset data = load_dataset(dir / "data");
    const auto runs = run_seeds(data, Mode::Fused, cfg, 5, fmt("sigma %.1f", sigma));
    med.push_back(median(runs.chamfer));
    slowest = std::max(slowest, runs.max_seconds);
    detail += fmt("sigma_alpha %.1f median chamfer %.5f m; ", sigma, med.back());
  }
  return {med[0] <= med[1], detail + fmt("slowest run %.0f s", slowest)};
}

Outcome metrics() {
  Rng rng(9);
  long mismatches = 0, queries = 0;
  for (int inst = 0; inst < 20; ++inst) {
    std::vector<Vec3> pts(500);
    for (auto& p : pts) p = Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    const KdTree tree(pts);
    for (int q = 0; q < 500; ++q) {
      const Vec3 x(rng.uniform(-1.2, 1.2), rng.uniform(-1.2, 1.2), rng.uniform(-1.2, 1.2));
      const auto a = tree.nearest(x);
      const auto b = nearest_brute_force(pts, x);
      ++queries;
      if (a.first != b.first || a.second != b.second) ++mismatches;
    }
  }
  auto f = field_from(Vec3::Constant(-1), Vec3::Constant(1), {32, 32, 32}, [](const Vec3& x) { return x.norm() - 0.5; });
  const Mesh mesh = marching_cubes(f);
  const auto same = chamfer_precision_recall(mesh, mesh, kDefaultTau, EvalConfig{}.n_samples, 1);
  std::vector<Vec3> pts(500);
  for (auto& p : pts) p = Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
  const auto ident = point_metrics(pts, pts, kDefaultTau);
  const bool pass = mismatches == 0 && same.precision == 1.0 && same.recall == 1.0 && ident.precision == 1.0 &&
                    ident.recall == 1.0 && ident.chamfer_l1 == 0.0;
  return {pass, fmt("%ld/%ld kd-tree mismatches; identical mesh P=%.3f R=%.3f; identical points P=%.3f R=%.3f "
                    "chamfer %.1e",
                    mismatches, queries, same.precision, same.recall, ident.precision, ident.recall,
                    ident.chamfer_l1)};
}

Outcome determinism() {
  const RunConfig base = experiment_config();
  const std::vector<std::string> files{"data/manifest.json", "data/cam/0000.ppm", "data/cam/0023.ppm",
                                       "data/son/0000.pfm",  "data/son/0023.pfm", "rec/field.ckpt",
                                       "rec/train.csv",      "rec/run.json",      "metrics.csv"};
  std::vector<fs::path> dirs;
  for (int threads : {1, 2}) {
    for (int rep = 0; rep < 2; ++rep) {
      RunConfig cfg = base;
      cfg.dataset.threads = threads;
      cfg.train.threads = threads;
      const fs::path dir = workdir(fmt("determinism_t%d_%d", threads, rep));
      simulate_to(cfg, dir / "data");
      const auto res = reconstruct_to(dir / "data", Mode::Fused, cfg, 11, dir / "rec", true);
      const auto ev = evaluate_field(res.field, cfg.dataset.scene, cfg.eval, 11);
      std::ofstream(dir / "metrics.csv") << metrics_csv_header()
                                         << metrics_csv_row("default", "fused", 11, cfg.eval.tau, ev.metrics);
      dirs.push_back(dir);
    }
  }
  int differing = 0;
  std::string which;
  for (const auto& f : files) {
    const std::string ref = slurp(dirs[0] / f);
    bool same = !ref.empty();
    for (std::size_t i = 1; i < dirs.size(); ++i) same = same && slurp(dirs[i] / f) == ref;
    if (!same) {
      ++differing;
      which += " " + f;
    }
  }
  return {differing == 0, fmt("%zu files compared across 2 runs x threads {1, 2}, %d differ", files.size(),
                              differing) + which};
}

struct Criterion {
  int id;
  const char* name;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"aofuse acceptance checks"};
  int only = 0;
  std::string root = (fs::temp_directory_path() / "aofuse_acceptance").string();
  app.add_option("--only", only, "run a single criterion (1-10)");
  app.add_option("--workdir", root, "scratch directory");
  CLI11_PARSE(app, argc, argv);
  work_root = root;

  const std::vector<Criterion> all{
      {1, "conditioning", conditioning}, {2, "residuals", residuals},     {3, "triangulation", triangulation},
      {4, "gradients", gradients},       {5, "renderer", renderer},       {6, "fusion", fusion},
      {7, "collapse", collapse},         {8, "specularity", specularity}, {9, "metrics", metrics},
      {10, "determinism", determinism}};

  bool all_pass = true;
  for (const auto& c : all) {
    if (only && c.id != only) continue;
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("criterion %d %s: %s  %s\n", c.id, c.name, o.pass ? "PASS" : "FAIL", o.detail.c_str());
    std::fflush(stdout);
    all_pass = all_pass && o.pass;
  }
  return all_pass ? 0 : 1;
}

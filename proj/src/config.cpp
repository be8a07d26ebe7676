// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The aofuse Authors

#include "aofuse/config.hpp"

#include <fstream>
#include <functional>
#include <initializer_list>
#include <sstream>

namespace aofuse {

namespace {

std::string escape(const std::string& key) {
  std::string out;
  for (char c : key) {
    if (c == '~') out += "~0";
    else if (c == '/') out += "~1";
    else out += c;
  }
  return out;
}

class Checker {
 public:
  explicit Checker(std::vector<ConfigViolation>& out) : out_(out) {}

  void fail(const std::string& path, const std::string& msg) { out_.push_back({path, msg}); }

  /// Object member `key` of `parent`, or nullptr if absent or wrong type.
  const json* object(const json* parent, const std::string& path, const char* key) {
    if (!parent || !parent->contains(key)) return nullptr;
    const json& j = (*parent)[key];
    if (!j.is_object()) {
      fail(path + "/" + key, "must be an object");
      return nullptr;
    }
    return &j;
  }

  void known_keys(const json* obj, const std::string& path, std::initializer_list<const char*> keys) {
    if (!obj) return;
    for (const auto& [k, v] : obj->items()) {
      bool found = false;
      for (const char* allowed : keys) found = found || k == allowed;
      if (!found) fail(path + "/" + escape(k), "unknown key");
    }
  }

  double number(const json* parent, const std::string& path, const char* key, double def,
                const std::function<bool(double)>& ok = {}, const char* rule = nullptr) {
    if (!parent || !parent->contains(key)) return def;
    const json& j = (*parent)[key];
    const std::string p = path + "/" + key;
    if (!j.is_number()) {
      fail(p, "must be a number");
      return def;
    }
    const double v = j.get<double>();
    if (!std::isfinite(v)) {
      fail(p, "must be finite");
      return def;
    }
    if (ok && !ok(v)) {
      fail(p, rule ? rule : "out of range");
      return def;
    }
    return v;
  }

  long long integer(const json* parent, const std::string& path, const char* key, long long def,
                    const std::function<bool(long long)>& ok = {}, const char* rule = nullptr) {
    if (!parent || !parent->contains(key)) return def;
    const json& j = (*parent)[key];
    const std::string p = path + "/" + key;
    if (!j.is_number_integer()) {
      fail(p, "must be an integer");
      return def;
    }
    const long long v = j.get<long long>();
    if (ok && !ok(v)) {
      fail(p, rule ? rule : "out of range");
      return def;
    }
    return v;
  }

  std::string string(const json* parent, const std::string& path, const char* key, const std::string& def) {
    if (!parent || !parent->contains(key)) return def;
    const json& j = (*parent)[key];
    if (!j.is_string()) {
      fail(path + "/" + key, "must be a string");
      return def;
    }
    return j.get<std::string>();
  }

  /// Fixed-length numeric array.
  std::optional<std::vector<double>> numbers(const json& j, const std::string& path, std::size_t min_len,
                                             std::size_t max_len) {
    if (!j.is_array() || j.size() < min_len || j.size() > max_len) {
      fail(path, min_len == max_len ? "must be an array of " + std::to_string(min_len) + " numbers"
                                    : "must be an array of " + std::to_string(min_len) + " to " +
                                          std::to_string(max_len) + " numbers");
      return std::nullopt;
    }
    std::vector<double> v;
    for (std::size_t i = 0; i < j.size(); ++i) {
      if (!j[i].is_number() || !std::isfinite(j[i].get<double>())) {
        fail(path + "/" + std::to_string(i), "must be a finite number");
        return std::nullopt;
      }
      v.push_back(j[i].get<double>());
    }
    return v;
  }

 private:
  std::vector<ConfigViolation>& out_;
};

auto positive = [](double v) { return v > 0.0; };
auto non_negative = [](double v) { return v >= 0.0; };
auto unit_interval = [](double v) { return v >= 0.0 && v <= 1.0; };
auto at_least = [](long long lo) { return [lo](long long v) { return v >= lo; }; };

json vec(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

}  // namespace

json default_scene_json() {
  return {{"anchor", "target"},
          {"primitives",
           json::array({{{"shape", "sphere"}, {"center", {-0.07, -0.04, 0.0}}, {"dims", {0.12}}},
                        {{"shape", "box"},
                         {"center", {0.09, 0.05, 0.03}},
                         {"rotation_ypr", {0.5, 0.0, 0.0}},
                         {"dims", {0.07, 0.07, 0.07}}}})},
          {"material", {{"C_dl", 1.0}, {"C_sl", 0.0}, {"sigma_alpha", 0.5}, {"optical_albedo", {0.8, 0.8, 0.8}}}}};
}

ConfigResult validate_config(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    return {std::nullopt, {{"", std::string("invalid JSON: ") + e.what()}}};
  }
  return validate_config_doc(doc);
}

ConfigResult validate_config_doc(const json& doc) {
  ConfigResult res;
  auto& errs = res.violations;
  Checker c(errs);
  if (!doc.is_object()) {
    errs.push_back({"", "config must be a JSON object"});
    return res;
  }
  RunConfig cfg;
  cfg.dataset.sonar.E_e = kRunSonarEnergy;
  const json* root = &doc;
  c.known_keys(root, "", {"scene", "camera", "sonar", "trajectory", "noise", "simulation", "loss", "optimizer",
                          "sampling", "field", "training", "evaluation", "seed", "threads"});

  // Seed and threads.
  if (doc.contains("seed")) {
    const json& s = doc["seed"];
    if (s.is_number_unsigned() || (s.is_number_integer() && s.get<long long>() >= 0)) {
      cfg.seed = s.get<std::uint64_t>();
    } else {
      c.fail("/seed", "must be a non-negative integer");
    }
  }
  const int threads = static_cast<int>(c.integer(root, "", "threads", 0, at_least(0), "must be >= 0"));

  // Sensors.
  const json* cam = c.object(root, "", "camera");
  c.known_keys(cam, "/camera", {"f", "width", "height", "pixel_pitch", "cx", "cy"});
  CameraModel& cm = cfg.dataset.camera;
  cm.f = c.number(cam, "/camera", "f", cm.f, positive, "must be > 0");
  cm.width = static_cast<int>(c.integer(cam, "/camera", "width", cm.width, at_least(1), "must be >= 1"));
  cm.height = static_cast<int>(c.integer(cam, "/camera", "height", cm.height, at_least(1), "must be >= 1"));
  cm.pixel_pitch = c.number(cam, "/camera", "pixel_pitch", cm.pixel_pitch, positive, "must be > 0");
  cm.cx = c.number(cam, "/camera", "cx", 0.5 * cm.width);
  cm.cy = c.number(cam, "/camera", "cy", 0.5 * cm.height);

  const json* son = c.object(root, "", "sonar");
  c.known_keys(son, "/sonar",
               {"r_min", "r_max", "n_range_bins", "azimuth_fov", "n_azimuth_bins", "phi_min", "phi_max", "E_e"});
  SonarModel& sm = cfg.dataset.sonar;
  sm.r_min = c.number(son, "/sonar", "r_min", sm.r_min, positive, "must be > 0");
  sm.r_max = c.number(son, "/sonar", "r_max", sm.r_max, positive, "must be > 0");
  if (sm.r_max <= sm.r_min) c.fail("/sonar/r_max", "must exceed r_min");
  sm.n_range_bins = static_cast<int>(c.integer(son, "/sonar", "n_range_bins", sm.n_range_bins, at_least(1), "must be >= 1"));
  sm.azimuth_fov = c.number(son, "/sonar", "azimuth_fov", sm.azimuth_fov,
                            [](double v) { return v > 0.0 && v < kPi; }, "must be in (0, pi) radians");
  sm.n_azimuth_bins =
      static_cast<int>(c.integer(son, "/sonar", "n_azimuth_bins", sm.n_azimuth_bins, at_least(1), "must be >= 1"));
  auto elevation = [](double v) { return std::abs(v) < 0.5 * kPi; };
  sm.phi_min = c.number(son, "/sonar", "phi_min", sm.phi_min, elevation, "must be within (-pi/2, pi/2)");
  sm.phi_max = c.number(son, "/sonar", "phi_max", sm.phi_max, elevation, "must be within (-pi/2, pi/2)");
  if (sm.phi_max <= sm.phi_min) c.fail("/sonar/phi_max", "must exceed phi_min");
  sm.E_e = c.number(son, "/sonar", "E_e", sm.E_e, positive, "must be > 0");

  // Trajectory, noise, simulation.
  const json* traj = c.object(root, "", "trajectory");
  c.known_keys(traj, "/trajectory", {"baseline", "n_poses", "standoff"});
  DatasetSpec& ds = cfg.dataset;
  ds.baseline = c.number(traj, "/trajectory", "baseline", ds.baseline, positive, "must be > 0");
  ds.n_poses = static_cast<int>(c.integer(traj, "/trajectory", "n_poses", ds.n_poses, at_least(2), "must be >= 2"));
  ds.standoff = c.number(traj, "/trajectory", "standoff", ds.standoff, positive, "must be > 0");

  const json* noise = c.object(root, "", "noise");
  c.known_keys(noise, "/noise", {"camera_std", "sonar_std"});
  ds.noise.camera_std = c.number(noise, "/noise", "camera_std", 0.0, non_negative, "must be >= 0");
  ds.noise.sonar_std = c.number(noise, "/noise", "sonar_std", 0.0, non_negative, "must be >= 0");

  const json* sim = c.object(root, "", "simulation");
  c.known_keys(sim, "/simulation", {"n_phi", "roi_padding"});
  ds.n_phi = static_cast<int>(c.integer(sim, "/simulation", "n_phi", ds.n_phi, at_least(1), "must be >= 1"));
  ds.roi_padding = c.number(sim, "/simulation", "roi_padding", ds.roi_padding, non_negative, "must be >= 0");

  // Scene.
  json scene_default = default_scene_json();
  const json* scene = c.object(root, "", "scene");
  c.known_keys(scene, "/scene", {"anchor", "primitives", "material"});
  const std::string anchor = c.string(scene, "/scene", "anchor", "target");
  if (anchor != "target" && anchor != "world") c.fail("/scene/anchor", "must be \"target\" or \"world\"");
  const Vec3 offset = anchor == "target" ? Vec3(0.5 * ds.baseline, 0.0, ds.standoff) : Vec3::Zero();
  const json& prims_j = (scene && scene->contains("primitives")) ? (*scene)["primitives"] : scene_default["primitives"];
  std::vector<Primitive> prims;
  if (!prims_j.is_array() || prims_j.empty()) {
    c.fail("/scene/primitives", "must be a nonempty array");
  } else {
    for (std::size_t i = 0; i < prims_j.size(); ++i) {
      const std::string p = "/scene/primitives/" + std::to_string(i);
      const json& pj = prims_j[i];
      if (!pj.is_object()) {
        c.fail(p, "must be an object");
        continue;
      }
      c.known_keys(&pj, p, {"shape", "center", "rotation_ypr", "pose", "dims"});
      Primitive prim;
      bool good = true;
      const auto shape = parse_shape(c.string(&pj, p, "shape", ""));
      if (!shape) {
        c.fail(p + "/shape", "must be one of sphere, box, torus, capsule");
        good = false;
      } else {
        prim.shape = *shape;
      }
      if (pj.contains("pose")) {
        if (pj.contains("center") || pj.contains("rotation_ypr")) c.fail(p + "/pose", "conflicts with center/rotation_ypr");
        if (auto m = c.numbers(pj["pose"], p + "/pose", 16, 16)) {
          std::array<double, 16> a;
          std::copy(m->begin(), m->end(), a.begin());
          prim.pose = Pose::from_matrix(a);
          if (!prim.pose.is_valid(1e-6)) {
            c.fail(p + "/pose", "rotation is not orthonormal");
            good = false;
          }
        } else {
          good = false;
        }
      } else {
        if (pj.contains("center")) {
          if (auto v = c.numbers(pj["center"], p + "/center", 3, 3)) prim.pose.t = Vec3((*v)[0], (*v)[1], (*v)[2]);
          else good = false;
        }
        if (pj.contains("rotation_ypr")) {
          if (auto v = c.numbers(pj["rotation_ypr"], p + "/rotation_ypr", 3, 3)) {
            prim.pose.R = rotation_ypr((*v)[0], (*v)[1], (*v)[2]);
          } else {
            good = false;
          }
        }
      }
      prim.pose.t += offset;
      if (!pj.contains("dims")) {
        c.fail(p + "/dims", "is required");
        good = false;
      } else if (auto v = c.numbers(pj["dims"], p + "/dims", 1, 3)) {
        prim.dims = Vec3::Zero();
        for (std::size_t k = 0; k < v->size(); ++k) prim.dims[static_cast<Eigen::Index>(k)] = (*v)[k];
        if (good && !prim.is_valid()) {
          c.fail(p + "/dims", "invalid dimensions for this shape");
          good = false;
        }
      } else {
        good = false;
      }
      if (good) prims.push_back(prim);
    }
  }
  const json* mat = c.object(scene, "/scene", "material");
  c.known_keys(mat, "/scene/material", {"C_dl", "C_sl", "sigma_alpha", "optical_albedo"});
  Material material;
  material.C_dl = c.number(mat, "/scene/material", "C_dl", material.C_dl, non_negative, "must be >= 0");
  material.C_sl = c.number(mat, "/scene/material", "C_sl", material.C_sl, non_negative, "must be >= 0");
  material.sigma_alpha = c.number(mat, "/scene/material", "sigma_alpha", material.sigma_alpha, positive, "must be > 0");
  if (mat && mat->contains("optical_albedo")) {
    if (auto v = c.numbers((*mat)["optical_albedo"], "/scene/material/optical_albedo", 3, 3)) {
      for (int k = 0; k < 3; ++k) {
        if (!unit_interval((*v)[k])) c.fail("/scene/material/optical_albedo/" + std::to_string(k), "must be in [0, 1]");
        else material.optical_albedo[k] = (*v)[k];
      }
    }
  }
  ds.scene = AnalyticScene(prims, material);

  // Loss and schedule.
  TrainConfig& tc = cfg.train;
  const json* loss = c.object(root, "", "loss");
  c.known_keys(loss, "/loss", {"lambda_eik", "lambda_reg", "schedule"});
  tc.loss.lambda_eik = c.number(loss, "/loss", "lambda_eik", tc.loss.lambda_eik, non_negative, "must be >= 0");
  tc.loss.lambda_reg = c.number(loss, "/loss", "lambda_reg", tc.loss.lambda_reg, non_negative, "must be >= 0");
  const json* sched = c.object(loss, "/loss", "schedule");
  c.known_keys(sched, "/loss/schedule", {"mode", "alpha_start", "alpha_end", "E_t", "E_e"});
  Schedule& sc = tc.loss.schedule;
  const std::string mode = c.string(sched, "/loss/schedule", "mode", "step");
  try {
    sc.mode = parse_schedule_mode(mode);
  } catch (const Error&) {
    c.fail("/loss/schedule/mode", "must be constant, linear or step");
  }
  sc.alpha_start = c.number(sched, "/loss/schedule", "alpha_start", sc.alpha_start, unit_interval, "must be in [0, 1]");
  sc.alpha_end = c.number(sched, "/loss/schedule", "alpha_end", sc.alpha_end, unit_interval, "must be in [0, 1]");
  sc.E_t = static_cast<int>(c.integer(sched, "/loss/schedule", "E_t", sc.E_t, at_least(0), "must be >= 0"));
  sc.E_e = static_cast<int>(c.integer(sched, "/loss/schedule", "E_e", sc.E_e, at_least(1), "must be >= 1"));
  if (sc.E_t > sc.E_e) c.fail("/loss/schedule/E_t", "must not exceed E_e");

  const json* optim = c.object(root, "", "optimizer");
  c.known_keys(optim, "/optimizer", {"lr", "sdf_lr", "beta1", "beta2", "eps"});
  auto beta = [](double v) { return v >= 0.0 && v < 1.0; };
  tc.adam.lr = c.number(optim, "/optimizer", "lr", tc.adam.lr, positive, "must be > 0");
  tc.sdf_lr = c.number(optim, "/optimizer", "sdf_lr", tc.sdf_lr, positive, "must be > 0");
  tc.adam.beta1 = c.number(optim, "/optimizer", "beta1", tc.adam.beta1, beta, "must be in [0, 1)");
  tc.adam.beta2 = c.number(optim, "/optimizer", "beta2", tc.adam.beta2, beta, "must be in [0, 1)");
  tc.adam.eps = c.number(optim, "/optimizer", "eps", tc.adam.eps, positive, "must be > 0");

  const json* samp = c.object(root, "", "sampling");
  c.known_keys(samp, "/sampling",
               {"camera_rays", "sonar_bins", "camera_samples", "sonar_elevations", "sonar_radial", "eikonal_uniform"});
  SamplingConfig& sp = tc.sampling;
  auto count = [&](const char* key, int def, long long lo) {
    return static_cast<int>(c.integer(samp, "/sampling", key, def, at_least(lo), lo == 0 ? "must be >= 0"
                                                                                  : (lo == 1 ? "must be >= 1"
                                                                                             : "must be >= 2")));
  };
  sp.camera_rays = count("camera_rays", sp.camera_rays, 1);
  sp.sonar_bins = count("sonar_bins", sp.sonar_bins, 1);
  sp.camera_samples = count("camera_samples", sp.camera_samples, 2);
  sp.sonar_elevations = count("sonar_elevations", sp.sonar_elevations, 1);
  sp.sonar_radial = count("sonar_radial", sp.sonar_radial, 2);
  sp.eikonal_uniform = count("eikonal_uniform", sp.eikonal_uniform, 0);

  const json* field = c.object(root, "", "field");
  c.known_keys(field, "/field", {"resolution", "init"});
  if (field && field->contains("resolution")) {
    const json& r = (*field)["resolution"];
    if (r.is_number_integer() && r.get<long long>() >= 2 && r.get<long long>() <= 512) {
      const int n = r.get<int>();
      tc.resolution = {n, n, n};
    } else if (r.is_array() && r.size() == 3 && std::all_of(r.begin(), r.end(), [](const json& x) {
                 return x.is_number_integer() && x.get<long long>() >= 2 && x.get<long long>() <= 512;
               })) {
      tc.resolution = {r[0].get<int>(), r[1].get<int>(), r[2].get<int>()};
    } else {
      c.fail("/field/resolution", "must be an integer or 3 integers in [2, 512]");
    }
  }
  const json* init = c.object(field, "/field", "init");
  c.known_keys(init, "/field/init", {"radius_fraction", "acoustic", "optical", "q"});
  FieldInit& fi = tc.init;
  fi.radius_fraction = c.number(init, "/field/init", "radius_fraction", fi.radius_fraction,
                                [](double v) { return v > 0.0 && v < 1.0; }, "must be in (0, 1)");
  fi.acoustic = c.number(init, "/field/init", "acoustic", fi.acoustic, non_negative, "must be >= 0");
  fi.optical = c.number(init, "/field/init", "optical", fi.optical, unit_interval, "must be in [0, 1]");
  fi.q = c.number(init, "/field/init", "q", fi.q, positive, "must be > 0");

  const json* training = c.object(root, "", "training");
  c.known_keys(training, "/training", {"iterations", "checkpoint_every"});
  tc.iterations = static_cast<int>(c.integer(training, "/training", "iterations", -1, at_least(-1), "must be >= -1"));
  tc.checkpoint_every =
      static_cast<int>(c.integer(training, "/training", "checkpoint_every", tc.checkpoint_every, at_least(0), "must be >= 0"));

  const json* ev = c.object(root, "", "evaluation");
  c.known_keys(ev, "/evaluation", {"tau", "n_samples", "bin_width", "n_bins"});
  cfg.eval.tau = c.number(ev, "/evaluation", "tau", cfg.eval.tau, positive, "must be > 0");
  cfg.eval.n_samples = static_cast<std::size_t>(
      c.integer(ev, "/evaluation", "n_samples", static_cast<long long>(cfg.eval.n_samples), at_least(1), "must be >= 1"));
  cfg.eval.bin_width = c.number(ev, "/evaluation", "bin_width", cfg.eval.bin_width, positive, "must be > 0");
  cfg.eval.n_bins = static_cast<int>(c.integer(ev, "/evaluation", "n_bins", cfg.eval.n_bins, at_least(1), "must be >= 1"));

  ds.seed = cfg.seed;
  ds.threads = threads;
  tc.threads = threads;
  if (errs.empty()) res.config = std::move(cfg);
  return res;
}

json config_to_json(const RunConfig& cfg) {
  const auto& ds = cfg.dataset;
  const auto& tc = cfg.train;
  json prims = json::array();
  for (const auto& p : ds.scene.primitives()) {
    const auto m = p.pose.to_matrix();
    prims.push_back({{"shape", to_string(p.shape)}, {"pose", std::vector<double>(m.begin(), m.end())},
                     {"dims", vec(p.dims)}});
  }
  const auto& mat = ds.scene.material();
  json j;
  j["seed"] = cfg.seed;
  j["threads"] = ds.threads;
  j["scene"] = {{"anchor", "world"},
                {"primitives", prims},
                {"material",
                 {{"C_dl", mat.C_dl},
                  {"C_sl", mat.C_sl},
                  {"sigma_alpha", mat.sigma_alpha},
                  {"optical_albedo", {mat.optical_albedo[0], mat.optical_albedo[1], mat.optical_albedo[2]}}}}};
  j["camera"] = camera_to_json(ds.camera);
  j["sonar"] = sonar_to_json(ds.sonar);
  j["trajectory"] = {{"baseline", ds.baseline}, {"n_poses", ds.n_poses}, {"standoff", ds.standoff}};
  j["noise"] = {{"camera_std", ds.noise.camera_std}, {"sonar_std", ds.noise.sonar_std}};
  j["simulation"] = {{"n_phi", ds.n_phi}, {"roi_padding", ds.roi_padding}};
  const auto& s = tc.loss.schedule;
  j["loss"] = {{"lambda_eik", tc.loss.lambda_eik},
               {"lambda_reg", tc.loss.lambda_reg},
               {"schedule",
                {{"mode", to_string(s.mode)},
                 {"alpha_start", s.alpha_start},
                 {"alpha_end", s.alpha_end},
                 {"E_t", s.E_t},
                 {"E_e", s.E_e}}}};
  j["optimizer"] = {{"lr", tc.adam.lr}, {"sdf_lr", tc.sdf_lr}, {"beta1", tc.adam.beta1}, {"beta2", tc.adam.beta2}, {"eps", tc.adam.eps}};
  const auto& sp = tc.sampling;
  j["sampling"] = {{"camera_rays", sp.camera_rays},         {"sonar_bins", sp.sonar_bins},
                   {"camera_samples", sp.camera_samples},   {"sonar_elevations", sp.sonar_elevations},
                   {"sonar_radial", sp.sonar_radial},       {"eikonal_uniform", sp.eikonal_uniform}};
  j["field"] = {{"resolution", {tc.resolution.nx, tc.resolution.ny, tc.resolution.nz}},
                {"init",
                 {{"radius_fraction", tc.init.radius_fraction},
                  {"acoustic", tc.init.acoustic},
                  {"optical", tc.init.optical},
                  {"q", tc.init.q}}}};
  j["training"] = {{"iterations", tc.iterations}, {"checkpoint_every", tc.checkpoint_every}};
  j["evaluation"] = {{"tau", cfg.eval.tau},
                     {"n_samples", cfg.eval.n_samples},
                     {"bin_width", cfg.eval.bin_width},
                     {"n_bins", cfg.eval.n_bins}};
  return j;
}

RunConfig load_config(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw Error(ErrorCode::IoError, "cannot open config " + file.string());
  std::stringstream ss;
  ss << in.rdbuf();
  auto res = validate_config(std::string_view(ss.str()));
  if (!res.ok()) {
    std::string msg = file.string() + " has " + std::to_string(res.violations.size()) + " violation(s):";
    for (const auto& v : res.violations) msg += "\n  " + (v.pointer.empty() ? std::string("/") : v.pointer) + ": " + v.message;
    throw Error(ErrorCode::BadConfig, msg);
  }
  return *res.config;
}

}  // namespace aofuse

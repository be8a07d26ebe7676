// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The aofuse Authors

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "aofuse/cli.hpp"

namespace py = pybind11;
using namespace pybind11::literals;
using namespace aofuse;

namespace {

RunConfig parse_config(const std::string& text) {
  auto r = validate_config(text);
  if (r.ok()) return *r.config;
  std::string msg = "invalid config";
  for (const auto& v : r.violations)
    msg += "\n  " + (v.pointer.empty() ? std::string("/") : v.pointer) + ": " + v.message;
  throw Error(ErrorCode::BadConfig, msg);
}

py::dict metrics_dict(const ReconMetrics& m) {
  return py::dict("chamfer_l1"_a = m.chamfer_l1, "precision"_a = m.precision, "recall"_a = m.recall,
                  "recon_to_gt"_a = m.recon_to_gt, "gt_to_recon"_a = m.gt_to_recon, "n_samples"_a = m.n_samples);
}

std::vector<Vec3> to_points(const Eigen::Ref<const Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>>& a) {
  std::vector<Vec3> out(static_cast<std::size_t>(a.rows()));
  for (Eigen::Index i = 0; i < a.rows(); ++i) out[static_cast<std::size_t>(i)] = a.row(i).transpose();
  return out;
}

}  // namespace

PYBIND11_MODULE(_aofuse, m) {
  m.doc() = "Acoustic-optical surface reconstruction";

  // Messages start with the error code name, e.g. "BadConfig: ...".
  py::register_exception<Error>(m, "AofuseError", PyExc_RuntimeError);

  m.def(
      "main", [](const std::vector<std::string>& args) {
        py::gil_scoped_release nogil;
        return dispatch(args);
      },
      "args"_a, "Runs one CLI subcommand and returns its exit code.");

  m.def(
      "resolve_config", [](const std::string& text) { return config_to_json(parse_config(text)).dump(); }, "text"_a,
      "Validates a config document and returns its fully resolved JSON text.");

  m.def(
      "config_violations",
      [](const std::string& text) {
        std::vector<std::pair<std::string, std::string>> out;
        for (const auto& v : validate_config(text).violations) out.emplace_back(v.pointer, v.message);
        return out;
      },
      "text"_a);

  m.def(
      "simulate",
      [](const std::string& config, const std::filesystem::path& out) {
        const RunConfig cfg = parse_config(config);
        py::gil_scoped_release nogil;
        simulate_to(cfg, out);
      },
      "config"_a, "out"_a);

  m.def(
      "reconstruct",
      [](const std::filesystem::path& dataset, const std::string& mode, const std::filesystem::path& out,
         const std::string& config, std::uint64_t seed) {
        const RunConfig cfg = parse_config(config);
        const Mode md = parse_mode(mode);
        TrainReport rep;
        {
          py::gil_scoped_release nogil;
          rep = reconstruct_to(dataset, md, cfg, seed, out, true).report;
        }
        py::list rows;
        for (const auto& r : rep.rows)
          rows.append(py::dict("iteration"_a = r.iteration, "sonar"_a = r.loss.sonar, "camera"_a = r.loss.camera,
                               "eikonal"_a = r.loss.eikonal, "reg"_a = r.loss.reg, "total"_a = r.loss.total,
                               "alpha"_a = r.loss.alpha, "q"_a = r.q));
        return py::dict("rows"_a = rows, "diverged"_a = rep.diverged, "divergence"_a = rep.divergence);
      },
      "dataset"_a, "mode"_a, "out"_a, "config"_a = "{}", "seed"_a = 0);

  m.def(
      "evaluate",
      [](const std::filesystem::path& checkpoint, const std::filesystem::path& manifest, std::uint64_t seed,
         double tau, std::size_t n_samples) {
        const auto scene = read_manifest(manifest).scene;
        if (!scene) throw Error(ErrorCode::BadConfig, "manifest has no ground-truth scene");
        const FieldModel field = load_checkpoint(checkpoint);
        EvalConfig eval;
        eval.tau = tau;
        eval.n_samples = n_samples;
        py::gil_scoped_release nogil;
        return evaluate_field(field, *scene, eval, seed).metrics;
      },
      "checkpoint"_a, "manifest"_a, "seed"_a = 0, "tau"_a = kDefaultTau, "n_samples"_a = EvalConfig{}.n_samples);

  py::class_<ReconMetrics>(m, "ReconMetrics")
      .def_readonly("chamfer_l1", &ReconMetrics::chamfer_l1)
      .def_readonly("precision", &ReconMetrics::precision)
      .def_readonly("recall", &ReconMetrics::recall)
      .def_readonly("recon_to_gt", &ReconMetrics::recon_to_gt)
      .def_readonly("gt_to_recon", &ReconMetrics::gt_to_recon)
      .def_readonly("n_samples", &ReconMetrics::n_samples)
      .def("as_dict", &metrics_dict);

  m.def("singular_values", &singular_values, "A"_a);
  m.def("condition_number", &condition_number, "A"_a);

  m.def(
      "conditioning",
      [](std::size_t n, std::uint64_t seed, int threads) {
        CondSummary s;
        {
          py::gil_scoped_release nogil;
          s = monte_carlo_conditioning(n, seed, {}, threads);
        }
        Eigen::MatrixX3d kappa(static_cast<Eigen::Index>(s.samples.size()), 3);
        for (std::size_t i = 0; i < s.samples.size(); ++i) {
          const auto& c = s.samples[i];
          kappa.row(static_cast<Eigen::Index>(i)) << c.kappa_cam, c.kappa_son, c.kappa_multi;
        }
        return py::dict("kappa"_a = kappa, "median"_a = s.median, "degenerate"_a = s.degenerate);
      },
      "n"_a, "seed"_a = 0, "threads"_a = 1,
      "Monte Carlo condition numbers; kappa columns are camera, sonar, multimodal.");

  m.def(
      "point_metrics",
      [](const Eigen::Ref<const Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>>& recon,
         const Eigen::Ref<const Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>>& gt, double tau) {
        return point_metrics(to_points(recon), to_points(gt), tau);
      },
      "recon"_a, "gt"_a, "tau"_a = kDefaultTau);

  m.def(
      "read_ply",
      [](const std::filesystem::path& file) {
        const Mesh mesh = read_ply(file);
        Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor> v(static_cast<Eigen::Index>(mesh.vertices.size()), 3);
        Eigen::Matrix<std::uint32_t, Eigen::Dynamic, 3, Eigen::RowMajor> f(static_cast<Eigen::Index>(mesh.faces.size()),
                                                                            3);
        for (std::size_t i = 0; i < mesh.vertices.size(); ++i)
          v.row(static_cast<Eigen::Index>(i)) = mesh.vertices[i].transpose();
        for (std::size_t i = 0; i < mesh.faces.size(); ++i)
          for (int k = 0; k < 3; ++k) f(static_cast<Eigen::Index>(i), k) = mesh.faces[i][static_cast<std::size_t>(k)];
        return py::make_tuple(v, f);
      },
      "file"_a, "Vertices (n, 3) and faces (m, 3) of a PLY mesh.");
}

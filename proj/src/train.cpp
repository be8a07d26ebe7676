// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The aofuse Authors

#include "aofuse/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "aofuse/parallel.hpp"
#include "aofuse/render.hpp"
#include "aofuse/rng.hpp"

namespace aofuse {

const char* to_string(Mode m) {
  switch (m) {
    case Mode::Fused: return "fused";
    case Mode::Camera: return "camera";
    case Mode::Sonar: return "sonar";
  }
  return "?";
}

Mode parse_mode(const std::string& s) {
  if (s == "fused") return Mode::Fused;
  if (s == "camera") return Mode::Camera;
  if (s == "sonar") return Mode::Sonar;
  throw Error(ErrorCode::BadConfig, "unknown mode '" + s + "' (fused|camera|sonar)");
}

const char* to_string(ScheduleMode m) {
  switch (m) {
    case ScheduleMode::Constant: return "constant";
    case ScheduleMode::Linear: return "linear";
    case ScheduleMode::Step: return "step";
  }
  return "?";
}

ScheduleMode parse_schedule_mode(const std::string& s) {
  if (s == "constant") return ScheduleMode::Constant;
  if (s == "linear") return ScheduleMode::Linear;
  if (s == "step") return ScheduleMode::Step;
  throw Error(ErrorCode::BadConfig, "unknown schedule mode '" + s + "' (constant|linear|step)");
}

double schedule_alpha(int t, const LossConfig& cfg) {
  const auto& s = cfg.schedule;
  auto unit = [](double a) { return a >= 0.0 && a <= 1.0; };
  if (!unit(s.alpha_start) || !unit(s.alpha_end) || s.E_t < 0 || s.E_t > s.E_e || s.E_e < 1) {
    throw Error(ErrorCode::BadConfig, "schedule needs alphas in [0, 1] and 0 <= E_t <= E_e, E_e >= 1");
  }
  if (t < 0 || t > s.E_e) throw Error(ErrorCode::BadConfig, "iteration outside [0, E_e]");
  switch (s.mode) {
    case ScheduleMode::Constant: return s.alpha_start;
    case ScheduleMode::Linear:
      return s.alpha_start + (s.alpha_end - s.alpha_start) * static_cast<double>(t) / s.E_e;
    case ScheduleMode::Step: return t < s.E_t ? s.alpha_start : s.alpha_end;
  }
  return s.alpha_start;
}

double intensity_loss(std::span<const double> pred, std::span<const double> meas) {
  if (pred.size() != meas.size()) throw Error(ErrorCode::LengthMismatch, "prediction and measurement sizes differ");
  if (pred.empty()) throw Error(ErrorCode::Empty, "intensity loss of an empty batch");
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) s += std::abs(pred[i] - meas[i]);
  return s / static_cast<double>(pred.size());
}

double eikonal_loss(std::span<const Vec3> grads) {
  if (grads.empty()) throw Error(ErrorCode::Empty, "eikonal loss of no samples");
  double s = 0.0;
  for (const auto& g : grads) {
    const double d = g.norm() - 1.0;
    s += d * d;
  }
  return s / static_cast<double>(grads.size());
}

double opacity_reg(std::span<const double> alphas) {
  if (alphas.empty()) throw Error(ErrorCode::Empty, "opacity regularizer of no samples");
  double s = 0.0;
  for (double a : alphas) s += std::abs(a);
  return s / static_cast<double>(alphas.size());
}

std::array<double, 2> modality_weights(Mode mode, int t, const LossConfig& cfg) {
  switch (mode) {
    case Mode::Camera: return {0.0, 1.0};
    case Mode::Sonar: return {1.0, 0.0};
    case Mode::Fused: break;
  }
  const double a = schedule_alpha(t, cfg);
  return {a, 1.0 - a};
}

LossTerms total_loss(const LossBatch& batch, Mode mode, int t, const LossConfig& cfg) {
  const auto [w_son, w_cam] = modality_weights(mode, t, cfg);
  const bool want_son = mode != Mode::Camera && (mode == Mode::Sonar || w_son > 0.0);
  const bool want_cam = mode != Mode::Sonar && (mode == Mode::Camera || w_cam > 0.0);
  if ((want_son && batch.sonar_pred.empty()) || (want_cam && batch.camera_pred.empty())) {
    throw Error(ErrorCode::EmptyBatch, "a weighted modality has an empty batch");
  }
  LossTerms out;
  out.alpha = mode == Mode::Fused ? w_son : (mode == Mode::Sonar ? 1.0 : 0.0);
  if (want_son) out.sonar = intensity_loss(batch.sonar_pred, batch.sonar_meas);
  if (want_cam) out.camera = intensity_loss(batch.camera_pred, batch.camera_meas);
  if (cfg.lambda_eik != 0.0) out.eikonal = eikonal_loss(batch.grads);
  if (cfg.lambda_reg != 0.0) out.reg = opacity_reg(batch.alphas);
  out.total = w_son * out.sonar + w_cam * out.camera + cfg.lambda_eik * out.eikonal + cfg.lambda_reg * out.reg;
  return out;
}

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& st) {
  if (params.size() != grads.size()) throw Error(ErrorCode::ShapeMismatch, "parameter and gradient sizes differ");
  if (st.m.empty() && st.v.empty()) {
    st.m.assign(params.size(), 0.0);
    st.v.assign(params.size(), 0.0);
  }
  if (st.m.size() != params.size() || st.v.size() != params.size()) {
    throw Error(ErrorCode::ShapeMismatch, "optimizer state does not match parameters");
  }
  if (!(st.cfg.lr > 0.0)) throw Error(ErrorCode::BadConfig, "learning rate must be positive");
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (!std::isfinite(grads[i])) {
      throw Error(ErrorCode::NonFiniteGradient, "non-finite gradient at parameter " + std::to_string(i));
    }
  }
  ++st.step;
  const auto& c = st.cfg;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(st.step));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(st.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    double& m = st.m[i];
    double& v = st.v[i];
    if (g == 0.0 && m == 0.0 && v == 0.0) continue;
    m = c.beta1 * m + (1.0 - c.beta1) * g;
    v = c.beta2 * v + (1.0 - c.beta2) * g * g;
    params[i] -= c.lr * (m / bc1) / (std::sqrt(v / bc2) + c.eps);
  }
}

FieldOptimizer::FieldOptimizer(const AdamConfig& cfg, double sdf_lr) {
  sdf.cfg = acoustic.cfg = optical.cfg = log_q.cfg = cfg;
  if (sdf_lr > 0.0) sdf.cfg.lr = sdf_lr;
}

void FieldOptimizer::step(FieldModel& field, const GradientBuffer& grad) {
  if (!grad.all_finite()) throw Error(ErrorCode::NonFiniteGradient, "non-finite field gradient");
  adam_step(field.sdf, grad.sdf, sdf);
  adam_step(field.acoustic, grad.acoustic, acoustic);
  adam_step(field.optical, grad.optical, optical);
  adam_step(std::span<double>(&field.log_q, 1), std::span<const double>(&grad.log_q, 1), log_q);
  field.clamp_appearance();
}

void TrainReport::write_csv(const std::filesystem::path& file) const {
  std::ofstream out(file);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + file.string());
  out << "iteration,sonar,camera,eikonal,reg,total,alpha,q\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.iteration, r.loss.sonar,
                  r.loss.camera, r.loss.eikonal, r.loss.reg, r.loss.total, r.loss.alpha, r.q);
    out << buf;
  }
  if (!out) throw Error(ErrorCode::IoError, "write failed: " + file.string());
}

namespace {

// Stream tags keep modalities on separate random streams, so skipping one
// modality never shifts the draws of another.
constexpr std::uint64_t kCameraStream = 0xCA3E;
constexpr std::uint64_t kSonarStream = 0x5013;
constexpr std::uint64_t kEikonalStream = 0xE1C0;
constexpr std::size_t kRaysPerChunk = 32;

double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

struct CameraItem {
  int pose = 0, u = 0, v = 0;
  bool hit = false;
  CameraTrace trace;
};

struct BeamItem {
  int pose = 0, azimuth = 0;
  std::vector<BeamColumn> columns;
  std::vector<double> pred;
};

struct UniformSample {
  CellStencil stencil;
  Vec3 grad;
};

void validate(const Dataset& data, Mode mode, const TrainConfig& cfg) {
  const auto& m = data.manifest;
  if (m.frames.empty()) throw Error(ErrorCode::BadDataset, "dataset has no frames");
  if (!((m.roi[1] - m.roi[0]).array() > 0).all()) throw Error(ErrorCode::BadDataset, "dataset roi is empty");
  if (mode != Mode::Sonar && data.camera.size() != m.frames.size()) {
    throw Error(ErrorCode::BadDataset, "camera images missing for this mode");
  }
  if (mode != Mode::Camera && data.sonar.size() != m.frames.size()) {
    throw Error(ErrorCode::BadDataset, "sonar images missing for this mode");
  }
  const auto& s = cfg.sampling;
  if (s.camera_rays < 1 || s.sonar_bins < 1 || s.camera_samples < 2 || s.sonar_elevations < 1 ||
      s.sonar_radial < 2 || s.eikonal_uniform < 0) {
    throw Error(ErrorCode::BadConfig, "invalid sampling counts");
  }
  schedule_alpha(0, cfg.loss);
}

// Runs fn(chunk, sink) for every chunk, accumulating into grad in chunk
// order. With one worker the sink writes straight into the buffer; with more,
// per-chunk logs are replayed afterwards in the same order, which gives the
// identical floating-point sums.
template <class Fn>
void accumulate_chunks(std::size_t n_chunks, int threads, GradientBuffer& grad, std::vector<GradientLog>& logs,
                       Fn&& fn) {
  if (threads <= 1 || n_chunks <= 1) {
    for (std::size_t c = 0; c < n_chunks; ++c) {
      GradientSink sink(grad);
      fn(c, sink);
      grad.log_q += sink.log_q();
    }
    return;
  }
  logs.resize(std::max(logs.size(), n_chunks));
  std::vector<double> log_q(n_chunks, 0.0);
  parallel_for(n_chunks, threads, [&](std::size_t c) {
    logs[c].clear();
    GradientSink sink(logs[c]);
    fn(c, sink);
    log_q[c] = sink.log_q();
  });
  for (std::size_t c = 0; c < n_chunks; ++c) {
    logs[c].replay(grad);
    grad.log_q += log_q[c];
  }
}

Vec3 eikonal_adjoint(const Vec3& g, double scale) {
  const double n = g.norm();
  if (n == 0.0) return Vec3::Zero();
  return (scale * 2.0 * (n - 1.0) / n) * g;
}

}  // namespace

LossTerms loss_and_gradient(const FieldModel& field, const Dataset& data, Mode mode, const TrainConfig& cfg,
                            std::uint64_t seed, int t, GradientBuffer* grad, int threads) {
  const auto& man = data.manifest;
  const auto& sam = cfg.sampling;
  const auto& lc = cfg.loss;
  const int n_poses = static_cast<int>(man.frames.size());
  const CameraModel& cam = man.camera;
  const SonarModel& son = man.sonar;
  const int n_beams = std::max(1, static_cast<int>(std::lround(double(sam.sonar_bins) / son.n_range_bins)));
  const double dphi = son.elevation_aperture() / sam.sonar_elevations;
  threads = std::max(1, threads);

  std::vector<CameraItem> cam_items(static_cast<std::size_t>(sam.camera_rays));
  std::vector<BeamItem> beams(static_cast<std::size_t>(n_beams));
  std::vector<UniformSample> uniform(static_cast<std::size_t>(lc.lambda_eik != 0.0 ? sam.eikonal_uniform : 0));
  std::vector<double> cam_pred, cam_meas, son_pred, son_meas;

  const int ts = std::min(t, lc.schedule.E_e);
  const auto [w_son, w_cam] = modality_weights(mode, ts, lc);
  const bool use_cam = w_cam > 0.0;
  const bool use_son = w_son > 0.0;
  const auto ut = static_cast<std::uint64_t>(t);

  // Forward.
  const std::size_t cam_chunks = use_cam ? (cam_items.size() + kRaysPerChunk - 1) / kRaysPerChunk : 0;
  if (use_cam) {
    Rng pick(seed, {kCameraStream, ut, 0});
    for (auto& it : cam_items) {
      it.pose = static_cast<int>(pick.below(static_cast<std::uint64_t>(n_poses)));
      it.u = static_cast<int>(pick.below(static_cast<std::uint64_t>(cam.width)));
      it.v = static_cast<int>(pick.below(static_cast<std::uint64_t>(cam.height)));
    }
    parallel_for(cam_chunks, threads, [&](std::size_t c) {
      Rng jitter(seed, {kCameraStream, ut, 1 + c});
      const std::size_t end = std::min(cam_items.size(), (c + 1) * kRaysPerChunk);
      for (std::size_t k = c * kRaysPerChunk; k < end; ++k) {
        auto& it = cam_items[k];
        const Ray ray = camera_ray(cam, man.frames[it.pose].camera_pose, it.u + 0.5, it.v + 0.5);
        const auto span = intersect_box(ray, field.lo, field.hi);
        it.hit = span.has_value();
        if (it.hit) {
          it.trace = trace_camera(field, ray, sam.camera_samples, (*span)[0], (*span)[1], &jitter);
        } else {
          it.trace.color = {0.0, 0.0, 0.0};
        }
      }
    });
  }
  if (use_son) {
    Rng pick(seed, {kSonarStream, ut, 0});
    for (auto& b : beams) {
      b.pose = static_cast<int>(pick.below(static_cast<std::uint64_t>(n_poses)));
      b.azimuth = static_cast<int>(pick.below(static_cast<std::uint64_t>(son.n_azimuth_bins)));
    }
    parallel_for(beams.size(), threads, [&](std::size_t k) {
      Rng jitter(seed, {kSonarStream, ut, 1 + k});
      auto& b = beams[k];
      const Pose& pose = man.frames[b.pose].sonar_pose;
      const double theta = son.azimuth_center(b.azimuth);
      const auto phis = stratified_elevations(son.phi_min, son.phi_max, sam.sonar_elevations, &jitter);
      b.columns.resize(phis.size());
      for (std::size_t e = 0; e < phis.size(); ++e) {
        b.columns[e] = render_sonar_column(field, son, pose, theta, phis[e], sam.sonar_radial, &jitter);
      }
      b.pred = combine_columns(son, b.columns);
    });
  }
  if (!uniform.empty()) {
    Rng rng(seed, {kEikonalStream, ut});
    for (auto& s : uniform) {
      Vec3 x;
      for (int a = 0; a < 3; ++a) x[a] = rng.uniform(field.lo[a], field.hi[a]);
      s.stencil = locate(field, x);
      sample_sdf(field, s.stencil, &s.grad);
    }
  }

  // Loss, in a fixed order.
  std::vector<Vec3> eik;
  std::vector<double> alphas;
  auto collect_march = [&](const MarchState& ms) {
    for (std::size_t i = 0; i < ms.intervals(); ++i) alphas.push_back(ms.alpha(i));
    if (lc.lambda_eik == 0.0) return;
    for (std::size_t s = 0; s < ms.samples(); ++s) {
      if (!ms.stencil[s].out_of_box) eik.push_back(ms.grad[s]);
    }
  };
  if (use_cam) {
    for (const auto& it : cam_items) {
      const auto& img = data.camera[it.pose];
      for (int c = 0; c < 3; ++c) {
        cam_pred.push_back(it.trace.color[c]);
        cam_meas.push_back(img.at(it.u, it.v, c));
      }
      if (it.hit) collect_march(it.trace.march);
    }
  }
  if (use_son) {
    for (const auto& b : beams) {
      const auto& img = data.sonar[b.pose];
      for (int r = 0; r < son.n_range_bins; ++r) {
        son_pred.push_back(b.pred[r]);
        son_meas.push_back(img.at(r, b.azimuth));
      }
      for (const auto& col : b.columns) collect_march(col.march);
    }
  }
  for (const auto& s : uniform) eik.push_back(s.grad);
  const std::size_t n_eik = eik.size();
  const std::size_t n_alpha = alphas.size();

  // No interval may fall inside the box in a given iteration; the affected
  // terms are then simply absent.
  LossConfig lc_used = lc;
  if (alphas.empty()) lc_used.lambda_reg = 0.0;
  if (eik.empty()) lc_used.lambda_eik = 0.0;
  const LossBatch batch{son_pred, son_meas, cam_pred, cam_meas, eik, alphas};
  const LossTerms loss = total_loss(batch, mode, ts, lc_used);
  if (!grad || !std::isfinite(loss.total)) return loss;

  // Backward.
  const double reg_adj = lc_used.lambda_reg != 0.0 ? lc_used.lambda_reg / static_cast<double>(n_alpha) : 0.0;
  const double eik_scale = lc_used.lambda_eik != 0.0 ? lc_used.lambda_eik / static_cast<double>(n_eik) : 0.0;
  auto make_extra = [&](const MarchState& ms, std::vector<double>& a_adj, std::vector<Vec3>& g_adj) {
    MarchExtraAdjoint ex;
    if (reg_adj != 0.0) {
      a_adj.assign(ms.intervals(), reg_adj);
      ex.alpha = a_adj;
    }
    if (eik_scale != 0.0) {
      g_adj.resize(ms.samples());
      for (std::size_t s = 0; s < ms.samples(); ++s) {
        g_adj[s] = ms.stencil[s].out_of_box ? Vec3::Zero() : eikonal_adjoint(ms.grad[s], eik_scale);
      }
      ex.grad = g_adj;
    }
    return ex;
  };
  const double cam_scale = use_cam ? w_cam / static_cast<double>(cam_pred.size()) : 0.0;
  const double son_scale = use_son ? w_son / static_cast<double>(son_pred.size()) : 0.0;
  const std::size_t son_chunks = use_son ? beams.size() : 0;
  const bool eik_chunk = eik_scale != 0.0 && !uniform.empty();
  const std::size_t n_chunks = cam_chunks + son_chunks + (eik_chunk ? 1 : 0);
  std::vector<GradientLog> logs;
  accumulate_chunks(n_chunks, threads, *grad, logs, [&](std::size_t c, GradientSink& sink) {
    std::vector<double> a_adj;
    std::vector<Vec3> g_adj;
    if (c < cam_chunks) {
      const std::size_t end = std::min(cam_items.size(), (c + 1) * kRaysPerChunk);
      for (std::size_t k = c * kRaysPerChunk; k < end; ++k) {
        const auto& it = cam_items[k];
        if (!it.hit) continue;
        const auto& img = data.camera[it.pose];
        std::array<double, 3> g;
        for (int ch = 0; ch < 3; ++ch) g[ch] = cam_scale * sign(it.trace.color[ch] - img.at(it.u, it.v, ch));
        const auto ex = make_extra(it.trace.march, a_adj, g_adj);
        camera_backward(field, it.trace, g, ex, sink);
      }
    } else if (c < cam_chunks + son_chunks) {
      const auto& b = beams[c - cam_chunks];
      const auto& img = data.sonar[b.pose];
      std::vector<double> bin_adj(static_cast<std::size_t>(son.n_range_bins));
      for (int r = 0; r < son.n_range_bins; ++r) {
        bin_adj[r] = son_scale * sign(b.pred[r] - img.at(r, b.azimuth)) * son.E_e * dphi;
      }
      for (const auto& col : b.columns) {
        const auto ex = make_extra(col.march, a_adj, g_adj);
        sonar_backward(field, col, bin_adj, ex, sink);
      }
    } else {
      for (const auto& s : uniform) {
        SampleAdjoint up;
        up.grad = eikonal_adjoint(s.grad, eik_scale);
        grid_backprop(field, s.stencil, up, sink);
      }
    }
  });
  return loss;
}

TrainResult reconstruct(const Dataset& data, Mode mode, const TrainConfig& cfg, std::uint64_t seed,
                        const ProgressFn& progress) {
  validate(data, mode, cfg);
  const auto t_start = std::chrono::steady_clock::now();
  const int threads = resolve_threads(cfg.threads);
  const int n_iter = cfg.iterations >= 0 ? cfg.iterations : cfg.loss.schedule.E_e;
  const auto& man = data.manifest;

  TrainResult res{FieldModel::initialized(man.roi[0], man.roi[1], cfg.resolution, cfg.init), {}};
  FieldModel& field = res.field;
  FieldModel snapshot = field;
  FieldOptimizer opt(cfg.adam, cfg.sdf_lr);
  GradientBuffer grad(field);

  for (int t = 0; t < n_iter; ++t) {
    grad.zero();
    TrainReport::Row row{t, {}, field.q()};
    row.loss = loss_and_gradient(field, data, mode, cfg, seed, t, &grad, threads);
    if (!std::isfinite(row.loss.total)) {
      res.report.diverged = true;
      res.report.divergence = "non-finite loss at iteration " + std::to_string(t);
      field = snapshot;
      break;
    }
    if (!grad.all_finite()) {
      res.report.diverged = true;
      res.report.divergence = "non-finite gradient at iteration " + std::to_string(t);
      field = snapshot;
      break;
    }
    res.report.rows.push_back(row);
    if (progress) progress(row);
    opt.step(field, grad);
    if (cfg.checkpoint_every > 0 && (t + 1) % cfg.checkpoint_every == 0) snapshot = field;
  }
  res.report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return res;
}

}  // namespace aofuse

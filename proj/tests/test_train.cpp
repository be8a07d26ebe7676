#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <vector>

#include "aofuse/cli.hpp"
#include "aofuse/config.hpp"
#include "doctest.h"
#include "train_fixtures.hpp"

using namespace aofuse;
using namespace aofuse::test;

namespace {

bool same_field(const FieldModel& a, const FieldModel& b) {
  return a.shape == b.shape && a.sdf == b.sdf && a.acoustic == b.acoustic && a.optical == b.optical &&
         a.log_q == b.log_q;
}

LossConfig schedule(ScheduleMode mode, double a0, double a1, int E_t, int E_e) {
  LossConfig c;
  c.schedule = {mode, a0, a1, E_t, E_e};
  return c;
}

}  // namespace

TEST_SUITE("train") {
  TEST_CASE("intensity, eikonal and opacity losses") {
    const std::vector<double> p{0.2, 0.5, 0.9}, m{0.2, 0.1, 1.0};
    CHECK(intensity_loss(p, p) == 0.0);
    CHECK(intensity_loss(p, m) == doctest::Approx((0.0 + 0.4 + 0.1) / 3).epsilon(1e-15));
    CHECK_THROWS_AS(intensity_loss(std::vector<double>{}, std::vector<double>{}), Error);
    CHECK_THROWS_AS(intensity_loss(p, std::vector<double>{1.0}), Error);

    const std::vector<Vec3> unit{Vec3(1, 0, 0), Vec3(0, 0.6, 0.8)};
    CHECK(eikonal_loss(unit) == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(eikonal_loss(std::vector<Vec3>{Vec3(0, 2, 0)}) == 1.0);
    CHECK(eikonal_loss(std::vector<Vec3>{Vec3::Zero(), Vec3(1, 0, 0), Vec3(0, 0, 2)}) ==
          doctest::Approx(2.0 / 3.0).epsilon(1e-15));
    CHECK_THROWS_AS(eikonal_loss(std::vector<Vec3>{}), Error);

    CHECK(opacity_reg(std::vector<double>{0, 0, 0}) == 0.0);
    CHECK(opacity_reg(std::vector<double>{1}) == 1.0);
    CHECK(opacity_reg(std::vector<double>{0.2, 0.4}) == doctest::Approx(0.3).epsilon(1e-15));
    CHECK_THROWS_AS(opacity_reg(std::vector<double>{}), Error);
  }

  TEST_CASE("schedules") {
    const auto step = schedule(ScheduleMode::Step, 1.0, 0.3, 2000, 5000);
    CHECK(schedule_alpha(0, step) == 1.0);
    CHECK(schedule_alpha(1999, step) == 1.0);
    CHECK(schedule_alpha(2000, step) == 0.3);
    CHECK(schedule_alpha(5000, step) == 0.3);
    const auto lin = schedule(ScheduleMode::Linear, 0.0, 1.0, 0, 5000);
    CHECK(schedule_alpha(2500, lin) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(schedule_alpha(0, lin) == 0.0);
    CHECK(schedule_alpha(5000, lin) == 1.0);
    CHECK(schedule_alpha(1234, schedule(ScheduleMode::Constant, 0.7, 0.1, 0, 5000)) == 0.7);
    CHECK_THROWS_AS(schedule_alpha(-1, step), Error);
    CHECK_THROWS_AS(schedule_alpha(5001, step), Error);

    // Piecewise monotone and inside [0, 1].
    Rng rng(3);
    for (int trial = 0; trial < 50; ++trial) {
      const auto mode = static_cast<ScheduleMode>(trial % 3);
      const int E_e = 10 + static_cast<int>(rng.below(500));
      const auto c = schedule(mode, rng.uniform(), rng.uniform(), static_cast<int>(rng.below(E_e)), E_e);
      const double sign = c.schedule.alpha_end >= c.schedule.alpha_start ? 1.0 : -1.0;
      double prev = schedule_alpha(0, c);
      for (int t = 0; t <= E_e; ++t) {
        const double a = schedule_alpha(t, c);
        REQUIRE(a >= 0.0);
        REQUIRE(a <= 1.0);
        REQUIRE(sign * (a - prev) >= -1e-15);
        prev = a;
      }
    }

    CHECK(parse_schedule_mode("linear") == ScheduleMode::Linear);
    CHECK(parse_mode("fused") == Mode::Fused);
    CHECK_THROWS_AS(parse_mode("lidar"), Error);
  }

  TEST_CASE("total loss") {
    const std::vector<double> sp{0.5}, sm{0.1}, cp{0.2, 0.2}, cm{0.3, 0.5};
    const std::vector<Vec3> g{Vec3(0, 0, 2)};
    const std::vector<double> al{0.2, 0.4};
    LossBatch b{sp, sm, cp, cm, g, al};

    // Weight collapse: alpha = 1 and no regularisers leave the sonar term.
    auto c = schedule(ScheduleMode::Constant, 1.0, 1.0, 0, 100);
    c.lambda_eik = 0.0;
    CHECK(total_loss(b, Mode::Fused, 5, c).total == doctest::Approx(0.4).epsilon(1e-15));

    // Arithmetic oracle: L_son 0.4, L_cam 0.2, L_eik 1.0.
    c = schedule(ScheduleMode::Constant, 0.3, 0.3, 0, 100);
    c.lambda_eik = 0.1;
    const auto t = total_loss(b, Mode::Fused, 5, c);
    CHECK(t.sonar == doctest::Approx(0.4).epsilon(1e-15));
    CHECK(t.camera == doctest::Approx(0.2).epsilon(1e-15));
    CHECK(t.eikonal == 1.0);
    CHECK(t.alpha == 0.3);
    CHECK(t.total == doctest::Approx(0.3 * 0.4 + 0.7 * 0.2 + 0.1 * 1.0).epsilon(1e-15));

    c.lambda_reg = 2.0;
    CHECK(total_loss(b, Mode::Fused, 5, c).total == doctest::Approx(0.12 + 0.14 + 0.1 + 0.6).epsilon(1e-15));

    // Single-modality modes ignore the schedule.
    CHECK(total_loss(b, Mode::Camera, 5, c).total == doctest::Approx(0.2 + 0.1 + 0.6).epsilon(1e-15));
    CHECK(total_loss(b, Mode::Sonar, 5, c).total == doctest::Approx(0.4 + 0.1 + 0.6).epsilon(1e-15));

    LossBatch no_son{{}, {}, cp, cm, g, al};
    CHECK_THROWS_AS(total_loss(no_son, Mode::Fused, 5, c), Error);
    CHECK_THROWS_AS(total_loss(no_son, Mode::Sonar, 5, c), Error);
    CHECK(total_loss(no_son, Mode::Camera, 5, c).total >= 0.0);
    try {
      total_loss(no_son, Mode::Fused, 5, c);
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::EmptyBatch);
    }
  }

  TEST_CASE("adam") {
    AdamState st;
    std::vector<double> x{0.5, -1.0, 2.0};
    const std::vector<double> zero(3, 0.0);
    adam_step(x, zero, st);
    CHECK(x == std::vector<double>{0.5, -1.0, 2.0});
    CHECK(st.step == 1);

    AdamState fresh;
    std::vector<double> y{0.0, 0.0, 0.0};
    adam_step(y, std::vector<double>{3.0, -1e-3, 50.0}, fresh);
    CHECK(y[0] == doctest::Approx(-1e-2).epsilon(1e-5));
    CHECK(y[1] == doctest::Approx(1e-2).epsilon(1e-4));
    CHECK(y[2] == doctest::Approx(-1e-2).epsilon(1e-5));

    // Scalar trace, g = 1, lr = 0.1: both bias-corrected moments equal 1 at
    // every step, so each step moves lr / (1 + eps).
    AdamState tr;
    tr.cfg.lr = 0.1;
    std::vector<double> s{0.0};
    const double stepsize = 0.1 / (1.0 + 1e-8);
    for (int k = 1; k <= 3; ++k) {
      adam_step(s, std::vector<double>{1.0}, tr);
      CHECK(s[0] == doctest::Approx(-k * stepsize).epsilon(1e-14));
      CHECK(tr.m[0] == doctest::Approx(1.0 - std::pow(0.9, k)).epsilon(1e-14));
      CHECK(tr.v[0] == doctest::Approx(1.0 - std::pow(0.999, k)).epsilon(1e-14));
    }

    std::vector<double> keep{1.0, 2.0};
    AdamState bad;
    CHECK_THROWS_AS(adam_step(keep, std::vector<double>{1.0}, bad), Error);
    CHECK_THROWS_AS(adam_step(keep, std::vector<double>{1.0, std::nan("")}, bad), Error);
    CHECK(keep == std::vector<double>{1.0, 2.0});
  }

  TEST_CASE("field optimizer keeps appearance in range") {
    FieldModel f(Vec3::Zero(), Vec3::Ones(), {3, 3, 3});
    for (auto& a : f.acoustic) a = 0.001;
    for (auto& o : f.optical) o = 0.001;
    f.optical[1] = 0.999;
    GradientBuffer g(f);
    for (auto& a : g.acoustic) a = 1.0;
    for (auto& o : g.optical) o = 1.0;
    g.optical[1] = -1.0;
    g.sdf[0] = 1.0;
    FieldOptimizer opt({}, 1e-3);
    const double s0 = f.sdf[0];
    opt.step(f, g);
    for (double a : f.acoustic) CHECK(a == 0.0);
    for (double o : f.optical) CHECK(o >= 0.0);
    for (double o : f.optical) CHECK(o <= 1.0);
    CHECK(f.optical[1] == 1.0);
    CHECK(f.sdf[0] == doctest::Approx(s0 - 1e-3).epsilon(1e-6));
  }

  TEST_CASE("training loss gradient matches finite differences") {
    int cases = 0;
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
      for (Mode mode : {Mode::Fused, Mode::Camera, Mode::Sonar}) {
        auto p = tiny_problem(seed, 5);
        const auto r = check_loss_gradient(p, mode, seed, 7);
        CAPTURE(seed);
        CAPTURE(to_string(mode));
        CAPTURE(r.max_rel);
        CHECK(r.failures == 0);
        CHECK(r.nonzero[0] > 0);
        CHECK(r.nonzero[3] == 1);
        if (mode != Mode::Camera) CHECK(r.nonzero[1] > 0);
        if (mode != Mode::Sonar) CHECK(r.nonzero[2] > 0);
        ++cases;
      }
    }
    CHECK(cases == 9);
  }

  TEST_CASE("loss and gradient are deterministic and thread independent") {
    auto p = tiny_problem(11);
    GradientBuffer a(p.field), b(p.field), c(p.field);
    const auto la = loss_and_gradient(p.field, p.data, Mode::Fused, p.cfg, 4, 3, &a, 1);
    const auto lb = loss_and_gradient(p.field, p.data, Mode::Fused, p.cfg, 4, 3, &b, 1);
    const auto lc = loss_and_gradient(p.field, p.data, Mode::Fused, p.cfg, 4, 3, &c, 3);
    CHECK(la.total == lb.total);
    CHECK(la.total == lc.total);
    CHECK(a.sdf == b.sdf);
    CHECK(a.sdf == c.sdf);
    CHECK(a.optical == c.optical);
    CHECK(a.acoustic == c.acoustic);
    CHECK(a.log_q == c.log_q);
    const auto other = loss_and_gradient(p.field, p.data, Mode::Fused, p.cfg, 5, 3, nullptr);
    CHECK(other.total != la.total);
    CHECK(la.sonar >= 0.0);
    CHECK(la.camera >= 0.0);
    CHECK(la.eikonal >= 0.0);
    CHECK(la.reg >= 0.0);
  }

  TEST_CASE("reconstruct is deterministic across runs and thread counts") {
    auto p = tiny_problem(21);
    p.cfg.resolution = {6, 6, 6};
    p.cfg.iterations = 25;
    p.cfg.threads = 1;
    const auto r1 = reconstruct(p.data, Mode::Fused, p.cfg, 9);
    const auto r2 = reconstruct(p.data, Mode::Fused, p.cfg, 9);
    p.cfg.threads = 3;
    const auto r3 = reconstruct(p.data, Mode::Fused, p.cfg, 9);
    CHECK(same_field(r1.field, r2.field));
    CHECK(same_field(r1.field, r3.field));
    REQUIRE(r1.report.rows.size() == 25);
    for (std::size_t i = 0; i < r1.report.rows.size(); ++i) CHECK(r1.report.rows[i].loss.total == r3.report.rows[i].loss.total);
    CHECK_FALSE(r1.report.diverged);
  }

  TEST_CASE("weight collapse reproduces single-modality runs") {
    auto p = tiny_problem(31);
    p.cfg.resolution = {6, 6, 6};
    p.cfg.iterations = 20;
    auto fused = p.cfg;
    fused.loss.schedule = {ScheduleMode::Constant, 1.0, 1.0, 0, 100};
    CHECK(same_field(reconstruct(p.data, Mode::Fused, fused, 2).field,
                     reconstruct(p.data, Mode::Sonar, p.cfg, 2).field));
    fused.loss.schedule = {ScheduleMode::Constant, 0.0, 0.0, 0, 100};
    CHECK(same_field(reconstruct(p.data, Mode::Fused, fused, 2).field,
                     reconstruct(p.data, Mode::Camera, p.cfg, 2).field));
  }

  TEST_CASE("divergence stops the run and returns the last snapshot") {
    auto p = tiny_problem(41);
    p.cfg.resolution = {6, 6, 6};
    p.cfg.iterations = 10;
    for (auto& img : p.data.camera) std::fill(img.rgb.begin(), img.rgb.end(), std::numeric_limits<double>::infinity());
    const auto r = reconstruct(p.data, Mode::Camera, p.cfg, 1);
    CHECK(r.report.diverged);
    CHECK_FALSE(r.report.divergence.empty());
    for (double v : r.field.sdf) CHECK(std::isfinite(v));
  }

  TEST_CASE("reconstruct rejects unusable datasets") {
    auto p = tiny_problem(51);
    p.cfg.iterations = 2;
    auto no_cam = p.data;
    no_cam.camera.clear();
    CHECK_THROWS_AS(reconstruct(no_cam, Mode::Fused, p.cfg, 0), Error);
    CHECK_NOTHROW(reconstruct(no_cam, Mode::Sonar, p.cfg, 0));
    auto empty = p.data;
    empty.manifest.frames.clear();
    CHECK_THROWS_AS(reconstruct(empty, Mode::Sonar, p.cfg, 0), Error);
  }

  TEST_CASE("a field rendering its own data has near-zero intensity loss") {
    auto p = tiny_problem(61);
    const Vec3 lo = p.data.manifest.roi[0], hi = p.data.manifest.roi[1];
    const Vec3 c = 0.5 * (lo + hi);
    auto field = field_from(lo, hi, {33, 33, 33}, [&](const Vec3& x) { return (x - c).norm() - 0.18; }, 0.6, 0.4, 400);
    SamplingConfig dense = p.cfg.sampling;
    dense.camera_samples = 2048;
    dense.sonar_radial = 2048;
    dense.sonar_elevations = 64;
    const Dataset truth = render_dataset(field, p.data.manifest, dense, 1);
    TrainConfig cfg = p.cfg;
    cfg.sampling = dense;
    cfg.sampling.camera_rays = 32;
    cfg.sampling.sonar_bins = 32;
    cfg.loss.lambda_eik = 0.0;
    cfg.loss.lambda_reg = 0.0;
    for (Mode mode : {Mode::Camera, Mode::Sonar}) {
      const auto l = loss_and_gradient(field, truth, mode, cfg, 3, 0, nullptr);
      CAPTURE(to_string(mode));
      CHECK(l.camera < 1e-3);
      CHECK(l.sonar < 1e-3);
    }
  }

  TEST_CASE("train report csv") {
    TrainReport rep;
    rep.rows.push_back({0, {0.1, 0.2, 0.3, 0.0, 0.4, 1.0}, 20.0});
    const auto dir = scratch("train_csv");
    rep.write_csv(dir / "train.csv");
    std::ifstream in(dir / "train.csv");
    std::string header, row;
    std::getline(in, header);
    std::getline(in, row);
    CHECK(header == "iteration,sonar,camera,eikonal,reg,total,alpha,q");
    CHECK(row.rfind("0,0.1", 0) == 0);
  }
}

TEST_SUITE("train_progress") {
  TEST_CASE("training makes progress on a sphere") {
    RunConfig cfg = *validate_config("{}").config;
    cfg.dataset.scene = AnalyticScene({sphere(Vec3(0.12, 0.0, 1.75), 0.25)}, {});
    const auto dir = scratch("train_progress");
    generate_dataset(cfg.dataset, dir / "data");
    const Dataset data = load_dataset(dir / "data");
    cfg.train.iterations = 501;
    cfg.train.threads = 1;
    std::vector<double> ratio;
    for (std::uint64_t seed : {0, 1, 2}) {
      const auto r = reconstruct(data, Mode::Fused, cfg.train, seed);
      REQUIRE(r.report.rows.size() == 501);
      ratio.push_back(r.report.rows[500].loss.total / r.report.rows[10].loss.total);
    }
    std::sort(ratio.begin(), ratio.end());
    CAPTURE(ratio[0]);
    CAPTURE(ratio[2]);
    CHECK(ratio[1] < 0.5);
  }
}

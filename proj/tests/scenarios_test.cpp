#include "trilost/scenarios.hpp"

#include <gtest/gtest.h>

#include <functional>
#include <set>

namespace trilost {
namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::Io;  // sentinel: nothing thrown
}

bool in_fov(const LosObservation& ob, double pixels) {
  const Vec2 uv = ob.pixel.uv;
  return uv.x() >= 0.0 && uv.x() <= pixels && uv.y() >= 0.0 && uv.y() <= pixels;
}

TEST(Trn, Envelope) {
  EXPECT_EQ(code_of([] { build_trn_scenario(TrnVariant::Canted45, 100.0); }),
            ErrorCode::OutOfEnvelope);
  EXPECT_EQ(code_of([] { build_trn_scenario(TrnVariant::Nadir, 2000.1); }),
            ErrorCode::OutOfEnvelope);
  EXPECT_NO_THROW(build_trn_scenario(TrnVariant::Nadir, 200.0));
  EXPECT_NO_THROW(build_trn_scenario(TrnVariant::Canted45, 2000.0));
}

TEST(Trn, NadirGeometry) {
  const ScenarioConfig cfg = build_trn_scenario(TrnVariant::Nadir, 2000.0);
  const Vec3 lander = cfg.truths[0];
  const auto obs = scenario_observations(cfg, lander);
  for (const auto& ob : obs) EXPECT_TRUE(in_fov(ob, cfg.camera.pixels));
  const double r1 = (cfg.targets[0] - lander).norm();
  const double r2 = (cfg.targets[1] - lander).norm();
  EXPECT_LE(std::abs(r1 / r2 - 1.0), 0.02);
  EXPECT_NEAR((cfg.targets[0] - cfg.targets[1]).head<2>().norm(), 300.0, 1e-12);
  EXPECT_EQ(cfg.targets[0].z() - cfg.targets[1].z(), 30.0);
}

TEST(Trn, CantedGeometry) {
  for (double alt : {200.0, 1000.0, 2000.0}) {
    const ScenarioConfig cfg = build_trn_scenario(TrnVariant::Canted45, alt);
    const Vec3 lander = cfg.truths[0];
    for (const auto& ob : scenario_observations(cfg, lander)) {
      EXPECT_TRUE(in_fov(ob, cfg.camera.pixels)) << alt;
    }
    const double near = (cfg.targets[0] - lander).norm();
    const double far = (cfg.targets[1] - lander).norm();
    if (alt == 1000.0) EXPECT_GT(far, 2.0 * near);
    // Boresight sits 45 degrees off nadir.
    const Rotation t = scenario_observations(cfg, lander)[0].attitude;
    EXPECT_NEAR(t.matrix().row(2).dot(-Vec3::UnitZ()), std::sqrt(0.5), 1e-15);
  }
}

TEST(Uranus, CameraFromIfov) {
  const CameraSpec c = CameraSpec::from_ifov(7.0, 60e-6);
  EXPECT_NEAR(c.intrinsics().dx, 1.0 / 60e-6, 1e-8);
}

TEST(Uranus, OcclusionBehindPlanet) {
  const UranusSystem sys;
  const VisibilityModel m = sys.visibility();
  // Observer on the far side of the planet, collinear with its center and Titania.
  const Vec3 observer = -2.0 * sys.titania;
  EXPECT_EQ(check_visibility(m, 7.0, observer, sys.titania, sys.titania_radius),
            VisibilityStatus::Occluded);
  EXPECT_EQ(check_visibility(m, 7.0, Vec3(30000.0, 0.0, 0.0) * 0.5, sys.titania,
                             sys.titania_radius),
            VisibilityStatus::Inside);
}

TEST(Uranus, OverfillNearMoon) {
  UranusSystem sys;
  sys.sun_direction = -Vec3::UnitZ();  // keep the sun out of the way
  const VisibilityModel m = sys.visibility();
  // 1e4 km from Titania, off the equatorial plane so the planet is well clear.
  const Vec3 observer = sys.titania + 1e4 * Vec3::UnitZ();
  // Oracle: angular diameter 2 asin(r / d) against 80% of the field.
  const double diameter = 2.0 * std::asin(sys.titania_radius / 1e4) * 180.0 / M_PI;
  ASSERT_GT(diameter, 0.8 * 7.0);
  EXPECT_EQ(check_visibility(m, 7.0, observer, sys.titania, sys.titania_radius),
            VisibilityStatus::Overfill);
  const Vec3 farther = sys.titania + 1e5 * Vec3::UnitZ();
  EXPECT_NE(check_visibility(m, 7.0, farther, sys.titania, sys.titania_radius),
            VisibilityStatus::Overfill);
}

TEST(Uranus, SunExclusion) {
  UranusSystem sys;
  const Vec3 observer(1e6, 1e5, 0.0);
  const Vec3 los = (sys.titania - observer).normalized();
  // Rotate the line of sight by 20 and by 40 degrees about a perpendicular axis.
  const Vec3 axis = los.cross(Vec3::UnitZ()).normalized();
  VisibilityModel m = sys.visibility();
  m.sun_direction = Rotation::from_angle_axis(20.0 * M_PI / 180.0, axis).transpose() * los;
  EXPECT_NEAR(std::acos(m.sun_direction.dot(los)) * 180.0 / M_PI, 20.0, 1e-9);
  EXPECT_EQ(check_visibility(m, 7.0, observer, sys.titania, sys.titania_radius),
            VisibilityStatus::Sun);
  m.sun_direction = Rotation::from_angle_axis(40.0 * M_PI / 180.0, axis).transpose() * los;
  EXPECT_EQ(check_visibility(m, 7.0, observer, sys.titania, sys.titania_radius),
            VisibilityStatus::Visible);
}

TEST(Uranus, GridShape) {
  const auto grid = build_uranus_grid(3e6, 11);
  ASSERT_EQ(grid.size(), 121u);
  EXPECT_EQ(grid.front().position, Vec3(-1.5e6, -1.5e6, 0.0));
  EXPECT_EQ(grid.back().position, Vec3(1.5e6, 1.5e6, 0.0));
  // The planet center is inside the occluder.
  EXPECT_FALSE(grid[60].triangulable);
  EXPECT_EQ(grid[60].status[0], VisibilityStatus::Inside);
  int visible = 0;
  for (const auto& g : grid) visible += g.triangulable;
  EXPECT_GT(visible, 0);
  EXPECT_LT(visible, 121);
  EXPECT_EQ(code_of([] { build_uranus_grid(0.0); }), ErrorCode::InvalidInput);
}

TEST(Uranus, LostNeverWorseThanDltAnalytically) {
  const auto grid = build_uranus_grid(3e6, 21);
  std::vector<Vec3> truths;
  for (const auto& g : grid) {
    if (g.triangulable) truths.push_back(g.position);
  }
  const ScenarioConfig cfg = build_uranus_scenario(truths);
  for (const Vec3& r : truths) {
    const auto obs = scenario_observations(cfg, r);
    const double lost = analytic_covariance(Method::Lost, obs).trace();
    const double dlt = analytic_covariance(Method::Dlt, obs).trace();
    EXPECT_LE(lost, dlt * (1.0 + 1e-12));
  }
}

TEST(MonteCarlo, DrawSeedsAreDistinct) {
  std::set<std::uint64_t> seen;
  for (std::uint64_t i = 0; i < 10000; ++i) seen.insert(draw_seed(7, i));
  EXPECT_EQ(seen.size(), 10000u);
  EXPECT_NE(draw_seed(7, 0), draw_seed(8, 0));
}

bool same_report(const MonteCarloReport& a, const MonteCarloReport& b) {
  if (a.points.size() != b.points.size()) return false;
  for (std::size_t i = 0; i < a.points.size(); ++i) {
    const auto& pa = a.points[i];
    const auto& pb = b.points[i];
    for (std::size_t m = 0; m < pa.methods.size(); ++m) {
      if (pa.methods[m].mean_error != pb.methods[m].mean_error) return false;
      if (pa.methods[m].sample_covariance != pb.methods[m].sample_covariance) return false;
      if (pa.methods[m].draws != pb.methods[m].draws) return false;
    }
    for (std::size_t p = 0; p < pa.pairs.size(); ++p) {
      if (pa.pairs[p].mean_difference != pb.pairs[p].mean_difference) return false;
      if (pa.pairs[p].a_closer != pb.pairs[p].a_closer) return false;
    }
  }
  return true;
}

TEST(MonteCarlo, DeterministicAcrossWorkerCounts) {
  ScenarioConfig cfg = build_trn_scenario(TrnVariant::Canted45, 800.0);
  cfg.samples = 3000;  // not a multiple of the chunk size
  cfg.seed = 99;
  cfg.keep_draws = true;
  const MonteCarloReport one = run_monte_carlo(cfg, 1);
  const MonteCarloReport three = run_monte_carlo(cfg, 3);
  const MonteCarloReport again = run_monte_carlo(cfg, 1);
  EXPECT_TRUE(same_report(one, three));
  EXPECT_TRUE(same_report(one, again));
  ASSERT_EQ(one.points[0].methods[0].draws.size(), 3000u);

  cfg.seed = 100;
  EXPECT_FALSE(same_report(one, run_monte_carlo(cfg, 1)));
}

TEST(MonteCarlo, TotalStdIsRootTrace) {
  ScenarioConfig cfg = build_trn_scenario(TrnVariant::Nadir, 1000.0);
  cfg.samples = 500;
  const MonteCarloReport rep = run_monte_carlo(cfg, 1);
  for (const auto& s : rep.points[0].methods) {
    EXPECT_NEAR(s.total_std, std::sqrt(s.sample_covariance.trace()), 1e-12 * s.total_std);
    EXPECT_EQ(s.successes, 500);
  }
}

TEST(MonteCarlo, NegligibleNoiseGivesIdenticalDraws) {
  ScenarioConfig cfg = build_trn_scenario(TrnVariant::Canted45, 1000.0);
  cfg.sigma_px = 1e-30;
  cfg.samples = 300;
  const PointReport p = run_monte_carlo(cfg, 1).points[0];
  for (const auto& s : p.methods) {
    EXPECT_EQ(s.sample_covariance, Mat3::Zero()) << method_name(s.method);
    EXPECT_LE(s.mean_error.norm(), 1e-9 * 3000.0);
  }
}

TEST(MonteCarlo, SampleMatchesAnalyticCovariance) {
  ScenarioConfig cfg = build_trn_scenario(TrnVariant::Canted45, 600.0);
  cfg.samples = 100000;
  const PointReport p = run_monte_carlo(cfg).points[0];
  for (const auto& s : p.methods) {
    ASSERT_TRUE(s.analytic_covariance.has_value());
    const Mat3& a = *s.analytic_covariance;
    EXPECT_LE((s.sample_covariance - a).norm(), 0.03 * a.norm()) << method_name(s.method);
  }
  EXPECT_FALSE(p.suspicious);
  EXPECT_EQ(p.failed_draws, 0);
}

TEST(MonteCarlo, ConfigValidation) {
  ScenarioConfig cfg = build_trn_scenario(TrnVariant::Nadir, 1000.0);
  auto expect_invalid = [&](auto mutate) {
    ScenarioConfig c = cfg;
    mutate(c);
    EXPECT_EQ(code_of([&] { c.validate(); }), ErrorCode::InvalidInput);
  };
  expect_invalid([](ScenarioConfig& c) { c.camera.fov_deg = 180.0; });
  expect_invalid([](ScenarioConfig& c) { c.sigma_px = 0.0; });
  expect_invalid([](ScenarioConfig& c) { c.samples = 0; });
  expect_invalid([](ScenarioConfig& c) { c.schema = 2; });
  expect_invalid([](ScenarioConfig& c) { c.targets.push_back(Vec3::Zero()); });  // HS needs two
  expect_invalid([](ScenarioConfig& c) { c.methods.clear(); });
  EXPECT_NO_THROW(cfg.validate());
}

TEST(PrecisionLoss, Basics) {
  ScenarioConfig cfg = build_trn_scenario(TrnVariant::Canted45, 400.0);
  cfg.samples = 20;
  cfg.methods = {Method::Dlt, Method::Lost};
  const PointReport p = run_monte_carlo(cfg, 1).points[0];
  EXPECT_EQ(precision_loss(p, Method::Lost, Method::Lost), 0.0);
  EXPECT_EQ(precision_loss(p, Method::Dlt, Method::Dlt, true), 0.0);
  EXPECT_EQ(code_of([&] { precision_loss(p, Method::Hs, Method::Lost); }), ErrorCode::MissingMethod);
  const double loss = precision_loss(p, Method::Dlt, Method::Lost, true);
  EXPECT_GE(loss, 9.0);
  EXPECT_LE(loss, 15.0);
}

TEST(PrecisionLoss, NadirIsNearlyOptimal) {
  for (double alt : {1000.0, 1500.0, 2000.0}) {
    const ScenarioConfig cfg = build_trn_scenario(TrnVariant::Nadir, alt);
    const auto obs = scenario_observations(cfg, cfg.truths[0]);
    const double dlt = std::sqrt(analytic_covariance(Method::Dlt, obs).trace());
    const double lost = std::sqrt(analytic_covariance(Method::Lost, obs).trace());
    EXPECT_LT(100.0 * (dlt / lost - 1.0), 1.0) << alt;
  }
}

TEST(RelNav, BuilderObservability) {
  const RelNavScenario homogeneous = build_relnav_scenario(Vec3::Zero());
  const CwStm stm(homogeneous.mean_motion);
  const ObservabilityReport rep = observability_report(homogeneous.observations, stm);
  EXPECT_TRUE(rep.homothety);
  ASSERT_EQ(rep.null_directions.size(), 1u);
  EXPECT_GE(std::abs(rep.null_directions[0].dot(homogeneous.truth.normalized())), 1.0 - 1e-8);

  const RelNavScenario offset = build_relnav_scenario(Vec3(10.0, 0.0, 0.0));
  const StateEstimate6 est = dynamic_dlt(offset.observations, stm);
  EXPECT_LE((est.state - offset.truth).norm(), 1e-6 * offset.truth.norm());
}

}  // namespace
}  // namespace trilost

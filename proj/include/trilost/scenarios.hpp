#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "trilost/dynamic.hpp"
#include "trilost/methods.hpp"

namespace trilost {

struct CameraSpec {
  double fov_deg = 90.0;  // full field of view across `pixels`
  double pixels = 1024.0;

  CameraIntrinsics intrinsics() const { return CameraIntrinsics::from_fov(fov_deg, pixels); }
  // Camera whose pixel subtends `ifov_rad` at the boresight.
  static CameraSpec from_ifov(double fov_deg, double ifov_rad);
};

// Fixed: one attitude for every sighting, built from boresight and up hint.
// Tracking: each target gets its own camera whose boresight points at it.
enum class Mounting { Fixed, Tracking };

struct VisibilityRule {
  double clearance_fraction = 0.05;  // of the FOV, between target and occluder limb
  double max_fill_fraction = 0.80;   // target angular diameter over FOV
  double sun_exclusion_deg = 30.0;
};

struct Body {
  std::string name;
  Vec3 center = Vec3::Zero();
  double radius = 0.0;
};

struct VisibilityModel {
  VisibilityRule rule;
  Body occluder;                     // the primary, e.g. the planet
  std::vector<double> target_radii;  // one per target
  Vec3 sun_direction = Vec3::UnitX();  // unit, from the system toward the sun
};

enum class VisibilityStatus { Visible, Inside, Occluded, Clearance, Overfill, Sun };
std::string_view visibility_name(VisibilityStatus s);

VisibilityStatus check_visibility(const VisibilityModel& model, double fov_deg,
                                  const Vec3& observer, const Vec3& target,
                                  double target_radius);

struct ScenarioConfig {
  int schema = 1;
  std::string name;
  std::string length_unit = "m";
  CameraSpec camera;
  Mounting mounting = Mounting::Fixed;
  Vec3 boresight = -Vec3::UnitZ();
  Vec3 up_hint = Vec3::UnitX();
  std::vector<Vec3> targets;  // known points
  std::vector<Vec3> truths;   // observer positions, one Monte Carlo run each
  double sigma_px = 0.1;
  std::vector<Method> methods;
  std::optional<Method> reference;  // baseline for loss percentages
  std::int64_t samples = 1000;
  std::uint64_t seed = 1;
  bool keep_draws = false;
  std::optional<VisibilityModel> visibility;

  void validate() const;  // InvalidInput
};

// Noise-free sightings of every target from `observer`.
std::vector<LosObservation> scenario_observations(const ScenarioConfig& cfg,
                                                  const Vec3& observer);

// Visibility of every target from `observer`; all Visible without a model.
std::vector<VisibilityStatus> scenario_visibility(const ScenarioConfig& cfg,
                                                  const Vec3& observer);

// ---- terrain relative navigation ------------------------------------------

enum class TrnVariant { Nadir, Canted45 };
std::string_view trn_variant_name(TrnVariant v);
TrnVariant parse_trn_variant(std::string_view s);

inline constexpr double kTrnMinAltitude = 200.0;
inline constexpr double kTrnMaxAltitude = 2000.0;

// Lander at (0, 0, altitude) over flat ground, x downrange, z up.
ScenarioConfig build_trn_scenario(TrnVariant variant, double altitude);

// ---- moons of Uranus ------------------------------------------------------

struct UranusSystem {
  Vec3 titania = Vec3(2.8607e5, -3.2961e5, -3.3944e2);  // km
  Vec3 oberon = Vec3(5.0811e5, -2.8608e5, -9.0978e2);   // km
  double uranus_radius = 25559.0;
  double titania_radius = 788.4;
  double oberon_radius = 761.4;
  Vec3 sun_direction = Vec3(-1.0, 0.0, 0.0);
  VisibilityRule rule;
  CameraSpec camera = CameraSpec::from_ifov(7.0, 60e-6);
  double sigma_px = 0.1;

  VisibilityModel visibility() const;
};

struct GridPoint {
  Vec3 position = Vec3::Zero();
  std::vector<VisibilityStatus> status;  // per moon
  bool triangulable = false;
};

// Square grid in the equatorial plane centered on the planet.
std::vector<GridPoint> build_uranus_grid(double extent_km, int resolution = 101,
                                         const UranusSystem& sys = {});

// Monte Carlo config for the given observer positions.
ScenarioConfig build_uranus_scenario(std::vector<Vec3> truths, const UranusSystem& sys = {});

// ---- angles-only relative navigation --------------------------------------

struct RelNavScenario {
  double mean_motion = 0.0011;  // rad/s
  Vec6 truth = Vec6::Zero();    // initial deputy state, m and m/s
  std::vector<DynamicObservation> observations;
};

// Deputy camera sights the chief at `epochs` times over a quarter period.
// The chief carries a known target offset (zero gives the homothetic case).
RelNavScenario build_relnav_scenario(const Vec3& target_offset, int epochs = 10,
                                     double sigma_px = 0.1);

// ---- Monte Carlo ----------------------------------------------------------

struct MethodStats {
  Method method = Method::Lost;
  std::int64_t successes = 0;
  std::int64_t failures = 0;
  Vec3 mean_error = Vec3::Zero();
  Mat3 sample_covariance = Mat3::Zero();  // about the sample mean
  double total_std = 0.0;                 // sqrt(trace(sample_covariance))
  std::optional<Mat3> analytic_covariance;
  std::vector<Vec3> draws;  // only with keep_draws
};

struct PairStats {
  Method a = Method::Lost, b = Method::Lost;
  std::int64_t count = 0;
  Vec3 mean_difference = Vec3::Zero();  // a - b
  double difference_std = 0.0;          // total std of a - b
  std::int64_t a_closer = 0, b_closer = 0, ties = 0;
};

struct PointReport {
  Vec3 truth = Vec3::Zero();
  bool visible = true;
  std::vector<VisibilityStatus> visibility;
  std::vector<MethodStats> methods;
  std::vector<PairStats> pairs;
  std::int64_t failed_draws = 0;  // draws where any method failed
  bool suspicious = false;        // failures above kSuspiciousFailureRate

  const MethodStats& stats(Method m) const;  // MissingMethod
  const PairStats& pair(Method a, Method b) const;  // MissingMethod
};

inline constexpr double kSuspiciousFailureRate = 1e-3;
inline constexpr std::int64_t kDrawsPerChunk = 256;

struct MonteCarloReport {
  int schema = 1;
  std::string scenario;
  std::string length_unit;
  std::uint64_t seed = 0;
  std::int64_t samples = 0;
  double sigma_px = 0.0;
  std::vector<Method> methods;
  std::optional<Method> reference;
  std::vector<PointReport> points;
};

// Worker count: TRILOST_THREADS if set and positive, else hardware threads.
int default_worker_count();

// Deterministic for a given config: results do not depend on `workers`.
MonteCarloReport run_monte_carlo(const ScenarioConfig& cfg, int workers = 0);

// Stream for one draw, derived from (master seed, draw index).
std::uint64_t draw_seed(std::uint64_t master, std::uint64_t index);

// 100 (sigma_baseline / sigma_reference - 1); MissingMethod when absent or,
// for the analytic variant, when a method has no analytic covariance.
double precision_loss(const PointReport& point, Method baseline, Method reference,
                      bool analytic = false);

}  // namespace trilost

#include "trilost/scenarios.hpp"

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <random>
#include <thread>

namespace trilost {

namespace {

constexpr double kDeg = M_PI / 180.0;

double angle_between(const Vec3& a, const Vec3& b) {
  return std::atan2(a.cross(b).norm(), a.dot(b));
}

}  // namespace

CameraSpec CameraSpec::from_ifov(double fov_deg, double ifov_rad) {
  CameraSpec c;
  c.fov_deg = fov_deg;
  c.pixels = 2.0 * std::tan(0.5 * fov_deg * kDeg) / ifov_rad;
  return c;
}

std::string_view visibility_name(VisibilityStatus s) {
  switch (s) {
    case VisibilityStatus::Visible: return "visible";
    case VisibilityStatus::Inside: return "inside";
    case VisibilityStatus::Occluded: return "occluded";
    case VisibilityStatus::Clearance: return "clearance";
    case VisibilityStatus::Overfill: return "overfill";
    case VisibilityStatus::Sun: return "sun";
  }
  return "?";
}

VisibilityStatus check_visibility(const VisibilityModel& model, double fov_deg,
                                  const Vec3& observer, const Vec3& target,
                                  double target_radius) {
  const Vec3 to_target = target - observer;
  const Vec3 to_body = model.occluder.center - observer;
  const double rt = to_target.norm();
  const double rb = to_body.norm();
  if (rb <= model.occluder.radius || rt <= target_radius) return VisibilityStatus::Inside;

  // Closest approach of the sight segment to the occluder center.
  const double s = std::clamp(to_body.dot(to_target) / (rt * rt), 0.0, 1.0);
  if ((observer + s * to_target - model.occluder.center).norm() <= model.occluder.radius) {
    return VisibilityStatus::Occluded;
  }
  const double fov = fov_deg * kDeg;
  const double limb = std::asin(model.occluder.radius / rb);
  if (angle_between(to_target, to_body) - limb < model.rule.clearance_fraction * fov) {
    return VisibilityStatus::Clearance;
  }
  if (2.0 * std::asin(std::min(1.0, target_radius / rt)) > model.rule.max_fill_fraction * fov) {
    return VisibilityStatus::Overfill;
  }
  if (angle_between(to_target, model.sun_direction) < model.rule.sun_exclusion_deg * kDeg) {
    return VisibilityStatus::Sun;
  }
  return VisibilityStatus::Visible;
}

void ScenarioConfig::validate() const {
  auto bad = [](const std::string& m) { fail(ErrorCode::InvalidInput, m); };
  if (schema != 1) bad("unsupported scenario schema " + std::to_string(schema));
  if (!(camera.fov_deg > 0.0 && camera.fov_deg < 180.0)) bad("fov_deg must lie in (0, 180)");
  if (!(camera.pixels > 0.0)) bad("pixels must be positive");
  if (!(sigma_px > 0.0) || !std::isfinite(sigma_px)) bad("sigma_px must be positive");
  if (samples < 1) bad("samples must be at least 1");
  if (targets.size() < 2) bad("need at least two targets");
  if (truths.empty()) bad("need at least one truth position");
  if (methods.empty()) bad("need at least one method");
  if (length_unit.empty()) bad("length_unit is required");
  if (mounting == Mounting::Fixed && boresight.norm() == 0.0) bad("boresight must be nonzero");
  for (Method m : methods) {
    if (two_view_only(m) && targets.size() != 2) {
      bad(std::string(method_name(m)) + " needs exactly two targets");
    }
  }
  if (visibility) {
    const VisibilityRule& r = visibility->rule;
    if (!(r.clearance_fraction > 0.0 && r.clearance_fraction < 1.0) ||
        !(r.max_fill_fraction > 0.0 && r.max_fill_fraction < 1.0)) {
      bad("visibility fractions must lie in (0, 1)");
    }
    if (visibility->target_radii.size() != targets.size()) bad("one radius per target required");
  }
}

std::vector<LosObservation> scenario_observations(const ScenarioConfig& cfg,
                                                  const Vec3& observer) {
  const CameraIntrinsics k = cfg.camera.intrinsics();
  const Rotation fixed = look_at(cfg.boresight, cfg.up_hint);
  std::vector<LosObservation> out;
  out.reserve(cfg.targets.size());
  for (const Vec3& p : cfg.targets) {
    LosObservation ob;
    ob.intrinsics = k;
    ob.attitude = cfg.mounting == Mounting::Fixed ? fixed : look_at(p - observer, cfg.up_hint);
    ob.anchor = p;
    ob.pixel = project(k, ob.attitude, p, observer);
    ob.pixel_cov = PixelCovariance::isotropic(cfg.sigma_px);
    out.push_back(ob);
  }
  return out;
}

std::vector<VisibilityStatus> scenario_visibility(const ScenarioConfig& cfg,
                                                  const Vec3& observer) {
  std::vector<VisibilityStatus> out(cfg.targets.size(), VisibilityStatus::Visible);
  if (!cfg.visibility) return out;
  for (std::size_t i = 0; i < cfg.targets.size(); ++i) {
    out[i] = check_visibility(*cfg.visibility, cfg.camera.fov_deg, observer, cfg.targets[i],
                              cfg.visibility->target_radii[i]);
  }
  return out;
}

// ---- TRN ------------------------------------------------------------------

std::string_view trn_variant_name(TrnVariant v) {
  return v == TrnVariant::Nadir ? "nadir" : "canted45";
}

TrnVariant parse_trn_variant(std::string_view s) {
  if (s == "nadir") return TrnVariant::Nadir;
  if (s == "canted45") return TrnVariant::Canted45;
  fail(ErrorCode::InvalidInput, "unknown TRN variant '" + std::string(s) + "'");
}

ScenarioConfig build_trn_scenario(TrnVariant variant, double altitude) {
  if (!(altitude >= kTrnMinAltitude && altitude <= kTrnMaxAltitude)) {
    fail(ErrorCode::OutOfEnvelope, "TRN altitude " + std::to_string(altitude) +
                                       " m outside [200, 2000] m");
  }
  ScenarioConfig cfg;
  cfg.name = "trn-" + std::string(trn_variant_name(variant));
  cfg.length_unit = "m";
  cfg.camera = CameraSpec{90.0, 1024.0};
  cfg.mounting = Mounting::Fixed;
  if (variant == TrnVariant::Nadir) {
    // 300 m apart, centered beneath the lander, first point 30 m higher.
    cfg.targets = {Vec3(-150.0, 0.0, 30.0), Vec3(150.0, 0.0, 0.0)};
    cfg.boresight = -Vec3::UnitZ();
    cfg.up_hint = Vec3::UnitX();
  } else {
    cfg.targets = {Vec3(300.0, 0.0, 0.0), Vec3(3000.0, 0.0, 0.0)};
    cfg.boresight = Vec3(std::sqrt(0.5), 0.0, -std::sqrt(0.5));
    cfg.up_hint = Vec3::UnitY();
  }
  cfg.truths = {Vec3(0.0, 0.0, altitude)};
  cfg.sigma_px = 0.1;
  cfg.methods = {Method::Dlt, Method::DltUnit, Method::ExplicitRange,
                 Method::Hs, Method::Quat, Method::Lost};
  cfg.reference = Method::Quat;
  cfg.samples = 1000;
  return cfg;
}

// ---- Uranus ---------------------------------------------------------------

VisibilityModel UranusSystem::visibility() const {
  VisibilityModel m;
  m.rule = rule;
  m.occluder = Body{"uranus", Vec3::Zero(), uranus_radius};
  m.target_radii = {titania_radius, oberon_radius};
  m.sun_direction = sun_direction.normalized();
  return m;
}

ScenarioConfig build_uranus_scenario(std::vector<Vec3> truths, const UranusSystem& sys) {
  ScenarioConfig cfg;
  cfg.name = "uranus-moons";
  cfg.length_unit = "km";
  cfg.camera = sys.camera;
  cfg.mounting = Mounting::Tracking;
  cfg.up_hint = Vec3::UnitZ();
  cfg.targets = {sys.titania, sys.oberon};
  cfg.truths = std::move(truths);
  cfg.sigma_px = sys.sigma_px;
  cfg.methods = {Method::Dlt, Method::Hs, Method::Lost};
  cfg.reference = Method::Lost;
  cfg.visibility = sys.visibility();
  return cfg;
}

std::vector<GridPoint> build_uranus_grid(double extent_km, int resolution,
                                         const UranusSystem& sys) {
  if (!(extent_km > 0.0)) fail(ErrorCode::InvalidInput, "grid extent must be positive");
  if (resolution < 1) fail(ErrorCode::InvalidInput, "grid resolution must be positive");
  const VisibilityModel model = sys.visibility();
  const std::vector<Vec3> moons = {sys.titania, sys.oberon};
  std::vector<GridPoint> grid;
  grid.reserve(static_cast<std::size_t>(resolution) * resolution);
  const double step = resolution > 1 ? extent_km / (resolution - 1) : 0.0;
  const double origin = resolution > 1 ? -0.5 * extent_km : 0.0;
  for (int iy = 0; iy < resolution; ++iy) {
    for (int ix = 0; ix < resolution; ++ix) {
      GridPoint g;
      g.position = Vec3(origin + ix * step, origin + iy * step, 0.0);
      g.triangulable = true;
      for (std::size_t m = 0; m < moons.size(); ++m) {
        g.status.push_back(check_visibility(model, sys.camera.fov_deg, g.position, moons[m],
                                            model.target_radii[m]));
        g.triangulable = g.triangulable && g.status.back() == VisibilityStatus::Visible;
      }
      grid.push_back(std::move(g));
    }
  }
  return grid;
}

// ---- RelNav ---------------------------------------------------------------

RelNavScenario build_relnav_scenario(const Vec3& target_offset, int epochs, double sigma_px) {
  if (epochs < 2) fail(ErrorCode::TooFewObservations, "need at least two epochs");
  RelNavScenario s;
  const double n = s.mean_motion;
  // Bounded in-plane ellipse (vy0 = -2 n x0) plus a cross-track oscillation.
  s.truth << 200.0, -500.0, 50.0, 0.05, -2.0 * n * 200.0, 0.02;
  const CwStm stm(n);
  const double span = 0.5 * M_PI / n;
  const CameraIntrinsics k = CameraSpec{20.0, 1024.0}.intrinsics();
  for (int i = 0; i < epochs; ++i) {
    DynamicObservation ob;
    ob.time = span * i / (epochs - 1);
    ob.target_offset = target_offset;
    const Vec3 cam = stm.phi_r(ob.time) * s.truth;
    ob.base.intrinsics = k;
    ob.base.attitude = look_at(-cam, Vec3::UnitZ());
    ob.base.anchor = Vec3::Zero();
    ob.base.pixel = project(k, ob.base.attitude, target_offset, cam);
    ob.base.pixel_cov = PixelCovariance::isotropic(sigma_px);
    s.observations.push_back(ob);
  }
  return s;
}

// ---- Monte Carlo ----------------------------------------------------------

std::uint64_t draw_seed(std::uint64_t master, std::uint64_t index) {
  // splitmix64 finalizer over a counter keyed by the master seed
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  return mix(mix(master) ^ (index * 0xd1b54a32d192ed03ULL + 0x632be59bd9b4e019ULL));
}

int default_worker_count() {
  int hw = static_cast<int>(std::thread::hardware_concurrency());
  if (hw < 1) hw = 1;
  if (const char* env = std::getenv("TRILOST_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  return hw;
}

namespace {

// Running mean and scatter, merged with the parallel update of Chan et al.
struct Moments {
  std::int64_t n = 0;
  Vec3 mean = Vec3::Zero();
  Mat3 m2 = Mat3::Zero();

  void add(const Vec3& x) {
    ++n;
    const Vec3 d = x - mean;
    mean += d / static_cast<double>(n);
    m2 += d * (x - mean).transpose();
  }
  void merge(const Moments& o) {
    if (o.n == 0) return;
    if (n == 0) {
      *this = o;
      return;
    }
    const double na = static_cast<double>(n), nb = static_cast<double>(o.n);
    const Vec3 d = o.mean - mean;
    mean += d * (nb / (na + nb));
    m2 += o.m2 + d * d.transpose() * (na * nb / (na + nb));
    n += o.n;
  }
  Mat3 covariance() const {
    if (n < 2) return Mat3::Zero();
    const Mat3 c = m2 / static_cast<double>(n - 1);
    return 0.5 * (c + c.transpose());
  }
};

struct PairTally {
  Moments diff;
  std::int64_t a_closer = 0, b_closer = 0, ties = 0;
};

struct ChunkResult {
  std::vector<Moments> methods;
  std::vector<std::int64_t> failures;
  std::vector<PairTally> pairs;
  std::int64_t failed_draws = 0;
  std::vector<std::vector<Vec3>> draws;
};

std::vector<std::pair<std::size_t, std::size_t>> method_pairs(std::size_t m) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t a = 0; a < m; ++a) {
    for (std::size_t b = a + 1; b < m; ++b) out.emplace_back(a, b);
  }
  return out;
}

ChunkResult run_chunk(const ScenarioConfig& cfg, const std::vector<LosObservation>& clean,
                      const Vec3& truth, std::uint64_t point_seed, std::int64_t begin,
                      std::int64_t end) {
  const std::size_t nm = cfg.methods.size();
  const auto pairs = method_pairs(nm);
  ChunkResult r;
  r.methods.resize(nm);
  r.failures.assign(nm, 0);
  r.pairs.resize(pairs.size());
  if (cfg.keep_draws) r.draws.resize(nm);

  std::vector<LosObservation> noisy = clean;
  std::vector<Vec3> est(nm);
  std::vector<bool> ok(nm);
  for (std::int64_t d = begin; d < end; ++d) {
    std::mt19937_64 rng(draw_seed(point_seed, static_cast<std::uint64_t>(d)));
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (std::size_t i = 0; i < clean.size(); ++i) {
      const double du = gauss(rng);
      const double dv = gauss(rng);
      noisy[i].pixel.uv = clean[i].pixel.uv + cfg.sigma_px * Vec2(du, dv);
    }
    bool any_fail = false;
    for (std::size_t m = 0; m < nm; ++m) {
      try {
        est[m] = triangulate(cfg.methods[m], noisy).position;
        ok[m] = est[m].allFinite();
      } catch (const Error&) {
        ok[m] = false;
      }
      if (ok[m]) {
        r.methods[m].add(est[m] - truth);
        if (cfg.keep_draws) r.draws[m].push_back(est[m]);
      } else {
        ++r.failures[m];
        any_fail = true;
      }
    }
    if (any_fail) ++r.failed_draws;
    for (std::size_t p = 0; p < pairs.size(); ++p) {
      const auto [a, b] = pairs[p];
      if (!ok[a] || !ok[b]) continue;
      PairTally& t = r.pairs[p];
      t.diff.add(est[a] - est[b]);
      const double ea = (est[a] - truth).norm(), eb = (est[b] - truth).norm();
      if (ea < eb) {
        ++t.a_closer;
      } else if (eb < ea) {
        ++t.b_closer;
      } else {
        ++t.ties;
      }
    }
  }
  return r;
}

PointReport run_point(const ScenarioConfig& cfg, std::size_t index, int workers) {
  PointReport rep;
  rep.truth = cfg.truths[index];
  rep.visibility = scenario_visibility(cfg, rep.truth);
  for (VisibilityStatus s : rep.visibility) rep.visible = rep.visible && s == VisibilityStatus::Visible;
  if (!rep.visible) return rep;

  const std::vector<LosObservation> clean = scenario_observations(cfg, rep.truth);
  const std::uint64_t point_seed = draw_seed(cfg.seed, 0x5eedULL + index);
  const std::int64_t chunks = (cfg.samples + kDrawsPerChunk - 1) / kDrawsPerChunk;
  std::vector<ChunkResult> results(static_cast<std::size_t>(chunks));
  std::atomic<std::int64_t> next{0};
  auto work = [&] {
    for (std::int64_t c = next++; c < chunks; c = next++) {
      const std::int64_t b = c * kDrawsPerChunk;
      const std::int64_t e = std::min(cfg.samples, b + kDrawsPerChunk);
      results[static_cast<std::size_t>(c)] = run_chunk(cfg, clean, rep.truth, point_seed, b, e);
    }
  };
  const int nthreads = static_cast<int>(std::min<std::int64_t>(std::max(workers, 1), chunks));
  if (nthreads <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < nthreads; ++t) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }

  // Merge in chunk order so the result does not depend on scheduling.
  const std::size_t nm = cfg.methods.size();
  const auto pairs = method_pairs(nm);
  std::vector<Moments> mom(nm);
  std::vector<PairTally> pt(pairs.size());
  rep.methods.resize(nm);
  for (const ChunkResult& r : results) {
    rep.failed_draws += r.failed_draws;
    for (std::size_t m = 0; m < nm; ++m) {
      mom[m].merge(r.methods[m]);
      rep.methods[m].failures += r.failures[m];
      if (cfg.keep_draws) {
        rep.methods[m].draws.insert(rep.methods[m].draws.end(), r.draws[m].begin(),
                                    r.draws[m].end());
      }
    }
    for (std::size_t p = 0; p < pairs.size(); ++p) {
      pt[p].diff.merge(r.pairs[p].diff);
      pt[p].a_closer += r.pairs[p].a_closer;
      pt[p].b_closer += r.pairs[p].b_closer;
      pt[p].ties += r.pairs[p].ties;
    }
  }
  for (std::size_t m = 0; m < nm; ++m) {
    MethodStats& s = rep.methods[m];
    s.method = cfg.methods[m];
    s.successes = mom[m].n;
    s.mean_error = mom[m].mean;
    s.sample_covariance = mom[m].covariance();
    s.total_std = std::sqrt(s.sample_covariance.trace());
    try {
      s.analytic_covariance = analytic_covariance(s.method, clean);
    } catch (const Error&) {
      s.analytic_covariance.reset();
    }
    if (static_cast<double>(s.failures) > kSuspiciousFailureRate * static_cast<double>(cfg.samples)) {
      rep.suspicious = true;
    }
  }
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    PairStats s;
    s.a = cfg.methods[pairs[p].first];
    s.b = cfg.methods[pairs[p].second];
    s.count = pt[p].diff.n;
    s.mean_difference = pt[p].diff.mean;
    s.difference_std = std::sqrt(pt[p].diff.covariance().trace());
    s.a_closer = pt[p].a_closer;
    s.b_closer = pt[p].b_closer;
    s.ties = pt[p].ties;
    rep.pairs.push_back(s);
  }
  return rep;
}

}  // namespace

const MethodStats& PointReport::stats(Method m) const {
  for (const auto& s : methods) {
    if (s.method == m) return s;
  }
  fail(ErrorCode::MissingMethod, "method '" + std::string(method_name(m)) + "' not in report");
}

const PairStats& PointReport::pair(Method a, Method b) const {
  for (const auto& p : pairs) {
    if ((p.a == a && p.b == b) || (p.a == b && p.b == a)) return p;
  }
  fail(ErrorCode::MissingMethod, "pair '" + std::string(method_name(a)) + "'/'" +
                                     std::string(method_name(b)) + "' not in report");
}

MonteCarloReport run_monte_carlo(const ScenarioConfig& cfg, int workers) {
  cfg.validate();
  if (workers <= 0) workers = default_worker_count();
  MonteCarloReport rep;
  rep.scenario = cfg.name;
  rep.length_unit = cfg.length_unit;
  rep.seed = cfg.seed;
  rep.samples = cfg.samples;
  rep.sigma_px = cfg.sigma_px;
  rep.methods = cfg.methods;
  rep.reference = cfg.reference;
  for (std::size_t i = 0; i < cfg.truths.size(); ++i) rep.points.push_back(run_point(cfg, i, workers));
  return rep;
}

double precision_loss(const PointReport& point, Method baseline, Method reference, bool analytic) {
  const MethodStats& b = point.stats(baseline);
  const MethodStats& r = point.stats(reference);
  double sb = b.total_std, sr = r.total_std;
  if (analytic) {
    if (!b.analytic_covariance || !r.analytic_covariance) {
      fail(ErrorCode::MissingMethod, "analytic covariance unavailable");
    }
    sb = std::sqrt(b.analytic_covariance->trace());
    sr = std::sqrt(r.analytic_covariance->trace());
  }
  return 100.0 * (sb / sr - 1.0);
}

}  // namespace trilost

#include "trilost/cli.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <limits>
#include <ostream>
#include <random>
#include <sstream>

#include "trilost/io.hpp"
#include "trilost/optimal.hpp"

namespace trilost {

namespace {

void write_text(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << text;
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) fail(ErrorCode::Io, "cannot write '" + path + "'");
  f << text;
}

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

// ---- subcommand bodies ----------------------------------------------------

struct TriangulateArgs {
  std::string method = "lost";
  std::string in;
  std::string out;
  std::string backend = "qr";
};

int run_triangulate(const TriangulateArgs& a, std::ostream& out) {
  const Method m = parse_method(a.method);
  const auto obs = observations_from_json(read_json_file(a.in));
  TriangulationEstimate est;
  const LeastSquaresBackend backend = parse_backend(a.backend);
  switch (m) {
    case Method::Dlt: est = dlt_triangulate(obs, LosNormalization::ImagePlane, backend); break;
    case Method::DltUnit: est = dlt_triangulate(obs, LosNormalization::UnitVector, backend); break;
    case Method::ExplicitRange: est = explicit_range_triangulate(obs, backend); break;
    case Method::Lost: est = lost_triangulate(obs, backend); break;
    default: est = triangulate(m, obs); break;
  }
  write_text(a.out, dump(estimate_to_json(m, est)), out);
  return kExitOk;
}

struct ScenarioArgs {
  std::string config;
  std::int64_t samples = 0;
  std::int64_t seed = -1;
  int threads = 0;
  std::string out;
  std::string csv;
  std::string variant = "canted45";
  double altitude = 1000.0;
};

int run_scenario(const ScenarioArgs& a, std::ostream& out) {
  ScenarioConfig cfg = scenario_from_json(read_json_file(a.config));
  if (a.samples > 0) cfg.samples = a.samples;
  if (a.seed >= 0) cfg.seed = static_cast<std::uint64_t>(a.seed);
  cfg.validate();
  const MonteCarloReport rep = run_monte_carlo(cfg, a.threads);
  if (!a.csv.empty()) write_text(a.csv, report_csv(rep), out);
  write_text(a.out, dump(report_to_json(rep)), out);
  return kExitOk;
}

int run_scenario_init(const ScenarioArgs& a, std::ostream& out) {
  ScenarioConfig cfg = build_trn_scenario(parse_trn_variant(a.variant), a.altitude);
  if (a.samples > 0) cfg.samples = a.samples;
  if (a.seed >= 0) cfg.seed = static_cast<std::uint64_t>(a.seed);
  write_text(a.out, dump(scenario_to_json(cfg)), out);
  return kExitOk;
}

struct UranusArgs {
  double extent = 3e6;
  int resolution = 101;
  std::int64_t samples = 0;  // 0: analytic only
  std::int64_t seed = 1;
  int threads = 0;
  std::string csv;
};

std::string fmt(double v) {
  std::ostringstream s;
  s << std::setprecision(std::numeric_limits<double>::max_digits10) << v;
  return s.str();
}

int run_uranus(const UranusArgs& a, std::ostream& out) {
  const UranusSystem sys;
  const auto grid = build_uranus_grid(a.extent, a.resolution, sys);
  std::vector<Vec3> truths;
  for (const auto& g : grid) {
    if (g.triangulable) truths.push_back(g.position);
  }
  if (truths.empty()) fail(ErrorCode::InvalidInput, "no triangulable grid points");
  ScenarioConfig cfg = build_uranus_scenario(truths, sys);
  if (a.samples > 0) {
    cfg.samples = a.samples;
    cfg.seed = static_cast<std::uint64_t>(a.seed);
    write_text(a.csv, report_csv(run_monte_carlo(cfg, a.threads)), out);
    return kExitOk;
  }
  std::ostringstream csv;
  csv << "x,y,method,sigma_analytic,sigma_sample,loss_pct\n";
  for (const Vec3& r : truths) {
    const auto obs = scenario_observations(cfg, r);
    const double ref = std::sqrt(analytic_covariance(Method::Lost, obs).trace());
    for (Method m : cfg.methods) {
      const double s = std::sqrt(analytic_covariance(m, obs).trace());
      csv << fmt(r.x()) << ',' << fmt(r.y()) << ',' << method_name(m) << ',' << fmt(s) << ",,"
          << fmt(100.0 * (s / ref - 1.0)) << '\n';
    }
  }
  write_text(a.csv, csv.str(), out);
  return kExitOk;
}

struct TrnArgs {
  std::string variant = "canted45";
  double from = kTrnMinAltitude, to = kTrnMaxAltitude, step = 100.0;
  std::int64_t samples = 1000;
  std::int64_t seed = 1;
  int threads = 0;
  std::string csv;
};

int run_trn_sweep(const TrnArgs& a, std::ostream& out) {
  if (!(a.step > 0.0)) fail(ErrorCode::InvalidInput, "step must be positive");
  const TrnVariant v = parse_trn_variant(a.variant);
  std::ostringstream csv;
  csv << "altitude,method,sigma_analytic,sigma_sample,loss_pct\n";
  for (double h = a.from; h <= a.to + 1e-9; h += a.step) {
    ScenarioConfig cfg = build_trn_scenario(v, h);
    cfg.samples = a.samples;
    cfg.seed = static_cast<std::uint64_t>(a.seed);
    const MonteCarloReport rep = run_monte_carlo(cfg, a.threads);
    const PointReport& p = rep.points[0];
    for (const MethodStats& s : p.methods) {
      csv << fmt(h) << ',' << method_name(s.method) << ','
          << (s.analytic_covariance ? fmt(std::sqrt(s.analytic_covariance->trace())) : "") << ','
          << fmt(s.total_std) << ',' << fmt(precision_loss(p, s.method, *cfg.reference, true))
          << '\n';
    }
  }
  write_text(a.csv, csv.str(), out);
  return kExitOk;
}

struct RelNavArgs {
  double offset = 10.0;
  double sigma_px = 0.1;
  int epochs = 10;
  std::int64_t seed = 1;
};

int run_relnav(const RelNavArgs& a, std::ostream& out) {
  Json j;
  j["schema"] = 1;
  const RelNavScenario chief = build_relnav_scenario(Vec3::Zero(), a.epochs, a.sigma_px);
  const CwStm stm(chief.mean_motion);
  const ObservabilityReport rep = observability_report(chief.observations, stm);
  Json h;
  h["singular_values"] = std::vector<double>(rep.singular_values.data(), rep.singular_values.data() + 6);
  h["near_zero"] = rep.null_directions.size();
  h["homothety"] = rep.homothety;
  if (rep.null_directions.size() == 1) {
    h["null_direction_cosine"] = std::abs(rep.null_directions[0].dot(chief.truth.normalized()));
  }
  j["chief_at_origin"] = h;

  const RelNavScenario off = build_relnav_scenario(Vec3(a.offset, 0.0, 0.0), a.epochs, a.sigma_px);
  Json o;
  o["target_offset"] = {a.offset, 0.0, 0.0};
  const ObservabilityReport ro = observability_report(off.observations, stm);
  o["singular_values"] = std::vector<double>(ro.singular_values.data(), ro.singular_values.data() + 6);
  o["near_zero"] = ro.null_directions.size();
  if (ro.null_directions.empty()) {
    const StateEstimate6 clean = dynamic_dlt(off.observations, stm);
    o["noise_free_relative_error"] = (clean.state - off.truth).norm() / off.truth.norm();
    // One noisy realization with the sandwich covariance.
    std::mt19937_64 rng(draw_seed(static_cast<std::uint64_t>(a.seed), 0));
    std::normal_distribution<double> n(0.0, a.sigma_px);
    std::vector<DynamicObservation> noisy = off.observations;
    for (auto& ob : noisy) ob.base.pixel.uv += Vec2(n(rng), n(rng));
    const StateEstimate6 est = dynamic_dlt(noisy, stm);
    o["estimate"] = std::vector<double>(est.state.data(), est.state.data() + 6);
    o["truth"] = std::vector<double>(off.truth.data(), off.truth.data() + 6);
    o["position_std"] = std::sqrt(est.covariance->topLeftCorner<3, 3>().trace());
    o["velocity_std"] = std::sqrt(est.covariance->bottomRightCorner<3, 3>().trace());
  }
  j["target_offset"] = o;
  out << dump(j);
  return kExitOk;
}

struct ReconstructArgs {
  std::string in;
  std::string methods = "dlt,lost";
  double sigma_px = 0.5;
  bool strict = false;
  bool allow_large_er = false;
  int threads = 0;
  std::string csv;
  std::string format = "json";
};

int run_reconstruct(const ReconstructArgs& a, std::ostream& out, std::ostream& err) {
  const BundlerDataset ds = parse_bundler(a.in, a.strict);
  for (const auto& w : ds.warnings) err << "warning: " << w << '\n';
  RetriangulateOptions opts;
  opts.sigma_px = a.sigma_px;
  opts.allow_large_explicit_range = a.allow_large_er;
  opts.workers = a.threads;
  const ReconstructionReport rep = retriangulate(ds, parse_method_list(a.methods), opts);
  if (!a.csv.empty()) write_text(a.csv, histogram_csv(rep), out);
  if (a.format == "csv") {
    out << histogram_csv(rep);
  } else {
    out << dump(reconstruction_summary_json(rep));
  }
  return kExitOk;
}

// ---- selftest -------------------------------------------------------------

struct Check {
  std::string name;
  std::function<bool()> body;
};

int run_selftest(std::ostream& out) {
  std::vector<Check> checks;
  checks.push_back({"noise-free exactness (TRN and Uranus geometries)", [] {
    std::vector<ScenarioConfig> cfgs;
    for (double h : {250.0, 1000.0, 1900.0}) {
      cfgs.push_back(build_trn_scenario(TrnVariant::Nadir, h));
      cfgs.push_back(build_trn_scenario(TrnVariant::Canted45, h));
    }
    for (const ScenarioConfig& cfg : cfgs) {
      const auto obs = scenario_observations(cfg, cfg.truths[0]);
      for (Method m : {Method::Dlt, Method::DltUnit, Method::Plucker, Method::ExplicitRange,
                       Method::Hs, Method::Quat, Method::Lost}) {
        if ((triangulate(m, obs).position - cfg.truths[0]).norm() > 1e-9 * 3000.0) return false;
      }
    }
    const auto grid = build_uranus_grid(3e6, 9);
    std::vector<Vec3> truths;
    for (const auto& g : grid) {
      if (g.triangulable) truths.push_back(g.position);
    }
    const ScenarioConfig u = build_uranus_scenario(truths);
    for (const Vec3& r : truths) {
      const auto obs = scenario_observations(u, r);
      for (Method m : {Method::Dlt, Method::Plucker, Method::Hs, Method::Lost}) {
        if ((triangulate(m, obs).position - r).norm() > 1e-9 * (r.norm() + 5e5)) return false;
      }
    }
    return true;
  }});
  checks.push_back({"two-view covariance parity (HS = LOST)", [] {
    for (double h : {300.0, 800.0, 1500.0}) {
      const ScenarioConfig cfg = build_trn_scenario(TrnVariant::Canted45, h);
      const auto obs = scenario_observations(cfg, cfg.truths[0]);
      const Mat3 a = hs_covariance(obs[0], obs[1]);
      if ((a - lost_covariance(obs)).norm() > 1e-12 * a.norm()) return false;
    }
    return true;
  }});
  checks.push_back({"unit-vector DLT equals explicit range for two views", [] {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> n(0.0, 0.5);
    const ScenarioConfig cfg = build_trn_scenario(TrnVariant::Canted45, 700.0);
    for (int k = 0; k < 100; ++k) {
      auto obs = scenario_observations(cfg, cfg.truths[0]);
      for (auto& ob : obs) ob.pixel.uv += Vec2(n(rng), n(rng));
      const Vec3 a = triangulate(Method::DltUnit, obs).position;
      const Vec3 b = triangulate(Method::ExplicitRange, obs).position;
      if ((a - b).norm() > 1e-10 * 3000.0) return false;
    }
    return true;
  }});
  checks.push_back({"relnav homothety and offset recovery", [] {
    const RelNavScenario s0 = build_relnav_scenario(Vec3::Zero());
    const CwStm stm(s0.mean_motion);
    const ObservabilityReport r = observability_report(s0.observations, stm);
    if (!r.homothety || r.null_directions.size() != 1) return false;
    if (std::abs(r.null_directions[0].dot(s0.truth.normalized())) < 1.0 - 1e-8) return false;
    const RelNavScenario s1 = build_relnav_scenario(Vec3(10.0, 0.0, 0.0));
    return (dynamic_dlt(s1.observations, stm).state - s1.truth).norm() <= 1e-6 * s1.truth.norm();
  }});
  checks.push_back({"Monte Carlo determinism across worker counts", [] {
    ScenarioConfig cfg = build_trn_scenario(TrnVariant::Canted45, 900.0);
    cfg.samples = 700;
    const Json a = report_to_json(run_monte_carlo(cfg, 1));
    const Json b = report_to_json(run_monte_carlo(cfg, 2));
    return a.dump() == b.dump();
  }});

  bool all = true;
  for (const Check& c : checks) {
    bool ok = false;
    std::string note;
    try {
      ok = c.body();
    } catch (const std::exception& e) {
      note = std::string(" (") + e.what() + ")";
    }
    all = all && ok;
    out << (ok ? "PASS " : "FAIL ") << c.name << note << '\n';
  }
  return all ? kExitOk : kExitNumerical;
}

void report_error(std::ostream& err, bool json, const std::string& code, const std::string& msg) {
  if (json) {
    Json j;
    j["error"] = {{"code", code}, {"message", msg}};
    err << j.dump() << '\n';
  } else {
    err << "error [" << code << "]: " << msg << '\n';
  }
}

}  // namespace

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Line-of-sight triangulation toolkit", "trilost"};
  app.require_subcommand(1);
  bool json_errors = false;
  app.add_flag("--json-errors", json_errors, "Machine-readable errors on stderr");

  TriangulateArgs ta;
  auto* tri = app.add_subcommand("triangulate", "Triangulate one point from JSON observations");
  tri->add_option("--method", ta.method, "dlt, dlt-unit, plucker, explicit-range, hs, quat, lost")
      ->capture_default_str();
  tri->add_option("--in", ta.in, "Observation JSON file")->required();
  tri->add_option("--out", ta.out, "Output file (default stdout)");
  tri->add_option("--backend", ta.backend, "normal, qr or tls")->capture_default_str();

  ScenarioArgs sa;
  auto* scen = app.add_subcommand("scenario", "Scenario configs and Monte Carlo runs");
  scen->require_subcommand(1);
  auto* srun = scen->add_subcommand("run", "Run a scenario config");
  srun->add_option("--config", sa.config, "ScenarioConfig JSON")->required();
  srun->add_option("--samples", sa.samples, "Override the sample count");
  srun->add_option("--seed", sa.seed, "Override the master seed");
  srun->add_option("--threads", sa.threads, "Worker threads (default TRILOST_THREADS or all)");
  srun->add_option("--out", sa.out, "Report JSON (default stdout)");
  srun->add_option("--csv", sa.csv, "Also write the flat CSV table here");
  auto* sinit = scen->add_subcommand("init", "Emit a TRN scenario config");
  sinit->add_option("--variant", sa.variant, "nadir or canted45")->capture_default_str();
  sinit->add_option("--altitude", sa.altitude, "Lander altitude, m")->capture_default_str();
  sinit->add_option("--samples", sa.samples, "Sample count");
  sinit->add_option("--seed", sa.seed, "Master seed");
  sinit->add_option("--out", sa.out, "Output file (default stdout)");

  UranusArgs ua;
  auto* ura = app.add_subcommand("uranus-map", "Precision map around Uranus from two moons");
  ura->add_option("--extent", ua.extent, "Grid side length, km")->capture_default_str();
  ura->add_option("--resolution", ua.resolution, "Points per side")->capture_default_str();
  ura->add_option("--samples", ua.samples, "Monte Carlo draws per point (0: analytic only)")
      ->capture_default_str();
  ura->add_option("--seed", ua.seed, "Master seed")->capture_default_str();
  ura->add_option("--threads", ua.threads, "Worker threads");
  ura->add_option("--csv", ua.csv, "Output CSV (default stdout)");

  TrnArgs tr;
  auto* trn = app.add_subcommand("trn-sweep", "Precision versus altitude for a TRN descent");
  trn->add_option("--variant", tr.variant, "nadir or canted45")->capture_default_str();
  trn->add_option("--from", tr.from, "Lowest altitude, m")->capture_default_str();
  trn->add_option("--to", tr.to, "Highest altitude, m")->capture_default_str();
  trn->add_option("--step", tr.step, "Altitude step, m")->capture_default_str();
  trn->add_option("--samples", tr.samples, "Draws per altitude")->capture_default_str();
  trn->add_option("--seed", tr.seed, "Master seed")->capture_default_str();
  trn->add_option("--threads", tr.threads, "Worker threads");
  trn->add_option("--csv", tr.csv, "Output CSV (default stdout)");

  RelNavArgs ra;
  auto* rel = app.add_subcommand("relnav", "Angles-only relative navigation");
  rel->require_subcommand(1);
  auto* demo = rel->add_subcommand("demo", "Homothety and offset-restored observability");
  demo->add_option("--offset", ra.offset, "Radial target offset on the chief, m")->capture_default_str();
  demo->add_option("--sigma-px", ra.sigma_px, "Pixel noise")->capture_default_str();
  demo->add_option("--epochs", ra.epochs, "Sightings over a quarter period")->capture_default_str();
  demo->add_option("--seed", ra.seed, "Seed for the noisy realization")->capture_default_str();

  ReconstructArgs rc;
  auto* rec = app.add_subcommand("reconstruct", "Re-triangulate a Bundler reconstruction");
  rec->add_option("--in", rc.in, "Bundler v0.3 .out file")->required();
  rec->add_option("--methods", rc.methods, "Comma-separated methods")->capture_default_str();
  rec->add_option("--sigma-px", rc.sigma_px, "Keypoint noise, px")->capture_default_str();
  rec->add_flag("--strict", rc.strict, "Reject radial distortion instead of ignoring it");
  rec->add_flag("--allow-large-explicit-range", rc.allow_large_er,
                "Run explicit range above 50 views");
  rec->add_option("--threads", rc.threads, "Worker threads");
  rec->add_option("--csv", rc.csv, "Write the residual histogram CSV here");
  rec->add_option("--format", rc.format, "Stdout format: json or csv")
      ->check(CLI::IsMember({"json", "csv"}))
      ->capture_default_str();

  auto* self = app.add_subcommand("selftest", "Run the built-in invariant checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*tri) return run_triangulate(ta, out);
    if (*srun) return run_scenario(sa, out);
    if (*sinit) return run_scenario_init(sa, out);
    if (*ura) return run_uranus(ua, out);
    if (*trn) return run_trn_sweep(tr, out);
    if (*demo) return run_relnav(ra, out);
    if (*rec) return run_reconstruct(rc, out, err);
    if (*self) return run_selftest(out);
  } catch (const Error& e) {
    report_error(err, json_errors, std::string(error_name(e.code())), e.what());
    return is_data_error(e.code()) ? kExitData : kExitNumerical;
  } catch (const std::exception& e) {
    report_error(err, json_errors, "Internal", e.what());
    return kExitNumerical;
  }
  return kExitUsage;
}

}  // namespace trilost

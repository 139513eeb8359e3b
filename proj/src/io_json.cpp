#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "trilost/io.hpp"

namespace trilost {

namespace {

[[noreturn]] void invalid(const std::string& what) { fail(ErrorCode::InvalidInput, what); }

template <int N>
Eigen::Matrix<double, N, 1> vec_from(const Json& j, const char* what) {
  if (!j.is_array() || j.size() != N) invalid(std::string(what) + ": expected " + std::to_string(N) + " numbers");
  Eigen::Matrix<double, N, 1> v;
  for (int i = 0; i < N; ++i) {
    if (!j[i].is_number()) invalid(std::string(what) + ": expected numbers");
    v(i) = j[i].get<double>();
    if (!std::isfinite(v(i))) invalid(std::string(what) + ": non-finite value");
  }
  return v;
}

template <int N>
Eigen::Matrix<double, N, N> mat_from(const Json& j, const char* what) {
  if (!j.is_array() || j.size() != N) invalid(std::string(what) + ": expected " + std::to_string(N) + " rows");
  Eigen::Matrix<double, N, N> m;
  for (int r = 0; r < N; ++r) m.row(r) = vec_from<N>(j[r], what).transpose();
  return m;
}

template <typename Derived>
Json to_array(const Eigen::MatrixBase<Derived>& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

template <typename Derived>
Json to_rows(const Eigen::MatrixBase<Derived>& m) {
  Json a = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) a.push_back(to_array(m.row(r).transpose()));
  return a;
}

double number(const Json& j, const char* key, std::optional<double> fallback = std::nullopt) {
  if (!j.contains(key)) {
    if (fallback) return *fallback;
    invalid(std::string("missing field '") + key + "'");
  }
  if (!j[key].is_number()) invalid(std::string("field '") + key + "' must be a number");
  const double v = j[key].get<double>();
  if (!std::isfinite(v)) invalid(std::string("field '") + key + "' must be finite");
  return v;
}

const Json& field(const Json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) invalid(std::string("missing field '") + key + "'");
  return j[key];
}

void check_schema(const Json& j) {
  if (!j.is_object()) invalid("expected a JSON object");
  if (!j.contains("schema")) invalid("missing field 'schema'");
  if (j["schema"] != 1) invalid("unsupported schema version");
}

template <typename F>
auto guarded(F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const nlohmann::json::exception& e) {
    invalid(std::string("malformed JSON: ") + e.what());
  }
}

}  // namespace

// ---- observations ---------------------------------------------------------

Json observation_to_json(const LosObservation& ob) {
  Json j;
  j["pixel"] = to_array(ob.pixel.uv);
  j["intrinsics"] = {{"dx", ob.intrinsics.dx},
                     {"dy", ob.intrinsics.dy},
                     {"alpha", ob.intrinsics.alpha},
                     {"up", ob.intrinsics.up},
                     {"vp", ob.intrinsics.vp}};
  j["attitude"] = {{"matrix", to_rows(ob.attitude.matrix())}};
  j["anchor"] = to_array(ob.anchor);
  if (ob.pixel_cov.is_isotropic()) {
    j["sigma_px"] = ob.pixel_cov.sigma();
  } else {
    j["pixel_covariance"] = to_rows(ob.pixel_cov.R);
  }
  return j;
}

LosObservation observation_from_json(const Json& j) {
  return guarded([&] {
    if (!j.is_object()) invalid("observation must be an object");
    LosObservation ob;
    ob.pixel.uv = vec_from<2>(field(j, "pixel"), "pixel");
    const Json& k = field(j, "intrinsics");
    ob.intrinsics.dx = number(k, "dx");
    ob.intrinsics.dy = number(k, "dy", ob.intrinsics.dx);
    ob.intrinsics.alpha = number(k, "alpha", 0.0);
    ob.intrinsics.up = number(k, "up", 0.0);
    ob.intrinsics.vp = number(k, "vp", 0.0);
    if (!ob.intrinsics.valid()) invalid("intrinsics need dx > 0 and dy > 0");
    const Json& a = field(j, "attitude");
    if (a.contains("quaternion_xyzw")) {
      const Vec4 q = vec_from<4>(a["quaternion_xyzw"], "quaternion_xyzw");
      ob.attitude = Rotation::from_quaternion(q(0), q(1), q(2), q(3));
    } else if (a.contains("matrix")) {
      ob.attitude = Rotation::from_matrix(mat_from<3>(a["matrix"], "attitude matrix"), 1e-9);
    } else {
      invalid("attitude needs 'quaternion_xyzw' or 'matrix'");
    }
    ob.anchor = vec_from<3>(field(j, "anchor"), "anchor");
    if (j.contains("pixel_covariance")) {
      const Mat2 r = mat_from<2>(j["pixel_covariance"], "pixel_covariance");
      if ((r - r.transpose()).cwiseAbs().maxCoeff() > 1e-14 * r.cwiseAbs().maxCoeff() ||
          Eigen::SelfAdjointEigenSolver<Mat2>(r).eigenvalues().minCoeff() <= 0.0) {
        invalid("pixel_covariance must be symmetric positive definite");
      }
      ob.pixel_cov.R = r;
    } else {
      const double s = number(j, "sigma_px");
      if (!(s > 0.0)) invalid("sigma_px must be positive");
      ob.pixel_cov = PixelCovariance::isotropic(s);
    }
    return ob;
  });
}

Json observations_to_json(const std::vector<LosObservation>& obs) {
  Json j;
  j["schema"] = 1;
  j["observations"] = Json::array();
  for (const auto& ob : obs) j["observations"].push_back(observation_to_json(ob));
  return j;
}

std::vector<LosObservation> observations_from_json(const Json& j) {
  return guarded([&] {
    check_schema(j);
    const Json& arr = field(j, "observations");
    if (!arr.is_array()) invalid("'observations' must be an array");
    std::vector<LosObservation> out;
    for (const auto& o : arr) out.push_back(observation_from_json(o));
    return out;
  });
}

Json estimate_to_json(Method m, const TriangulationEstimate& est) {
  Json j;
  j["schema"] = 1;
  j["method"] = std::string(method_name(m));
  j["position"] = to_array(est.position);
  if (est.covariance) {
    j["covariance"] = to_rows(*est.covariance);
    j["total_std"] = std::sqrt(est.covariance->trace());
  } else {
    j["covariance"] = nullptr;
  }
  const TriangulationDiagnostics& d = est.diagnostics;
  Json diag;
  diag["condition_number"] = d.condition_number;
  diag["residual_norm"] = d.residual_norm;
  diag["ranges"] = d.ranges;
  diag["negative_range"] = d.negative_range;
  diag["large_system_warning"] = d.large_system_warning;
  j["diagnostics"] = diag;
  return j;
}

// ---- scenarios ------------------------------------------------------------

Json scenario_to_json(const ScenarioConfig& cfg) {
  Json j;
  j["schema"] = cfg.schema;
  j["name"] = cfg.name;
  j["length_unit"] = cfg.length_unit;
  j["camera"] = {{"fov_deg", cfg.camera.fov_deg}, {"pixels", cfg.camera.pixels}};
  j["mounting"] = cfg.mounting == Mounting::Fixed ? "fixed" : "tracking";
  j["boresight"] = to_array(cfg.boresight);
  j["up_hint"] = to_array(cfg.up_hint);
  j["targets"] = Json::array();
  for (const auto& p : cfg.targets) j["targets"].push_back(to_array(p));
  j["truths"] = Json::array();
  for (const auto& p : cfg.truths) j["truths"].push_back(to_array(p));
  j["sigma_px"] = cfg.sigma_px;
  j["methods"] = Json::array();
  for (Method m : cfg.methods) j["methods"].push_back(std::string(method_name(m)));
  j["reference"] = cfg.reference ? Json(std::string(method_name(*cfg.reference))) : Json(nullptr);
  j["samples"] = cfg.samples;
  j["seed"] = cfg.seed;
  j["keep_draws"] = cfg.keep_draws;
  if (cfg.visibility) {
    const VisibilityModel& v = *cfg.visibility;
    j["visibility"] = {{"clearance_fraction", v.rule.clearance_fraction},
                       {"max_fill_fraction", v.rule.max_fill_fraction},
                       {"sun_exclusion_deg", v.rule.sun_exclusion_deg},
                       {"occluder",
                        {{"name", v.occluder.name},
                         {"center", to_array(v.occluder.center)},
                         {"radius", v.occluder.radius}}},
                       {"target_radii", v.target_radii},
                       {"sun_direction", to_array(v.sun_direction)}};
  } else {
    j["visibility"] = nullptr;
  }
  return j;
}

ScenarioConfig scenario_from_json(const Json& j) {
  return guarded([&] {
    check_schema(j);
    ScenarioConfig cfg;
    cfg.schema = j["schema"].get<int>();
    cfg.name = j.value("name", std::string());
    if (!j.contains("length_unit") || !j["length_unit"].is_string()) {
      invalid("scenario must declare 'length_unit'");
    }
    cfg.length_unit = j["length_unit"].get<std::string>();
    const Json& cam = field(j, "camera");
    cfg.camera.fov_deg = number(cam, "fov_deg");
    cfg.camera.pixels = number(cam, "pixels");
    const std::string mounting = j.value("mounting", std::string("fixed"));
    if (mounting == "fixed") {
      cfg.mounting = Mounting::Fixed;
    } else if (mounting == "tracking") {
      cfg.mounting = Mounting::Tracking;
    } else {
      invalid("mounting must be 'fixed' or 'tracking'");
    }
    if (j.contains("boresight")) cfg.boresight = vec_from<3>(j["boresight"], "boresight");
    if (j.contains("up_hint")) cfg.up_hint = vec_from<3>(j["up_hint"], "up_hint");
    for (const auto& p : field(j, "targets")) cfg.targets.push_back(vec_from<3>(p, "target"));
    for (const auto& p : field(j, "truths")) cfg.truths.push_back(vec_from<3>(p, "truth"));
    cfg.sigma_px = number(j, "sigma_px");
    for (const auto& m : field(j, "methods")) cfg.methods.push_back(parse_method(m.get<std::string>()));
    if (j.contains("reference") && !j["reference"].is_null()) {
      cfg.reference = parse_method(j["reference"].get<std::string>());
    }
    cfg.samples = field(j, "samples").get<std::int64_t>();
    cfg.seed = j.value("seed", std::uint64_t{1});
    cfg.keep_draws = j.value("keep_draws", false);
    if (j.contains("visibility") && !j["visibility"].is_null()) {
      const Json& v = j["visibility"];
      VisibilityModel m;
      m.rule.clearance_fraction = number(v, "clearance_fraction", 0.05);
      m.rule.max_fill_fraction = number(v, "max_fill_fraction", 0.80);
      m.rule.sun_exclusion_deg = number(v, "sun_exclusion_deg", 30.0);
      const Json& o = field(v, "occluder");
      m.occluder.name = o.value("name", std::string());
      m.occluder.center = vec_from<3>(field(o, "center"), "occluder center");
      m.occluder.radius = number(o, "radius");
      m.target_radii = field(v, "target_radii").get<std::vector<double>>();
      m.sun_direction = vec_from<3>(field(v, "sun_direction"), "sun_direction").normalized();
      cfg.visibility = m;
    }
    cfg.validate();
    return cfg;
  });
}

// ---- reports --------------------------------------------------------------

Json report_to_json(const MonteCarloReport& rep) {
  Json j;
  j["schema"] = rep.schema;
  j["scenario"] = rep.scenario;
  j["length_unit"] = rep.length_unit;
  j["seed"] = rep.seed;
  j["samples"] = rep.samples;
  j["sigma_px"] = rep.sigma_px;
  j["methods"] = Json::array();
  for (Method m : rep.methods) j["methods"].push_back(std::string(method_name(m)));
  j["reference"] = rep.reference ? Json(std::string(method_name(*rep.reference))) : Json(nullptr);
  j["points"] = Json::array();
  for (const PointReport& p : rep.points) {
    Json jp;
    jp["truth"] = to_array(p.truth);
    jp["visible"] = p.visible;
    jp["visibility"] = Json::array();
    for (VisibilityStatus s : p.visibility) jp["visibility"].push_back(std::string(visibility_name(s)));
    jp["failed_draws"] = p.failed_draws;
    jp["suspicious"] = p.suspicious;
    jp["methods"] = Json::array();
    for (const MethodStats& s : p.methods) {
      Json js;
      js["method"] = std::string(method_name(s.method));
      js["successes"] = s.successes;
      js["failures"] = s.failures;
      js["mean_error"] = to_array(s.mean_error);
      js["sample_covariance"] = to_rows(s.sample_covariance);
      js["total_std"] = s.total_std;
      if (s.analytic_covariance) {
        js["analytic_covariance"] = to_rows(*s.analytic_covariance);
        js["analytic_std"] = std::sqrt(s.analytic_covariance->trace());
      } else {
        js["analytic_covariance"] = nullptr;
        js["analytic_std"] = nullptr;
      }
      if (!s.draws.empty()) {
        js["draws"] = Json::array();
        for (const Vec3& d : s.draws) js["draws"].push_back(to_array(d));
      }
      jp["methods"].push_back(js);
    }
    jp["pairs"] = Json::array();
    for (const PairStats& s : p.pairs) {
      jp["pairs"].push_back({{"a", std::string(method_name(s.a))},
                             {"b", std::string(method_name(s.b))},
                             {"count", s.count},
                             {"mean_difference", to_array(s.mean_difference)},
                             {"difference_std", s.difference_std},
                             {"a_closer", s.a_closer},
                             {"b_closer", s.b_closer},
                             {"ties", s.ties}});
    }
    j["points"].push_back(jp);
  }
  return j;
}

namespace {

VisibilityStatus parse_visibility(const std::string& s) {
  for (auto v : {VisibilityStatus::Visible, VisibilityStatus::Inside, VisibilityStatus::Occluded,
                 VisibilityStatus::Clearance, VisibilityStatus::Overfill, VisibilityStatus::Sun}) {
    if (visibility_name(v) == s) return v;
  }
  invalid("unknown visibility status '" + s + "'");
}

}  // namespace

MonteCarloReport report_from_json(const Json& j) {
  return guarded([&] {
    check_schema(j);
    MonteCarloReport rep;
    rep.scenario = j.value("scenario", std::string());
    rep.length_unit = j.value("length_unit", std::string());
    rep.seed = field(j, "seed").get<std::uint64_t>();
    rep.samples = field(j, "samples").get<std::int64_t>();
    rep.sigma_px = number(j, "sigma_px");
    for (const auto& m : field(j, "methods")) rep.methods.push_back(parse_method(m.get<std::string>()));
    if (j.contains("reference") && !j["reference"].is_null()) {
      rep.reference = parse_method(j["reference"].get<std::string>());
    }
    for (const auto& jp : field(j, "points")) {
      PointReport p;
      p.truth = vec_from<3>(field(jp, "truth"), "truth");
      p.visible = field(jp, "visible").get<bool>();
      for (const auto& v : field(jp, "visibility")) p.visibility.push_back(parse_visibility(v.get<std::string>()));
      p.failed_draws = field(jp, "failed_draws").get<std::int64_t>();
      p.suspicious = field(jp, "suspicious").get<bool>();
      for (const auto& js : field(jp, "methods")) {
        MethodStats s;
        s.method = parse_method(field(js, "method").get<std::string>());
        s.successes = field(js, "successes").get<std::int64_t>();
        s.failures = field(js, "failures").get<std::int64_t>();
        s.mean_error = vec_from<3>(field(js, "mean_error"), "mean_error");
        s.sample_covariance = mat_from<3>(field(js, "sample_covariance"), "sample_covariance");
        s.total_std = number(js, "total_std");
        if (!field(js, "analytic_covariance").is_null()) {
          s.analytic_covariance = mat_from<3>(js["analytic_covariance"], "analytic_covariance");
        }
        if (js.contains("draws")) {
          for (const auto& d : js["draws"]) s.draws.push_back(vec_from<3>(d, "draw"));
        }
        p.methods.push_back(std::move(s));
      }
      for (const auto& js : field(jp, "pairs")) {
        PairStats s;
        s.a = parse_method(field(js, "a").get<std::string>());
        s.b = parse_method(field(js, "b").get<std::string>());
        s.count = field(js, "count").get<std::int64_t>();
        s.mean_difference = vec_from<3>(field(js, "mean_difference"), "mean_difference");
        s.difference_std = number(js, "difference_std");
        s.a_closer = field(js, "a_closer").get<std::int64_t>();
        s.b_closer = field(js, "b_closer").get<std::int64_t>();
        s.ties = field(js, "ties").get<std::int64_t>();
        p.pairs.push_back(s);
      }
      rep.points.push_back(std::move(p));
    }
    return rep;
  });
}

std::string report_csv(const MonteCarloReport& rep) {
  std::ostringstream out;
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  out << "x,y,method,sigma_analytic,sigma_sample,loss_pct\n";
  for (const PointReport& p : rep.points) {
    if (!p.visible) continue;
    for (const MethodStats& s : p.methods) {
      out << p.truth.x() << ',' << p.truth.y() << ',' << method_name(s.method) << ',';
      if (s.analytic_covariance) out << std::sqrt(s.analytic_covariance->trace());
      out << ',' << s.total_std << ',';
      if (rep.reference) {
        const MethodStats* r = nullptr;
        for (const auto& c : p.methods) {
          if (c.method == *rep.reference) r = &c;
        }
        if (r) {
          const bool analytic = s.analytic_covariance && r->analytic_covariance;
          out << precision_loss(p, s.method, *rep.reference, analytic);
        }
      }
      out << '\n';
    }
  }
  return out.str();
}

Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::Io, "cannot open '" + path + "'");
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    invalid("'" + path + "' is not valid JSON: " + e.what());
  }
}

}  // namespace trilost

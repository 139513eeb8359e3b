#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "trilost/scenarios.hpp"

namespace trilost {

using Json = nlohmann::ordered_json;

// ---- observations and estimates -------------------------------------------
//
// {"schema": 1, "observations": [{
//    "pixel": [u, v],
//    "intrinsics": {"dx": f, "dy": f, "alpha": 0, "up": cu, "vp": cv},
//    "attitude": {"quaternion_xyzw": [x, y, z, w]} | {"matrix": [[...], [...], [...]]},
//    "anchor": [x, y, z],
//    "sigma_px": s | "pixel_covariance": [[a, b], [b, c]] }]}
//
// The quaternion is Hamilton, scalar last, and maps localization-frame vectors
// into the camera frame.

Json observation_to_json(const LosObservation& ob);
LosObservation observation_from_json(const Json& j);  // InvalidInput, NotUnit, NotOrthonormal
Json observations_to_json(const std::vector<LosObservation>& obs);
std::vector<LosObservation> observations_from_json(const Json& j);

Json estimate_to_json(Method m, const TriangulationEstimate& est);

// ---- scenario configs and reports -----------------------------------------

Json scenario_to_json(const ScenarioConfig& cfg);
ScenarioConfig scenario_from_json(const Json& j);  // InvalidInput

Json report_to_json(const MonteCarloReport& rep);
MonteCarloReport report_from_json(const Json& j);

// One row per visible point and method:
// x,y,method,sigma_analytic,sigma_sample,loss_pct
// loss_pct is against the report's reference method, from the analytic
// covariances when both exist and from the samples otherwise.
std::string report_csv(const MonteCarloReport& rep);

Json read_json_file(const std::string& path);  // Io, InvalidInput

// ---- Bundler v0.3 ---------------------------------------------------------

struct BundlerCamera {
  double f = 0.0, k1 = 0.0, k2 = 0.0;
  Mat3 R = Mat3::Identity();
  Vec3 t = Vec3::Zero();
};

struct BundlerView {
  std::int64_t camera = 0;
  std::int64_t key = 0;
  double x = 0.0, y = 0.0;  // pixels from the image center, y up
};

struct BundlerPoint {
  Vec3 position = Vec3::Zero();
  std::array<int, 3> color = {0, 0, 0};
  std::vector<BundlerView> views;
};

struct BundlerDataset {
  std::vector<BundlerCamera> cameras;
  std::vector<BundlerPoint> points;
  std::vector<std::string> warnings;
};

// Strict mode rejects nonzero radial distortion with UnsupportedFeature;
// otherwise it is ignored with one warning per file.
BundlerDataset parse_bundler(const std::string& path, bool strict = false);
BundlerDataset parse_bundler_text(std::string_view text, bool strict = false);
void write_bundler(const BundlerDataset& ds, std::ostream& out);

// The one place where Bundler's camera convention meets ours; see
// docs/bundler.md. Bundler maps X to R X + t, looks down its -z axis and
// measures keypoints from the image center with y up. Here:
//   attitude = diag(1, -1, -1) R,  anchor = -R^T t,
//   pixel = (x, -y),  K = diag(f, f, 1).
LosObservation bundler_observation(const BundlerCamera& cam, const BundlerView& view,
                                   double sigma_px);

// ---- re-triangulation -----------------------------------------------------

struct RetriangulateOptions {
  double sigma_px = 0.5;
  bool allow_large_explicit_range = false;  // above kExplicitRangeWarnViews views
  int workers = 0;                          // 0: default_worker_count()
  int histogram_bins = 40;
};

struct PointResult {
  Vec3 reference = Vec3::Zero();
  std::size_t views = 0;
  std::vector<std::optional<Vec3>> estimates;  // per method
  std::vector<double> residuals;               // NaN on failure
  std::vector<std::string> errors;             // empty on success
};

struct Histogram {
  Method method = Method::Lost;
  std::vector<double> edges;  // log-spaced, size bins + 1
  std::vector<std::int64_t> counts;
  std::int64_t failures = 0;
  double median = 0.0;
};

struct ReconstructionReport {
  std::vector<Method> methods;
  double sigma_px = 0.0;
  std::vector<PointResult> points;
  std::vector<Histogram> histograms;
  std::vector<std::string> warnings;
};

ReconstructionReport retriangulate(const BundlerDataset& ds, const std::vector<Method>& methods,
                                   const RetriangulateOptions& opts = {});

Json reconstruction_summary_json(const ReconstructionReport& rep);
// method,bin_lo,bin_hi,count
std::string histogram_csv(const ReconstructionReport& rep);

}  // namespace trilost

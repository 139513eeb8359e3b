#pragma once

#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "trilost/camera.hpp"

namespace trilost {

enum class LosNormalization { ImagePlane, UnitVector };

struct TriangulationDiagnostics {
  double condition_number = 0.0;
  double residual_norm = 0.0;
  // Signed distance along each line of sight from the estimate to the
  // anchor, a_i^T (p_i - r). Negative means the anchor lies behind.
  std::vector<double> ranges;
  std::vector<bool> negative_range;
  // Set when the explicit-range system grows quadratically past 50 views.
  bool large_system_warning = false;
};

struct TriangulationEstimate {
  Vec3 position = Vec3::Zero();
  std::optional<Mat3> covariance;
  TriangulationDiagnostics diagnostics;
};

using Observations = std::span<const LosObservation>;

constexpr std::size_t kExplicitRangeWarnViews = 50;

// Rows s [x x] T r = s [x x] T p per observation, s = 1 or 1/|x|.
TriangulationEstimate dlt_triangulate(Observations obs,
                                      LosNormalization norm = LosNormalization::ImagePlane,
                                      LeastSquaresBackend backend = LeastSquaresBackend::QR);

// Sandwich covariance (H^T H)^-1 (sum H_i^T R_i H_i) (H^T H)^-1 with the
// residual covariance R_i = -s_i^2 gamma_i^2 [x x] R_x [x x].
Mat3 dlt_covariance(Observations obs, LosNormalization norm = LosNormalization::ImagePlane);

// Null vector of the stacked 4 x 4 line blocks, dehomogenized.
TriangulationEstimate plucker_triangulate(Observations obs,
                                          double gap_tol = kDefaultNullGapTolerance);

// The two independent rows S [x x] T of one observation and their right-hand
// side S [x x] T p.
std::pair<Mat23, Vec2> collinearity_rows(const LosObservation& ob);

// Solves the pairwise law-of-cosines system for the ranges, then averages
// p_i - rho_i a_i. Covariance is attached for n = 2 only.
TriangulationEstimate explicit_range_triangulate(
    Observations obs, LeastSquaresBackend backend = LeastSquaresBackend::QR);

Mat3 explicit_range_covariance_n2(Observations obs);

// Residuals of the two linear range equations of the pair (i, j):
//   (a_i.a_j) rho_j - rho_i - a_i.d_ij   and   rho_j - (a_j.a_i) rho_i - a_j.d_ij
Vec2 law_of_cosines_residual(double rho_i, double rho_j, const LosObservation& ob_i,
                             const LosObservation& ob_j);

// Fills ranges / negative_range for an estimate.
void fill_range_diagnostics(Observations obs, TriangulationEstimate& est);

}  // namespace trilost

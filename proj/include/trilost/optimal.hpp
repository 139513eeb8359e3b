#pragma once

#include <optional>
#include <vector>

#include "trilost/linear.hpp"

namespace trilost {

// ---- two-view polynomial method -------------------------------------------

// Rigid image-plane transforms M_i (x_i -> origin, epipolar line -> x axis)
// and the reduced essential-matrix entries a, b, c, d.
struct EpipolarSetup {
  Mat3 M1 = Mat3::Identity();
  Mat3 M2 = Mat3::Identity();
  Mat3 E = Mat3::Zero();  // x2^T E x1 = 0
  Vec3 e1 = Vec3::Zero();
  Vec3 e2 = Vec3::Zero();
  double f1 = 0.0, f2 = 0.0;
  double a = 0.0, b = 0.0, c = 0.0, d = 0.0;
};

// Stationarity polynomial of the two-view cost, ascending coefficients.
using PolySix = Eigen::Matrix<double, 7, 1>;

struct TwoViewWeights {
  double w1 = 1.0;
  double w2 = 1.0;
};

struct TwoViewCorrection {
  Vec3 x1 = Vec3::UnitZ();  // corrected image-plane points, third entry 1
  Vec3 x2 = Vec3::UnitZ();
  double cost = 0.0;        // weighted squared image-plane correction
  double parameter = 0.0;   // t for the polynomial method, lambda for the quadratic one
  bool at_infinity = false;
};

EpipolarSetup hs_setup(const LosObservation& ob1, const LosObservation& ob2);
PolySix hs_polynomial(const EpipolarSetup& s, const TwoViewWeights& w);
double hs_cost(const EpipolarSetup& s, const TwoViewWeights& w, double t);
double hs_cost_at_infinity(const EpipolarSetup& s, const TwoViewWeights& w);

// Default weights 1 / sigma_x^2 from the pixel noise.
TwoViewWeights default_weights(const LosObservation& ob1, const LosObservation& ob2);

TwoViewCorrection hs_correct(const LosObservation& ob1, const LosObservation& ob2,
                             const TwoViewWeights& w);

// Two-view optimal triangulation: corrected measurements from the sextic,
// then the linear solve on the now-consistent lines of sight.
TriangulationEstimate hs_triangulate(const LosObservation& ob1, const LosObservation& ob2,
                                     std::optional<TwoViewWeights> w = std::nullopt);

// Inverse Fisher information of the pixel measurements for two views.
Mat3 hs_covariance(const LosObservation& ob1, const LosObservation& ob2);

// ---- two views sharing one attitude --------------------------------------

struct QuatCoeffs {
  double h2 = 0.0, h1 = 0.0, h0 = 0.0;
  Vec3 baseline = Vec3::Zero();  // T (p2 - p1) in the camera frame
};

constexpr double kQuatLinearSwitch = 1e-9;

QuatCoeffs quat_coefficients(const LosObservation& ob1, const LosObservation& ob2,
                             const TwoViewWeights& w);
// Corrected image-plane points for a given multiplier.
std::pair<Vec2, Vec2> quat_corrected_points(const LosObservation& ob1, const LosObservation& ob2,
                                            const TwoViewWeights& w, double lambda);
TwoViewCorrection quat_correct(const LosObservation& ob1, const LosObservation& ob2,
                               const TwoViewWeights& w);
TriangulationEstimate quat_triangulate(const LosObservation& ob1, const LosObservation& ob2,
                                       std::optional<TwoViewWeights> w = std::nullopt);

// ---- linear optimal weighting --------------------------------------------

struct LostWeights {
  std::vector<double> q;        // 1 / (sigma_x gamma)
  std::vector<double> gamma;    // range / |x|
  std::vector<double> sigma_x;  // image-plane noise std
};

// gamma_i = |d_ij x l_j| / |l_i x l_j| with l = T^T x and d_ij = p_j - p_i.
double lost_gamma(Observations obs, std::size_t i, std::size_t j);
// gamma for every view, companion j = i + 1 (cyclic). Falls back to the
// best-conditioned companion when that pair is parallel.
std::vector<double> lost_gamma_all(Observations obs);

LostWeights lost_weights(Observations obs);

TriangulationEstimate lost_triangulate(Observations obs,
                                       LeastSquaresBackend backend = LeastSquaresBackend::QR);
Mat3 lost_covariance(Observations obs);

// Pseudoinverse of the rank-two residual covariance -gamma^2 [x x] R_x [x x].
Mat3 residual_cov_pseudoinverse(const Vec3& x, const Mat3& image_cov, double gamma);
// Closed form for R_x = sigma^2 S^T S.
Mat3 residual_cov_pseudoinverse_isotropic(const Vec3& x, double sigma_x, double gamma);

}  // namespace trilost

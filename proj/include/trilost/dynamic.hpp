#pragma once

#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "trilost/linear.hpp"

namespace trilost {

// Maps an initial state xi0 = (r0, v0) to the state at time t (seconds).
class StmProvider {
 public:
  virtual ~StmProvider() = default;
  virtual Mat6 phi(double t) const = 0;
  Mat36 phi_r(double t) const { return phi(t).topRows<3>(); }
};

// Linearized circular-orbit relative motion with mean motion n (rad/s);
// x radial, y along-track, z cross-track.
Mat6 cw_stm(double t, double n);

class CwStm final : public StmProvider {
 public:
  explicit CwStm(double mean_motion) : n_(mean_motion) {}
  Mat6 phi(double t) const override { return cw_stm(t, n_); }

 private:
  double n_;
};

// Force-free straight-line motion.
class LinearStm final : public StmProvider {
 public:
  Mat6 phi(double t) const override;
};

// Position fixed in time; the velocity block never reaches the measurements.
class StaticStm final : public StmProvider {
 public:
  Mat6 phi(double) const override { return Mat6::Identity(); }
};

class FunctionStm final : public StmProvider {
 public:
  explicit FunctionStm(std::function<Mat6(double)> f) : f_(std::move(f)) {}
  Mat6 phi(double t) const override { return f_(t); }

 private:
  std::function<Mat6(double)> f_;
};

// A sighting taken at `time`. The camera sits at Phi_r(t) xi0 + camera_offset
// and observes the point base.anchor + target_offset.
struct DynamicObservation {
  LosObservation base;
  double time = 0.0;
  Vec3 camera_offset = Vec3::Zero();
  Vec3 target_offset = Vec3::Zero();

  Vec3 effective_target() const { return base.anchor + target_offset - camera_offset; }
};

struct ObservabilityReport {
  Vec6 singular_values = Vec6::Zero();  // descending
  std::vector<Vec6> null_directions;    // unit, for singular values below tol * max
  bool homothety = false;               // one-dimensional null space and a homogeneous system
};

struct StateEstimate6 {
  Vec6 state = Vec6::Zero();
  std::optional<Mat6> covariance;
  ObservabilityReport observability;
  bool partial = false;  // minimum-norm solution along unobservable directions
  double condition_number = 0.0;
  double residual_norm = 0.0;
};

struct DynamicOptions {
  LeastSquaresBackend backend = LeastSquaresBackend::QR;
  LosNormalization normalization = LosNormalization::ImagePlane;
  double unobservable_tol = 1e-8;
  double anchor_tol = 1e-9;  // length units; "target at origin"
  bool allow_partial = false;
};

class UnobservableError : public Error {
 public:
  UnobservableError(const std::string& what, ObservabilityReport report)
      : Error(ErrorCode::Unobservable, what), report_(std::move(report)) {}
  const ObservabilityReport& report() const { return report_; }

 private:
  ObservabilityReport report_;
};

using DynamicObservations = std::span<const DynamicObservation>;

std::pair<MatX, VecX> dynamic_system(DynamicObservations obs, const StmProvider& stm,
                                     LosNormalization norm = LosNormalization::ImagePlane);

ObservabilityReport observability_report(DynamicObservations obs, const StmProvider& stm,
                                         const DynamicOptions& opts = {});

StateEstimate6 dynamic_dlt(DynamicObservations obs, const StmProvider& stm,
                           const DynamicOptions& opts = {});

}  // namespace trilost

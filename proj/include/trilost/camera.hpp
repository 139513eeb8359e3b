#pragma once

#include <Eigen/Eigenvalues>

#include <cmath>

#include "trilost/geometry.hpp"

namespace trilost {

// Pinhole calibration
//   K = [dx alpha up; 0 dy vp; 0 0 1]
// mapping image-plane coordinates (z = 1) to pixels.
template <typename Scalar>
struct CameraIntrinsicsT {
  Scalar dx = Scalar(1);
  Scalar dy = Scalar(1);
  Scalar alpha = Scalar(0);
  Scalar up = Scalar(0);
  Scalar vp = Scalar(0);

  // Square detector of `pixels` across a full field of view `fov_deg`, with
  // the principal point at the detector center.
  static CameraIntrinsicsT from_fov(Scalar fov_deg, Scalar pixels) {
    CameraIntrinsicsT k;
    const Scalar half = Scalar(0.5) * fov_deg * Scalar(M_PI / 180.0);
    k.dx = k.dy = Scalar(0.5) * pixels / std::tan(half);
    k.up = k.vp = Scalar(0.5) * pixels;
    return k;
  }

  Mat3T<Scalar> K() const {
    Mat3T<Scalar> k;
    k << dx, alpha, up, Scalar(0), dy, vp, Scalar(0), Scalar(0), Scalar(1);
    return k;
  }

  Mat3T<Scalar> K_inv() const {
    Mat3T<Scalar> k;
    k << Scalar(1) / dx, -alpha / (dx * dy), (alpha * vp - dy * up) / (dx * dy),
         Scalar(0), Scalar(1) / dy, -vp / dy,
         Scalar(0), Scalar(0), Scalar(1);
    return k;
  }

  bool square_pixels(Scalar rel_tol = Scalar(1e-12)) const {
    return std::abs(dx - dy) <= rel_tol * std::abs(dx) && alpha == Scalar(0);
  }

  bool valid() const {
    return std::isfinite(dx) && std::isfinite(dy) && std::isfinite(alpha) &&
           std::isfinite(up) && std::isfinite(vp) && dx > Scalar(0) && dy > Scalar(0);
  }
};

template <typename Scalar>
struct PixelPointT {
  Vec2T<Scalar> uv = Vec2T<Scalar>::Zero();
  Vec3T<Scalar> homogeneous() const { return {uv(0), uv(1), Scalar(1)}; }
};

template <typename Scalar>
struct ImagePlanePointT {
  Vec2T<Scalar> xy = Vec2T<Scalar>::Zero();
  Vec3T<Scalar> homogeneous() const { return {xy(0), xy(1), Scalar(1)}; }
};

template <typename Scalar>
struct PixelCovarianceT {
  Mat2T<Scalar> R = Mat2T<Scalar>::Identity();

  static PixelCovarianceT isotropic(Scalar sigma_px) {
    PixelCovarianceT c;
    c.R = sigma_px * sigma_px * Mat2T<Scalar>::Identity();
    return c;
  }

  bool is_isotropic(Scalar rel_tol = Scalar(1e-12)) const {
    const Scalar scale = std::max(std::abs(R(0, 0)), std::abs(R(1, 1)));
    return std::abs(R(0, 0) - R(1, 1)) <= rel_tol * scale &&
           std::abs(R(0, 1)) <= rel_tol * scale && std::abs(R(1, 0)) <= rel_tol * scale;
  }

  Scalar sigma() const { return std::sqrt(Scalar(0.5) * R.trace()); }
};

// One line-of-sight measurement: the pixel where a known point `anchor` is
// seen by a camera whose attitude T maps localization-frame vectors into the
// camera frame. The same record serves both problem directions: a camera at
// the unknown position sighting the anchor, or a camera at the anchor
// sighting the unknown point.
template <typename Scalar>
struct LosObservationT {
  PixelPointT<Scalar> pixel;
  CameraIntrinsicsT<Scalar> intrinsics;
  RotationT<Scalar> attitude;
  Vec3T<Scalar> anchor = Vec3T<Scalar>::Zero();
  PixelCovarianceT<Scalar> pixel_cov;

  // x = K^-1 u, third component 1.
  Vec3T<Scalar> image_plane() const { return intrinsics.K_inv() * pixel.homogeneous(); }

  // Line of sight expressed in the localization frame, T^T x.
  Vec3T<Scalar> los_world() const { return attitude.matrix().transpose() * image_plane(); }

  Vec3T<Scalar> unit_los_world() const { return los_world().normalized(); }
};

using CameraIntrinsics = CameraIntrinsicsT<double>;
using PixelPoint = PixelPointT<double>;
using ImagePlanePoint = ImagePlanePointT<double>;
using PixelCovariance = PixelCovarianceT<double>;
using LosObservation = LosObservationT<double>;

template <typename Scalar>
ImagePlanePointT<Scalar> pixel_to_image_plane(const PixelPointT<Scalar>& u,
                                              const CameraIntrinsicsT<Scalar>& k) {
  const Vec3T<Scalar> x = k.K_inv() * u.homogeneous();
  return {x.template head<2>()};
}

template <typename Scalar>
PixelPointT<Scalar> image_plane_to_pixel(const ImagePlanePointT<Scalar>& x,
                                         const CameraIntrinsicsT<Scalar>& k) {
  const Vec3T<Scalar> u = k.K() * x.homogeneous();
  return {u.template head<2>()};
}

template <typename Derived>
Vec3T<typename Derived::Scalar> image_plane_to_unit_vector(const Eigen::MatrixBase<Derived>& x) {
  return x.normalized();
}

// Isotropic tangent-plane noise model sigma^2 (I - a a^T) for a unit vector.
template <typename Derived>
Mat3T<typename Derived::Scalar> qmm_covariance(const Eigen::MatrixBase<Derived>& a,
                                               typename Derived::Scalar sigma_theta,
                                               typename Derived::Scalar unit_tol = 1e-9) {
  using S = typename Derived::Scalar;
  if (std::abs(a.norm() - S(1)) > unit_tol) {
    fail(ErrorCode::NotUnit, "direction is not a unit vector");
  }
  return sigma_theta * sigma_theta * (Mat3T<S>::Identity() - a * a.transpose());
}

// Covariance of the homogeneous image-plane point, K^-1 S^T R_u S K^-T.
template <typename Scalar>
Mat3T<Scalar> image_plane_covariance(const CameraIntrinsicsT<Scalar>& k,
                                     const Mat2T<Scalar>& pixel_cov) {
  const Eigen::Matrix<Scalar, 3, 2> kis = k.K_inv().template leftCols<2>();
  return kis * pixel_cov * kis.transpose();
}

// First-order covariance of a = x / |x| given the covariance of x.
template <typename Derived>
Mat3T<typename Derived::Scalar> unit_vector_covariance(
    const Eigen::MatrixBase<Derived>& x, const Mat3T<typename Derived::Scalar>& image_cov) {
  using S = typename Derived::Scalar;
  const S n = x.norm();
  const Vec3T<S> a = x / n;
  const Mat3T<S> ax2 = skew(a) * skew(a);
  return ax2 * image_cov * ax2 / (n * n);
}

// Does the tangent-plane model with sigma_theta = sigma_x (matching the
// image-plane noise at boresight) bound the propagated unit-vector
// covariance at image-plane point x?
template <typename Derived>
bool qmm_dominates(const Eigen::MatrixBase<Derived>& x, typename Derived::Scalar sigma_x,
                   typename Derived::Scalar tol = 1e-12) {
  using S = typename Derived::Scalar;
  const Mat3T<S> rx = sigma_x * sigma_x * selector<S>().transpose() * selector<S>();
  const Mat3T<S> diff =
      qmm_covariance(x.normalized(), sigma_x) - unit_vector_covariance(x, rx);
  Eigen::SelfAdjointEigenSolver<Mat3T<S>> es(S(0.5) * (diff + diff.transpose()),
                                             Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff() >= -tol * sigma_x * sigma_x;
}

// Pixel at which a camera with attitude T at `camera` sees `point`.
template <typename Scalar>
PixelPointT<Scalar> project(const CameraIntrinsicsT<Scalar>& k, const RotationT<Scalar>& t,
                            const Vec3T<Scalar>& point, const Vec3T<Scalar>& camera) {
  const Vec3T<Scalar> v = t.matrix() * (point - camera);
  return image_plane_to_pixel(ImagePlanePointT<Scalar>{v.template head<2>() / v(2)}, k);
}

// Jacobian of the projected pixel with respect to the camera position.
template <typename Scalar>
Eigen::Matrix<Scalar, 2, 3> projection_jacobian(const CameraIntrinsicsT<Scalar>& k,
                                                const RotationT<Scalar>& t,
                                                const Vec3T<Scalar>& point,
                                                const Vec3T<Scalar>& camera) {
  const Vec3T<Scalar> v = t.matrix() * (point - camera);
  const Scalar z = v(2);
  // u = S K v / z with v = T (p - r):  du/dr = -(S K / z) (I - v k^T / z) T
  Mat3T<Scalar> proj = Mat3T<Scalar>::Identity();
  proj.col(2) -= v / z;
  return -(selector<Scalar>() * k.K() / z) * proj * t.matrix();
}

// Image-plane noise standard deviation when the pixel noise and the
// calibration make it isotropic (square pixels, zero skew, R_u = s^2 I).
template <typename Scalar>
Scalar isotropic_image_sigma(const LosObservationT<Scalar>& ob) {
  if (std::abs(ob.intrinsics.dx - ob.intrinsics.dy) > Scalar(1e-12) * std::abs(ob.intrinsics.dx)) {
    fail(ErrorCode::NonSquarePixels, "solver requires square pixels");
  }
  if (ob.intrinsics.alpha != Scalar(0) || !ob.pixel_cov.is_isotropic()) {
    fail(ErrorCode::NonIsotropicNoise, "image-plane noise is not isotropic");
  }
  return ob.pixel_cov.sigma() / ob.intrinsics.dx;
}

template <typename Scalar>
Mat3T<Scalar> image_plane_covariance(const LosObservationT<Scalar>& ob) {
  return image_plane_covariance(ob.intrinsics, ob.pixel_cov.R);
}

}  // namespace trilost

// Copyright (c) 2026 The poselift Authors
// SPDX-License-Identifier: Apache-2.0
#include "poselift/geometry.hpp"

#include <cmath>

namespace poselift {

namespace {
constexpr double kPi = 3.14159265358979323846;
constexpr double kOrthoTol = 1e-10;
}  // namespace

RotationMatrix RotationMatrix::identity() {
  return RotationMatrix(Eigen::Matrix3d::Identity());
}

RotationMatrix RotationMatrix::from_matrix(const Eigen::Matrix3d& m) {
  if (!m.allFinite()) throw ValidationError("non-finite rotation matrix");
  Eigen::Matrix3d err = m.transpose() * m - Eigen::Matrix3d::Identity();
  if (err.cwiseAbs().maxCoeff() > kOrthoTol)
    throw ValidationError("matrix is not orthonormal");
  if (std::abs(m.determinant() - 1.0) > kOrthoTol)
    throw ValidationError("matrix determinant is not 1");
  return RotationMatrix(m);
}

RotationMatrix RotationMatrix::inverse() const {
  return RotationMatrix(m_.transpose());
}

RotationMatrix operator*(const RotationMatrix& a, const RotationMatrix& b) {
  return RotationMatrix(a.m_ * b.m_);
}

Pose2D project_perspective(const Pose3D& pose, const CameraModel& cam) {
  cam.validate();
  if (!pose.coords.allFinite()) throw ValidationError("non-finite pose");
  Eigen::Matrix2Xd out(2, pose.coords.cols());
  for (Eigen::Index i = 0; i < pose.coords.cols(); ++i) {
    double z = std::max(1.0, pose.coords(2, i) + cam.distance);
    out(0, i) = pose.coords(0, i) / z;
    out(1, i) = pose.coords(1, i) / z;
  }
  return {out};
}

Pose3D rotate_pose(const Pose3D& pose, const RotationMatrix& r) {
  if (!pose.coords.allFinite()) throw ValidationError("non-finite pose");
  return {r.matrix() * pose.coords};
}

Pose3D depth_to_pose3d(const Pose2D& pose, const Eigen::VectorXd& depth,
                       const CameraModel& cam) {
  cam.validate();
  if (depth.size() != pose.coords.cols())
    throw ValidationError("depth_to_pose3d: joint count mismatch");
  if (!pose.coords.allFinite() || !depth.allFinite())
    throw ValidationError("non-finite pose");
  Eigen::Matrix3Xd out(3, pose.coords.cols());
  for (Eigen::Index i = 0; i < pose.coords.cols(); ++i) {
    double z = std::max(1.0, cam.distance + depth(i));
    out(0, i) = pose.coords(0, i) * z;
    out(1, i) = pose.coords(1, i) * z;
    out(2, i) = z - cam.distance;
  }
  return {out};
}

RotationMode rotation_mode_from_string(const std::string& s) {
  if (s == "azimuth") return RotationMode::kAzimuth;
  if (s == "so3-uniform") return RotationMode::kSo3Uniform;
  throw ValidationError("unknown rotation mode: " + s);
}

std::string to_string(RotationMode m) {
  return m == RotationMode::kAzimuth ? "azimuth" : "so3-uniform";
}

RotationMatrix azimuth_rotation(double theta, double phi) {
  Eigen::Matrix3d ry, rx;
  ry << std::cos(theta), 0.0, std::sin(theta),  //
      0.0, 1.0, 0.0,                            //
      -std::sin(theta), 0.0, std::cos(theta);
  rx << 1.0, 0.0, 0.0,                          //
      0.0, std::cos(phi), -std::sin(phi),       //
      0.0, std::sin(phi), std::cos(phi);
  return RotationMatrix::from_matrix(rx * ry);
}

RotationMatrix sample_random_rotation(Rng& rng, RotationMode mode,
                                      double elevation_min,
                                      double elevation_max) {
  if (mode == RotationMode::kAzimuth) {
    if (elevation_min > elevation_max)
      throw ValidationError("empty elevation range");
    double theta = rng.uniform(-kPi, kPi);
    double phi = rng.uniform(elevation_min, elevation_max);
    return azimuth_rotation(theta, phi);
  }
  // Normalized Gaussian quaternion is Haar-uniform on SO(3).
  double w = rng.normal(), x = rng.normal(), y = rng.normal(),
         z = rng.normal();
  double n = std::sqrt(w * w + x * x + y * y + z * z);
  w /= n;
  x /= n;
  y /= n;
  z /= n;
  Eigen::Matrix3d m;
  m << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
      2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
      2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
  return RotationMatrix::from_matrix(m);
}

RotationMatrix rotation_from_params(const std::array<double, 6>& p) {
  Eigen::Vector3d a(p[0], p[1], p[2]);
  Eigen::Vector3d c(p[3], p[4], p[5]);
  double r1 = a.norm();
  if (r1 < 1e-8) throw ValidationError("degenerate rotation parameters");
  Eigen::Vector3d b1 = a / r1;
  Eigen::Vector3d u = c - b1.dot(c) * b1;
  double r2 = u.norm();
  if (r2 < 1e-8) throw ValidationError("degenerate rotation parameters");
  Eigen::Vector3d b2 = u / r2;
  Eigen::Vector3d b3 = b1.cross(b2);
  Eigen::Matrix3d m;
  m.col(0) = b1;
  m.col(1) = b2;
  m.col(2) = b3;
  return RotationMatrix::from_matrix(m);
}

Pose2D root_center(const Eigen::Matrix2Xd& raw, int root_index) {
  if (root_index < 0 || root_index >= raw.cols())
    throw ValidationError("root index out of range");
  if (!raw.allFinite()) throw ValidationError("non-finite pose");
  Eigen::Matrix2Xd out = raw.colwise() - Eigen::Vector2d(raw.col(root_index));
  return {out};
}

Pose3D root_center(const Eigen::Matrix3Xd& raw, int root_index) {
  if (root_index < 0 || root_index >= raw.cols())
    throw ValidationError("root index out of range");
  if (!raw.allFinite()) throw ValidationError("non-finite pose");
  Eigen::Matrix3Xd out = raw.colwise() - Eigen::Vector3d(raw.col(root_index));
  return {out};
}

}  // namespace poselift

// Copyright (c) 2026 The poselift Authors
// SPDX-License-Identifier: Apache-2.0
//
// Deterministic geometric substrate: SO(3) rotations, the fixed-intrinsics
// perspective camera, root-centering and depth lifting. 2D coordinates are
// dimensionless normalized-image units; 3D coordinates are camera-frame
// units, root-relative (the camera sits at the origin and the root joint is
// placed at depth t by the projection itself).
#pragma once

#include <Eigen/Dense>
#include <array>

#include "poselift/error.hpp"
#include "poselift/rng.hpp"

namespace poselift {

struct Pose2D {
  Eigen::Matrix2Xd coords;  // column i = (u_i, v_i)
  int n_joints() const { return static_cast<int>(coords.cols()); }
};

struct Pose3D {
  Eigen::Matrix3Xd coords;  // column i = (x_i, y_i, z_i)
  int n_joints() const { return static_cast<int>(coords.cols()); }
};

/// Validated element of SO(3): m^T m = I and det(m) = 1, both to 1e-10.
class RotationMatrix {
 public:
  static RotationMatrix identity();
  static RotationMatrix from_matrix(const Eigen::Matrix3d& m);
  const Eigen::Matrix3d& matrix() const { return m_; }
  RotationMatrix inverse() const;
  friend RotationMatrix operator*(const RotationMatrix& a,
                                  const RotationMatrix& b);

 private:
  explicit RotationMatrix(const Eigen::Matrix3d& m) : m_(m) {}
  Eigen::Matrix3d m_;
};

/// Virtual camera: intrinsics are the identity; the skeleton root is held at
/// a constant distance in front of the camera.
struct CameraModel {
  double distance = 5.0;
  void validate() const {
    if (!(distance > 1.0)) throw ValidationError("camera distance must be > 1");
  }
};

/// Perspective projection (x, y, z) -> (x, y) / max(1, z + t). The clamp
/// mirrors the depth-lifting clamp so the pair stays mutually consistent.
Pose2D project_perspective(const Pose3D& pose, const CameraModel& cam);

/// Matrix product r * pose.
Pose3D rotate_pose(const Pose3D& pose, const RotationMatrix& r);

/// Inverse of projection given per-joint depth offsets to the root:
/// z_i = max(1, t + d_i), joint i = (u_i z_i, v_i z_i, z_i - t).
Pose3D depth_to_pose3d(const Pose2D& pose, const Eigen::VectorXd& depth,
                       const CameraModel& cam);

enum class RotationMode { kAzimuth, kSo3Uniform };
RotationMode rotation_mode_from_string(const std::string& s);
std::string to_string(RotationMode m);

/// R_x(phi) * R_y(theta): yaw about the vertical axis then an elevation tilt.
RotationMatrix azimuth_rotation(double theta, double phi);

/// Azimuth mode: theta ~ U[-pi, pi], phi ~ U[elevation range]. So3-uniform
/// mode: Haar-uniform via normalized Gaussian quaternions (elevation range
/// ignored).
RotationMatrix sample_random_rotation(Rng& rng, RotationMode mode,
                                      double elevation_min,
                                      double elevation_max);

/// Gram-Schmidt rotation from 6 parameters: b1 = normalize(p[0..3]),
/// b2 = normalize of p[3..6] minus its b1 component, b3 = b1 x b2; the
/// result has columns (b1, b2, b3).
RotationMatrix rotation_from_params(const std::array<double, 6>& p);

/// Subtracts the root joint from every joint; the root lands exactly at 0.
Pose2D root_center(const Eigen::Matrix2Xd& raw, int root_index);
Pose3D root_center(const Eigen::Matrix3Xd& raw, int root_index);

}  // namespace poselift

// Copyright (c) 2026 The poselift Authors
// SPDX-License-Identifier: Apache-2.0
//
// The four training losses. Teacher: reprojection + rotation-invariance
// cycle. Student: knowledge distillation from the frozen teacher +
// rotation-equivariance cycle. Batched builders return 1x1 graph values
// averaging the per-sample losses; per-sample normalization is 1/N over the
// squared Frobenius norm.
#pragma once

#include <Eigen/Dense>

#include "poselift/diff.hpp"
#include "poselift/geometry.hpp"
#include "poselift/student.hpp"
#include "poselift/teacher.hpp"

namespace poselift {

struct LossWeights {
  double rep = 5.0;
  double ric = 1.0;
  double kd = 5.0;
  double rec = 1.0;
  void validate() const {
    if (rep < 0 || ric < 0 || kd < 0 || rec < 0)
      throw ValidationError("loss weights must be non-negative");
  }
};

/// (1/NB) * |P(R_hat * Y_t) - X|_F^2 over the batch.
diff::Value reprojection_loss_graph(const TeacherForward& fwd,
                                    const diff::Value& x_blocks, int n_joints,
                                    const CameraModel& cam,
                                    long* clamp_counter = nullptr);

/// Rotation-invariance cycle: re-estimates the pose from the reprojection of
/// the randomly rotated first-pass pose and penalizes the difference to the
/// first-pass pose. r_rand9 holds one flattened rotation per sample. With
/// detach_target, the first-pass pose is treated as a constant in both the
/// new input and the comparison target.
diff::Value ric_loss_graph(diff::ParamStore& params, const TeacherConfig& cfg,
                           const TeacherForward& first,
                           const Eigen::MatrixXd& r_rand9,
                           const CameraModel& cam, bool detach_target = false,
                           long* clamp_counter = nullptr);

/// (1/NB) * |d_hat - teacher_depth|^2; the teacher row enters as a constant,
/// so no gradient can reach teacher parameters.
diff::Value kd_loss_graph(const diff::Value& depth_row,
                          const Eigen::MatrixXd& teacher_depth, int n_joints);

/// Rotation-equivariance cycle: the student re-estimates the rotated pose
/// from its reprojection; the estimate should match the rotated pose itself.
diff::Value rec_loss_graph(diff::ParamStore& params, const StudentConfig& cfg,
                           const SkeletonGraph& graph, const diff::Value& y_s,
                           const Eigen::MatrixXd& r_rand9,
                           const CameraModel& cam, bool detach_target = false,
                           long* clamp_counter = nullptr);

// Single-pose wrappers matching the per-sample definitions; used by tests
// and diagnostics.
double reprojection_loss(const TeacherOutput& out, const Pose2D& x,
                         const CameraModel& cam);
double ric_loss(diff::ParamStore& teacher_params, const TeacherConfig& cfg,
                const TeacherOutput& out, const RotationMatrix& r_rand,
                const CameraModel& cam);
double kd_loss(const Eigen::VectorXd& depth, const TeacherOutput& teacher_out);
double rec_loss(diff::ParamStore& student_params, const StudentConfig& cfg,
                const SkeletonGraph& graph, const Pose3D& y_s,
                const RotationMatrix& r_rand, const CameraModel& cam);

double teacher_total(double rep, double ric, const LossWeights& w);
double student_total(double kd, double rec, const LossWeights& w);

/// Depth row of the rotated teacher pose, (R_hat * Y_t)_z, as a plain vector.
Eigen::VectorXd teacher_depth_row(const TeacherOutput& out);

}  // namespace poselift

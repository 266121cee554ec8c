// Copyright (c) 2026 The poselift Authors
// SPDX-License-Identifier: Apache-2.0
#include "poselift/losses.hpp"

namespace poselift {

using diff::Matrix;
using diff::Value;

namespace {

double per_element_norm(const Value& v, int n_joints) {
  return 1.0 / (static_cast<double>(n_joints) *
                (static_cast<double>(v.cols()) / n_joints));
}

Matrix rotation_to_column(const RotationMatrix& r) {
  Matrix col(9, 1);
  Eigen::Map<Eigen::Matrix3d>(col.col(0).data()) = r.matrix();
  return col;
}

}  // namespace

Value reprojection_loss_graph(const TeacherForward& fwd,
                              const Value& x_blocks, int n_joints,
                              const CameraModel& cam, long* clamp_counter) {
  cam.validate();
  Value rotated = diff::rotate_blocks(fwd.rotations, fwd.pose, n_joints);
  Value reproj = diff::project_blocks(rotated, cam.distance, clamp_counter);
  Value residual = diff::sub(reproj, x_blocks);
  return diff::scale(diff::sum_squares(residual),
                     per_element_norm(x_blocks, n_joints));
}

Value ric_loss_graph(diff::ParamStore& params, const TeacherConfig& cfg,
                     const TeacherForward& first, const Eigen::MatrixXd& r_rand9,
                     const CameraModel& cam, bool detach_target,
                     long* clamp_counter) {
  cam.validate();
  Value target = detach_target ? first.pose.detached() : first.pose;
  Value rotated =
      diff::rotate_blocks(Value::constant(r_rand9), target, cfg.n_joints);
  Value new_input = diff::project_blocks(rotated, cam.distance, clamp_counter);
  TeacherForward second = teacher_forward_batch(new_input, params, cfg);
  Value residual = diff::sub(second.pose, target);
  return diff::scale(diff::sum_squares(residual),
                     per_element_norm(target, cfg.n_joints));
}

Value kd_loss_graph(const Value& depth_row, const Eigen::MatrixXd& teacher_depth,
                    int n_joints) {
  if (teacher_depth.rows() != 1 || teacher_depth.cols() != depth_row.cols())
    throw ValidationError("kd_loss: teacher depth row shape mismatch");
  Value residual = diff::sub(depth_row, Value::constant(teacher_depth));
  return diff::scale(diff::sum_squares(residual),
                     per_element_norm(depth_row, n_joints));
}

Value rec_loss_graph(diff::ParamStore& params, const StudentConfig& cfg,
                     const SkeletonGraph& graph, const Value& y_s,
                     const Eigen::MatrixXd& r_rand9, const CameraModel& cam,
                     bool detach_target, long* clamp_counter) {
  cam.validate();
  Value base = detach_target ? y_s.detached() : y_s;
  Value target =
      diff::rotate_blocks(Value::constant(r_rand9), base, cfg.n_joints);
  Value new_input = diff::project_blocks(target, cam.distance, clamp_counter);
  Value depth2 = student_forward_batch(new_input, params, cfg, graph);
  Value estimate = diff::lift_blocks(new_input, depth2, cam.distance,
                                     clamp_counter);
  Value residual = diff::sub(estimate, target);
  return diff::scale(diff::sum_squares(residual),
                     per_element_norm(target, cfg.n_joints));
}

double reprojection_loss(const TeacherOutput& out, const Pose2D& x,
                         const CameraModel& cam) {
  Pose2D reproj =
      project_perspective(rotate_pose(out.canonical_pose, out.camera), cam);
  return (reproj.coords - x.coords).squaredNorm() / x.n_joints();
}

double ric_loss(diff::ParamStore& teacher_params, const TeacherConfig& cfg,
                const TeacherOutput& out, const RotationMatrix& r_rand,
                const CameraModel& cam) {
  TeacherForward first;
  first.pose = Value::constant(out.canonical_pose.coords);
  Value loss = ric_loss_graph(teacher_params, cfg, first,
                              rotation_to_column(r_rand), cam);
  return loss.data()(0, 0);
}

double kd_loss(const Eigen::VectorXd& depth, const TeacherOutput& teacher_out) {
  Eigen::VectorXd target = teacher_depth_row(teacher_out);
  if (target.size() != depth.size())
    throw ValidationError("kd_loss: depth length mismatch");
  return (depth - target).squaredNorm() / static_cast<double>(depth.size());
}

double rec_loss(diff::ParamStore& student_params, const StudentConfig& cfg,
                const SkeletonGraph& graph, const Pose3D& y_s,
                const RotationMatrix& r_rand, const CameraModel& cam) {
  Value loss = rec_loss_graph(student_params, cfg, graph,
                              Value::constant(y_s.coords),
                              rotation_to_column(r_rand), cam);
  return loss.data()(0, 0);
}

double teacher_total(double rep, double ric, const LossWeights& w) {
  w.validate();
  return w.rep * rep + w.ric * ric;
}

double student_total(double kd, double rec, const LossWeights& w) {
  w.validate();
  return w.kd * kd + w.rec * rec;
}

Eigen::VectorXd teacher_depth_row(const TeacherOutput& out) {
  return (out.camera.matrix() * out.canonical_pose.coords).row(2).transpose();
}

}  // namespace poselift

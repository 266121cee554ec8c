// Copyright (c) 2026 The poselift Authors
// SPDX-License-Identifier: Apache-2.0
#include "poselift/teacher.hpp"

#include <cmath>

namespace poselift {

using diff::Matrix;
using diff::Value;

void TeacherConfig::validate() const {
  if (n_joints <= 0 || dictionary_size < 1 || blocks < 0 || width <= 0 ||
      bottleneck <= 0)
    throw ValidationError("invalid teacher configuration");
  if (root_index < 0 || root_index >= n_joints)
    throw ValidationError("teacher root index out of range");
}

Pose3D pose_from_coefficients(const Eigen::VectorXd& coeffs,
                              const PoseDictionary& dict, int root_index) {
  if (coeffs.size() != dict.atom_count())
    throw ValidationError("coefficient count does not match dictionary");
  Eigen::Index n = dict.atoms.cols();
  Eigen::Matrix3Xd pose = Eigen::Matrix3Xd::Zero(3, n);
  for (int k = 0; k < dict.atom_count(); ++k)
    pose += coeffs(k) * dict.atoms.middleRows(3 * k, 3);
  return root_center(pose, root_index);
}

namespace {

Matrix gaussian(Eigen::Index rows, Eigen::Index cols, double stddev,
                Rng& rng) {
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = stddev * rng.normal();
  return m;
}

Matrix he_init(Eigen::Index rows, Eigen::Index fan_in, Eigen::Index cols,
               Rng& rng) {
  return gaussian(rows, cols, std::sqrt(2.0 / static_cast<double>(fan_in)),
                  rng);
}

}  // namespace

void init_teacher_params(diff::ParamStore& store, const TeacherConfig& cfg,
                         const Eigen::Matrix2Xd& mean_pose, Rng& rng) {
  cfg.validate();
  if (mean_pose.cols() != cfg.n_joints)
    throw ValidationError("mean pose joint count mismatch");
  // Biases start at small noise rather than zero; exact zeros park whole
  // feature columns on the ReLU kink, which breaks finite-difference audits.
  const double bias_noise = 0.01;
  const int in = 2 * cfg.n_joints;
  store.create("teacher.input.W", he_init(cfg.width, in, in, rng));
  store.create("teacher.input.b", gaussian(cfg.width, 1, bias_noise, rng));
  for (int i = 0; i < cfg.blocks; ++i) {
    // Residual blocks add onto the trunk, so their output layers start at
    // quarter gain; unit-gain He init compounds across blocks and sends the
    // second cycle pass through the projection clamp.
    std::string prefix = "teacher.block" + std::to_string(i);
    store.create(prefix + ".lin1.W",
                 he_init(cfg.bottleneck, cfg.width, cfg.width, rng));
    store.create(prefix + ".lin1.b",
                 gaussian(cfg.bottleneck, 1, bias_noise, rng));
    store.create(
        prefix + ".lin2.W",
        gaussian(cfg.width, cfg.bottleneck,
                 0.25 * std::sqrt(2.0 / static_cast<double>(cfg.bottleneck)),
                 rng));
    store.create(prefix + ".lin2.b", gaussian(cfg.width, 1, bias_noise, rng));
  }
  store.create("teacher.head_c.W",
               gaussian(cfg.dictionary_size, cfg.width,
                        0.3 / std::sqrt(static_cast<double>(cfg.width)), rng));
  store.create("teacher.head_c.b",
               gaussian(cfg.dictionary_size, 1, bias_noise, rng));
  store.create("teacher.head_r.W",
               gaussian(6, cfg.width,
                        1.0 / std::sqrt(static_cast<double>(cfg.width)), rng));
  // Bias the rotation head toward the identity so early samples are far from
  // the degenerate-parameter region.
  Matrix rb = gaussian(6, 1, bias_noise, rng);
  rb(0, 0) += 1.0;
  rb(4, 0) += 1.0;
  store.create("teacher.head_r.b", rb);

  Matrix dict = gaussian(3 * cfg.dictionary_size, cfg.n_joints, 0.1, rng);
  dict.row(0) = mean_pose.row(0);
  dict.row(1) = mean_pose.row(1);
  dict.row(2).setZero();
  store.create("teacher.dict.B", dict);
}

TeacherForward teacher_forward_batch(const Value& x_blocks,
                                     diff::ParamStore& params,
                                     const TeacherConfig& cfg) {
  cfg.validate();
  if (x_blocks.rows() != 2 || x_blocks.cols() % cfg.n_joints != 0)
    throw ValidationError("teacher input must be 2 x N*B in block layout");
  if (!x_blocks.data().allFinite())
    throw ValidationError("non-finite pose");
  Value x = diff::stack_blocks(diff::scale(x_blocks, cfg.input_scale),
                               cfg.n_joints);
  Value h = diff::relu(diff::linear(params.at("teacher.input.W"), x,
                                    params.at("teacher.input.b")));
  for (int i = 0; i < cfg.blocks; ++i) {
    std::string prefix = "teacher.block" + std::to_string(i);
    Value narrow = diff::relu(diff::linear(params.at(prefix + ".lin1.W"), h,
                                           params.at(prefix + ".lin1.b")));
    Value wide = diff::relu(diff::linear(params.at(prefix + ".lin2.W"), narrow,
                                         params.at(prefix + ".lin2.b")));
    h = diff::add(h, wide);
  }
  TeacherForward out;
  out.coefficients = diff::linear(params.at("teacher.head_c.W"), h,
                                  params.at("teacher.head_c.b"));
  out.rot_params = diff::linear(params.at("teacher.head_r.W"), h,
                                params.at("teacher.head_r.b"));
  out.rotations = diff::gram_schmidt_batch(out.rot_params);
  out.pose = diff::center_root_blocks(
      diff::dict_combine(params.at("teacher.dict.B"), out.coefficients,
                         cfg.n_joints),
      cfg.n_joints, cfg.root_index);
  return out;
}

TeacherOutput teacher_forward(const Pose2D& x, diff::ParamStore& params,
                              const TeacherConfig& cfg) {
  if (x.n_joints() != cfg.n_joints)
    throw ValidationError("teacher input joint count mismatch");
  TeacherForward fwd =
      teacher_forward_batch(Value::constant(x.coords), params, cfg);
  TeacherOutput out;
  out.coefficients = fwd.coefficients.data().col(0);
  Eigen::Map<const Eigen::Matrix3d> r(fwd.rotations.data().col(0).data());
  out.camera = RotationMatrix::from_matrix(r);
  out.canonical_pose = Pose3D{fwd.pose.data()};
  return out;
}

}  // namespace poselift

// Copyright (c) 2026 The poselift Authors
// SPDX-License-Identifier: Apache-2.0
//
// Pose-dictionary teacher: a fully-connected backbone over the flattened 2D
// pose feeds two heads, one producing dictionary coefficients and one
// producing rotation parameters; the 3D estimate is the coefficient-weighted
// sum of trainable pose atoms, root-centered.
#pragma once

#include <Eigen/Dense>

#include "poselift/diff.hpp"
#include "poselift/geometry.hpp"
#include "poselift/rng.hpp"

namespace poselift {

struct PoseDictionary {
  Eigen::MatrixXd atoms;  // 3K x N, atom k at rows 3k..3k+2
  int atom_count() const { return static_cast<int>(atoms.rows()) / 3; }
};

struct TeacherConfig {
  int n_joints = 17;
  int root_index = 0;
  int dictionary_size = 12;  // K
  int blocks = 6;
  int width = 1024;
  int bottleneck = 256;
  /// Fixed scaling applied to the 2D input before the backbone; compensates
  /// for the small normalized-input spread so first-layer activations are
  /// O(1).
  double input_scale = 10.0;
  void validate() const;
};

/// Weighted atom sum, then root-centering. Differentiability lives in the
/// graph path (dict_combine); this is the plain evaluation.
Pose3D pose_from_coefficients(const Eigen::VectorXd& coeffs,
                              const PoseDictionary& dict, int root_index = 0);

struct TeacherOutput {
  Eigen::VectorXd coefficients;  // K
  RotationMatrix camera = RotationMatrix::identity();
  Pose3D canonical_pose;  // root-centered
};

/// Creates all "teacher.*" parameters. The first dictionary atom is the mean
/// training 2D pose lifted with zero depth; remaining atoms are i.i.d.
/// Gaussian with sigma 0.1.
void init_teacher_params(diff::ParamStore& store, const TeacherConfig& cfg,
                         const Eigen::Matrix2Xd& mean_pose, Rng& rng);

/// Graph-building forward over a batch in block layout (x: 2 x N*B).
struct TeacherForward {
  diff::Value coefficients;  // K x B
  diff::Value rot_params;    // 6 x B
  diff::Value rotations;     // 9 x B, column-major flattened
  diff::Value pose;          // 3 x N*B, root-centered canonical pose
};
TeacherForward teacher_forward_batch(const diff::Value& x_blocks,
                                     diff::ParamStore& params,
                                     const TeacherConfig& cfg);

/// Single-pose convenience wrapper over the batched path.
TeacherOutput teacher_forward(const Pose2D& x, diff::ParamStore& params,
                              const TeacherConfig& cfg);

}  // namespace poselift

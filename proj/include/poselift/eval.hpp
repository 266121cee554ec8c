// Copyright (c) 2026 The poselift Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <vector>

#include "poselift/data.hpp"
#include "poselift/diff.hpp"
#include "poselift/geometry.hpp"
#include "poselift/skeleton.hpp"
#include "poselift/student.hpp"
#include "poselift/teacher.hpp"

namespace poselift {

/// Mean per-joint error after the closed-form optimal scale
/// s* = <pred, gt> / <pred, pred> is applied to the prediction.
double mpjpe(const Pose3D& pred, const Pose3D& gt);

/// Mean per-joint error after similarity Procrustes alignment (translation,
/// rotation with reflection correction, scale) of pred onto gt.
double p_mpjpe(const Pose3D& pred, const Pose3D& gt);

/// Share of joints (percent) with error below the threshold. Pure counting;
/// callers align/scale beforehand.
double pck(const Pose3D& pred, const Pose3D& gt, double threshold = 150.0);

/// Mean PCK over thresholds 5, 10, ..., 150.
double auc(const Pose3D& pred, const Pose3D& gt);

struct EvalRow {
  std::string action;
  int n = 0;
  double mpjpe = 0.0;
  double p_mpjpe = 0.0;
  double pck150 = 0.0;
  double auc = 0.0;
};

struct EvalReport {
  std::vector<EvalRow> per_action;
  EvalRow aggregate;  // action "ALL", sample-weighted means
  std::string config_fingerprint;
  bool any_nan() const;
};

/// Per-sample metrics against each record's ground truth, grouped by action.
/// Both poses are root-centered first; PCK/AUC are computed after applying
/// the same optimal scale used by mpjpe (predictions from unsupervised
/// models carry an arbitrary global scale).
EvalReport evaluate_predictions(const std::vector<Pose3D>& predictions,
                                const std::vector<PoseRecord>& records,
                                const SkeletonGraph& skeleton,
                                const std::string& config_fingerprint = "");

void write_report_csv(const EvalReport& report, const std::string& path);

/// Batched inference over a dataset. Predictions are in the normalized-input
/// scale; teacher predictions are the canonical pose rotated into the input
/// view (R_hat * Y_t), student predictions the lifted depth estimate.
std::vector<Pose3D> run_teacher_inference(diff::ParamStore& params,
                                          const TeacherConfig& cfg,
                                          std::vector<PoseRecord>& records,
                                          const SkeletonGraph& skeleton,
                                          double target_spread);
std::vector<Pose3D> run_student_inference(diff::ParamStore& params,
                                          const StudentConfig& cfg,
                                          std::vector<PoseRecord>& records,
                                          const SkeletonGraph& skeleton,
                                          const CameraModel& cam,
                                          double target_spread);

/// Mean of the root-centered ground-truth poses; the floor predictor.
Pose3D mean_pose_baseline(const std::vector<PoseRecord>& records,
                          const SkeletonGraph& skeleton);

struct ResidualStats {
  std::vector<double> residuals;  // relative Frobenius residual per sample
  double mean = 0.0;
  double fraction_below(double threshold) const;
};

/// Teacher rotation-invariance: |F_t(P(R Y_t)) - Y_t|_F / |Y_t|_F with one
/// fresh rotation per sample.
ResidualStats rotation_invariance_residuals(
    diff::ParamStore& params, const TeacherConfig& cfg,
    std::vector<PoseRecord>& records, const SkeletonGraph& skeleton,
    const CameraModel& cam, double target_spread, RotationMode mode,
    double elevation_min, double elevation_max, uint64_t seed);

/// Student rotation-equivariance: |F_s(P(R Y_s)) - R Y_s|_F / |Y_s|_F.
ResidualStats rotation_equivariance_residuals(
    diff::ParamStore& params, const StudentConfig& cfg,
    std::vector<PoseRecord>& records, const SkeletonGraph& skeleton,
    const CameraModel& cam, double target_spread, RotationMode mode,
    double elevation_min, double elevation_max, uint64_t seed);

/// Orthographic front-view SVG of one pose.
void render_skeleton(const Pose3D& pose, const SkeletonGraph& skeleton,
                     const std::string& path);

/// Side-by-side panels: 2D input plus any provided 3D poses.
void render_sample(const Pose2D& input, const std::vector<Pose3D>& poses,
                   const std::vector<std::string>& labels,
                   const SkeletonGraph& skeleton, const std::string& path);

}  // namespace poselift

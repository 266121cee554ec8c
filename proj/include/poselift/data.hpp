// Copyright (c) 2026 The poselift Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "poselift/geometry.hpp"
#include "poselift/skeleton.hpp"

namespace poselift {

/// One 2D pose observation. The optional 3D field exists for evaluation
/// only; it is private and reachable solely through the accessor named for
/// that purpose, so a grep over training code suffices to audit that
/// training never sees it.
class PoseRecord {
 public:
  std::string id;
  Eigen::Matrix2Xd joints2d;  // raw pixel/unit coordinates
  std::string subject;
  std::string action;
  std::string camera_id;
  double norm_scale = 1.0;  // diagnostic, set by normalize_input

  bool has_ground_truth() const { return joints3d_gt_.has_value(); }
  const Eigen::Matrix3Xd& ground_truth_for_eval() const {
    if (!joints3d_gt_) throw ValidationError("record has no 3D ground truth");
    return *joints3d_gt_;
  }
  void set_ground_truth(Eigen::Matrix3Xd gt) { joints3d_gt_ = std::move(gt); }

 private:
  std::optional<Eigen::Matrix3Xd> joints3d_gt_;
};

/// Reads one JSON object per line. Joint counts are validated against
/// expected_joints; schema violations name the offending line.
std::vector<PoseRecord> load_dataset(const std::string& path,
                                     int expected_joints);
void save_dataset(const std::vector<PoseRecord>& records,
                  const std::string& path);

/// Root-centers and rescales so the mean joint-to-root distance equals
/// target_spread. Stores the applied scale on the record.
Pose2D normalize_input(PoseRecord& rec, const SkeletonGraph& skeleton,
                       double target_spread = 0.1);

enum class SynthMode { kDictionary, kArticulated };
SynthMode synth_mode_from_string(const std::string& s);

struct SynthSpec {
  SynthMode mode = SynthMode::kDictionary;
  int n_samples = 5000;
  int true_atoms = 4;  // hidden dictionary size (dictionary mode)
  double coefficient_sigma = 1.0;
  RotationMode rotation_mode = RotationMode::kAzimuth;
  double elevation_min = -0.2;
  double elevation_max = 0.2;
  std::vector<double> bone_lengths;  // articulated mode, in edge-list order
  uint64_t seed = 1;
  void validate() const;
};

/// Samples poses, projects them through a per-sample random rotation and the
/// camera, and stores the camera-frame pose as evaluation-only ground truth.
/// Dictionary mode draws coefficients over a hidden dictionary (base pose
/// plus orthogonalized random deformations); articulated mode perturbs joint
/// angles over fixed bone lengths.
std::vector<PoseRecord> synth_generate(const SynthSpec& spec,
                                       const CameraModel& cam,
                                       const SkeletonGraph& skeleton);

/// Deterministic rest pose for a skeleton; the authored human pose for the
/// standard 17-joint topology, a BFS layout otherwise. Root-centered, mean
/// joint-to-root distance 0.5 units.
Eigen::Matrix3Xd base_pose(const SkeletonGraph& skeleton);

}  // namespace poselift

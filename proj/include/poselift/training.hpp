// Copyright (c) 2026 The poselift Authors
// SPDX-License-Identifier: Apache-2.0
//
// Two-stage training: stage 1 fits the teacher with reprojection +
// rotation-invariance losses; stage 2 freezes the teacher and fits the
// student with distillation + rotation-equivariance losses. Epoch-level
// randomness (shuffling, random rotations) comes from a generator derived
// from (seed, epoch), so resuming at epoch k replays the uninterrupted run
// bit for bit.
#pragma once

#include <map>
#include <string>
#include <vector>

#include "poselift/data.hpp"
#include "poselift/diff.hpp"
#include "poselift/losses.hpp"
#include "poselift/skeleton.hpp"
#include "poselift/student.hpp"
#include "poselift/teacher.hpp"

namespace poselift {

struct TrainConfig {
  int epochs = 40;
  int batch_size = 256;
  diff::SGDConfig sgd;
  LossWeights weights;
  uint64_t seed = 1;
  int checkpoint_every = 10;
  RotationMode rotation_mode = RotationMode::kAzimuth;
  double elevation_min = -0.2;
  double elevation_max = 0.2;
  bool detach_cycle_target = false;
  double target_spread = 0.1;
  CameraModel camera;
  TeacherConfig teacher;
  StudentConfig student;
  void validate() const;
};

/// Copies the skeleton's joint count and root into both network configs.
inline void bind_skeleton(TrainConfig& cfg, const SkeletonGraph& skeleton) {
  cfg.teacher.n_joints = skeleton.n_joints;
  cfg.teacher.root_index = skeleton.root_index;
  cfg.student.n_joints = skeleton.n_joints;
}

struct EpochLog {
  int epoch = 0;
  double loss_a = 0.0;  // l_rep (teacher) or l_kd (student)
  double loss_b = 0.0;  // l_ric (teacher) or l_rec (student)
  double total = 0.0;
  long clamped_joints = 0;
  double wall_seconds = 0.0;
};

struct TrainResult {
  std::string checkpoint_path;
  std::string log_path;
  std::vector<EpochLog> log;
};

/// Checkpoint contents: model parameters under their own names, optimizer
/// velocities under "opt.v.<name>", completed epochs under "meta.epoch".
struct TrainCheckpoint {
  std::map<std::string, Eigen::MatrixXd> model;
  std::map<std::string, Eigen::MatrixXd> velocities;
  int epochs_done = 0;
};
TrainCheckpoint read_train_checkpoint(const std::string& path);
void write_train_checkpoint(const std::string& path,
                            const diff::ParamStore& store,
                            const diff::SgdOptimizer& opt, int epochs_done);

/// Loads only the model parameters with the given prefix from a checkpoint.
void load_model_params(diff::ParamStore& store, const std::string& path,
                       const std::string& prefix);

/// Stage 1. Writes <out_prefix>.checkpoint.json and <out_prefix>.log.csv.
/// A non-finite loss or gradient aborts with the last written checkpoint
/// left in place.
TrainResult train_teacher(std::vector<PoseRecord>& records,
                          const TrainConfig& cfg,
                          const SkeletonGraph& skeleton,
                          const std::string& out_prefix,
                          const std::string& resume_path = "");

/// Stage 2. The teacher checkpoint is loaded read-only; a content hash taken
/// before and after training guards the frozen-teacher contract.
TrainResult train_student(std::vector<PoseRecord>& records,
                          const std::string& teacher_checkpoint,
                          const TrainConfig& cfg,
                          const SkeletonGraph& skeleton,
                          const std::string& out_prefix,
                          const std::string& resume_path = "");

}  // namespace poselift

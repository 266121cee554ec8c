// Copyright (c) 2026 The poselift Authors
// SPDX-License-Identifier: Apache-2.0
#include "poselift/training.hpp"

#include <chrono>
#include <cmath>
#include <fstream>

#include "poselift/jsonio.hpp"

namespace poselift {

using diff::Matrix;
using diff::Value;

void TrainConfig::validate() const {
  if (epochs <= 0) throw ValidationError("epochs must be positive");
  if (batch_size <= 0) throw ValidationError("batch_size must be positive");
  if (checkpoint_every <= 0)
    throw ValidationError("checkpoint_every must be positive");
  sgd.validate();
  weights.validate();
  camera.validate();
  if (!(target_spread > 0.0))
    throw ValidationError("target_spread must be positive");
  if (rotation_mode == RotationMode::kAzimuth && elevation_min > elevation_max)
    throw ValidationError("empty elevation range");
}

TrainCheckpoint read_train_checkpoint(const std::string& path) {
  auto named = load_named_matrices(path);
  TrainCheckpoint ckpt;
  for (auto& [name, m] : named) {
    if (name.rfind("opt.v.", 0) == 0) {
      ckpt.velocities.emplace(name.substr(6), std::move(m));
    } else if (name == "meta.epoch") {
      ckpt.epochs_done = static_cast<int>(m(0, 0));
    } else {
      ckpt.model.emplace(name, std::move(m));
    }
  }
  return ckpt;
}

void write_train_checkpoint(const std::string& path,
                            const diff::ParamStore& store,
                            const diff::SgdOptimizer& opt, int epochs_done) {
  std::map<std::string, Matrix> named;
  for (const auto& [name, v] : store.entries()) named.emplace(name, v.data());
  for (const auto& [name, m] : opt.velocities())
    named.emplace("opt.v." + name, m);
  Matrix epoch(1, 1);
  epoch(0, 0) = static_cast<double>(epochs_done);
  named.emplace("meta.epoch", epoch);
  save_named_matrices(named, path);
}

void load_model_params(diff::ParamStore& store, const std::string& path,
                       const std::string& prefix) {
  TrainCheckpoint ckpt = read_train_checkpoint(path);
  int count = 0;
  for (auto& [name, m] : ckpt.model) {
    if (name.rfind(prefix, 0) == 0) {
      store.create(name, std::move(m));
      ++count;
    }
  }
  if (count == 0)
    throw ValidationError("checkpoint " + path + " has no '" + prefix +
                          "' parameters");
}

namespace {

// Init draws come from dedicated streams so epoch streams (indexed from 0)
// never collide with them.
constexpr uint64_t kTeacherInitStream = 0xfeed0001ULL;
constexpr uint64_t kStudentInitStream = 0xfeed0002ULL;

struct NormalizedData {
  Matrix inputs;  // 2 x N*total, block layout in file order
  Eigen::Matrix2Xd mean_pose;
};

NormalizedData normalize_all(std::vector<PoseRecord>& records,
                             const SkeletonGraph& skeleton,
                             double target_spread) {
  if (records.empty()) throw ValidationError("dataset is empty");
  const int n = skeleton.n_joints;
  NormalizedData data;
  data.inputs.resize(2, n * records.size());
  data.mean_pose = Eigen::Matrix2Xd::Zero(2, n);
  for (size_t i = 0; i < records.size(); ++i) {
    Pose2D p = normalize_input(records[i], skeleton, target_spread);
    data.inputs.middleCols(i * n, n) = p.coords;
    data.mean_pose += p.coords;
  }
  data.mean_pose /= static_cast<double>(records.size());
  return data;
}

Matrix gather_batch(const Matrix& all, const std::vector<size_t>& order,
                    size_t start, size_t count, int n) {
  Matrix out(all.rows(), n * count);
  for (size_t i = 0; i < count; ++i)
    out.middleCols(i * n, n) = all.middleCols(order[start + i] * n, n);
  return out;
}

Matrix sample_rotations(size_t count, const TrainConfig& cfg, Rng& rng) {
  Matrix r9(9, count);
  for (size_t i = 0; i < count; ++i) {
    RotationMatrix r = sample_random_rotation(
        rng, cfg.rotation_mode, cfg.elevation_min, cfg.elevation_max);
    Eigen::Map<Eigen::Matrix3d>(r9.col(i).data()) = r.matrix();
  }
  return r9;
}

class EpochCsv {
 public:
  EpochCsv(const std::string& path, const char* loss_a, const char* loss_b)
      : out_(path) {
    if (!out_) throw ValidationError("cannot write log: " + path);
    out_ << "epoch," << loss_a << "," << loss_b
         << ",l_total,clamped_joints,wall_s\n";
  }
  void append(const EpochLog& row) {
    char buf[192];
    std::snprintf(buf, sizeof(buf), "%d,%.9g,%.9g,%.9g,%ld,%.3f\n", row.epoch,
                  row.loss_a, row.loss_b, row.total, row.clamped_joints,
                  row.wall_seconds);
    out_ << buf;
    out_.flush();
  }

 private:
  std::ofstream out_;
};

double scalar(const Value& v) {
  double x = v.data()(0, 0);
  if (!std::isfinite(x)) throw NumericError("non-finite training loss");
  return x;
}

}  // namespace

TrainResult train_teacher(std::vector<PoseRecord>& records,
                          const TrainConfig& cfg,
                          const SkeletonGraph& skeleton,
                          const std::string& out_prefix,
                          const std::string& resume_path) {
  cfg.validate();
  cfg.teacher.validate();
  if (cfg.teacher.n_joints != skeleton.n_joints)
    throw ValidationError("teacher joint count does not match skeleton");
  NormalizedData data = normalize_all(records, skeleton, cfg.target_spread);
  const int n = skeleton.n_joints;
  const size_t total = records.size();

  diff::ParamStore store;
  diff::SgdOptimizer opt(cfg.sgd);
  int start_epoch = 0;
  if (resume_path.empty()) {
    Rng init_rng = Rng(cfg.seed).fork(kTeacherInitStream);
    init_teacher_params(store, cfg.teacher, data.mean_pose, init_rng);
  } else {
    TrainCheckpoint ckpt = read_train_checkpoint(resume_path);
    for (auto& [name, m] : ckpt.model) store.create(name, std::move(m));
    for (auto& [name, m] : ckpt.velocities)
      opt.set_velocity(name, std::move(m));
    start_epoch = ckpt.epochs_done;
  }

  TrainResult result;
  result.checkpoint_path = out_prefix + ".checkpoint.json";
  result.log_path = out_prefix + ".log.csv";
  EpochCsv csv(result.log_path, "l_rep", "l_ric");

  std::vector<size_t> order(total);
  for (size_t i = 0; i < total; ++i) order[i] = i;

  for (int epoch = start_epoch; epoch < cfg.epochs; ++epoch) {
    auto t0 = std::chrono::steady_clock::now();
    Rng epoch_rng = Rng(cfg.seed).fork(static_cast<uint64_t>(epoch));
    for (size_t i = 0; i < total; ++i) order[i] = i;
    epoch_rng.shuffle(order);
    double sum_rep = 0.0, sum_ric = 0.0, sum_total = 0.0;
    long clamps = 0;
    size_t batches = 0;
    for (size_t start = 0; start < total;
         start += static_cast<size_t>(cfg.batch_size)) {
      size_t count =
          std::min<size_t>(static_cast<size_t>(cfg.batch_size), total - start);
      Value x = Value::constant(gather_batch(data.inputs, order, start, count,
                                             n));
      TeacherForward fwd = teacher_forward_batch(x, store, cfg.teacher);
      Value rep =
          reprojection_loss_graph(fwd, x, n, cfg.camera, &clamps);
      double rep_val = scalar(rep);
      Value loss = diff::scale(rep, cfg.weights.rep);
      double ric_val = 0.0;
      if (cfg.weights.ric > 0.0) {
        Matrix r9 = sample_rotations(count, cfg, epoch_rng);
        Value ric = ric_loss_graph(store, cfg.teacher, fwd, r9, cfg.camera,
                                   cfg.detach_cycle_target, &clamps);
        ric_val = scalar(ric);
        loss = diff::add(loss, diff::scale(ric, cfg.weights.ric));
      }
      double loss_val = scalar(loss);
      diff::backward(loss);
      opt.step(store);
      sum_rep += rep_val;
      sum_ric += ric_val;
      sum_total += loss_val;
      ++batches;
    }
    auto t1 = std::chrono::steady_clock::now();
    EpochLog row;
    row.epoch = epoch;
    row.loss_a = sum_rep / batches;
    row.loss_b = sum_ric / batches;
    row.total = sum_total / batches;
    row.clamped_joints = clamps;
    row.wall_seconds = std::chrono::duration<double>(t1 - t0).count();
    csv.append(row);
    result.log.push_back(row);
    if ((epoch + 1) % cfg.checkpoint_every == 0 || epoch + 1 == cfg.epochs)
      write_train_checkpoint(result.checkpoint_path, store, opt, epoch + 1);
  }
  return result;
}

TrainResult train_student(std::vector<PoseRecord>& records,
                          const std::string& teacher_checkpoint,
                          const TrainConfig& cfg,
                          const SkeletonGraph& skeleton,
                          const std::string& out_prefix,
                          const std::string& resume_path) {
  cfg.validate();
  cfg.teacher.validate();
  cfg.student.validate();
  if (cfg.student.n_joints != skeleton.n_joints)
    throw ValidationError("student joint count does not match skeleton");
  if (teacher_checkpoint.empty())
    throw ValidationError("stage 2 requires a stage-1 checkpoint path");

  diff::ParamStore teacher_store;
  load_model_params(teacher_store, teacher_checkpoint, "teacher.");
  if (!teacher_store.contains("teacher.dict.B"))
    throw ValidationError("teacher checkpoint is missing the dictionary");
  {
    Eigen::Index dict_rows = teacher_store.at("teacher.dict.B").rows();
    if (dict_rows != 3 * cfg.teacher.dictionary_size)
      throw ValidationError(
          "teacher checkpoint dictionary size does not match config");
  }
  uint64_t teacher_hash_before = teacher_store.data_hash();

  NormalizedData data = normalize_all(records, skeleton, cfg.target_spread);
  const int n = skeleton.n_joints;
  const size_t total = records.size();

  // The teacher is frozen for the whole stage, so its depth targets are
  // constants; compute them once over the dataset.
  Matrix kd_targets(1, n * total);
  for (size_t start = 0; start < total; start += 256) {
    size_t count = std::min<size_t>(256, total - start);
    Value x = Value::constant(data.inputs.middleCols(start * n, count * n));
    TeacherForward fwd = teacher_forward_batch(x, teacher_store, cfg.teacher);
    Value view = diff::rotate_blocks(fwd.rotations, fwd.pose, n);
    kd_targets.middleCols(start * n, count * n) = view.data().row(2);
  }

  diff::ParamStore store;
  diff::SgdOptimizer opt(cfg.sgd);
  int start_epoch = 0;
  if (resume_path.empty()) {
    Rng init_rng = Rng(cfg.seed).fork(kStudentInitStream);
    init_student_params(store, cfg.student, init_rng);
  } else {
    TrainCheckpoint ckpt = read_train_checkpoint(resume_path);
    for (auto& [name, m] : ckpt.model) store.create(name, std::move(m));
    for (auto& [name, m] : ckpt.velocities)
      opt.set_velocity(name, std::move(m));
    start_epoch = ckpt.epochs_done;
  }

  TrainResult result;
  result.checkpoint_path = out_prefix + ".checkpoint.json";
  result.log_path = out_prefix + ".log.csv";
  EpochCsv csv(result.log_path, "l_kd", "l_rec");

  std::vector<size_t> order(total);
  for (int epoch = start_epoch; epoch < cfg.epochs; ++epoch) {
    auto t0 = std::chrono::steady_clock::now();
    Rng epoch_rng = Rng(cfg.seed).fork(static_cast<uint64_t>(epoch));
    for (size_t i = 0; i < total; ++i) order[i] = i;
    epoch_rng.shuffle(order);
    double sum_kd = 0.0, sum_rec = 0.0, sum_total = 0.0;
    long clamps = 0;
    size_t batches = 0;
    for (size_t start = 0; start < total;
         start += static_cast<size_t>(cfg.batch_size)) {
      size_t count =
          std::min<size_t>(static_cast<size_t>(cfg.batch_size), total - start);
      Value x = Value::constant(gather_batch(data.inputs, order, start, count,
                                             n));
      Value depth = student_forward_batch(x, store, cfg.student, skeleton);
      double kd_val = 0.0, rec_val = 0.0;
      Value loss;
      if (cfg.weights.kd > 0.0) {
        Matrix targets = gather_batch(kd_targets, order, start, count, n);
        Value kd = kd_loss_graph(depth, targets, n);
        kd_val = scalar(kd);
        loss = diff::scale(kd, cfg.weights.kd);
      }
      if (cfg.weights.rec > 0.0) {
        Value pose = diff::lift_blocks(x, depth, cfg.camera.distance, &clamps);
        Matrix r9 = sample_rotations(count, cfg, epoch_rng);
        Value rec = rec_loss_graph(store, cfg.student, skeleton, pose, r9,
                                   cfg.camera, cfg.detach_cycle_target,
                                   &clamps);
        rec_val = scalar(rec);
        Value weighted = diff::scale(rec, cfg.weights.rec);
        loss = loss.valid() ? diff::add(loss, weighted) : weighted;
      }
      if (!loss.valid())
        throw ValidationError("student training needs a positive loss weight");
      double loss_val = scalar(loss);
      diff::backward(loss);
      opt.step(store);
      sum_kd += kd_val;
      sum_rec += rec_val;
      sum_total += loss_val;
      ++batches;
    }
    auto t1 = std::chrono::steady_clock::now();
    EpochLog row;
    row.epoch = epoch;
    row.loss_a = sum_kd / batches;
    row.loss_b = sum_rec / batches;
    row.total = sum_total / batches;
    row.clamped_joints = clamps;
    row.wall_seconds = std::chrono::duration<double>(t1 - t0).count();
    csv.append(row);
    result.log.push_back(row);
    if ((epoch + 1) % cfg.checkpoint_every == 0 || epoch + 1 == cfg.epochs)
      write_train_checkpoint(result.checkpoint_path, store, opt, epoch + 1);
  }

  if (teacher_store.data_hash() != teacher_hash_before)
    throw NumericError("teacher parameters changed during student training");
  return result;
}

}  // namespace poselift

// Copyright (c) 2026 The poselift Authors
// SPDX-License-Identifier: Apache-2.0
#include "poselift/data.hpp"

#include <cmath>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "poselift/jsonio.hpp"

namespace poselift {

namespace {

ValidationError line_error(const std::string& path, int line,
                           const std::string& message) {
  return ValidationError(path + ":" + std::to_string(line) + ": " + message);
}

Eigen::MatrixXd parse_points(const nlohmann::json& arr, int dims,
                             const std::string& path, int line,
                             const char* field) {
  if (!arr.is_array())
    throw line_error(path, line, std::string(field) + " must be an array");
  Eigen::MatrixXd m(dims, arr.size());
  Eigen::Index col = 0;
  for (const auto& pt : arr) {
    if (!pt.is_array() || static_cast<int>(pt.size()) != dims)
      throw line_error(path, line,
                       std::string(field) + " entries must have " +
                           std::to_string(dims) + " coordinates");
    for (int d = 0; d < dims; ++d) m(d, col) = pt[d].get<double>();
    ++col;
  }
  return m;
}

void append_points(std::string& out, const Eigen::MatrixXd& m) {
  out += "[";
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    if (c) out += ",";
    out += "[";
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      if (r) out += ",";
      out += format_double17(m(r, c));
    }
    out += "]";
  }
  out += "]";
}

}  // namespace

std::vector<PoseRecord> load_dataset(const std::string& path,
                                     int expected_joints) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open dataset: " + path);
  std::vector<PoseRecord> records;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw line_error(path, line_no, std::string("malformed JSON: ") + e.what());
    }
    if (!doc.is_object()) throw line_error(path, line_no, "expected an object");
    if (!doc.contains("joints2d"))
      throw line_error(path, line_no, "missing joints2d");
    PoseRecord rec;
    rec.joints2d = parse_points(doc["joints2d"], 2, path, line_no, "joints2d");
    if (rec.joints2d.cols() != expected_joints)
      throw line_error(path, line_no,
                       "joint count " + std::to_string(rec.joints2d.cols()) +
                           " does not match skeleton joint count " +
                           std::to_string(expected_joints));
    if (doc.contains("joints3d") && !doc["joints3d"].is_null()) {
      Eigen::Matrix3Xd gt =
          parse_points(doc["joints3d"], 3, path, line_no, "joints3d");
      if (gt.cols() != expected_joints)
        throw line_error(path, line_no, "joints3d joint count mismatch");
      rec.set_ground_truth(std::move(gt));
    }
    rec.id = doc.value("id", "line-" + std::to_string(line_no));
    rec.subject = doc.value("subject", "");
    rec.action = doc.value("action", "");
    rec.camera_id = doc.value("camera", "");
    records.push_back(std::move(rec));
  }
  return records;
}

void save_dataset(const std::vector<PoseRecord>& records,
                  const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write dataset: " + path);
  std::string line;
  for (const auto& rec : records) {
    line.clear();
    line += "{\"id\":" + nlohmann::json(rec.id).dump();
    line += ",\"joints2d\":";
    append_points(line, rec.joints2d);
    if (rec.has_ground_truth()) {
      line += ",\"joints3d\":";
      append_points(line, rec.ground_truth_for_eval());
    }
    line += ",\"subject\":" + nlohmann::json(rec.subject).dump();
    line += ",\"action\":" + nlohmann::json(rec.action).dump();
    line += ",\"camera\":" + nlohmann::json(rec.camera_id).dump();
    line += "}\n";
    out << line;
  }
  if (!out) throw ValidationError("write failed: " + path);
}

Pose2D normalize_input(PoseRecord& rec, const SkeletonGraph& skeleton,
                       double target_spread) {
  if (rec.joints2d.cols() != skeleton.n_joints)
    throw ValidationError("record joint count does not match skeleton");
  if (!(target_spread > 0.0))
    throw ValidationError("target_spread must be positive");
  Pose2D centered = root_center(rec.joints2d, skeleton.root_index);
  double spread = 0.0;
  int counted = 0;
  for (Eigen::Index j = 0; j < centered.coords.cols(); ++j) {
    if (static_cast<int>(j) == skeleton.root_index) continue;
    spread += centered.coords.col(j).norm();
    ++counted;
  }
  spread /= std::max(1, counted);
  if (!(spread > 0.0))
    throw ValidationError("degenerate pose: all joints coincident");
  double scale = target_spread / spread;
  rec.norm_scale = scale;
  centered.coords *= scale;
  return centered;
}

SynthMode synth_mode_from_string(const std::string& s) {
  if (s == "dictionary") return SynthMode::kDictionary;
  if (s == "articulated") return SynthMode::kArticulated;
  throw ValidationError("unknown synth mode: " + s);
}

void SynthSpec::validate() const {
  if (n_samples <= 0) throw ValidationError("n_samples must be positive");
  if (mode == SynthMode::kDictionary && true_atoms < 1)
    throw ValidationError("true_atoms must be at least 1");
  if (!(coefficient_sigma > 0.0))
    throw ValidationError("coefficient_sigma must be positive");
  if (rotation_mode == RotationMode::kAzimuth && elevation_min > elevation_max)
    throw ValidationError("empty elevation range");
}

Eigen::Matrix3Xd base_pose(const SkeletonGraph& skeleton) {
  Eigen::Matrix3Xd pose(3, skeleton.n_joints);
  bool standard17 = skeleton.n_joints == 17 && skeleton.root_index == 0;
  if (standard17) {
    // Upright rest pose, y up, x to the subject's left, z toward the camera.
    const double raw[17][3] = {
        {0.00, 0.00, 0.00},    // pelvis
        {-0.13, -0.02, 0.00},  // right hip
        {-0.14, -0.48, 0.03},  // right knee
        {-0.15, -0.92, 0.08},  // right ankle
        {0.13, -0.02, 0.00},   // left hip
        {0.14, -0.48, 0.03},   // left knee
        {0.15, -0.92, 0.08},   // left ankle
        {0.00, 0.25, -0.02},   // spine
        {0.00, 0.52, -0.03},   // thorax
        {0.00, 0.64, 0.03},    // nose
        {0.00, 0.75, -0.01},   // head
        {0.20, 0.46, -0.02},   // left shoulder
        {0.26, 0.18, 0.00},    // left elbow
        {0.28, -0.08, 0.05},   // left wrist
        {-0.20, 0.46, -0.02},  // right shoulder
        {-0.26, 0.18, 0.00},   // right elbow
        {-0.28, -0.08, 0.05},  // right wrist
    };
    for (int j = 0; j < 17; ++j)
      pose.col(j) = Eigen::Vector3d(raw[j][0], raw[j][1], raw[j][2]);
  } else {
    // Deterministic BFS layout: each joint offset from its parent in a
    // direction that varies with the joint index.
    auto parents = skeleton.bfs_parents();
    std::vector<int> order{skeleton.root_index};
    pose.setZero();
    for (size_t head = 0; head < order.size(); ++head) {
      int p = order[head];
      for (int j = 0; j < skeleton.n_joints; ++j) {
        if (parents[j] == p) {
          double angle = 2.39996322972865332 * j;  // golden-angle fan-out
          Eigen::Vector3d dir(std::cos(angle), std::sin(angle),
                              0.3 * std::cos(2.0 * angle));
          pose.col(j) = pose.col(p) + 0.3 * dir.normalized();
          order.push_back(j);
        }
      }
    }
  }
  Pose3D centered = root_center(pose, skeleton.root_index);
  double spread = 0.0;
  for (Eigen::Index j = 0; j < centered.coords.cols(); ++j)
    if (static_cast<int>(j) != skeleton.root_index)
      spread += centered.coords.col(j).norm();
  spread /= std::max(1, skeleton.n_joints - 1);
  return centered.coords * (0.5 / spread);
}

namespace {

// Hidden dictionary: atom 0 is the base pose; later atoms are random
// deformations with zeroed root column, orthogonalized in vectorized form.
std::vector<Eigen::Matrix3Xd> hidden_dictionary(const SkeletonGraph& skeleton,
                                                int atoms, Rng& rng) {
  std::vector<Eigen::Matrix3Xd> dict;
  dict.push_back(base_pose(skeleton));
  double atom_norm = dict[0].norm() * 0.35;
  for (int k = 1; k < atoms; ++k) {
    Eigen::Matrix3Xd atom(3, skeleton.n_joints);
    for (Eigen::Index j = 0; j < atom.cols(); ++j)
      for (int r = 0; r < 3; ++r) atom(r, j) = rng.normal();
    atom.col(skeleton.root_index).setZero();
    for (const auto& prev : dict) {
      double proj = (atom.array() * prev.array()).sum() / prev.squaredNorm();
      atom -= proj * prev;
    }
    double n = atom.norm();
    if (n < 1e-9) throw NumericError("degenerate hidden dictionary atom");
    dict.push_back(atom * (atom_norm / n));
  }
  return dict;
}

Eigen::Matrix3Xd sample_articulated(const SkeletonGraph& skeleton,
                                    const Eigen::Matrix3Xd& rest,
                                    const std::vector<double>& bone_lengths,
                                    Rng& rng) {
  auto parents = skeleton.bfs_parents();
  // Bone vectors in rest orientation, optionally rescaled to given lengths.
  std::vector<Eigen::Vector3d> bone(skeleton.n_joints,
                                    Eigen::Vector3d::Zero());
  for (int j = 0; j < skeleton.n_joints; ++j) {
    if (parents[j] < 0) continue;
    bone[j] = rest.col(j) - rest.col(parents[j]);
  }
  if (!bone_lengths.empty()) {
    if (bone_lengths.size() != skeleton.edges.size())
      throw ValidationError("bone_lengths must match the edge count");
    for (size_t e = 0; e < skeleton.edges.size(); ++e) {
      auto [a, b] = skeleton.edges[e];
      int child = parents[b] == a ? b : (parents[a] == b ? a : -1);
      if (child >= 0 && bone[child].norm() > 0.0)
        bone[child] = bone[child].normalized() * bone_lengths[e];
    }
  }
  // Depth-dependent random swing at every joint, composed down the tree.
  std::vector<Eigen::Matrix3d> accum(skeleton.n_joints,
                                     Eigen::Matrix3d::Identity());
  std::vector<int> depth(skeleton.n_joints, 0);
  Eigen::Matrix3Xd pose(3, skeleton.n_joints);
  pose.setZero();
  std::vector<int> order{skeleton.root_index};
  for (size_t head = 0; head < order.size(); ++head) {
    int p = order[head];
    for (int j = 0; j < skeleton.n_joints; ++j) {
      if (parents[j] != p) continue;
      depth[j] = depth[p] + 1;
      double range = depth[j] == 1 ? 0.25 : 0.6;
      Eigen::Vector3d axis(rng.normal(), rng.normal(), rng.normal());
      double n = axis.norm();
      axis = n > 1e-12 ? Eigen::Vector3d(axis / n) : Eigen::Vector3d::UnitX();
      double angle = rng.uniform(-range, range);
      accum[j] = accum[p] * Eigen::AngleAxisd(angle, axis).toRotationMatrix();
      pose.col(j) = pose.col(p) + accum[j] * bone[j];
      order.push_back(j);
    }
  }
  return pose;
}

}  // namespace

std::vector<PoseRecord> synth_generate(const SynthSpec& spec,
                                       const CameraModel& cam,
                                       const SkeletonGraph& skeleton) {
  spec.validate();
  cam.validate();
  Rng setup_rng = Rng(spec.seed).fork(0);
  Rng sample_rng = Rng(spec.seed).fork(1);

  std::vector<Eigen::Matrix3Xd> dict;
  Eigen::Matrix3Xd rest = base_pose(skeleton);
  if (spec.mode == SynthMode::kDictionary)
    dict = hidden_dictionary(skeleton, spec.true_atoms, setup_rng);

  std::vector<PoseRecord> records;
  records.reserve(spec.n_samples);
  const char* action =
      spec.mode == SynthMode::kDictionary ? "dictionary" : "articulated";
  for (int i = 0; i < spec.n_samples; ++i) {
    Eigen::Matrix3Xd canonical;
    if (spec.mode == SynthMode::kDictionary) {
      canonical = Eigen::Matrix3Xd::Zero(3, skeleton.n_joints);
      for (const auto& atom : dict)
        canonical += spec.coefficient_sigma * sample_rng.normal() * atom;
    } else {
      canonical = sample_articulated(skeleton, rest, spec.bone_lengths,
                                     sample_rng);
    }
    RotationMatrix r =
        sample_random_rotation(sample_rng, spec.rotation_mode,
                               spec.elevation_min, spec.elevation_max);
    Pose3D camera_frame = rotate_pose(Pose3D{canonical}, r);
    Pose2D projected = project_perspective(camera_frame, cam);
    PoseRecord rec;
    char id[32];
    std::snprintf(id, sizeof(id), "synth-%06d", i);
    rec.id = id;
    rec.subject = "SYNTH";
    rec.action = action;
    rec.camera_id = "virtual";
    rec.joints2d = projected.coords;
    rec.set_ground_truth(camera_frame.coords);
    records.push_back(std::move(rec));
  }
  return records;
}

}  // namespace poselift

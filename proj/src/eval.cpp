// Copyright (c) 2026 The poselift Authors
// SPDX-License-Identifier: Apache-2.0
#include "poselift/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

namespace poselift {

namespace {

void check_matched(const Pose3D& pred, const Pose3D& gt) {
  if (pred.coords.cols() != gt.coords.cols())
    throw ValidationError("pose joint counts do not match");
  if (pred.coords.cols() == 0) throw ValidationError("empty pose");
}

double optimal_scale(const Pose3D& pred, const Pose3D& gt) {
  double denom = pred.coords.squaredNorm();
  if (!(denom > 1e-300)) throw ValidationError("zero-norm prediction");
  return (pred.coords.array() * gt.coords.array()).sum() / denom;
}

}  // namespace

double mpjpe(const Pose3D& pred, const Pose3D& gt) {
  check_matched(pred, gt);
  double s = optimal_scale(pred, gt);
  double total = 0.0;
  for (Eigen::Index j = 0; j < pred.coords.cols(); ++j)
    total += (s * pred.coords.col(j) - gt.coords.col(j)).norm();
  return total / static_cast<double>(pred.coords.cols());
}

double p_mpjpe(const Pose3D& pred, const Pose3D& gt) {
  check_matched(pred, gt);
  Eigen::Index n = pred.coords.cols();
  Eigen::Vector3d mp = pred.coords.rowwise().mean();
  Eigen::Vector3d mg = gt.coords.rowwise().mean();
  Eigen::Matrix3Xd a = pred.coords.colwise() - mp;
  Eigen::Matrix3Xd g = gt.coords.colwise() - mg;
  if (!(g.squaredNorm() > 1e-300))
    throw ValidationError("degenerate ground truth");
  if (!(a.squaredNorm() > 1e-300))
    throw ValidationError("zero-norm prediction");
  Eigen::Matrix3d cov = g * a.transpose();
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(
      cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d u = svd.matrixU(), v = svd.matrixV();
  Eigen::Vector3d d = Eigen::Vector3d::Ones();
  if ((u * v.transpose()).determinant() < 0.0) d(2) = -1.0;
  Eigen::Matrix3d rot = u * d.asDiagonal() * v.transpose();
  double scale = (svd.singularValues().array() * d.array()).sum() /
                 a.squaredNorm();
  Eigen::Matrix3Xd aligned = (scale * (rot * a)).colwise() + mg;
  double total = 0.0;
  for (Eigen::Index j = 0; j < n; ++j)
    total += (aligned.col(j) - gt.coords.col(j)).norm();
  return total / static_cast<double>(n);
}

double pck(const Pose3D& pred, const Pose3D& gt, double threshold) {
  check_matched(pred, gt);
  Eigen::Index n = pred.coords.cols();
  int hits = 0;
  for (Eigen::Index j = 0; j < n; ++j)
    if ((pred.coords.col(j) - gt.coords.col(j)).norm() < threshold) ++hits;
  return 100.0 * hits / static_cast<double>(n);
}

double auc(const Pose3D& pred, const Pose3D& gt) {
  double total = 0.0;
  int count = 0;
  for (int thr = 5; thr <= 150; thr += 5) {
    total += pck(pred, gt, static_cast<double>(thr));
    ++count;
  }
  return total / count;
}

bool EvalReport::any_nan() const {
  auto bad = [](const EvalRow& r) {
    return !std::isfinite(r.mpjpe) || !std::isfinite(r.p_mpjpe) ||
           !std::isfinite(r.pck150) || !std::isfinite(r.auc);
  };
  for (const auto& r : per_action)
    if (bad(r)) return true;
  return bad(aggregate);
}

EvalReport evaluate_predictions(const std::vector<Pose3D>& predictions,
                                const std::vector<PoseRecord>& records,
                                const SkeletonGraph& skeleton,
                                const std::string& config_fingerprint) {
  if (predictions.size() != records.size())
    throw ValidationError("prediction/record count mismatch");
  if (records.empty()) throw ValidationError("empty evaluation dataset");
  std::map<std::string, EvalRow> rows;
  for (size_t i = 0; i < records.size(); ++i) {
    if (!records[i].has_ground_truth())
      throw ValidationError("evaluation requires ground truth");
    Pose3D gt = root_center(records[i].ground_truth_for_eval(),
                            skeleton.root_index);
    Pose3D pred = root_center(predictions[i].coords, skeleton.root_index);
    double e_mpjpe = mpjpe(pred, gt);
    double e_pmpjpe = p_mpjpe(pred, gt);
    Pose3D scaled{optimal_scale(pred, gt) * pred.coords};
    double e_pck = pck(scaled, gt);
    double e_auc = auc(scaled, gt);
    EvalRow& row = rows[records[i].action];
    row.action = records[i].action;
    row.n += 1;
    row.mpjpe += e_mpjpe;
    row.p_mpjpe += e_pmpjpe;
    row.pck150 += e_pck;
    row.auc += e_auc;
  }
  EvalReport report;
  report.config_fingerprint = config_fingerprint;
  report.aggregate.action = "ALL";
  for (auto& [action, row] : rows) {
    report.aggregate.n += row.n;
    report.aggregate.mpjpe += row.mpjpe;
    report.aggregate.p_mpjpe += row.p_mpjpe;
    report.aggregate.pck150 += row.pck150;
    report.aggregate.auc += row.auc;
    row.mpjpe /= row.n;
    row.p_mpjpe /= row.n;
    row.pck150 /= row.n;
    row.auc /= row.n;
    report.per_action.push_back(row);
  }
  report.aggregate.mpjpe /= report.aggregate.n;
  report.aggregate.p_mpjpe /= report.aggregate.n;
  report.aggregate.pck150 /= report.aggregate.n;
  report.aggregate.auc /= report.aggregate.n;
  return report;
}

void write_report_csv(const EvalReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write report: " + path);
  char buf[256];
  out << "# config=" << report.config_fingerprint << "\n";
  out << "action,n,mpjpe,p_mpjpe,pck150,auc\n";
  auto emit = [&](const EvalRow& r) {
    std::snprintf(buf, sizeof(buf), "%s,%d,%.9g,%.9g,%.9g,%.9g\n",
                  r.action.c_str(), r.n, r.mpjpe, r.p_mpjpe, r.pck150, r.auc);
    out << buf;
  };
  for (const auto& r : report.per_action) emit(r);
  emit(report.aggregate);
  if (!out) throw ValidationError("write failed: " + path);
}

namespace {

// Runs fn over the dataset in fixed-size batches of normalized inputs.
void for_each_batch(std::vector<PoseRecord>& records,
                    const SkeletonGraph& skeleton, double target_spread,
                    int batch_size,
                    const std::function<void(const Eigen::Matrix2Xd&, size_t)>&
                        fn) {
  size_t total = records.size();
  for (size_t start = 0; start < total; start += batch_size) {
    size_t count = std::min<size_t>(batch_size, total - start);
    Eigen::Matrix2Xd x(2, skeleton.n_joints * count);
    for (size_t i = 0; i < count; ++i)
      x.middleCols(i * skeleton.n_joints, skeleton.n_joints) =
          normalize_input(records[start + i], skeleton, target_spread).coords;
    fn(x, start);
  }
}

constexpr int kInferenceBatch = 256;

}  // namespace

std::vector<Pose3D> run_teacher_inference(diff::ParamStore& params,
                                          const TeacherConfig& cfg,
                                          std::vector<PoseRecord>& records,
                                          const SkeletonGraph& skeleton,
                                          double target_spread) {
  std::vector<Pose3D> out(records.size());
  for_each_batch(records, skeleton, target_spread, kInferenceBatch,
                 [&](const Eigen::Matrix2Xd& x, size_t start) {
                   auto fwd = teacher_forward_batch(
                       diff::Value::constant(x), params, cfg);
                   diff::Value view = diff::rotate_blocks(
                       fwd.rotations, fwd.pose, cfg.n_joints);
                   size_t count = x.cols() / cfg.n_joints;
                   for (size_t i = 0; i < count; ++i)
                     out[start + i] = Pose3D{view.data().middleCols(
                         i * cfg.n_joints, cfg.n_joints)};
                 });
  return out;
}

std::vector<Pose3D> run_student_inference(diff::ParamStore& params,
                                          const StudentConfig& cfg,
                                          std::vector<PoseRecord>& records,
                                          const SkeletonGraph& skeleton,
                                          const CameraModel& cam,
                                          double target_spread) {
  std::vector<Pose3D> out(records.size());
  for_each_batch(records, skeleton, target_spread, kInferenceBatch,
                 [&](const Eigen::Matrix2Xd& x, size_t start) {
                   diff::Value xv = diff::Value::constant(x);
                   diff::Value depth =
                       student_forward_batch(xv, params, cfg, skeleton);
                   diff::Value pose =
                       diff::lift_blocks(xv, depth, cam.distance);
                   size_t count = x.cols() / cfg.n_joints;
                   for (size_t i = 0; i < count; ++i)
                     out[start + i] = Pose3D{pose.data().middleCols(
                         i * cfg.n_joints, cfg.n_joints)};
                 });
  return out;
}

Pose3D mean_pose_baseline(const std::vector<PoseRecord>& records,
                          const SkeletonGraph& skeleton) {
  if (records.empty()) throw ValidationError("empty dataset");
  Eigen::Matrix3Xd mean = Eigen::Matrix3Xd::Zero(3, skeleton.n_joints);
  for (const auto& rec : records) {
    if (!rec.has_ground_truth())
      throw ValidationError("evaluation requires ground truth");
    mean += root_center(rec.ground_truth_for_eval(), skeleton.root_index)
                .coords;
  }
  return {mean / static_cast<double>(records.size())};
}

double ResidualStats::fraction_below(double threshold) const {
  if (residuals.empty()) return 0.0;
  size_t hits = 0;
  for (double r : residuals)
    if (r < threshold) ++hits;
  return static_cast<double>(hits) / residuals.size();
}

namespace {

Eigen::MatrixXd sample_rotation_columns(size_t count, RotationMode mode,
                                        double elev_min, double elev_max,
                                        Rng& rng) {
  Eigen::MatrixXd r9(9, count);
  for (size_t i = 0; i < count; ++i) {
    RotationMatrix r = sample_random_rotation(rng, mode, elev_min, elev_max);
    Eigen::Map<Eigen::Matrix3d>(r9.col(i).data()) = r.matrix();
  }
  return r9;
}

ResidualStats finalize(std::vector<double> residuals) {
  ResidualStats stats;
  stats.residuals = std::move(residuals);
  double sum = 0.0;
  for (double r : stats.residuals) sum += r;
  stats.mean = stats.residuals.empty() ? 0.0 : sum / stats.residuals.size();
  return stats;
}

}  // namespace

ResidualStats rotation_invariance_residuals(
    diff::ParamStore& params, const TeacherConfig& cfg,
    std::vector<PoseRecord>& records, const SkeletonGraph& skeleton,
    const CameraModel& cam, double target_spread, RotationMode mode,
    double elevation_min, double elevation_max, uint64_t seed) {
  Rng rng(seed);
  std::vector<double> residuals(records.size());
  for_each_batch(
      records, skeleton, target_spread, kInferenceBatch,
      [&](const Eigen::Matrix2Xd& x, size_t start) {
        size_t count = x.cols() / cfg.n_joints;
        auto first =
            teacher_forward_batch(diff::Value::constant(x), params, cfg);
        Eigen::MatrixXd r9 = sample_rotation_columns(
            count, mode, elevation_min, elevation_max, rng);
        diff::Value rotated = diff::rotate_blocks(diff::Value::constant(r9),
                                                  first.pose, cfg.n_joints);
        diff::Value reproj = diff::project_blocks(rotated, cam.distance);
        auto second = teacher_forward_batch(reproj, params, cfg);
        for (size_t i = 0; i < count; ++i) {
          auto y1 = first.pose.data().middleCols(i * cfg.n_joints,
                                                 cfg.n_joints);
          auto y2 = second.pose.data().middleCols(i * cfg.n_joints,
                                                  cfg.n_joints);
          residuals[start + i] = (y2 - y1).norm() / std::max(1e-12, y1.norm());
        }
      });
  return finalize(std::move(residuals));
}

ResidualStats rotation_equivariance_residuals(
    diff::ParamStore& params, const StudentConfig& cfg,
    std::vector<PoseRecord>& records, const SkeletonGraph& skeleton,
    const CameraModel& cam, double target_spread, RotationMode mode,
    double elevation_min, double elevation_max, uint64_t seed) {
  Rng rng(seed);
  std::vector<double> residuals(records.size());
  for_each_batch(
      records, skeleton, target_spread, kInferenceBatch,
      [&](const Eigen::Matrix2Xd& x, size_t start) {
        size_t count = x.cols() / cfg.n_joints;
        diff::Value xv = diff::Value::constant(x);
        diff::Value d1 = student_forward_batch(xv, params, cfg, skeleton);
        diff::Value y1 = diff::lift_blocks(xv, d1, cam.distance);
        Eigen::MatrixXd r9 = sample_rotation_columns(
            count, mode, elevation_min, elevation_max, rng);
        diff::Value target = diff::rotate_blocks(diff::Value::constant(r9), y1,
                                                 cfg.n_joints);
        diff::Value reproj = diff::project_blocks(target, cam.distance);
        diff::Value d2 = student_forward_batch(reproj, params, cfg, skeleton);
        diff::Value y2 = diff::lift_blocks(reproj, d2, cam.distance);
        for (size_t i = 0; i < count; ++i) {
          auto t = target.data().middleCols(i * cfg.n_joints, cfg.n_joints);
          auto e = y2.data().middleCols(i * cfg.n_joints, cfg.n_joints);
          auto y = y1.data().middleCols(i * cfg.n_joints, cfg.n_joints);
          residuals[start + i] = (e - t).norm() / std::max(1e-12, y.norm());
        }
      });
  return finalize(std::move(residuals));
}

namespace {

struct SvgCanvas {
  std::string body;
  double min_x = 1e30, max_x = -1e30, min_y = 1e30, max_y = -1e30;

  void touch(double x, double y) {
    min_x = std::min(min_x, x);
    max_x = std::max(max_x, x);
    min_y = std::min(min_y, y);
    max_y = std::max(max_y, y);
  }
};

// Front view: x right, y up (flipped for SVG), offset per panel.
void draw_pose(SvgCanvas& canvas, const Eigen::MatrixXd& xy,
               const SkeletonGraph& skeleton, double offset_x,
               const std::string& color, const std::string& label) {
  char buf[256];
  for (const auto& [a, b] : skeleton.edges) {
    std::snprintf(buf, sizeof(buf),
                  "<line x1='%.4f' y1='%.4f' x2='%.4f' y2='%.4f' "
                  "stroke='%s' stroke-width='0.01'/>\n",
                  offset_x + xy(0, a), -xy(1, a), offset_x + xy(0, b),
                  -xy(1, b), color.c_str());
    canvas.body += buf;
  }
  for (Eigen::Index j = 0; j < xy.cols(); ++j) {
    std::snprintf(buf, sizeof(buf),
                  "<circle cx='%.4f' cy='%.4f' r='0.015' fill='%s'/>\n",
                  offset_x + xy(0, j), -xy(1, j), color.c_str());
    canvas.body += buf;
    canvas.touch(offset_x + xy(0, j), -xy(1, j));
  }
  std::snprintf(buf, sizeof(buf),
                "<text x='%.4f' y='%.4f' font-size='0.08'>%s</text>\n",
                offset_x - 0.4, canvas.max_y + 0.25, label.c_str());
  canvas.body += buf;
}

void write_svg(const SvgCanvas& canvas, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write SVG: " + path);
  double pad = 0.3;
  double w = canvas.max_x - canvas.min_x + 2 * pad;
  double h = canvas.max_y - canvas.min_y + 2 * pad;
  out << "<svg xmlns='http://www.w3.org/2000/svg' viewBox='"
      << canvas.min_x - pad << " " << canvas.min_y - pad << " " << w << " "
      << h << "' width='" << static_cast<int>(240 * w) << "' height='"
      << static_cast<int>(240 * h) << "'>\n"
      << canvas.body << "</svg>\n";
}

Eigen::MatrixXd normalized_xy(const Eigen::MatrixXd& rows2) {
  double n = rows2.norm();
  return n > 1e-12 ? Eigen::MatrixXd(rows2 / n * 2.0) : rows2;
}

}  // namespace

void render_skeleton(const Pose3D& pose, const SkeletonGraph& skeleton,
                     const std::string& path) {
  if (pose.n_joints() != skeleton.n_joints)
    throw ValidationError("pose joint count does not match skeleton");
  SvgCanvas canvas;
  draw_pose(canvas, normalized_xy(pose.coords.topRows(2)), skeleton, 0.0,
            "#1f77b4", "pose");
  write_svg(canvas, path);
}

void render_sample(const Pose2D& input, const std::vector<Pose3D>& poses,
                   const std::vector<std::string>& labels,
                   const SkeletonGraph& skeleton, const std::string& path) {
  if (poses.size() != labels.size())
    throw ValidationError("render_sample: label count mismatch");
  SvgCanvas canvas;
  const char* colors[] = {"#d62728", "#2ca02c", "#1f77b4", "#9467bd"};
  draw_pose(canvas, normalized_xy(input.coords), skeleton, 0.0, "#444444",
            "input 2d");
  for (size_t i = 0; i < poses.size(); ++i)
    draw_pose(canvas, normalized_xy(poses[i].coords.topRows(2)), skeleton,
              2.5 * (i + 1), colors[i % 4], labels[i]);
  write_svg(canvas, path);
}

}  // namespace poselift

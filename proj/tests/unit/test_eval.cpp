// Copyright (c) 2026 The poselift Authors
// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "poselift/eval.hpp"

using namespace poselift;

namespace {

Eigen::Matrix3Xd randn3(int n, Rng& rng, double s = 1.0) {
  Eigen::Matrix3Xd m(3, n);
  for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = s * rng.normal();
  return m;
}

// Independent alignment oracle: coarse-to-fine grid over ZYX Euler angles
// with a golden-section search over scale at each rotation, translation by
// centroids. Returns the mean per-joint distance at the best similarity.
double brute_force_alignment_error(const Pose3D& pred, const Pose3D& gt) {
  Eigen::Vector3d mp = pred.coords.rowwise().mean();
  Eigen::Vector3d mg = gt.coords.rowwise().mean();
  Eigen::Matrix3Xd a = pred.coords.colwise() - mp;
  Eigen::Matrix3Xd g = gt.coords.colwise() - mg;

  auto sse_at = [&](const Eigen::Matrix3d& rot, double scale) {
    return (scale * (rot * a) - g).squaredNorm();
  };
  auto golden_scale = [&](const Eigen::Matrix3d& rot) {
    double lo = 1e-3, hi = 1e3;
    const double phi = 0.6180339887498949;
    double x1 = hi - phi * (hi - lo), x2 = lo + phi * (hi - lo);
    double f1 = sse_at(rot, x1), f2 = sse_at(rot, x2);
    for (int it = 0; it < 80; ++it) {
      if (f1 < f2) {
        hi = x2;
        x2 = x1;
        f2 = f1;
        x1 = hi - phi * (hi - lo);
        f1 = sse_at(rot, x1);
      } else {
        lo = x1;
        x1 = x2;
        f1 = f2;
        x2 = lo + phi * (hi - lo);
        f2 = sse_at(rot, x2);
      }
    }
    return (lo + hi) / 2.0;
  };
  auto euler = [](double z1, double y, double z2) {
    return Eigen::Matrix3d(
        Eigen::AngleAxisd(z1, Eigen::Vector3d::UnitZ()) *
        Eigen::AngleAxisd(y, Eigen::Vector3d::UnitY()) *
        Eigen::AngleAxisd(z2, Eigen::Vector3d::UnitZ()));
  };

  double best_sse = std::numeric_limits<double>::infinity();
  double bz1 = 0, by = 0, bz2 = 0;
  const double pi = 3.14159265358979323846;
  double step = pi / 12.0;
  for (double z1 = -pi; z1 < pi; z1 += step)
    for (double y = 0; y <= pi; y += step)
      for (double z2 = -pi; z2 < pi; z2 += step) {
        Eigen::Matrix3d rot = euler(z1, y, z2);
        double sse = sse_at(rot, golden_scale(rot));
        if (sse < best_sse) {
          best_sse = sse;
          bz1 = z1;
          by = y;
          bz2 = z2;
        }
      }
  for (int refine = 0; refine < 6; ++refine) {
    step /= 3.0;
    double cz1 = bz1, cy = by, cz2 = bz2;
    for (double z1 = cz1 - 2 * step; z1 <= cz1 + 2 * step; z1 += step)
      for (double y = cy - 2 * step; y <= cy + 2 * step; y += step)
        for (double z2 = cz2 - 2 * step; z2 <= cz2 + 2 * step; z2 += step) {
          Eigen::Matrix3d rot = euler(z1, y, z2);
          double sse = sse_at(rot, golden_scale(rot));
          if (sse < best_sse) {
            best_sse = sse;
            bz1 = z1;
            by = y;
            bz2 = z2;
          }
        }
  }
  Eigen::Matrix3d rot = euler(bz1, by, bz2);
  double scale = golden_scale(rot);
  double total = 0.0;
  for (Eigen::Index j = 0; j < a.cols(); ++j)
    total += (scale * (rot * a.col(j)) - g.col(j)).norm();
  return total / static_cast<double>(a.cols());
}

}  // namespace

TEST_SUITE("eval") {

TEST_CASE("mpjpe is zero for a perfect or rescaled prediction") {
  Rng rng(91);
  Pose3D gt{randn3(8, rng)};
  CHECK(mpjpe(gt, gt) == 0.0);
  Pose3D doubled{2.0 * gt.coords};
  CHECK(mpjpe(doubled, gt) < 1e-12);  // optimal scale 0.5 removes the factor
}

TEST_CASE("mpjpe matches a hand-computed scale-neutral case") {
  // Offsets (3,4,0) on both joints are orthogonal to the prediction, so the
  // optimal scale is exactly 1 and every joint errs by 5.
  Eigen::Matrix3Xd pred(3, 2), gt(3, 2);
  pred << 10, -10, 0, 0, 0, 0;
  gt << 13, -7, 4, 4, 0, 0;
  CHECK(mpjpe(Pose3D{pred}, Pose3D{gt}) ==
        doctest::Approx(5.0).epsilon(1e-12));
}

TEST_CASE("mpjpe rejects a zero-norm prediction") {
  Rng rng(92);
  Pose3D gt{randn3(4, rng)};
  Pose3D zero{Eigen::Matrix3Xd::Zero(3, 4)};
  CHECK_THROWS_WITH_AS(mpjpe(zero, gt), "zero-norm prediction",
                       ValidationError);
}

TEST_CASE("p_mpjpe removes any similarity transform") {
  Rng rng(93);
  for (int trial = 0; trial < 100; ++trial) {
    Pose3D gt{randn3(10, rng)};
    RotationMatrix r =
        sample_random_rotation(rng, RotationMode::kSo3Uniform, 0, 0);
    double scale = std::exp(rng.normal());
    Eigen::Vector3d shift(rng.normal(), rng.normal(), rng.normal());
    Pose3D pred{(scale * (r.matrix() * gt.coords)).colwise() + shift};
    CHECK(p_mpjpe(pred, gt) < 1e-8);
  }
}

TEST_CASE("p_mpjpe never exceeds mpjpe") {
  Rng rng(94);
  for (int trial = 0; trial < 300; ++trial) {
    Pose3D gt{randn3(6, rng)};
    Pose3D pred{gt.coords + 0.3 * randn3(6, rng).matrix()};
    CHECK(p_mpjpe(pred, gt) <= mpjpe(pred, gt) + 1e-9);
  }
}

TEST_CASE("p_mpjpe handles reflection-prone configurations") {
  // A flat pose invites an improper rotation; the determinant correction
  // must keep the alignment in SO(3), so the error stays positive.
  Eigen::Matrix3Xd gt(3, 4);
  gt << 1, -1, 0, 0, 0, 0, 1, -1, 0, 0, 0, 0;
  Eigen::Matrix3Xd pred = gt;
  pred.row(2) << 0.3, 0.3, -0.3, -0.3;  // non-planar perturbation
  double err = p_mpjpe(Pose3D{pred}, Pose3D{gt});
  CHECK(err > 0.0);
  CHECK(std::isfinite(err));
}

TEST_CASE("p_mpjpe rejects rank-zero ground truth") {
  Rng rng(95);
  Pose3D pred{randn3(5, rng)};
  Pose3D flat{Eigen::Matrix3Xd::Constant(3, 5, 2.0)};  // all joints coincide
  CHECK_THROWS_AS(p_mpjpe(pred, flat), ValidationError);
}

TEST_CASE("p_mpjpe agrees with the brute-force alignment oracle") {
  Rng rng(96);
  for (int trial = 0; trial < 100; ++trial) {
    Pose3D gt{randn3(8, rng)};
    RotationMatrix r =
        sample_random_rotation(rng, RotationMode::kSo3Uniform, 0, 0);
    double scale = std::exp(0.5 * rng.normal());
    Eigen::Vector3d shift(rng.normal(), rng.normal(), rng.normal());
    Eigen::Matrix3Xd noisy =
        gt.coords + 0.05 * gt.coords.norm() / std::sqrt(24.0) *
                        randn3(8, rng).matrix();
    Pose3D pred{(scale * (r.matrix() * noisy)).colwise() + shift};
    double closed_form = p_mpjpe(pred, gt);
    double brute = brute_force_alignment_error(pred, gt);
    CHECK(closed_form == doctest::Approx(brute).epsilon(0.01));
  }
}

TEST_CASE("pck counts joints under the threshold") {
  Eigen::Matrix3Xd gt = Eigen::Matrix3Xd::Zero(3, 4);
  Eigen::Matrix3Xd pred = gt;
  pred(0, 0) = 100.0;
  pred(0, 1) = 100.0;
  pred(0, 2) = 200.0;
  pred(0, 3) = 200.0;
  CHECK(pck(Pose3D{pred}, Pose3D{gt}, 150.0) ==
        doctest::Approx(50.0).epsilon(1e-15));
  CHECK(pck(Pose3D{gt}, Pose3D{gt}, 150.0) == 100.0);
  CHECK(auc(Pose3D{gt}, Pose3D{gt}) == 100.0);
}

TEST_CASE("auc equals the loop oracle over thresholds") {
  Rng rng(97);
  for (int trial = 0; trial < 200; ++trial) {
    Pose3D gt{randn3(7, rng, 60.0)};
    Pose3D pred{gt.coords + randn3(7, rng, 50.0).matrix()};
    double expected = 0.0;
    int count = 0;
    for (int thr = 5; thr <= 150; thr += 5) {
      expected += pck(pred, gt, thr);
      ++count;
    }
    expected /= count;
    CHECK(auc(pred, gt) == expected);
  }
}

TEST_CASE("metrics are invariant to consistent joint permutations") {
  Rng rng(98);
  Pose3D gt{randn3(6, rng)};
  Pose3D pred{gt.coords + 0.2 * randn3(6, rng).matrix()};
  std::vector<int> perm{3, 1, 5, 0, 2, 4};
  Eigen::Matrix3Xd gt_p(3, 6), pred_p(3, 6);
  for (int j = 0; j < 6; ++j) {
    gt_p.col(j) = gt.coords.col(perm[j]);
    pred_p.col(j) = pred.coords.col(perm[j]);
  }
  CHECK(mpjpe(pred, gt) ==
        doctest::Approx(mpjpe(Pose3D{pred_p}, Pose3D{gt_p})).epsilon(1e-12));
  CHECK(p_mpjpe(pred, gt) ==
        doctest::Approx(p_mpjpe(Pose3D{pred_p}, Pose3D{gt_p}))
            .epsilon(1e-10));
  CHECK(pck(pred, gt) == pck(Pose3D{pred_p}, Pose3D{gt_p}));
}

TEST_CASE("evaluating the ground truth against itself is all zeros") {
  SkeletonGraph skeleton = SkeletonGraph::human17();
  CameraModel cam;
  SynthSpec spec;
  spec.n_samples = 20;
  spec.seed = 3;
  auto records = synth_generate(spec, cam, skeleton);
  std::vector<Pose3D> preds;
  for (const auto& rec : records)
    preds.push_back(Pose3D{rec.ground_truth_for_eval()});
  EvalReport report = evaluate_predictions(preds, records, skeleton, "x");
  CHECK(report.aggregate.mpjpe == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(report.aggregate.p_mpjpe < 1e-9);
  CHECK(report.aggregate.pck150 == 100.0);
  CHECK(report.aggregate.auc == 100.0);
  CHECK_FALSE(report.any_nan());
}

TEST_CASE("report aggregate is the sample-weighted mean of action rows") {
  SkeletonGraph skeleton = SkeletonGraph::human17();
  Rng rng(99);
  std::vector<PoseRecord> records;
  std::vector<Pose3D> preds;
  const char* actions[] = {"walk", "walk", "walk", "sit", "sit"};
  for (int i = 0; i < 5; ++i) {
    PoseRecord rec;
    rec.id = "r" + std::to_string(i);
    rec.action = actions[i];
    rec.joints2d = Eigen::Matrix2Xd::Zero(2, 17);
    Eigen::Matrix3Xd gt = randn3(17, rng);
    rec.set_ground_truth(gt);
    records.push_back(rec);
    preds.push_back(Pose3D{gt + 0.1 * randn3(17, rng).matrix()});
  }
  EvalReport report = evaluate_predictions(preds, records, skeleton, "y");
  REQUIRE(report.per_action.size() == 2);
  double weighted = 0.0;
  int total = 0;
  for (const auto& row : report.per_action) {
    weighted += row.mpjpe * row.n;
    total += row.n;
  }
  CHECK(total == 5);
  CHECK(report.aggregate.mpjpe ==
        doctest::Approx(weighted / total).epsilon(1e-12));
}

TEST_CASE("evaluation requires ground truth") {
  SkeletonGraph skeleton = SkeletonGraph::human17();
  std::vector<PoseRecord> records(1);
  records[0].joints2d = Eigen::Matrix2Xd::Zero(2, 17);
  std::vector<Pose3D> preds{Pose3D{Eigen::Matrix3Xd::Ones(3, 17)}};
  CHECK_THROWS_WITH_AS(evaluate_predictions(preds, records, skeleton, ""),
                       "evaluation requires ground truth", ValidationError);
}

TEST_CASE("mean pose baseline produces a finite nonzero report") {
  SkeletonGraph skeleton = SkeletonGraph::human17();
  CameraModel cam;
  SynthSpec spec;
  spec.n_samples = 50;
  spec.seed = 17;
  auto records = synth_generate(spec, cam, skeleton);
  Pose3D mean = mean_pose_baseline(records, skeleton);
  std::vector<Pose3D> preds(records.size(), mean);
  EvalReport report = evaluate_predictions(preds, records, skeleton, "b");
  CHECK(std::isfinite(report.aggregate.p_mpjpe));
  CHECK(report.aggregate.p_mpjpe > 0.0);
}

TEST_CASE("report csv has the pinned header and all rows") {
  EvalReport report;
  report.config_fingerprint = "abc";
  EvalRow row{"walk", 3, 1.0, 0.5, 90.0, 80.0};
  report.per_action.push_back(row);
  report.aggregate = row;
  report.aggregate.action = "ALL";
  auto path =
      (std::filesystem::temp_directory_path() / "poselift_report.csv")
          .string();
  write_report_csv(report, path);
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  CHECK(line == "# config=abc");
  std::getline(in, line);
  CHECK(line == "action,n,mpjpe,p_mpjpe,pck150,auc");
  std::getline(in, line);
  CHECK(line.rfind("walk,3,", 0) == 0);
  std::getline(in, line);
  CHECK(line.rfind("ALL,3,", 0) == 0);
  std::filesystem::remove(path);
}

TEST_CASE("skeleton rendering writes an SVG with all the edges") {
  SkeletonGraph skeleton = SkeletonGraph::human17();
  Rng rng(100);
  Pose3D pose{randn3(17, rng)};
  auto path =
      (std::filesystem::temp_directory_path() / "poselift_render.svg")
          .string();
  render_skeleton(pose, skeleton, path);
  std::ifstream in(path);
  std::string content((std::istreambuf_iterator<char>(in)),
                      std::istreambuf_iterator<char>());
  CHECK(content.find("<svg") != std::string::npos);
  size_t lines = 0;
  for (size_t pos = 0; (pos = content.find("<line", pos)) != std::string::npos;
       ++pos)
    ++lines;
  CHECK(lines == skeleton.edges.size());
  std::filesystem::remove(path);
}

}  // TEST_SUITE

// Copyright (c) 2026 The poselift Authors
// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include "poselift/teacher.hpp"

using namespace poselift;
using diff::Matrix;

namespace {

Matrix randn(Eigen::Index r, Eigen::Index c, Rng& rng, double s = 1.0) {
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = s * rng.normal();
  return m;
}

TeacherConfig tiny_config(int n = 4, int k = 3) {
  TeacherConfig cfg;
  cfg.n_joints = n;
  cfg.dictionary_size = k;
  cfg.blocks = 2;
  cfg.width = 12;
  cfg.bottleneck = 6;
  cfg.input_scale = 1.0;
  return cfg;
}

}  // namespace

TEST_SUITE("teacher") {

TEST_CASE("one-hot coefficients select the root-centered atom") {
  Rng rng(21);
  PoseDictionary dict{randn(9, 5, rng)};
  Eigen::VectorXd c = Eigen::VectorXd::Zero(3);
  c(0) = 1.0;
  Pose3D pose = pose_from_coefficients(c, dict, 0);
  Eigen::Matrix3Xd expected = dict.atoms.topRows(3);
  expected.colwise() -= Eigen::Vector3d(expected.col(0));
  CHECK((pose.coords - expected).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("zero coefficients give the zero pose") {
  Rng rng(22);
  PoseDictionary dict{randn(6, 4, rng)};
  Pose3D pose = pose_from_coefficients(Eigen::VectorXd::Zero(2), dict, 0);
  CHECK(pose.coords.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("combination matches a naive per-atom summation oracle") {
  Rng rng(23);
  PoseDictionary dict{randn(9, 6, rng)};
  Eigen::VectorXd c(3);
  c << 2.0, -1.0, 0.5;
  Pose3D pose = pose_from_coefficients(c, dict, 0);
  // independent oracle: loop over atoms and joints
  Eigen::Matrix3Xd naive = Eigen::Matrix3Xd::Zero(3, 6);
  for (int k = 0; k < 3; ++k)
    for (int j = 0; j < 6; ++j)
      for (int r = 0; r < 3; ++r)
        naive(r, j) += c(k) * dict.atoms(3 * k + r, j);
  naive.colwise() -= Eigen::Vector3d(naive.col(0));
  CHECK((pose.coords - naive).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("combination is linear in the coefficients") {
  Rng rng(24);
  PoseDictionary dict{randn(12, 5, rng)};
  for (int trial = 0; trial < 100; ++trial) {
    Eigen::VectorXd c1 = randn(4, 1, rng).col(0);
    Eigen::VectorXd c2 = randn(4, 1, rng).col(0);
    double alpha = rng.normal(), beta = rng.normal();
    Pose3D combo = pose_from_coefficients(alpha * c1 + beta * c2, dict, 0);
    Pose3D split = Pose3D{alpha * pose_from_coefficients(c1, dict, 0).coords +
                          beta * pose_from_coefficients(c2, dict, 0).coords};
    CHECK((combo.coords - split.coords).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("coefficient size mismatch is rejected") {
  Rng rng(25);
  PoseDictionary dict{randn(9, 4, rng)};
  CHECK_THROWS_AS(pose_from_coefficients(Eigen::VectorXd::Zero(2), dict, 0),
                  ValidationError);
}

TEST_CASE("forward output contract") {
  Rng rng(26);
  TeacherConfig cfg = tiny_config();
  diff::ParamStore store;
  Rng init(27);
  init_teacher_params(store, cfg, Matrix::Zero(2, cfg.n_joints), init);
  Pose2D x{randn(2, cfg.n_joints, rng, 0.1)};

  TeacherOutput out = teacher_forward(x, store, cfg);
  CHECK(out.coefficients.size() == cfg.dictionary_size);
  CHECK(out.canonical_pose.n_joints() == cfg.n_joints);
  // camera is validated SO(3) by construction of TeacherOutput
  const Eigen::Matrix3d& m = out.camera.matrix();
  CHECK((m.transpose() * m - Eigen::Matrix3d::Identity())
            .cwiseAbs()
            .maxCoeff() < 1e-10);
  // canonical pose is root-centered
  CHECK(out.canonical_pose.coords.col(cfg.root_index).cwiseAbs().maxCoeff() ==
        0.0);
  // the pose equals the dictionary combination of the coefficients
  PoseDictionary dict{store.at("teacher.dict.B").data()};
  Pose3D recomputed =
      pose_from_coefficients(out.coefficients, dict, cfg.root_index);
  CHECK((out.canonical_pose.coords - recomputed.coords).cwiseAbs().maxCoeff() <
        1e-15);

  SUBCASE("forward is pure") {
    TeacherOutput again = teacher_forward(x, store, cfg);
    CHECK((again.canonical_pose.coords - out.canonical_pose.coords)
              .cwiseAbs()
              .maxCoeff() == 0.0);
    CHECK((again.coefficients - out.coefficients).cwiseAbs().maxCoeff() ==
          0.0);
  }
}

TEST_CASE("batched forward matches per-sample forward") {
  Rng rng(28);
  TeacherConfig cfg = tiny_config(5, 2);
  diff::ParamStore store;
  Rng init(29);
  init_teacher_params(store, cfg, Matrix::Zero(2, cfg.n_joints), init);
  const int batch = 3;
  Matrix x = randn(2, cfg.n_joints * batch, rng, 0.1);
  TeacherForward fwd =
      teacher_forward_batch(diff::Value::constant(x), store, cfg);
  for (int b = 0; b < batch; ++b) {
    Pose2D xi{x.middleCols(b * cfg.n_joints, cfg.n_joints)};
    TeacherOutput single = teacher_forward(xi, store, cfg);
    CHECK((fwd.coefficients.data().col(b) - single.coefficients)
              .cwiseAbs()
              .maxCoeff() < 1e-12);
    CHECK((fwd.pose.data().middleCols(b * cfg.n_joints, cfg.n_joints) -
           single.canonical_pose.coords)
              .cwiseAbs()
              .maxCoeff() < 1e-12);
  }
}

TEST_CASE("dictionary initialization anchors the first atom") {
  TeacherConfig cfg = tiny_config();
  diff::ParamStore store;
  Rng init(30);
  Rng data_rng(31);
  Matrix mean = randn(2, cfg.n_joints, data_rng, 0.1);
  init_teacher_params(store, cfg, mean, init);
  const Matrix& dict = store.at("teacher.dict.B").data();
  CHECK((dict.row(0) - mean.row(0)).cwiseAbs().maxCoeff() == 0.0);
  CHECK((dict.row(1) - mean.row(1)).cwiseAbs().maxCoeff() == 0.0);
  CHECK(dict.row(2).cwiseAbs().maxCoeff() == 0.0);
}

}  // TEST_SUITE

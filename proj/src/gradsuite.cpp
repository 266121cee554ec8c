// Copyright (c) 2026 The poselift Authors
// SPDX-License-Identifier: Apache-2.0
#include "poselift/gradsuite.hpp"

#include <cmath>

#include "poselift/diff.hpp"
#include "poselift/losses.hpp"
#include "poselift/rng.hpp"
#include "poselift/skeleton.hpp"
#include "poselift/student.hpp"
#include "poselift/teacher.hpp"

namespace poselift {

namespace {

using diff::Matrix;
using diff::Value;

Matrix randn(Eigen::Index r, Eigen::Index c, Rng& rng, double scale = 1.0) {
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = scale * rng.normal();
  return m;
}

// Keeps entries away from the ReLU kink so central differences stay valid.
Matrix randn_off_kink(Eigen::Index r, Eigen::Index c, Rng& rng) {
  Matrix m = randn(r, c, rng);
  for (Eigen::Index i = 0; i < m.size(); ++i)
    m(i) += m(i) >= 0.0 ? 0.1 : -0.1;
  return m;
}

SkeletonGraph chain_skeleton(int n) {
  std::vector<std::pair<int, int>> edges;
  for (int i = 1; i < n; ++i) edges.emplace_back(i - 1, i);
  return SkeletonGraph::build(n, 0, edges);
}

GradCase run_case(const std::string& name, double tolerance,
                  const std::function<double(uint64_t)>& worst_for_seed) {
  GradCase result;
  result.name = name;
  for (uint64_t seed = 1; seed <= 5; ++seed)
    result.max_rel_err = std::max(result.max_rel_err, worst_for_seed(seed));
  result.pass = result.max_rel_err < tolerance;
  return result;
}

double check_linear(uint64_t seed) {
  Rng rng(seed * 97 + 11);
  int d_out = 1 + static_cast<int>(rng.below(5));
  int d_in = 1 + static_cast<int>(rng.below(5));
  int cols = 1 + static_cast<int>(rng.below(4));
  diff::ParamStore store;
  Value w = store.create("W", randn(d_out, d_in, rng));
  Value x = store.create("x", randn(d_in, cols, rng));
  Value b = store.create("b", randn(d_out, 1, rng));
  Matrix probe = randn(d_out, cols, rng);
  auto fn = [&]() {
    return diff::sum(diff::hadamard(diff::linear(w, x, b),
                                    Value::constant(probe)));
  };
  return diff::finite_difference_check(fn, store).worst;
}

double check_relu(uint64_t seed) {
  Rng rng(seed * 131 + 7);
  int r = 1 + static_cast<int>(rng.below(5));
  int c = 1 + static_cast<int>(rng.below(5));
  diff::ParamStore store;
  Value x = store.create("x", randn_off_kink(r, c, rng));
  Matrix probe = randn(r, c, rng);
  auto fn = [&]() {
    return diff::sum(diff::hadamard(diff::relu(x), Value::constant(probe)));
  };
  return diff::finite_difference_check(fn, store).worst;
}

double check_masked_softmax(uint64_t seed) {
  Rng rng(seed * 173 + 3);
  int n = 2 + static_cast<int>(rng.below(4));
  diff::ParamStore store;
  Value x = store.create("x", randn(n, n, rng));
  Matrix mask = Matrix::Identity(n, n);  // self-loops keep columns non-empty
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (rng.uniform() < 0.5) mask(i, j) = 1.0;
  Matrix probe = randn(n, n, rng);
  auto fn = [&]() {
    return diff::sum(diff::hadamard(diff::masked_column_softmax(x, mask),
                                    Value::constant(probe)));
  };
  return diff::finite_difference_check(fn, store).worst;
}

double check_student_branch(uint64_t seed, GraphVariant variant) {
  Rng rng(seed * 211 + 5);
  int n = 2 + static_cast<int>(rng.below(4));
  StudentConfig cfg;
  cfg.n_joints = n;
  cfg.width = 2 + static_cast<int>(rng.below(3));
  cfg.blocks = 1 + static_cast<int>(rng.below(2));
  cfg.variant = variant;
  cfg.input_scale = 1.0;
  SkeletonGraph graph = chain_skeleton(n);
  diff::ParamStore store;
  Rng init_rng(seed * 977 + 13);
  init_student_params(store, cfg, init_rng);
  int batch = 1 + static_cast<int>(rng.below(2));
  Matrix x = randn(2, n * batch, rng, 0.3);
  Matrix probe = randn(1, n * batch, rng);
  auto fn = [&, x, probe]() {
    Value d = student_forward_batch(Value::constant(x), store, cfg, graph);
    return diff::sum(diff::hadamard(d, Value::constant(probe)));
  };
  return diff::finite_difference_check(fn, store).worst;
}

double check_rotation_head(uint64_t seed) {
  Rng rng(seed * 313 + 17);
  int batch = 1 + static_cast<int>(rng.below(4));
  diff::ParamStore store;
  Value p = store.create("p", randn(6, batch, rng));
  Matrix probe = randn(9, batch, rng);
  auto fn = [&]() {
    return diff::sum(diff::hadamard(diff::gram_schmidt_batch(p),
                                    Value::constant(probe)));
  };
  return diff::finite_difference_check(fn, store).worst;
}

double check_projection(uint64_t seed) {
  Rng rng(seed * 419 + 29);
  int cols = 2 + static_cast<int>(rng.below(8));
  diff::ParamStore store;
  Value y = store.create("y", randn(3, cols, rng, 0.4));
  Matrix probe = randn(2, cols, rng);
  auto fn = [&]() {
    return diff::sum(diff::hadamard(diff::project_blocks(y, 5.0),
                                    Value::constant(probe)));
  };
  return diff::finite_difference_check(fn, store).worst;
}

struct TinyTeacher {
  TeacherConfig cfg;
  diff::ParamStore store;
  Matrix x;
};

TinyTeacher make_tiny_teacher(uint64_t seed) {
  Rng rng(seed * 523 + 41);
  TinyTeacher t;
  t.cfg.n_joints = 2 + static_cast<int>(rng.below(3));
  t.cfg.dictionary_size = 2 + static_cast<int>(rng.below(2));
  t.cfg.blocks = 1;
  t.cfg.width = 5 + static_cast<int>(rng.below(4));
  t.cfg.bottleneck = 3 + static_cast<int>(rng.below(2));
  t.cfg.input_scale = 1.0;
  Matrix mean = randn(2, t.cfg.n_joints, rng, 0.2);
  Rng init_rng(seed * 601 + 43);
  init_teacher_params(t.store, t.cfg, mean, init_rng);
  int batch = 1 + static_cast<int>(rng.below(2));
  t.x = randn(2, t.cfg.n_joints * batch, rng, 0.1);
  return t;
}

double check_reprojection_loss(uint64_t seed) {
  TinyTeacher t = make_tiny_teacher(seed);
  CameraModel cam;
  auto fn = [&]() {
    TeacherForward fwd =
        teacher_forward_batch(Value::constant(t.x), t.store, t.cfg);
    return reprojection_loss_graph(fwd, Value::constant(t.x), t.cfg.n_joints,
                                   cam);
  };
  return diff::finite_difference_check(fn, t.store).worst;
}

double check_ric_loss(uint64_t seed) {
  TinyTeacher t = make_tiny_teacher(seed);
  CameraModel cam;
  Rng rot_rng(seed * 733 + 47);
  int batch = static_cast<int>(t.x.cols()) / t.cfg.n_joints;
  Matrix r9(9, batch);
  for (int b = 0; b < batch; ++b) {
    RotationMatrix r =
        sample_random_rotation(rot_rng, RotationMode::kSo3Uniform, 0, 0);
    Eigen::Map<Eigen::Matrix3d>(r9.col(b).data()) = r.matrix();
  }
  auto fn = [&]() {
    TeacherForward fwd =
        teacher_forward_batch(Value::constant(t.x), t.store, t.cfg);
    return ric_loss_graph(t.store, t.cfg, fwd, r9, cam);
  };
  return diff::finite_difference_check(fn, t.store).worst;
}

struct TinyStudent {
  StudentConfig cfg;
  SkeletonGraph graph;
  diff::ParamStore store;
  Matrix x;
};

TinyStudent make_tiny_student(uint64_t seed) {
  Rng rng(seed * 827 + 53);
  TinyStudent s;
  s.cfg.n_joints = 2 + static_cast<int>(rng.below(3));
  s.cfg.width = 2 + static_cast<int>(rng.below(3));
  s.cfg.blocks = 2;
  s.cfg.input_scale = 1.0;
  s.graph = chain_skeleton(s.cfg.n_joints);
  Rng init_rng(seed * 907 + 59);
  init_student_params(s.store, s.cfg, init_rng);
  int batch = 1 + static_cast<int>(rng.below(2));
  s.x = randn(2, s.cfg.n_joints * batch, rng, 0.1);
  return s;
}

double check_kd_loss(uint64_t seed) {
  TinyStudent s = make_tiny_student(seed);
  Rng rng(seed * 1009 + 61);
  Matrix target = randn(1, s.x.cols(), rng, 0.3);
  auto fn = [&]() {
    Value d = student_forward_batch(Value::constant(s.x), s.store, s.cfg,
                                    s.graph);
    return kd_loss_graph(d, target, s.cfg.n_joints);
  };
  return diff::finite_difference_check(fn, s.store).worst;
}

double check_rec_loss(uint64_t seed) {
  TinyStudent s = make_tiny_student(seed);
  CameraModel cam;
  Rng rot_rng(seed * 1103 + 67);
  int batch = static_cast<int>(s.x.cols()) / s.cfg.n_joints;
  Matrix r9(9, batch);
  for (int b = 0; b < batch; ++b) {
    RotationMatrix r =
        sample_random_rotation(rot_rng, RotationMode::kSo3Uniform, 0, 0);
    Eigen::Map<Eigen::Matrix3d>(r9.col(b).data()) = r.matrix();
  }
  auto fn = [&]() {
    Value xv = Value::constant(s.x);
    Value d = student_forward_batch(xv, s.store, s.cfg, s.graph);
    Value pose = diff::lift_blocks(xv, d, cam.distance);
    return rec_loss_graph(s.store, s.cfg, s.graph, pose, r9, cam);
  };
  return diff::finite_difference_check(fn, s.store).worst;
}

}  // namespace

std::vector<GradCase> run_gradient_suite(double tolerance) {
  std::vector<GradCase> cases;
  cases.push_back(run_case("linear", tolerance, check_linear));
  cases.push_back(run_case("relu", tolerance, check_relu));
  cases.push_back(
      run_case("masked_column_softmax", tolerance, check_masked_softmax));
  cases.push_back(run_case("physical_graph_conv", tolerance, [](uint64_t s) {
    return check_student_branch(s, GraphVariant::kPhysicalOnly);
  }));
  cases.push_back(
      run_case("nonphysical_graph_conv", tolerance, [](uint64_t s) {
        return check_student_branch(s, GraphVariant::kNonphysicalOnly);
      }));
  cases.push_back(
      run_case("rotation_from_params", tolerance, check_rotation_head));
  cases.push_back(run_case("projection", tolerance, check_projection));
  cases.push_back(
      run_case("reprojection_loss", tolerance, check_reprojection_loss));
  cases.push_back(run_case("ric_loss", tolerance, check_ric_loss));
  cases.push_back(run_case("kd_loss", tolerance, check_kd_loss));
  cases.push_back(run_case("rec_loss", tolerance, check_rec_loss));
  return cases;
}

}  // namespace poselift

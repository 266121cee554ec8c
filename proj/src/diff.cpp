// Copyright (c) 2026 The poselift Authors
// SPDX-License-Identifier: Apache-2.0
#include "poselift/diff.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "poselift/jsonio.hpp"

namespace poselift::diff {

namespace {

Value make_node(Matrix data, std::vector<std::shared_ptr<Node>> parents,
                std::function<void(Node&)> backprop) {
  auto n = std::make_shared<Node>();
  n->data = std::move(data);
  n->parents = std::move(parents);
  bool needs = false;
  for (const auto& p : n->parents) needs = needs || p->requires_grad;
  n->requires_grad = needs;
  if (needs) n->backprop = std::move(backprop);
  return Value(std::move(n));
}

void check(bool cond, const char* what) {
  if (!cond) throw ValidationError(what);
}

void check_finite(const Matrix& m, const char* what) {
  if (!m.allFinite()) throw NumericError(what);
}

}  // namespace

Value Value::leaf(Matrix m) {
  auto n = std::make_shared<Node>();
  n->data = std::move(m);
  n->requires_grad = true;
  return Value(std::move(n));
}

Value Value::constant(Matrix m) {
  auto n = std::make_shared<Node>();
  n->data = std::move(m);
  n->requires_grad = false;
  return Value(std::move(n));
}

const Matrix& Value::grad() const { return node_->grad_ref(); }

void Value::zero_grad() { node_->grad_ref().setZero(); }

Value add(const Value& a, const Value& b) {
  check(a.rows() == b.rows() && a.cols() == b.cols(), "add: shape mismatch");
  return make_node(a.data() + b.data(), {a.node(), b.node()}, [](Node& self) {
    if (self.parents[0]->requires_grad) self.parents[0]->grad_ref() += self.grad;
    if (self.parents[1]->requires_grad) self.parents[1]->grad_ref() += self.grad;
  });
}

Value sub(const Value& a, const Value& b) {
  check(a.rows() == b.rows() && a.cols() == b.cols(), "sub: shape mismatch");
  return make_node(a.data() - b.data(), {a.node(), b.node()}, [](Node& self) {
    if (self.parents[0]->requires_grad) self.parents[0]->grad_ref() += self.grad;
    if (self.parents[1]->requires_grad) self.parents[1]->grad_ref() -= self.grad;
  });
}

Value hadamard(const Value& a, const Value& b) {
  check(a.rows() == b.rows() && a.cols() == b.cols(),
        "hadamard: shape mismatch");
  return make_node(a.data().cwiseProduct(b.data()), {a.node(), b.node()},
                   [](Node& self) {
                     auto& pa = *self.parents[0];
                     auto& pb = *self.parents[1];
                     if (pa.requires_grad)
                       pa.grad_ref() += self.grad.cwiseProduct(pb.data);
                     if (pb.requires_grad)
                       pb.grad_ref() += self.grad.cwiseProduct(pa.data);
                   });
}

Value matmul(const Value& a, const Value& b) {
  check(a.cols() == b.rows(), "matmul: inner dimension mismatch");
  return make_node(a.data() * b.data(), {a.node(), b.node()}, [](Node& self) {
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    if (pa.requires_grad) pa.grad_ref().noalias() += self.grad * pb.data.transpose();
    if (pb.requires_grad) pb.grad_ref().noalias() += pa.data.transpose() * self.grad;
  });
}

Value transpose(const Value& a) {
  return make_node(a.data().transpose(), {a.node()}, [](Node& self) {
    self.parents[0]->grad_ref() += self.grad.transpose();
  });
}

Value relu(const Value& a) {
  return make_node(a.data().cwiseMax(0.0), {a.node()}, [](Node& self) {
    auto& pa = *self.parents[0];
    pa.grad_ref().array() +=
        self.grad.array() * (pa.data.array() > 0.0).cast<double>();
  });
}

Value scale(const Value& a, double k) {
  return make_node(a.data() * k, {a.node()}, [k](Node& self) {
    self.parents[0]->grad_ref() += k * self.grad;
  });
}

Value add_const(const Value& a, double k) {
  return make_node(a.data().array() + k, {a.node()}, [](Node& self) {
    self.parents[0]->grad_ref() += self.grad;
  });
}

Value pow_elem(const Value& a, double p) {
  return make_node(a.data().array().pow(p), {a.node()}, [p](Node& self) {
    auto& pa = *self.parents[0];
    pa.grad_ref().array() +=
        self.grad.array() * p * pa.data.array().pow(p - 1.0);
  });
}

Value sum(const Value& a) {
  Matrix out(1, 1);
  out(0, 0) = a.data().sum();
  return make_node(std::move(out), {a.node()}, [](Node& self) {
    self.parents[0]->grad_ref().array() += self.grad(0, 0);
  });
}

Value sum_squares(const Value& a) {
  Matrix out(1, 1);
  out(0, 0) = a.data().squaredNorm();
  return make_node(std::move(out), {a.node()}, [](Node& self) {
    self.parents[0]->grad_ref() += (2.0 * self.grad(0, 0)) * self.parents[0]->data;
  });
}

Value mul_scalar(const Value& a, const Value& s) {
  check(s.rows() == 1 && s.cols() == 1, "mul_scalar: scalar must be 1x1");
  return make_node(a.data() * s.data()(0, 0), {a.node(), s.node()},
                   [](Node& self) {
                     auto& pa = *self.parents[0];
                     auto& ps = *self.parents[1];
                     if (pa.requires_grad)
                       pa.grad_ref() += self.grad * ps.data(0, 0);
                     if (ps.requires_grad)
                       ps.grad_ref()(0, 0) +=
                           self.grad.cwiseProduct(pa.data).sum();
                   });
}

Value add_colvec(const Value& a, const Value& b) {
  check(b.cols() == 1 && b.rows() == a.rows(),
        "add_colvec: bias must be a column matching rows");
  return make_node(a.data().colwise() + Eigen::VectorXd(b.data().col(0)),
                   {a.node(), b.node()}, [](Node& self) {
                     if (self.parents[0]->requires_grad)
                       self.parents[0]->grad_ref() += self.grad;
                     if (self.parents[1]->requires_grad)
                       self.parents[1]->grad_ref() += self.grad.rowwise().sum();
                   });
}

Value linear(const Value& w, const Value& x, const Value& b) {
  return add_colvec(matmul(w, x), b);
}

Value slice_rows(const Value& a, int row_begin, int row_end) {
  check(row_begin >= 0 && row_end <= a.rows() && row_begin < row_end,
        "slice_rows: bad range");
  int n = row_end - row_begin;
  return make_node(a.data().middleRows(row_begin, n), {a.node()},
                   [row_begin, n](Node& self) {
                     self.parents[0]->grad_ref().middleRows(row_begin, n) +=
                         self.grad;
                   });
}

Value concat_rows(const std::vector<Value>& parts) {
  check(!parts.empty(), "concat_rows: no parts");
  Eigen::Index cols = parts[0].cols();
  Eigen::Index rows = 0;
  std::vector<std::shared_ptr<Node>> parents;
  for (const auto& p : parts) {
    check(p.cols() == cols, "concat_rows: column mismatch");
    rows += p.rows();
    parents.push_back(p.node());
  }
  Matrix out(rows, cols);
  Eigen::Index r = 0;
  for (const auto& p : parts) {
    out.middleRows(r, p.rows()) = p.data();
    r += p.rows();
  }
  return make_node(std::move(out), std::move(parents), [](Node& self) {
    Eigen::Index r = 0;
    for (auto& p : self.parents) {
      if (p->requires_grad)
        p->grad_ref() += self.grad.middleRows(r, p->data.rows());
      r += p->data.rows();
    }
  });
}

Value cross3(const Value& a, const Value& b) {
  check(a.rows() == 3 && a.cols() == 1 && b.rows() == 3 && b.cols() == 1,
        "cross3: arguments must be 3x1");
  Eigen::Vector3d av = a.data(), bv = b.data();
  Matrix out = av.cross(bv);
  return make_node(std::move(out), {a.node(), b.node()}, [](Node& self) {
    Eigen::Vector3d av = self.parents[0]->data, bv = self.parents[1]->data;
    Eigen::Vector3d g = self.grad;
    if (self.parents[0]->requires_grad)
      self.parents[0]->grad_ref() += bv.cross(g);
    if (self.parents[1]->requires_grad)
      self.parents[1]->grad_ref() += g.cross(av);
  });
}

namespace {

// Shared softmax forward; mask==nullptr means full support.
Matrix softmax_columns(const Matrix& x, const Matrix* mask) {
  Matrix out(x.rows(), x.cols());
  Eigen::Index mask_cols = mask ? mask->cols() : 0;
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    double mx = -std::numeric_limits<double>::infinity();
    Eigen::Index mj = mask ? (j % mask_cols) : 0;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      bool allowed = !mask || (*mask)(i, mj) != 0.0;
      if (allowed) mx = std::max(mx, x(i, j));
    }
    if (!std::isfinite(mx)) throw ValidationError("isolated joint");
    double denom = 0.0;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      bool allowed = !mask || (*mask)(i, mj) != 0.0;
      double e = allowed ? std::exp(x(i, j) - mx) : 0.0;
      out(i, j) = e;
      denom += e;
    }
    out.col(j) /= denom;
  }
  return out;
}

// Column-wise softmax backward: gx = s .* (g - sum(s .* g)) per column. Masked
// entries carry s == 0 and therefore receive zero gradient automatically.
void softmax_backward(const Matrix& s, const Matrix& g, Matrix& gx_accum) {
  for (Eigen::Index j = 0; j < s.cols(); ++j) {
    double dot = s.col(j).dot(g.col(j));
    gx_accum.col(j).array() +=
        s.col(j).array() * (g.col(j).array() - dot);
  }
}

}  // namespace

Value masked_column_softmax(const Value& x, const Eigen::MatrixXd& mask) {
  check(mask.rows() == x.rows(), "masked_column_softmax: mask row mismatch");
  check(mask.cols() > 0 && x.cols() % mask.cols() == 0,
        "masked_column_softmax: mask does not tile input columns");
  Matrix s = softmax_columns(x.data(), &mask);
  return make_node(s, {x.node()}, [](Node& self) {
    softmax_backward(self.data, self.grad, self.parents[0]->grad_ref());
  });
}

Value column_softmax(const Value& x) {
  Matrix s = softmax_columns(x.data(), nullptr);
  return make_node(s, {x.node()}, [](Node& self) {
    softmax_backward(self.data, self.grad, self.parents[0]->grad_ref());
  });
}

Value stack_blocks(const Value& a, int block_cols) {
  check(block_cols > 0 && a.cols() % block_cols == 0,
        "stack_blocks: columns not divisible by block width");
  Eigen::Index r = a.rows();
  Eigen::Index blocks = a.cols() / block_cols;
  Matrix out(r * block_cols, blocks);
  for (Eigen::Index b = 0; b < blocks; ++b)
    for (int j = 0; j < block_cols; ++j)
      out.col(b).segment(j * r, r) = a.data().col(b * block_cols + j);
  return make_node(std::move(out), {a.node()}, [r, block_cols](Node& self) {
    auto& g = self.parents[0]->grad_ref();
    Eigen::Index blocks = self.data.cols();
    for (Eigen::Index b = 0; b < blocks; ++b)
      for (int j = 0; j < block_cols; ++j)
        g.col(b * block_cols + j) += self.grad.col(b).segment(j * r, r);
  });
}

Value rotate_blocks(const Value& rot9, const Value& y, int n_joints) {
  check(rot9.rows() == 9, "rotate_blocks: rotations must be 9xB");
  check(y.rows() == 3 && y.cols() == rot9.cols() * n_joints,
        "rotate_blocks: pose/rotation batch mismatch");
  Eigen::Index batch = rot9.cols();
  Matrix out(3, y.cols());
  for (Eigen::Index b = 0; b < batch; ++b) {
    Eigen::Map<const Eigen::Matrix3d> r(rot9.data().col(b).data());
    out.middleCols(b * n_joints, n_joints).noalias() =
        r * y.data().middleCols(b * n_joints, n_joints);
  }
  return make_node(std::move(out), {rot9.node(), y.node()},
                   [n_joints](Node& self) {
                     auto& pr = *self.parents[0];
                     auto& py = *self.parents[1];
                     Eigen::Index batch = pr.data.cols();
                     for (Eigen::Index b = 0; b < batch; ++b) {
                       Eigen::Map<const Eigen::Matrix3d> r(
                           pr.data.col(b).data());
                       auto gb = self.grad.middleCols(b * n_joints, n_joints);
                       auto yb = py.data.middleCols(b * n_joints, n_joints);
                       if (pr.requires_grad) {
                         Eigen::Matrix3d gr = gb * yb.transpose();
                         Eigen::Map<Eigen::Matrix3d>(
                             pr.grad_ref().col(b).data()) += gr;
                       }
                       if (py.requires_grad)
                         py.grad_ref().middleCols(b * n_joints, n_joints)
                             .noalias() += r.transpose() * gb;
                     }
                   });
}

Value project_blocks(const Value& y, double camera_distance,
                     long* clamp_counter) {
  check(y.rows() == 3, "project_blocks: pose must be 3xM");
  check_finite(y.data(), "non-finite pose");
  Eigen::Index m = y.cols();
  Matrix out(2, m);
  for (Eigen::Index j = 0; j < m; ++j) {
    double z = y.data()(2, j) + camera_distance;
    if (z < 1.0) {
      z = 1.0;
      if (clamp_counter) ++*clamp_counter;
    }
    out(0, j) = y.data()(0, j) / z;
    out(1, j) = y.data()(1, j) / z;
  }
  double t = camera_distance;
  return make_node(std::move(out), {y.node()}, [t](Node& self) {
    auto& py = *self.parents[0];
    auto& g = py.grad_ref();
    for (Eigen::Index j = 0; j < self.data.cols(); ++j) {
      double zraw = py.data(2, j) + t;
      double z = std::max(1.0, zraw);
      double g0 = self.grad(0, j), g1 = self.grad(1, j);
      g(0, j) += g0 / z;
      g(1, j) += g1 / z;
      if (zraw > 1.0)
        g(2, j) -= (py.data(0, j) * g0 + py.data(1, j) * g1) / (z * z);
    }
  });
}

Value lift_blocks(const Value& x2, const Value& depth, double camera_distance,
                  long* clamp_counter) {
  check(x2.rows() == 2 && depth.rows() == 1 && x2.cols() == depth.cols(),
        "lift_blocks: bad shapes");
  check_finite(x2.data(), "non-finite pose");
  Eigen::Index m = x2.cols();
  Matrix out(3, m);
  for (Eigen::Index j = 0; j < m; ++j) {
    double zraw = camera_distance + depth.data()(0, j);
    double z = zraw;
    if (z < 1.0) {
      z = 1.0;
      if (clamp_counter) ++*clamp_counter;
    }
    out(0, j) = x2.data()(0, j) * z;
    out(1, j) = x2.data()(1, j) * z;
    out(2, j) = z - camera_distance;
  }
  double t = camera_distance;
  return make_node(std::move(out), {x2.node(), depth.node()}, [t](Node& self) {
    auto& px = *self.parents[0];
    auto& pd = *self.parents[1];
    for (Eigen::Index j = 0; j < self.data.cols(); ++j) {
      double zraw = t + pd.data(0, j);
      double z = std::max(1.0, zraw);
      double g0 = self.grad(0, j), g1 = self.grad(1, j), g2 = self.grad(2, j);
      if (px.requires_grad) {
        px.grad_ref()(0, j) += g0 * z;
        px.grad_ref()(1, j) += g1 * z;
      }
      if (pd.requires_grad && zraw > 1.0)
        pd.grad_ref()(0, j) +=
            g0 * px.data(0, j) + g1 * px.data(1, j) + g2;
    }
  });
}

Value gram_schmidt_batch(const Value& p6) {
  check(p6.rows() == 6, "gram_schmidt_batch: input must be 6xB");
  check_finite(p6.data(), "non-finite rotation parameters");
  Eigen::Index batch = p6.cols();
  Matrix out(9, batch);
  for (Eigen::Index b = 0; b < batch; ++b) {
    Eigen::Vector3d a = p6.data().col(b).head<3>();
    Eigen::Vector3d c = p6.data().col(b).tail<3>();
    double r1 = a.norm();
    if (r1 < 1e-8) throw ValidationError("degenerate rotation parameters");
    Eigen::Vector3d b1 = a / r1;
    Eigen::Vector3d u = c - b1.dot(c) * b1;
    double r2 = u.norm();
    if (r2 < 1e-8) throw ValidationError("degenerate rotation parameters");
    Eigen::Vector3d b2 = u / r2;
    Eigen::Vector3d b3 = b1.cross(b2);
    out.col(b).segment<3>(0) = b1;
    out.col(b).segment<3>(3) = b2;
    out.col(b).segment<3>(6) = b3;
  }
  return make_node(std::move(out), {p6.node()}, [](Node& self) {
    auto& pp = *self.parents[0];
    auto& gp = pp.grad_ref();
    for (Eigen::Index b = 0; b < self.data.cols(); ++b) {
      Eigen::Vector3d a = pp.data.col(b).head<3>();
      Eigen::Vector3d c = pp.data.col(b).tail<3>();
      double r1 = a.norm();
      Eigen::Vector3d b1 = a / r1;
      double s = b1.dot(c);
      Eigen::Vector3d u = c - s * b1;
      double r2 = u.norm();
      Eigen::Vector3d b2 = u / r2;
      Eigen::Vector3d gb1 = self.grad.col(b).segment<3>(0);
      Eigen::Vector3d gb2 = self.grad.col(b).segment<3>(3);
      Eigen::Vector3d gb3 = self.grad.col(b).segment<3>(6);
      // b3 = b1 x b2
      gb1 += b2.cross(gb3);
      gb2 += gb3.cross(b1);
      // b2 = u / r2
      Eigen::Vector3d gu = (gb2 - b2.dot(gb2) * b2) / r2;
      // u = c - (b1.c) b1
      Eigen::Vector3d gc = gu - b1.dot(gu) * b1;
      gb1 += -c * (b1.dot(gu)) - s * gu;
      // b1 = a / r1
      Eigen::Vector3d ga = (gb1 - b1.dot(gb1) * b1) / r1;
      gp.col(b).head<3>() += ga;
      gp.col(b).tail<3>() += gc;
    }
  });
}

Value center_root_blocks(const Value& a, int n_joints, int root_index) {
  check(n_joints > 0 && a.cols() % n_joints == 0,
        "center_root_blocks: columns not divisible by joint count");
  check(root_index >= 0 && root_index < n_joints,
        "center_root_blocks: root index out of range");
  Eigen::Index blocks = a.cols() / n_joints;
  Matrix out(a.rows(), a.cols());
  for (Eigen::Index b = 0; b < blocks; ++b) {
    auto block = a.data().middleCols(b * n_joints, n_joints);
    out.middleCols(b * n_joints, n_joints) =
        block.colwise() - Eigen::VectorXd(block.col(root_index));
  }
  return make_node(std::move(out), {a.node()},
                   [n_joints, root_index](Node& self) {
                     auto& g = self.parents[0]->grad_ref();
                     Eigen::Index blocks = self.data.cols() / n_joints;
                     for (Eigen::Index b = 0; b < blocks; ++b) {
                       auto gb = self.grad.middleCols(b * n_joints, n_joints);
                       g.middleCols(b * n_joints, n_joints) += gb;
                       g.col(b * n_joints + root_index) -= gb.rowwise().sum();
                     }
                   });
}

Value dict_combine(const Value& dict, const Value& coeffs, int n_joints) {
  check(dict.rows() % 3 == 0, "dict_combine: dictionary rows must be 3K");
  check(dict.cols() == n_joints, "dict_combine: dictionary joint mismatch");
  Eigen::Index k = dict.rows() / 3;
  check(coeffs.rows() == k, "dict_combine: coefficient count mismatch");
  Eigen::Index batch = coeffs.cols();
  Matrix out = Matrix::Zero(3, n_joints * batch);
  for (Eigen::Index b = 0; b < batch; ++b) {
    auto ob = out.middleCols(b * n_joints, n_joints);
    for (Eigen::Index atom = 0; atom < k; ++atom)
      ob.noalias() += coeffs.data()(atom, b) * dict.data().middleRows(3 * atom, 3);
  }
  return make_node(std::move(out), {dict.node(), coeffs.node()},
                   [n_joints](Node& self) {
                     auto& pd = *self.parents[0];
                     auto& pc = *self.parents[1];
                     Eigen::Index k = pd.data.rows() / 3;
                     Eigen::Index batch = pc.data.cols();
                     for (Eigen::Index b = 0; b < batch; ++b) {
                       auto gb = self.grad.middleCols(b * n_joints, n_joints);
                       for (Eigen::Index atom = 0; atom < k; ++atom) {
                         auto atom_rows = pd.data.middleRows(3 * atom, 3);
                         if (pc.requires_grad)
                           pc.grad_ref()(atom, b) +=
                               gb.cwiseProduct(atom_rows).sum();
                         if (pd.requires_grad)
                           pd.grad_ref().middleRows(3 * atom, 3).noalias() +=
                               pc.data(atom, b) * gb;
                       }
                     }
                   });
}

Value edge_mix(const Value& p, const Value& softmaxed_edges, int n_joints) {
  Eigen::Index channels = p.rows();
  check(softmaxed_edges.rows() == n_joints &&
            softmaxed_edges.cols() == n_joints * channels,
        "edge_mix: edge matrix stack must be N x N*channels");
  check(p.cols() % n_joints == 0, "edge_mix: feature columns not in blocks");
  Eigen::Index batch = p.cols() / n_joints;
  Matrix out(channels, p.cols());
  for (Eigen::Index d = 0; d < channels; ++d) {
    auto sd = softmaxed_edges.data().middleCols(d * n_joints, n_joints);
    for (Eigen::Index b = 0; b < batch; ++b) {
      out.row(d).segment(b * n_joints, n_joints).noalias() =
          p.data().row(d).segment(b * n_joints, n_joints) * sd;
    }
  }
  return make_node(std::move(out), {p.node(), softmaxed_edges.node()},
                   [n_joints](Node& self) {
                     auto& pp = *self.parents[0];
                     auto& ps = *self.parents[1];
                     Eigen::Index channels = pp.data.rows();
                     Eigen::Index batch = pp.data.cols() / n_joints;
                     for (Eigen::Index d = 0; d < channels; ++d) {
                       auto sd = ps.data.middleCols(d * n_joints, n_joints);
                       for (Eigen::Index b = 0; b < batch; ++b) {
                         auto grow =
                             self.grad.row(d).segment(b * n_joints, n_joints);
                         auto prow =
                             pp.data.row(d).segment(b * n_joints, n_joints);
                         if (pp.requires_grad)
                           pp.grad_ref()
                               .row(d)
                               .segment(b * n_joints, n_joints)
                               .noalias() += grow * sd.transpose();
                         if (ps.requires_grad)
                           ps.grad_ref()
                               .middleCols(d * n_joints, n_joints)
                               .noalias() += prow.transpose() * grow;
                       }
                     }
                   });
}

Value block_attention(const Value& q, const Value& k, const Value& v,
                      int n_joints, Eigen::MatrixXd* attention_out) {
  check(q.cols() == k.cols() && q.cols() == v.cols(),
        "block_attention: column mismatch");
  check(q.rows() == k.rows(), "block_attention: q/k feature mismatch");
  check(q.cols() % n_joints == 0, "block_attention: columns not in blocks");
  Eigen::Index batch = q.cols() / n_joints;
  Matrix softmaxes(n_joints, n_joints * batch);
  Matrix out(v.rows(), v.cols());
  for (Eigen::Index b = 0; b < batch; ++b) {
    auto qb = q.data().middleCols(b * n_joints, n_joints);
    auto kb = k.data().middleCols(b * n_joints, n_joints);
    Matrix logits = qb.transpose() * kb;
    Matrix s = softmax_columns(logits, nullptr);
    softmaxes.middleCols(b * n_joints, n_joints) = s;
    out.middleCols(b * n_joints, n_joints).noalias() =
        v.data().middleCols(b * n_joints, n_joints) * s;
  }
  if (attention_out) *attention_out = softmaxes;
  auto cached = std::make_shared<Matrix>(std::move(softmaxes));
  return make_node(
      std::move(out), {q.node(), k.node(), v.node()},
      [n_joints, cached](Node& self) {
        auto& pq = *self.parents[0];
        auto& pk = *self.parents[1];
        auto& pv = *self.parents[2];
        Eigen::Index batch = pq.data.cols() / n_joints;
        for (Eigen::Index b = 0; b < batch; ++b) {
          auto s = cached->middleCols(b * n_joints, n_joints);
          auto gb = self.grad.middleCols(b * n_joints, n_joints);
          auto vb = pv.data.middleCols(b * n_joints, n_joints);
          if (pv.requires_grad)
            pv.grad_ref().middleCols(b * n_joints, n_joints).noalias() +=
                gb * s.transpose();
          Matrix gs = vb.transpose() * gb;
          Matrix gl = Matrix::Zero(n_joints, n_joints);
          softmax_backward(s, gs, gl);
          auto qb = pq.data.middleCols(b * n_joints, n_joints);
          auto kb = pk.data.middleCols(b * n_joints, n_joints);
          if (pq.requires_grad)
            pq.grad_ref().middleCols(b * n_joints, n_joints).noalias() +=
                kb * gl.transpose();
          if (pk.requires_grad)
            pk.grad_ref().middleCols(b * n_joints, n_joints).noalias() +=
                qb * gl;
        }
      });
}

void backward(const Value& root) {
  check(root.valid(), "backward: invalid root");
  check(root.rows() == 1 && root.cols() == 1, "backward: root must be scalar");
  if (!root.requires_grad()) return;

  // Iterative post-order DFS over gradient-requiring nodes.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, size_t>> stack;
  stack.emplace_back(root.node().get(), 0);
  visited.insert(root.node().get());
  while (!stack.empty()) {
    auto& [node, idx] = stack.back();
    if (idx < node->parents.size()) {
      Node* parent = node->parents[idx++].get();
      if (parent->requires_grad && !visited.count(parent)) {
        visited.insert(parent);
        stack.emplace_back(parent, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  root.node()->grad_ref()(0, 0) += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backprop) n->backprop(*n);
  }
}

Value ParamStore::create(const std::string& name, Matrix init) {
  if (params_.count(name))
    throw ValidationError("duplicate parameter name: " + name);
  Value v = Value::leaf(std::move(init));
  params_.emplace(name, v);
  return v;
}

Value ParamStore::at(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end())
    throw ValidationError("unknown parameter: " + name);
  return it->second;
}

bool ParamStore::contains(const std::string& name) const {
  return params_.count(name) > 0;
}

std::vector<std::string> ParamStore::names() const {
  std::vector<std::string> out;
  out.reserve(params_.size());
  for (const auto& [name, v] : params_) out.push_back(name);
  return out;
}

void ParamStore::zero_grads() {
  for (auto& [name, v] : params_) v.zero_grad();
}

uint64_t ParamStore::data_hash() const {
  uint64_t h = 1469598103934665603ULL;
  auto feed = [&h](const void* p, size_t n) {
    const auto* bytes = static_cast<const unsigned char*>(p);
    for (size_t i = 0; i < n; ++i) {
      h ^= bytes[i];
      h *= 1099511628211ULL;
    }
  };
  for (const auto& [name, v] : params_) {
    feed(name.data(), name.size());
    const Matrix& m = v.data();
    feed(m.data(), sizeof(double) * static_cast<size_t>(m.size()));
  }
  return h;
}

void ParamStore::save(const std::string& path) const {
  std::map<std::string, Matrix> named;
  for (const auto& [name, v] : params_) named.emplace(name, v.data());
  save_named_matrices(named, path);
}

void ParamStore::load(const std::string& path) {
  auto named = load_named_matrices(path);
  params_.clear();
  for (auto& [name, m] : named) params_.emplace(name, Value::leaf(std::move(m)));
}

void SGDConfig::validate() const {
  if (!(learning_rate > 0.0))
    throw ValidationError("learning_rate must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0))
    throw ValidationError("momentum must be in [0, 1)");
}

SgdOptimizer::SgdOptimizer(SGDConfig cfg) : cfg_(cfg) { cfg_.validate(); }

void SgdOptimizer::step(ParamStore& store) {
  for (auto& [name, v] : store.entries()) {
    Value value = v;
    const Matrix& g = value.grad();
    if (!g.allFinite())
      throw NumericError("non-finite gradient for parameter '" + name + "'");
    auto it = velocity_.find(name);
    if (it == velocity_.end())
      it = velocity_.emplace(name, Matrix::Zero(g.rows(), g.cols())).first;
    it->second = cfg_.momentum * it->second + g;
    value.mutable_data() -= cfg_.learning_rate * it->second;
    value.zero_grad();
  }
}

void SgdOptimizer::set_velocity(const std::string& name, Matrix v) {
  velocity_[name] = std::move(v);
}

FdReport finite_difference_check(const std::function<Value()>& fn,
                                 ParamStore& params, double step,
                                 double tolerance) {
  params.zero_grads();
  Value root = fn();
  if (root.rows() != 1 || root.cols() != 1)
    throw ValidationError("finite_difference_check: fn must be scalar");
  backward(root);

  std::map<std::string, Matrix> analytic;
  for (const auto& [name, v] : params.entries()) analytic[name] = v.grad();

  FdReport report;
  for (auto& [name, v] : params.entries()) {
    Value value = v;
    Matrix& data = value.mutable_data();
    const Matrix& a = analytic[name];
    double worst = 0.0;
    for (Eigen::Index i = 0; i < data.size(); ++i) {
      double saved = data(i);
      data(i) = saved + step;
      double up = fn().data()(0, 0);
      data(i) = saved - step;
      double down = fn().data()(0, 0);
      data(i) = saved;
      double numeric = (up - down) / (2.0 * step);
      double denom = std::max({std::abs(a(i)), std::abs(numeric), 1e-4});
      worst = std::max(worst, std::abs(a(i) - numeric) / denom);
    }
    report.entries.push_back({name, worst});
    report.worst = std::max(report.worst, worst);
  }
  (void)tolerance;
  return report;
}

}  // namespace poselift::diff

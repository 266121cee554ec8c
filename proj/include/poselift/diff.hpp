// Copyright (c) 2026 The poselift Authors
// SPDX-License-Identifier: Apache-2.0
//
// Minimal reverse-mode differentiation over dense 64-bit matrices. Values
// form a DAG; ops are eager (data computed at construction) and record a
// backprop closure. Gradients accumulate additively across shared uses.
//
// Batch layout convention used by the pose ops: a batch of B samples with N
// joints is one matrix whose columns are grouped into B blocks of width N
// ("block layout"): 2D poses are 2x(N*B), 3D poses 3x(N*B), depth rows
// 1x(N*B), per-joint features Dx(N*B). Per-sample quantities such as
// rotation parameters use one column per sample (6xB, 9xB, KxB).
#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "poselift/error.hpp"

namespace poselift::diff {

using Matrix = Eigen::MatrixXd;

struct Node {
  Matrix data;
  Matrix grad;  // empty until first touched
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backprop;
  bool requires_grad = false;

  Matrix& grad_ref() {
    if (grad.size() == 0) grad = Matrix::Zero(data.rows(), data.cols());
    return grad;
  }
};

class Value {
 public:
  Value() = default;

  static Value leaf(Matrix m);      // trainable: participates in backward
  static Value constant(Matrix m);  // data only, no gradient

  bool valid() const { return node_ != nullptr; }
  const Matrix& data() const { return node_->data; }
  Matrix& mutable_data() { return node_->data; }
  const Matrix& grad() const;
  Matrix& mutable_grad() { return node_->grad_ref(); }
  void zero_grad();
  bool requires_grad() const { return node_->requires_grad; }
  Eigen::Index rows() const { return node_->data.rows(); }
  Eigen::Index cols() const { return node_->data.cols(); }

  /// Constant copy of the current data; cuts the graph.
  Value detached() const { return constant(node_->data); }

  std::shared_ptr<Node> node() const { return node_; }
  explicit Value(std::shared_ptr<Node> n) : node_(std::move(n)) {}

 private:
  std::shared_ptr<Node> node_;
};

// Elementwise and linear-algebra ops.
Value add(const Value& a, const Value& b);
Value sub(const Value& a, const Value& b);
Value hadamard(const Value& a, const Value& b);
Value matmul(const Value& a, const Value& b);
Value transpose(const Value& a);
Value relu(const Value& a);
Value scale(const Value& a, double k);
Value add_const(const Value& a, double k);
Value pow_elem(const Value& a, double p);
Value sum(const Value& a);          // 1x1
Value sum_squares(const Value& a);  // 1x1 squared Frobenius norm
Value mul_scalar(const Value& a, const Value& s);   // s is 1x1
Value add_colvec(const Value& a, const Value& b);   // b is rx1, broadcast
Value linear(const Value& w, const Value& x, const Value& b);  // w*x .+ b
Value slice_rows(const Value& a, int row_begin, int row_end);
Value concat_rows(const std::vector<Value>& parts);
Value cross3(const Value& a, const Value& b);  // 3x1 cross product

/// Column-wise softmax. When a mask is given, zero entries are excluded from
/// the support (treated as -inf logits, not as zero-valued logits); a column
/// with no allowed entry raises "isolated joint". The mask may be narrower
/// than x, in which case it tiles horizontally (x.cols() % mask.cols() == 0).
Value masked_column_softmax(const Value& x, const Eigen::MatrixXd& mask);
Value column_softmax(const Value& x);

// Block-layout pose ops (see header comment for the layout).

/// (r x N*B) -> (r*N x B): stacks each block's columns into one column.
Value stack_blocks(const Value& a, int block_cols);
/// Applies per-sample 3x3 rotations (columns of rot9, column-major flattened)
/// to each 3xN block.
Value rotate_blocks(const Value& rot9, const Value& y, int n_joints);
/// Perspective projection per joint: (x,y,z) -> (x,y)/max(1, z+t).
/// clamp_counter, when given, is incremented once per clamped joint.
Value project_blocks(const Value& y, double camera_distance,
                     long* clamp_counter = nullptr);
/// Inverse of projection given per-joint depth offsets d (1 x N*B):
/// z = max(1, t+d), joint = (u*z, v*z, z-t).
Value lift_blocks(const Value& x2, const Value& depth, double camera_distance,
                  long* clamp_counter = nullptr);
/// Gram-Schmidt rotation head: column p = (a;c) in R^6 maps to R = [b1 b2 b3]
/// flattened column-major into a 9-vector. Degenerate inputs (|a| or the
/// rejection of c near zero) raise "degenerate rotation parameters".
Value gram_schmidt_batch(const Value& p6);
/// Subtracts each block's root column from every column of that block.
Value center_root_blocks(const Value& a, int n_joints, int root_index);
/// Per-sample pose from dictionary: block b = sum_k coeffs(k,b) * atom_k,
/// where dict is (3K x N) with atom k at rows 3k..3k+2.
Value dict_combine(const Value& dict, const Value& coeffs, int n_joints);
/// Physical edge mixing: out(d, block b) = p(d, block b) * S_d with
/// S_d = softmaxed_edges columns [d*N, (d+1)*N).
Value edge_mix(const Value& p, const Value& softmaxed_edges, int n_joints);
/// Per-block attention: out_b = v_b * softmax_col(q_b^T k_b). When
/// attention_out is non-null the stacked softmax matrices (N x N*B) are
/// copied there.
Value block_attention(const Value& q, const Value& k, const Value& v,
                      int n_joints, Eigen::MatrixXd* attention_out = nullptr);

/// Reverse pass from a 1x1 root. Seeds the root gradient with 1 and applies
/// each node's backprop exactly once in reverse topological order.
void backward(const Value& root);

/// Named trainable parameters with deterministic iteration order.
class ParamStore {
 public:
  Value create(const std::string& name, Matrix init);
  Value at(const std::string& name) const;
  bool contains(const std::string& name) const;
  std::vector<std::string> names() const;
  size_t size() const { return params_.size(); }
  void zero_grads();

  /// FNV-1a over sorted names and raw data bytes; used to audit that frozen
  /// parameters were not touched.
  uint64_t data_hash() const;

  void save(const std::string& path) const;
  /// Replaces the whole store with the checkpoint contents.
  void load(const std::string& path);

  const std::map<std::string, Value>& entries() const { return params_; }

 private:
  std::map<std::string, Value> params_;
};

struct SGDConfig {
  double learning_rate = 0.001;
  double momentum = 0.9;
  uint64_t seed = 0;
  void validate() const;
};

/// SGD with classical momentum: v <- m*v + g, p <- p - lr*v, then g <- 0.
class SgdOptimizer {
 public:
  explicit SgdOptimizer(SGDConfig cfg);
  void step(ParamStore& store);
  const std::map<std::string, Matrix>& velocities() const { return velocity_; }
  void set_velocity(const std::string& name, Matrix v);

 private:
  SGDConfig cfg_;
  std::map<std::string, Matrix> velocity_;
};

struct FdEntry {
  std::string name;
  double max_rel_err = 0.0;
};
struct FdReport {
  std::vector<FdEntry> entries;
  double worst = 0.0;
  bool passed(double tolerance) const { return worst < tolerance; }
};

/// Compares analytic gradients of the scalar fn() against central finite
/// differences for every parameter in the store. fn must rebuild its graph
/// from the stored parameters on each call.
FdReport finite_difference_check(const std::function<Value()>& fn,
                                 ParamStore& params, double step = 1e-6,
                                 double tolerance = 1e-5);

}  // namespace poselift::diff

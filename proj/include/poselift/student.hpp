// Copyright (c) 2026 The poselift Authors
// SPDX-License-Identifier: Apache-2.0
//
// Graph-convolutional student: per-joint features flow through adaptive
// graph convolution blocks, each the sum of a physical branch (learned edge
// weights softmax-normalized over the skeleton adjacency) and a nonphysical
// branch (data-dependent all-pairs attention). The head regresses one depth
// offset per joint, re-zeroed at the root.
#pragma once

#include <Eigen/Dense>
#include <vector>

#include "poselift/diff.hpp"
#include "poselift/geometry.hpp"
#include "poselift/rng.hpp"
#include "poselift/skeleton.hpp"

namespace poselift {

enum class GraphVariant { kBoth, kPhysicalOnly, kNonphysicalOnly };
GraphVariant graph_variant_from_string(const std::string& s);
std::string to_string(GraphVariant v);

struct StudentConfig {
  int n_joints = 17;
  int width = 64;  // D = D' for every block
  int blocks = 8;
  GraphVariant variant = GraphVariant::kBoth;
  /// Softmax the elementwise product M .* A over full support instead of
  /// excluding non-edges (ablation of the edge-normalization reading).
  bool literal_eq4 = false;
  double input_scale = 10.0;
  void validate() const;
};

/// One adaptive graph convolution block, plain-matrix view. edge_logits
/// stacks the D' edge-weight matrices horizontally (N x N*D'); edge_weights
/// stacks the D' per-channel weight vectors as rows (D' x D).
struct AgcBlockParams {
  Eigen::MatrixXd edge_logits;
  Eigen::MatrixXd edge_weights;
  Eigen::MatrixXd attn_w1, attn_w2;  // D x D
  Eigen::MatrixXd g_w;               // D' x D
  Eigen::VectorXd g_b;
  Eigen::MatrixXd f1_w, f2_w;  // D' x D'
  Eigen::VectorXd f1_b, f2_b;
};

/// Physical branch: channel d = relu(w_d * H * softmax_col(mask(M_d, A))).
Eigen::MatrixXd physical_graph_conv(const Eigen::MatrixXd& h,
                                    const AgcBlockParams& p,
                                    const SkeletonGraph& graph,
                                    bool literal_eq4 = false);
/// Nonphysical branch: f(g(H) * softmax_col(H^T W1^T W2 H)).
Eigen::MatrixXd nonphysical_graph_conv(const Eigen::MatrixXd& h,
                                       const AgcBlockParams& p);
/// Sum of the two branches (or the single enabled branch).
Eigen::MatrixXd agc_layer(const Eigen::MatrixXd& h, const AgcBlockParams& p,
                          const SkeletonGraph& graph,
                          GraphVariant variant = GraphVariant::kBoth,
                          bool literal_eq4 = false);

/// Creates all "student.*" parameters.
void init_student_params(diff::ParamStore& store, const StudentConfig& cfg,
                         Rng& rng);

/// Graph-building batched forward (x: 2 x N*B) producing the depth row
/// (1 x N*B) with a zero at each block's root. When attention_out is given,
/// it collects each block's attention softmax stack.
diff::Value student_forward_batch(const diff::Value& x_blocks,
                                  diff::ParamStore& params,
                                  const StudentConfig& cfg,
                                  const SkeletonGraph& graph,
                                  std::vector<Eigen::MatrixXd>* attention_out =
                                      nullptr);

/// Single-pose depth offsets.
Eigen::VectorXd student_forward(const Pose2D& x, diff::ParamStore& params,
                                const StudentConfig& cfg,
                                const SkeletonGraph& graph);

}  // namespace poselift

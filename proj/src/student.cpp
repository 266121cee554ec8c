// Copyright (c) 2026 The poselift Authors
// SPDX-License-Identifier: Apache-2.0
#include "poselift/student.hpp"

#include <cmath>

namespace poselift {

using diff::Matrix;
using diff::Value;

GraphVariant graph_variant_from_string(const std::string& s) {
  if (s == "both") return GraphVariant::kBoth;
  if (s == "physical-only") return GraphVariant::kPhysicalOnly;
  if (s == "nonphysical-only") return GraphVariant::kNonphysicalOnly;
  throw ValidationError("unknown graph variant: " + s);
}

std::string to_string(GraphVariant v) {
  switch (v) {
    case GraphVariant::kBoth:
      return "both";
    case GraphVariant::kPhysicalOnly:
      return "physical-only";
    default:
      return "nonphysical-only";
  }
}

void StudentConfig::validate() const {
  if (n_joints <= 0 || width <= 0 || blocks <= 0)
    throw ValidationError("invalid student configuration");
}

namespace {

struct BlockValues {
  Value edge_logits, edge_weights, attn_w1, attn_w2;
  Value g_w, g_b, f1_w, f1_b, f2_w, f2_b;
};

BlockValues block_from_params(const AgcBlockParams& p) {
  BlockValues b;
  b.edge_logits = Value::constant(p.edge_logits);
  b.edge_weights = Value::constant(p.edge_weights);
  b.attn_w1 = Value::constant(p.attn_w1);
  b.attn_w2 = Value::constant(p.attn_w2);
  b.g_w = Value::constant(p.g_w);
  b.g_b = Value::constant(p.g_b);
  b.f1_w = Value::constant(p.f1_w);
  b.f1_b = Value::constant(p.f1_b);
  b.f2_w = Value::constant(p.f2_w);
  b.f2_b = Value::constant(p.f2_b);
  return b;
}

BlockValues block_from_store(diff::ParamStore& params, int index) {
  std::string prefix = "student.block" + std::to_string(index);
  BlockValues b;
  b.edge_logits = params.at(prefix + ".M");
  b.edge_weights = params.at(prefix + ".W_edge");
  b.attn_w1 = params.at(prefix + ".W1");
  b.attn_w2 = params.at(prefix + ".W2");
  b.g_w = params.at(prefix + ".g.W");
  b.g_b = params.at(prefix + ".g.b");
  b.f1_w = params.at(prefix + ".f1.W");
  b.f1_b = params.at(prefix + ".f1.b");
  b.f2_w = params.at(prefix + ".f2.W");
  b.f2_b = params.at(prefix + ".f2.b");
  return b;
}

Value physical_branch_graph(const Value& h, const BlockValues& b,
                            const SkeletonGraph& graph, bool literal_eq4,
                            std::vector<Eigen::MatrixXd>* debug_softmaxes) {
  Eigen::Index channels = b.edge_weights.rows();
  // The same adjacency masks every channel's edge-weight matrix.
  Value s;
  if (literal_eq4) {
    Matrix tiled(graph.n_joints, graph.n_joints * channels);
    for (Eigen::Index d = 0; d < channels; ++d)
      tiled.middleCols(d * graph.n_joints, graph.n_joints) = graph.adjacency;
    s = diff::column_softmax(
        diff::hadamard(b.edge_logits, Value::constant(tiled)));
  } else {
    s = diff::masked_column_softmax(b.edge_logits, graph.adjacency);
  }
  if (debug_softmaxes) debug_softmaxes->push_back(s.data());
  Value mixed = diff::edge_mix(diff::matmul(b.edge_weights, h), s,
                               graph.n_joints);
  return diff::relu(mixed);
}

Value nonphysical_branch_graph(const Value& h, const BlockValues& b,
                               int n_joints,
                               std::vector<Eigen::MatrixXd>* debug_softmaxes) {
  Value q = diff::matmul(b.attn_w1, h);
  Value k = diff::matmul(b.attn_w2, h);
  Value v = diff::linear(b.g_w, h, b.g_b);
  Eigen::MatrixXd attn;
  Value mixed = diff::block_attention(
      q, k, v, n_joints, debug_softmaxes ? &attn : nullptr);
  if (debug_softmaxes) debug_softmaxes->push_back(attn);
  Value f1 = diff::relu(diff::linear(b.f1_w, mixed, b.f1_b));
  return diff::linear(b.f2_w, f1, b.f2_b);
}

Value agc_layer_graph(const Value& h, const BlockValues& b,
                      const SkeletonGraph& graph, GraphVariant variant,
                      bool literal_eq4,
                      std::vector<Eigen::MatrixXd>* debug_softmaxes) {
  if (variant == GraphVariant::kPhysicalOnly)
    return physical_branch_graph(h, b, graph, literal_eq4, debug_softmaxes);
  if (variant == GraphVariant::kNonphysicalOnly)
    return nonphysical_branch_graph(h, b, graph.n_joints, debug_softmaxes);
  return diff::add(
      physical_branch_graph(h, b, graph, literal_eq4, debug_softmaxes),
      nonphysical_branch_graph(h, b, graph.n_joints, debug_softmaxes));
}

Matrix gaussian(Eigen::Index rows, Eigen::Index cols, double stddev,
                Rng& rng) {
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = stddev * rng.normal();
  return m;
}

}  // namespace

Eigen::MatrixXd physical_graph_conv(const Eigen::MatrixXd& h,
                                    const AgcBlockParams& p,
                                    const SkeletonGraph& graph,
                                    bool literal_eq4) {
  return physical_branch_graph(Value::constant(h), block_from_params(p), graph,
                               literal_eq4, nullptr)
      .data();
}

Eigen::MatrixXd nonphysical_graph_conv(const Eigen::MatrixXd& h,
                                       const AgcBlockParams& p) {
  return nonphysical_branch_graph(Value::constant(h), block_from_params(p),
                                  static_cast<int>(h.cols()), nullptr)
      .data();
}

Eigen::MatrixXd agc_layer(const Eigen::MatrixXd& h, const AgcBlockParams& p,
                          const SkeletonGraph& graph, GraphVariant variant,
                          bool literal_eq4) {
  return agc_layer_graph(Value::constant(h), block_from_params(p), graph,
                         variant, literal_eq4, nullptr)
      .data();
}

void init_student_params(diff::ParamStore& store, const StudentConfig& cfg,
                         Rng& rng) {
  cfg.validate();
  const int n = cfg.n_joints;
  const int d = cfg.width;
  // Small-noise biases keep feature columns off the exact ReLU kink; the
  // branch output layers start at half gain so the branch sum plus the pair
  // residuals keep activations from compounding across the 8 blocks.
  const double bias_noise = 0.01;
  store.create("student.embed.W", gaussian(d, 2, 0.5, rng));
  store.create("student.embed.b", gaussian(d, 1, bias_noise, rng));
  double fan = std::sqrt(2.0 / static_cast<double>(d));
  double attn = 1.0 / std::sqrt(static_cast<double>(d));
  double branch_out = 0.5 * fan;
  for (int i = 0; i < cfg.blocks; ++i) {
    std::string prefix = "student.block" + std::to_string(i);
    store.create(prefix + ".M", gaussian(n, n * d, 0.1, rng));
    store.create(prefix + ".W_edge", gaussian(d, d, branch_out, rng));
    store.create(prefix + ".W1", gaussian(d, d, attn, rng));
    store.create(prefix + ".W2", gaussian(d, d, attn, rng));
    store.create(prefix + ".g.W", gaussian(d, d, fan, rng));
    store.create(prefix + ".g.b", gaussian(d, 1, bias_noise, rng));
    store.create(prefix + ".f1.W", gaussian(d, d, fan, rng));
    store.create(prefix + ".f1.b", gaussian(d, 1, bias_noise, rng));
    store.create(prefix + ".f2.W", gaussian(d, d, branch_out, rng));
    store.create(prefix + ".f2.b", gaussian(d, 1, bias_noise, rng));
  }
  // The head starts near zero so initial depth estimates sit close to the
  // root plane; the cycle loss is quadratic in the depth scale and blows up
  // optimization when estimates start hot.
  store.create("student.head.W", gaussian(1, d, 0.01, rng));
  store.create("student.head.b", gaussian(1, 1, bias_noise, rng));
}

Value student_forward_batch(const Value& x_blocks, diff::ParamStore& params,
                            const StudentConfig& cfg,
                            const SkeletonGraph& graph,
                            std::vector<Eigen::MatrixXd>* attention_out) {
  cfg.validate();
  if (x_blocks.rows() != 2 || x_blocks.cols() % cfg.n_joints != 0)
    throw ValidationError("student input must be 2 x N*B in block layout");
  if (graph.n_joints != cfg.n_joints)
    throw ValidationError("student skeleton joint count mismatch");
  if (!x_blocks.data().allFinite()) throw ValidationError("non-finite pose");
  Value h = diff::linear(params.at("student.embed.W"),
                         diff::scale(x_blocks, cfg.input_scale),
                         params.at("student.embed.b"));
  Value skip = h;
  for (int i = 0; i < cfg.blocks; ++i) {
    Value a = agc_layer_graph(h, block_from_store(params, i), graph,
                              cfg.variant, cfg.literal_eq4, attention_out);
    h = diff::relu(a);
    if (i % 2 == 1) {
      h = diff::add(h, skip);
      skip = h;
    }
  }
  Value raw = diff::linear(params.at("student.head.W"), h,
                           params.at("student.head.b"));
  return diff::center_root_blocks(raw, cfg.n_joints, graph.root_index);
}

Eigen::VectorXd student_forward(const Pose2D& x, diff::ParamStore& params,
                                const StudentConfig& cfg,
                                const SkeletonGraph& graph) {
  if (x.n_joints() != cfg.n_joints)
    throw ValidationError("student input joint count mismatch");
  Value d = student_forward_batch(Value::constant(x.coords), params, cfg,
                                  graph, nullptr);
  return d.data().row(0).transpose();
}

}  // namespace poselift

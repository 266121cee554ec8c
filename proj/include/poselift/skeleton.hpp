// Copyright (c) 2026 The poselift Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <string>
#include <utility>
#include <vector>

#include "poselift/error.hpp"

namespace poselift {

/// Joint topology of the skeleton: joint count, undirected bone edges and the
/// root joint, plus the binary adjacency matrix with self-loops used by the
/// physical graph convolution.
struct SkeletonGraph {
  int n_joints = 0;
  int root_index = 0;
  std::vector<std::pair<int, int>> edges;
  Eigen::MatrixXd adjacency;  // symmetric, ones on the diagonal

  /// Validates indices, builds adjacency and requires a connected graph.
  static SkeletonGraph build(int n_joints, int root_index,
                             std::vector<std::pair<int, int>> edges);

  /// Standard 17-joint human topology (pelvis root).
  static SkeletonGraph human17();

  static SkeletonGraph from_json_file(const std::string& path);
  void save_json(const std::string& path) const;

  /// Parent of each joint in a BFS tree rooted at root_index (-1 for root).
  std::vector<int> bfs_parents() const;
};

}  // namespace poselift

// Copyright (c) 2026 The poselift Authors
// SPDX-License-Identifier: Apache-2.0
#include "poselift/skeleton.hpp"

#include <deque>
#include <fstream>
#include <json.hpp>

namespace poselift {

SkeletonGraph SkeletonGraph::build(int n_joints, int root_index,
                                   std::vector<std::pair<int, int>> edges) {
  if (n_joints <= 0) throw ValidationError("skeleton needs at least one joint");
  if (root_index < 0 || root_index >= n_joints)
    throw ValidationError("skeleton root index out of range");
  SkeletonGraph g;
  g.n_joints = n_joints;
  g.root_index = root_index;
  g.edges = std::move(edges);
  g.adjacency = Eigen::MatrixXd::Identity(n_joints, n_joints);
  for (const auto& [a, b] : g.edges) {
    if (a < 0 || a >= n_joints || b < 0 || b >= n_joints)
      throw ValidationError("skeleton edge joint index out of range");
    g.adjacency(a, b) = 1.0;
    g.adjacency(b, a) = 1.0;
  }
  auto parents = g.bfs_parents();
  for (int j = 0; j < n_joints; ++j) {
    if (j != root_index && parents[j] < 0)
      throw ValidationError("skeleton graph is not connected");
  }
  return g;
}

SkeletonGraph SkeletonGraph::human17() {
  // 0 pelvis, 1-3 right leg, 4-6 left leg, 7 spine, 8 thorax, 9 nose,
  // 10 head, 11-13 left arm, 14-16 right arm.
  return build(17, 0,
               {{0, 1},
                {1, 2},
                {2, 3},
                {0, 4},
                {4, 5},
                {5, 6},
                {0, 7},
                {7, 8},
                {8, 9},
                {9, 10},
                {8, 11},
                {11, 12},
                {12, 13},
                {8, 14},
                {14, 15},
                {15, 16}});
}

SkeletonGraph SkeletonGraph::from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open skeleton file: " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("malformed skeleton JSON " + path + ": " + e.what());
  }
  if (!doc.contains("n_joints") || !doc.contains("root") ||
      !doc.contains("edges"))
    throw ValidationError("skeleton JSON needs n_joints, root, edges");
  std::vector<std::pair<int, int>> edges;
  for (const auto& e : doc["edges"]) {
    if (!e.is_array() || e.size() != 2)
      throw ValidationError("skeleton edge must be a pair");
    edges.emplace_back(e[0].get<int>(), e[1].get<int>());
  }
  return build(doc["n_joints"].get<int>(), doc["root"].get<int>(),
               std::move(edges));
}

void SkeletonGraph::save_json(const std::string& path) const {
  nlohmann::json doc;
  doc["n_joints"] = n_joints;
  doc["root"] = root_index;
  auto arr = nlohmann::json::array();
  for (const auto& [a, b] : edges) arr.push_back({a, b});
  doc["edges"] = arr;
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write skeleton file: " + path);
  out << doc.dump() << "\n";
}

std::vector<int> SkeletonGraph::bfs_parents() const {
  std::vector<int> parent(n_joints, -1);
  std::vector<bool> seen(n_joints, false);
  std::deque<int> queue{root_index};
  seen[root_index] = true;
  while (!queue.empty()) {
    int j = queue.front();
    queue.pop_front();
    for (const auto& [a, b] : edges) {
      int other = -1;
      if (a == j) other = b;
      if (b == j) other = a;
      if (other >= 0 && !seen[other]) {
        seen[other] = true;
        parent[other] = j;
        queue.push_back(other);
      }
    }
  }
  return parent;
}

}  // namespace poselift

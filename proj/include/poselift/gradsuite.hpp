// Copyright (c) 2026 The poselift Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

namespace poselift {

struct GradCase {
  std::string name;
  double max_rel_err = 0.0;
  bool pass = false;
};

/// Finite-difference checks over every differentiable operation: the core
/// layers, both graph-convolution branches, the rotation head, projection
/// and all four losses, each on several random small shapes.
std::vector<GradCase> run_gradient_suite(double tolerance = 1e-5);

}  // namespace poselift

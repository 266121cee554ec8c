// Copyright (c) 2026 The poselift Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <map>
#include <string>

namespace poselift {

/// Formats a double with 17 significant digits, enough for an exact 64-bit
/// round trip through decimal text.
std::string format_double17(double x);

/// Writes/reads the versioned checkpoint document
///   {"version":1, "params": {name: {"shape":[r,c], "data":[...]}}}
/// with row-major data arrays. Keys are emitted in sorted order so that
/// identical parameter sets serialize to identical bytes.
void save_named_matrices(const std::map<std::string, Eigen::MatrixXd>& params,
                         const std::string& path);
std::map<std::string, Eigen::MatrixXd> load_named_matrices(
    const std::string& path);

}  // namespace poselift

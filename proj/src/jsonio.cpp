// Copyright (c) 2026 The poselift Authors
// SPDX-License-Identifier: Apache-2.0
#include "poselift/jsonio.hpp"

#include <cstdio>
#include <fstream>
#include <json.hpp>

#include "poselift/error.hpp"

namespace poselift {

std::string format_double17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

void save_named_matrices(const std::map<std::string, Eigen::MatrixXd>& params,
                         const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot open for writing: " + path);
  out << "{\"version\":1,\"params\":{";
  bool first_param = true;
  for (const auto& [name, m] : params) {
    if (!first_param) out << ",";
    first_param = false;
    out << "\"" << name << "\":{\"shape\":[" << m.rows() << "," << m.cols()
        << "],\"data\":[";
    bool first_val = true;
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) {
        if (!first_val) out << ",";
        first_val = false;
        out << format_double17(m(r, c));
      }
    }
    out << "]}";
  }
  out << "}}\n";
  if (!out) throw ValidationError("write failed: " + path);
}

std::map<std::string, Eigen::MatrixXd> load_named_matrices(
    const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open checkpoint: " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("malformed checkpoint " + path + ": " + e.what());
  }
  if (!doc.is_object() || !doc.contains("version") ||
      doc["version"].get<int>() != 1 || !doc.contains("params")) {
    throw ValidationError("unsupported checkpoint schema: " + path);
  }
  std::map<std::string, Eigen::MatrixXd> out;
  for (const auto& [name, entry] : doc["params"].items()) {
    if (!entry.contains("shape") || !entry.contains("data")) {
      throw ValidationError("checkpoint entry missing shape/data: " + name);
    }
    const auto& shape = entry["shape"];
    if (!shape.is_array() || shape.size() != 2) {
      throw ValidationError("bad shape for parameter: " + name);
    }
    Eigen::Index rows = shape[0].get<Eigen::Index>();
    Eigen::Index cols = shape[1].get<Eigen::Index>();
    const auto& data = entry["data"];
    if (!data.is_array() ||
        static_cast<Eigen::Index>(data.size()) != rows * cols) {
      throw ValidationError("data length mismatch for parameter: " + name);
    }
    Eigen::MatrixXd m(rows, cols);
    Eigen::Index i = 0;
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index c = 0; c < cols; ++c) {
        m(r, c) = data[i++].get<double>();
      }
    }
    out.emplace(name, std::move(m));
  }
  return out;
}

}  // namespace poselift

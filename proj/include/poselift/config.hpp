// Copyright (c) 2026 The poselift Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <string>
#include <vector>

#include "poselift/data.hpp"
#include "poselift/training.hpp"

namespace poselift {

/// Flat key=value configuration. Precedence: built-in defaults, then a
/// config file, then command-line overrides. Unknown keys are rejected at
/// every layer.
class Config {
 public:
  static Config defaults();
  static const std::vector<std::pair<std::string, std::string>>& known_keys();

  void merge_file(const std::string& path);
  void set(const std::string& key, const std::string& value);
  const std::string& get(const std::string& key) const;
  double get_double(const std::string& key) const;
  int get_int(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  uint64_t get_u64(const std::string& key) const;

  /// Resolves "auto" epochs to the stage default (teacher 40, student 30)
  /// and pins the stage key.
  void finalize_stage(const std::string& stage);

  /// Sorted key=value lines; printed by every run and hashed into the
  /// report fingerprint.
  std::vector<std::string> resolved_lines() const;
  std::string fingerprint() const;

  TrainConfig train_config() const;
  SynthSpec synth_spec() const;
  CameraModel camera() const;
  TeacherConfig teacher_config() const;
  StudentConfig student_config() const;

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace poselift

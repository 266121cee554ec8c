// Copyright (c) 2026 The poselift Authors
// SPDX-License-Identifier: Apache-2.0
#include "poselift/config.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

namespace poselift {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  size_t b = s.find_last_not_of(" \t\r");
  if (a == std::string::npos) return "";
  return s.substr(a, b - a + 1);
}

}  // namespace

const std::vector<std::pair<std::string, std::string>>& Config::known_keys() {
  static const std::vector<std::pair<std::string, std::string>> keys = {
      {"batch_size", "256"},
      {"camera_t", "5"},
      {"checkpoint_every", "10"},
      {"detach_cycle_target", "0"},
      {"elevation_max", "0.2"},
      {"elevation_min", "-0.2"},
      {"epochs", "auto"},
      {"graph_variant", "both"},
      {"input_scale", "10"},
      {"lambda_kd", "5"},
      {"lambda_rec", "1"},
      {"lambda_rep", "5"},
      {"lambda_ric", "1"},
      {"literal_eq4", "0"},
      {"lr", "0.001"},
      {"momentum", "0.9"},
      {"rotation_mode", "azimuth"},
      {"seed", "1"},
      {"stage", ""},
      {"student_blocks", "8"},
      {"student_width", "64"},
      {"synth_mode", "dictionary"},
      {"synth_samples", "5000"},
      {"synth_sigma", "1"},
      {"synth_true_atoms", "4"},
      {"target_spread", "0.1"},
      {"teacher_atoms", "12"},
      {"teacher_blocks", "6"},
      {"teacher_bottleneck", "256"},
      {"teacher_width", "1024"},
  };
  return keys;
}

Config Config::defaults() {
  Config cfg;
  for (const auto& [key, value] : known_keys()) cfg.values_[key] = value;
  return cfg;
}

void Config::merge_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config file: " + path);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    size_t eq = t.find('=');
    if (eq == std::string::npos)
      throw ValidationError(path + ":" + std::to_string(line_no) +
                            ": expected key=value");
    set(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
  }
}

void Config::set(const std::string& key, const std::string& value) {
  if (!values_.count(key))
    throw ValidationError("unknown config key: " + key);
  values_[key] = value;
}

const std::string& Config::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end())
    throw ValidationError("unknown config key: " + key);
  return it->second;
}

double Config::get_double(const std::string& key) const {
  const std::string& s = get(key);
  try {
    size_t used = 0;
    double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ValidationError("config key " + key + " needs a number, got '" + s +
                          "'");
  }
}

int Config::get_int(const std::string& key) const {
  double v = get_double(key);
  int i = static_cast<int>(v);
  if (static_cast<double>(i) != v)
    throw ValidationError("config key " + key + " needs an integer");
  return i;
}

bool Config::get_bool(const std::string& key) const {
  const std::string& s = get(key);
  if (s == "1" || s == "true") return true;
  if (s == "0" || s == "false") return false;
  throw ValidationError("config key " + key + " needs 0/1, got '" + s + "'");
}

uint64_t Config::get_u64(const std::string& key) const {
  double v = get_double(key);
  if (v < 0) throw ValidationError("config key " + key + " must be >= 0");
  return static_cast<uint64_t>(v);
}

void Config::finalize_stage(const std::string& stage) {
  const std::string& declared = get("stage");
  if (!declared.empty() && declared != stage)
    throw ValidationError("config declares stage=" + declared +
                          " but the command runs stage " + stage);
  values_["stage"] = stage;
  if (get("epochs") == "auto")
    values_["epochs"] = stage == "student" ? "30" : "40";
}

std::vector<std::string> Config::resolved_lines() const {
  std::vector<std::string> lines;
  for (const auto& [key, value] : values_)
    lines.push_back(key + "=" + value);
  return lines;
}

std::string Config::fingerprint() const {
  uint64_t h = 1469598103934665603ULL;
  for (const auto& line : resolved_lines()) {
    for (char c : line) {
      h ^= static_cast<unsigned char>(c);
      h *= 1099511628211ULL;
    }
    h ^= '\n';
    h *= 1099511628211ULL;
  }
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(h));
  return buf;
}

CameraModel Config::camera() const {
  CameraModel cam{get_double("camera_t")};
  cam.validate();
  return cam;
}

TeacherConfig Config::teacher_config() const {
  TeacherConfig cfg;
  cfg.dictionary_size = get_int("teacher_atoms");
  cfg.blocks = get_int("teacher_blocks");
  cfg.width = get_int("teacher_width");
  cfg.bottleneck = get_int("teacher_bottleneck");
  cfg.input_scale = get_double("input_scale");
  return cfg;
}

StudentConfig Config::student_config() const {
  StudentConfig cfg;
  cfg.width = get_int("student_width");
  cfg.blocks = get_int("student_blocks");
  cfg.variant = graph_variant_from_string(get("graph_variant"));
  cfg.literal_eq4 = get_bool("literal_eq4");
  cfg.input_scale = get_double("input_scale");
  return cfg;
}

TrainConfig Config::train_config() const {
  TrainConfig cfg;
  if (get("epochs") == "auto")
    throw ValidationError("stage not finalized before reading epochs");
  cfg.epochs = get_int("epochs");
  cfg.batch_size = get_int("batch_size");
  cfg.sgd.learning_rate = get_double("lr");
  cfg.sgd.momentum = get_double("momentum");
  cfg.sgd.seed = get_u64("seed");
  cfg.weights.rep = get_double("lambda_rep");
  cfg.weights.ric = get_double("lambda_ric");
  cfg.weights.kd = get_double("lambda_kd");
  cfg.weights.rec = get_double("lambda_rec");
  cfg.seed = get_u64("seed");
  cfg.checkpoint_every = get_int("checkpoint_every");
  cfg.rotation_mode = rotation_mode_from_string(get("rotation_mode"));
  cfg.elevation_min = get_double("elevation_min");
  cfg.elevation_max = get_double("elevation_max");
  cfg.detach_cycle_target = get_bool("detach_cycle_target");
  cfg.target_spread = get_double("target_spread");
  cfg.camera = camera();
  cfg.teacher = teacher_config();
  cfg.student = student_config();
  return cfg;
}

SynthSpec Config::synth_spec() const {
  SynthSpec spec;
  spec.mode = synth_mode_from_string(get("synth_mode"));
  spec.n_samples = get_int("synth_samples");
  spec.true_atoms = get_int("synth_true_atoms");
  spec.coefficient_sigma = get_double("synth_sigma");
  spec.rotation_mode = rotation_mode_from_string(get("rotation_mode"));
  spec.elevation_min = get_double("elevation_min");
  spec.elevation_max = get_double("elevation_max");
  spec.seed = get_u64("seed");
  return spec;
}

}  // namespace poselift

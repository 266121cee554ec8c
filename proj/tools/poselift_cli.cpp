// Copyright (c) 2026 The poselift Authors
// SPDX-License-Identifier: Apache-2.0
//
// poselift: unsupervised 2D-to-3D pose lifting.
//   synth          generate a synthetic dataset with hidden ground truth
//   train-teacher  stage 1: fit the pose-dictionary network
//   train-student  stage 2: fit the graph-convolution network (frozen teacher)
//   eval           metrics report (and optional SVG renders) on labeled data
//   lift           predict 3D poses for a 2D-only dataset
//   gradcheck      finite-difference audit of every differentiable op
#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>

#include "poselift/config.hpp"
#include "poselift/data.hpp"
#include "poselift/eval.hpp"
#include "poselift/gradsuite.hpp"
#include "poselift/jsonio.hpp"
#include "poselift/training.hpp"

namespace {

using namespace poselift;

struct CommonArgs {
  std::string config_path;
  std::map<std::string, std::string> overrides;
};

void add_config_flags(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path,
                  "flat key=value configuration file");
  for (const auto& [key, default_value] : Config::known_keys()) {
    std::string flag = "--" + key;
    std::string help = "config key (default " +
                       (default_value.empty() ? "none" : default_value) + ")";
    cmd->add_option_function<std::string>(
        flag,
        [&args, key = key](const std::string& v) { args.overrides[key] = v; },
        help);
  }
}

Config resolve_config(const CommonArgs& args) {
  Config cfg = Config::defaults();
  if (!args.config_path.empty()) cfg.merge_file(args.config_path);
  for (const auto& [key, value] : args.overrides) cfg.set(key, value);
  return cfg;
}

void print_resolved(const Config& cfg) {
  std::cout << "# resolved configuration (fingerprint " << cfg.fingerprint()
            << ")\n";
  for (const auto& line : cfg.resolved_lines()) std::cout << line << "\n";
  std::cout.flush();
}

SkeletonGraph load_skeleton(const std::string& path) {
  return path.empty() ? SkeletonGraph::human17()
                      : SkeletonGraph::from_json_file(path);
}

diff::ParamStore load_model(const std::string& checkpoint,
                            const std::string& model) {
  diff::ParamStore store;
  load_model_params(store, checkpoint, model + ".");
  return store;
}

int run_synth(const CommonArgs& args, const std::string& skeleton_path,
              const std::string& out_path) {
  Config cfg = resolve_config(args);
  print_resolved(cfg);
  SkeletonGraph skeleton = load_skeleton(skeleton_path);
  auto records = synth_generate(cfg.synth_spec(), cfg.camera(), skeleton);
  save_dataset(records, out_path);
  std::cout << "wrote " << records.size() << " records to " << out_path
            << "\n";
  return 0;
}

int run_train(const CommonArgs& args, const std::string& stage,
              const std::string& skeleton_path, const std::string& data_path,
              const std::string& teacher_ckpt, const std::string& out_prefix,
              const std::string& resume) {
  Config cfg = resolve_config(args);
  cfg.finalize_stage(stage);
  print_resolved(cfg);
  SkeletonGraph skeleton = load_skeleton(skeleton_path);
  auto records = load_dataset(data_path, skeleton.n_joints);
  TrainConfig train_cfg = cfg.train_config();
  bind_skeleton(train_cfg, skeleton);
  TrainResult result =
      stage == "teacher"
          ? train_teacher(records, train_cfg, skeleton, out_prefix, resume)
          : train_student(records, teacher_ckpt, train_cfg, skeleton,
                          out_prefix, resume);
  std::cout << "checkpoint: " << result.checkpoint_path << "\n"
            << "log: " << result.log_path << "\n";
  if (!result.log.empty()) {
    const EpochLog& last = result.log.back();
    std::printf("final epoch %d: losses %.6g / %.6g, total %.6g\n", last.epoch,
                last.loss_a, last.loss_b, last.total);
  }
  return 0;
}

int run_eval(const CommonArgs& args, const std::string& skeleton_path,
             const std::string& data_path, const std::string& checkpoint,
             const std::string& model, const std::string& out_path,
             const std::string& render_dir, int render_count,
             const std::string& baseline_from) {
  Config cfg = resolve_config(args);
  print_resolved(cfg);
  SkeletonGraph skeleton = load_skeleton(skeleton_path);
  auto records = load_dataset(data_path, skeleton.n_joints);
  if (records.empty()) throw ValidationError("evaluation dataset is empty");

  std::vector<Pose3D> predictions;
  diff::ParamStore store = load_model(checkpoint, model);
  double spread = cfg.get_double("target_spread");
  if (model == "teacher") {
    TeacherConfig tcfg = cfg.teacher_config();
    tcfg.n_joints = skeleton.n_joints;
    tcfg.root_index = skeleton.root_index;
    if (store.at("teacher.dict.B").rows() != 3 * tcfg.dictionary_size)
      throw ValidationError(
          "checkpoint dictionary size does not match teacher_atoms");
    predictions =
        run_teacher_inference(store, tcfg, records, skeleton, spread);
  } else if (model == "student") {
    StudentConfig scfg = cfg.student_config();
    scfg.n_joints = skeleton.n_joints;
    predictions = run_student_inference(store, scfg, records, skeleton,
                                        cfg.camera(), spread);
  } else {
    throw ValidationError("--model must be teacher or student");
  }

  EvalReport report = evaluate_predictions(predictions, records, skeleton,
                                           cfg.fingerprint());
  write_report_csv(report, out_path);
  std::printf("%s: n=%d mpjpe=%.6g p_mpjpe=%.6g pck150=%.6g auc=%.6g\n",
              model.c_str(), report.aggregate.n, report.aggregate.mpjpe,
              report.aggregate.p_mpjpe, report.aggregate.pck150,
              report.aggregate.auc);

  if (!baseline_from.empty()) {
    auto train_records = load_dataset(baseline_from, skeleton.n_joints);
    Pose3D mean = mean_pose_baseline(train_records, skeleton);
    std::vector<Pose3D> baseline(records.size(), mean);
    EvalReport base_report = evaluate_predictions(baseline, records, skeleton,
                                                  cfg.fingerprint());
    write_report_csv(base_report, out_path + ".baseline.csv");
    std::printf("baseline: p_mpjpe=%.6g\n", base_report.aggregate.p_mpjpe);
  }

  if (!render_dir.empty()) {
    std::filesystem::create_directories(render_dir);
    int count = std::min<int>(render_count, static_cast<int>(records.size()));
    for (int i = 0; i < count; ++i) {
      PoseRecord rec = records[i];
      Pose2D input = normalize_input(rec, skeleton, spread);
      std::vector<Pose3D> poses{predictions[i]};
      std::vector<std::string> labels{model};
      if (rec.has_ground_truth()) {
        poses.push_back(
            root_center(rec.ground_truth_for_eval(), skeleton.root_index));
        labels.push_back("ground truth");
      }
      render_sample(input, poses, labels, skeleton,
                    render_dir + "/" + rec.id + ".svg");
    }
    std::cout << "rendered " << count << " samples to " << render_dir << "\n";
  }
  if (report.any_nan()) throw NumericError("report contains NaN metrics");
  return 0;
}

int run_lift(const CommonArgs& args, const std::string& skeleton_path,
             const std::string& data_path, const std::string& checkpoint,
             const std::string& model, const std::string& out_path) {
  Config cfg = resolve_config(args);
  print_resolved(cfg);
  SkeletonGraph skeleton = load_skeleton(skeleton_path);
  auto records = load_dataset(data_path, skeleton.n_joints);
  diff::ParamStore store = load_model(checkpoint, model);
  double spread = cfg.get_double("target_spread");
  std::vector<Pose3D> predictions;
  if (model == "teacher") {
    TeacherConfig tcfg = cfg.teacher_config();
    tcfg.n_joints = skeleton.n_joints;
    tcfg.root_index = skeleton.root_index;
    predictions =
        run_teacher_inference(store, tcfg, records, skeleton, spread);
  } else if (model == "student") {
    StudentConfig scfg = cfg.student_config();
    scfg.n_joints = skeleton.n_joints;
    predictions = run_student_inference(store, scfg, records, skeleton,
                                        cfg.camera(), spread);
  } else {
    throw ValidationError("--model must be teacher or student");
  }
  std::ofstream out(out_path);
  if (!out) throw ValidationError("cannot write predictions: " + out_path);
  for (size_t i = 0; i < records.size(); ++i) {
    out << "{\"id\":\"" << records[i].id << "\",\"joints3d\":[";
    const auto& m = predictions[i].coords;
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) out << ",";
      out << "[" << format_double17(m(0, j)) << "," << format_double17(m(1, j))
          << "," << format_double17(m(2, j)) << "]";
    }
    out << "]}\n";
  }
  std::cout << "wrote " << records.size() << " predictions to " << out_path
            << "\n";
  return 0;
}

int run_gradcheck(const CommonArgs& args) {
  Config cfg = resolve_config(args);
  print_resolved(cfg);
  auto cases = run_gradient_suite();
  bool all_pass = true;
  std::printf("%-26s %14s  %s\n", "operation", "max_rel_err", "status");
  for (const auto& c : cases) {
    std::printf("%-26s %14.3e  %s\n", c.name.c_str(), c.max_rel_err,
                c.pass ? "PASS" : "FAIL");
    all_pass = all_pass && c.pass;
  }
  if (!all_pass) throw NumericError("gradient check failed");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"poselift: unsupervised 2D-to-3D human pose lifting"};
  app.require_subcommand(1);

  CommonArgs args;
  std::string skeleton_path, data_path, out_path, teacher_ckpt, checkpoint;
  std::string model = "student", resume, render_dir, baseline_from;
  int render_count = 8;

  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
  add_config_flags(synth, args);
  synth->add_option("--skeleton", skeleton_path, "skeleton JSON file");
  synth->add_option("--out", out_path, "output dataset path (JSONL)")
      ->required();

  auto* tt = app.add_subcommand("train-teacher", "stage 1 training");
  add_config_flags(tt, args);
  tt->add_option("--skeleton", skeleton_path, "skeleton JSON file");
  tt->add_option("--data", data_path, "training dataset (JSONL)")->required();
  tt->add_option("--out", out_path, "output prefix")->required();
  tt->add_option("--resume", resume, "checkpoint to resume from");

  auto* ts = app.add_subcommand("train-student", "stage 2 training");
  add_config_flags(ts, args);
  ts->add_option("--skeleton", skeleton_path, "skeleton JSON file");
  ts->add_option("--data", data_path, "training dataset (JSONL)")->required();
  ts->add_option("--teacher", teacher_ckpt, "stage-1 checkpoint")->required();
  ts->add_option("--out", out_path, "output prefix")->required();
  ts->add_option("--resume", resume, "checkpoint to resume from");

  auto* ev = app.add_subcommand("eval", "metrics report on labeled data");
  add_config_flags(ev, args);
  ev->add_option("--skeleton", skeleton_path, "skeleton JSON file");
  ev->add_option("--data", data_path, "evaluation dataset (JSONL)")
      ->required();
  ev->add_option("--checkpoint", checkpoint, "model checkpoint")->required();
  ev->add_option("--model", model, "teacher or student");
  ev->add_option("--out", out_path, "report CSV path")->required();
  ev->add_option("--render-dir", render_dir, "write per-sample SVGs here");
  ev->add_option("--render-count", render_count, "how many samples to render");
  ev->add_option("--baseline-from", baseline_from,
                 "training dataset for the mean-pose baseline report");

  auto* lift = app.add_subcommand("lift", "predict 3D poses for 2D inputs");
  add_config_flags(lift, args);
  lift->add_option("--skeleton", skeleton_path, "skeleton JSON file");
  lift->add_option("--data", data_path, "input dataset (JSONL)")->required();
  lift->add_option("--checkpoint", checkpoint, "model checkpoint")->required();
  lift->add_option("--model", model, "teacher or student");
  lift->add_option("--out", out_path, "output predictions path (JSONL)")
      ->required();

  auto* gc = app.add_subcommand("gradcheck", "finite-difference audit");
  add_config_flags(gc, args);

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) return run_synth(args, skeleton_path, out_path);
    if (tt->parsed())
      return run_train(args, "teacher", skeleton_path, data_path, "", out_path,
                       resume);
    if (ts->parsed())
      return run_train(args, "student", skeleton_path, data_path, teacher_ckpt,
                       out_path, resume);
    if (ev->parsed())
      return run_eval(args, skeleton_path, data_path, checkpoint, model,
                      out_path, render_dir, render_count, baseline_from);
    if (lift->parsed())
      return run_lift(args, skeleton_path, data_path, checkpoint, model,
                      out_path);
    if (gc->parsed()) return run_gradcheck(args);
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 2;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

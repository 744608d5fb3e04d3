// Copyright 2026 The ctxfusion Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// ctxfusion command-line entry point.
//
//   simulate          scenes + all branch outputs -> detection log
//   fuse              fuse chosen branches of a log -> fused detections
//   train-gate        log -> gate JSON + per-epoch MAE CSV
//   evaluate          suite over a log or the generator -> reports
//   selection-stats   run traces -> per-branch selection rates
//   wls-demo          misspecification experiment -> subset CSV
//
// Exit codes: 0 success, 1 config/parse error, 2 runtime/numeric error.

#include <algorithm>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ctxfusion/config.hpp"
#include "ctxfusion/detection_log.hpp"
#include "ctxfusion/engine.hpp"
#include "ctxfusion/errors.hpp"
#include "ctxfusion/estimation.hpp"
#include "ctxfusion/gating.hpp"

namespace cf = ctxfusion;
namespace fs = std::filesystem;

namespace {

struct Options {
  std::string config;
  std::string log;
  std::string suite;
  std::string out;
  std::string curve;
  std::string format{"csv"};
  std::string branches;
  std::string algorithm;
  std::string contexts;
  std::vector<std::string> traces;
  std::uint64_t seed{0};
  long long scenes{-1};
  int epochs{-1};
  int hidden{-1};
  double lr{-1};
  double init_scale{-1};
  double holdout{0};
  std::string optimizer;
  bool attention{false};
  std::string hp_file;
};

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::stringstream in(s);
  for (std::string item; std::getline(in, item, sep);)
    if (!item.empty()) parts.push_back(item);
  return parts;
}

void emit(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-")
    std::cout << text;
  else
    cf::write_text_file(path, text);
}

int cmd_simulate(const Options& o) {
  cf::GeneratorConfig cfg =
      cf::generator_from_json(cf::read_json_file(cf::resolve_config_path(o.config)));
  cfg.seed = o.seed;
  const std::size_t n = o.scenes >= 0 ? static_cast<std::size_t>(o.scenes) : cfg.scenes;
  const cf::DetectionLog log = cf::simulate_log(cfg, n);
  std::ostringstream text;
  cf::write_detection_log(text, log);
  emit(o.out, text.str());
  return 0;
}

int cmd_fuse(const Options& o) {
  const cf::DetectionLog log = cf::load_detection_log(o.log);
  cf::FusionConfig fusion;
  if (!o.config.empty()) fusion = cf::fusion_from_json(cf::read_json_file(cf::resolve_config_path(o.config)));
  if (!o.algorithm.empty()) fusion.algorithm = cf::parse_fusion_algorithm(o.algorithm);
  fusion.validate();
  std::vector<cf::BranchId> ids;
  for (const auto& b : split(o.branches, ',')) {
    try {
      ids.push_back(std::stoi(b));
    } catch (const std::exception&) {
      throw cf::ConfigError("bad branch id '" + b + "'");
    }
  }
  nlohmann::ordered_json out = nlohmann::ordered_json::array();
  std::string lines;
  for (const auto& [scene_id, s] : log.scenes) {
    std::map<cf::BranchId, cf::Detections> chosen;
    for (const auto& [id, output] : s.branches)
      if (ids.empty() || std::find(ids.begin(), ids.end(), id) != ids.end())
        chosen[id] = output.detections;
    for (cf::BranchId id : ids)
      if (!chosen.contains(id))
        throw cf::DataError("scene " + std::to_string(scene_id) + " has no branch " + std::to_string(id));
    nlohmann::ordered_json rec;
    rec["scene"] = scene_id;
    rec["context"] = std::string(cf::to_string(s.scene.context.label));
    nlohmann::ordered_json dets = nlohmann::ordered_json::array();
    for (const auto& d : cf::fuse(chosen, fusion))
      dets.push_back({{"label", d.label},
                      {"score", d.score},
                      {"branch", d.branch},
                      {"box", {d.box.x1, d.box.y1, d.box.x2, d.box.y2}}});
    rec["dets"] = std::move(dets);
    if (o.format == "json")
      out.push_back(std::move(rec));
    else
      lines += rec.dump() + "\n";
  }
  emit(o.out, o.format == "json" ? out.dump(1) + "\n" : lines);
  return 0;
}

int cmd_train_gate(const Options& o) {
  const cf::DetectionLog log = cf::load_detection_log(o.log);
  if (log.scenes.empty()) throw cf::ConfigError("log '" + o.log + "' has no scenes");
  cf::LogSource source(log);
  cf::GateHyperParams hp;
  if (!o.hp_file.empty()) hp = cf::hyperparams_from_json(cf::read_json_file(cf::resolve_config_path(o.hp_file)));
  if (o.epochs >= 0) hp.epochs = o.epochs;
  if (o.hidden > 0) hp.hidden_dim = o.hidden;
  if (o.lr > 0) hp.learning_rate = o.lr;
  if (o.init_scale > 0) hp.init_scale = o.init_scale;
  if (o.attention) hp.attention = true;
  if (!o.optimizer.empty()) hp = cf::hyperparams_from_json({{"optimizer", o.optimizer}}, hp);
  if (hp.attention && hp.block_dim == 0) hp.block_dim = cf::stem_block_dim();
  if (!(o.holdout >= 0 && o.holdout < 1)) throw cf::ConfigError("--holdout must be in [0, 1)");

  const auto ids = source.branch_ids();
  auto samples = cf::gate_samples(source, ids, cf::LossWeights{});
  const auto held = static_cast<std::size_t>(o.holdout * static_cast<double>(samples.size()));
  std::vector<cf::GateSample> test(samples.end() - static_cast<std::ptrdiff_t>(held), samples.end());
  samples.resize(samples.size() - held);
  if (samples.empty()) throw cf::ConfigError("no training scenes left after holdout");

  cf::Rng rng = cf::make_rng(o.seed, {cf::stream::kGate});
  const auto result = cf::train_gate(samples, ids, hp, rng);
  cf::save_gate(o.out, result.gate);

  std::ostringstream csv;
  csv << std::setprecision(17) << "epoch,train_mae\n";
  for (std::size_t e = 0; e < result.epoch_mae.size(); ++e) csv << e << ',' << result.epoch_mae[e] << '\n';
  if (!o.curve.empty()) cf::write_text_file(o.curve, csv.str());

  nlohmann::ordered_json summary;
  summary["train_scenes"] = samples.size();
  summary["final_train_mae"] = result.epoch_mae.back();
  if (!test.empty()) {
    summary["heldout_scenes"] = test.size();
    summary["heldout_mae"] = cf::dataset_mae(result.gate, test);
  }
  std::cout << summary.dump() << "\n";
  return 0;
}

int cmd_evaluate(const Options& o) {
  cf::SuiteConfig suite = cf::load_suite(o.suite);
  suite.generator.seed = o.seed;
  if (!o.log.empty()) suite.log = fs::path(o.log);
  if (!o.out.empty()) suite.output_dir = o.out;
  if (o.scenes >= 0) suite.scenes = static_cast<std::size_t>(o.scenes);

  const cf::GateSet gates = cf::prepare_gates(suite);
  std::unique_ptr<cf::SceneSource> source;
  if (suite.log)
    source = std::make_unique<cf::LogSource>(cf::load_detection_log(*suite.log));
  else
    source = std::make_unique<cf::SimulatedSource>(suite.generator, suite.scenes);
  const auto result = cf::run_experiment(suite, *source, gates);
  std::map<cf::BranchId, std::string> names;
  for (cf::BranchId id : source->branch_ids()) names[id] = source->branch_name(id);
  cf::write_experiment_outputs(suite, result, names);
  std::cout << (o.format == "json" ? cf::reports_json(result.reports) : cf::reports_csv(result.reports));
  return 0;
}

int cmd_selection_stats(const Options& o) {
  std::vector<cf::RunTrace> traces;
  for (const auto& path : o.traces) {
    std::ifstream in(path);
    if (!in) throw cf::ConfigError("cannot open trace '" + path + "'");
    std::stringstream text;
    text << in.rdbuf();
    traces.push_back(cf::parse_trace_json(text.str()));
  }
  std::set<cf::ContextLabel> filter;
  for (const auto& c : split(o.contexts, ',')) filter.insert(cf::parse_context(c));
  const auto stats = cf::branch_selection_stats(traces, filter);
  std::map<cf::BranchId, std::string> names;
  for (const auto& b : cf::default_branch_set()) names[b.id] = b.name;
  if (o.format == "json") {
    nlohmann::ordered_json j = nlohmann::ordered_json::array();
    for (const auto& [key, rates] : stats) {
      nlohmann::ordered_json r;
      r["gate"] = key.first;
      r["k"] = key.second;
      nlohmann::ordered_json pct = nlohmann::ordered_json::object();
      for (const auto& [id, rate] : rates)
        pct[names.contains(id) ? names[id] : std::to_string(id)] = 100.0 * rate;
      r["selection_pct"] = std::move(pct);
      j.push_back(std::move(r));
    }
    emit(o.out, j.dump(1) + "\n");
  } else {
    emit(o.out, cf::selection_stats_csv(stats, names));
  }
  return 0;
}

int cmd_wls_demo(const Options& o) {
  cf::MisspecificationConfig cfg =
      o.config.empty() ? cf::MisspecificationConfig::misspecified_default()
                       : cf::misspecification_from_json(cf::read_json_file(cf::resolve_config_path(o.config)));
  cfg.seed = o.seed;
  const auto results = cf::run_misspecification_experiment(cfg);
  emit(o.out, cf::misspecification_csv(results));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ctxfusion: context-aware selective sensor fusion"};
  app.require_subcommand(1, 1);
  Options o;

  auto* sim = app.add_subcommand("simulate", "Write a detection log of simulated scenes");
  sim->add_option("--config", o.config, "Generator config JSON")->required();
  sim->add_option("--out", o.out, "Output log path (- for stdout)")->required();
  sim->add_option("--seed", o.seed, "Master seed")->required();
  sim->add_option("--scenes", o.scenes, "Override the scene count");

  auto* fuse = app.add_subcommand("fuse", "Fuse branch outputs of a detection log");
  fuse->add_option("--log", o.log, "Detection log")->required();
  fuse->add_option("--branches", o.branches, "Comma-separated branch ids (default: all)");
  fuse->add_option("--config", o.config, "Fusion config JSON");
  fuse->add_option("--algorithm", o.algorithm, "nms | soft_nms | wbf");
  fuse->add_option("--out", o.out, "Output path (- for stdout)");
  fuse->add_option("--format", o.format, "json | csv (line-delimited)")->check(CLI::IsMember({"json", "csv"}));

  auto* train = app.add_subcommand("train-gate", "Train a deep or attention gate on a log");
  train->add_option("--log", o.log, "Detection log")->required();
  train->add_option("--out", o.out, "Gate JSON path")->required();
  train->add_option("--curve", o.curve, "Per-epoch MAE CSV path");
  train->add_option("--seed", o.seed, "Initialization and shuffle seed")->required();
  train->add_option("--hparams", o.hp_file, "Hyperparameter JSON");
  train->add_option("--epochs", o.epochs);
  train->add_option("--hidden", o.hidden);
  train->add_option("--lr", o.lr);
  train->add_option("--init-scale", o.init_scale);
  train->add_option("--optimizer", o.optimizer)->check(CLI::IsMember({"sgd", "adam"}));
  train->add_flag("--attention", o.attention, "Attention pooling over sensor blocks");
  train->add_option("--holdout", o.holdout, "Fraction of trailing scenes held out");

  auto* eval = app.add_subcommand("evaluate", "Run a configuration suite and write reports");
  eval->add_option("--suite", o.suite, "Suite JSON")->required();
  eval->add_option("--log", o.log, "Detection log (default: the suite's source)");
  eval->add_option("--out", o.out, "Output directory");
  eval->add_option("--seed", o.seed, "Master seed")->required();
  eval->add_option("--scenes", o.scenes, "Override the simulated scene count");
  eval->add_option("--format", o.format, "json | csv")->check(CLI::IsMember({"json", "csv"}));

  auto* sel = app.add_subcommand("selection-stats", "Per-branch selection rates from run traces");
  sel->add_option("--trace", o.traces, "RunTrace JSON (repeatable)")->required();
  sel->add_option("--contexts", o.contexts, "Comma-separated context filter");
  sel->add_option("--out", o.out, "Output path (- for stdout)");
  sel->add_option("--format", o.format, "json | csv")->check(CLI::IsMember({"json", "csv"}));

  auto* wls = app.add_subcommand("wls-demo", "Sensor misspecification experiment");
  wls->add_option("--config", o.config, "Experiment JSON (default: built-in misspecified case)");
  wls->add_option("--out", o.out, "Output CSV (- for stdout)");
  wls->add_option("--seed", o.seed, "Master seed")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (sim->parsed()) return cmd_simulate(o);
    if (fuse->parsed()) return cmd_fuse(o);
    if (train->parsed()) return cmd_train_gate(o);
    if (eval->parsed()) return cmd_evaluate(o);
    if (sel->parsed()) return cmd_selection_stats(o);
    if (wls->parsed()) return cmd_wls_demo(o);
  } catch (const cf::InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const cf::NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}

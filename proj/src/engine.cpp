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

#include "ctxfusion/engine.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "ctxfusion/config.hpp"

namespace ctxfusion {

using nlohmann::ordered_json;

// Sources ------------------------------------------------------------------------

SimulatedSource::SimulatedSource(GeneratorConfig cfg, std::size_t count,
                                 std::uint64_t first_scene_id)
    : cfg_(std::move(cfg)), branches_(cfg_.branch_set()) {
  cfg_.validate();
  scenes_.reserve(count);
  for (std::size_t i = 0; i < count; ++i) scenes_.push_back(generate_scene(cfg_, first_scene_id + i));
}

std::vector<double> SimulatedSource::features(std::size_t index) const {
  return stem_features(scene(index), cfg_);
}

BranchOutput SimulatedSource::branch_output(std::size_t index, BranchId branch) const {
  const auto key = std::make_pair(index, branch);
  if (auto it = cache_.find(key); it != cache_.end()) return it->second;
  auto b = std::find_if(branches_.begin(), branches_.end(),
                        [&](const BranchModel& m) { return m.id == branch; });
  if (b == branches_.end()) throw ConfigError("unknown branch id " + std::to_string(branch));
  const Scene& s = scene(index);
  Rng rng = branch_rng(cfg_.seed, s.id, branch);
  BranchOutput out = simulate_branch(*b, s, rng);
  out.features = features(index);
  return cache_.emplace(key, std::move(out)).first->second;
}

std::vector<BranchId> SimulatedSource::branch_ids() const {
  std::vector<BranchId> ids;
  for (const auto& b : branches_) ids.push_back(b.id);
  std::sort(ids.begin(), ids.end());
  return ids;
}

std::string SimulatedSource::branch_name(BranchId branch) const {
  for (const auto& b : branches_)
    if (b.id == branch) return b.name;
  return std::to_string(branch);
}

LogSource::LogSource(DetectionLog log) : log_(std::move(log)) {
  std::set<BranchId> ids;
  if (log_.header) {
    for (const auto& b : log_.header->branches) {
      ids.insert(b.id);
      names_[b.id] = b.name;
    }
  } else {
    for (const auto& b : default_branch_set()) names_[b.id] = b.name;
    for (const auto& [id, s] : log_.scenes)
      for (const auto& [branch, out] : s.branches) ids.insert(branch);
  }
  ids_.assign(ids.begin(), ids.end());
  for (const auto& [id, s] : log_.scenes) order_.push_back(id);
}

const Scene& LogSource::scene(std::size_t index) const { return log_.scenes.at(order_.at(index)).scene; }

std::vector<double> LogSource::features(std::size_t index) const {
  return log_.scenes.at(order_.at(index)).features;
}

BranchOutput LogSource::branch_output(std::size_t index, BranchId branch) const {
  const auto& s = log_.scenes.at(order_.at(index));
  auto it = s.branches.find(branch);
  if (it == s.branches.end())
    throw DataError("log has no record for scene " + std::to_string(s.scene.id) + ", branch " +
                    std::to_string(branch));
  return it->second;
}

std::string LogSource::branch_name(BranchId branch) const {
  auto it = names_.find(branch);
  return it == names_.end() || it->second.empty() ? std::to_string(branch) : it->second;
}

DetectionLog simulate_log(const GeneratorConfig& cfg, std::size_t scenes) {
  SimulatedSource source(cfg, scenes);
  DetectionLog log;
  log.header = make_log_header(source.branches(), scenes, static_cast<std::size_t>(stem_feature_dim()));
  for (std::size_t i = 0; i < source.size(); ++i) {
    LoggedScene ls;
    ls.scene = source.scene(i);
    ls.features = source.features(i);
    for (BranchId id : source.branch_ids()) ls.branches[id] = source.branch_output(i, id);
    log.scenes.emplace(ls.scene.id, std::move(ls));
  }
  return log;
}

// Pipeline ------------------------------------------------------------------------

GateKind parse_gate_kind(std::string_view name) {
  if (name == "knowledge") return GateKind::kKnowledge;
  if (name == "learned" || name == "deep") return GateKind::kLearned;
  if (name == "attention") return GateKind::kAttention;
  if (name == "optimal") return GateKind::kOptimal;
  if (name == "fixed" || name == "none") return GateKind::kFixed;
  throw ConfigError("unknown gate kind '" + std::string(name) + "'");
}

std::string_view to_string(GateKind kind) {
  switch (kind) {
    case GateKind::kKnowledge:
      return "knowledge";
    case GateKind::kLearned:
      return "learned";
    case GateKind::kAttention:
      return "attention";
    case GateKind::kOptimal:
      return "optimal";
    case GateKind::kFixed:
      return "fixed";
  }
  return "unknown";
}

namespace {

std::string gate_label(const PipelineConfig& cfg) {
  std::string label(to_string(cfg.gate));
  if ((cfg.gate == GateKind::kLearned || cfg.gate == GateKind::kAttention) && !cfg.gate_name.empty())
    label += ":" + cfg.gate_name;
  return label;
}

const LearnedGate& resolve_learned(const PipelineConfig& cfg, const GateSet& gates,
                                   const std::vector<BranchId>& ids) {
  auto it = gates.learned.find(cfg.gate_name);
  if (it == gates.learned.end())
    throw ConfigError("configuration '" + cfg.name + "' references unknown gate '" +
                      cfg.gate_name + "'");
  const LearnedGate& g = it->second;
  g.validate();
  if (g.attention_enabled != (cfg.gate == GateKind::kAttention))
    throw ConfigError("gate '" + cfg.gate_name + "' attention flag does not match gate kind '" +
                      std::string(to_string(cfg.gate)) + "'");
  std::vector<BranchId> sorted = g.branch_ids;
  std::sort(sorted.begin(), sorted.end());
  if (sorted != ids)
    throw ConfigError("gate '" + cfg.gate_name + "' ranks a different branch set");
  return g;
}

}  // namespace

std::vector<std::pair<std::string, std::string>> report_metadata(const PipelineConfig& cfg,
                                                                 int resolved_k) {
  std::string fixed;
  for (std::size_t i = 0; i < cfg.fixed_branches.size(); ++i)
    fixed += (i ? "+" : "") + std::to_string(cfg.fixed_branches[i]);
  return {{"config", cfg.name},
          {"gate", std::string(to_string(cfg.gate))},
          {"gate_name", cfg.gate_name},
          {"k", std::to_string(resolved_k)},
          {"fusion", std::string(to_string(cfg.fusion.algorithm))},
          {"branches", fixed}};
}

PipelineRun run_pipeline(const SceneSource& source, const PipelineConfig& cfg,
                         const GateSet& gates) {
  cfg.fusion.validate();
  const std::vector<BranchId> ids = source.branch_ids();
  if (ids.empty()) throw ConfigError("scene source has no branches");
  const int n = static_cast<int>(ids.size());

  int k = cfg.k == 0 ? n : cfg.k;
  const LearnedGate* learned = nullptr;
  switch (cfg.gate) {
    case GateKind::kKnowledge:
      gates.knowledge.validate(ids);
      break;
    case GateKind::kLearned:
    case GateKind::kAttention:
      learned = &resolve_learned(cfg, gates, ids);
      break;
    case GateKind::kFixed: {
      if (cfg.fixed_branches.empty())
        throw ConfigError("fixed configuration '" + cfg.name + "' lists no branches");
      for (BranchId b : cfg.fixed_branches)
        if (!std::binary_search(ids.begin(), ids.end(), b))
          throw ConfigError("fixed configuration '" + cfg.name + "' names unknown branch " +
                            std::to_string(b));
      k = static_cast<int>(cfg.fixed_branches.size());
      break;
    }
    case GateKind::kOptimal:
      break;
  }
  if (k < 1 || k > n) throw ConfigError("k = " + std::to_string(k) + " outside [1, " + std::to_string(n) + "]");

  PipelineRun run;
  run.trace.config_name = cfg.name;
  run.trace.gate_label = gate_label(cfg);
  run.trace.k = k;
  run.fused.reserve(source.size());

  for (std::size_t i = 0; i < source.size(); ++i) {
    const Scene& scene = source.scene(i);
    SceneTrace t;
    t.scene_id = scene.id;
    t.context = scene.context.label;
    std::map<BranchId, Detections> outputs;

    switch (cfg.gate) {
      case GateKind::kKnowledge:
        t.ranking = knowledge_rank(scene.context, gates.knowledge);
        break;
      case GateKind::kLearned:
      case GateKind::kAttention:
        t.ranking = learned_rank(source.features(i), *learned);
        break;
      case GateKind::kOptimal: {
        // Needs every branch's realized loss before it can rank.
        std::map<BranchId, double> losses;
        for (BranchId id : ids) {
          outputs[id] = source.branch_output(i, id).detections;
          t.executed.push_back(id);
          losses[id] = branch_loss(outputs[id], scene.objects, gates.loss_weights);
        }
        t.ranking = optimal_rank(losses);
        break;
      }
      case GateKind::kFixed: {
        std::map<BranchId, double> rank;
        for (std::size_t j = 0; j < cfg.fixed_branches.size(); ++j)
          rank[cfg.fixed_branches[j]] = static_cast<double>(j);
        double next = static_cast<double>(cfg.fixed_branches.size());
        for (BranchId id : ids)
          if (!rank.contains(id)) rank[id] = next++;
        t.ranking = ranking_from_losses(rank);
        break;
      }
    }

    t.selected = select_top_k(t.ranking, k);
    std::map<BranchId, Detections> chosen;
    for (BranchId id : t.selected) {
      if (auto it = outputs.find(id); it != outputs.end()) {
        chosen[id] = it->second;
      } else {
        chosen[id] = source.branch_output(i, id).detections;
        t.executed.push_back(id);
      }
    }
    t.fused = fuse(chosen, cfg.fusion);
    t.branch_detections = std::move(chosen);
    run.fused.push_back(t.fused);
    run.trace.scenes.push_back(std::move(t));
  }
  return run;
}

// Experiments -----------------------------------------------------------------------

std::vector<GateSample> gate_samples(const SceneSource& source, const std::vector<BranchId>& ids,
                                     const LossWeights& weights) {
  std::vector<GateSample> samples;
  samples.reserve(source.size());
  for (std::size_t i = 0; i < source.size(); ++i) {
    GateSample s;
    s.features = source.features(i);
    for (BranchId id : ids)
      s.losses.push_back(branch_loss(source.branch_output(i, id).detections,
                                     source.scene(i).objects, weights));
    samples.push_back(std::move(s));
  }
  return samples;
}

namespace {

// Training scenes live far away from evaluation ids.
constexpr std::uint64_t kTrainingSceneOffset = 1ULL << 40;

}  // namespace

GateSet prepare_gates(const SuiteConfig& suite) {
  GateSet gates;
  gates.knowledge = suite.knowledge;
  gates.loss_weights = suite.loss_weights;
  for (const auto& [name, path] : suite.gate_files) gates.learned[name] = load_gate(path);
  for (const auto& spec : suite.train_gates) {
    std::unique_ptr<SceneSource> train;
    if (suite.log) {
      if (!suite.train_log)
        throw ConfigError("training gate '" + spec.name + "' from a log needs train_log");
      train = std::make_unique<LogSource>(load_detection_log(*suite.train_log));
    } else {
      GeneratorConfig g = suite.generator;
      g.seed = derive_seed(suite.generator.seed, {stream::kGate, spec.seed});
      train = std::make_unique<SimulatedSource>(g, spec.scenes, kTrainingSceneOffset);
    }
    const auto ids = train->branch_ids();
    const auto samples = gate_samples(*train, ids, suite.loss_weights);
    GateHyperParams hp = spec.hp;
    if (hp.attention && hp.block_dim == 0) hp.block_dim = stem_block_dim();
    Rng rng = make_rng(suite.generator.seed, {stream::kGate, spec.seed, 1});
    gates.learned[spec.name] = train_gate(samples, ids, hp, rng).gate;
  }
  return gates;
}

ExperimentResult run_experiment(const SuiteConfig& suite, const SceneSource& source,
                                const GateSet& gates) {
  if (suite.configurations.empty()) throw ConfigError("suite lists no configurations");
  std::vector<GroundTruth> gts;
  gts.reserve(source.size());
  for (std::size_t i = 0; i < source.size(); ++i) gts.push_back(source.scene(i).objects);

  ExperimentResult result;
  for (const auto& cfg : suite.configurations) {
    PipelineRun run = run_pipeline(source, cfg, gates);
    EvalReport report = evaluate(run.fused, gts);
    report.metadata = report_metadata(cfg, run.trace.k);
    result.reports.push_back(std::move(report));
    result.traces.push_back(std::move(run.trace));
  }
  return result;
}

ExperimentResult run_experiment(const SuiteConfig& suite) {
  const GateSet gates = prepare_gates(suite);
  if (suite.log) {
    LogSource source(load_detection_log(*suite.log));
    return run_experiment(suite, source, gates);
  }
  SimulatedSource source(suite.generator, suite.scenes);
  return run_experiment(suite, source, gates);
}

SelectionStats branch_selection_stats(const std::vector<RunTrace>& traces,
                                      const std::set<ContextLabel>& contexts) {
  if (traces.empty()) throw InvalidInputError("selection stats need at least one trace");
  SelectionStats stats;
  for (const auto& trace : traces) {
    const auto key = std::make_pair(trace.gate_label, trace.k);
    if (stats.contains(key)) continue;
    std::map<BranchId, double> counts;
    std::size_t total = 0;
    for (const auto& s : trace.scenes) {
      if (!contexts.empty() && !contexts.contains(s.context)) continue;
      ++total;
      for (BranchId id : s.ranking.order) counts.try_emplace(id, 0.0);
      for (BranchId id : s.selected) counts[id] += 1.0;
    }
    if (total == 0) continue;
    for (auto& [id, c] : counts) c /= static_cast<double>(total);
    stats[key] = std::move(counts);
  }
  return stats;
}

std::string selection_stats_csv(const SelectionStats& stats,
                                const std::map<BranchId, std::string>& names) {
  std::set<BranchId> ids;
  for (const auto& [key, rates] : stats)
    for (const auto& [id, r] : rates) ids.insert(id);
  std::ostringstream out;
  out << std::setprecision(10) << "gate,k";
  for (BranchId id : ids) {
    auto it = names.find(id);
    out << ',' << (it == names.end() ? std::to_string(id) : it->second);
  }
  out << '\n';
  for (const auto& [key, rates] : stats) {
    out << key.first << ',' << key.second;
    for (BranchId id : ids) {
      auto it = rates.find(id);
      out << ',' << 100.0 * (it == rates.end() ? 0.0 : it->second);
    }
    out << '\n';
  }
  return out.str();
}

namespace {

ordered_json dets_json(const Detections& dets) {
  ordered_json arr = ordered_json::array();
  for (const auto& d : dets)
    arr.push_back({{"label", d.label},
                   {"score", d.score},
                   {"branch", d.branch},
                   {"box", {d.box.x1, d.box.y1, d.box.x2, d.box.y2}}});
  return arr;
}

Detections parse_dets(const nlohmann::json& arr) {
  Detections out;
  for (const auto& d : arr) {
    const auto box = d.at("box").get<std::vector<double>>();
    if (box.size() != 4) throw ParseError("trace box needs four coordinates", 1);
    out.push_back({{box[0], box[1], box[2], box[3]},
                   d.at("score").get<double>(),
                   d.at("label").get<int>(),
                   d.at("branch").get<BranchId>()});
  }
  return out;
}

}  // namespace

std::string trace_json(const RunTrace& trace) {
  ordered_json j;
  j["config"] = trace.config_name;
  j["gate"] = trace.gate_label;
  j["k"] = trace.k;
  ordered_json scenes = ordered_json::array();
  for (const auto& s : trace.scenes) {
    ordered_json r;
    r["scene"] = s.scene_id;
    r["context"] = std::string(to_string(s.context));
    r["order"] = s.ranking.order;
    ordered_json losses = ordered_json::array();
    for (BranchId id : s.ranking.order) losses.push_back(s.ranking.predicted_loss.at(id));
    r["predicted_loss"] = std::move(losses);
    r["selected"] = s.selected;
    r["executed"] = s.executed;
    ordered_json per_branch = ordered_json::object();
    for (const auto& [id, dets] : s.branch_detections) per_branch[std::to_string(id)] = dets_json(dets);
    r["branch_dets"] = std::move(per_branch);
    r["fused"] = dets_json(s.fused);
    scenes.push_back(std::move(r));
  }
  j["scenes"] = std::move(scenes);
  return j.dump() + "\n";
}

RunTrace parse_trace_json(const std::string& text) {
  RunTrace t;
  try {
    const auto j = nlohmann::json::parse(text);
    t.config_name = j.at("config").get<std::string>();
    t.gate_label = j.at("gate").get<std::string>();
    t.k = j.at("k").get<int>();
    for (const auto& r : j.at("scenes")) {
      SceneTrace s;
      s.scene_id = r.at("scene").get<std::uint64_t>();
      s.context = parse_context(r.at("context").get<std::string>());
      s.ranking.order = r.at("order").get<std::vector<BranchId>>();
      const auto losses = r.at("predicted_loss").get<std::vector<double>>();
      for (std::size_t i = 0; i < s.ranking.order.size() && i < losses.size(); ++i)
        s.ranking.predicted_loss[s.ranking.order[i]] = losses[i];
      s.selected = r.at("selected").get<std::vector<BranchId>>();
      s.executed = r.at("executed").get<std::vector<BranchId>>();
      for (const auto& [key, dets] : r.at("branch_dets").items())
        s.branch_detections[std::stoi(key)] = parse_dets(dets);
      s.fused = parse_dets(r.at("fused"));
      t.scenes.push_back(std::move(s));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed trace: ") + e.what(), 1);
  } catch (const std::invalid_argument& e) {
    throw ParseError(std::string("malformed trace branch id: ") + e.what(), 1);
  }
  return t;
}

void write_experiment_outputs(const SuiteConfig& suite, const ExperimentResult& result,
                              const std::map<BranchId, std::string>& names) {
  std::filesystem::create_directories(suite.output_dir);
  auto write = [&](const std::string& file, const std::string& body) {
    std::ofstream out(suite.output_dir / file);
    if (!out) throw DataError("cannot write '" + (suite.output_dir / file).string() + "'");
    out << body;
  };
  write("comparison.csv", reports_csv(result.reports));
  write("reports.json", reports_json(result.reports));
  write("selection.csv", selection_stats_csv(branch_selection_stats(result.traces), names));
  if (suite.write_traces)
    for (const auto& t : result.traces) write("trace_" + t.config_name + ".json", trace_json(t));
}

}  // namespace ctxfusion

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

#ifndef CTXFUSION_ENGINE_HPP
#define CTXFUSION_ENGINE_HPP

// End-to-end selective fusion: stem features -> gate ranking -> top-k branch
// execution -> fusion block, plus experiment suites over many configurations.

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "ctxfusion/boxfusion.hpp"
#include "ctxfusion/detection_log.hpp"
#include "ctxfusion/gating.hpp"
#include "ctxfusion/scenario.hpp"
#include "ctxfusion/scoring.hpp"

namespace ctxfusion {

// Scene sources ----------------------------------------------------------------

/// Where scenes, stem features and branch outputs come from.
class SceneSource {
 public:
  virtual ~SceneSource() = default;
  virtual std::size_t size() const = 0;
  virtual const Scene& scene(std::size_t index) const = 0;
  virtual std::vector<double> features(std::size_t index) const = 0;
  /// Runs (or reads) one branch on one scene. Must be deterministic.
  virtual BranchOutput branch_output(std::size_t index, BranchId branch) const = 0;
  virtual std::vector<BranchId> branch_ids() const = 0;
  virtual std::string branch_name(BranchId branch) const = 0;
};

/// Scenes drawn from a generator. Scene i has id first_scene_id + i; branch
/// outputs come from the (seed, scene, branch) stream and are memoized, so
/// every configuration sees the same realizations.
class SimulatedSource : public SceneSource {
 public:
  SimulatedSource(GeneratorConfig cfg, std::size_t count, std::uint64_t first_scene_id = 0);

  std::size_t size() const override { return scenes_.size(); }
  const Scene& scene(std::size_t index) const override { return scenes_.at(index); }
  std::vector<double> features(std::size_t index) const override;
  BranchOutput branch_output(std::size_t index, BranchId branch) const override;
  std::vector<BranchId> branch_ids() const override;
  std::string branch_name(BranchId branch) const override;

  const GeneratorConfig& config() const { return cfg_; }
  const std::vector<BranchModel>& branches() const { return branches_; }
  /// Number of distinct branch simulations performed so far.
  std::size_t simulations() const { return cache_.size(); }

 private:
  GeneratorConfig cfg_;
  std::vector<BranchModel> branches_;
  std::vector<Scene> scenes_;
  mutable std::map<std::pair<std::size_t, BranchId>, BranchOutput> cache_;
};

class LogSource : public SceneSource {
 public:
  explicit LogSource(DetectionLog log);

  std::size_t size() const override { return order_.size(); }
  const Scene& scene(std::size_t index) const override;
  std::vector<double> features(std::size_t index) const override;
  BranchOutput branch_output(std::size_t index, BranchId branch) const override;
  std::vector<BranchId> branch_ids() const override { return ids_; }
  std::string branch_name(BranchId branch) const override;

 private:
  DetectionLog log_;
  std::vector<std::uint64_t> order_;
  std::vector<BranchId> ids_;
  std::map<BranchId, std::string> names_;
};

/// Builds the simulated source and writes it out as a detection log with
/// every branch executed on every scene.
DetectionLog simulate_log(const GeneratorConfig& cfg, std::size_t scenes);

// Pipeline ---------------------------------------------------------------------

enum class GateKind { kKnowledge, kLearned, kAttention, kOptimal, kFixed };
GateKind parse_gate_kind(std::string_view name);
std::string_view to_string(GateKind kind);

struct PipelineConfig {
  std::string name;
  GateKind gate{GateKind::kKnowledge};
  /// Top-k; 0 means all branches.
  int k{3};
  FusionConfig fusion;
  /// Branches run by a kFixed pipeline.
  std::vector<BranchId> fixed_branches;
  /// Learned/attention gate to use, by name.
  std::string gate_name;
};

/// Frozen gate artifacts a pipeline may reference.
struct GateSet {
  KnowledgeTable knowledge = KnowledgeTable::defaults();
  std::map<std::string, LearnedGate> learned;
  LossWeights loss_weights;
};

struct SceneTrace {
  std::uint64_t scene_id{0};
  ContextLabel context{ContextLabel::kCity};
  GateRanking ranking;
  std::vector<BranchId> selected;
  /// Branches actually run; equals `selected` except for optimal gating.
  std::vector<BranchId> executed;
  std::map<BranchId, Detections> branch_detections;
  Detections fused;
};

struct RunTrace {
  std::string config_name;
  std::string gate_label;
  int k{0};
  std::vector<SceneTrace> scenes;
};

struct PipelineRun {
  std::vector<Detections> fused;
  RunTrace trace;
};

PipelineRun run_pipeline(const SceneSource& source, const PipelineConfig& cfg,
                         const GateSet& gates);

/// Configuration columns attached to an EvalReport.
std::vector<std::pair<std::string, std::string>> report_metadata(const PipelineConfig& cfg,
                                                                 int resolved_k);

// Experiments ------------------------------------------------------------------

struct GateTrainingSpec {
  std::string name;
  GateHyperParams hp;
  /// Simulated training scenes (ids disjoint from evaluation scenes).
  std::size_t scenes{500};
  std::uint64_t seed{0};
};

struct SuiteConfig {
  /// Simulated evaluation scenes, unless `log` is set.
  GeneratorConfig generator;
  std::size_t scenes{500};
  std::optional<std::filesystem::path> log;
  /// Log used to train gates when evaluating from a log.
  std::optional<std::filesystem::path> train_log;
  std::vector<PipelineConfig> configurations;
  KnowledgeTable knowledge = KnowledgeTable::defaults();
  std::map<std::string, std::filesystem::path> gate_files;
  std::vector<GateTrainingSpec> train_gates;
  LossWeights loss_weights;
  std::filesystem::path output_dir{"out"};
  bool write_traces{false};
};

struct ExperimentResult {
  std::vector<EvalReport> reports;
  std::vector<RunTrace> traces;
};

/// Per-branch losses as gate training samples.
std::vector<GateSample> gate_samples(const SceneSource& source, const std::vector<BranchId>& ids,
                                     const LossWeights& weights);

/// Resolves gate files and trains the listed gates (before any pipeline runs).
GateSet prepare_gates(const SuiteConfig& suite);

/// Every configuration on the same scene set; reports follow suite order.
ExperimentResult run_experiment(const SuiteConfig& suite);
ExperimentResult run_experiment(const SuiteConfig& suite, const SceneSource& source,
                                const GateSet& gates);

/// Fraction of scenes in which each branch was selected, keyed by
/// (gate label, k). The optional filter restricts to scenes of those contexts.
using SelectionStats = std::map<std::pair<std::string, int>, std::map<BranchId, double>>;
SelectionStats branch_selection_stats(const std::vector<RunTrace>& traces,
                                      const std::set<ContextLabel>& contexts = {});

std::string selection_stats_csv(const SelectionStats& stats,
                                const std::map<BranchId, std::string>& names);

std::string trace_json(const RunTrace& trace);
RunTrace parse_trace_json(const std::string& text);

/// Writes comparison.csv, reports.json, selection.csv and optional traces.
void write_experiment_outputs(const SuiteConfig& suite, const ExperimentResult& result,
                              const std::map<BranchId, std::string>& names);

}  // namespace ctxfusion

#endif  // CTXFUSION_ENGINE_HPP

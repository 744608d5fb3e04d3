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

#include "ctxfusion/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "ctxfusion/errors.hpp"

#ifndef CTXFUSION_DEFAULT_CONFIG_DIR
#define CTXFUSION_DEFAULT_CONFIG_DIR "config"
#endif

namespace ctxfusion {

namespace fs = std::filesystem;

namespace {

template <typename F>
auto guarded(const std::string& what, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(what + ": " + e.what());
  }
}

template <typename T>
void read_opt(const Json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

Json row_major(const Eigen::MatrixXd& m) {
  Json arr = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) arr.push_back(m(r, c));
  return arr;
}

Eigen::MatrixXd from_row_major(const Json& arr, Eigen::Index rows, Eigen::Index cols,
                               const char* name) {
  const auto v = arr.get<std::vector<double>>();
  if (static_cast<Eigen::Index>(v.size()) != rows * cols)
    throw ConfigError(std::string("'") + name + "' has " + std::to_string(v.size()) +
                      " values, expected " + std::to_string(rows * cols));
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = v[static_cast<std::size_t>(r * cols + c)];
  return m;
}

Eigen::VectorXd vector_from(const Json& arr) {
  const auto v = arr.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

// A number is a 1x1 matrix; otherwise a list of rows.
Eigen::MatrixXd matrix_from(const Json& j, const char* name) {
  if (j.is_number()) return Eigen::MatrixXd::Constant(1, 1, j.get<double>());
  const auto rows = j.get<std::vector<std::vector<double>>>();
  if (rows.empty()) throw ConfigError(std::string("'") + name + "' is empty");
  Eigen::MatrixXd m(rows.size(), rows.front().size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != rows.front().size())
      throw ConfigError(std::string("'") + name + "' has ragged rows");
    for (std::size_t c = 0; c < rows[r].size(); ++c)
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
  }
  return m;
}

Modality parse_modality(const std::string& name) {
  if (name == "camera") return Modality::kCamera;
  if (name == "radar") return Modality::kRadar;
  if (name == "lidar") return Modality::kLidar;
  throw ConfigError("unknown modality '" + name + "'");
}

ContextLabel context_key(const std::string& name) {
  try {
    return parse_context(name);
  } catch (const LookupError& e) {
    throw ConfigError(e.what());
  }
}

// Per-class or per-context weights: an array in index order or an object by name.
std::vector<double> mix_from(const Json& j, std::size_t n, bool classes) {
  if (j.is_array()) {
    auto v = j.get<std::vector<double>>();
    if (v.size() != n) throw ConfigError("mix needs " + std::to_string(n) + " weights");
    return v;
  }
  std::vector<double> v(n, 0.0);
  for (const auto& [key, w] : j.items()) {
    const std::size_t idx = classes ? static_cast<std::size_t>(parse_class_label(key) - 1)
                                    : static_cast<std::size_t>(index_of(context_key(key)));
    v[idx] = w.get<double>();
  }
  return v;
}

}  // namespace

fs::path config_dir() {
  if (const char* env = std::getenv("CTXFUSION_CONFIG_DIR"); env && *env) return env;
  return CTXFUSION_DEFAULT_CONFIG_DIR;
}

fs::path resolve_config_path(const fs::path& path) {
  if (fs::exists(path) || path.is_absolute()) return path;
  const fs::path alt = config_dir() / path;
  return fs::exists(alt) ? alt : path;
}

Json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path.string() + "'");
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError("'" + path.string() + "' is not valid JSON: " + e.what(), 0);
  }
}

void write_text_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw DataError("write to '" + path.string() + "' failed");
}

int parse_class_label(const std::string& key) {
  for (int i = 0; i < kNumClasses; ++i)
    if (kClassNames[static_cast<std::size_t>(i)] == key) return i + 1;
  try {
    std::size_t used = 0;
    const int label = std::stoi(key, &used);
    if (used == key.size() && is_valid_label(label)) return label;
  } catch (const std::exception&) {
  }
  throw ConfigError("unknown class '" + key + "'");
}

// Calibration ----------------------------------------------------------------

Calibration calibration_from_json(const Json& j) {
  return guarded("calibration", [&] {
    Calibration c;
    const auto& g = j.at("grid");
    c.grid.gamma = g.at("gamma").get<double>();
    c.grid.w = g.at("w").get<int>();
    c.grid.h = g.at("h").get<int>();
    const auto& e = j.at("extrinsics");
    c.extrinsics.rotation = from_row_major(e.at("rotation"), 3, 3, "rotation");
    c.extrinsics.translation = from_row_major(e.at("translation"), 3, 1, "translation");
    const auto& k = j.at("intrinsics");
    c.intrinsics.fx = k.at("fx").get<double>();
    c.intrinsics.fy = k.at("fy").get<double>();
    c.intrinsics.cx = k.at("cx").get<double>();
    c.intrinsics.cy = k.at("cy").get<double>();
    read_opt(k, "image_width", c.intrinsics.image_width);
    read_opt(k, "image_height", c.intrinsics.image_height);
    if (j.contains("class_heights"))
      for (const auto& [key, h] : j.at("class_heights").items())
        c.class_heights.heights[parse_class_label(key)] = h.get<double>();
    c.validate();
    return c;
  });
}

Json calibration_to_json(const Calibration& c) {
  Json j;
  j["grid"] = {{"gamma", c.grid.gamma}, {"w", c.grid.w}, {"h", c.grid.h}};
  j["extrinsics"] = {{"rotation", row_major(c.extrinsics.rotation)},
                     {"translation", row_major(c.extrinsics.translation)}};
  j["intrinsics"] = {{"fx", c.intrinsics.fx},
                     {"fy", c.intrinsics.fy},
                     {"cx", c.intrinsics.cx},
                     {"cy", c.intrinsics.cy},
                     {"image_width", c.intrinsics.image_width},
                     {"image_height", c.intrinsics.image_height}};
  Json heights = Json::object();
  for (const auto& [label, h] : c.class_heights.heights)
    heights[std::string(kClassNames[static_cast<std::size_t>(label - 1)])] = h;
  j["class_heights"] = heights;
  return j;
}

// Generator --------------------------------------------------------------------

ErrorProfile profile_from_json(const Json& j, const ErrorProfile& base) {
  return guarded("error profile", [&] {
    ErrorProfile p = base;
    read_opt(j, "miss_rate", p.miss_rate);
    read_opt(j, "fp_rate", p.fp_rate);
    read_opt(j, "loc_sigma", p.loc_sigma);
    read_opt(j, "score_mean", p.score_mean);
    read_opt(j, "score_sigma", p.score_sigma);
    p.validate();
    return p;
  });
}

Json profile_to_json(const ErrorProfile& p) {
  return {{"miss_rate", p.miss_rate},
          {"fp_rate", p.fp_rate},
          {"loc_sigma", p.loc_sigma},
          {"score_mean", p.score_mean},
          {"score_sigma", p.score_sigma}};
}

GeneratorConfig generator_from_json(const Json& j) {
  return guarded("generator config", [&] {
    GeneratorConfig cfg;
    if (j.contains("image")) {
      const auto wh = j.at("image").get<std::vector<double>>();
      if (wh.size() != 2) throw ConfigError("'image' needs [width, height]");
      cfg.image_width = wh[0];
      cfg.image_height = wh[1];
    }
    read_opt(j, "image_width", cfg.image_width);
    read_opt(j, "image_height", cfg.image_height);
    read_opt(j, "min_objects", cfg.min_objects);
    read_opt(j, "max_objects", cfg.max_objects);
    if (j.contains("class_mix")) cfg.class_mix = mix_from(j.at("class_mix"), kNumClasses, true);
    if (j.contains("context_mix"))
      cfg.context_mix = mix_from(j.at("context_mix"), kNumContexts, false);
    if (j.contains("class_sizes"))
      for (const auto& [key, wh] : j.at("class_sizes").items()) {
        const auto v = wh.get<std::vector<double>>();
        if (v.size() != 2) throw ConfigError("class size needs [width, height]");
        cfg.class_sizes[static_cast<std::size_t>(parse_class_label(key) - 1)] = {v[0], v[1]};
      }
    read_opt(j, "size_jitter", cfg.size_jitter);
    read_opt(j, "max_overlap", cfg.max_overlap);
    read_opt(j, "placement_retries", cfg.placement_retries);
    read_opt(j, "context_noise", cfg.context_noise);
    read_opt(j, "quality_noise", cfg.quality_noise);
    read_opt(j, "scenes", cfg.scenes);
    read_opt(j, "seed", cfg.seed);
    if (j.contains("suitability"))
      for (const auto& [ctx, row] : j.at("suitability").items())
        for (const auto& [mod, ok] : row.items())
          cfg.suitability.table[context_key(ctx)][parse_modality(mod)] = ok.get<bool>();
    if (j.contains("rules")) {
      const auto& r = j.at("rules");
      if (r.contains("good")) cfg.rules.good = profile_from_json(r.at("good"), cfg.rules.good);
      if (r.contains("bad")) cfg.rules.bad = profile_from_json(r.at("bad"), cfg.rules.bad);
      read_opt(r, "conflict_blend", cfg.rules.conflict_blend);
    }
    if (j.contains("branches")) {
      for (const auto& b : j.at("branches")) {
        BranchModel m;
        m.id = b.at("id").get<BranchId>();
        read_opt(b, "name", m.name);
        for (const auto& s : b.at("sensors")) {
          try {
            m.sensors.push_back(parse_sensor(s.get<std::string>()));
          } catch (const LookupError& e) {
            throw ConfigError(e.what());
          }
        }
        for (ContextLabel ctx : kAllContexts)
          m.profile[ctx] = derive_profile(m.sensors, ctx, cfg.suitability, cfg.rules);
        if (b.contains("profiles"))
          for (const auto& [ctx, p] : b.at("profiles").items())
            m.profile[context_key(ctx)] = profile_from_json(p, m.profile[context_key(ctx)]);
        cfg.branches.push_back(std::move(m));
      }
    }
    cfg.validate();
    return cfg;
  });
}

Json generator_to_json(const GeneratorConfig& cfg) {
  Json j;
  j["image"] = {cfg.image_width, cfg.image_height};
  j["min_objects"] = cfg.min_objects;
  j["max_objects"] = cfg.max_objects;
  Json cmix = Json::object(), xmix = Json::object(), sizes = Json::object();
  for (int i = 0; i < kNumClasses; ++i) {
    const std::string name(kClassNames[static_cast<std::size_t>(i)]);
    cmix[name] = cfg.class_mix[static_cast<std::size_t>(i)];
    const auto& s = cfg.class_sizes[static_cast<std::size_t>(i)];
    sizes[name] = {s.width, s.height};
  }
  for (ContextLabel c : kAllContexts)
    xmix[std::string(to_string(c))] = cfg.context_mix[static_cast<std::size_t>(index_of(c))];
  j["class_mix"] = cmix;
  j["context_mix"] = xmix;
  j["class_sizes"] = sizes;
  j["size_jitter"] = cfg.size_jitter;
  j["max_overlap"] = cfg.max_overlap;
  j["placement_retries"] = cfg.placement_retries;
  j["context_noise"] = cfg.context_noise;
  j["quality_noise"] = cfg.quality_noise;
  j["scenes"] = cfg.scenes;
  j["seed"] = cfg.seed;
  Json suit = Json::object();
  for (const auto& [ctx, row] : cfg.suitability.table) {
    Json r = Json::object();
    for (const auto& [mod, ok] : row)
      r[mod == Modality::kCamera ? "camera" : mod == Modality::kRadar ? "radar" : "lidar"] = ok;
    suit[std::string(to_string(ctx))] = r;
  }
  j["suitability"] = suit;
  j["rules"] = {{"good", profile_to_json(cfg.rules.good)},
                {"bad", profile_to_json(cfg.rules.bad)},
                {"conflict_blend", cfg.rules.conflict_blend}};
  return j;
}

// Fusion, knowledge, gates --------------------------------------------------------

FusionConfig fusion_from_json(const Json& j) {
  return guarded("fusion config", [&] {
    FusionConfig cfg;
    if (j.contains("algorithm")) cfg.algorithm = parse_fusion_algorithm(j.at("algorithm").get<std::string>());
    read_opt(j, "iou_threshold", cfg.iou_threshold);
    read_opt(j, "skip_box_threshold", cfg.skip_box_threshold);
    read_opt(j, "sigma", cfg.sigma);
    if (j.contains("branch_weights"))
      for (const auto& [key, w] : j.at("branch_weights").items())
        cfg.branch_weights[std::stoi(key)] = w.get<double>();
    cfg.validate();
    return cfg;
  });
}

Json fusion_to_json(const FusionConfig& cfg) {
  Json weights = Json::object();
  for (const auto& [id, w] : cfg.branch_weights) weights[std::to_string(id)] = w;
  return {{"algorithm", std::string(to_string(cfg.algorithm))},
          {"iou_threshold", cfg.iou_threshold},
          {"skip_box_threshold", cfg.skip_box_threshold},
          {"sigma", cfg.sigma},
          {"branch_weights", weights}};
}

KnowledgeTable knowledge_from_json(const Json& j) {
  return guarded("knowledge table", [&] {
    KnowledgeTable t;
    for (const auto& [ctx, ids] : j.items()) t.order[context_key(ctx)] = ids.get<std::vector<BranchId>>();
    return t;
  });
}

Json knowledge_to_json(const KnowledgeTable& table) {
  Json j = Json::object();
  for (const auto& [ctx, ids] : table.order) j[std::string(to_string(ctx))] = ids;
  return j;
}

LearnedGate gate_from_json(const Json& j) {
  return guarded("gate", [&] {
    LearnedGate g;
    g.input_dim = j.at("input_dim").get<int>();
    g.hidden_dim = j.at("hidden_dim").get<int>();
    g.block_dim = j.value("block_dim", 0);
    g.attention_enabled = j.value("attention", false);
    g.branch_ids = j.at("branches").get<std::vector<BranchId>>();
    if (g.input_dim < 1 || g.hidden_dim < 1 || g.branch_ids.empty())
      throw ConfigError("gate dimensions must be positive");
    if (g.attention_enabled && (g.block_dim < 1 || g.input_dim % g.block_dim != 0))
      throw ConfigError("attention gate needs block_dim dividing input_dim");
    const Eigen::Index h = g.hidden_dim, out = g.output_dim(), in = g.pooled_dim();
    g.w1 = from_row_major(j.at("w1"), h, in, "w1");
    g.b1 = from_row_major(j.at("b1"), h, 1, "b1");
    g.w2 = from_row_major(j.at("w2"), out, h, "w2");
    g.b2 = from_row_major(j.at("b2"), out, 1, "b2");
    if (g.attention_enabled) g.attention = from_row_major(j.at("attention_vector"), g.block_dim, 1, "attention_vector");
    g.validate();
    return g;
  });
}

Json gate_to_json(const LearnedGate& g) {
  Json j;
  j["input_dim"] = g.input_dim;
  j["hidden_dim"] = g.hidden_dim;
  j["block_dim"] = g.block_dim;
  j["attention"] = g.attention_enabled;
  j["branches"] = g.branch_ids;
  j["w1"] = row_major(g.w1);
  j["b1"] = row_major(g.b1);
  j["w2"] = row_major(g.w2);
  j["b2"] = row_major(g.b2);
  if (g.attention_enabled) j["attention_vector"] = row_major(g.attention);
  return j;
}

LearnedGate load_gate(const fs::path& path) { return gate_from_json(read_json_file(path)); }

void save_gate(const fs::path& path, const LearnedGate& gate) {
  write_text_file(path, gate_to_json(gate).dump(1) + "\n");
}

GateHyperParams hyperparams_from_json(const Json& j, GateHyperParams hp) {
  return guarded("gate hyperparameters", [&] {
    read_opt(j, "hidden_dim", hp.hidden_dim);
    read_opt(j, "epochs", hp.epochs);
    read_opt(j, "learning_rate", hp.learning_rate);
    read_opt(j, "init_scale", hp.init_scale);
    read_opt(j, "attention", hp.attention);
    read_opt(j, "block_dim", hp.block_dim);
    if (j.contains("optimizer")) {
      const auto name = j.at("optimizer").get<std::string>();
      if (name == "sgd") hp.optimizer = GateOptimizer::kSgd;
      else if (name == "adam") hp.optimizer = GateOptimizer::kAdam;
      else throw ConfigError("unknown optimizer '" + name + "'");
    }
    read_opt(j, "adam_beta1", hp.adam_beta1);
    read_opt(j, "adam_beta2", hp.adam_beta2);
    read_opt(j, "adam_epsilon", hp.adam_epsilon);
    return hp;
  });
}

// Experiments ---------------------------------------------------------------------

MisspecificationConfig misspecification_from_json(const Json& j) {
  return guarded("misspecification config", [&] {
    MisspecificationConfig cfg;
    cfg.true_y = vector_from(j.at("true_y"));
    for (const auto& s : j.at("sensors")) {
      SensorSpec spec;
      spec.name = s.value("name", "sensor" + std::to_string(cfg.sensors.size()));
      spec.declared.H = matrix_from(s.at("H"), "H");
      spec.declared.R = matrix_from(s.at("R"), "R");
      spec.true_covariance =
          s.contains("true_covariance") ? matrix_from(s.at("true_covariance"), "true_covariance")
                                        : spec.declared.R;
      cfg.sensors.push_back(std::move(spec));
    }
    for (const auto& s : j.at("subsets")) {
      SubsetSpec sub;
      sub.id = s.at("id").get<std::string>();
      sub.sensors = s.at("sensors").get<std::vector<int>>();
      for (int idx : sub.sensors)
        if (idx < 0 || idx >= static_cast<int>(cfg.sensors.size()))
          throw ConfigError("subset '" + sub.id + "' names unknown sensor " + std::to_string(idx));
      cfg.subsets.push_back(std::move(sub));
    }
    read_opt(j, "trials", cfg.trials);
    read_opt(j, "seed", cfg.seed);
    return cfg;
  });
}

PipelineConfig pipeline_from_json(const Json& j, const FusionConfig& default_fusion) {
  return guarded("configuration", [&] {
    PipelineConfig p;
    p.name = j.at("name").get<std::string>();
    p.gate = parse_gate_kind(j.value("gate", std::string("knowledge")));
    if (j.contains("k")) {
      const auto& k = j.at("k");
      if (k.is_string()) {
        if (k.get<std::string>() != "all") throw ConfigError("k must be a number or \"all\"");
        p.k = 0;
      } else {
        p.k = k.get<int>();
        if (p.k < 1) throw ConfigError("k must be at least 1");
      }
    }
    p.fusion = j.contains("fusion") ? fusion_from_json(j.at("fusion")) : default_fusion;
    read_opt(j, "branches", p.fixed_branches);
    read_opt(j, "gate_name", p.gate_name);
    return p;
  });
}

SuiteConfig suite_from_json(const Json& j, const fs::path& base_dir) {
  auto rel = [&](const std::string& p) {
    const fs::path path(p);
    if (path.is_absolute() || base_dir.empty()) return resolve_config_path(path);
    const fs::path joined = base_dir / path;
    return fs::exists(joined) ? joined : resolve_config_path(path);
  };
  return guarded("suite", [&] {
    SuiteConfig s;
    if (j.contains("generator")) {
      const auto& g = j.at("generator");
      s.generator = g.is_string() ? generator_from_json(read_json_file(rel(g.get<std::string>())))
                                  : generator_from_json(g);
    }
    s.scenes = j.value("scenes", s.generator.scenes);
    if (j.contains("seed")) s.generator.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("log")) s.log = rel(j.at("log").get<std::string>());
    if (j.contains("train_log")) s.train_log = rel(j.at("train_log").get<std::string>());
    const FusionConfig fusion = j.contains("fusion") ? fusion_from_json(j.at("fusion")) : FusionConfig{};
    for (const auto& c : j.at("configurations")) s.configurations.push_back(pipeline_from_json(c, fusion));
    if (j.contains("knowledge")) {
      const auto& k = j.at("knowledge");
      s.knowledge = k.is_string() ? knowledge_from_json(read_json_file(rel(k.get<std::string>())))
                                  : knowledge_from_json(k);
    }
    if (j.contains("gates"))
      for (const auto& [name, path] : j.at("gates").items()) s.gate_files[name] = rel(path.get<std::string>());
    if (j.contains("train_gates"))
      for (const auto& t : j.at("train_gates")) {
        GateTrainingSpec spec;
        spec.name = t.at("name").get<std::string>();
        spec.hp = hyperparams_from_json(t);
        read_opt(t, "scenes", spec.scenes);
        read_opt(t, "seed", spec.seed);
        s.train_gates.push_back(std::move(spec));
      }
    if (j.contains("loss_weights")) {
      read_opt(j.at("loss_weights"), "miss", s.loss_weights.miss);
      read_opt(j.at("loss_weights"), "false_positive", s.loss_weights.false_positive);
    }
    if (j.contains("output_dir")) s.output_dir = j.at("output_dir").get<std::string>();
    read_opt(j, "write_traces", s.write_traces);
    if (s.configurations.empty()) throw ConfigError("suite lists no configurations");
    return s;
  });
}

SuiteConfig load_suite(const fs::path& path) {
  const fs::path resolved = resolve_config_path(path);
  return suite_from_json(read_json_file(resolved), resolved.parent_path());
}

}  // namespace ctxfusion

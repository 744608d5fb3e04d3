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

#ifndef CTXFUSION_CONFIG_HPP
#define CTXFUSION_CONFIG_HPP

// JSON readers and writers for every configuration and artifact file.

#include <filesystem>
#include <string>

#include <json.hpp>

#include "ctxfusion/boxfusion.hpp"
#include "ctxfusion/engine.hpp"
#include "ctxfusion/estimation.hpp"
#include "ctxfusion/gating.hpp"
#include "ctxfusion/geometry.hpp"
#include "ctxfusion/scenario.hpp"

namespace ctxfusion {

using Json = nlohmann::json;

/// $CTXFUSION_CONFIG_DIR, else the directory shipped with the sources.
std::filesystem::path config_dir();

/// `path` as given when it exists, otherwise relative to config_dir().
std::filesystem::path resolve_config_path(const std::filesystem::path& path);

/// Throws ConfigError when the file is missing and ParseError when it is not JSON.
Json read_json_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

/// Accepts a class name ("car") or its 1-based number.
int parse_class_label(const std::string& key);

Calibration calibration_from_json(const Json& j);
Json calibration_to_json(const Calibration& c);

ErrorProfile profile_from_json(const Json& j, const ErrorProfile& base = {});
Json profile_to_json(const ErrorProfile& p);

/// Keys override the defaults; absent keys keep them.
GeneratorConfig generator_from_json(const Json& j);
Json generator_to_json(const GeneratorConfig& cfg);

FusionConfig fusion_from_json(const Json& j);
Json fusion_to_json(const FusionConfig& cfg);

KnowledgeTable knowledge_from_json(const Json& j);
Json knowledge_to_json(const KnowledgeTable& table);

LearnedGate gate_from_json(const Json& j);
Json gate_to_json(const LearnedGate& gate);
LearnedGate load_gate(const std::filesystem::path& path);
void save_gate(const std::filesystem::path& path, const LearnedGate& gate);

GateHyperParams hyperparams_from_json(const Json& j, GateHyperParams base = {});

MisspecificationConfig misspecification_from_json(const Json& j);

PipelineConfig pipeline_from_json(const Json& j, const FusionConfig& default_fusion = {});

/// Relative paths inside the suite resolve against `base_dir`.
SuiteConfig suite_from_json(const Json& j, const std::filesystem::path& base_dir = {});
SuiteConfig load_suite(const std::filesystem::path& path);

}  // namespace ctxfusion

#endif  // CTXFUSION_CONFIG_HPP

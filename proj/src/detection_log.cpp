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

#include "ctxfusion/detection_log.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace ctxfusion {

using nlohmann::json;

namespace {

BoundingBox box_from(const json& j) {
  if (!j.is_array() || j.size() != 4) throw std::invalid_argument("box must have 4 numbers");
  BoundingBox b{j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
  if (!b.valid()) throw std::invalid_argument("box violates x1 <= x2, y1 <= y2");
  return b;
}

json box_to(const BoundingBox& b) { return json::array({b.x1, b.y1, b.x2, b.y2}); }

json record_json(const LoggedScene& s, const BranchOutput& out) {
  json gt = json::array();
  for (const auto& o : s.scene.objects) gt.push_back({{"label", o.label}, {"box", box_to(o.box)}});
  json dets = json::array();
  for (const auto& d : out.detections)
    dets.push_back({{"label", d.label}, {"score", d.score}, {"box", box_to(d.box)}});
  json rec = {{"scene", s.scene.id},
              {"context", std::string(to_string(s.scene.context.label))},
              {"gt", std::move(gt)},
              {"branch", out.branch},
              {"features", s.features},
              {"dets", std::move(dets)}};
  if (s.scene.image_width > 0 && s.scene.image_height > 0)
    rec["image"] = json::array({s.scene.image_width, s.scene.image_height});
  return rec;
}

}  // namespace

std::size_t DetectionLog::record_count() const {
  std::size_t n = 0;
  for (const auto& [id, s] : scenes) n += s.branches.size();
  return n;
}

LogHeader make_log_header(const std::vector<BranchModel>& branches, std::size_t scenes,
                          std::size_t feature_dim) {
  LogHeader h;
  h.scenes = scenes;
  h.feature_dim = feature_dim;
  for (const auto& b : branches) h.branches.push_back({b.id, b.name});
  return h;
}

DetectionLog read_detection_log(std::istream& in) {
  DetectionLog log;
  std::set<BranchId> known;
  for (const auto& b : default_branch_set()) known.insert(b.id);

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(std::string("malformed JSON: ") + e.what(), line_no);
    }
    if (!j.is_object()) throw ParseError("record must be a JSON object", line_no);

    if (j.contains("header")) {
      if (log.header || !log.scenes.empty())
        throw ParseError("header must be the first record", line_no);
      try {
        const json& h = j.at("header");
        LogHeader hdr;
        hdr.version = h.value("version", 1);
        hdr.scenes = h.value("scenes", std::size_t{0});
        hdr.feature_dim = h.value("feature_dim", std::size_t{0});
        known.clear();
        for (const auto& b : h.at("branches")) {
          hdr.branches.push_back({b.at("id").get<BranchId>(), b.value("name", std::string{})});
          known.insert(hdr.branches.back().id);
        }
        log.header = std::move(hdr);
      } catch (const json::exception& e) {
        throw ParseError(std::string("malformed header: ") + e.what(), line_no);
      }
      continue;
    }

    std::uint64_t scene_id = 0;
    BranchId branch = 0;
    Scene scene;
    BranchOutput out;
    std::vector<double> features;
    try {
      scene_id = j.at("scene").get<std::uint64_t>();
      branch = j.at("branch").get<BranchId>();
      scene.id = scene_id;
      scene.context = Context::make(parse_context(j.at("context").get<std::string>()));
      for (const auto& g : j.at("gt")) {
        const int label = g.at("label").get<int>();
        if (!is_valid_label(label)) throw std::invalid_argument("gt label out of range");
        scene.objects.push_back({label, box_from(g.at("box"))});
      }
      if (j.contains("image")) {
        scene.image_width = j.at("image").at(0).get<double>();
        scene.image_height = j.at("image").at(1).get<double>();
      }
      features = j.value("features", std::vector<double>{});
      out.branch = branch;
      out.features = features;
      for (const auto& d : j.at("dets")) {
        Detection det{box_from(d.at("box")), d.at("score").get<double>(), d.at("label").get<int>(),
                      branch};
        if (!det.valid()) throw std::invalid_argument("detection violates score/label range");
        out.detections.push_back(det);
      }
    } catch (const json::exception& e) {
      throw ParseError(std::string("malformed record: ") + e.what(), line_no);
    } catch (const std::invalid_argument& e) {
      throw ParseError(std::string("malformed record: ") + e.what(), line_no);
    } catch (const LookupError& e) {
      throw ParseError(e.what(), line_no);
    }

    if (!known.contains(branch))
      throw SchemaError("line " + std::to_string(line_no) + ": unknown branch id " +
                        std::to_string(branch));
    if (log.header && log.header->feature_dim != 0 && features.size() != log.header->feature_dim)
      throw SchemaError("line " + std::to_string(line_no) + ": feature length " +
                        std::to_string(features.size()) + " does not match header");

    auto [it, fresh] = log.scenes.try_emplace(scene_id);
    LoggedScene& ls = it->second;
    if (fresh) {
      ls.scene = std::move(scene);
      ls.features = std::move(features);
    } else {
      if (ls.scene.context.label != scene.context.label || ls.scene.objects != scene.objects)
        throw SchemaError("line " + std::to_string(line_no) + ": scene " +
                          std::to_string(scene_id) + " disagrees with its earlier records");
      if (ls.features != features)
        throw SchemaError("line " + std::to_string(line_no) + ": scene " +
                          std::to_string(scene_id) + " has inconsistent stem features");
    }
    if (!ls.branches.emplace(branch, std::move(out)).second)
      throw SchemaError("line " + std::to_string(line_no) + ": duplicate record for scene " +
                        std::to_string(scene_id) + ", branch " + std::to_string(branch));
  }
  return log;
}

DetectionLog load_detection_log(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open detection log '" + path.string() + "'");
  return read_detection_log(in);
}

void write_detection_log(std::ostream& out, const DetectionLog& log) {
  if (log.header) {
    json branches = json::array();
    for (const auto& b : log.header->branches) branches.push_back({{"id", b.id}, {"name", b.name}});
    json h = {{"version", log.header->version},
              {"scenes", log.header->scenes},
              {"feature_dim", log.header->feature_dim},
              {"branches", std::move(branches)}};
    out << json{{"header", std::move(h)}}.dump() << '\n';
  }
  for (const auto& [id, s] : log.scenes)
    for (const auto& [branch, o] : s.branches) out << record_json(s, o).dump() << '\n';
}

void save_detection_log(const std::filesystem::path& path, const DetectionLog& log) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write detection log '" + path.string() + "'");
  write_detection_log(out, log);
  if (!out) throw DataError("failed while writing '" + path.string() + "'");
}

}  // namespace ctxfusion

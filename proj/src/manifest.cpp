// Copyright 2026 The mvqa Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "mvqa/manifest.hpp"

#include <cmath>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "mvqa/io_util.hpp"

namespace mvqa {

using nlohmann::ordered_json;

namespace {

ordered_json number(double v) {
  // Integral values print without a fractional part so files stay readable.
  if (std::isfinite(v) && v == std::floor(v) && std::fabs(v) < 1e15) {
    return static_cast<long long>(v);
  }
  return v;
}

ordered_json frame_to_json(const Manifest& m, const LabeledFrame& f) {
  ordered_json j;
  j["schema_version"] = m.schema_version;
  j["task"] = m.task;
  j["seed"] = m.seed;
  j["source_id"] = f.source_id;
  j["source_path"] = f.source_path;
  j["width"] = f.width;
  j["height"] = f.height;
  j["frame_index"] = f.frame_index;
  ordered_json gt = ordered_json::array();
  for (std::size_t i = 0; i < f.gt.size(); ++i) {
    const auto& d = f.gt[i];
    ordered_json g;
    g["box"] = {number(d.box.x_min()), number(d.box.y_min()), number(d.box.x_max()),
                number(d.box.y_max())};
    g["class_id"] = d.class_id;
    g["confidence"] = number(d.confidence);
    if (i < f.plates.size()) g["plate"] = f.plates[i];
    gt.push_back(std::move(g));
  }
  j["gt"] = std::move(gt);
  ordered_json vars = ordered_json::array();
  for (const auto& v : f.variants) {
    vars.push_back({{"codec", v.codec},
                    {"qf", number(v.quality_factor)},
                    {"path", v.path},
                    {"psnr_db", number(v.psnr_db)}});
  }
  j["variants"] = std::move(vars);
  j["split"] = f.split;
  if (!f.person_id.empty()) j["person_id"] = f.person_id;
  if (!f.database_path.empty()) j["database_path"] = f.database_path;
  return j;
}

}  // namespace

std::string format_quality(double qf) {
  if (qf == std::floor(qf) && std::fabs(qf) < 1e15) {
    return std::to_string(static_cast<long long>(qf));
  }
  return format_double(qf);
}

std::string manifest_to_jsonl(const Manifest& m) {
  std::string out;
  for (const auto& f : m.frames) {
    out += frame_to_json(m, f).dump();
    out += '\n';
  }
  return out;
}

Manifest manifest_from_jsonl(std::string_view text) {
  Manifest m;
  bool first = true;
  std::size_t line_no = 0;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    ordered_json j;
    try {
      j = ordered_json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw SchemaError("manifest line " + std::to_string(line_no) + ": " + e.what());
    }
    try {
      const int version = j.at("schema_version").get<int>();
      if (version != kManifestSchemaVersion) {
        throw SchemaError("manifest schema version " + std::to_string(version) +
                          " does not match expected version " +
                          std::to_string(kManifestSchemaVersion));
      }
      const auto task = j.at("task").get<std::string>();
      const auto seed = j.at("seed").get<std::uint64_t>();
      if (first) {
        m.task = task;
        m.seed = seed;
        first = false;
      } else if (task != m.task || seed != m.seed) {
        throw SchemaError("manifest line " + std::to_string(line_no) +
                          ": task/seed differ from the first record");
      }
      LabeledFrame f;
      f.source_id = j.at("source_id").get<std::string>();
      f.source_path = j.at("source_path").get<std::string>();
      f.width = j.at("width").get<int>();
      f.height = j.at("height").get<int>();
      f.frame_index = j.value("frame_index", std::size_t{0});
      for (const auto& g : j.at("gt")) {
        const auto& b = g.at("box");
        f.gt.emplace_back(BoundingBox(b.at(0).get<double>(), b.at(1).get<double>(),
                                      b.at(2).get<double>(), b.at(3).get<double>()),
                          g.at("class_id").get<int>(), g.at("confidence").get<double>());
        if (g.contains("plate")) f.plates.push_back(g["plate"].get<std::string>());
      }
      for (const auto& v : j.at("variants")) {
        f.variants.push_back({v.at("codec").get<std::string>(), v.at("qf").get<double>(),
                              v.at("path").get<std::string>(), v.at("psnr_db").get<double>()});
      }
      f.split = j.at("split").get<std::string>();
      f.person_id = j.value("person_id", std::string{});
      f.database_path = j.value("database_path", std::string{});
      m.frames.push_back(std::move(f));
    } catch (const nlohmann::json::exception& e) {
      throw SchemaError("manifest line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return m;
}

void write_manifest(const Manifest& m, const std::filesystem::path& path) {
  write_file_atomic(path, manifest_to_jsonl(m));
}

Manifest read_manifest(const std::filesystem::path& path) {
  return manifest_from_jsonl(read_file_text(path));
}

void check_split_hygiene(const Manifest& m) {
  std::map<std::string, std::string> seen;
  for (const auto& f : m.frames) {
    auto [it, inserted] = seen.emplace(f.source_id, f.split);
    if (!inserted && it->second != f.split) {
      throw Error("source " + f.source_id + " appears in splits '" + it->second + "' and '" +
                  f.split + "'");
    }
  }
}

}  // namespace mvqa

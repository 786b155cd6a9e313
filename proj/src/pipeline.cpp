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

#include "mvqa/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <mutex>
#include <regex>
#include <set>

#include <nlohmann/json.hpp>

#include "mvqa/io_util.hpp"
#include "mvqa/log.hpp"
#include "mvqa/synthetic.hpp"
#include "parallel.hpp"

namespace mvqa {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

std::string tool_version() { return MVQA_VERSION; }

// ---------------------------------------------------------------------------
// Config

namespace {

std::string expand_env(const std::string& s) {
  static const std::regex var(R"(\$\{([A-Za-z_][A-Za-z0-9_]*)\})");
  std::string out;
  auto begin = std::sregex_iterator(s.begin(), s.end(), var);
  std::size_t last = 0;
  for (auto it = begin; it != std::sregex_iterator(); ++it) {
    out.append(s, last, static_cast<std::size_t>(it->position()) - last);
    const char* value = std::getenv((*it)[1].str().c_str());
    if (!value) throw ConfigError("environment variable " + (*it)[1].str() + " is not set");
    out += value;
    last = static_cast<std::size_t>(it->position() + it->length());
  }
  out.append(s, last);
  return out;
}

void expand_all(json& j) {
  if (j.is_string()) {
    j = expand_env(j.get<std::string>());
  } else if (j.is_structured()) {
    for (auto& v : j) expand_all(v);
  }
}

void check_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [key, _] : j.items()) {
    if (std::find_if(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }) ==
        allowed.end()) {
      throw ConfigError("unknown key '" + key + "' in " + where);
    }
  }
}

template <typename T>
void get_to(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

CodecSpec parse_codec(const json& j) {
  check_keys(j, "codec", {"name", "encode", "decode", "extension", "grid", "range", "step",
                          "mandatory"});
  CodecSpec c;
  c.name = j.at("name").get<std::string>();
  get_to(j, "encode", c.encode_command);
  get_to(j, "decode", c.decode_command);
  get_to(j, "extension", c.extension);
  get_to(j, "grid", c.quality_grid);
  if (j.contains("range")) {
    const auto r = j["range"].get<std::vector<double>>();
    if (r.size() != 2) throw ConfigError("codec range must be [min, max]");
    c.min_quality = r[0];
    c.max_quality = r[1];
  }
  get_to(j, "step", c.quality_step);
  get_to(j, "mandatory", c.mandatory);
  if (!j.contains("mandatory")) c.mandatory = c.builtin();
  try {
    validate_codec(c);
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
  return c;
}

}  // namespace

RunConfig parse_run_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  try {
    expand_all(j);
    check_keys(j, "config", {"task", "seed", "out", "jobs", "corpus", "codecs", "calibrate",
                             "backends", "label", "targets", "train", "eval"});
    RunConfig c;
    c.task = task_from_string(j.value("task", std::string("object")));
    get_to(j, "seed", c.seed);
    if (j.contains("out")) c.out = j["out"].get<std::string>();
    get_to(j, "jobs", c.jobs);

    if (j.contains("corpus")) {
      const auto& cj = j["corpus"];
      check_keys(cj, "corpus", {"synthetic", "images", "directory", "persons"});
      if (cj.contains("synthetic")) {
        const auto& sj = cj["synthetic"];
        check_keys(sj, "corpus.synthetic", {"count", "shots", "width", "height"});
        SyntheticCorpusConfig s;
        get_to(sj, "count", s.count);
        get_to(sj, "shots", s.shots);
        get_to(sj, "width", s.width);
        get_to(sj, "height", s.height);
        c.synthetic = s;
      }
      if (cj.contains("images")) {
        for (const auto& p : cj["images"]) c.images.emplace_back(p.get<std::string>());
      }
      if (cj.contains("directory")) {
        const fs::path dir = cj["directory"].get<std::string>();
        if (!fs::is_directory(dir)) throw ConfigError("corpus directory not found: " + dir.string());
        std::vector<fs::path> found;
        for (const auto& e : fs::recursive_directory_iterator(dir)) {
          const auto ext = e.path().extension().string();
          if (e.is_regular_file() && (ext == ".ppm" || ext == ".pgm" || ext == ".jpg" || ext == ".jpeg")) {
            found.push_back(e.path());
          }
        }
        std::sort(found.begin(), found.end());
        if (c.task == Task::kFace) {
          // One sub-directory per person.
          for (const auto& p : found) c.persons[p.parent_path().filename().string()].push_back(p);
        } else {
          c.images.insert(c.images.end(), found.begin(), found.end());
        }
      }
      if (cj.contains("persons")) {
        for (const auto& [person, paths] : cj["persons"].items()) {
          for (const auto& p : paths) c.persons[person].emplace_back(p.get<std::string>());
        }
      }
    }
    if (!c.synthetic && c.images.empty() && c.persons.empty()) {
      throw ConfigError("config has no corpus (synthetic, images, directory or persons)");
    }

    if (j.contains("codecs")) {
      c.codecs.clear();
      for (const auto& cj : j["codecs"]) c.codecs.push_back(parse_codec(cj));
      if (c.codecs.empty()) throw ConfigError("codec list is empty");
    }
    if (j.contains("calibrate")) {
      const auto& cj = j["calibrate"];
      check_keys(cj, "calibrate", {"enabled", "reference", "bin_width"});
      get_to(cj, "enabled", c.calibrate);
      get_to(cj, "reference", c.calibration_reference);
      get_to(cj, "bin_width", c.calibration_bin_width);
    }
    if (j.contains("backends")) {
      const auto& bj = j["backends"];
      check_keys(bj, "backends", {"detector", "embedder", "recognizer"});
      get_to(bj, "detector", c.detector);
      get_to(bj, "embedder", c.embedder);
      get_to(bj, "recognizer", c.recognizer);
    }
    if (j.contains("label")) {
      const auto& lj = j["label"];
      check_keys(lj, "label", {"conf_threshold", "min_gap", "plate_max_distance", "read_padding",
                               "fractions"});
      get_to(lj, "conf_threshold", c.conf_threshold);
      get_to(lj, "min_gap", c.min_gap);
      get_to(lj, "plate_max_distance", c.plate_max_distance);
      get_to(lj, "read_padding", c.plate_read_padding);
      if (lj.contains("fractions")) {
        const auto f = lj["fractions"].get<std::vector<double>>();
        if (f.size() != 2) throw ConfigError("label.fractions must be [train, val]");
        c.train_fraction = f[0];
        c.val_fraction = f[1];
      }
    }
    if (j.contains("targets")) {
      const auto& tj = j["targets"];
      check_keys(tj, "targets", {"match_threshold", "class_aware", "strategy"});
      get_to(tj, "match_threshold", c.match.threshold);
      get_to(tj, "class_aware", c.match.class_aware);
      const auto strategy = tj.value("strategy", std::string("optimal"));
      if (strategy == "optimal") {
        c.match.strategy = MatchStrategy::kOptimal;
      } else if (strategy == "greedy") {
        c.match.strategy = MatchStrategy::kGreedy;
      } else {
        throw ConfigError("targets.strategy must be 'optimal' or 'greedy'");
      }
    }

    // Training defaults follow the task; the config overrides them.
    TrainConfig& t = c.train;
    t.task = c.task;
    t.seed = c.seed;
    t.target = target_names(c.task).front();
    t.epochs = 30;
    t.schedule = "cosine";
    t.checkpoint_every = 10;
    json tj = j.value("train", json::object());
    check_keys(tj, "train", {"target", "epochs", "batch_size", "learning_rate", "schedule", "loss",
                             "input_width", "input_height", "stage_channels", "residual", "hidden",
                             "subset_size", "crop_padding", "checkpoint_every", "init_weights"});
    get_to(tj, "target", t.target);
    if (!target_compatible(c.task, t.target)) {
      throw ConfigError("train.target '" + t.target + "' is not defined for task '" +
                        to_string(c.task) + "'");
    }
    const ModelKind kind = c.task == Task::kPlate && t.target == "delta_object_iou"
                               ? ModelKind::kDetection
                               : model_kind_for(c.task);
    t.model = default_model_config(kind);
    t.model.task = to_string(c.task);
    // Desk-scale defaults: small inputs keep CPU training in minutes.
    if (kind != ModelKind::kPlate) {
      t.model.input_width = t.model.input_height = 32;
      t.model.backbone.stage_channels = {8, 16, 32};
    }
    get_to(tj, "epochs", t.epochs);
    get_to(tj, "batch_size", t.batch_size);
    get_to(tj, "learning_rate", t.learning_rate);
    get_to(tj, "schedule", t.schedule);
    get_to(tj, "loss", t.loss);
    get_to(tj, "input_width", t.model.input_width);
    get_to(tj, "input_height", t.model.input_height);
    get_to(tj, "stage_channels", t.model.backbone.stage_channels);
    get_to(tj, "residual", t.model.backbone.residual);
    get_to(tj, "hidden", t.model.hidden);
    get_to(tj, "subset_size", t.model.subset_size);
    get_to(tj, "crop_padding", c.crop_padding);
    get_to(tj, "checkpoint_every", t.checkpoint_every);
    if (tj.contains("init_weights")) t.init_weights = tj["init_weights"].get<std::string>();
    t.model.seed = c.seed;
    validate(t);

    if (j.contains("eval")) {
      const auto& ej = j["eval"];
      check_keys(ej, "eval", {"plugins", "model", "target", "pooling", "split"});
      get_to(ej, "plugins", c.plugins);
      get_to(ej, "model", c.evaluate_model);
      get_to(ej, "target", c.eval_target);
      get_to(ej, "split", c.eval_split);
      const auto pooling = ej.value("pooling", std::string("object"));
      if (pooling == "object") {
        c.pooling = Pooling::kPerObject;
      } else if (pooling == "image") {
        c.pooling = Pooling::kPerImage;
      } else {
        throw ConfigError("eval.pooling must be 'object' or 'image'");
      }
    }
    if (c.eval_target.empty()) c.eval_target = t.target;
    if (!target_compatible(c.task, c.eval_target)) {
      throw ConfigError("eval.target '" + c.eval_target + "' is not defined for this task");
    }
    for (const auto& p : c.plugins) make_metric(p);  // validates names
    static const std::set<std::string> splits{"train", "val", "test", "all"};
    if (!splits.count(c.eval_split)) throw ConfigError("eval.split must be train, val, test or all");

    if (const char* out = std::getenv("MVQA_OUT"); out && *out) c.out = out;
    return c;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

RunConfig load_run_config(const fs::path& path) {
  if (!fs::is_regular_file(path)) throw ConfigError("config file not found: " + path.string());
  return parse_run_config(read_file_text(path));
}

// ---------------------------------------------------------------------------
// Stage plumbing

namespace {

using Clock = std::chrono::steady_clock;

fs::path stage_dir(const RunConfig& cfg, const std::string& stage) { return cfg.out / stage; }

void write_summary(const RunConfig& cfg, const StageSummary& s) {
  ordered_json j;
  j["schema_version"] = kPipelineSchemaVersion;
  j["stage"] = s.stage;
  j["tool_version"] = tool_version();
  j["task"] = to_string(cfg.task);
  j["seed"] = cfg.seed;
  ordered_json counts = ordered_json::object();
  for (const auto& [k, v] : s.counts) counts[k] = v;
  j["counts"] = std::move(counts);
  j["seconds"] = s.seconds;
  write_file_atomic(stage_dir(cfg, s.stage) / "summary.json", j.dump(2) + "\n");
}

void require_stage(const RunConfig& cfg, const std::string& stage) {
  const auto path = stage_dir(cfg, stage) / "summary.json";
  if (!fs::exists(path)) {
    throw Error("stage '" + stage + "' has not run (missing " + path.string() + ")");
  }
  json j;
  try {
    j = json::parse(read_file_text(path));
  } catch (const json::exception& e) {
    throw SchemaError("unreadable " + path.string() + ": " + e.what());
  }
  const int version = j.value("schema_version", -1);
  if (version != kPipelineSchemaVersion) {
    throw SchemaError("stage '" + stage + "' output has schema version " + std::to_string(version) +
                      ", this tool expects version " + std::to_string(kPipelineSchemaVersion));
  }
  if (j.value("task", std::string()) != to_string(cfg.task)) {
    throw SchemaError("stage '" + stage + "' output is for task '" +
                      j.value("task", std::string()) + "', config has '" + to_string(cfg.task) + "'");
  }
}

FrameLoader run_loader(const RunConfig& cfg) {
  const fs::path base = cfg.out;
  return [base](const ImageRef& ref) { return load_image(resolve_path(base, ref.path.string())); };
}

std::string relative_to_out(const RunConfig& cfg, const fs::path& p) {
  return p.lexically_relative(cfg.out).generic_string();
}

struct Source {
  std::string id;
  std::string path;  // manifest form
  std::string person;
};

// Writes `img` unless an identical file is already there.
void write_source(const Image& img, const fs::path& path) {
  const auto bytes = encode_pnm(img);
  if (fs::exists(path) && read_file_bytes(path) == bytes) return;
  write_file_atomic(path, bytes);
}

std::vector<Source> prepare_sources(const RunConfig& cfg) {
  std::vector<Source> out;
  char id[64];
  if (cfg.synthetic) {
    const auto& s = *cfg.synthetic;
    const std::uint64_t base = cfg.seed * 1000003ULL;
    if (cfg.task == Task::kFace) {
      for (std::size_t p = 0; p < s.count; ++p) {
        for (std::size_t k = 0; k < s.shots; ++k) {
          std::snprintf(id, sizeof id, "p%03zu_s%zu", p, k);
          const fs::path path = cfg.out / "sources" / (std::string(id) + ".ppm");
          write_source(synthetic::face_image(base + p, k, 112), path);
          char person[32];
          std::snprintf(person, sizeof person, "p%03zu", p);
          out.push_back({id, relative_to_out(cfg, path), person});
        }
      }
    } else {
      for (std::size_t i = 0; i < s.count; ++i) {
        std::snprintf(id, sizeof id, "s%04zu", i);
        const fs::path path = cfg.out / "sources" / (std::string(id) + ".ppm");
        const auto scene = cfg.task == Task::kPlate
                               ? synthetic::plate_scene(base + i, s.width, s.height)
                               : synthetic::object_scene(base + i, s.width, s.height);
        write_source(scene.image, path);
        out.push_back({id, relative_to_out(cfg, path), ""});
      }
    }
  }
  std::size_t next = out.size();
  for (const auto& p : cfg.images) {
    if (!fs::exists(p)) throw ConfigError("corpus image not found: " + p.string());
    std::snprintf(id, sizeof id, "s%04zu", next++);
    out.push_back({id, fs::absolute(p).lexically_normal().string(), ""});
  }
  for (const auto& [person, paths] : cfg.persons) {
    for (std::size_t k = 0; k < paths.size(); ++k) {
      if (!fs::exists(paths[k])) throw ConfigError("corpus image not found: " + paths[k].string());
      std::snprintf(id, sizeof id, "%s_s%zu", person.c_str(), k);
      out.push_back({id, fs::absolute(paths[k]).lexically_normal().string(), person});
    }
  }
  return out;
}

std::string codec_key(const CodecSpec& c) {
  return c.name + "|" + c.encode_command + "|" + c.decode_command + "|" + c.extension;
}

}  // namespace

// ---------------------------------------------------------------------------
// Stages

StageSummary run_sweep(const RunConfig& cfg) {
  const auto t0 = Clock::now();
  StageSummary summary{"sweep", {}, 0.0};
  const auto sources = prepare_sources(cfg);
  if (sources.empty()) throw ConfigError("corpus is empty");
  std::vector<Image> images(sources.size());
  detail::parallel_for(sources.size(), cfg.jobs, [&](std::size_t i) {
    images[i] = load_image(resolve_path(cfg.out, sources[i].path));
  });

  std::vector<CodecSpec> codecs = cfg.codecs;
  ordered_json calibration = ordered_json::object();
  if (cfg.calibrate) {
    const auto ref = std::find_if(codecs.begin(), codecs.end(), [&](const CodecSpec& c) {
      return c.name == cfg.calibration_reference;
    });
    if (ref == codecs.end()) {
      throw ConfigError("calibration reference codec '" + cfg.calibration_reference +
                        "' is not configured");
    }
    const auto target = measure_grid_histogram(images, *ref, cfg.calibration_bin_width);
    for (auto& c : codecs) {
      if (c.name == ref->name) continue;
      try {
        const auto r = calibrate_quality_grid(images, c, target, c.quality_grid.size());
        c.quality_grid = r.grid;
        calibration[c.name] = {{"grid", r.grid}, {"distance", r.distance}, {"warnings", r.warnings}};
      } catch (const EncoderError& e) {
        if (c.mandatory) throw;
        log::warn("calibration of codec '" + c.name + "' failed: " + e.what());
      }
    }
    write_file_atomic(stage_dir(cfg, "sweep") / "calibration.json", calibration.dump(2) + "\n");
  }

  // Cache of earlier encodes: variant path -> source hash, codec key, variant hash, psnr.
  const auto cache_path = stage_dir(cfg, "sweep") / "cache.json";
  json cache = json::object();
  if (fs::exists(cache_path)) {
    try {
      cache = json::parse(read_file_text(cache_path));
    } catch (const json::exception&) {
      log::warn("ignoring unreadable sweep cache");
    }
  }

  std::vector<std::vector<Variant>> variants(sources.size());
  std::set<std::string> failed_codecs;
  std::mutex mutex;
  std::size_t encoded = 0;
  std::size_t reused = 0;
  json new_cache = json::object();
  const std::string task = to_string(cfg.task);

  detail::parallel_for(sources.size(), cfg.jobs, [&](std::size_t i) {
    const auto& src = sources[i];
    const std::string src_hash = fnv1a_hex(encode_pnm(images[i]));
    for (const auto& codec : codecs) {
      {
        std::lock_guard lock(mutex);
        if (failed_codecs.count(codec.name)) continue;
      }
      for (double qf : codec.quality_grid) {
        const fs::path out_path = cfg.out / "corpus" / task / src.id /
                                  (codec.name + "_" + format_quality(qf) + "." +
                                   codec.variant_extension());
        const std::string rel = relative_to_out(cfg, out_path);
        std::optional<double> psnr;
        std::string variant_hash;
        {
          std::lock_guard lock(mutex);
          if (cache.contains(rel) && fs::exists(out_path)) {
            const auto& e = cache[rel];
            if (e.value("source", "") == src_hash && e.value("codec", "") == codec_key(codec)) {
              variant_hash = e.value("variant", "");
              psnr = e.value("psnr_db", 0.0);
            }
          }
        }
        if (psnr && fnv1a_hex(read_file_bytes(out_path)) != variant_hash) psnr.reset();
        if (psnr) {
          std::lock_guard lock(mutex);
          ++reused;
        } else {
          try {
            encode_variant(ImageRef(resolve_path(cfg.out, src.path), images[i].width,
                                    images[i].height),
                           codec, qf, out_path, stage_dir(cfg, "sweep") / "logs");
          } catch (const EncoderError& e) {
            if (codec.mandatory) throw;
            std::lock_guard lock(mutex);
            if (failed_codecs.insert(codec.name).second) {
              log::warn("codec '" + codec.name + "' skipped: " + e.what());
            }
            break;
          }
          psnr = compute_psnr(images[i], load_image(out_path));
          variant_hash = fnv1a_hex(read_file_bytes(out_path));
          std::lock_guard lock(mutex);
          ++encoded;
        }
        std::lock_guard lock(mutex);
        new_cache[rel] = {{"source", src_hash},
                          {"codec", codec_key(codec)},
                          {"variant", variant_hash},
                          {"psnr_db", *psnr}};
        variants[i].push_back({codec.name, qf, rel, *psnr});
      }
    }
  });

  Manifest m;
  m.task = task;
  m.seed = cfg.seed;
  for (std::size_t i = 0; i < sources.size(); ++i) {
    LabeledFrame f;
    f.source_id = sources[i].id;
    f.source_path = sources[i].path;
    f.width = images[i].width;
    f.height = images[i].height;
    f.frame_index = i;
    f.person_id = sources[i].person;
    // Drop variants of codecs that failed part-way.
    for (auto& v : variants[i]) {
      if (!failed_codecs.count(v.codec)) f.variants.push_back(std::move(v));
    }
    m.frames.push_back(std::move(f));
  }
  write_manifest(m, stage_dir(cfg, "sweep") / "manifest.jsonl");
  write_file_atomic(cache_path, new_cache.dump(1) + "\n");

  std::size_t total = 0;
  for (const auto& f : m.frames) total += f.variants.size();
  summary.counts = {{"sources", static_cast<double>(sources.size())},
                    {"variants", static_cast<double>(total)},
                    {"encoded", static_cast<double>(encoded)},
                    {"reused", static_cast<double>(reused)},
                    {"codecs_skipped", static_cast<double>(failed_codecs.size())}};
  summary.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
  write_summary(cfg, summary);
  return summary;
}

StageSummary run_label(const RunConfig& cfg) {
  const auto t0 = Clock::now();
  require_stage(cfg, "sweep");
  StageSummary summary{"label", {}, 0.0};
  const Manifest sweep = read_manifest(stage_dir(cfg, "sweep") / "manifest.jsonl");
  const auto loader = run_loader(cfg);
  const auto detector = make_detector(cfg.detector, cfg.task);

  Manifest labeled;
  labeled.task = sweep.task;
  labeled.seed = cfg.seed;
  std::size_t skipped_persons = 0;
  if (cfg.task == Task::kFace) {
    std::map<std::string, std::vector<ImageRef>> persons;
    std::map<std::string, const LabeledFrame*> by_path;
    for (const auto& f : sweep.frames) {
      persons[f.person_id].emplace_back(f.source_path, f.width, f.height);
      by_path[f.source_path] = &f;
    }
    const auto selection = select_face_pairs(persons, *detector, cfg.seed, loader);
    skipped_persons = selection.skipped_persons;
    for (const auto& pair : selection.pairs) {
      LabeledFrame f = *by_path.at(pair.query.path.string());
      f.database_path = pair.database.path.string();
      labeled.frames.push_back(std::move(f));
    }
  } else {
    std::vector<ImageRef> refs;
    for (const auto& f : sweep.frames) refs.emplace_back(f.source_path, f.width, f.height);
    std::vector<LabeledFrame> kept;
    for (auto& k : autolabel_frames(refs, *detector, cfg.conf_threshold, cfg.min_gap, loader)) {
      LabeledFrame f = sweep.frames[k.frame_index];
      f.gt = std::move(k.gt);
      kept.push_back(std::move(f));
    }
    if (cfg.task == Task::kPlate) {
      const auto recognizer = make_recognizer(cfg.recognizer);
      kept = dedup_plate_frames(std::move(kept), *recognizer, cfg.plate_max_distance,
                                cfg.plate_read_padding, loader);
    }
    labeled.frames = std::move(kept);
  }
  labeled = make_splits(std::move(labeled), cfg.train_fraction, cfg.val_fraction, cfg.seed);
  check_split_hygiene(labeled);
  write_manifest(labeled, stage_dir(cfg, "label") / "manifest.jsonl");

  std::map<std::string, double> per_split;
  std::size_t objects = 0;
  for (const auto& f : labeled.frames) {
    per_split["frames_" + f.split] += 1;
    objects += f.gt.size();
  }
  summary.counts = per_split;
  summary.counts["frames_in"] = static_cast<double>(sweep.frames.size());
  summary.counts["frames_kept"] = static_cast<double>(labeled.frames.size());
  summary.counts["objects"] = static_cast<double>(objects);
  summary.counts["persons_skipped"] = static_cast<double>(skipped_persons);
  summary.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
  write_summary(cfg, summary);
  return summary;
}

StageSummary run_targets(const RunConfig& cfg) {
  const auto t0 = Clock::now();
  require_stage(cfg, "label");
  StageSummary summary{"targets", {}, 0.0};
  const Manifest m = read_manifest(stage_dir(cfg, "label") / "manifest.jsonl");
  std::unique_ptr<DetectorBackend> detector;
  std::unique_ptr<FaceEmbedder> embedder;
  std::unique_ptr<PlateRecognizer> recognizer;
  Backends b;
  if (cfg.task == Task::kFace) {
    embedder = make_embedder(cfg.embedder);
    b.embedder = embedder.get();
  } else {
    detector = make_detector(cfg.detector, cfg.task);
    b.detector = detector.get();
    if (cfg.task == Task::kPlate) {
      recognizer = make_recognizer(cfg.recognizer);
      b.recognizer = recognizer.get();
    }
  }
  TargetOptions opts;
  opts.match = cfg.match;
  opts.plate_read_padding = cfg.plate_read_padding;
  opts.loader = run_loader(cfg);
  opts.jobs = cfg.jobs;
  TargetStats stats;
  const auto records = compute_targets(m, b, opts, &stats);
  write_targets(records, stage_dir(cfg, "targets") / "targets.jsonl");
  summary.counts = {{"records", static_cast<double>(stats.records)},
                    {"skipped", static_cast<double>(stats.skipped)},
                    {"reference_calls", static_cast<double>(stats.reference_calls)}};
  summary.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
  write_summary(cfg, summary);
  return summary;
}

StageSummary run_train(const RunConfig& cfg) {
  const auto t0 = Clock::now();
  require_stage(cfg, "targets");
  StageSummary summary{"train", {}, 0.0};
  const Manifest m = read_manifest(stage_dir(cfg, "label") / "manifest.jsonl");
  const auto targets = read_targets(stage_dir(cfg, "targets") / "targets.jsonl");
  TrainConfig tc = cfg.train;
  const fs::path dir = stage_dir(cfg, "train");
  tc.checkpoint_dir = dir / "checkpoints";
  const auto samples = build_samples(m, targets, tc, cfg.crop_padding, cfg.out, run_loader(cfg));
  const auto result = train_model(tc, samples);
  const auto& best = result.checkpoints[result.best];
  const auto& last = result.checkpoints.back();
  write_file_atomic(dir / "model.mvqa", best.model_blob);
  write_file_atomic(dir / "final.mvqa", last.model_blob);
  write_file_atomic(dir / "log.csv", training_log_csv(result));

  std::size_t n_train = 0;
  std::size_t n_val = 0;
  for (const auto& s : samples) {
    n_train += s.split == "train";
    n_val += s.split == "val";
  }
  summary.counts = {{"samples_train", static_cast<double>(n_train)},
                    {"samples_val", static_cast<double>(n_val)},
                    {"epochs", static_cast<double>(tc.epochs)},
                    {"best_epoch", static_cast<double>(best.epoch)},
                    {"initial_train_loss", result.checkpoints.front().train_loss},
                    {"final_train_loss", last.train_loss}};
  if (best.val_srcc) summary.counts["best_val_srcc"] = *best.val_srcc;
  if (last.train_srcc) summary.counts["final_train_srcc"] = *last.train_srcc;
  summary.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
  write_summary(cfg, summary);
  return summary;
}

StageSummary run_eval(const RunConfig& cfg) {
  const auto t0 = Clock::now();
  require_stage(cfg, "targets");
  StageSummary summary{"eval", {}, 0.0};
  Manifest m = read_manifest(stage_dir(cfg, "label") / "manifest.jsonl");
  const auto targets = read_targets(stage_dir(cfg, "targets") / "targets.jsonl");
  if (cfg.eval_split != "all") {
    Manifest subset = m;
    subset.frames.clear();
    for (const auto& f : m.frames) {
      if (f.split == cfg.eval_split) subset.frames.push_back(f);
    }
    if (subset.frames.empty()) {
      log::warn("split '" + cfg.eval_split + "' is empty; evaluating all frames");
    } else {
      m = std::move(subset);
    }
  }
  const auto items =
      build_eval_items(m, targets, cfg.eval_target, cfg.crop_padding, cfg.out, run_loader(cfg));

  EvalOptions opts;
  opts.task = to_string(cfg.task);
  opts.target_higher_is_better = target_higher_is_better(cfg.eval_target);
  opts.pooling = cfg.pooling;
  opts.jobs = cfg.jobs;

  std::vector<CorrelationReport> reports;
  for (const auto& name : cfg.plugins) {
    reports.push_back(evaluate_metric(*make_metric(name), items, opts));
  }
  const fs::path model_path = stage_dir(cfg, "train") / "model.mvqa";
  if (cfg.evaluate_model) {
    if (!fs::exists(model_path)) {
      throw Error("eval needs a trained model (" + model_path.string() +
                  "); run the train stage or set eval.model to false");
    }
    std::shared_ptr<const QualityModel> model = load_model(model_path);
    reports.push_back(
        evaluate_metric(ModelMetric("model:" + cfg.train.target, model), items, opts));
  }
  write_file_atomic(stage_dir(cfg, "eval") / "results.json", reports_to_json(reports));
  summary.counts = {{"items", static_cast<double>(items.size())},
                    {"metrics", static_cast<double>(reports.size())}};
  summary.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
  write_summary(cfg, summary);
  return summary;
}

StageSummary run_report(const RunConfig& cfg) {
  const auto t0 = Clock::now();
  require_stage(cfg, "eval");
  StageSummary summary{"report", {}, 0.0};
  const auto reports = reports_from_json(read_file_text(stage_dir(cfg, "eval") / "results.json"));
  make_report(reports, stage_dir(cfg, "report"));
  summary.counts = {{"metrics", static_cast<double>(reports.size())}};
  summary.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
  write_summary(cfg, summary);
  return summary;
}

StageSummary run_stage(const std::string& name, const RunConfig& cfg) {
  if (name == "sweep") return run_sweep(cfg);
  if (name == "label") return run_label(cfg);
  if (name == "targets") return run_targets(cfg);
  if (name == "train") return run_train(cfg);
  if (name == "eval") return run_eval(cfg);
  if (name == "report") return run_report(cfg);
  throw ConfigError("unknown stage '" + name + "'");
}

std::vector<StageSummary> run_all(const RunConfig& cfg) {
  std::vector<StageSummary> out;
  for (const char* stage : {"sweep", "label", "targets", "train", "eval", "report"}) {
    out.push_back(run_stage(stage, cfg));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Eval results file

std::string reports_to_json(std::span<const CorrelationReport> reports) {
  ordered_json j;
  j["schema_version"] = kPipelineSchemaVersion;
  ordered_json arr = ordered_json::array();
  for (const auto& r : reports) {
    ordered_json e;
    e["metric"] = r.metric;
    e["task"] = r.task;
    e["n"] = r.n;
    e["srcc"] = r.srcc ? ordered_json(*r.srcc) : ordered_json(nullptr);
    e["plcc"] = r.plcc ? ordered_json(*r.plcc) : ordered_json(nullptr);
    ordered_json codecs = ordered_json::object();
    for (const auto& [codec, v] : r.codec_srcc) {
      codecs[codec] = v ? ordered_json(*v) : ordered_json(nullptr);
    }
    e["codec_srcc"] = std::move(codecs);
    e["diagnostic"] = r.diagnostic;
    arr.push_back(std::move(e));
  }
  j["reports"] = std::move(arr);
  return j.dump(2) + "\n";
}

std::vector<CorrelationReport> reports_from_json(const std::string& text) {
  try {
    const auto j = json::parse(text);
    const int version = j.at("schema_version").get<int>();
    if (version != kPipelineSchemaVersion) {
      throw SchemaError("eval results have schema version " + std::to_string(version) +
                        ", this tool expects version " + std::to_string(kPipelineSchemaVersion));
    }
    std::vector<CorrelationReport> out;
    auto opt = [](const json& v) {
      return v.is_null() ? std::optional<double>() : std::optional<double>(v.get<double>());
    };
    for (const auto& e : j.at("reports")) {
      CorrelationReport r;
      r.metric = e.at("metric").get<std::string>();
      r.task = e.at("task").get<std::string>();
      r.n = e.at("n").get<std::size_t>();
      r.srcc = opt(e.at("srcc"));
      r.plcc = opt(e.at("plcc"));
      for (const auto& [codec, v] : e.at("codec_srcc").items()) r.codec_srcc[codec] = opt(v);
      r.diagnostic = e.value("diagnostic", std::string());
      out.push_back(std::move(r));
    }
    return out;
  } catch (const json::exception& e) {
    throw SchemaError(std::string("eval results: ") + e.what());
  }
}

}  // namespace mvqa

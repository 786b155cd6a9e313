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

#include "mvqa/quality_models.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <numeric>

#include "mvqa/errors.hpp"
#include "mvqa/io_util.hpp"

namespace mvqa {

using nlohmann::json;

std::string to_string(ModelKind k) {
  switch (k) {
    case ModelKind::kDetection:
      return "detection";
    case ModelKind::kFace:
      return "face";
    case ModelKind::kPlate:
      return "plate";
  }
  return "?";
}

ModelKind model_kind_from_string(const std::string& s) {
  if (s == "detection") return ModelKind::kDetection;
  if (s == "face") return ModelKind::kFace;
  if (s == "plate") return ModelKind::kPlate;
  throw InvalidArgument("unknown model kind: " + s);
}

ModelConfig default_model_config(ModelKind kind) {
  ModelConfig cfg;
  cfg.kind = kind;
  switch (kind) {
    case ModelKind::kDetection:
      cfg.task = "object";
      cfg.input_width = cfg.input_height = 224;
      cfg.backbone = {3, {8, 16, 32, 32}, false};
      break;
    case ModelKind::kFace:
      cfg.task = "face";
      cfg.input_width = cfg.input_height = 112;
      cfg.backbone = {3, {8, 16, 32}, true};
      break;
    case ModelKind::kPlate:
      cfg.task = "plate";
      cfg.input_width = 94;
      cfg.input_height = 24;
      cfg.backbone = {1, {8, 16, 32}, false};
      break;
  }
  return cfg;
}

void QualityModel::zero_grad() {
  for (auto& b : parameters()) std::fill_n(b.grad, b.size, 0.0);
}

Image prepare_image(const ModelConfig& cfg, const Image& img) {
  Image out = cfg.backbone.in_channels == 1 ? to_gray(img) : to_rgb(img);
  return resize_bilinear(out, cfg.input_width, cfg.input_height);
}

nn::Tensor prepare_input(const ModelConfig& cfg, const Image& img) {
  return nn::to_tensor(prepare_image(cfg, img));
}

void QualityModel::check_input(const nn::Tensor& t) const {
  if (t.channels != cfg_.backbone.in_channels || t.width != cfg_.input_width ||
      t.height != cfg_.input_height) {
    throw InvalidArgument("model input must be " + std::to_string(cfg_.input_width) + "x" +
                          std::to_string(cfg_.input_height) + "x" +
                          std::to_string(cfg_.backbone.in_channels) + ", got " +
                          std::to_string(t.width) + "x" + std::to_string(t.height) + "x" +
                          std::to_string(t.channels));
  }
}

namespace {

std::mt19937_64 init_rng(const ModelConfig& cfg) { return std::mt19937_64(cfg.seed); }

void check_kind(const ModelConfig& cfg, ModelKind want) {
  if (cfg.kind != want) {
    throw InvalidArgument("model config is for a " + to_string(cfg.kind) + " model, expected " +
                          to_string(want));
  }
}

void check_pair(const Image& a, const Image& b) {
  if (a.width != b.width || a.height != b.height || a.channels != b.channels) {
    throw InvalidArgument("crop pair mismatch: " + std::to_string(a.width) + "x" +
                          std::to_string(a.height) + "x" + std::to_string(a.channels) + " vs " +
                          std::to_string(b.width) + "x" + std::to_string(b.height) + "x" +
                          std::to_string(b.channels));
  }
}

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace

// ---------------------------------------------------------------------------
// Detection

DetectionQualityModel::DetectionQualityModel(ModelConfig cfg) : QualityModel(std::move(cfg)) {
  check_kind(config(), ModelKind::kDetection);
  auto rng = init_rng(config());
  backbone_ = nn::Backbone(config().backbone, rng);
  fc1_ = nn::Linear(3 * backbone_.feature_size(), config().hidden, false, rng);
  fc2_ = nn::Linear(config().hidden, 1, true, rng);
}

DetectionQualityModel::Pass DetectionQualityModel::forward(const nn::Tensor& ref,
                                                           const nn::Tensor& comp,
                                                           bool keep_trace) const {
  check_input(ref);
  check_input(comp);
  Pass p;
  const nn::Vector fr = backbone_.forward(ref, keep_trace ? &p.ref_trace : nullptr);
  const nn::Vector fc = backbone_.forward(comp, keep_trace ? &p.comp_trace : nullptr);
  const auto f = fr.size();
  p.concat.resize(3 * f);
  p.concat << fr, fc, fr - fc;
  p.hidden_pre = fc1_.forward(p.concat);
  p.output = fc2_.forward(nn::relu(p.hidden_pre))(0);
  return p;
}

void DetectionQualityModel::backward(const Pass& p, double d_output) {
  nn::Vector d_out(1);
  d_out(0) = d_output;
  const nn::Vector hidden = nn::relu(p.hidden_pre);
  nn::Vector d_hidden = fc2_.backward(hidden, d_out);
  d_hidden = (p.hidden_pre.array() > 0.0).select(d_hidden, 0.0);
  const nn::Vector d_concat = fc1_.backward(p.concat, d_hidden);
  const auto f = backbone_.feature_size();
  const nn::Vector d_diff = d_concat.segment(2 * f, f);
  backbone_.backward(p.ref_trace, d_concat.segment(0, f) + d_diff);
  backbone_.backward(p.comp_trace, d_concat.segment(f, f) - d_diff);
}

double DetectionQualityModel::predict(const nn::Tensor& ref, const nn::Tensor& comp) const {
  return forward(ref, comp).output;
}

double DetectionQualityModel::predict(const Image& ref_crop, const Image& compressed_crop) const {
  check_pair(ref_crop, compressed_crop);
  return predict(prepare_tensor(ref_crop), prepare_tensor(compressed_crop));
}

std::vector<nn::ParamBlock> DetectionQualityModel::parameters() {
  std::vector<nn::ParamBlock> out;
  backbone_.collect(out);
  fc1_.collect(out);
  fc2_.collect(out);
  return out;
}

// ---------------------------------------------------------------------------
// Face

FaceQualityModel::FaceQualityModel(ModelConfig cfg) : QualityModel(std::move(cfg)) {
  check_kind(config(), ModelKind::kFace);
  if (config().subset_size < 1) throw InvalidArgument("face subset size must be >= 1");
  auto rng = init_rng(config());
  backbone_ = nn::Backbone(config().backbone, rng);
  head_ = nn::Linear(3 * backbone_.feature_size(), 1, true, rng);
}

nn::Vector FaceQualityModel::pair_feature(const nn::Tensor& ref, const nn::Tensor& comp,
                                          nn::Backbone::Trace* ref_trace,
                                          nn::Backbone::Trace* comp_trace) const {
  check_input(ref);
  check_input(comp);
  const nn::Vector fr = backbone_.forward(ref, ref_trace);
  const nn::Vector fc = backbone_.forward(comp, comp_trace);
  nn::Vector g(3 * fr.size());
  g << fr, fc, fr - fc;
  return g;
}

namespace {

// Sum of feature vectors taken in lexicographic order, divided by count.
nn::Vector canonical_mean(const std::vector<nn::Vector>& feats) {
  std::vector<std::size_t> order(feats.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::lexicographical_compare(feats[a].data(), feats[a].data() + feats[a].size(),
                                        feats[b].data(), feats[b].data() + feats[b].size());
  });
  nn::Vector sum = nn::Vector::Zero(feats.front().size());
  for (std::size_t i : order) sum += feats[i];
  return sum / static_cast<double>(feats.size());
}

}  // namespace

FaceQualityModel::Pass FaceQualityModel::forward(std::span<const TensorPair> pairs,
                                                 bool keep_trace) const {
  if (pairs.empty()) throw InvalidArgument("face quality needs at least one pair");
  if (pairs.size() > static_cast<std::size_t>(config().subset_size)) {
    throw InvalidArgument("subset larger than the configured size " +
                          std::to_string(config().subset_size));
  }
  Pass p;
  if (keep_trace) {
    p.ref_traces.resize(pairs.size());
    p.comp_traces.resize(pairs.size());
  }
  std::vector<nn::Vector> feats;
  feats.reserve(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    feats.push_back(pair_feature(pairs[i].first, pairs[i].second,
                                 keep_trace ? &p.ref_traces[i] : nullptr,
                                 keep_trace ? &p.comp_traces[i] : nullptr));
  }
  p.mean_feature = canonical_mean(feats);
  p.output = head_.forward(p.mean_feature)(0);
  return p;
}

void FaceQualityModel::backward(const Pass& p, double d_output) {
  nn::Vector d_out(1);
  d_out(0) = d_output;
  const nn::Vector d_mean = head_.backward(p.mean_feature, d_out);
  const nn::Vector d_pair = d_mean / static_cast<double>(p.ref_traces.size());
  const auto f = backbone_.feature_size();
  const nn::Vector d_diff = d_pair.segment(2 * f, f);
  const nn::Vector d_ref = d_pair.segment(0, f) + d_diff;
  const nn::Vector d_comp = d_pair.segment(f, f) - d_diff;
  for (std::size_t i = 0; i < p.ref_traces.size(); ++i) {
    backbone_.backward(p.ref_traces[i], d_ref);
    backbone_.backward(p.comp_traces[i], d_comp);
  }
}

double FaceQualityModel::predict(std::span<const TensorPair> pairs) const {
  if (pairs.empty()) throw InvalidArgument("face quality needs at least one pair");
  const auto n = static_cast<std::size_t>(config().subset_size);
  if (pairs.size() <= n) return forward(pairs).output;

  std::vector<nn::Vector> feats;
  feats.reserve(pairs.size());
  for (const auto& pr : pairs) feats.push_back(pair_feature(pr.first, pr.second, nullptr, nullptr));
  std::vector<std::size_t> order(feats.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::lexicographical_compare(feats[a].data(), feats[a].data() + feats[a].size(),
                                        feats[b].data(), feats[b].data() + feats[b].size());
  });
  double total = 0.0;
  std::size_t chunks = 0;
  for (std::size_t start = 0; start < order.size(); start += n, ++chunks) {
    std::vector<nn::Vector> chunk;
    for (std::size_t k = start; k < std::min(order.size(), start + n); ++k) {
      chunk.push_back(feats[order[k]]);
    }
    total += head_.forward(canonical_mean(chunk))(0);
  }
  return total / static_cast<double>(chunks);
}

double FaceQualityModel::predict(std::span<const std::pair<Image, Image>> pairs) const {
  std::vector<TensorPair> t;
  t.reserve(pairs.size());
  for (const auto& [ref, comp] : pairs) {
    check_pair(ref, comp);
    t.emplace_back(prepare_tensor(ref), prepare_tensor(comp));
  }
  return predict(t);
}

std::vector<nn::ParamBlock> FaceQualityModel::parameters() {
  std::vector<nn::ParamBlock> out;
  backbone_.collect(out);
  head_.collect(out);
  return out;
}

// ---------------------------------------------------------------------------
// Plate

PlateQualityModel::PlateQualityModel(ModelConfig cfg) : QualityModel(std::move(cfg)) {
  check_kind(config(), ModelKind::kPlate);
  if (config().backbone.in_channels != 1) {
    throw InvalidArgument("plate model takes a single grayscale channel");
  }
  auto rng = init_rng(config());
  backbone_ = nn::Backbone(config().backbone, rng);
  fc1_ = nn::Linear(backbone_.feature_size(), config().hidden, false, rng);
  fc2_ = nn::Linear(config().hidden, 1, true, rng);
}

PlateQualityModel::Pass PlateQualityModel::forward(const nn::Tensor& crop, bool keep_trace) const {
  check_input(crop);
  Pass p;
  p.feature = backbone_.forward(crop, keep_trace ? &p.trace : nullptr);
  p.hidden_pre = fc1_.forward(p.feature);
  p.output = sigmoid(fc2_.forward(nn::relu(p.hidden_pre))(0));
  return p;
}

void PlateQualityModel::backward(const Pass& p, double d_output) {
  nn::Vector d_logit(1);
  d_logit(0) = d_output * p.output * (1.0 - p.output);
  const nn::Vector hidden = nn::relu(p.hidden_pre);
  nn::Vector d_hidden = fc2_.backward(hidden, d_logit);
  d_hidden = (p.hidden_pre.array() > 0.0).select(d_hidden, 0.0);
  backbone_.backward(p.trace, fc1_.backward(p.feature, d_hidden));
}

double PlateQualityModel::predict(const nn::Tensor& crop) const { return forward(crop).output; }

double PlateQualityModel::predict(const Image& compressed_crop) const {
  return predict(prepare_tensor(compressed_crop));
}

std::vector<nn::ParamBlock> PlateQualityModel::parameters() {
  std::vector<nn::ParamBlock> out;
  backbone_.collect(out);
  fc1_.collect(out);
  fc2_.collect(out);
  return out;
}

// ---------------------------------------------------------------------------
// Serialization

std::unique_ptr<QualityModel> make_model(const ModelConfig& cfg) {
  switch (cfg.kind) {
    case ModelKind::kDetection:
      return std::make_unique<DetectionQualityModel>(cfg);
    case ModelKind::kFace:
      return std::make_unique<FaceQualityModel>(cfg);
    case ModelKind::kPlate:
      return std::make_unique<PlateQualityModel>(cfg);
  }
  throw InvalidArgument("unknown model kind");
}

namespace {

constexpr char kMagic[8] = {'M', 'V', 'Q', 'A', 'M', 'O', 'D', 'L'};

json config_to_json(const ModelConfig& c) {
  return {{"kind", to_string(c.kind)},
          {"task", c.task},
          {"input_width", c.input_width},
          {"input_height", c.input_height},
          {"backbone",
           {{"in_channels", c.backbone.in_channels},
            {"stage_channels", c.backbone.stage_channels},
            {"residual", c.backbone.residual}}},
          {"hidden", c.hidden},
          {"subset_size", c.subset_size},
          {"seed", c.seed}};
}

ModelConfig config_from_json(const json& j) {
  ModelConfig c;
  c.kind = model_kind_from_string(j.at("kind").get<std::string>());
  c.task = j.at("task").get<std::string>();
  c.input_width = j.at("input_width").get<int>();
  c.input_height = j.at("input_height").get<int>();
  const auto& b = j.at("backbone");
  c.backbone.in_channels = b.at("in_channels").get<int>();
  c.backbone.stage_channels = b.at("stage_channels").get<std::vector<int>>();
  c.backbone.residual = b.at("residual").get<bool>();
  c.hidden = j.at("hidden").get<int>();
  c.subset_size = j.at("subset_size").get<int>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(std::span<const std::uint8_t> b, std::size_t off) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[off + i]) << (8 * i);
  return v;
}

}  // namespace

std::vector<std::uint8_t> serialize_model(QualityModel& model) {
  static_assert(std::endian::native == std::endian::little, "little-endian host required");
  const auto params = model.parameters();
  const auto values = nn::flatten_values(params);
  json header = {{"schema_version", kModelSchemaVersion},
                 {"config", config_to_json(model.config())},
                 {"parameter_count", values.size()},
                 {"dtype", "float64le"}};
  const std::string h = header.dump();
  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  put_u32(out, static_cast<std::uint32_t>(h.size()));
  out.insert(out.end(), h.begin(), h.end());
  const auto* raw = reinterpret_cast<const std::uint8_t*>(values.data());
  out.insert(out.end(), raw, raw + values.size() * sizeof(double));
  return out;
}

std::unique_ptr<QualityModel> deserialize_model(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 12 || !std::equal(std::begin(kMagic), std::end(kMagic), bytes.begin())) {
    throw SchemaError("not a model file (bad magic)");
  }
  const std::uint32_t hlen = get_u32(bytes, 8);
  if (bytes.size() < 12 + static_cast<std::size_t>(hlen)) throw SchemaError("truncated model header");
  json header;
  try {
    header = json::parse(bytes.begin() + 12, bytes.begin() + 12 + hlen);
  } catch (const json::exception& e) {
    throw SchemaError(std::string("model header is not valid JSON: ") + e.what());
  }
  const int version = header.at("schema_version").get<int>();
  if (version != kModelSchemaVersion) {
    throw SchemaError("model schema version " + std::to_string(version) + ", expected " +
                      std::to_string(kModelSchemaVersion));
  }
  auto model = make_model(config_from_json(header.at("config")));
  const auto params = model->parameters();
  const std::size_t count = header.at("parameter_count").get<std::size_t>();
  if (count != nn::parameter_count(params)) {
    throw SchemaError("model file has " + std::to_string(count) +
                      " parameters, architecture expects " +
                      std::to_string(nn::parameter_count(params)));
  }
  const std::size_t off = 12 + hlen;
  if (bytes.size() != off + count * sizeof(double)) throw SchemaError("model weight size mismatch");
  std::vector<double> values(count);
  std::memcpy(values.data(), bytes.data() + off, count * sizeof(double));
  nn::assign_values(params, values);
  return model;
}

void save_model(QualityModel& model, const std::filesystem::path& path) {
  write_file_atomic(path, serialize_model(model));
}

std::unique_ptr<QualityModel> load_model(const std::filesystem::path& path) {
  return deserialize_model(read_file_bytes(path));
}

namespace {

void check_expected(const ModelConfig& got, const ModelConfig* expected) {
  if (expected == nullptr) return;
  if (got.input_width != expected->input_width || got.input_height != expected->input_height) {
    throw SchemaError("input resolution mismatch: model file has " +
                      std::to_string(got.input_width) + "x" + std::to_string(got.input_height) +
                      ", config expects " + std::to_string(expected->input_width) + "x" +
                      std::to_string(expected->input_height));
  }
  if (!(got.backbone == expected->backbone) || got.hidden != expected->hidden ||
      got.subset_size != expected->subset_size) {
    throw SchemaError("architecture mismatch: model file has " + config_to_json(got).dump() +
                      ", config expects " + config_to_json(*expected).dump());
  }
}

template <typename T>
std::unique_ptr<T> load_typed(const std::filesystem::path& path, ModelKind want,
                              const ModelConfig* expected) {
  auto m = load_model(path);
  if (m->kind() != want) {
    throw SchemaError("model file " + path.string() + " holds a " + to_string(m->kind()) +
                      " model, expected " + to_string(want));
  }
  check_expected(m->config(), expected);
  return std::unique_ptr<T>(static_cast<T*>(m.release()));
}

}  // namespace

std::unique_ptr<DetectionQualityModel> load_detection_model(const std::filesystem::path& path,
                                                            const ModelConfig* expected) {
  return load_typed<DetectionQualityModel>(path, ModelKind::kDetection, expected);
}

std::unique_ptr<FaceQualityModel> load_face_model(const std::filesystem::path& path,
                                                  const ModelConfig* expected) {
  return load_typed<FaceQualityModel>(path, ModelKind::kFace, expected);
}

std::unique_ptr<PlateQualityModel> load_plate_model(const std::filesystem::path& path,
                                                    const ModelConfig* expected) {
  return load_typed<PlateQualityModel>(path, ModelKind::kPlate, expected);
}

}  // namespace mvqa

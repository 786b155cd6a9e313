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

#include "mvqa/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <tuple>

#include <nlohmann/json.hpp>

#include "mvqa/io_util.hpp"
#include "mvqa/log.hpp"
#include "parallel.hpp"

namespace mvqa {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Baselines

double baseline_psnr(const Image& ref, const Image& dist) { return compute_psnr(ref, dist); }

namespace {

std::vector<double> gaussian_kernel(int size, double sigma) {
  std::vector<double> k(static_cast<std::size_t>(size));
  const int r = size / 2;
  double sum = 0.0;
  for (int i = 0; i < size; ++i) {
    k[static_cast<std::size_t>(i)] = std::exp(-0.5 * (i - r) * (i - r) / (sigma * sigma));
    sum += k[static_cast<std::size_t>(i)];
  }
  for (auto& v : k) v /= sum;
  return k;
}

// Valid-region separable filtering of a w x h plane.
std::vector<double> filter_valid(const std::vector<double>& in, int w, int h,
                                 const std::vector<double>& k) {
  const int n = static_cast<int>(k.size());
  const int ow = w - n + 1;
  const int oh = h - n + 1;
  std::vector<double> tmp(static_cast<std::size_t>(ow) * h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int i = 0; i < n; ++i) s += k[static_cast<std::size_t>(i)] * in[static_cast<std::size_t>(y) * w + x + i];
      tmp[static_cast<std::size_t>(y) * ow + x] = s;
    }
  }
  std::vector<double> out(static_cast<std::size_t>(ow) * oh);
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int i = 0; i < n; ++i) s += k[static_cast<std::size_t>(i)] * tmp[static_cast<std::size_t>(y + i) * ow + x];
      out[static_cast<std::size_t>(y) * ow + x] = s;
    }
  }
  return out;
}

}  // namespace

double baseline_ssim(const Image& ref, const Image& dist) {
  if (ref.width != dist.width || ref.height != dist.height || ref.channels != dist.channels) {
    throw InvalidArgument("ssim: image geometry mismatch");
  }
  if (ref.empty()) throw InvalidArgument("ssim: empty image");
  int size = std::min({11, ref.width, ref.height});
  if (size % 2 == 0) --size;
  const auto k = gaussian_kernel(size, 1.5 * size / 11.0);
  const auto x = luma(ref);
  const auto y = luma(dist);
  std::vector<double> xx(x.size()), yy(x.size()), xy(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    xx[i] = x[i] * x[i];
    yy[i] = y[i] * y[i];
    xy[i] = x[i] * y[i];
  }
  const int w = ref.width;
  const int h = ref.height;
  const auto mx = filter_valid(x, w, h, k);
  const auto my = filter_valid(y, w, h, k);
  const auto mxx = filter_valid(xx, w, h, k);
  const auto myy = filter_valid(yy, w, h, k);
  const auto mxy = filter_valid(xy, w, h, k);
  constexpr double c1 = (0.01 * 255) * (0.01 * 255);
  constexpr double c2 = (0.03 * 255) * (0.03 * 255);
  double total = 0.0;
  for (std::size_t i = 0; i < mx.size(); ++i) {
    const double vx = mxx[i] - mx[i] * mx[i];
    const double vy = myy[i] - my[i] * my[i];
    const double cxy = mxy[i] - mx[i] * my[i];
    total += ((2 * mx[i] * my[i] + c1) * (2 * cxy + c2)) /
             ((mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2));
  }
  return total / static_cast<double>(mx.size());
}

double PsnrMetric::score(const EvalItem& item) const {
  return baseline_psnr(item.reference, item.distorted);
}

double SsimMetric::score(const EvalItem& item) const {
  return baseline_ssim(item.reference, item.distorted);
}

ModelMetric::ModelMetric(std::string name, std::shared_ptr<const QualityModel> model)
    : name_(std::move(name)), model_(std::move(model)) {
  if (!model_) throw InvalidArgument("model metric without a model");
}

bool ModelMetric::full_reference() const { return model_->kind() != ModelKind::kPlate; }

bool ModelMetric::higher_is_better() const { return model_->kind() == ModelKind::kPlate; }

double ModelMetric::score(const EvalItem& item) const {
  switch (model_->kind()) {
    case ModelKind::kDetection:
      return static_cast<const DetectionQualityModel&>(*model_).predict(item.reference,
                                                                        item.distorted);
    case ModelKind::kFace: {
      const std::pair<Image, Image> pair{item.reference, item.distorted};
      return static_cast<const FaceQualityModel&>(*model_).predict(
          std::span<const std::pair<Image, Image>>(&pair, 1));
    }
    case ModelKind::kPlate:
      return static_cast<const PlateQualityModel&>(*model_).predict(item.distorted);
  }
  return 0.0;
}

std::unique_ptr<MetricPlugin> make_metric(const std::string& name) {
  if (name == "psnr") return std::make_unique<PsnrMetric>();
  if (name == "ssim") return std::make_unique<SsimMetric>();
  throw ConfigError("unknown metric plugin '" + name + "' (builtin: psnr, ssim)");
}

// ---------------------------------------------------------------------------
// Harness

bool target_higher_is_better(const std::string& target_name) {
  return target_name == "jaro" || target_name == "object_iou" || target_name == "mean_iou";
}

namespace {

std::optional<double> safe_srcc(std::span<const double> x, std::span<const double> y,
                                std::string* diagnostic) {
  if (x.size() < 3) {
    if (diagnostic) *diagnostic = "fewer than 3 samples";
    return std::nullopt;
  }
  return srcc(x, y, diagnostic);
}

}  // namespace

CorrelationReport evaluate_metric(const MetricPlugin& plugin, std::span<const EvalItem> items,
                                  const EvalOptions& options) {
  CorrelationReport rep;
  rep.metric = plugin.name();
  rep.task = options.task;

  std::vector<double> raw(items.size());
  detail::parallel_for(items.size(), options.jobs,
                       [&](std::size_t i) { raw[i] = plugin.score(items[i]); });
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (!std::isfinite(raw[i])) {
      throw Error("metric '" + plugin.name() + "' returned a non-finite score for " +
                  items[i].frame_id);
    }
  }
  const double s_sign = plugin.higher_is_better() ? 1.0 : -1.0;
  const double t_sign = options.target_higher_is_better ? 1.0 : -1.0;

  struct Pooled {
    std::string codec;
    double score = 0.0;
    double target = 0.0;
    std::size_t count = 0;
  };
  std::vector<Pooled> samples;
  if (options.pooling == Pooling::kPerObject) {
    for (std::size_t i = 0; i < items.size(); ++i) {
      samples.push_back({items[i].codec, raw[i], items[i].target, 1});
    }
  } else {
    std::map<std::tuple<std::string, std::string, double>, std::size_t> index;
    for (std::size_t i = 0; i < items.size(); ++i) {
      const auto key = std::make_tuple(items[i].frame_id, items[i].codec, items[i].quality_factor);
      auto [it, inserted] = index.try_emplace(key, samples.size());
      if (inserted) samples.push_back({items[i].codec, 0.0, 0.0, 0});
      auto& p = samples[it->second];
      p.score += raw[i];
      p.target += items[i].target;
      ++p.count;
    }
    for (auto& p : samples) {
      p.score /= static_cast<double>(p.count);
      p.target /= static_cast<double>(p.count);
    }
  }

  std::vector<double> score;
  std::vector<double> target;
  std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> by_codec;
  for (const auto& p : samples) {
    score.push_back(s_sign * p.score);
    target.push_back(t_sign * p.target);
    by_codec[p.codec].first.push_back(score.back());
    by_codec[p.codec].second.push_back(target.back());
    rep.series.emplace_back(score.back(), target.back());
  }
  rep.n = samples.size();
  rep.srcc = safe_srcc(score, target, &rep.diagnostic);
  if (rep.srcc) rep.plcc = plcc(score, target, &rep.diagnostic);
  for (const auto& [codec, st] : by_codec) {
    std::string ignored;
    rep.codec_srcc[codec] = safe_srcc(st.first, st.second, &ignored);
  }
  if (!rep.srcc) {
    log::warn("metric '" + rep.metric + "': correlation undefined (" + rep.diagnostic + ")");
  }
  return rep;
}

std::vector<EvalItem> build_eval_items(const Manifest& manifest,
                                       std::span<const TargetRecord> targets,
                                       const std::string& target_name, double crop_padding,
                                       const fs::path& base_dir, const FrameLoader& loader) {
  using Key = std::tuple<std::string, std::optional<std::size_t>, std::string, double>;
  std::map<Key, double> value;
  bool frame_level = false;
  for (const auto& r : targets) {
    if (r.target_name != target_name) continue;
    value[{r.frame_id, r.object_id, r.codec, r.quality_factor}] = r.value;
    frame_level = frame_level || !r.object_id;
  }
  const bool face = manifest.task == "face";
  std::vector<EvalItem> items;
  for (const auto& f : manifest.frames) {
    if (face || frame_level) {
      const Image src = loader(ImageRef(resolve_path(base_dir, f.source_path), f.width, f.height));
      for (const auto& v : f.variants) {
        const std::optional<std::size_t> id =
            face ? std::optional<std::size_t>(0) : std::nullopt;
        auto it = value.find({f.source_id, id, v.codec, v.quality_factor});
        if (it == value.end()) continue;
        items.push_back({f.source_id, id, v.codec, v.quality_factor, it->second, src,
                         loader(ImageRef(resolve_path(base_dir, v.path), f.width, f.height))});
      }
      continue;
    }
    for (auto& cs : extract_crops(f, crop_padding, base_dir, loader)) {
      for (std::size_t v = 0; v < f.variants.size(); ++v) {
        const auto& var = f.variants[v];
        auto it = value.find({f.source_id, cs.object_id, var.codec, var.quality_factor});
        if (it == value.end()) continue;
        items.push_back({f.source_id, cs.object_id, var.codec, var.quality_factor, it->second,
                         cs.ref_crop, cs.variant_crops[v]});
      }
    }
  }
  return items;
}

// ---------------------------------------------------------------------------
// Reports

std::vector<CorrelationReport> sorted_reports(std::vector<CorrelationReport> reports) {
  std::stable_sort(reports.begin(), reports.end(),
                   [](const CorrelationReport& a, const CorrelationReport& b) {
                     if (a.srcc.has_value() != b.srcc.has_value()) return a.srcc.has_value();
                     if (a.srcc && *a.srcc != *b.srcc) return *a.srcc > *b.srcc;
                     return std::tie(a.metric, a.task) < std::tie(b.metric, b.task);
                   });
  return reports;
}

namespace {

std::string fmt(const std::optional<double>& v) { return v ? format_fixed(*v, 6) : std::string(); }

ordered_json opt_json(const std::optional<double>& v) {
  // Rounded like the CSV so both files agree and stay byte-stable.
  return v ? ordered_json(std::stod(format_fixed(*v, 6))) : ordered_json(nullptr);
}

std::string csv_quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string codec_json(const CorrelationReport& r) {
  ordered_json j = ordered_json::object();
  for (const auto& [codec, v] : r.codec_srcc) j[codec] = opt_json(v);
  return j.dump();
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&':
        out += "&amp;";
        break;
      case '<':
        out += "&lt;";
        break;
      case '>':
        out += "&gt;";
        break;
      case '"':
        out += "&quot;";
        break;
      default:
        out += c;
    }
  }
  return out;
}

}  // namespace

std::string report_csv(std::span<const CorrelationReport> reports) {
  std::string out = "metric,task,n,srcc,plcc,codec_breakdown_json\n";
  for (const auto& r : sorted_reports({reports.begin(), reports.end()})) {
    out += csv_quote(r.metric) + "," + csv_quote(r.task) + "," + std::to_string(r.n) + "," +
           fmt(r.srcc) + "," + fmt(r.plcc) + "," + csv_quote(codec_json(r)) + "\n";
  }
  return out;
}

std::string report_json(std::span<const CorrelationReport> reports) {
  ordered_json arr = ordered_json::array();
  for (const auto& r : sorted_reports({reports.begin(), reports.end()})) {
    ordered_json j;
    j["metric"] = r.metric;
    j["task"] = r.task;
    j["n"] = r.n;
    j["srcc"] = opt_json(r.srcc);
    j["plcc"] = opt_json(r.plcc);
    ordered_json codecs = ordered_json::object();
    for (const auto& [codec, v] : r.codec_srcc) codecs[codec] = opt_json(v);
    j["codec_srcc"] = std::move(codecs);
    if (!r.diagnostic.empty()) j["diagnostic"] = r.diagnostic;
    arr.push_back(std::move(j));
  }
  return arr.dump(2) + "\n";
}

std::string report_svg(std::span<const CorrelationReport> reports) {
  const auto rows = sorted_reports({reports.begin(), reports.end()});
  constexpr int kLabel = 180;
  constexpr int kBar = 300;  // length of |r| = 1
  constexpr int kRow = 34;
  const int width = kLabel + 2 * kBar + 40;
  const int height = 50 + kRow * static_cast<int>(std::max<std::size_t>(rows.size(), 1));
  const int axis = kLabel + kBar;
  char buf[512];
  std::string out;
  std::snprintf(buf, sizeof buf,
                "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%d\" height=\"%d\" "
                "font-family=\"sans-serif\" font-size=\"12\">\n",
                width, height);
  out += buf;
  out += "<text x=\"10\" y=\"20\">SRCC (dark) and PLCC (light) vs target</text>\n";
  std::snprintf(buf, sizeof buf,
                "<line x1=\"%d\" y1=\"30\" x2=\"%d\" y2=\"%d\" stroke=\"#444\"/>\n", axis, axis,
                height - 10);
  out += buf;
  int y = 36;
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "<text x=\"10\" y=\"%d\">%s</text>\n", y + 15,
                  xml_escape(r.metric + " (" + r.task + ")").c_str());
    out += buf;
    auto bar = [&](const std::optional<double>& v, int dy, const char* color) {
      if (!v) return;
      const int len = static_cast<int>(std::lround(std::fabs(*v) * kBar));
      const int x = *v >= 0 ? axis : axis - len;
      std::snprintf(buf, sizeof buf,
                    "<rect x=\"%d\" y=\"%d\" width=\"%d\" height=\"12\" fill=\"%s\"/>\n", x,
                    y + dy, len, color);
      out += buf;
    };
    bar(r.srcc, 2, "#1f4e79");
    bar(r.plcc, 15, "#8fb3d9");
    std::snprintf(buf, sizeof buf, "<text x=\"%d\" y=\"%d\">%s</text>\n", width - 36, y + 15,
                  r.srcc ? format_fixed(*r.srcc, 3).c_str() : "n/a");
    out += buf;
    y += kRow;
  }
  out += "</svg>\n";
  return out;
}

std::vector<fs::path> make_report(std::span<const CorrelationReport> reports,
                                  const fs::path& out_dir) {
  const std::vector<fs::path> paths{out_dir / "report.csv", out_dir / "report.json",
                                    out_dir / "srcc.svg"};
  write_file_atomic(paths[0], report_csv(reports));
  write_file_atomic(paths[1], report_json(reports));
  write_file_atomic(paths[2], report_svg(reports));
  return paths;
}

}  // namespace mvqa

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

// Python bindings for the core metrics, codecs, models and pipeline stages.
// Images cross the boundary as uint8 numpy arrays shaped (H, W) or (H, W, 3).

#include <cstring>

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "mvqa/correlation.hpp"
#include "mvqa/dataset_pipeline.hpp"
#include "mvqa/detection_targets.hpp"
#include "mvqa/evaluation.hpp"
#include "mvqa/pipeline.hpp"
#include "mvqa/quality_models.hpp"
#include "mvqa/recognition_targets.hpp"
#include "mvqa/synthetic.hpp"
#include "mvqa/vision_backends.hpp"

namespace py = pybind11;
using namespace mvqa;

namespace {

using Array = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;
using BoxTuple = std::tuple<double, double, double, double>;

Image to_image(const Array& a) {
  const auto info = a.request();
  int channels = 1;
  if (info.ndim == 3) {
    channels = static_cast<int>(info.shape[2]);
  } else if (info.ndim != 2) {
    throw py::value_error("image must be (H, W) or (H, W, 3)");
  }
  if (channels != 1 && channels != 3) throw py::value_error("image must have 1 or 3 channels");
  Image img(static_cast<int>(info.shape[1]), static_cast<int>(info.shape[0]), channels);
  std::memcpy(img.data.data(), info.ptr, img.data.size());
  return img;
}

Array to_array(const Image& img) {
  std::vector<py::ssize_t> shape{img.height, img.width};
  if (img.channels != 1) shape.push_back(img.channels);
  Array a(shape);
  std::memcpy(a.mutable_data(), img.data.data(), img.data.size());
  return a;
}

BoundingBox to_box(const BoxTuple& b) {
  return {std::get<0>(b), std::get<1>(b), std::get<2>(b), std::get<3>(b)};
}

BoxTuple from_box(const BoundingBox& b) { return {b.x_min(), b.y_min(), b.x_max(), b.y_max()}; }

std::vector<Detection> to_detections(const std::vector<BoxTuple>& boxes,
                                      const std::vector<int>& classes) {
  if (!classes.empty() && classes.size() != boxes.size()) {
    throw py::value_error("classes must match boxes in length");
  }
  std::vector<Detection> out;
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    out.emplace_back(to_box(boxes[i]), classes.empty() ? 0 : classes[i], 1.0);
  }
  return out;
}

py::dict summary_dict(const StageSummary& s) {
  py::dict d;
  d["stage"] = s.stage;
  d["counts"] = s.counts;
  d["seconds"] = s.seconds;
  return d;
}

RunConfig run_config(const std::filesystem::path& config, std::optional<std::filesystem::path> out,
                     std::optional<std::uint64_t> seed, std::optional<std::size_t> jobs) {
  RunConfig cfg = load_run_config(config);
  if (out) cfg.out = *out;
  if (seed) {
    cfg.seed = cfg.train.seed = cfg.train.model.seed = *seed;
  }
  if (jobs) cfg.jobs = *jobs;
  return cfg;
}

}  // namespace

PYBIND11_MODULE(_mvqa, m) {
  m.doc() = "Task-oriented image quality assessment core";
  m.attr("__version__") = tool_version();

  static py::exception<Error> error(m, "Error");
  static py::exception<ConfigError> config_error(m, "ConfigError", error.ptr());
  static py::exception<SchemaError> schema_error(m, "SchemaError", error.ptr());
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const ConfigError& e) {
      py::set_error(config_error, e.what());
    } catch (const SchemaError& e) {
      py::set_error(schema_error, e.what());
    } catch (const InvalidArgument& e) {
      py::set_error(PyExc_ValueError, e.what());
    } catch (const Error& e) {
      py::set_error(error, e.what());
    }
  });

  // Formulas
  m.def("iou", [](const BoxTuple& a, const BoxTuple& b) { return iou(to_box(a), to_box(b)); },
        py::arg("a"), py::arg("b"), "IoU of two (x_min, y_min, x_max, y_max) boxes.");
  m.def("jaro_similarity", py::overload_cast<std::string_view, std::string_view>(&jaro_similarity),
        py::arg("s1"), py::arg("s2"));
  m.def("levenshtein", py::overload_cast<std::string_view, std::string_view>(&levenshtein),
        py::arg("s1"), py::arg("s2"));
  m.def("srcc", [](const std::vector<double>& x, const std::vector<double>& y) { return srcc(x, y); },
        py::arg("x"), py::arg("y"), "Spearman correlation; None for a constant series.");
  m.def("plcc", [](const std::vector<double>& x, const std::vector<double>& y) { return plcc(x, y); },
        py::arg("x"), py::arg("y"), "Pearson correlation; None for a constant series.");
  m.def("delta_object_iou", &delta_object_iou, py::arg("ref_iou"), py::arg("compressed_iou"));

  m.def(
      "match_detections",
      [](const std::vector<BoxTuple>& gt, const std::vector<BoxTuple>& det, double threshold,
         const std::string& strategy, const std::vector<int>& gt_classes,
         const std::vector<int>& det_classes) {
        MatchOptions opts;
        opts.threshold = threshold;
        opts.class_aware = !gt_classes.empty() || !det_classes.empty();
        if (strategy == "optimal") {
          opts.strategy = MatchStrategy::kOptimal;
        } else if (strategy == "greedy") {
          opts.strategy = MatchStrategy::kGreedy;
        } else {
          throw py::value_error("strategy must be 'optimal' or 'greedy'");
        }
        const auto g = to_detections(gt, gt_classes);
        const auto d = to_detections(det, det_classes);
        std::vector<std::tuple<std::size_t, std::size_t, double>> pairs;
        for (const auto& p : match_detections(g, d, opts).pairs) {
          pairs.emplace_back(p.gt_index, p.det_index, p.iou);
        }
        return pairs;
      },
      py::arg("gt"), py::arg("det"), py::arg("threshold") = 0.5, py::arg("strategy") = "optimal",
      py::arg("gt_classes") = std::vector<int>{}, py::arg("det_classes") = std::vector<int>{},
      "One-to-one matching; returns (gt_index, det_index, iou) triples.");

  // Images and codecs
  m.def("load_image", [](const std::filesystem::path& p) { return to_array(load_image(p)); });
  m.def("save_image", [](const Array& a, const std::filesystem::path& p) { save_image(to_image(a), p); });
  m.def(
      "jpeg_roundtrip",
      [](const Array& a, int quality) { return to_array(decode_jpeg(encode_jpeg(to_image(a), quality))); },
      py::arg("image"), py::arg("quality"));
  m.def("psnr", [](const Array& a, const Array& b) { return compute_psnr(to_image(a), to_image(b)); },
        py::arg("reference"), py::arg("distorted"));
  m.def("ssim", [](const Array& a, const Array& b) { return baseline_ssim(to_image(a), to_image(b)); },
        py::arg("reference"), py::arg("distorted"));

  // Synthetic oracle backends
  m.def(
      "synthetic_scene",
      [](const std::string& task, std::uint64_t seed, int width, int height) {
        const auto s = task == "plate" ? synthetic::plate_scene(seed, width, height)
                                       : synthetic::object_scene(seed, width, height);
        std::vector<BoxTuple> boxes;
        for (const auto& b : s.boxes) boxes.push_back(from_box(b));
        return py::make_tuple(to_array(s.image), boxes, s.plates);
      },
      py::arg("task") = "object", py::arg("seed") = 0, py::arg("width") = 160,
      py::arg("height") = 120, "Returns (image, boxes, plate strings).");
  m.def(
      "synthetic_face",
      [](std::uint64_t person, std::uint64_t shot, int size) {
        return to_array(synthetic::face_image(person, shot, size));
      },
      py::arg("person"), py::arg("shot") = 0, py::arg("size") = 112);
  m.def(
      "detect",
      [](const Array& a, const std::string& task, const std::string& backend) {
        std::vector<std::tuple<BoxTuple, int, double>> out;
        for (const auto& d : make_detector(backend, task_from_string(task))->detect(to_image(a))) {
          out.emplace_back(from_box(d.box), d.class_id, d.confidence);
        }
        return out;
      },
      py::arg("image"), py::arg("task") = "object", py::arg("backend") = "synthetic",
      "Returns (box, class_id, confidence) triples.");
  m.def(
      "recognize_plate",
      [](const Array& a, const std::string& backend) {
        const auto p = make_recognizer(backend)->recognize(to_image(a));
        return py::make_tuple(p.chars, p.confidence);
      },
      py::arg("image"), py::arg("backend") = "synthetic");
  m.def(
      "face_delta",
      [](const Array& ref, const Array& compr, const Array& db, const std::string& backend) {
        return face_delta(to_image(ref), to_image(compr), to_image(db), *make_embedder(backend));
      },
      py::arg("reference"), py::arg("compressed"), py::arg("database"),
      py::arg("backend") = "synthetic");

  // Quality models
  py::class_<QualityModel, std::shared_ptr<QualityModel>>(m, "QualityModel")
      .def_property_readonly("kind", [](const QualityModel& q) { return to_string(q.kind()); })
      .def_property_readonly("task", [](const QualityModel& q) { return q.config().task; })
      .def(
          "predict",
          [](const QualityModel& q, const py::object& a, const py::object& b) -> double {
            switch (q.kind()) {
              case ModelKind::kDetection:
                return static_cast<const DetectionQualityModel&>(q).predict(
                    to_image(a.cast<Array>()), to_image(b.cast<Array>()));
              case ModelKind::kPlate:
                return static_cast<const PlateQualityModel&>(q).predict(to_image(a.cast<Array>()));
              case ModelKind::kFace: {
                std::vector<std::pair<Image, Image>> pairs;
                for (const auto& p : a.cast<std::vector<std::pair<Array, Array>>>()) {
                  pairs.emplace_back(to_image(p.first), to_image(p.second));
                }
                return static_cast<const FaceQualityModel&>(q).predict(pairs);
              }
            }
            return 0.0;
          },
          py::arg("a"), py::arg("b") = py::none(),
          "Detection: predict(ref_crop, compressed_crop). Plate: predict(crop). "
          "Face: predict([(ref, compressed), ...]).");
  m.def("load_model", [](const std::filesystem::path& p) {
    return std::shared_ptr<QualityModel>(load_model(p));
  });

  // Pipeline
  m.def(
      "run_stage",
      [](const std::string& stage, const std::filesystem::path& config,
         std::optional<std::filesystem::path> out, std::optional<std::uint64_t> seed,
         std::optional<std::size_t> jobs) {
        const RunConfig cfg = run_config(config, out, seed, jobs);
        StageSummary s;
        {
          py::gil_scoped_release release;
          s = run_stage(stage, cfg);
        }
        return summary_dict(s);
      },
      py::arg("stage"), py::arg("config"), py::arg("out") = py::none(), py::arg("seed") = py::none(),
      py::arg("jobs") = py::none());
  m.def(
      "run_all",
      [](const std::filesystem::path& config, std::optional<std::filesystem::path> out,
         std::optional<std::uint64_t> seed, std::optional<std::size_t> jobs) {
        const RunConfig cfg = run_config(config, out, seed, jobs);
        std::vector<StageSummary> summaries;
        {
          py::gil_scoped_release release;
          summaries = run_all(cfg);
        }
        py::list l;
        for (const auto& s : summaries) l.append(summary_dict(s));
        return l;
      },
      py::arg("config"), py::arg("out") = py::none(), py::arg("seed") = py::none(),
      py::arg("jobs") = py::none());
}

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

#include <cmath>
#include <map>
#include <random>

#include <gtest/gtest.h>

#include "mvqa/io_util.hpp"
#include "mvqa/synthetic.hpp"
#include "mvqa/training.hpp"
#include "model_helpers.hpp"
#include "tmpdir.hpp"

using namespace mvqa;

namespace {

Manifest sources(std::size_t n, std::size_t variants) {
  Manifest m;
  m.task = "object";
  for (std::size_t i = 0; i < n; ++i) {
    LabeledFrame f;
    f.source_id = "s" + std::to_string(i);
    f.source_path = f.source_id + ".ppm";
    f.width = f.height = 8;
    for (std::size_t v = 0; v < variants; ++v) f.variants.push_back({"jpeg", 10.0 + v, "x", 30});
    m.frames.push_back(f);
  }
  return m;
}

std::vector<Sample> detection_samples(const QualityModel& m, std::size_t n, std::uint64_t seed,
                                      const std::string& split = "train") {
  std::vector<Sample> out;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  for (std::size_t i = 0; i < n; ++i) {
    Sample s;
    s.pairs.emplace_back(m.prepare_tensor(noise_image(16, 16, 3, seed + 2 * i)),
                         m.prepare_tensor(noise_image(16, 16, 3, seed + 2 * i + 1)));
    s.target = u(rng);
    s.source_id = "s" + std::to_string(i);
    s.split = split;
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace

TEST(Splits, CountsPerSource) {
  const auto m = make_splits(sources(10, 5), 0.8, 0.2, 4);
  std::map<std::string, std::size_t> variants;
  for (const auto& f : m.frames) variants[f.split] += f.variants.size();
  EXPECT_EQ(variants["train"], 40u);
  EXPECT_EQ(variants["val"], 10u);
  EXPECT_EQ(variants.count("test"), 0u);
  EXPECT_NO_THROW(check_split_hygiene(m));
}

TEST(Splits, DeterministicAndValidated) {
  const auto a = make_splits(sources(30, 1), 0.6, 0.2, 9);
  const auto b = make_splits(sources(30, 1), 0.6, 0.2, 9);
  const auto c = make_splits(sources(30, 1), 0.6, 0.2, 10);
  std::string sa, sb, sc;
  for (const auto& f : a.frames) sa += f.split[0];
  for (const auto& f : b.frames) sb += f.split[0];
  for (const auto& f : c.frames) sc += f.split[0];
  EXPECT_EQ(sa, sb);
  EXPECT_NE(sa, sc);
  EXPECT_THROW(make_splits(sources(10, 1), 1.0, 0.1, 0), InvalidArgument);
  EXPECT_THROW(make_splits(sources(10, 1), -0.1, 0.1, 0), InvalidArgument);
  EXPECT_THROW(make_splits(sources(2, 1), 0.9, 0.1, 0), InvalidArgument);
}

TEST(Splits, RepeatedSourceKeepsOneLabel) {
  auto m = sources(6, 1);
  m.frames.push_back(m.frames[0]);
  const auto s = make_splits(m, 0.5, 0.2, 1);
  EXPECT_EQ(s.frames.front().split, s.frames.back().split);
  EXPECT_NO_THROW(check_split_hygiene(s));
}

TEST(Targets, JsonlRoundTrip) {
  ScratchDir dir;
  const std::vector<TargetRecord> recs{{"s0001", 2, "jpeg", 30, "delta_object_iou", 0.125},
                                       {"s0002", std::nullopt, "jpeg", 10, "mean_iou", 0.5}};
  write_targets(recs, dir / "t.jsonl");
  EXPECT_EQ(read_targets(dir / "t.jsonl"), recs);
  EXPECT_NE(targets_to_jsonl(recs).find("\"object_id\":null"), std::string::npos);
}

TEST(Targets, NamesPerTask) {
  EXPECT_TRUE(target_compatible(Task::kObject, "delta_object_iou"));
  EXPECT_TRUE(target_compatible(Task::kPlate, "jaro"));
  EXPECT_FALSE(target_compatible(Task::kFace, "jaro"));
  EXPECT_EQ(model_kind_for(Task::kFace), ModelKind::kFace);
}

TEST(Targets, LosslessCodecGivesZeroDeltas) {
  ScratchDir dir;
  Manifest m;
  m.task = "object";
  CodecSpec copy;
  copy.name = "copy";
  copy.encode_command = copy.decode_command = "cp {input} {output}";
  const SyntheticDetector det;
  for (std::uint64_t s = 0; s < 3; ++s) {
    const auto scene = synthetic::object_scene(s);
    LabeledFrame f;
    f.source_id = "s" + std::to_string(s);
    f.source_path = f.source_id + ".ppm";
    save_image(scene.image, dir / f.source_path);
    f.width = scene.image.width;
    f.height = scene.image.height;
    f.gt = det.detect(scene.image);
    for (double q : {10.0, 90.0}) {
      const auto name = f.source_id + "_" + format_quality(q) + ".jpg";
      const auto name_copy = f.source_id + "_copy.ppm";
      encode_variant(ImageRef(dir / f.source_path, f.width, f.height), jpeg_codec(), q, dir / name);
      f.variants.push_back({"jpeg", q, name, 0});
      if (q == 90.0) {
        encode_variant(ImageRef(dir / f.source_path, f.width, f.height), copy, 1, dir / name_copy);
        f.variants.push_back({"copy", 1, name_copy, 100});
      }
    }
    m.frames.push_back(f);
  }
  Backends b;
  b.detector = &det;
  TargetOptions opts;
  opts.base_dir = dir.path();
  TargetStats stats;
  const auto recs = compute_targets(m, b, opts, &stats);
  EXPECT_EQ(stats.reference_calls, 3u);
  double low = 0.0;
  std::size_t n_low = 0;
  for (const auto& r : recs) {
    if (r.codec == "copy" && r.target_name == "delta_object_iou") EXPECT_EQ(r.value, 0.0);
    if (r.codec == "jpeg" && r.quality_factor == 10 && r.target_name == "delta_object_iou") {
      low += r.value;
      ++n_low;
    }
  }
  ASSERT_GT(n_low, 0u);
  EXPECT_GT(low / n_low, 0.0);

  opts.jobs = 3;
  EXPECT_EQ(compute_targets(m, b, opts), recs);
  EXPECT_THROW(compute_targets(m, Backends{}, opts), ConfigError);
}

TEST(Training, HeadGradientMatchesFiniteDifferences) {
  for (auto kind : {ModelKind::kDetection, ModelKind::kPlate, ModelKind::kFace}) {
    const auto cfg = small_config(kind);
    auto model = make_model(cfg);
    randomize(*model, 17);
    std::vector<Sample> batch;
    std::mt19937_64 rng(3);
    for (int i = 0; i < 3; ++i) {
      Sample s;
      const int c = kind == ModelKind::kPlate ? 1 : 3;
      for (int k = 0; k < (kind == ModelKind::kFace ? 2 : 1); ++k) {
        s.pairs.emplace_back(model->prepare_tensor(noise_image(20, 20, c, rng())),
                             model->prepare_tensor(noise_image(20, 20, c, rng())));
      }
      if (kind == ModelKind::kPlate) s.pairs[0].first = nn::Tensor{};
      s.target = 0.1 * i;
      s.split = "train";
      batch.push_back(std::move(s));
    }
    EXPECT_LT(head_gradient_error(*model, batch, backbone_block_count(cfg)), 1e-3)
        << to_string(kind);
  }
}

TEST(Training, ZeroEpochsKeepsInitialisation) {
  TrainConfig cfg;
  cfg.model = small_config(ModelKind::kDetection);
  cfg.seed = cfg.model.seed;
  cfg.epochs = 0;
  const auto model = make_model(cfg.model);
  const auto samples = detection_samples(*model, 6, 1);
  const auto r = train_model(cfg, samples);
  ASSERT_EQ(r.checkpoints.size(), 1u);
  EXPECT_EQ(r.checkpoints[0].epoch, 0u);
  EXPECT_EQ(r.best, 0u);
  auto init = make_model(cfg.model);
  EXPECT_EQ(r.checkpoints[0].model_blob, serialize_model(*init));
}

TEST(Training, DeterministicWithValidationSelection) {
  TrainConfig cfg;
  cfg.model = small_config(ModelKind::kDetection);
  cfg.epochs = 4;
  cfg.batch_size = 4;
  cfg.seed = 5;
  cfg.model.seed = 5;
  const auto model = make_model(cfg.model);
  auto samples = detection_samples(*model, 12, 2);
  const auto val = detection_samples(*model, 5, 40, "val");
  samples.insert(samples.end(), val.begin(), val.end());
  const auto a = train_model(cfg, samples);
  const auto b = train_model(cfg, samples);
  ASSERT_EQ(a.checkpoints.size(), 5u);
  for (std::size_t e = 0; e < a.checkpoints.size(); ++e) {
    EXPECT_EQ(a.checkpoints[e].epoch, e);
    EXPECT_EQ(a.checkpoints[e].train_loss, b.checkpoints[e].train_loss);
    EXPECT_EQ(a.checkpoints[e].val_srcc, b.checkpoints[e].val_srcc);
    // The zero-initialised head predicts a constant, so epoch 0 has no SRCC.
    EXPECT_EQ(a.checkpoints[e].val_srcc.has_value(), e > 0);
  }
  EXPECT_EQ(a.best, b.best);
  EXPECT_FALSE(a.checkpoints[a.best].model_blob.empty());
  const auto csv = training_log_csv(a);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "epoch,train_loss,val_loss,val_srcc,train_srcc");
}

TEST(Training, CheckpointsAndInitWeights) {
  ScratchDir dir;
  TrainConfig cfg;
  cfg.model = small_config(ModelKind::kDetection);
  cfg.epochs = 5;
  cfg.checkpoint_every = 2;
  cfg.checkpoint_dir = dir / "ckpt";
  const auto model = make_model(cfg.model);
  const auto samples = detection_samples(*model, 8, 3);
  const auto r = train_model(cfg, samples);
  EXPECT_TRUE(std::filesystem::exists(dir / "ckpt" / "epoch_0000.mvqa"));
  EXPECT_TRUE(std::filesystem::exists(dir / "ckpt" / "epoch_0002.mvqa"));
  EXPECT_TRUE(std::filesystem::exists(dir / "ckpt" / "epoch_0005.mvqa"));
  EXPECT_TRUE(r.checkpoints[1].model_blob.empty());
  EXPECT_EQ(r.best, r.checkpoints.size() - 1);

  TrainConfig resume = cfg;
  resume.epochs = 0;
  resume.checkpoint_dir.clear();
  resume.init_weights = dir / "ckpt" / "epoch_0005.mvqa";
  EXPECT_EQ(train_model(resume, samples).checkpoints[0].model_blob,
            read_file_bytes(dir / "ckpt" / "epoch_0005.mvqa"));
  resume.model.hidden = 9;
  EXPECT_THROW(train_model(resume, samples), SchemaError);
}

TEST(Training, OnlyTrainSplitReachesTheLoop) {
  const auto model = make_model(small_config(ModelKind::kDetection));
  auto samples = detection_samples(*model, 3, 4);
  EXPECT_NO_THROW(assert_train_split(samples));
  samples[1].split = "val";
  EXPECT_THROW(assert_train_split(samples), Error);
}

TEST(Training, ConfigValidation) {
  TrainConfig cfg;
  cfg.task = Task::kFace;
  cfg.target = "face_delta";
  cfg.model = small_config(ModelKind::kDetection);
  EXPECT_THROW(validate(cfg), ConfigError);
  cfg.model = small_config(ModelKind::kFace);
  EXPECT_NO_THROW(validate(cfg));
  cfg.target = "jaro";
  EXPECT_THROW(validate(cfg), ConfigError);
  cfg.target = "face_delta";
  cfg.schedule = "step";
  EXPECT_THROW(validate(cfg), ConfigError);
}

import json
import math

import numpy as np
import pytest

import mvqa


def test_formulas():
    assert mvqa.iou((0, 0, 10, 10), (5, 0, 15, 10)) == pytest.approx(1 / 3)
    assert mvqa.jaro_similarity("MARTHA", "MARHTA") == pytest.approx(0.9444444444444445, abs=1e-15)
    assert mvqa.levenshtein("AB123", "AB124") == 1
    assert mvqa.srcc([1, 2, 3, 4, 5], [5, 6, 7, 8, 7]) == pytest.approx(0.8208, abs=1e-4)
    assert mvqa.plcc([1, 1, 1], [1, 2, 3]) is None
    assert mvqa.delta_object_iou(0.9, 0.6) == pytest.approx(0.3)


def test_matching():
    gt = [(0, 0, 10, 10), (20, 20, 30, 30)]
    det = [(21, 20, 31, 30), (0, 1, 10, 11)]
    pairs = mvqa.match_detections(gt, det)
    assert sorted((g, d) for g, d, _ in pairs) == [(0, 1), (1, 0)]
    with pytest.raises(ValueError):
        mvqa.match_detections(gt, det, strategy="nope")


def test_psnr_and_jpeg():
    img = np.full((16, 16), 100, dtype=np.uint8)
    other = img.copy()
    other[0, 0] = 116
    assert mvqa.psnr(img, other) == pytest.approx(10 * math.log10(255**2 * 256 / 256), abs=1e-9)
    assert mvqa.psnr(img, img) == 100.0
    scene, boxes, _ = mvqa.synthetic_scene("object", 3)
    assert scene.shape == (120, 160, 3) and len(boxes) >= 2
    low = mvqa.jpeg_roundtrip(scene, 10)
    high = mvqa.jpeg_roundtrip(scene, 90)
    assert mvqa.psnr(scene, low) < mvqa.psnr(scene, high)
    assert mvqa.ssim(scene, scene) == pytest.approx(1.0)


def test_backends():
    scene, boxes, plates = mvqa.synthetic_scene("plate", 5)
    dets = mvqa.detect(scene, task="plate")
    assert len(dets) == len(boxes)
    face = mvqa.synthetic_face(1, 0)
    db = mvqa.synthetic_face(1, 1)
    assert mvqa.face_delta(face, face, db) == 0.0


def test_pipeline(tmp_path):
    cfg = {
        "task": "object",
        "seed": 3,
        "out": str(tmp_path / "run"),
        "corpus": {"synthetic": {"count": 6}},
        "codecs": [{"name": "jpeg", "grid": [20, 60]}],
        "label": {"fractions": [0.5, 0.17]},
        "train": {"epochs": 2, "input_width": 16, "input_height": 16, "stage_channels": [4, 8]},
        "eval": {"split": "all"},
    }
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    summaries = mvqa.run_all(str(path))
    assert [s["stage"] for s in summaries] == ["sweep", "label", "targets", "train", "eval", "report"]
    assert summaries[0]["counts"]["variants"] == 12
    assert (tmp_path / "run" / "report" / "report.csv").exists()
    model = mvqa.load_model(str(tmp_path / "run" / "train" / "model.mvqa"))
    assert model.kind == "detection"
    crop = scene_crop = np.zeros((20, 20, 3), dtype=np.uint8)
    assert math.isfinite(model.predict(crop, scene_crop))
    with pytest.raises(mvqa.ConfigError):
        mvqa.run_stage("sweep", str(tmp_path / "missing.json"))

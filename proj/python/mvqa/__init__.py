"""Task-oriented image quality assessment.

Thin wrapper over the C++ core: formulas (IoU, Jaro, Levenshtein, SRCC,
PLCC), the JPEG codec, synthetic oracle backends, trained quality models and
the pipeline stages.
"""

from ._mvqa import (
    ConfigError,
    Error,
    QualityModel,
    SchemaError,
    __version__,
    delta_object_iou,
    detect,
    face_delta,
    iou,
    jaro_similarity,
    jpeg_roundtrip,
    levenshtein,
    load_image,
    load_model,
    match_detections,
    plcc,
    psnr,
    recognize_plate,
    run_all,
    run_stage,
    save_image,
    srcc,
    ssim,
    synthetic_face,
    synthetic_scene,
)

__all__ = [
    "ConfigError",
    "Error",
    "QualityModel",
    "SchemaError",
    "__version__",
    "delta_object_iou",
    "detect",
    "face_delta",
    "iou",
    "jaro_similarity",
    "jpeg_roundtrip",
    "levenshtein",
    "load_image",
    "load_model",
    "match_detections",
    "plcc",
    "psnr",
    "recognize_plate",
    "run_all",
    "run_stage",
    "save_image",
    "srcc",
    "ssim",
    "synthetic_face",
    "synthetic_scene",
]

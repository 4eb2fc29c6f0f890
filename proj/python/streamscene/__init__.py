"""Streaming 3D scene understanding: spatial memory, box matching, metrics and replay."""

import json as _json

from ._streamscene import (
    CATEGORIES,
    Box,
    ConfigError,
    ContractError,
    Dataset,
    DegenerateGeometryError,
    DegenerateOrientationError,
    Error,
    IoError,
    ParseError,
    PlacementError,
    ProtocolError,
    SceneDescription,
    SchemaError,
    SpatialMemory,
    UnknownLabelError,
    alpha,
    beta,
    boxes_to_text,
    fuzzy_score,
    ground_align_transform,
    hungarian,
    iou3d,
    load_dataset,
    merge_detections,
    min_area_rect,
    parse,
    run,
    simulate,
    vanilla_f1,
)
from ._streamscene import evaluate_json as _evaluate_json

__version__ = "0.1.0"


def evaluate(preds, lenient, strict, categories=None, iou_threshold=0.25):
    """Per-class fuzzy F1 report as a dict; `strict` indexes members of `lenient`."""
    return _json.loads(_evaluate_json(preds, lenient, strict, categories, iou_threshold))


def replay(datasets, config=None, detector_command=None, timeout=60.0, workers=0):
    """Replays datasets and returns the JSON report as a dict."""
    if isinstance(datasets, Dataset):
        datasets = [datasets]
    cfg = _json.dumps(config or {})
    return _json.loads(run(list(datasets), cfg, detector_command, timeout, workers, "json"))

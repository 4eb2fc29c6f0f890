import itertools
import json
import math
import os
import pathlib

import numpy as np
import pytest

import streamscene as ss


def test_iou_examples():
    a = ss.Box("chair", [0, 0, 0], [1, 1, 1], 0.0)
    b = ss.Box("chair", [0.5, 0, 0], [1, 1, 1], 0.0)
    assert ss.iou3d(a, a) == pytest.approx(1.0)
    assert ss.iou3d(a, b) == pytest.approx(1 / 3)
    # 45-degree rotation of a unit cube: octagon overlap 2(sqrt2 - 1).
    c = ss.Box("chair", [0, 0, 0], [1, 1, 1], math.pi / 4)
    inter = 2 * (math.sqrt(2) - 1)
    assert ss.iou3d(a, c) == pytest.approx(inter / (2 - inter))
    assert len(a.corners()) == 8


def test_fusion_schedule_ratios():
    assert ss.alpha(5, 32) == (1, 1)
    assert ss.alpha(40, 32) == (32, 39)
    assert ss.beta(40, 32) == (39, 40)


def test_memory_size_law():
    mem = ss.SpatialMemory(capacity_frames=4, frame_budget=100)
    rng = np.random.default_rng(0)
    for t in range(1, 11):
        n = int(rng.integers(150, 400))
        outcome = mem.fuse(rng.normal(size=(n, 3)), [t % 10 + 1] * n, seed=t)
        assert outcome == "fused"
        assert len(mem) == min(t, 4) * 100
        assert len(mem.labels()) == len(mem) == len(mem.origins())
    assert mem.points().shape == (400, 3)
    assert mem.fuse(np.zeros((0, 3)), [], seed=99) == "skipped"
    assert mem.t == 11 and mem.fused_frames == 10


def test_parse_round_trip_and_diagnostics():
    text = "wall0=Wall(0,0,0,4,0,0,2.5,0.1)\nb1=Bbox(chair,1,2,0.45,0.3,0.6,0.5,0.9)\nnonsense\n"
    desc, diags = ss.parse(text)
    assert len(desc) == 2 and desc.bbox_count == 1
    assert [d[0] for d in diags] == [3]
    rec = desc.records[1]
    assert rec["kind"] == "bbox" and rec["label"] == "chair"
    again, none = ss.parse(desc.serialize())
    assert none == [] and again.serialize() == desc.serialize()
    with pytest.raises(ss.ParseError):
        ss.parse(text, strict=True)
    box = desc.boxes()[0]
    assert box.yaw == pytest.approx(0.3)
    assert ss.parse(ss.boxes_to_text([box]))[0].boxes()[0].label == "chair"


def test_hungarian_matches_brute_force():
    rng = np.random.default_rng(1)
    for _ in range(20):
        costs = rng.uniform(0, 10, size=(4, 4))
        pairs, total = ss.hungarian(costs)
        best = min(sum(costs[i, p[i]] for i in range(4)) for p in itertools.permutations(range(4)))
        assert total == pytest.approx(best)
        assert sorted(r for r, _ in pairs) == [0, 1, 2, 3]
    pairs, _ = ss.hungarian([[math.inf, 1.0], [2.0, math.inf]])
    assert pairs == [(0, 1), (1, 0)]


def test_fuzzy_metric():
    gt = [ss.Box("chair", [0, 0, 0], [1, 1, 1]), ss.Box("chair", [5, 0, 0], [1, 1, 1])]
    # Predicting only the lenient-only object: a true positive for precision,
    # no recall credit.
    s = ss.fuzzy_score([gt[1]], gt, strict=[0])
    assert (s["precision"], s["recall"], s["f1"]) == (1.0, 0.0, 0.0)
    s = ss.fuzzy_score(gt, gt, strict=[0])
    assert s["f1"] == 1.0
    # Equal strict and lenient sets reduce to vanilla F1.
    preds = [gt[0]]
    assert ss.fuzzy_score(preds, gt, strict=[0, 1])["f1"] == pytest.approx(ss.vanilla_f1(preds, gt))
    report = ss.evaluate(preds, gt, strict=[0])
    assert report["average_fuzzy_f1"] == 1.0
    assert len(report["classes"]) == 10


def test_min_area_rect_recovers_rotation():
    theta = 0.4
    rot = np.array([[math.cos(theta), -math.sin(theta)], [math.sin(theta), math.cos(theta)]])
    corners = np.array([[-2, -0.5], [2, -0.5], [2, 0.5], [-2, 0.5]]) @ rot.T + [1, 1]
    center, dims, yaw = ss.min_area_rect(corners)
    assert np.allclose(center, [1, 1]) and np.allclose(dims, [4, 1])
    assert yaw == pytest.approx(theta)
    with pytest.raises(ss.DegenerateGeometryError):
        ss.min_area_rect(np.array([[0, 0], [1, 1], [2, 2]]))


def test_ground_align_is_rotation():
    r = ss.ground_align_transform(0.3, 0.1)
    assert np.allclose(r @ r.T, np.eye(3))
    assert np.linalg.det(r) == pytest.approx(1.0)


CONFIG = {"N": 4, "p": 512, "frame_count": 4, "frame_stride": 1}


def test_replay_report_matches_schema(tmp_path):
    jsonschema = pytest.importorskip("jsonschema")
    schema = json.loads(pathlib.Path(os.environ["STREAMSCENE_SCHEMA"]).read_text())
    ds = ss.simulate(3, n_objects=4, frames=4)
    assert ds.frame_count == 4 and len(ds.annotations) == 4
    report = ss.replay(ds, CONFIG)
    jsonschema.validate(report, schema)
    final = report["scenes"][0]["final"]
    assert final["memory_size"] == 4 * 512
    assert 0.0 <= final["eval"]["average_fuzzy_f1"] <= 1.0

    ds.save(tmp_path / "scene")
    loaded = ss.load_dataset(tmp_path / "scene")
    assert ss.replay(loaded, CONFIG) == report
    with pytest.raises(ss.IoError):
        ss.load_dataset(tmp_path / "missing")
    (tmp_path / "bad.json").write_text('{"format": "nope"}')
    with pytest.raises(ss.SchemaError):
        ss.load_dataset(tmp_path / "bad.json")
    with pytest.raises(ss.PlacementError):
        ss.simulate(0, n_objects=200)


def test_external_detector_matches_builtin():
    cli = os.environ.get("STREAMSCENE_CLI")
    if not cli:
        pytest.skip("STREAMSCENE_CLI not set")
    ds = ss.simulate(5, n_objects=3, frames=3)
    cfg = dict(CONFIG, frame_count=3)
    builtin = ss.replay(ds, cfg)
    external = ss.replay(ds, cfg, detector_command=f"{cli} oracle-detector")
    a = [s["eval"]["average_fuzzy_f1"] for s in builtin["scenes"][0]["timesteps"]]
    b = [s["eval"]["average_fuzzy_f1"] for s in external["scenes"][0]["timesteps"]]
    assert a == pytest.approx(b)
    with pytest.raises(ss.ProtocolError):
        ss.replay(ds, cfg, detector_command="cat", timeout=2.0)
    with pytest.raises(ss.ConfigError):
        ss.replay(ds, {"bogus": 1})

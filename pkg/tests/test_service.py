"""HTTP service tests over the in-process test client."""

from __future__ import annotations

import pytest
from fastapi.testclient import TestClient

from zstripe.service import app

client = TestClient(app)


def test_health():
    resp = client.get("/health")
    assert resp.status_code == 200
    body = resp.json()
    assert body["status"] == "ok"
    assert body["version"]


@pytest.fixture(scope="module")
def synth_scenario(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("svc")
    resp = client.post("/synth", json={
        "out_dir": str(tmp), "width": 256, "height": 192, "frame_count": 80,
        "side": "left", "speed": 3.0, "seed": 11, "scenario_id": "svc1",
    })
    assert resp.status_code == 200
    return tmp, resp.json()


def test_synth_reports_ground_truth(synth_scenario):
    _, body = synth_scenario
    assert body["gt_label"] == "crossing_lr"
    assert 0 <= body["gt_start"] <= body["gt_end"]


def test_run_of_detects_event(synth_scenario):
    tmp, body = synth_scenario
    resp = client.post("/run", json={
        "variant": "of",
        "scenario_id": "svc1",
        "frames": body["frames_path"],
        "annotations": body["annotations_path"],
        "output_dir": str(tmp / "out"),
        "detect_params": {"gap_tolerance": 30},
    })
    assert resp.status_code == 200
    data = resp.json()
    assert len(data["events"]) == 1
    assert data["events"][0]["direction"] == "left_to_right"
    assert data["metrics"]["tp"] == 1
    assert data["fps"] > 0
    assert "svc1" in data["artifacts"]


def test_run_cnn_without_saliency_422(synth_scenario):
    tmp, body = synth_scenario
    resp = client.post("/run", json={
        "variant": "cnn",
        "frames": body["frames_path"],
        "output_dir": str(tmp / "out2"),
    })
    assert resp.status_code == 422


def test_run_missing_file_400(tmp_path):
    resp = client.post("/run", json={
        "variant": "of",
        "frames": str(tmp_path / "ghost.fsq"),
        "output_dir": str(tmp_path / "out"),
    })
    assert resp.status_code == 400


def test_synth_invalid_params_422(tmp_path):
    resp = client.post("/synth", json={
        "out_dir": str(tmp_path), "width": 16, "height": 16,
        "frame_count": 10,
    })
    assert resp.status_code == 422


def test_stripes_endpoint(synth_scenario, tmp_path):
    tmp, body = synth_scenario
    run = client.post("/run", json={
        "variant": "of",
        "scenario_id": "svc1",
        "frames": body["frames_path"],
        "output_dir": str(tmp / "out3"),
        "detect_params": {"gap_tolerance": 30},
    })
    morton = run.json()["artifacts"]["svc1"]["morton_csv"]
    resp = client.post("/stripes", json={
        "morton_csv": morton,
        "out_path": str(tmp_path / "plot.svg"),
        "timestamp": False,
    })
    assert resp.status_code == 200
    assert resp.json()["marks"] > 0
    assert (tmp_path / "plot.svg").exists()

"""FastAPI service wrapping the pipeline for long-running, multi-client use.

Requests reference files on the service host; responses carry events,
metrics, and artifact paths. Run with:

    uvicorn zstripe.service:app --host 0.0.0.0 --port 8000
"""

from __future__ import annotations

from pathlib import Path

from fastapi import FastAPI, HTTPException

from . import __version__
from .config import PipelineConfig, ScenarioInput
from .errors import ConfigError, ZStripeError
from .events import DetectParams
from .evaluate import generate_crossing, generate_non_crossing
from .features import OfParams, SaliencyParams
from .flow import FlowParams
from .media_io import write_annotations, write_fseq
from .pipeline import run_pipeline
from .schemas import (
    ArtifactsModel,
    EventModel,
    HealthResponse,
    MetricsModel,
    RunRequest,
    RunResponse,
    StripesRequest,
    StripesResponse,
    SynthRequest,
    SynthResponse,
)
from .stripes import emit_stripes
from .zorder import read_morton_csv

app = FastAPI(title="zstripe", version=__version__)


@app.get("/health", response_model=HealthResponse)
def health() -> HealthResponse:
    return HealthResponse(version=__version__)


def _config_from_request(req: RunRequest) -> PipelineConfig:
    try:
        cfg = PipelineConfig(
            variant=req.variant,
            scenarios=[ScenarioInput(
                scenario_id=req.scenario_id,
                frames=Path(req.frames) if req.frames else None,
                saliency=Path(req.saliency) if req.saliency else None,
                flow=Path(req.flow) if req.flow else None,
            )],
            annotations=Path(req.annotations) if req.annotations else None,
            output_dir=Path(req.output_dir),
            flow_params=FlowParams(**req.flow_params.model_dump()),
            of_params=OfParams(**req.of_params.model_dump()),
            saliency_params=SaliencyParams(**req.saliency_params.model_dump()),
            detect_params=DetectParams(**req.detect_params.model_dump()),
            roi_fractions=req.roi_fractions,
            gap_fractions=req.gap_fractions,
            bits_per_dim=req.bits_per_dim,
            iou_threshold=req.iou_threshold,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    cfg.validate()
    return cfg


@app.post("/run", response_model=RunResponse)
def run(req: RunRequest) -> RunResponse:
    try:
        cfg = _config_from_request(req)
        result = run_pipeline(cfg)
    except ConfigError as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from exc
    except ZStripeError as exc:
        raise HTTPException(status_code=400, detail=str(exc)) from exc
    events = [
        EventModel(scenario_id=res.scenario_id, start_frame=ev.start_frame,
                   end_frame=ev.end_frame, variant=ev.variant,
                   direction=ev.direction, peak_value=ev.peak_value)
        for res in result.scenarios for ev in res.events
    ]
    artifacts = {
        res.scenario_id: ArtifactsModel(features_csv=str(res.features_csv),
                                        morton_csv=str(res.morton_csv),
                                        events_csv=str(res.events_csv))
        for res in result.scenarios
    }
    metrics = None
    if result.metrics is not None:
        m = result.metrics
        metrics = MetricsModel(tp=m.tp, fp=m.fp, tn=m.tn, fn=m.fn, f1=m.f1,
                               sensitivity=m.sensitivity,
                               specificity=m.specificity,
                               mean_iou=m.mean_iou, fps=m.fps)
    return RunResponse(events=events, artifacts=artifacts, metrics=metrics,
                       fps=result.fps)


@app.post("/synth", response_model=SynthResponse)
def synth(req: SynthRequest) -> SynthResponse:
    out_dir = Path(req.out_dir)
    try:
        if req.kind == "crossing":
            frames, sal, gt = generate_crossing(
                req.width, req.height, req.frame_count, start_side=req.side,
                speed_px_per_frame=req.speed, texture_seed=req.seed,
                scenario_id=req.scenario_id)
        else:
            frames, sal, gt = generate_non_crossing(
                req.width, req.height, req.frame_count, kind=req.kind,
                texture_seed=req.seed, scenario_id=req.scenario_id)
    except ZStripeError as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from exc
    out_dir.mkdir(parents=True, exist_ok=True)
    frames_path = out_dir / "frames.fsq"
    sal_path = out_dir / "saliency.fsq"
    ann_path = out_dir / "annotations.csv"
    write_fseq(frames, frames_path, channel_type=0)
    write_fseq(sal, sal_path, channel_type=1)
    write_annotations([gt], ann_path)
    return SynthResponse(frames_path=str(frames_path),
                         saliency_path=str(sal_path),
                         annotations_path=str(ann_path),
                         gt_start=gt.start_frame, gt_end=gt.end_frame,
                         gt_label=gt.label)


@app.post("/stripes", response_model=StripesResponse)
def stripes(req: StripesRequest) -> StripesResponse:
    try:
        out = emit_stripes(req.morton_csv, req.out_path, fmt=req.format,
                           activations_csv=req.activations_csv,
                           timestamp=req.timestamp)
        records, _, _ = read_morton_csv(req.morton_csv)
    except ZStripeError as exc:
        raise HTTPException(status_code=400, detail=str(exc)) from exc
    return StripesResponse(out_path=str(out),
                           marks=sum(1 for r in records if r.code != 0))

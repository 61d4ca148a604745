"""End-to-end pipeline wiring: inputs -> features -> codes -> events -> metrics.

Each stage is also exposed on its own so the per-stage CLI commands produce
byte-identical artifacts to a full run: feature values travel as float32,
CSVs print them with shortest round-trip formatting, and quantization reads
them back through the same float64 path either way.
"""

from __future__ import annotations

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import PipelineConfig, ScenarioInput
from .errors import ConfigError
from .evaluate import MetricsReport, match_and_score, throughput, write_metrics_csv
from .events import (
    DetectParams,
    EventWindow,
    FrameActivation,
    activations_from_codes,
    detect_events,
    write_events_csv,
)
from .features import (
    CellFeatureVector,
    OfParams,
    SaliencyParams,
    of_features,
    saliency_features,
    write_features_csv,
)
from .flow import FlowParams, flow_sequence
from .grid import RoiGrid, cell_mean_flow, cell_mean_saliency, make_grid
from .media_io import (
    FlowSequence,
    FrameSequence,
    SaliencySequence,
    read_annotations,
    read_fseq,
)
from .zorder import MortonRecord, Quantizer, encode_features, write_morton_csv

logger = logging.getLogger("zstripe")


@dataclass
class ScenarioResult:
    scenario_id: str
    events: list[EventWindow]
    activations: list[FrameActivation]
    features_csv: Path
    morton_csv: Path
    events_csv: Path
    frame_count: int
    elapsed: float

    @property
    def fps(self) -> float:
        if self.frame_count < 1 or self.elapsed <= 0:
            return 0.0
        return throughput(self.frame_count, self.elapsed)


@dataclass
class PipelineResult:
    scenarios: list[ScenarioResult]
    metrics: MetricsReport | None
    metrics_csv: Path | None
    fps: float


def of_features_from_flow(flows: FlowSequence, grid: RoiGrid,
                          params: OfParams) -> list[CellFeatureVector]:
    """Flow field i carries the motion arriving at frame i + 1."""
    means = [cell_mean_flow(flows.fields[i], grid, frame=i + 1)
             for i in range(len(flows))]
    return of_features(means, params)


def cnn_features_from_saliency(sal: SaliencySequence, grid: RoiGrid,
                               params: SaliencyParams) -> list[CellFeatureVector]:
    means = [cell_mean_saliency(sal.frames[t], grid, frame=t)
             for t in range(len(sal))]
    return saliency_features(means, params)


def encode_feature_stream(stream: list[CellFeatureVector],
                          quantizer: Quantizer) -> list[MortonRecord]:
    frames = [fv.frame for fv in stream]
    vectors = np.array([fv.values for fv in stream], dtype=np.float32)
    return encode_features(frames, vectors, quantizer)


def _load_scenario(sc: ScenarioInput, variant: str
                   ) -> tuple[FrameSequence | None, SaliencySequence | None,
                              FlowSequence | None]:
    frames = saliency = flows = None
    if variant == "cnn":
        payload = read_fseq(sc.saliency)
        if not isinstance(payload, SaliencySequence):
            raise ConfigError(f"{sc.saliency} is not a channel_type-1 saliency file")
        saliency = payload
    elif sc.flow is not None:
        payload = read_fseq(sc.flow)
        if not isinstance(payload, FlowSequence):
            raise ConfigError(f"{sc.flow} is not a channel_type-2 flow file")
        flows = payload
    else:
        payload = read_fseq(sc.frames)
        if isinstance(payload, FlowSequence):
            raise ConfigError(f"{sc.frames} holds flow; pass it as the flow input")
        frames = payload
    return frames, saliency, flows


def run_scenario(sc: ScenarioInput, cfg: PipelineConfig) -> ScenarioResult:
    """Run one scenario end to end and write its artifacts.

    Input decode is untimed; the elapsed time covers everything from raw
    frames to detected events, which is what the FPS metric reports.
    """
    frames, saliency, flows = _load_scenario(sc, cfg.variant)
    source = frames if frames is not None else (saliency if saliency is not None else flows)
    frame_count = len(source) if flows is None else len(flows) + 1
    out_dir = Path(cfg.output_dir) / sc.scenario_id
    out_dir.mkdir(parents=True, exist_ok=True)
    quantizer = Quantizer.for_variant(cfg.variant, cfg.bits_per_dim)

    t0 = time.perf_counter()
    if frame_count > 0:
        grid = make_grid(source.width, source.height,
                         cfg.roi_fractions, cfg.gap_fractions)
        if cfg.variant == "of":
            t_flow0 = time.perf_counter()
            if flows is None:
                flows = flow_sequence(frames, cfg.flow_params)
            t_flow = time.perf_counter() - t_flow0
            feats = of_features_from_flow(flows, grid, cfg.of_params)
            logger.info("%s: flow %.3fs over %d pairs", sc.scenario_id, t_flow,
                        len(flows))
        else:
            feats = cnn_features_from_saliency(saliency, grid, cfg.saliency_params)
        records = encode_feature_stream(feats, quantizer)
        activations = activations_from_codes(records, quantizer)
        events = detect_events(activations, cfg.detect_params, cfg.variant)
    else:
        feats, records, activations, events = [], [], [], []
    elapsed = time.perf_counter() - t0

    features_csv = out_dir / "features.csv"
    morton_csv = out_dir / "morton.csv"
    events_csv = out_dir / "events.csv"
    write_features_csv(feats, features_csv, variant=cfg.variant)
    write_morton_csv(records, quantizer, cfg.variant, morton_csv)
    write_events_csv(events, events_csv, scenario_id=sc.scenario_id)
    result = ScenarioResult(sc.scenario_id, events, activations, features_csv,
                            morton_csv, events_csv, frame_count, elapsed)
    logger.info("%s: %d frames in %.3fs (%.2f FPS), %d event(s)",
                sc.scenario_id, frame_count, elapsed, result.fps, len(events))
    return result


def run_pipeline(cfg: PipelineConfig) -> PipelineResult:
    """Execute the configured variant over all scenarios; score when
    annotations are given. Scenario outputs aggregate in scenario_id order
    regardless of worker scheduling."""
    cfg.validate()
    Path(cfg.output_dir).mkdir(parents=True, exist_ok=True)
    scenarios = sorted(cfg.scenarios, key=lambda sc: sc.scenario_id)
    if cfg.jobs > 1 and len(scenarios) > 1:
        with ThreadPoolExecutor(max_workers=cfg.jobs) as pool:
            results = list(pool.map(lambda sc: run_scenario(sc, cfg), scenarios))
    else:
        results = [run_scenario(sc, cfg) for sc in scenarios]
    results.sort(key=lambda r: r.scenario_id)

    timed = [(r.frame_count, r.elapsed) for r in results if r.frame_count > 0]
    total_frames = sum(f for f, _ in timed)
    total_elapsed = sum(e for _, e in timed)
    fps = throughput(total_frames, total_elapsed) if total_frames and total_elapsed > 0 else 0.0

    metrics = None
    metrics_csv = None
    if cfg.annotations is not None:
        truth = read_annotations(cfg.annotations)
        run_ids = {r.scenario_id for r in results}
        truth = [ev for ev in truth if ev.scenario_id in run_ids]
        predicted = {r.scenario_id: r.events for r in results}
        metrics = match_and_score(predicted, truth, cfg.iou_threshold)
        metrics.fps = fps
        metrics_csv = Path(cfg.output_dir) / "metrics.csv"
        write_metrics_csv({cfg.variant: metrics}, metrics_csv)
    return PipelineResult(results, metrics, metrics_csv, fps)

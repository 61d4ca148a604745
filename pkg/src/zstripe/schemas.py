"""Pydantic request/response models for the HTTP service."""

from __future__ import annotations

from pydantic import BaseModel, Field

from .grid import DEFAULT_GAP, DEFAULT_ROI


class HealthResponse(BaseModel):
    status: str = "ok"
    version: str


class FlowParamsModel(BaseModel):
    pyr_scale: float = 0.5
    levels: int = 3
    winsize: int = 15
    iterations: int = 3
    poly_n: int = 5
    poly_sigma: float = 1.2


class OfParamsModel(BaseModel):
    n: int = 4
    m: int = 7
    delta: float = 75.0
    alpha: float = 90.0
    theta: float = 20.0


class SaliencyParamsModel(BaseModel):
    gamma: float = 0.2


class DetectParamsModel(BaseModel):
    min_distinct_cells: int = 3
    require_both_sides: bool = True
    max_cell_jump: int = 2
    gap_tolerance: int = 10
    min_event_frames: int = 5


class RunRequest(BaseModel):
    """One-scenario pipeline run over files on the service host."""

    variant: str = "of"
    scenario_id: str = "scenario"
    frames: str | None = None
    saliency: str | None = None
    flow: str | None = None
    annotations: str | None = None
    output_dir: str
    flow_params: FlowParamsModel = Field(default_factory=FlowParamsModel)
    of_params: OfParamsModel = Field(default_factory=OfParamsModel)
    saliency_params: SaliencyParamsModel = Field(default_factory=SaliencyParamsModel)
    detect_params: DetectParamsModel = Field(default_factory=DetectParamsModel)
    roi_fractions: tuple[float, float, float, float] = DEFAULT_ROI
    gap_fractions: tuple[float, float] = DEFAULT_GAP
    bits_per_dim: int = 8
    iou_threshold: float = 0.1


class EventModel(BaseModel):
    scenario_id: str
    start_frame: int
    end_frame: int
    variant: str
    direction: str
    peak_value: float


class MetricsModel(BaseModel):
    tp: int
    fp: int
    tn: int
    fn: int
    f1: float
    sensitivity: float
    specificity: float
    mean_iou: float
    fps: float


class ArtifactsModel(BaseModel):
    features_csv: str
    morton_csv: str
    events_csv: str


class RunResponse(BaseModel):
    events: list[EventModel]
    artifacts: dict[str, ArtifactsModel]
    metrics: MetricsModel | None = None
    fps: float


class SynthRequest(BaseModel):
    out_dir: str
    kind: str = "crossing"
    width: int = 640
    height: int = 480
    frame_count: int = 120
    side: str = "left"
    speed: float = 4.0
    seed: int = 0
    scenario_id: str = "synth"


class SynthResponse(BaseModel):
    frames_path: str
    saliency_path: str
    annotations_path: str
    gt_start: int
    gt_end: int
    gt_label: str


class StripesRequest(BaseModel):
    morton_csv: str
    out_path: str
    format: str = "svg"
    activations_csv: str | None = None
    timestamp: bool = True


class StripesResponse(BaseModel):
    out_path: str
    marks: int

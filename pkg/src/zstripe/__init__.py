"""zstripe: traffic event retrieval from driving video via Z-order stripes.

Dense optical-flow disturbances or saliency maps reduce to per-frame
6-cell grid features, Morton codes turn those into a single-dimensional
stream, and spatiotemporal stripe patterns in that stream yield pedestrian
crossing events with directions, plus a full evaluation harness.
"""

__version__ = "0.1.0"

from .errors import ZStripeError, ConfigError  # noqa: F401
from .media_io import (  # noqa: F401
    FlowSequence,
    FrameSequence,
    GroundTruthEvent,
    SaliencySequence,
    read_annotations,
    read_fseq,
    read_pgm_sequence,
    write_fseq,
)
from .flow import FlowField, FlowParams, PolyExpansion, dense_flow, polynomial_expansion  # noqa: F401
from .grid import CellMeans, RoiGrid, cell_mean_flow, cell_mean_saliency, make_grid  # noqa: F401
from .features import (  # noqa: F401
    CellFeatureVector,
    OfParams,
    SaliencyParams,
    flow_angle,
    of_features,
    saliency_features,
)
from .zorder import MortonRecord, Quantizer, morton_decode, morton_encode, quantize  # noqa: F401
from .events import DetectParams, EventWindow, activations_from_codes, detect_events  # noqa: F401
from .evaluate import (  # noqa: F401
    MetricsReport,
    generate_crossing,
    generate_non_crossing,
    match_and_score,
    temporal_iou,
    throughput,
)
from .config import PipelineConfig, ScenarioInput, load_pipeline_config  # noqa: F401
from .pipeline import PipelineResult, run_pipeline, run_scenario  # noqa: F401

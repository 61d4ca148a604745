"""Pipeline configuration: a strict key-value format with sections.

The syntax is a TOML subset: ``[section]`` headers, ``key = value`` pairs,
``#`` comments, and values that are quoted strings, integers, floats,
booleans, or flat arrays. Config files are checked into runs for
reproducibility, so the parser rejects anything it does not understand.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .errors import ConfigError
from .events import DetectParams
from .features import OfParams, SaliencyParams
from .flow import FlowParams
from .grid import DEFAULT_GAP, DEFAULT_ROI

VARIANTS = ("of", "cnn")


def _parse_scalar(text: str, path: str, lineno: int) -> Any:
    text = text.strip()
    if text.startswith('"') and text.endswith('"') and len(text) >= 2:
        return text[1:-1]
    if text == "true":
        return True
    if text == "false":
        return False
    if text.startswith("[") and text.endswith("]"):
        inner = text[1:-1].strip()
        if not inner:
            return []
        return [_parse_scalar(part, path, lineno) for part in inner.split(",")]
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"{path} line {lineno}: cannot parse value {text!r}") from None


def parse_config_text(text: str, path: str = "<config>") -> dict[str, Any]:
    """Parse config text into a dict; section keys become nested dicts."""
    root: dict[str, Any] = {}
    current = root
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            name = line[1:-1].strip()
            if not name:
                raise ConfigError(f"{path} line {lineno}: empty section name")
            current = root
            for part in name.split("."):
                current = current.setdefault(part, {})
                if not isinstance(current, dict):
                    raise ConfigError(f"{path} line {lineno}: {part!r} is not a section")
            continue
        if "=" not in line:
            raise ConfigError(f"{path} line {lineno}: expected key = value")
        key, value = line.split("=", 1)
        key = key.strip()
        if not key:
            raise ConfigError(f"{path} line {lineno}: empty key")
        current[key] = _parse_scalar(value, path, lineno)
    return root


def load_config_file(path: Path | str) -> dict[str, Any]:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config_text(text, str(path))


@dataclass(frozen=True)
class ScenarioInput:
    """One scenario's input files; which are required depends on the variant."""

    scenario_id: str
    frames: Path | None = None
    saliency: Path | None = None
    flow: Path | None = None


@dataclass
class PipelineConfig:
    variant: str = "of"
    scenarios: list[ScenarioInput] = field(default_factory=list)
    annotations: Path | None = None
    output_dir: Path = Path("out")
    flow_params: FlowParams = field(default_factory=FlowParams)
    of_params: OfParams = field(default_factory=OfParams)
    saliency_params: SaliencyParams = field(default_factory=SaliencyParams)
    roi_fractions: tuple[float, float, float, float] = DEFAULT_ROI
    gap_fractions: tuple[float, float] = DEFAULT_GAP
    bits_per_dim: int = 8
    detect_params: DetectParams = field(default_factory=DetectParams)
    iou_threshold: float = 0.1
    jobs: int = 1
    write_timestamp: bool = False

    def validate(self) -> None:
        if self.variant not in VARIANTS:
            raise ConfigError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if not self.scenarios:
            raise ConfigError("no input scenarios configured")
        for sc in self.scenarios:
            if self.variant == "cnn" and sc.saliency is None:
                raise ConfigError(f"scenario {sc.scenario_id}: variant 'cnn' "
                                  "requires a saliency input path")
            if self.variant == "of" and sc.frames is None and sc.flow is None:
                raise ConfigError(f"scenario {sc.scenario_id}: variant 'of' "
                                  "requires frames or precomputed flow")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")
        if not 1 <= self.bits_per_dim <= 10:
            raise ConfigError("bits_per_dim must lie in [1, 10] for 6 dimensions")


def _params_from(data: dict[str, Any], cls, path: str):
    try:
        return cls(**data)
    except TypeError as exc:
        raise ConfigError(f"{path}: unknown key for {cls.__name__}: {exc}") from exc
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def config_from_dict(data: dict[str, Any], base_dir: Path | None = None,
                     path: str = "<config>") -> PipelineConfig:
    """Build a PipelineConfig from parsed config data.

    Relative input paths resolve against ``base_dir`` (the config file's
    directory when loaded from disk).
    """
    base = Path(base_dir) if base_dir is not None else Path(".")

    def _resolve(p: Any) -> Path:
        p = Path(str(p))
        return p if p.is_absolute() else base / p

    cfg = PipelineConfig()
    known = {"variant", "output_dir", "jobs", "inputs", "flow", "of", "saliency",
             "roi", "quantizer", "detect", "eval"}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"{path}: unknown top-level keys {sorted(unknown)}")
    cfg.variant = str(data.get("variant", cfg.variant))
    if "output_dir" in data:
        cfg.output_dir = _resolve(data["output_dir"])
    cfg.jobs = int(data.get("jobs", cfg.jobs))
    inputs = data.get("inputs", {})
    if inputs:
        scenario_id = str(inputs.get("scenario_id", "scenario"))
        sc = ScenarioInput(
            scenario_id=scenario_id,
            frames=_resolve(inputs["frames"]) if "frames" in inputs else None,
            saliency=_resolve(inputs["saliency"]) if "saliency" in inputs else None,
            flow=_resolve(inputs["flow"]) if "flow" in inputs else None,
        )
        cfg.scenarios = [sc]
        if "annotations" in inputs:
            cfg.annotations = _resolve(inputs["annotations"])
    if "flow" in data:
        cfg.flow_params = _params_from(data["flow"], FlowParams, path)
    if "of" in data:
        cfg.of_params = _params_from(data["of"], OfParams, path)
    if "saliency" in data:
        cfg.saliency_params = _params_from(data["saliency"], SaliencyParams, path)
    roi = data.get("roi", {})
    if "fractions" in roi:
        cfg.roi_fractions = tuple(float(v) for v in roi["fractions"])
    if "gap" in roi:
        cfg.gap_fractions = tuple(float(v) for v in roi["gap"])
    quant = data.get("quantizer", {})
    if "bits" in quant:
        cfg.bits_per_dim = int(quant["bits"])
    if "detect" in data:
        cfg.detect_params = _params_from(data["detect"], DetectParams, path)
    ev = data.get("eval", {})
    if "iou_threshold" in ev:
        cfg.iou_threshold = float(ev["iou_threshold"])
    return cfg


def load_pipeline_config(path: Path | str) -> PipelineConfig:
    path = Path(path)
    data = load_config_file(path)
    return config_from_dict(data, base_dir=path.parent, path=str(path))

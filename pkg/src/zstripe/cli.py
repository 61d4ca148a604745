"""Command-line entry point: per-stage commands, end-to-end runs, synthesis.

Exit codes: 0 success, 1 configuration error, 2 input/format error,
3 internal error. Stage commands read and write exactly the file formats
their owning modules define, so chaining them reproduces a full run byte
for byte.
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path

from . import config as cfgmod
from .config import PipelineConfig, ScenarioInput
from .errors import ConfigError, ZStripeError
from .evaluate import (
    generate_crossing,
    generate_non_crossing,
    match_and_score,
    write_metrics_csv,
)
from .events import (
    DetectParams,
    activations_from_codes,
    detect_events,
    read_events_csv,
    write_activations_csv,
    write_events_csv,
)
from .features import OfParams, SaliencyParams, read_features_csv, write_features_csv
from .flow import FlowParams, flow_sequence
from .grid import DEFAULT_GAP, DEFAULT_ROI, make_grid
from .media_io import (
    FlowSequence,
    FrameSequence,
    SaliencySequence,
    read_annotations,
    read_fseq,
    read_pgm_sequence,
    write_annotations,
    write_fseq,
)
from .pipeline import (
    cnn_features_from_saliency,
    encode_feature_stream,
    of_features_from_flow,
    run_pipeline,
)
from .stripes import emit_stripes
from .zorder import Quantizer, read_morton_csv, write_morton_csv

logger = logging.getLogger("zstripe")


def _add_roi_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--roi", type=float, nargs=4, default=None,
                   metavar=("X0", "Y0", "X1", "Y1"),
                   help="RoI fractions (default 0.15 0.35 0.85 0.75)")
    p.add_argument("--gap", type=float, nargs=2, default=None,
                   metavar=("GX0", "GX1"),
                   help="center gap fractions (default 0.45 0.55)")


def _roi_from(args) -> tuple:
    return tuple(args.roi) if args.roi else DEFAULT_ROI


def _gap_from(args) -> tuple:
    return tuple(args.gap) if args.gap else DEFAULT_GAP


def cmd_convert(args) -> int:
    seq = read_pgm_sequence(args.pgm_dir, frame_rate=args.frame_rate)
    write_fseq(seq, args.out, channel_type=1 if args.float else 0)
    logger.info("wrote %s (%d frames)", args.out, len(seq))
    return 0


def cmd_flow(args) -> int:
    payload = read_fseq(args.frames)
    if isinstance(payload, FlowSequence):
        raise ConfigError(f"{args.frames} already holds flow")
    params = FlowParams(pyr_scale=args.pyr_scale, levels=args.levels,
                        winsize=args.winsize, iterations=args.iterations,
                        poly_n=args.poly_n, poly_sigma=args.poly_sigma)
    t0 = time.perf_counter()
    flows = flow_sequence(payload, params)
    logger.info("flow: %d pairs in %.3fs", len(flows), time.perf_counter() - t0)
    write_fseq(flows, args.out)
    return 0


def cmd_of_features(args) -> int:
    flows = read_fseq(args.flow)
    if not isinstance(flows, FlowSequence):
        raise ConfigError(f"{args.flow} is not a channel_type-2 flow file")
    grid = make_grid(flows.width, flows.height, _roi_from(args), _gap_from(args))
    params = OfParams(n=args.n, m=args.m, delta=args.delta,
                      alpha=args.alpha, theta=args.theta)
    feats = of_features_from_flow(flows, grid, params)
    write_features_csv(feats, args.out, variant="of")
    return 0


def cmd_cnn_features(args) -> int:
    sal = read_fseq(args.saliency)
    if not isinstance(sal, SaliencySequence):
        raise ConfigError(f"{args.saliency} is not a channel_type-1 saliency file")
    grid = make_grid(sal.width, sal.height, _roi_from(args), _gap_from(args))
    feats = cnn_features_from_saliency(sal, grid, SaliencyParams(gamma=args.gamma))
    write_features_csv(feats, args.out, variant="cnn")
    return 0


def cmd_encode(args) -> int:
    feats, variant = read_features_csv(args.features)
    quantizer = Quantizer.for_variant(variant, args.bits)
    records = encode_feature_stream(feats, quantizer)
    write_morton_csv(records, quantizer, variant, args.out)
    return 0


def cmd_detect(args) -> int:
    records, quantizer, variant = read_morton_csv(args.morton)
    params = DetectParams(min_distinct_cells=args.min_distinct_cells,
                          require_both_sides=not args.single_side,
                          max_cell_jump=args.max_cell_jump,
                          gap_tolerance=args.gap_tolerance,
                          min_event_frames=args.min_event_frames)
    activations = activations_from_codes(records, quantizer)
    events = detect_events(activations, params, variant)
    write_events_csv(events, args.out, scenario_id=args.scenario_id)
    if args.activations_out:
        write_activations_csv(activations, args.activations_out)
    logger.info("detected %d event(s)", len(events))
    return 0


def cmd_eval(args) -> int:
    predicted: dict = {}
    variant = "of"
    for path in args.events:
        for scenario, events in read_events_csv(path).items():
            predicted.setdefault(scenario, []).extend(events)
            if events:
                variant = events[0].variant
    truth = read_annotations(args.annotations)
    report = match_and_score(predicted, truth, args.iou_threshold)
    write_metrics_csv({variant: report}, args.out)
    logger.info("tp=%d fp=%d tn=%d fn=%d f1=%.3f sensitivity=%.3f "
                "specificity=%.3f mean_iou=%.3f", report.tp, report.fp,
                report.tn, report.fn, report.f1, report.sensitivity,
                report.specificity, report.mean_iou)
    return 0


def cmd_stripes(args) -> int:
    emit_stripes(args.morton, args.out, fmt=args.format,
                 activations_csv=args.activations,
                 timestamp=not args.no_timestamp)
    return 0


def cmd_run(args) -> int:
    if args.config:
        cfg = cfgmod.load_pipeline_config(args.config)
    else:
        cfg = PipelineConfig()
    # flags win over the config file
    if args.variant:
        cfg.variant = args.variant
    if args.frames or args.saliency or args.flow:
        scenario_id = args.scenario_id or "scenario"
        cfg.scenarios = [ScenarioInput(
            scenario_id=scenario_id,
            frames=Path(args.frames) if args.frames else None,
            saliency=Path(args.saliency) if args.saliency else None,
            flow=Path(args.flow) if args.flow else None,
        )]
    if args.annotations:
        cfg.annotations = Path(args.annotations)
    if args.out_dir:
        cfg.output_dir = Path(args.out_dir)
    if args.gamma is not None:
        cfg.saliency_params = SaliencyParams(gamma=args.gamma)
    if args.jobs is not None:
        cfg.jobs = args.jobs
    if args.bits is not None:
        cfg.bits_per_dim = args.bits
    if args.iou_threshold is not None:
        cfg.iou_threshold = args.iou_threshold
    detect_overrides = {
        "min_distinct_cells": args.min_distinct_cells,
        "max_cell_jump": args.max_cell_jump,
        "gap_tolerance": args.gap_tolerance,
        "min_event_frames": args.min_event_frames,
    }
    overrides = {k: v for k, v in detect_overrides.items() if v is not None}
    if args.single_side:
        overrides["require_both_sides"] = False
    if overrides:
        base = {
            "min_distinct_cells": cfg.detect_params.min_distinct_cells,
            "require_both_sides": cfg.detect_params.require_both_sides,
            "max_cell_jump": cfg.detect_params.max_cell_jump,
            "gap_tolerance": cfg.detect_params.gap_tolerance,
            "min_event_frames": cfg.detect_params.min_event_frames,
        }
        base.update(overrides)
        cfg.detect_params = DetectParams(**base)
    result = run_pipeline(cfg)
    for res in result.scenarios:
        for ev in res.events:
            print(f"{res.scenario_id}: [{ev.start_frame}, {ev.end_frame}] "
                  f"{ev.direction} peak={ev.peak_value:.2f}")
    if result.metrics is not None:
        m = result.metrics
        print(f"metrics: f1={m.f1:.3f} sensitivity={m.sensitivity:.3f} "
              f"specificity={m.specificity:.3f} mean_iou={m.mean_iou:.3f} "
              f"fps={m.fps:.2f}")
    return 0


def cmd_synth(args) -> int:
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if args.kind == "crossing":
        frames, sal, gt = generate_crossing(
            args.width, args.height, args.frames, start_side=args.side,
            speed_px_per_frame=args.speed, texture_seed=args.seed,
            scenario_id=args.scenario_id)
    else:
        frames, sal, gt = generate_non_crossing(
            args.width, args.height, args.frames, kind=args.kind,
            texture_seed=args.seed, scenario_id=args.scenario_id)
    write_fseq(frames, out_dir / "frames.fsq", channel_type=0)
    write_fseq(sal, out_dir / "saliency.fsq", channel_type=1)
    write_annotations([gt], out_dir / "annotations.csv")
    logger.info("wrote %s: gt=[%d, %d] label=%s", out_dir, gt.start_frame,
                gt.end_frame, gt.label)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="zstripe",
        description="Traffic event retrieval from driving video via "
                    "Z-order stripe patterns")
    parser.add_argument("-v", "--verbose", action="store_true",
                        help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("convert", help="PGM directory to FSEQ container")
    p.add_argument("--pgm-dir", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--frame-rate", type=float, default=10.0)
    p.add_argument("--float", action="store_true",
                   help="store as f32 instead of u8")
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("flow", help="dense optical flow for an FSEQ sequence")
    p.add_argument("--frames", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--pyr-scale", type=float, default=0.5)
    p.add_argument("--levels", type=int, default=3)
    p.add_argument("--winsize", type=int, default=15)
    p.add_argument("--iterations", type=int, default=3)
    p.add_argument("--poly-n", type=int, default=5)
    p.add_argument("--poly-sigma", type=float, default=1.2)
    p.set_defaults(func=cmd_flow)

    p = sub.add_parser("of-features", help="angle-difference features from flow")
    p.add_argument("--flow", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("-n", type=int, default=4, help="recent window frames")
    p.add_argument("-m", type=int, default=7, help="baseline window frames")
    p.add_argument("--delta", type=float, default=75.0)
    p.add_argument("--alpha", type=float, default=90.0)
    p.add_argument("--theta", type=float, default=20.0)
    _add_roi_flags(p)
    p.set_defaults(func=cmd_of_features)

    p = sub.add_parser("cnn-features", help="gated saliency features")
    p.add_argument("--saliency", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--gamma", type=float, default=0.2)
    _add_roi_flags(p)
    p.set_defaults(func=cmd_cnn_features)

    p = sub.add_parser("encode", help="features CSV to Morton codes CSV")
    p.add_argument("--features", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--bits", type=int, default=8)
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("detect", help="events from a Morton stream")
    p.add_argument("--morton", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--scenario-id", default="scenario")
    p.add_argument("--min-distinct-cells", type=int, default=3)
    p.add_argument("--single-side", action="store_true",
                   help="drop the both-sides requirement")
    p.add_argument("--max-cell-jump", type=int, default=2)
    p.add_argument("--gap-tolerance", type=int, default=10)
    p.add_argument("--min-event-frames", type=int, default=5)
    p.add_argument("--activations-out", default=None,
                   help="also dump the per-frame activations CSV")
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("eval", help="score events CSVs against annotations")
    p.add_argument("--events", nargs="+", required=True)
    p.add_argument("--annotations", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--iou-threshold", type=float, default=0.1)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("stripes", help="stripe plot from a Morton stream")
    p.add_argument("--morton", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--format", choices=("svg", "csv"), default="svg")
    p.add_argument("--activations", default=None)
    p.add_argument("--no-timestamp", action="store_true",
                   help="suppress the timestamp comment for byte-stable output")
    p.set_defaults(func=cmd_stripes)

    p = sub.add_parser("run", help="end-to-end pipeline run")
    p.add_argument("--config", default=None, help="config file (flags win)")
    p.add_argument("--variant", choices=("of", "cnn"), default=None)
    p.add_argument("--frames", default=None)
    p.add_argument("--saliency", default=None)
    p.add_argument("--flow", default=None)
    p.add_argument("--annotations", default=None)
    p.add_argument("--out-dir", default=None)
    p.add_argument("--scenario-id", default=None)
    p.add_argument("--gamma", type=float, default=None)
    p.add_argument("--jobs", type=int, default=None)
    p.add_argument("--bits", type=int, default=None)
    p.add_argument("--iou-threshold", type=float, default=None)
    p.add_argument("--min-distinct-cells", type=int, default=None)
    p.add_argument("--single-side", action="store_true")
    p.add_argument("--max-cell-jump", type=int, default=None)
    p.add_argument("--gap-tolerance", type=int, default=None)
    p.add_argument("--min-event-frames", type=int, default=None)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("synth", help="generate a synthetic scenario")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--kind", choices=("crossing", "static", "vertical"),
                   default="crossing")
    p.add_argument("--width", type=int, default=640)
    p.add_argument("--height", type=int, default=480)
    p.add_argument("--frames", type=int, default=120)
    p.add_argument("--side", choices=("left", "right"), default="left")
    p.add_argument("--speed", type=float, default=4.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--scenario-id", default="synth")
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(stream=sys.stderr,
                        level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        logger.error("config error: %s", exc)
        return 1
    except ZStripeError as exc:
        logger.error("input error: %s", exc)
        return 2
    except Exception:  # noqa: BLE001 - last-resort mapping to exit code 3
        logger.exception("internal error")
        return 3


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()

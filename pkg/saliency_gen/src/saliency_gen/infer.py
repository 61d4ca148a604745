"""Batch saliency inference: FSEQ frames in, FSEQ saliency out."""

from __future__ import annotations

from pathlib import Path

import numpy as np
import torch
from torch.nn import functional as F

from .fseq import read_gray_fseq, write_saliency_fseq
from .model import NATIVE_H, NATIVE_W, SaliencyNet, load_model


class ModelLoadError(Exception):
    """Weights file missing or incompatible with the architecture."""


def predict_frames(model: SaliencyNet, frames: np.ndarray,
                   batch_size: int = 8) -> np.ndarray:
    """Per-frame attention maps in [0, 1], max = 1 unless identically zero.

    Frames resize to the native model resolution and maps resize back to
    the source geometry, both bilinearly.
    """
    count, height, width = frames.shape
    out = np.empty((count, height, width), dtype=np.float32)
    with torch.no_grad():
        for start in range(0, count, batch_size):
            chunk = frames[start:start + batch_size]
            x = torch.from_numpy(np.ascontiguousarray(chunk)).unsqueeze(1)
            x = x.repeat(1, 3, 1, 1)  # grayscale to the 3-channel backbone
            x = F.interpolate(x, size=(NATIVE_H, NATIVE_W), mode="bilinear",
                              align_corners=False)
            maps = model(x)
            maps = F.interpolate(maps, size=(height, width), mode="bilinear",
                                 align_corners=False)
            block = maps.squeeze(1).numpy()
            peaks = block.reshape(block.shape[0], -1).max(axis=1)
            for i, peak in enumerate(peaks):
                if peak > 0:
                    block[i] /= peak
            out[start:start + chunk.shape[0]] = block
    return np.clip(out, 0.0, 1.0)


def infer_saliency(frames_path: Path | str, weights_path: Path | str,
                   out_path: Path | str, batch_size: int = 8) -> int:
    """Run the model over an FSEQ sequence; returns the frame count."""
    try:
        model = load_model(weights_path)
    except (OSError, RuntimeError, KeyError) as exc:
        raise ModelLoadError(f"cannot load weights {weights_path}: {exc}") from exc
    frames, rate = read_gray_fseq(frames_path)
    maps = predict_frames(model, frames, batch_size=batch_size)
    write_saliency_fseq(maps, out_path, frame_rate=rate)
    return frames.shape[0]

"""Inference: frames in, 2-channel map-pair grid files out.

The written grids carry the super-res pitch and depth range recorded at
training time, so `phasorloc decode` consumes them unchanged.
"""

import re
from pathlib import Path

import numpy as np
import torch

from phasorloc.errors import ValidationError
from phasorloc.formats import read_grid, write_grid

from .config import ToyNetConfig
from .model import ToyMapNet

_INDEX_RE = re.compile(r"_(\d+)\.grid$")


def load_checkpoint(path):
    payload = torch.load(path, map_location="cpu", weights_only=False)
    cfg = ToyNetConfig(**payload["config"])
    model = ToyMapNet(cfg)
    model.load_state_dict(payload["state_dict"])
    model.eval()
    return model, payload


def predict(checkpoint_path, frames_dir, out_dir, batch_size: int = 32):
    """Write one `map_<index>.grid` per input frame; returns the paths."""
    model, payload = load_checkpoint(checkpoint_path)
    baseline = payload["input_baseline"]
    scale = payload["input_scale"]
    pitch, z_min, z_max = payload["map_meta"]
    expected_shape = tuple(payload["frame_shape"])

    frame_paths = sorted(Path(frames_dir).glob("*.grid"))
    if not frame_paths:
        raise ValidationError(f"no frame grids under {frames_dir}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    written = []
    with torch.no_grad():
        for start in range(0, len(frame_paths), batch_size):
            chunk = frame_paths[start:start + batch_size]
            frames = []
            for path in chunk:
                grid = read_grid(path)
                if grid.channels.shape[0] != 1:
                    raise ValidationError(f"{path} is not a 1-channel frame")
                if grid.channels.shape[1:] != expected_shape:
                    raise ValidationError(
                        f"{path} dims {grid.channels.shape[1:]} do not match "
                        f"the checkpoint's {expected_shape}")
                frames.append((grid.channels[0] - baseline) / scale)
            x = torch.from_numpy(np.stack(frames)[:, None].astype(np.float32))
            maps = model(x).numpy()
            for path, pair in zip(chunk, maps):
                match = _INDEX_RE.search(path.name)
                index = int(match.group(1)) if match else len(written)
                out_path = out_dir / f"map_{index:06d}.grid"
                write_grid(out_path, pair, pitch, z_min, z_max)
                written.append(out_path)
    return written

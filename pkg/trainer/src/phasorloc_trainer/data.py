"""Paired frame/target grid files as a torch dataset.

The harness only ever touches the main package's on-disk formats: frames
are 1-channel grids from `phasorloc simulate`, targets are 2-channel grids
from `phasorloc encode`. Inputs are normalized to roughly unit scale using
the dataset's recorded camera baseline/gain and photon budget.
"""

import re
from pathlib import Path

import numpy as np
import torch
from torch.utils.data import Dataset

from phasorloc.errors import ValidationError
from phasorloc.formats import read_config, read_grid

_INDEX_RE = re.compile(r"_(\d+)\.grid$")


def _indexed(paths):
    out = {}
    for path in paths:
        match = _INDEX_RE.search(path.name)
        if match:
            out[int(match.group(1))] = path
    return out


class PairedGridDataset(Dataset):
    """(normalized frame, target map pair) tensors from two grid directories."""

    def __init__(self, frames_dir, maps_dir, baseline: float, scale: float):
        self.frame_paths = _indexed(sorted(Path(frames_dir).glob("*.grid")))
        self.map_paths = _indexed(sorted(Path(maps_dir).glob("*.grid")))
        if not self.frame_paths:
            raise ValidationError(f"no frame grids under {frames_dir}")
        common = sorted(set(self.frame_paths) & set(self.map_paths))
        if len(common) != len(self.frame_paths):
            raise ValidationError("every frame needs a matching target map")
        self.indices = common
        self.baseline = float(baseline)
        self.scale = float(scale)

        first_frame = read_grid(self.frame_paths[common[0]])
        first_map = read_grid(self.map_paths[common[0]])
        fh, fw = first_frame.channels.shape[1:]
        mh, mw = first_map.channels.shape[1:]
        if first_map.channels.shape[0] != 2:
            raise ValidationError("targets must be 2-channel map pairs")
        if (mh, mw) != (4 * fh, 4 * fw):
            raise ValidationError(
                f"target dims {mh}x{mw} are not 4x the frame dims {fh}x{fw}")
        self.frame_shape = (fh, fw)
        self.map_meta = (first_map.pixel_pitch_nm, first_map.z_min,
                         first_map.z_max)

    def __len__(self):
        return len(self.indices)

    def __getitem__(self, i):
        idx = self.indices[i]
        frame = read_grid(self.frame_paths[idx]).channels[0]
        target = read_grid(self.map_paths[idx]).channels.copy()
        x = (frame.astype(np.float32) - self.baseline) / self.scale
        return torch.from_numpy(x[None]), torch.from_numpy(target)


def normalization_from_dataset(dataset_dir) -> tuple:
    """(baseline, scale) from the run config `simulate` wrote next to the
    frames: ADU -> approximately [0, 1] via (adu - baseline) / (gain * photon_mean)."""
    values = read_config(Path(dataset_dir) / "config.txt")
    baseline = values["camera.baseline"]
    scale = values["camera.gain"] * values["sim.photon_mean"]
    if scale <= 0:
        raise ValidationError("bad normalization scale from dataset config")
    return float(baseline), float(scale)

"""Super-resolution reconstruction rendering.

Localizations are binned into a 2D count histogram; bin color encodes mean
depth, mean frame id, or raw density through a perceptually uniform
colormap, and bin brightness encodes (optionally sqrt-scaled) counts.
Cross-section views slice a slab along one axis and render the orthogonal
plane, which is how side views of tubular structures are produced.
"""

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from matplotlib import colormaps

from .codec import LocalizationSet
from .errors import ValidationError

COLOR_DEPTH = "depth"
COLOR_FRAME = "frame_id"
COLOR_DENSITY = "density"
_COLOR_MODES = (COLOR_DEPTH, COLOR_FRAME, COLOR_DENSITY)

_AXES = ("x", "y", "z")


@dataclass
class CrossSection:
    """Slab selector: keep |coordinate(axis) - center| <= thickness / 2."""

    axis: str
    center: float
    thickness: float

    def __post_init__(self):
        if self.axis not in _AXES:
            raise ValidationError(f"cross-section axis must be one of {_AXES}")
        if self.thickness <= 0:
            raise ValidationError("cross-section thickness must be positive")


@dataclass
class RenderConfig:
    bin_size: float = 5.0                    # nm
    color_mode: str = COLOR_DEPTH
    z_clip: Optional[Tuple[float, float]] = None
    intensity_scale: str = "sqrt"            # or "linear"
    region: Optional[Tuple[float, float, float, float]] = None  # x0,x1,y0,y1 nm
    cross_section: Optional[CrossSection] = None
    colormap: str = "viridis"

    def __post_init__(self):
        if self.bin_size <= 0:
            raise ValidationError("bin_size must be positive")
        if self.color_mode not in _COLOR_MODES:
            raise ValidationError(f"color_mode must be one of {_COLOR_MODES}")
        if self.intensity_scale not in ("linear", "sqrt"):
            raise ValidationError("intensity_scale must be 'linear' or 'sqrt'")
        if self.z_clip is not None:
            lo, hi = self.z_clip
            if not lo < hi:
                raise ValidationError("z_clip must be ordered")


@dataclass
class RenderResult:
    rgb: np.ndarray          # (rows, cols, 3) uint8
    counts: np.ndarray       # (rows, cols) int64, pre color mapping
    extent: Tuple[float, float, float, float]  # h0, h1, v0, v1 in nm
    warning: Optional[str] = None


def _select(seeds: LocalizationSet, cfg: RenderConfig) -> LocalizationSet:
    keep = np.ones(seeds.n, dtype=bool)
    if cfg.z_clip is not None:
        keep &= (seeds.z >= cfg.z_clip[0]) & (seeds.z <= cfg.z_clip[1])
    return seeds.subset(keep)


def _histogram(h_coord, v_coord, color_source, cfg: RenderConfig,
               bounds: Optional[Tuple[float, float, float, float]],
               warning: Optional[str]) -> RenderResult:
    """Shared binning / coloring core. Row 0 is the smallest v coordinate."""
    if bounds is None:
        if h_coord.size:
            bounds = (float(h_coord.min()), float(h_coord.max()),
                      float(v_coord.min()), float(v_coord.max()))
        else:
            bounds = (0.0, cfg.bin_size, 0.0, cfg.bin_size)
    h0, h1, v0, v1 = bounds
    if not (h1 >= h0 and v1 >= v0):
        raise ValidationError("render region must be ordered")
    n_cols = max(int(np.ceil((h1 - h0) / cfg.bin_size)), 1)
    n_rows = max(int(np.ceil((v1 - v0) / cfg.bin_size)), 1)

    inside = (h_coord >= h0) & (h_coord <= h1) & (v_coord >= v0) & (v_coord <= v1)
    hi = h_coord[inside]
    vi = v_coord[inside]
    ci = color_source[inside]
    cols = np.minimum((hi - h0) / cfg.bin_size, n_cols - 1).astype(np.int64)
    rows = np.minimum((vi - v0) / cfg.bin_size, n_rows - 1).astype(np.int64)
    flat = rows * n_cols + cols
    counts = np.bincount(flat, minlength=n_rows * n_cols).reshape(n_rows, n_cols)

    if counts.sum() == 0 and warning is None:
        warning = "no seeds inside render region"

    occupied = counts > 0
    if cfg.color_mode == COLOR_DENSITY:
        color_val = counts.astype(np.float64)
    else:
        sums = np.bincount(flat, weights=ci, minlength=n_rows * n_cols)
        sums = sums.reshape(n_rows, n_cols)
        with np.errstate(invalid="ignore"):
            color_val = np.where(occupied, sums / np.maximum(counts, 1), 0.0)

    # Normalize color channel over occupied bins (or the z_clip span when
    # depth coloring has a configured range).
    if cfg.color_mode == COLOR_DEPTH and cfg.z_clip is not None:
        lo, hi_ = cfg.z_clip
    elif occupied.any():
        lo, hi_ = float(color_val[occupied].min()), float(color_val[occupied].max())
    else:
        lo, hi_ = 0.0, 1.0
    span = hi_ - lo if hi_ > lo else 1.0
    norm_color = np.clip((color_val - lo) / span, 0.0, 1.0)

    intensity = counts.astype(np.float64)
    if cfg.intensity_scale == "sqrt":
        intensity = np.sqrt(intensity)
    peak = intensity.max()
    if peak > 0:
        intensity = intensity / peak

    cmap = colormaps[cfg.colormap]
    rgb = cmap(norm_color)[..., :3] * intensity[..., None]
    rgb = np.where(occupied[..., None], rgb, 0.0)
    rgb8 = np.clip(np.rint(rgb * 255.0), 0, 255).astype(np.uint8)
    return RenderResult(rgb=rgb8, counts=counts.astype(np.int64),
                        extent=(h0, h0 + n_cols * cfg.bin_size,
                                v0, v0 + n_rows * cfg.bin_size),
                        warning=warning)


def _color_source(seeds: LocalizationSet, cfg: RenderConfig) -> np.ndarray:
    if cfg.color_mode == COLOR_FRAME:
        return seeds.frame_ids.astype(np.float64)
    return seeds.z  # depth; density mode ignores the source


def render_histogram(seeds: LocalizationSet, cfg: RenderConfig) -> RenderResult:
    """Top (x-y) view; region defaults to the data bounding box."""
    sel = _select(seeds, cfg)
    warning = "empty seed set" if sel.n == 0 else None
    return _histogram(sel.x, sel.y, _color_source(sel, cfg), cfg,
                      cfg.region, warning)


def render_cross_section(seeds: LocalizationSet, cfg: RenderConfig) -> RenderResult:
    """Slab view: filter along cross_section.axis, render the orthogonal plane.

    Axis x projects onto (y, z), axis y onto (x, z), axis z onto (x, y);
    the second coordinate is the image's vertical axis.
    """
    if cfg.cross_section is None:
        raise ValidationError("render_cross_section requires cfg.cross_section")
    cs = cfg.cross_section
    sel = _select(seeds, cfg)
    coord = {"x": sel.x, "y": sel.y, "z": sel.z}[cs.axis]
    keep = np.abs(coord - cs.center) <= 0.5 * cs.thickness
    sel = sel.subset(keep)
    warning = "no seeds inside cross-section slab" if sel.n == 0 else None
    if cs.axis == "x":
        h, v = sel.y, sel.z
    elif cs.axis == "y":
        h, v = sel.x, sel.z
    else:
        h, v = sel.x, sel.y
    return _histogram(h, v, _color_source(sel, cfg), cfg, None, warning)


def save_png(result: RenderResult, path) -> None:
    """Write the rendered image; row 0 (smallest v) ends up at the top."""
    from PIL import Image

    Image.fromarray(result.rgb, mode="RGB").save(path, format="PNG")

"""Complex-domain target encoding and peak/phase decoding.

Ground truth is projected onto two co-registered x4-upsampled real grids
(re, im). Their joint magnitude is a sum of per-emitter 2D Gaussians on the
super-resolution grid (lateral likelihood); the phase at each emitter is an
affine image of its depth. Per-emitter contributions are summed in the
complex plane, so isolated emitters stay exactly Gaussian in magnitude and
overlapping ones transition smoothly; co-located emitters at conflicting
depths interfere, which is surfaced through the phase-dispersion feature
rather than hidden.

Decoding inverts the projection without any learned component: magnitude
peak finding with non-maximum suppression, per-axis log-quadratic sub-pixel
refinement (exact for Gaussian profiles), and magnitude-weighted complex
phase averaging for depth.
"""

from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from .errors import OutOfRangeError, UndefinedDepthError, ValidationError
from .sim import CameraModel, EmitterSet

UPSAMPLE = 4

# Fraction of +/- pi used for depth encoding. The 10% guard band keeps
# phases away from the wrap-around point at +/- pi.
PHASE_BAND_FRACTION = 0.9

# Gaussian targets are accumulated on a window of +/- TRUNCATION_SIGMAS
# around each emitter; omitted tails are < exp(-18) ~ 1.5e-8 of A.
TRUNCATION_SIGMAS = 6.0

# Log samples are floored here before taking ln in the sub-pixel fit.
_LOG_FLOOR = 1e-12

# |S| below this fraction of the total weighted magnitude mass counts as a
# vanished complex sum (undefined depth); exact zero is not reachable in
# floating point for the symmetric interference cases.
_COHERENCE_EPS = 1e-12


@dataclass
class DecodeConfig:
    """Detection and refinement parameters, all in super-res pixel units.

    detection_threshold is a fraction of the nominal single-emitter
    amplitude; peaks below threshold * amplitude are ignored.
    """

    detection_threshold: float = 0.3
    nms_radius: float = 2.0
    # 3 keeps the depth average clean down to 4 sigma_t emitter spacing;
    # wider windows pick up measurable phase contamination from neighbors.
    phase_window: int = 3
    target_sigma: float = 1.0
    amplitude: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.detection_threshold < 1.0:
            raise ValidationError("detection_threshold must be in (0, 1)")
        if self.nms_radius < 1:
            raise ValidationError("nms_radius must be >= 1")
        if self.phase_window < 3 or self.phase_window % 2 == 0:
            raise ValidationError("phase_window must be odd and >= 3")
        if self.target_sigma <= 0:
            raise ValidationError("target_sigma must be positive")
        if self.amplitude <= 0:
            raise ValidationError("amplitude must be positive")


@dataclass
class ComplexMapPair:
    """Two x4-upsampled channels jointly encoding lateral likelihood and depth.

    ``pixel_pitch_x/y`` is the pitch of the *camera* pixels; super-res
    pixels are pitch / 4. The binary grid format only carries isotropic
    pitches; anisotropic pairs exist in memory only.
    """

    re: np.ndarray
    im: np.ndarray
    pixel_pitch_x: float
    pixel_pitch_y: float
    z_range: tuple
    upsample_factor: int = UPSAMPLE

    def __post_init__(self):
        self.re = np.asarray(self.re, dtype=np.float64)
        self.im = np.asarray(self.im, dtype=np.float64)
        if self.re.shape != self.im.shape or self.re.ndim != 2:
            raise ValidationError("re and im must be 2D arrays of equal shape")
        if self.upsample_factor != UPSAMPLE:
            raise ValidationError(f"upsample_factor is fixed at {UPSAMPLE}")
        z_min, z_max = self.z_range
        if not z_min < z_max:
            raise ValidationError("z_range must be ordered")
        self.z_range = (float(z_min), float(z_max))

    @property
    def magnitude(self) -> np.ndarray:
        return np.hypot(self.re, self.im)

    @property
    def pixel_pitch(self) -> float:
        if self.pixel_pitch_x != self.pixel_pitch_y:
            raise ValidationError("pair has anisotropic pitch; no scalar pixel_pitch")
        return self.pixel_pitch_x

    @property
    def super_pitch_x(self) -> float:
        return self.pixel_pitch_x / self.upsample_factor

    @property
    def super_pitch_y(self) -> float:
        return self.pixel_pitch_y / self.upsample_factor


@dataclass
class LocalizationSet:
    """Decoded seeds (struct of arrays) plus decode bookkeeping counters."""

    frame_ids: np.ndarray
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    peak_magnitude: np.ndarray
    peak_sharpness: np.ndarray
    phase_dispersion: np.ndarray
    n_dropped_depth: int = 0
    n_border: int = 0
    n_degenerate: int = 0
    n_phase_clamped: int = 0
    n_window_truncated: int = 0

    def __post_init__(self):
        self.frame_ids = np.asarray(self.frame_ids, dtype=np.int64)
        for name in ("x", "y", "z", "peak_magnitude", "peak_sharpness",
                     "phase_dispersion"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=np.float64))
            if getattr(self, name).shape != self.frame_ids.shape:
                raise ValidationError("LocalizationSet arrays must share one shape")

    @property
    def n(self) -> int:
        return self.frame_ids.size

    def subset(self, index) -> "LocalizationSet":
        return LocalizationSet(
            self.frame_ids[index], self.x[index], self.y[index], self.z[index],
            self.peak_magnitude[index], self.peak_sharpness[index],
            self.phase_dispersion[index])

    def for_frame(self, frame_id: int) -> "LocalizationSet":
        return self.subset(self.frame_ids == frame_id)

    @classmethod
    def empty(cls) -> "LocalizationSet":
        zero = np.empty(0)
        return cls(np.empty(0, np.int64), zero, zero, zero, zero, zero, zero)

    @classmethod
    def concatenate(cls, parts: List["LocalizationSet"]) -> "LocalizationSet":
        if not parts:
            return cls.empty()
        out = cls(
            np.concatenate([p.frame_ids for p in parts]),
            np.concatenate([p.x for p in parts]),
            np.concatenate([p.y for p in parts]),
            np.concatenate([p.z for p in parts]),
            np.concatenate([p.peak_magnitude for p in parts]),
            np.concatenate([p.peak_sharpness for p in parts]),
            np.concatenate([p.phase_dispersion for p in parts]))
        out.n_dropped_depth = sum(p.n_dropped_depth for p in parts)
        out.n_border = sum(p.n_border for p in parts)
        out.n_degenerate = sum(p.n_degenerate for p in parts)
        out.n_phase_clamped = sum(p.n_phase_clamped for p in parts)
        out.n_window_truncated = sum(p.n_window_truncated for p in parts)
        return out


def phase_band(z_range=None) -> float:
    """Half-width of the usable phase band in radians."""
    return PHASE_BAND_FRACTION * np.pi


def z_to_phase(z, z_range):
    """Affine map of [z_min, z_max] onto [-0.9 pi, +0.9 pi]. Rejects out-of-range z."""
    z = np.asarray(z, dtype=np.float64)
    z_min, z_max = z_range
    if np.any(z < z_min) or np.any(z > z_max):
        raise OutOfRangeError("z outside z_range for phase encoding")
    band = phase_band()
    return -band + (z - z_min) * (2.0 * band) / (z_max - z_min)


def phase_to_z(phase, z_range):
    """Inverse of ``z_to_phase``; phases outside the band are clamped to it."""
    phase = np.asarray(phase, dtype=np.float64)
    z_min, z_max = z_range
    band = phase_band()
    clamped = np.clip(phase, -band, band)
    return z_min + (clamped + band) * (z_max - z_min) / (2.0 * band)


def encode_targets(emitters: EmitterSet, camera: CameraModel, z_range: tuple,
                   cfg: DecodeConfig) -> ComplexMapPair:
    """Project ground truth onto the super-res complex map pair.

    re + i*im = sum_k A * exp(-((u-u_k)^2+(v-v_k)^2) / (2 sigma_t^2))
                      * exp(i * z_to_phase(z_k)),
    evaluated at super-res pixel centers; (u_k, v_k) is the emitter position
    in fractional super-res pixel indices.
    """
    gh = camera.height * UPSAMPLE
    gw = camera.width * UPSAMPLE
    emitters.validate_bounds(camera, z_range)
    re = np.zeros(gh * gw)
    im = np.zeros(gh * gw)
    if emitters.n:
        sp_x = camera.pixel_pitch_x / UPSAMPLE
        sp_y = camera.pixel_pitch_y / UPSAMPLE
        # Index coordinates: grid point (row i, col j) sits at the physical
        # center ((j + 0.5) sp_x, (i + 0.5) sp_y).
        u = emitters.x / sp_x - 0.5
        v = emitters.y / sp_y - 0.5
        phi = z_to_phase(emitters.z, z_range)
        sigma = cfg.target_sigma
        radius = int(np.ceil(TRUNCATION_SIGMAS * sigma))
        offs = np.arange(-radius, radius + 1)
        cols = np.rint(u).astype(np.int64)[:, None] + offs[None, :]
        rows = np.rint(v).astype(np.int64)[:, None] + offs[None, :]
        gx = np.exp(-((cols - u[:, None]) ** 2) / (2.0 * sigma * sigma))
        gy = np.exp(-((rows - v[:, None]) ** 2) / (2.0 * sigma * sigma))
        weight = cfg.amplitude * gy[:, :, None] * gx[:, None, :]
        flat = rows[:, :, None] * gw + cols[:, None, :]
        valid = ((rows[:, :, None] >= 0) & (rows[:, :, None] < gh)
                 & (cols[:, None, :] >= 0) & (cols[:, None, :] < gw))
        cos_w = weight * np.cos(phi)[:, None, None]
        sin_w = weight * np.sin(phi)[:, None, None]
        idx = flat[valid]
        re = np.bincount(idx, weights=cos_w[valid], minlength=gh * gw)
        im = np.bincount(idx, weights=sin_w[valid], minlength=gh * gw)
    return ComplexMapPair(re.reshape(gh, gw), im.reshape(gh, gw),
                          camera.pixel_pitch_x, camera.pixel_pitch_y, z_range)


def find_peaks(mag: np.ndarray, cfg: DecodeConfig) -> np.ndarray:
    """Thresholded strict local maxima followed by greedy NMS.

    A pixel qualifies when it beats its 8-neighborhood (ties on constant
    plateaus are broken toward the first pixel in row-major order) and its
    value reaches detection_threshold * amplitude. Survivors of
    non-maximum suppression come back ordered by (value desc, row, col);
    suppression removes later peaks within Euclidean distance nms_radius.
    """
    mag = np.asarray(mag, dtype=np.float64)
    h, w = mag.shape
    padded = np.full((h + 2, w + 2), -np.inf)
    padded[1:-1, 1:-1] = mag

    def shifted(di, dj):
        return padded[1 + di:1 + di + h, 1 + dj:1 + dj + w]

    # Strictly above the row-major predecessors, at-or-above the successors.
    mask = (mag > shifted(-1, -1)) & (mag > shifted(-1, 0)) \
        & (mag > shifted(-1, 1)) & (mag > shifted(0, -1)) \
        & (mag >= shifted(0, 1)) & (mag >= shifted(1, -1)) \
        & (mag >= shifted(1, 0)) & (mag >= shifted(1, 1))
    mask &= mag >= cfg.detection_threshold * cfg.amplitude
    rows, cols = np.nonzero(mask)
    if rows.size == 0:
        return np.empty((0, 2), dtype=np.int64)
    values = mag[rows, cols]
    order = np.lexsort((cols, rows, -values))
    rows, cols = rows[order], cols[order]

    keep_rows: List[int] = []
    keep_cols: List[int] = []
    r2 = cfg.nms_radius * cfg.nms_radius
    acc_r = np.empty(rows.size)
    acc_c = np.empty(rows.size)
    n_acc = 0
    for r, c in zip(rows, cols):
        if n_acc:
            d2 = (acc_r[:n_acc] - r) ** 2 + (acc_c[:n_acc] - c) ** 2
            if np.any(d2 <= r2):
                continue
        acc_r[n_acc] = r
        acc_c[n_acc] = c
        n_acc += 1
        keep_rows.append(r)
        keep_cols.append(c)
    return np.column_stack([np.asarray(keep_rows, dtype=np.int64),
                            np.asarray(keep_cols, dtype=np.int64)])


def _log_quadratic_delta(i_minus, i_center, i_plus):
    """Sub-pixel offset from three samples via the Gaussian (log-quadratic) fit.

    delta = (ln I- - ln I+) / (2 (ln I- - 2 ln I0 + ln I+)), clamped to
    [-0.5, 0.5]. Returns (delta, degenerate_mask).
    """
    lm = np.log(np.maximum(i_minus, _LOG_FLOOR))
    lc = np.log(np.maximum(i_center, _LOG_FLOOR))
    lp = np.log(np.maximum(i_plus, _LOG_FLOOR))
    denom = 2.0 * (lm - 2.0 * lc + lp)
    with np.errstate(divide="ignore", invalid="ignore"):
        delta = (lm - lp) / denom
    degenerate = ~np.isfinite(delta)
    delta = np.where(degenerate, 0.0, delta)
    return np.clip(delta, -0.5, 0.5), degenerate


@dataclass
class RefinedPeak:
    """Continuous super-res coordinates of a refined peak.

    u runs along columns (x), v along rows (y). ``border`` marks axes that
    were skipped because the peak touched the grid edge; ``degenerate``
    marks flat-curvature fallbacks.
    """

    u: float
    v: float
    border: bool = False
    degenerate: bool = False


def subpixel_refine(mag: np.ndarray, peak) -> RefinedPeak:
    """Refine an integer peak to continuous coordinates, one axis at a time.

    Border axes skip refinement (offset 0) and are flagged; degenerate
    curvature also falls back to offset 0 with a flag.
    """
    mag = np.asarray(mag, dtype=np.float64)
    h, w = mag.shape
    r, c = int(peak[0]), int(peak[1])
    border_x = c == 0 or c == w - 1
    border_y = r == 0 or r == h - 1
    du = dv = 0.0
    degenerate = False
    if not border_x:
        d, bad = _log_quadratic_delta(mag[r, c - 1], mag[r, c], mag[r, c + 1])
        du = float(d)
        degenerate |= bool(bad)
    if not border_y:
        d, bad = _log_quadratic_delta(mag[r - 1, c], mag[r, c], mag[r + 1, c])
        dv = float(d)
        degenerate |= bool(bad)
    return RefinedPeak(u=c + du, v=r + dv, border=border_x or border_y,
                       degenerate=degenerate)


def _window_slices(center, half, size):
    lo = max(center - half, 0)
    hi = min(center + half + 1, size)
    return lo, hi


def _depth_stats(pair: ComplexMapPair, peak, cfg: DecodeConfig):
    """(phase, dispersion, truncated_flag) of the magnitude-weighted complex sum."""
    half = cfg.phase_window // 2
    h, w = pair.re.shape
    r, c = int(peak[0]), int(peak[1])
    r0, r1 = _window_slices(r, half, h)
    c0, c1 = _window_slices(c, half, w)
    truncated = (r1 - r0 != cfg.phase_window) or (c1 - c0 != cfg.phase_window)
    re = pair.re[r0:r1, c0:c1]
    im = pair.im[r0:r1, c0:c1]
    mag = np.hypot(re, im)
    s_re = float(np.sum(mag * re))
    s_im = float(np.sum(mag * im))
    mass = float(np.sum(mag * mag))
    s_norm = np.hypot(s_re, s_im)
    if s_norm <= _COHERENCE_EPS * mass or mass == 0.0:
        raise UndefinedDepthError("weighted complex sum vanished in phase window")
    dispersion = 1.0 - s_norm / mass
    return np.arctan2(s_im, s_re), float(min(max(dispersion, 0.0), 1.0)), truncated


def estimate_depth(pair: ComplexMapPair, peak, cfg: DecodeConfig):
    """Depth and phase dispersion at a detected peak.

    Depth comes from the phase of S = sum(w_j * (re_j, im_j)) with
    w_j = magnitude_j over the phase window; dispersion = 1 - |S| / sum(w_j
    * magnitude_j) is 0 for a coherent (single-depth) neighborhood and
    grows toward 1 under depth interference.
    """
    phase, dispersion, _ = _depth_stats(pair, peak, cfg)
    return float(phase_to_z(phase, pair.z_range)), dispersion


def decode(pair: ComplexMapPair, cfg: Optional[DecodeConfig] = None,
           frame_id: int = 0) -> LocalizationSet:
    """Full map-pair decode: peaks -> sub-pixel -> depth -> seed features.

    Seeds whose phase window sums to zero coherent mass are dropped and
    counted in ``n_dropped_depth``. Positions are reported in nm using the
    super-res pitch (camera pitch / 4).
    """
    if cfg is None:
        cfg = DecodeConfig()
    mag = pair.magnitude
    peaks = find_peaks(mag, cfg)
    h, w = mag.shape
    band = phase_band()

    xs, ys, zs = [], [], []
    mags, sharps, disps = [], [], []
    n_dropped = n_border = n_degenerate = n_clamped = n_truncated = 0
    for r, c in peaks:
        try:
            phase, dispersion, truncated = _depth_stats(pair, (r, c), cfg)
        except UndefinedDepthError:
            n_dropped += 1
            continue
        n_truncated += truncated
        refined = subpixel_refine(mag, (r, c))
        n_border += refined.border
        n_degenerate += refined.degenerate
        if abs(phase) > band:
            n_clamped += 1
        xs.append((refined.u + 0.5) * pair.super_pitch_x)
        ys.append((refined.v + 0.5) * pair.super_pitch_y)
        zs.append(float(phase_to_z(phase, pair.z_range)))
        mags.append(mag[r, c])
        # Sharpness: sum over existing 4-neighbors of (center - neighbor).
        neigh = []
        if r > 0:
            neigh.append(mag[r - 1, c])
        if r < h - 1:
            neigh.append(mag[r + 1, c])
        if c > 0:
            neigh.append(mag[r, c - 1])
        if c < w - 1:
            neigh.append(mag[r, c + 1])
        sharps.append(len(neigh) * mag[r, c] - sum(neigh))
        disps.append(dispersion)

    out = LocalizationSet(
        np.full(len(xs), frame_id, dtype=np.int64),
        np.asarray(xs), np.asarray(ys), np.asarray(zs),
        np.asarray(mags), np.asarray(sharps), np.asarray(disps))
    out.n_dropped_depth = n_dropped
    out.n_border = n_border
    out.n_degenerate = n_degenerate
    out.n_phase_clamped = n_clamped
    out.n_window_truncated = n_truncated
    return out

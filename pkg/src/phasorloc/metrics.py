"""Ground-truth matching and evaluation metrics.

Matching is an optimal bipartite assignment (minimum total 3D distance)
restricted to candidate pairs inside both distance tolerances; everything
downstream (Jaccard index, RMSE, efficiency, sweeps) is computed from the
resulting TP/FP/FN partition. Aggregation across frames is a plain
associative reduction over counts and sums of squares, so any reduction
order gives identical reports.
"""

from dataclasses import dataclass
from typing import Callable, Iterable, Iterator, List, Optional, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.stats import chi2 as chi2_dist

from . import codec
from .codec import DecodeConfig, LocalizationSet
from .errors import UndefinedMetricError, ValidationError
from .sim import EmitterSet, SimConfig, frame_rng, sample_emitters

# Cost placed on out-of-tolerance pairs; large enough that the assignment
# always prefers any number of eligible pairs over one ineligible pair.
_BIG_COST = 1.0e12

ALPHA_LATERAL = 1.0   # 1/nm, efficiency constant for lateral RMSE
ALPHA_3D = 0.5        # 1/nm, efficiency constant for volumetric RMSE

DEFAULT_TOL_LATERAL = 250.0   # nm
DEFAULT_TOL_AXIAL = 500.0     # nm


@dataclass
class Matching:
    """TP pairs and FP/FN counts for one frame (or an aggregate)."""

    gt_ids: np.ndarray
    pred_indices: np.ndarray
    dx: np.ndarray
    dy: np.ndarray
    dz: np.ndarray
    n_fp: int
    n_fn: int
    tol_lateral: float
    tol_axial: float

    @property
    def n_tp(self) -> int:
        return self.gt_ids.size

    @property
    def total_cost(self) -> float:
        return float(np.sum(np.sqrt(self.dx**2 + self.dy**2 + self.dz**2)))


def match_localizations(gt: EmitterSet, pred: LocalizationSet,
                        tol_lateral: float = DEFAULT_TOL_LATERAL,
                        tol_axial: float = DEFAULT_TOL_AXIAL,
                        lateral_only: bool = False) -> Matching:
    """Optimal assignment between ground truth and predictions of one frame.

    Candidate pairs must satisfy sqrt(dx^2+dy^2) <= tol_lateral and (unless
    lateral_only) |dz| <= tol_axial; among assignments maximizing the number
    of such pairs, the one with minimum total distance wins. Unmatched
    ground truth counts as FN, unmatched predictions as FP.
    """
    if pred.n and not np.all(pred.frame_ids == gt.frame_id):
        raise ValidationError("prediction frame_ids do not match ground truth frame")
    n_gt, n_pred = gt.n, pred.n
    if n_gt == 0 or n_pred == 0:
        return Matching(np.empty(0, np.int64), np.empty(0, np.int64),
                        np.empty(0), np.empty(0), np.empty(0),
                        n_fp=n_pred, n_fn=n_gt,
                        tol_lateral=tol_lateral, tol_axial=tol_axial)
    dx = pred.x[None, :] - gt.x[:, None]
    dy = pred.y[None, :] - gt.y[:, None]
    dz = pred.z[None, :] - gt.z[:, None]
    lateral = np.hypot(dx, dy)
    eligible = lateral <= tol_lateral
    if lateral_only:
        dist = lateral
    else:
        dist = np.sqrt(lateral**2 + dz**2)
        eligible &= np.abs(dz) <= tol_axial
    cost = np.where(eligible, dist, _BIG_COST)
    rows, cols = linear_sum_assignment(cost)
    keep = eligible[rows, cols]
    rows, cols = rows[keep], cols[keep]
    return Matching(gt.ids[rows], cols.astype(np.int64),
                    dx[rows, cols], dy[rows, cols], dz[rows, cols],
                    n_fp=n_pred - rows.size, n_fn=n_gt - rows.size,
                    tol_lateral=tol_lateral, tol_axial=tol_axial)


def jaccard_index(m: Matching) -> float:
    """TP / (TP + FP + FN)."""
    denom = m.n_tp + m.n_fp + m.n_fn
    if denom == 0:
        raise UndefinedMetricError("Jaccard index undefined: no gt and no predictions")
    return m.n_tp / denom


def rmse(m: Matching, axes: str = "volumetric") -> float:
    """RMSE over matched pairs; axes is 'lateral', 'axial' or 'volumetric'."""
    if m.n_tp == 0:
        raise UndefinedMetricError("RMSE undefined: no matched pairs")
    if axes == "lateral":
        sq = m.dx**2 + m.dy**2
    elif axes == "axial":
        sq = m.dz**2
    elif axes in ("volumetric", "3d"):
        sq = m.dx**2 + m.dy**2 + m.dz**2
    else:
        raise ValidationError(f"unknown RMSE axes selector {axes!r}")
    return float(np.sqrt(np.mean(sq)))


def efficiency(ji: float, rmse_value: float, alpha: float) -> float:
    """Challenge-convention scalar: 100 - sqrt((100 (1-ji))^2 + (alpha rmse)^2).

    3D efficiency pairs volumetric RMSE with alpha = 0.5/nm; lateral
    efficiency uses alpha = 1/nm.
    """
    if not 0.0 <= ji <= 1.0:
        raise ValidationError("ji must be within [0, 1]")
    if rmse_value < 0:
        raise ValidationError("rmse must be >= 0")
    return 100.0 - np.hypot(100.0 * (1.0 - ji), alpha * rmse_value)


@dataclass
class MetricReport:
    """Aggregated evaluation quantities over a set of frames."""

    ji: float
    rmse_lateral: float
    rmse_axial: float
    rmse_3d: float
    efficiency_3d: float
    n_tp: int
    n_fp: int
    n_fn: int
    n_frames: int
    n_seeds: int
    density: float = float("nan")


class MetricAccumulator:
    """Associative reduction of Matchings into a MetricReport."""

    def __init__(self):
        self.n_tp = 0
        self.n_fp = 0
        self.n_fn = 0
        self.sum_dx2 = 0.0
        self.sum_dy2 = 0.0
        self.sum_dz2 = 0.0
        self.n_frames = 0

    def add(self, m: Matching) -> None:
        self.n_tp += m.n_tp
        self.n_fp += m.n_fp
        self.n_fn += m.n_fn
        self.sum_dx2 += float(np.sum(m.dx**2))
        self.sum_dy2 += float(np.sum(m.dy**2))
        self.sum_dz2 += float(np.sum(m.dz**2))
        self.n_frames += 1

    def merge(self, other: "MetricAccumulator") -> "MetricAccumulator":
        out = MetricAccumulator()
        for name in ("n_tp", "n_fp", "n_fn", "n_frames"):
            setattr(out, name, getattr(self, name) + getattr(other, name))
        for name in ("sum_dx2", "sum_dy2", "sum_dz2"):
            setattr(out, name, getattr(self, name) + getattr(other, name))
        return out

    @property
    def n_seeds(self) -> int:
        return self.n_tp + self.n_fp

    def snapshot(self) -> tuple:
        """(n_seeds, ji, rmse_lateral, rmse_3d) checkpoint for residual tracking."""
        ji = self.n_tp / max(self.n_tp + self.n_fp + self.n_fn, 1)
        if self.n_tp:
            lat = np.sqrt((self.sum_dx2 + self.sum_dy2) / self.n_tp)
            r3 = np.sqrt((self.sum_dx2 + self.sum_dy2 + self.sum_dz2) / self.n_tp)
        else:
            lat = r3 = float("nan")
        return (self.n_seeds, ji, float(lat), float(r3))

    def report(self, density: float = float("nan")) -> MetricReport:
        denom = self.n_tp + self.n_fp + self.n_fn
        if denom == 0:
            raise UndefinedMetricError("no ground truth and no predictions accumulated")
        ji = self.n_tp / denom
        if self.n_tp:
            lat = float(np.sqrt((self.sum_dx2 + self.sum_dy2) / self.n_tp))
            ax = float(np.sqrt(self.sum_dz2 / self.n_tp))
            r3 = float(np.sqrt((self.sum_dx2 + self.sum_dy2 + self.sum_dz2) / self.n_tp))
        else:
            lat = ax = r3 = float("nan")
        eff = efficiency(ji, r3, ALPHA_3D) if self.n_tp else float("nan")
        return MetricReport(ji=ji, rmse_lateral=lat, rmse_axial=ax, rmse_3d=r3,
                            efficiency_3d=eff, n_tp=self.n_tp, n_fp=self.n_fp,
                            n_fn=self.n_fn, n_frames=self.n_frames,
                            n_seeds=self.n_seeds, density=density)


@dataclass
class BiasReport:
    """Fractional-position histogram and its uniformity test."""

    histogram: np.ndarray
    chi_square: float
    p_value: float
    n_seeds: int
    low_count_warning: bool


def pixel_bias_histogram(pred: LocalizationSet, pixel_pitch: float,
                         n_bins: int = 16) -> BiasReport:
    """2D histogram of (x mod pitch, y mod pitch)/pitch with a chi-square
    uniformity p-value. Flags (but still reports) populations smaller than
    100 seeds per linear bin."""
    if pred.n == 0:
        raise UndefinedMetricError("pixel bias undefined for an empty seed set")
    fx = np.mod(pred.x, pixel_pitch) / pixel_pitch
    fy = np.mod(pred.y, pixel_pitch) / pixel_pitch
    edges = np.linspace(0.0, 1.0, n_bins + 1)
    hist, _, _ = np.histogram2d(fx, fy, bins=(edges, edges))
    expected = pred.n / (n_bins * n_bins)
    stat = float(np.sum((hist - expected) ** 2) / expected)
    p = float(chi2_dist.sf(stat, n_bins * n_bins - 1))
    return BiasReport(histogram=hist, chi_square=stat, p_value=p,
                      n_seeds=pred.n, low_count_warning=pred.n < 100 * n_bins)


@dataclass
class ConvergenceResult:
    """Outcome of residual-based stopping on a metric checkpoint stream."""

    converged: bool
    seeds_needed: Optional[int]
    checkpoints_seen: int
    last_residuals: dict


def residual_convergence(stream: Iterable[tuple], rel_tolerance: float = 0.01,
                         patience: int = 5) -> ConvergenceResult:
    """Consume (n_seeds, ji, rmse_lateral, rmse_3d) checkpoints until stable.

    Converged once the relative residual |m_t - m_{t-1}| / m_t of all three
    metrics stays below rel_tolerance for ``patience`` consecutive
    checkpoints; returns the seed count of the checkpoint completing the
    run. An exhausted stream yields a non-converged result carrying the last
    residuals.
    """
    if rel_tolerance <= 0:
        raise ValidationError("rel_tolerance must be positive")
    if patience < 1:
        raise ValidationError("patience must be >= 1")
    prev = None
    run = 0
    seen = 0
    residuals = {"ji": float("inf"), "rmse_lateral": float("inf"),
                 "rmse_3d": float("inf")}
    for checkpoint in stream:
        seen += 1
        n_seeds, ji, lat, r3 = checkpoint
        if prev is not None:
            residuals = {}
            for name, cur, old in (("ji", ji, prev[1]),
                                   ("rmse_lateral", lat, prev[2]),
                                   ("rmse_3d", r3, prev[3])):
                if not (np.isfinite(cur) and np.isfinite(old)):
                    residuals[name] = float("inf")
                elif cur == 0.0:
                    residuals[name] = 0.0 if old == 0.0 else float("inf")
                else:
                    residuals[name] = abs(cur - old) / abs(cur)
            if all(r < rel_tolerance for r in residuals.values()):
                run += 1
                if run >= patience:
                    return ConvergenceResult(True, int(n_seeds), seen, residuals)
            else:
                run = 0
        prev = checkpoint
    return ConvergenceResult(False, None, seen, residuals)


def oracle_pair_stream(config: SimConfig, decode_cfg: DecodeConfig, *,
                       min_separation_nm: float = 0.0,
                       map_noise_sigma: float = 0.0,
                       n_frames: Optional[int] = None) -> Iterator[tuple]:
    """(EmitterSet, ComplexMapPair) pairs from ground-truth encoding.

    The oracle source bypasses camera frames entirely: it samples emitters
    and encodes them directly, optionally adding iid Gaussian noise to both
    channels (drawn from the frame's stream-1 generator) so decode errors
    become nonzero in a controlled way.
    """
    total = config.n_frames if n_frames is None else n_frames
    for frame_id in range(total):
        emitters = sample_emitters(config, frame_id,
                                   min_separation_nm=min_separation_nm)
        pair = codec.encode_targets(emitters, config.camera, config.z_range,
                                    decode_cfg)
        if map_noise_sigma > 0:
            noise_rng = frame_rng(config.rng_seed, frame_id, stream=1)
            pair.re = pair.re + noise_rng.normal(0.0, map_noise_sigma, pair.re.shape)
            pair.im = pair.im + noise_rng.normal(0.0, map_noise_sigma, pair.im.shape)
        yield emitters, pair


@dataclass
class SweepPoint:
    """Per-density outcome of a sweep."""

    report: MetricReport
    convergence: ConvergenceResult


def evaluate_pair_stream(pairs: Iterable[tuple], decode_cfg: DecodeConfig, *,
                         tol_lateral: float = DEFAULT_TOL_LATERAL,
                         tol_axial: float = DEFAULT_TOL_AXIAL,
                         lateral_only: bool = False,
                         rel_tolerance: float = 0.01,
                         checkpoint_every: int = 1000,
                         patience: int = 5,
                         density: float = float("nan")) -> SweepPoint:
    """Decode+match a pair stream, stopping on residual convergence.

    Checkpoints are emitted whenever the cumulative seed count crosses
    another multiple of ``checkpoint_every``.
    """
    acc = MetricAccumulator()

    def checkpoints():
        next_mark = checkpoint_every
        for emitters, pair in pairs:
            pred = codec.decode(pair, decode_cfg, frame_id=emitters.frame_id)
            acc.add(match_localizations(emitters, pred, tol_lateral, tol_axial,
                                        lateral_only=lateral_only))
            while acc.n_seeds >= next_mark:
                yield acc.snapshot()
                next_mark += checkpoint_every

    convergence = residual_convergence(checkpoints(), rel_tolerance, patience)
    return SweepPoint(acc.report(density), convergence)


def density_sweep(densities: Sequence[float], base_config: SimConfig,
                  decode_cfg: DecodeConfig, *,
                  tol_lateral: float = DEFAULT_TOL_LATERAL,
                  tol_axial: float = DEFAULT_TOL_AXIAL,
                  lateral_only: bool = False,
                  min_separation_nm: float = 0.0,
                  map_noise_sigma: float = 0.0,
                  rel_tolerance: float = 0.01,
                  checkpoint_every: int = 1000,
                  patience: int = 5,
                  max_frames: int = 5000,
                  pair_streams: Optional[Callable[[float], Iterable[tuple]]] = None,
                  ) -> List[SweepPoint]:
    """One MetricReport per density, aggregated until residuals settle.

    ``pair_streams(density)`` may supply externally produced
    (EmitterSet, ComplexMapPair) streams (e.g. network predictions read back
    from grid files); by default the oracle encode of fresh simulations is
    used, capped at ``max_frames`` frames per density.
    """
    points = []
    for density in densities:
        cfg = base_config.with_density(float(density))
        if pair_streams is not None:
            stream = pair_streams(float(density))
        else:
            stream = oracle_pair_stream(cfg, decode_cfg,
                                        min_separation_nm=min_separation_nm,
                                        map_noise_sigma=map_noise_sigma,
                                        n_frames=max_frames)
        points.append(evaluate_pair_stream(
            stream, decode_cfg, tol_lateral=tol_lateral, tol_axial=tol_axial,
            lateral_only=lateral_only, rel_tolerance=rel_tolerance,
            checkpoint_every=checkpoint_every, patience=patience,
            density=float(density)))
    return points

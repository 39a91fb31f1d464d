"""Bit-exact on-disk formats: emitter/seed CSV, binary grids, run configs,
metric reports and plot-ready column files.

All writers emit canonical form: sorted keys where applicable, floats at 9
significant digits, '\\n' line endings, little-endian binary. Canonical
output is idempotent: write(read(write(x))) == write(x) byte for byte.
"""

import struct
from pathlib import Path
from typing import Dict, Iterable, List, Sequence, Tuple

import numpy as np

from .codec import ComplexMapPair, LocalizationSet, UPSAMPLE
from .errors import (BadMagicError, FormatError, HeaderMismatchError,
                     TruncatedPayloadError, ValidationError)
from .metrics import MetricReport
from .presets import CONFIG_SCHEMA, default_config
from .sim import EmitterSet, Frame

GRID_MAGIC = b"LUGR"
GRID_VERSION = 1
GRID_DTYPE_F32 = 0
_GRID_HEADER = struct.Struct("<4sHHIIIddd")

GT_HEADER = "frame,id,x_nm,y_nm,z_nm,photons"
SEED_HEADER = GT_HEADER + ",peak_mag,sharpness,dispersion"


def _fmt(value: float) -> str:
    return "%.9g" % float(value)


# ---------------------------------------------------------------------------
# Emitter-list CSV
# ---------------------------------------------------------------------------

def write_emitters(path, sets: Iterable[EmitterSet]) -> None:
    """Ground-truth CSV, one row per emitter, frames in ascending order."""
    lines = [GT_HEADER]
    for es in sorted(sets, key=lambda s: s.frame_id):
        for i in range(es.n):
            lines.append(",".join([
                str(es.frame_id), str(int(es.ids[i])), _fmt(es.x[i]),
                _fmt(es.y[i]), _fmt(es.z[i]), _fmt(es.photons[i])]))
    Path(path).write_text("\n".join(lines) + "\n")


def read_emitters(path) -> List[EmitterSet]:
    """Parse a ground-truth CSV into per-frame EmitterSets (ascending frames)."""
    rows = _read_csv_rows(path, GT_HEADER, 6)
    frames: Dict[int, list] = {}
    for line_no, fields in rows:
        try:
            frame = int(fields[0])
            rec = (int(fields[1]), float(fields[2]), float(fields[3]),
                   float(fields[4]), float(fields[5]))
        except ValueError as exc:
            raise FormatError(f"bad numeric field: {exc}", path=path,
                              line=line_no) from None
        frames.setdefault(frame, []).append(rec)
    out = []
    for frame_id in sorted(frames):
        recs = frames[frame_id]
        ids, x, y, z, photons = (np.asarray(col) for col in zip(*recs))
        out.append(EmitterSet(frame_id, ids.astype(np.int64), x, y, z, photons))
    return out


def write_seeds(path, seeds: LocalizationSet) -> None:
    """Decoded-seed CSV: photons column is -1 and feature columns follow."""
    lines = [SEED_HEADER]
    order = np.lexsort((np.arange(seeds.n), seeds.frame_ids))
    counter: Dict[int, int] = {}
    for i in order:
        frame = int(seeds.frame_ids[i])
        seed_id = counter.get(frame, 0)
        counter[frame] = seed_id + 1
        lines.append(",".join([
            str(frame), str(seed_id), _fmt(seeds.x[i]), _fmt(seeds.y[i]),
            _fmt(seeds.z[i]), "-1", _fmt(seeds.peak_magnitude[i]),
            _fmt(seeds.peak_sharpness[i]), _fmt(seeds.phase_dispersion[i])]))
    Path(path).write_text("\n".join(lines) + "\n")


def read_seeds(path) -> LocalizationSet:
    rows = _read_csv_rows(path, SEED_HEADER, 9)
    cols: List[list] = [[] for _ in range(8)]
    for line_no, fields in rows:
        try:
            vals = (int(fields[0]), float(fields[2]), float(fields[3]),
                    float(fields[4]), float(fields[6]), float(fields[7]),
                    float(fields[8]))
        except ValueError as exc:
            raise FormatError(f"bad numeric field: {exc}", path=path,
                              line=line_no) from None
        for col, val in zip(cols, vals):
            col.append(val)
    if not cols[0]:
        return LocalizationSet.empty()
    return LocalizationSet(
        np.asarray(cols[0], dtype=np.int64), np.asarray(cols[1]),
        np.asarray(cols[2]), np.asarray(cols[3]), np.asarray(cols[4]),
        np.asarray(cols[5]), np.asarray(cols[6]))


def read_localizations_any(path) -> LocalizationSet:
    """Either CSV variant as a LocalizationSet.

    Seed files keep their feature columns; ground-truth files get neutral
    features (renderers and filters accept both).
    """
    first = Path(path).read_text().splitlines()
    header = first[0].strip() if first else ""
    if header == SEED_HEADER:
        return read_seeds(path)
    sets = read_emitters(path)
    parts = []
    for es in sets:
        n = es.n
        parts.append(LocalizationSet(
            np.full(n, es.frame_id, dtype=np.int64), es.x, es.y, es.z,
            np.ones(n), np.ones(n), np.zeros(n)))
    return LocalizationSet.concatenate(parts)


def _read_csv_rows(path, header: str, n_fields: int):
    text = Path(path).read_text()
    lines = text.splitlines()
    if not lines or lines[0].strip() != header:
        raise HeaderMismatchError(
            f"expected header {header!r}", path=path, line=1)
    rows = []
    for line_no, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        fields = line.split(",")
        if len(fields) != n_fields:
            raise HeaderMismatchError(
                f"expected {n_fields} fields, got {len(fields)}",
                path=path, line=line_no)
        rows.append((line_no, fields))
    return rows


# ---------------------------------------------------------------------------
# Binary grid files (frames and complex map pairs)
# ---------------------------------------------------------------------------

def write_grid(path, channels: np.ndarray, pixel_pitch_nm: float,
               z_min: float = 0.0, z_max: float = 0.0) -> None:
    """Write a (n_channels, height, width) float32 stack with its metadata."""
    channels = np.ascontiguousarray(np.asarray(channels, dtype="<f4"))
    if channels.ndim != 3:
        raise ValidationError("grid payload must be (n_channels, height, width)")
    c, h, w = channels.shape
    header = _GRID_HEADER.pack(GRID_MAGIC, GRID_VERSION, GRID_DTYPE_F32,
                               c, h, w, float(pixel_pitch_nm),
                               float(z_min), float(z_max))
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(channels.tobytes())


class GridData:
    """Raw contents of a grid file."""

    def __init__(self, channels, pixel_pitch_nm, z_min, z_max):
        self.channels = channels
        self.pixel_pitch_nm = pixel_pitch_nm
        self.z_min = z_min
        self.z_max = z_max


def read_grid(path) -> GridData:
    blob = Path(path).read_bytes()
    if len(blob) < _GRID_HEADER.size:
        raise TruncatedPayloadError(
            f"file shorter than the {_GRID_HEADER.size}-byte header",
            path=path, offset=len(blob))
    magic, version, dtype, c, h, w, pitch, z_min, z_max = \
        _GRID_HEADER.unpack_from(blob)
    if magic != GRID_MAGIC:
        raise BadMagicError(f"bad magic {magic!r}, expected {GRID_MAGIC!r}",
                            path=path, offset=0)
    if version != GRID_VERSION:
        raise HeaderMismatchError(f"unsupported version {version}",
                                  path=path, offset=4)
    if dtype != GRID_DTYPE_F32:
        raise HeaderMismatchError(f"unsupported dtype tag {dtype}",
                                  path=path, offset=6)
    if c <= 0 or h <= 0 or w <= 0:
        raise HeaderMismatchError("grid dimensions must be positive",
                                  path=path, offset=8)
    expected = c * h * w
    payload = blob[_GRID_HEADER.size:]
    got = len(payload) // 4
    if len(payload) != expected * 4:
        raise TruncatedPayloadError(
            f"payload holds {got} float32 values, expected {expected}",
            path=path, offset=_GRID_HEADER.size + len(payload))
    channels = np.frombuffer(payload, dtype="<f4").reshape(c, h, w)
    return GridData(channels, pitch, z_min, z_max)


def _require_isotropic(pitch_x: float, pitch_y: float) -> float:
    if pitch_x != pitch_y:
        raise ValidationError(
            "grid files store a single pixel pitch; anisotropic grids "
            "cannot be serialized")
    return pitch_x


def write_frame_grid(path, frame: Frame) -> None:
    pitch = _require_isotropic(frame.pixel_pitch_x, frame.pixel_pitch_y)
    write_grid(path, frame.adu[None, :, :], pitch)


def read_frame_grid(path, frame_id: int = 0) -> Frame:
    data = read_grid(path)
    if data.channels.shape[0] != 1:
        raise HeaderMismatchError(
            f"frame grids have 1 channel, got {data.channels.shape[0]}",
            path=path)
    return Frame(frame_id, data.channels[0].astype(np.float64),
                 data.pixel_pitch_nm, data.pixel_pitch_nm)


def write_map_pair(path, pair: ComplexMapPair) -> None:
    """2-channel grid (re, im); the stored pitch is the super-res grid pitch."""
    pitch = _require_isotropic(pair.pixel_pitch_x, pair.pixel_pitch_y)
    write_grid(path, np.stack([pair.re, pair.im]), pitch / pair.upsample_factor,
               pair.z_range[0], pair.z_range[1])


def read_map_pair(path) -> ComplexMapPair:
    data = read_grid(path)
    if data.channels.shape[0] != 2:
        raise HeaderMismatchError(
            f"map-pair grids have 2 channels, got {data.channels.shape[0]}",
            path=path)
    pitch = data.pixel_pitch_nm * UPSAMPLE
    return ComplexMapPair(data.channels[0].astype(np.float64),
                          data.channels[1].astype(np.float64),
                          pitch, pitch, (data.z_min, data.z_max))


# ---------------------------------------------------------------------------
# Flat key = value files (run configs, reports) and column files
# ---------------------------------------------------------------------------

def parse_keyvalues(text: str, schema: Dict[str, tuple], *,
                    path=None) -> Dict[str, object]:
    """Parse `key = value` lines against a schema; unknown keys are rejected."""
    values: Dict[str, object] = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise FormatError("expected 'key = value'", path=path, line=line_no)
        key, _, val = (part.strip() for part in line.partition("="))
        if key not in schema:
            raise FormatError(f"unknown key {key!r}", path=path, line=line_no)
        kind = schema[key][0]
        try:
            if kind == "float":
                values[key] = float(val)
            elif kind == "int":
                values[key] = int(val)
            elif kind == "bool":
                if val not in ("true", "false"):
                    raise ValueError("expected true/false")
                values[key] = val == "true"
            else:
                values[key] = val
        except ValueError as exc:
            raise FormatError(f"bad {kind} value for {key}: {exc}",
                              path=path, line=line_no) from None
    return values


def format_keyvalues(values: Dict[str, object], schema: Dict[str, tuple]) -> str:
    """Canonical form: sorted keys, one per line, unset optional keys omitted."""
    lines = []
    for key in sorted(schema):
        if key not in values or values[key] is None:
            continue
        kind = schema[key][0]
        val = values[key]
        if kind == "float":
            txt = _fmt(val)
        elif kind == "bool":
            txt = "true" if val else "false"
        else:
            txt = str(val)
        lines.append(f"{key} = {txt}")
    return "\n".join(lines) + "\n"


def read_config(path) -> Dict[str, object]:
    """Run config file -> full value dict (schema defaults overlaid)."""
    overrides = parse_keyvalues(Path(path).read_text(), CONFIG_SCHEMA, path=path)
    values = default_config()
    values.update(overrides)
    return values


def write_config(path, values: Dict[str, object]) -> None:
    Path(path).write_text(format_keyvalues(values, CONFIG_SCHEMA))


_REPORT_SCHEMA = {
    "ji": ("float", None),
    "rmse_lateral": ("float", None),
    "rmse_axial": ("float", None),
    "rmse_3d": ("float", None),
    "efficiency_3d": ("float", None),
    "n_tp": ("int", None),
    "n_fp": ("int", None),
    "n_fn": ("int", None),
    "n_frames": ("int", None),
    "n_seeds": ("int", None),
    "density": ("float", None),
}


def write_report(path, report: MetricReport) -> None:
    values = {key: getattr(report, key) for key in _REPORT_SCHEMA}
    Path(path).write_text(format_keyvalues(values, _REPORT_SCHEMA))


def read_report(path) -> MetricReport:
    values = parse_keyvalues(Path(path).read_text(), _REPORT_SCHEMA, path=path)
    missing = [k for k in _REPORT_SCHEMA if k not in values]
    if missing:
        raise FormatError(f"report missing keys: {', '.join(sorted(missing))}",
                          path=path)
    return MetricReport(**values)


def report_text(report: MetricReport) -> str:
    values = {key: getattr(report, key) for key in _REPORT_SCHEMA}
    return format_keyvalues(values, _REPORT_SCHEMA)


def write_columns(path, names: Sequence[str], rows) -> None:
    """Plot-ready whitespace-separated columns with a '# ...' header line."""
    rows = np.atleast_2d(np.asarray(rows, dtype=np.float64))
    if rows.size and rows.shape[1] != len(names):
        raise ValidationError("row width does not match column names")
    lines = ["# " + " ".join(names)]
    for row in rows:
        lines.append(" ".join(_fmt(v) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def read_columns(path) -> Tuple[List[str], np.ndarray]:
    lines = Path(path).read_text().splitlines()
    if not lines or not lines[0].startswith("# "):
        raise HeaderMismatchError("missing '# ...' column header",
                                  path=path, line=1)
    names = lines[0][2:].split()
    data = []
    for line_no, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        fields = line.split()
        if len(fields) != len(names):
            raise HeaderMismatchError(
                f"expected {len(names)} columns, got {len(fields)}",
                path=path, line=line_no)
        try:
            data.append([float(f) for f in fields])
        except ValueError as exc:
            raise FormatError(f"bad numeric value: {exc}", path=path,
                              line=line_no) from None
    arr = np.asarray(data, dtype=np.float64) if data else \
        np.empty((0, len(names)))
    return names, arr

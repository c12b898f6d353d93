"""File formats: profile CSV, voxel JSON with raw sidecars, reports and manifests."""
from __future__ import annotations

import csv
import hashlib
import json
import math
from pathlib import Path

import numpy as np

from .errors import ParseError, ValidationError
from .geometry import ProfileSet, VoxelSet

VOXEL_ENCODING = "raw-row-major-u8"


def fmt(x) -> str:
    """Shortest round-trip text for a float."""
    return repr(float(x))


def _clean(obj):
    # JSON has no NaN or infinity
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.generic):
        return _clean(obj.item())
    return obj


def write_json(path, obj) -> Path:
    path = Path(path)
    path.write_text(json.dumps(_clean(obj), indent=2) + "\n")
    return path


def read_json(path) -> dict:
    text = Path(path).read_text()
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(f"{path}: {e.msg}", e.lineno, e.colno) from None


# ---------------------------------------------------------------- profiles

def write_profile(path, profile: ProfileSet) -> Path:
    """CSV with header ``t,rho``.  Repeated heights encode horizontal steps."""
    path = Path(path)
    with path.open("w", newline="") as f:
        f.write("t,rho\n")
        for t, r in zip(profile.heights, profile.radii):
            f.write(f"{fmt(t)},{fmt(r)}\n")
    return path


def read_profile(path) -> ProfileSet:
    path = Path(path)
    with path.open(newline="") as f:
        rows = list(csv.reader(f))
    if not rows or [c.strip() for c in rows[0]] != ["t", "rho"]:
        raise ParseError(f"{path}: expected header 't,rho'", 1, 0)
    t, r = [], []
    for i, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != 2:
            raise ParseError(f"{path}: expected 2 fields, got {len(row)}", i)
        try:
            t.append(float(row[0]))
        except ValueError:
            raise ParseError(f"{path}: bad number {row[0]!r}", i, 0) from None
        try:
            r.append(float(row[1]))
        except ValueError:
            raise ParseError(f"{path}: bad number {row[1]!r}", i, len(row[0]) + 1) from None
    try:
        return ProfileSet(np.array(t), np.array(r))
    except ValidationError as e:
        raise ParseError(f"{path}: {e}") from None


# ---------------------------------------------------------------- voxels

def write_voxel(path, voxel: VoxelSet, channels: dict | None = None) -> list:
    """JSON header plus a ``.u8`` occupancy sidecar (row-major 0/1 bytes).

    ``channels`` maps names to float64 arrays of the raster shape, written
    as little-endian ``.<name>.f64`` sidecars.  Returns all written paths.
    """
    path = Path(path)
    stem = path.with_suffix("")
    data = stem.with_suffix(".u8")
    data.write_bytes(np.ascontiguousarray(voxel.occupancy, dtype=np.uint8).tobytes())
    head = {
        "dim": voxel.dim,
        "spacing": voxel.spacing,
        "origin": list(voxel.origin),
        "shape": list(voxel.shape),
        "encoding": VOXEL_ENCODING,
        "data": data.name,
    }
    if voxel.widths is not None:
        head["widths"] = [None if w is None else [float(x) for x in w] for w in voxel.widths]
    out = [path, data]
    if channels:
        head["channels"] = {}
        for name, arr in channels.items():
            arr = np.asarray(arr, dtype="<f8")
            if arr.shape != voxel.shape:
                raise ValidationError(f"channel {name} has shape {arr.shape}, expected {voxel.shape}")
            p = Path(f"{stem}.{name}.f64")
            p.write_bytes(np.ascontiguousarray(arr).tobytes())
            head["channels"][name] = p.name
            out.append(p)
    path.write_text(json.dumps(head, indent=2) + "\n")
    return out


def read_voxel(path, with_channels: bool = False):
    path = Path(path)
    head = read_json(path)
    for key in ("dim", "spacing", "origin", "shape", "encoding"):
        if key not in head:
            raise ParseError(f"{path}: header is missing {key!r}", 1)
    if head["encoding"] != VOXEL_ENCODING:
        raise ParseError(f"{path}: unsupported encoding {head['encoding']!r}", 1)
    shape = tuple(int(s) for s in head["shape"])
    if len(shape) != head["dim"]:
        raise ParseError(f"{path}: shape does not match dim", 1)
    data = path.parent / head.get("data", path.with_suffix(".u8").name)
    raw = np.frombuffer(data.read_bytes(), dtype=np.uint8)
    if raw.size != int(np.prod(shape)):
        raise ParseError(f"{data}: expected {int(np.prod(shape))} bytes, found {raw.size}", None, raw.size)
    if np.any(raw > 1):
        raise ParseError(f"{data}: occupancy bytes must be 0 or 1", None, int(np.argmax(raw > 1)))
    widths = head.get("widths")
    if widths is not None:
        widths = tuple(None if w is None else np.array(w, dtype=float) for w in widths)
    try:
        vox = VoxelSet(raw.reshape(shape).astype(bool), float(head["spacing"]), tuple(head["origin"]), widths)
    except ValidationError as e:
        raise ParseError(f"{path}: {e}") from None
    if not with_channels:
        return vox
    ch = {}
    for name, fname in head.get("channels", {}).items():
        ch[name] = np.frombuffer((path.parent / fname).read_bytes(), dtype="<f8").reshape(shape)
    return vox, ch


def read_set(path):
    """Profile for ``.csv`` files, voxel set for ``.json`` headers."""
    path = Path(path)
    if path.suffix == ".csv":
        return read_profile(path)
    if path.suffix == ".json":
        return read_voxel(path)
    raise ParseError(f"{path}: unknown set format (expected .csv or .json)")


def write_set(path, obj) -> list:
    if isinstance(obj, ProfileSet):
        return [write_profile(Path(path).with_suffix(".csv"), obj)]
    return write_voxel(Path(path).with_suffix(".json"), obj)


# ---------------------------------------------------------------- tables

def write_csv(path, columns, rows) -> Path:
    path = Path(path)
    with path.open("w", newline="") as f:
        f.write(",".join(columns) + "\n")
        for r in rows:
            f.write(",".join(fmt(x) if isinstance(x, (float, int, np.floating, np.integer)) else str(x)
                             for x in r) + "\n")
    return path


def sha256(path) -> str:
    h = hashlib.sha256()
    with Path(path).open("rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(out_dir, files, config: dict | None = None) -> Path:
    out_dir = Path(out_dir)
    entries = []
    for p in sorted({Path(f).resolve() for f in files}):
        entries.append({"path": str(p.relative_to(out_dir.resolve())), "sha256": sha256(p),
                        "bytes": p.stat().st_size})
    return write_json(out_dir / "manifest.json", {"files": entries, "config": config or {}})

"""Bit-stable output: CSV, JSON summaries, manifests and state checkpoints.

Floats are written in Python's shortest round-trip form (repr), so reading a
file back gives the identical doubles and equal inputs give identical bytes.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import platform
from pathlib import Path

import numpy as np

from . import tensors as T
from .state import RescaledState

TRAJECTORY_FORMAT = "s3crunch-trajectory"
FORMAT_VERSION = 1
SYM_PAIRS = ((0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2))
FIELD_LABELS = (
    [f"G{i + 1}{j + 1}" for i, j in SYM_PAIRS]
    + [f"K{i + 1}_{j + 1}" for i in range(3) for j in range(3)]
    + ["psi", "Psi", "Phi1", "Phi2", "Phi3"]
)


def format_float(x) -> str:
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(x)


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, str):
        return v
    return format_float(v)


def write_csv(path, rows, columns=None) -> Path:
    """Rows are dicts; columns default to first-seen key order across rows."""
    path = Path(path)
    if columns is None:
        columns = []
        for r in rows:
            columns.extend(k for k in r if k not in columns)
    lines = [",".join(columns)]
    for r in rows:
        lines.append(",".join(_cell(r.get(c, float("nan"))) for c in columns))
    path.write_text("\n".join(lines) + "\n")
    return path


def read_csv(path) -> list[dict]:
    text = Path(path).read_text().splitlines()
    header = text[0].split(",")
    return [dict(zip(header, (float(x) for x in line.split(",")))) for line in text[1:] if line]


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else format_float(x)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_json(path, obj) -> Path:
    path = Path(path)
    path.write_text(json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n")
    return path


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def module_versions() -> dict:
    import scipy

    from . import __version__
    return {"s3crunch": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version()}


def write_manifest(out_dir, config_hash: str, name: str = "manifest.json") -> Path:
    """List every file under out_dir (except the manifest) with size and sha256."""
    out_dir = Path(out_dir)
    files = []
    for p in sorted(out_dir.rglob("*")):
        if p.is_file() and p.name != name:
            files.append({"path": p.relative_to(out_dir).as_posix(), "size": p.stat().st_size,
                          "sha256": sha256_file(p)})
    manifest = {"config_hash": config_hash, "versions": module_versions(), "files": files}
    return write_json(out_dir / name, manifest)


# --- checkpoints ---------------------------------------------------------------------


def state_to_flat(state: RescaledState) -> np.ndarray:
    """Stack the fields in FIELD_LABELS order; shape (20,) + spatial shape."""
    parts = [state.G[i, j] for i, j in SYM_PAIRS]
    parts += [state.Khat[i, j] for i in range(3) for j in range(3)]
    parts += [state.psi, state.Psi, state.Phi[0], state.Phi[1], state.Phi[2]]
    return np.stack([np.asarray(p, dtype="<f8") for p in parts])


def state_from_flat(t: float, flat: np.ndarray) -> RescaledState:
    """Inverse of state_to_flat; G^{-1} is recomputed from G."""
    flat = np.asarray(flat, dtype=float)
    shape = flat.shape[1:]
    G = np.empty((3, 3) + shape)
    for k, (i, j) in enumerate(SYM_PAIRS):
        G[i, j] = G[j, i] = flat[k]
    K = flat[6:15].reshape((3, 3) + shape)
    return RescaledState(t=float(t), G=G, G_inv=T.inverse(G), Khat=K, psi=flat[15].copy(),
                         Psi=flat[16].copy(), Phi=flat[17:20].copy())


def save_trajectory(out_dir, states, mode: str, extra: dict | None = None, stem: str = "trajectory"):
    """JSON header (times, flags, shapes, labels) plus one flat little-endian float64 file."""
    out_dir = Path(out_dir)
    shape = list(np.shape(states[0].psi)) if states else []
    header = {
        "format": TRAJECTORY_FORMAT, "version": FORMAT_VERSION, "mode": mode,
        "spatial_shape": shape, "fields": list(FIELD_LABELS), "dtype": "<f8",
        "layout": "slice, field, spatial (C order)", "n_slices": len(states),
        "times": [float(s.t) for s in states], "data_file": f"{stem}.bin",
    }
    if extra:
        header.update(extra)
    with open(out_dir / f"{stem}.bin", "wb") as fh:
        for s in states:
            fh.write(state_to_flat(s).tobytes(order="C"))
    write_json(out_dir / f"{stem}.json", header)
    return header


def load_trajectory(out_dir, stem: str = "trajectory"):
    """Return (header, states)."""
    out_dir = Path(out_dir)
    header = json.loads((out_dir / f"{stem}.json").read_text())
    if header.get("format") != TRAJECTORY_FORMAT:
        raise ValueError(f"{out_dir / stem}.json is not a trajectory header")
    shape = tuple(header["spatial_shape"])
    n_fields = len(header["fields"])
    data = np.fromfile(out_dir / header["data_file"], dtype="<f8")
    per = n_fields * int(np.prod(shape, dtype=int))
    if data.size != per * header["n_slices"]:
        raise ValueError("trajectory data size does not match its header")
    data = data.reshape((header["n_slices"], n_fields) + shape)
    states = [state_from_flat(t, data[k]) for k, t in enumerate(header["times"])]
    return header, states


def write_grid_fields(out_dir, stem: str, fields: dict, grid_shape) -> Path:
    """Named grid fields as flat float64 plus a JSON header with the grid sizes."""
    out_dir = Path(out_dir)
    names = sorted(fields)
    with open(out_dir / f"{stem}.bin", "wb") as fh:
        for n in names:
            fh.write(np.asarray(fields[n], dtype="<f8").tobytes(order="C"))
    n_eta, n_xi1, n_xi2 = grid_shape
    return write_json(out_dir / f"{stem}.json", {
        "n_eta": n_eta, "n_xi1": n_xi1, "n_xi2": n_xi2, "fields": names,
        "dtype": "<f8", "data_file": f"{stem}.bin"})


def output_dir(cli_value: str | None, config_value: str, env_var: str = "S3CRUNCH_OUT") -> Path:
    """Precedence: environment variable, then --out, then the config file."""
    chosen = os.environ.get(env_var) or cli_value or config_value
    path = Path(chosen)
    path.mkdir(parents=True, exist_ok=True)
    return path

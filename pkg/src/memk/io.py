"""Plain-text and binary persistence for signals, kernels, tables and ensembles.

Text outputs are CSV with ``#`` comment lines on top and 17 significant
digits, so a value written and read back is bit-identical.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .errors import FormatError
from .grid import Signal, TimeGrid
from .kernel import KernelModel
from .spectral_model import EthEnsembleConfig, EthObservable, ReferenceFunction, Spectrum

__all__ = [
    "write_signal",
    "read_signal",
    "write_kernel",
    "read_kernel",
    "write_table",
    "read_table",
    "write_json",
    "config_to_dict",
    "config_from_dict",
    "save_ensemble",
    "load_ensemble",
    "MAGIC",
]

MAGIC = b"MEMK1\n"
FLOAT_FORMAT = "%.17g"
_ARRAYS = ("energies", "eigenvalues", "matrix", "eigenbasis")


def _fmt(x):
    return FLOAT_FORMAT % x


def _grid_from_column(t):
    if t.shape[0] < 2:
        raise FormatError("need at least two rows to recover the time grid")
    dt = float(t[1] - t[0])
    grid = TimeGrid(dt, t.shape[0] - 1)
    if not np.allclose(grid.times, t, rtol=0, atol=1e-9 * max(1.0, grid.horizon)):
        raise FormatError("time column is not a uniform grid starting at 0")
    return grid


def _numeric_rows(lines):
    rows = []
    for line in lines:
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        try:
            rows.append([float(x) for x in line.split(",")])
        except ValueError as exc:
            raise FormatError(f"non-numeric row: {line!r}") from exc
    return np.array(rows)


def write_signal(path, signal: Signal):
    """Two columns under the header ``# t,value``."""
    lines = ["# t,value"]
    lines += [f"{_fmt(t)},{_fmt(v)}" for t, v in zip(signal.times, signal.values)]
    Path(path).write_text("\n".join(lines) + "\n")


def read_signal(path) -> Signal:
    data = _numeric_rows(Path(path).read_text().splitlines())
    if data.ndim != 2 or data.shape[1] != 2:
        raise FormatError(f"{path}: expected two columns")
    return Signal(_grid_from_column(data[:, 0]), data[:, 1])


def write_kernel(path, kernel: KernelModel):
    """``# delta_weight=<β>`` followed by ``tau,value`` rows."""
    lines = [f"# delta_weight={_fmt(kernel.delta_weight)}", "tau,value"]
    lines += [f"{_fmt(t)},{_fmt(v)}" for t, v in zip(kernel.smooth.times, kernel.smooth.values)]
    Path(path).write_text("\n".join(lines) + "\n")


def read_kernel(path) -> KernelModel:
    lines = Path(path).read_text().splitlines()
    beta = None
    for line in lines:
        if line.startswith("# delta_weight="):
            beta = float(line.split("=", 1)[1])
    if beta is None:
        raise FormatError(f"{path}: missing '# delta_weight=' header")
    body = [ln for ln in lines if not ln.startswith("tau")]
    data = _numeric_rows(body)
    return KernelModel(beta, Signal(_grid_from_column(data[:, 0]), data[:, 1]))


def write_table(path, columns: dict, comments=()):
    """Comment lines, a column header row, then one row per sample.

    Integers and strings are written as is; floats with 17 significant digits.
    """
    names = list(columns)
    values = [np.asarray(columns[name]) for name in names]
    length = {len(v) for v in values}
    if len(length) > 1:
        raise ValueError("columns have different lengths")

    def cell(x):
        if isinstance(x, (str, np.str_)):
            return str(x)
        if isinstance(x, (int, np.integer, bool, np.bool_)):
            return str(int(x))
        return _fmt(float(x))

    lines = [f"# {c}" for c in comments]
    lines.append(",".join(names))
    lines += [",".join(cell(v[i]) for v in values) for i in range(length.pop() if length else 0)]
    Path(path).write_text("\n".join(lines) + "\n")


def read_table(path):
    """Inverse of :func:`write_table`; numeric columns come back as float arrays."""
    lines = [ln for ln in Path(path).read_text().splitlines() if ln.strip() and not ln.startswith("#")]
    if not lines:
        raise FormatError(f"{path}: no header row")
    names = lines[0].split(",")
    cols = list(zip(*(ln.split(",") for ln in lines[1:]))) or [() for _ in names]
    out = {}
    for name, col in zip(names, cols):
        try:
            out[name] = np.array([float(x) for x in col])
        except ValueError:
            out[name] = list(col)
    return out


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, Path):
        return str(obj)
    if hasattr(obj, "value") and isinstance(getattr(obj, "value"), str):
        return obj.value
    return obj


def write_json(path, payload):
    Path(path).write_text(json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n")


def config_to_dict(config: EthEnsembleConfig):
    d = asdict(config)
    d["reference"] = {"kind": config.reference.kind.value, "tau": config.reference.tau, "v": config.reference.v}
    return d


def config_from_dict(d) -> EthEnsembleConfig:
    d = dict(d)
    d["reference"] = ReferenceFunction(**d["reference"])
    return EthEnsembleConfig(**d)


def save_ensemble(path, config: EthEnsembleConfig, spectrum: Spectrum, observable: EthObservable):
    """Write the ``MEMK1`` binary container and a ``.json`` sidecar next to it.

    Layout: magic line, little-endian ``uint64`` header length, UTF-8 JSON
    header, then the float64 arrays listed in the header in order.
    Returns the sidecar path.
    """
    path = Path(path)
    arrays = {
        "energies": spectrum.energies,
        "eigenvalues": observable.eigenvalues,
        "matrix": observable.matrix,
        "eigenbasis": observable.eigenbasis,
    }
    header = {
        "format": "MEMK1",
        "dimension": spectrum.dimension,
        "seed": config.seed,
        "config": config_to_dict(config),
        "scale": observable.scale,
        "arrays": [{"name": k, "shape": list(arrays[k].shape)} for k in _ARRAYS],
    }
    blob = json.dumps(header, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
        for name in _ARRAYS:
            fh.write(np.ascontiguousarray(arrays[name], dtype="<f8").tobytes())
    a = observable.matrix
    sidecar = path.with_suffix(path.suffix + ".json")
    write_json(sidecar, {
        "format": "MEMK1",
        "file": path.name,
        "sha256": hashlib.sha256(path.read_bytes()).hexdigest(),
        "config": config_to_dict(config),
        "norms": {
            "frobenius": float(np.linalg.norm(a)),
            "spectral_radius": float(np.max(np.abs(observable.eigenvalues))),
            "trace": float(np.trace(a)),
            "mean_square": float(np.sum(a * a) / a.shape[0]),
            "raw_scale": observable.scale,
        },
    })
    return sidecar


def load_ensemble(path):
    """Read a ``MEMK1`` container; returns ``(config, spectrum, observable)``."""
    raw = Path(path).read_bytes()
    if not raw.startswith(MAGIC):
        raise FormatError(f"{path}: not a MEMK1 file")
    offset = len(MAGIC)
    try:
        (size,) = struct.unpack_from("<Q", raw, offset)
        offset += 8
        header = json.loads(raw[offset:offset + size].decode())
    except (struct.error, ValueError) as exc:
        raise FormatError(f"{path}: corrupt header") from exc
    offset += size
    arrays = {}
    for spec in header["arrays"]:
        count = int(np.prod(spec["shape"]))
        end = offset + 8 * count
        if end > len(raw):
            raise FormatError(f"{path}: truncated array {spec['name']}")
        arrays[spec["name"]] = np.frombuffer(raw[offset:end], dtype="<f8").reshape(spec["shape"]).copy()
        offset = end
    config = config_from_dict(header["config"])
    spectrum = Spectrum(arrays["energies"], config.half_width)
    observable = EthObservable(arrays["matrix"], arrays["eigenvalues"], arrays["eigenbasis"], header["scale"])
    return config, spectrum, observable

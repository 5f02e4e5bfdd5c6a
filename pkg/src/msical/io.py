"""File formats: models, replicate signals, and result artifacts.

Structured results are JSON documents of the form
``{"manifest": {...}, "payload": {...}}``.  The payload holds only the
numeric results, so reruns with the same configuration produce
byte-identical payloads even though the manifest carries a timestamp.
Replicate signals are raw little-endian float64 records with a JSON
sidecar, or single-column CSV files.
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .errors import DataError
from .models import CompositeModel, InternalSensorModel, Replicate

__all__ = [
    "RunManifest",
    "file_digest",
    "load_model",
    "load_replicate",
    "load_sensor_model",
    "read_artifact",
    "save_model",
    "save_sensor_model",
    "write_artifact",
    "write_csv",
    "write_replicate",
]


def file_digest(path) -> str:
    try:
        return "sha256:" + hashlib.sha256(Path(path).read_bytes()).hexdigest()
    except OSError as exc:
        raise DataError(f"cannot digest input {path}: {exc}") from exc


@dataclass(frozen=True)
class RunManifest:
    """Provenance block embedded in every structured output."""

    command: str
    config: dict
    seed: int
    version: str
    input_digests: dict
    timestamp: str = ""

    @classmethod
    def create(cls, command: str, config: dict, seed: int, inputs: dict | None = None):
        from . import __version__

        digests = {name: file_digest(p) for name, p in (inputs or {}).items()}
        return cls(
            command=command,
            config=config,
            seed=seed,
            version=__version__,
            input_digests=digests,
            timestamp=datetime.now(timezone.utc).isoformat(timespec="seconds"),
        )

    def to_dict(self) -> dict:
        return {
            "command": self.command,
            "config": self.config,
            "seed": self.seed,
            "version": self.version,
            "input_digests": self.input_digests,
            "timestamp": self.timestamp,
        }


def write_artifact(path, payload: dict, manifest: RunManifest) -> None:
    doc = {"manifest": manifest.to_dict(), "payload": payload}
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def read_artifact(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read artifact {path}: {exc}") from exc


def _read_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError as exc:
        raise DataError(f"file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"{path} is not valid JSON: {exc}") from exc


def save_model(model: CompositeModel, path) -> None:
    Path(path).write_text(json.dumps(model.to_dict(), indent=2, sort_keys=True) + "\n")


def load_model(path) -> CompositeModel:
    return CompositeModel.from_dict(_read_json(path))


def save_sensor_model(g: InternalSensorModel, path) -> None:
    Path(path).write_text(json.dumps(g.to_dict(), indent=2, sort_keys=True) + "\n")


def load_sensor_model(path) -> InternalSensorModel:
    return InternalSensorModel.from_dict(_read_json(path))


def write_replicate(path, samples, rate_hz: float = 1.0, label: str = "") -> None:
    """Write samples as little-endian float64 plus a JSON sidecar.

    ``path`` should end in ``.f64le``; the sidecar lands at
    ``path + ".json"`` and records rate, length, and label.
    """
    path = Path(path)
    arr = np.ascontiguousarray(np.asarray(samples, dtype="<f8"))
    path.write_bytes(arr.tobytes())
    sidecar = {
        "format": "f64le",
        "length": int(arr.size),
        "rate_hz": float(rate_hz),
        "label": label,
    }
    Path(str(path) + ".json").write_text(json.dumps(sidecar, indent=2, sort_keys=True) + "\n")


def load_replicate(path) -> Replicate:
    """Read a replicate from ``.f64le`` (with sidecar) or single-column CSV.

    A CSV may carry an optional sidecar at ``<path>.json`` supplying the
    sample rate and label; otherwise the rate defaults to 1 Hz.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"file not found: {path}")
    sidecar_path = Path(str(path) + ".json")
    rate_hz, label = 1.0, path.stem
    if sidecar_path.exists():
        side = _read_json(sidecar_path)
        rate_hz = float(side.get("rate_hz", 1.0))
        label = side.get("label", label)
    if path.suffix == ".f64le":
        samples = np.frombuffer(path.read_bytes(), dtype="<f8").copy()
        if sidecar_path.exists():
            declared = side.get("length")
            if declared is not None and declared != samples.size:
                raise DataError(
                    f"{path}: sidecar declares {declared} samples, file has {samples.size}"
                )
    elif path.suffix == ".csv":
        try:
            samples = np.loadtxt(path, delimiter=",", comments="#", ndmin=1)
        except ValueError as exc:
            raise DataError(f"{path} is not a numeric single-column CSV: {exc}") from exc
        if samples.ndim != 1:
            raise DataError(f"{path}: expected a single column, got shape {samples.shape}")
    else:
        raise DataError(f"unsupported replicate format: {path.suffix!r} (use .f64le or .csv)")
    return Replicate(samples=np.asarray(samples, dtype=float), rate_hz=rate_hz, label=label)


def write_csv(path, header: list, rows) -> None:
    """Plot-ready CSV mirror with full-precision floats."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_format_cell(v) for v in row])


def _format_cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return int(v)
    return v

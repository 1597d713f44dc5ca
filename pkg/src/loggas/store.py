"""On-disk formats: configuration JSONL files and ensemble stores.

A configuration file holds one JSON object per line,
``{"carrier": [lo, hi], "points": [...]}``, with points sorted. Lines of the
form ``{"provenance": {...}}`` are headers and are skipped on reading. An ensemble
store is a directory with ``manifest.json`` and either ``samples.npy``
(macroscopic log-gas draws, one row per draw) or ``windows.jsonl``
(configurations, used for Poisson windows).
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import __version__
from .errors import UnsortedInput
from .pointconf import PointConfiguration, Window
from .sampler import ensemble_windows

STORE_ENV = "LOGGAS_STORE"
MANIFEST = "manifest.json"
DEFAULT_CENTRES = (-0.6, -0.3, 0.0, 0.3, 0.6)


def config_to_json(c: PointConfiguration) -> str:
    return json.dumps({"carrier": c.carrier.as_list(), "points": c.points.tolist()})


def config_from_obj(obj: dict) -> PointConfiguration:
    try:
        lo, hi = obj["carrier"]
        pts = np.asarray(obj["points"], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"malformed configuration record: {exc}") from exc
    if pts.ndim != 1:
        raise ValueError("points must be a flat list")
    if np.any(np.diff(pts) < 0):
        raise UnsortedInput("points must be sorted in increasing order")
    return PointConfiguration(pts, Window(float(lo), float(hi)))


def read_configs(path: str | os.PathLike) -> list[PointConfiguration]:
    out = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            if isinstance(obj, dict) and "provenance" in obj:
                continue
            try:
                out.append(config_from_obj(obj))
            except UnsortedInput as exc:
                raise UnsortedInput(f"{path}:{lineno}: {exc}") from exc
    return out


def write_configs(path: str | os.PathLike, configs: Iterable[PointConfiguration]) -> None:
    with open(path, "w") as fh:
        for c in configs:
            fh.write(config_to_json(c) + "\n")


@dataclass
class Store:
    path: Path
    manifest: dict

    @property
    def kind(self) -> str:
        return self.manifest["kind"]

    def samples(self) -> np.ndarray:
        return np.load(self.path / "samples.npy")

    def configs(self) -> list[PointConfiguration]:
        return read_configs(self.path / "windows.jsonl")

    def windows(self, R: float, centres: Sequence[float] = DEFAULT_CENTRES) -> list[PointConfiguration]:
        """Microscopic windows of half-length ``R``; Poisson stores are restricted directly."""
        if self.kind == "poisson":
            from .pointconf import restrict

            return [restrict(c, Window.centered(R)) for c in self.configs()]
        return ensemble_windows(self.samples(), R, centres)


def resolve_store_path(path: str | None) -> Path:
    p = path or os.environ.get(STORE_ENV)
    if not p:
        raise FileNotFoundError(f"no store given and {STORE_ENV} is unset")
    return Path(p)


def open_store(path: str | os.PathLike | None) -> Store:
    root = resolve_store_path(str(path) if path is not None else None)
    with open(root / MANIFEST) as fh:
        manifest = json.load(fh)
    return Store(root, manifest)


def write_store(path: str | os.PathLike, manifest: dict, samples: np.ndarray | None = None,
                configs: Sequence[PointConfiguration] | None = None) -> Store:
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    manifest = dict(manifest)
    manifest.setdefault("code_version", __version__)
    if samples is not None:
        np.save(root / "samples.npy", np.ascontiguousarray(samples, dtype=np.float64))
        manifest["files"] = ["samples.npy"]
    if configs is not None:
        write_configs(root / "windows.jsonl", configs)
        manifest["files"] = ["windows.jsonl"]
    with open(root / MANIFEST, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return Store(root, manifest)

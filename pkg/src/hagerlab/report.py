"""Stable CSV/JSON serialization of experiment outputs.

Every float is written as ``%.16e`` (17 significant digits, lossless for
doubles), rows end in ``\\n``, and the manifest lists a SHA-256 per file so
two runs can be compared byte for byte.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import __version__


def fmt(value) -> str:
    if isinstance(value, (str, bool)):
        return str(value)
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), ".16e")


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> str:
    """Write one CSV table and return its SHA-256."""
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])
    return sha256_file(path)


def sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with Path(path).open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def read_csv(path: Path) -> tuple[list[str], list[list[str]]]:
    with Path(path).open(encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


PROFILE_HEADER = [
    "im_z", "emp_density", "stderr", "psi1", "log_psi2", "log_theta",
    "theory_density", "cum_emp", "cum_theory", "cum_weyl",
]
PSEUDOSPEC_HEADER = ["re", "im", "log_sigma_min", "log_t0_pred", "flag"]
CURVES_HEADER = ["re", "gamma_minus", "gamma_plus", "Gamma_minus", "Gamma_plus", "y_minus", "y_plus"]
THEORY_HEADER = ["im_z", "s", "ds", "w", "psi1", "log_psi2", "log_theta", "density"]


def eigenvalue_rows(spectra: Sequence[np.ndarray]):
    for t, ev in enumerate(spectra):
        for lam in ev:
            yield (t, lam.real, lam.imag)


@dataclass
class RunManifest:
    config: dict
    seed: int
    version: str = __version__
    wall_time: float = 0.0
    checks: list[dict] = field(default_factory=list)
    files: dict[str, str] = field(default_factory=dict)
    notes: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "version": self.version,
            "seed": self.seed,
            "config": self.config,
            "wall_time_seconds": self.wall_time,
            "checks": self.checks,
            "files": dict(sorted(self.files.items())),
            "notes": self.notes,
        }


def _json_safe(obj):
    if isinstance(obj, dict):
        return {str(k): _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else repr(x)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def write_outputs(
    out_dir: str | Path,
    manifest: RunManifest,
    *,
    spectra: Sequence[np.ndarray] | None = None,
    profile: Iterable[Sequence] | None = None,
    pseudospec: Iterable[Sequence] | None = None,
    curves: Iterable[Sequence] | None = None,
    theory: Iterable[Sequence] | None = None,
) -> RunManifest:
    """Write whichever tables are given plus ``manifest.json`` into ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    tables = [
        ("eigenvalues.csv", ["trial", "re", "im"], None if spectra is None else eigenvalue_rows(spectra)),
        ("profile.csv", PROFILE_HEADER, profile),
        ("pseudospec.csv", PSEUDOSPEC_HEADER, pseudospec),
        ("curves.csv", CURVES_HEADER, curves),
        ("theory.csv", THEORY_HEADER, theory),
    ]
    for name, header, rows in tables:
        if rows is not None:
            manifest.files[name] = write_csv(out / name, header, rows)
    text = json.dumps(_json_safe(manifest.to_dict()), indent=2, sort_keys=False) + "\n"
    (out / "manifest.json").write_text(text, encoding="utf-8")
    return manifest

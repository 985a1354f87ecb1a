"""Deterministic artifact writing: JSON results, CSV curves, run metadata.

Given identical config, seed and inputs the JSON/CSV bytes are identical
across runs: keys are sorted, floats use repr (shortest round-trip),
newlines are LF and files are written atomically (temp + rename).
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from dataclasses import dataclass, field

VERSION = "0.1.0"


def atomic_write(path: str, data: str | bytes) -> None:
    mode = "wb" if isinstance(data, bytes) else "w"
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    try:
        with os.fdopen(fd, mode, **({} if isinstance(data, bytes) else {"newline": "\n"})) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def config_hash(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()[:12]


def to_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n"


def write_json(path: str, obj) -> None:
    atomic_write(path, to_json(obj))


def write_csv(path: str, header: list[str], rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_cell(v) for v in row))
    atomic_write(path, "\n".join(lines) + "\n")


def _cell(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


@dataclass
class Report:
    """Run record: reproducibility metadata plus result tables and files."""

    command: str
    seed: int
    cfg_hash: str
    tables: dict = field(default_factory=dict)
    artifacts: list = field(default_factory=list)
    notes: list = field(default_factory=list)

    def payload(self) -> dict:
        return {
            "command": self.command,
            "version": VERSION,
            "seed": self.seed,
            "config_hash": self.cfg_hash,
            "tables": self.tables,
            "artifacts": sorted(os.path.basename(a) for a in self.artifacts),
            "notes": self.notes,
        }


def fitted_table_row(fitted) -> dict:
    """One Table-style row for a fitted model."""
    return {
        "model": fitted.spec.name,
        "sigma_db": fitted.rmse_db,
        "params": {k: float(v) for k, v in sorted(fitted.params.items())},
        "converged": fitted.converged,
        "iterations": fitted.iterations,
        "n_samples": fitted.n_samples,
    }


def normal_fit_entry(fit) -> dict:
    return {
        "distribution": "normal",
        "mu": fit.mu,
        "sigma": fit.sigma,
        "fit_err_pct": fit.fit_err_pct,
        "n": fit.n,
    }

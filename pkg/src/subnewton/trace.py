"""Run traces and their on-disk formats (CSV rows, JSON summaries).

Every solver in the package emits the same row schema so downstream
tooling can diff and plot runs without per-solver cases.  Floats are
written with repr-level precision (%.17g) so a rerun with the same seed
produces byte-identical files, except wall_ms, which is genuinely
nondeterministic and rounded to microseconds.
"""

from __future__ import annotations

import csv
import json
import math
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

__all__ = [
    "TRACE_COLUMNS",
    "TraceRecord",
    "write_trace_csv",
    "read_trace_csv",
    "write_summary_json",
]

TRACE_COLUMNS = [
    "t",
    "phase",
    "lambda_tilde",
    "F",
    "eta",
    "inner_epochs",
    "certified",
    "comp_grad_evals",
    "full_grad_evals",
    "wall_ms",
]


@dataclass
class TraceRecord:
    """One iteration (or epoch) of any solver.

    Baselines have no phase or decrement; they use phase ``"-"`` and a NaN
    ``lambda_tilde``.  ``comp_grad_evals``/``full_grad_evals`` are cumulative
    from the start of the run.
    """

    t: int
    phase: str
    lambda_tilde: float
    F: float
    eta: float
    inner_epochs: int
    certified: bool
    comp_grad_evals: int
    full_grad_evals: int
    wall_ms: float

    def row(self) -> list[str]:
        return [
            str(self.t),
            self.phase,
            _g(self.lambda_tilde),
            _g(self.F),
            _g(self.eta),
            str(self.inner_epochs),
            "1" if self.certified else "0",
            str(self.comp_grad_evals),
            str(self.full_grad_evals),
            f"{self.wall_ms:.3f}",
        ]


def _g(x: float) -> str:
    return format(float(x), ".17g")


def write_trace_csv(records: Iterable[TraceRecord], path: str | Path) -> None:
    """Write records atomically (temp file + rename) with a header row."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or Path("."), suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(TRACE_COLUMNS)
            for rec in records:
                writer.writerow(rec.row())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_trace_csv(path: str | Path) -> list[TraceRecord]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != TRACE_COLUMNS:
            raise ValueError(f"unexpected trace header {header}")
        out = []
        for row in reader:
            out.append(
                TraceRecord(
                    t=int(row[0]),
                    phase=row[1],
                    lambda_tilde=float(row[2]),
                    F=float(row[3]),
                    eta=float(row[4]),
                    inner_epochs=int(row[5]),
                    certified=row[6] == "1",
                    comp_grad_evals=int(row[7]),
                    full_grad_evals=int(row[8]),
                    wall_ms=float(row[9]),
                )
            )
        return out


def write_summary_json(summary: dict, path: str | Path) -> None:
    """Stable JSON: sorted keys, two-space indent, trailing newline."""
    path = Path(path)
    text = json.dumps(_de_nan(summary), sort_keys=True, indent=2) + "\n"
    fd, tmp = tempfile.mkstemp(dir=path.parent or Path("."), suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _de_nan(obj):
    """JSON has no NaN/inf; encode them as strings rather than emit bad JSON."""
    if isinstance(obj, dict):
        return {k: _de_nan(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_de_nan(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    return obj

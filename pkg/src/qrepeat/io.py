"""Writers for run outputs.

* ``reduced.csv``: one row per step, the step index followed by the real and
  imaginary parts of the row-major density-matrix entries, interleaved.
* ``trajectories.jsonl``: one JSON object per trajectory.
* ``summary.json``: metadata, per-step records and summary statistics.

Floats are written with 17 significant digits in CSV and with Python's
shortest round-trip representation in JSON; both parse back bit-exactly.
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

REDUCED_CSV = "reduced.csv"
TRAJECTORIES_JSONL = "trajectories.jsonl"
SUMMARY_JSON = "summary.json"


@dataclass
class RunOutput:
    subcommand: str
    metadata: dict
    summary: dict
    reduced: Optional[list] = field(default=None, repr=False)
    trajectories: Optional[list] = field(default=None, repr=False)
    ok: bool = True


def reduced_header(d: int) -> list[str]:
    cols = ["step"]
    for r in range(d):
        for c in range(d):
            cols += [f"re_{r}{c}", f"im_{r}{c}"]
    return cols


def reduced_row(step: int, rho: np.ndarray) -> list[str]:
    flat = np.asarray(rho, dtype=complex).ravel()
    row = [str(step)]
    for z in flat:
        row += [f"{z.real:.17g}", f"{z.imag:.17g}"]
    return row


def write_reduced_csv(path, states) -> None:
    mats = [np.asarray(getattr(s, "rho", s)) for s in states]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(reduced_header(mats[0].shape[0]))
        for k, m in enumerate(mats):
            w.writerow(reduced_row(k, m))


def read_reduced_csv(path) -> np.ndarray:
    """Inverse of :func:`write_reduced_csv`: an array of shape (steps + 1, d, d)."""
    raw = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    vals = raw[:, 1::2] + 1j * raw[:, 2::2]
    d = int(round(np.sqrt(vals.shape[1])))
    return vals.reshape(-1, d, d)


def trajectory_line(index: int, record) -> str:
    return json.dumps(
        {
            "index": index,
            "seed": int(record.seed),
            "outcomes": [int(i) for i in record.outcomes],
            "probabilities": [float(p) for p in record.branch_probs],
            "purity_deficits": [float(p) for p in record.purity_deficits],
        }
    )


def write_trajectories(path, records) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for j, rec in enumerate(records):
            fh.write(trajectory_line(j, rec) + "\n")


def to_jsonable(x):
    """Recursively convert numpy and complex values; complex becomes ``[re, im]``."""
    if isinstance(x, dict):
        return {str(k): to_jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [to_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return to_jsonable(x.tolist())
    if isinstance(x, (complex, np.complexfloating)):
        return [float(x.real), float(x.imag)]
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.floating):
        return float(x)
    if isinstance(x, float) and not np.isfinite(x):
        return str(x)
    return x


def serialize_output(output: RunOutput, out_dir) -> list[Path]:
    """Write every file of ``output`` into ``out_dir``; returns the paths written."""
    out = Path(out_dir)
    os.makedirs(out, exist_ok=True)
    written = []
    if output.reduced is not None:
        p = out / REDUCED_CSV
        write_reduced_csv(p, output.reduced)
        written.append(p)
    if output.trajectories is not None:
        p = out / TRAJECTORIES_JSONL
        write_trajectories(p, output.trajectories)
        written.append(p)
    p = out / SUMMARY_JSON
    doc = {
        "subcommand": output.subcommand,
        "ok": output.ok,
        "metadata": output.metadata,
        "summary": output.summary,
    }
    with open(p, "w", encoding="utf-8") as fh:
        json.dump(to_jsonable(doc), fh, indent=2)
        fh.write("\n")
    written.append(p)
    return written

"""Run records and their on-disk formats.

A run directory holds three files:

``trace.csv``
    one row per stage boundary, header ``stage,samples_seen,delta_k,gamma_k,dist_to_opt,risk``
``checkpoints.csv``
    header ``samples,risk``
``summary.json``
    everything else (parameters, per-stage statistics, diagnostics, wall time)

Floats are written with 17 significant digits so that reading a run back
reproduces every number exactly.
"""

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

TRACE_HEADER = ("stage", "samples_seen", "delta_k", "gamma_k", "dist_to_opt", "risk")
CHECKPOINT_HEADER = ("samples", "risk")

TRACE_FILE = "trace.csv"
CHECKPOINT_FILE = "checkpoints.csv"
SUMMARY_FILE = "summary.json"


@dataclass
class StageRecord:
    stage: int
    samples_seen: int
    delta_k: float
    gamma_k: float
    dist_to_opt: float
    risk: float


@dataclass
class CheckpointRecord:
    samples: int
    risk: float


@dataclass
class RunResult:
    """Outcome of one optimizer run on one sample stream.

    ``stages`` has one record per stage center (``k = 1 .. m+1`` for the
    target-risk method, one per epoch for the baselines). ``centers`` keeps
    the matching center vectors so that stages can be replayed.
    """

    method: str
    seed: int
    stream: int
    params: dict
    stages: list = field(default_factory=list)
    checkpoints: list = field(default_factory=list)
    w_final: np.ndarray = None
    samples_used: int = 0
    centers: list = field(default_factory=list)
    stage_stats: list = field(default_factory=list)
    diagnostics: list = field(default_factory=list)
    instance: dict = field(default_factory=dict)
    eps_opt: float = 0.0
    wall_time: float = 0.0

    @property
    def final_risk(self):
        if self.stages:
            return self.stages[-1].risk
        return self.checkpoints[-1].risk

    def samples_to_target(self, eps_target):
        """Smallest logged sample count with excess risk at most ``eps_target``, else None."""
        for cp in self.checkpoints:
            if cp.risk - self.eps_opt <= eps_target:
                return cp.samples
        return None

    def check_finite(self):
        for rec in self.stages:
            for name in ("delta_k", "gamma_k", "dist_to_opt", "risk"):
                if not math.isfinite(getattr(rec, name)):
                    raise ValueError(f"non-finite {name} at stage {rec.stage}")
        for cp in self.checkpoints:
            if not math.isfinite(cp.risk):
                raise ValueError(f"non-finite risk at checkpoint {cp.samples}")


def fmt(x):
    """Lossless decimal text for a float (17 significant digits)."""
    return format(float(x), ".17g")


def _summary_dict(result):
    return {
        "method": result.method,
        "seed": result.seed,
        "stream": result.stream,
        "params": result.params,
        "instance": result.instance,
        "eps_opt": result.eps_opt,
        "samples_used": result.samples_used,
        "final_risk": result.final_risk if (result.stages or result.checkpoints) else None,
        "w_final": None if result.w_final is None else [float(v) for v in result.w_final],
        "centers": [[float(v) for v in c] for c in result.centers],
        "stage_stats": result.stage_stats,
        "diagnostics": result.diagnostics,
        "wall_time": result.wall_time,
    }


def write_run(result, out_dir):
    """Write the three run files into ``out_dir`` (created if missing)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / TRACE_FILE, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_HEADER)
        for r in result.stages:
            w.writerow([r.stage, r.samples_seen, fmt(r.delta_k), fmt(r.gamma_k), fmt(r.dist_to_opt), fmt(r.risk)])
    with open(out / CHECKPOINT_FILE, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CHECKPOINT_HEADER)
        for c in result.checkpoints:
            w.writerow([c.samples, fmt(c.risk)])
    with open(out / SUMMARY_FILE, "w") as fh:
        json.dump(_summary_dict(result), fh, indent=2, allow_nan=False)
        fh.write("\n")
    return out


def _read_csv(path, header):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(rows[0]) != header:
        raise ValueError(f"{path}: expected header {','.join(header)}")
    return rows[1:]


def read_run(out_dir):
    """Parse a run directory written by :func:`write_run`."""
    out = Path(out_dir)
    stages = [
        StageRecord(int(r[0]), int(r[1]), float(r[2]), float(r[3]), float(r[4]), float(r[5]))
        for r in _read_csv(out / TRACE_FILE, TRACE_HEADER)
    ]
    checkpoints = [CheckpointRecord(int(r[0]), float(r[1])) for r in _read_csv(out / CHECKPOINT_FILE, CHECKPOINT_HEADER)]
    with open(out / SUMMARY_FILE) as fh:
        s = json.load(fh)
    return RunResult(
        method=s["method"],
        seed=s["seed"],
        stream=s["stream"],
        params=s["params"],
        stages=stages,
        checkpoints=checkpoints,
        w_final=None if s["w_final"] is None else np.array(s["w_final"]),
        samples_used=s["samples_used"],
        centers=[np.array(c) for c in s["centers"]],
        stage_stats=s["stage_stats"],
        diagnostics=s["diagnostics"],
        instance=s["instance"],
        eps_opt=s["eps_opt"],
        wall_time=s["wall_time"],
    )


def records_as_dicts(records):
    return [asdict(r) for r in records]

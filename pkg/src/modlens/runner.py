"""Experiment planning, parallel execution, AOCC, and run-record I/O.

A plan is the full matrix configurations x functions x dimensions x
instances x repetitions.  Every job derives its seed from a 64-bit mix
of its identity tuple, so results are independent of scheduling order
and of the degree of parallelism; record files are sorted canonically.

Run-record CSV header::

    config_id,family,<param columns...>,fid,dim,iid,seed,aocc,final_gap,restarts,status,wall_ms
"""

from __future__ import annotations

import csv
import hashlib
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from . import configspace as cs
from .families import run_family
from .suite import get_problem

DEFAULT_BOUNDS = {5: (1e-8, 1e2), 30: (1e-8, 1e8)}
FALLBACK_BOUNDS = (1e-8, 1e2)
VIRTUAL_COLUMNS = ("iid", "seed")


def aocc(traj, lb: float, ub: float) -> float:
    """Normalized area over the convergence curve on log-scaled values.

    Each best-so-far value is clamped into [lb, ub] (non-positive values
    clamp to lb), log10-scaled, and averaged:  1 means every entry is at
    or below lb, 0 means every entry is at or above ub.
    """
    if lb <= 0.0:
        raise ValueError("lb must be positive")
    if ub <= lb:
        raise ValueError("ub must exceed lb")
    y = np.asarray(traj, dtype=float)
    if y.size == 0:
        raise ValueError("trajectory is empty")
    llb, lub = math.log10(lb), math.log10(ub)
    ly = np.log10(np.maximum(y, lb))
    ly = np.clip(ly, llb, lub)
    return float(np.mean(1.0 - (ly - llb) / (lub - llb)))


def bounds_for_dim(dim: int, overrides: dict | None = None) -> tuple[float, float]:
    if overrides and dim in overrides:
        return overrides[dim]
    return DEFAULT_BOUNDS.get(dim, FALLBACK_BOUNDS)


def _mix64(h: int, v: int) -> int:
    mask = (1 << 64) - 1
    h = (h + (v & mask)) & mask
    h ^= h >> 30
    h = (h * 0xBF58476D1CE4E5B9) & mask
    h ^= h >> 27
    h = (h * 0x94D049BB133111EB) & mask
    h ^= h >> 31
    return h


def job_seed(config_id: str, fid, dim: int, iid: int, rep: int) -> int:
    """Documented seed mix; the scheduler never influences results."""
    if isinstance(fid, str) and not fid.lstrip("-").isdigit():
        fid_part = int.from_bytes(hashlib.sha256(fid.encode()).digest()[:8], "big")
    else:
        fid_part = int(fid)
    h = 0x9E3779B97F4A7C15
    for part in (int(config_id, 16), fid_part, dim, iid, rep):
        h = _mix64(h, part)
    return h


@dataclass
class ExperimentPlan:
    space: cs.ConfigurationSpace
    configs: list[cs.Configuration]
    fids: list
    dims: list[int]
    iids: list[int] = field(default_factory=lambda: [1, 2, 3, 4, 5])
    reps: int = 5
    budget: int = 10_000
    bounds: dict = field(default_factory=dict)

    @property
    def family(self) -> str:
        return self.space.family

    def total_jobs(self) -> int:
        return len(self.configs) * len(self.fids) * len(self.dims) * len(self.iids) * self.reps

    def jobs(self):
        for config in self.configs:
            cid = config.config_id
            for fid in self.fids:
                for dim in self.dims:
                    for iid in self.iids:
                        for rep in range(self.reps):
                            yield (cid, dict(config.values), fid, dim, iid, rep)


@dataclass
class RunRecord:
    config_id: str
    family: str
    values: dict
    fid: object
    dim: int
    iid: int
    seed: int  # repetition index
    aocc: float
    final_gap: float
    restarts: int
    status: str
    wall_ms: float

    def sort_key(self):
        return (self.config_id, str(self.fid), self.dim, self.iid, self.seed)


def _execute_job(args) -> RunRecord:
    family, cid, values, fid, dim, iid, rep, budget, lb, ub = args
    t0 = time.perf_counter()
    try:
        problem = get_problem(fid, dim, iid)
        seed = job_seed(cid, fid, dim, iid, rep)
        result = run_family(family, values, problem, budget, seed)
        curve = result.best_curve
        if problem.fopt is not None:
            curve = curve - problem.fopt
        score = aocc(curve, lb, ub)
        return RunRecord(
            config_id=cid, family=family, values=values, fid=fid, dim=dim,
            iid=iid, seed=rep, aocc=score, final_gap=float(curve[-1]),
            restarts=result.restarts, status="ok",
            wall_ms=1000.0 * (time.perf_counter() - t0),
        )
    except Exception as exc:  # captured as a failed row, never aborts the batch
        return RunRecord(
            config_id=cid, family=family, values=values, fid=fid, dim=dim,
            iid=iid, seed=rep, aocc=float("nan"), final_gap=float("nan"),
            restarts=0, status=f"error: {type(exc).__name__}",
            wall_ms=1000.0 * (time.perf_counter() - t0),
        )


def execute(plan: ExperimentPlan, parallelism: int = 1, on_record=None) -> list[RunRecord]:
    """Run every job of the plan; canonical record order, any worker count."""
    args = [
        (plan.family, cid, values, fid, dim, iid, rep, plan.budget,
         *bounds_for_dim(dim, plan.bounds))
        for (cid, values, fid, dim, iid, rep) in plan.jobs()
    ]
    records: list[RunRecord] = []
    if parallelism <= 1:
        for a in args:
            rec = _execute_job(a)
            records.append(rec)
            if on_record:
                on_record(rec)
    else:
        with ProcessPoolExecutor(max_workers=parallelism) as pool:
            for rec in pool.map(_execute_job, args, chunksize=8):
                records.append(rec)
                if on_record:
                    on_record(rec)
    records.sort(key=RunRecord.sort_key)
    return records


def feature_frame(records: list[RunRecord], space: cs.ConfigurationSpace):
    """Encoded design matrix plus the iid/seed virtual-module columns.

    Returns (X, y, columns); failed rows are dropped with a warning count
    on stderr.
    """
    ok = [r for r in records if r.status == "ok"]
    if len(ok) < len(records):
        print(f"warning: dropped {len(records) - len(ok)} failed rows", file=sys.stderr)
    if not ok:
        raise ValueError("no usable records")
    families = {r.family for r in ok}
    if families != {space.family}:
        raise ValueError(f"records of families {families} do not match {space.family!r}")
    columns = space.names() + list(VIRTUAL_COLUMNS)
    x = np.empty((len(ok), len(columns)))
    y = np.empty(len(ok))
    for i, r in enumerate(ok):
        x[i, : -2] = cs.encode(cs.Configuration(r.family, r.values), space)
        x[i, -2] = float(r.iid)
        x[i, -1] = float(r.seed)
        y[i] = r.aocc
    return x, y, columns


# ---------------------------------------------------------------------------
# CSV and plan files


def csv_header(space: cs.ConfigurationSpace) -> list[str]:
    return (
        ["config_id", "family"] + space.names()
        + ["fid", "dim", "iid", "seed", "aocc", "final_gap", "restarts", "status", "wall_ms"]
    )


def _fmt_float(v: float) -> str:
    return "nan" if math.isnan(v) else repr(float(v))


def record_row(record: RunRecord, space: cs.ConfigurationSpace) -> list[str]:
    return (
        [record.config_id, record.family]
        + [str(record.values[name]) for name in space.names()]
        + [str(record.fid), str(record.dim), str(record.iid), str(record.seed),
           _fmt_float(record.aocc), _fmt_float(record.final_gap),
           str(record.restarts), record.status, f"{record.wall_ms:.3f}"]
    )


def write_records(path, records: list[RunRecord], space: cs.ConfigurationSpace) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(csv_header(space))
        for rec in records:
            writer.writerow(record_row(rec, space))


def _parse_param(space: cs.ConfigurationSpace, name: str, raw: str):
    p = space[name]
    if raw == cs.INACTIVE:
        return cs.INACTIVE
    if p.kind == "integer":
        return int(raw)
    if p.kind == "ordinal":
        for v in p.domain:
            if abs(float(v) - float(raw)) <= 1e-12:
                return v
        return float(raw)
    return raw


def read_records(path, space: cs.ConfigurationSpace) -> list[RunRecord]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        expected = csv_header(space)
        if header != expected:
            raise ValueError(f"unexpected run-record header in {path}")
        names = space.names()
        records = []
        for row in reader:
            values = {
                name: _parse_param(space, name, row[2 + j])
                for j, name in enumerate(names)
            }
            base = 2 + len(names)
            fid_raw = row[base]
            fid = int(fid_raw) if fid_raw.lstrip("-").isdigit() else fid_raw
            records.append(RunRecord(
                config_id=row[0], family=row[1], values=values, fid=fid,
                dim=int(row[base + 1]), iid=int(row[base + 2]), seed=int(row[base + 3]),
                aocc=float(row[base + 4]), final_gap=float(row[base + 5]),
                restarts=int(row[base + 6]), status=row[base + 7],
                wall_ms=float(row[base + 8]),
            ))
    return records


def load_plan(path) -> ExperimentPlan:
    """Read a plan file; the space path is resolved relative to the plan."""
    from pathlib import Path

    plan_path = Path(path)
    with open(plan_path, "rb") as fh:
        doc = tomllib.load(fh)
    space_ref = doc["space"]
    space_path = Path(space_ref)
    if not space_path.is_absolute():
        space_path = plan_path.parent / space_path
    if space_path.exists():
        space = cs.load_space(space_path)
    else:
        space = cs.load_builtin_space(str(space_ref))
    design = doc.get("design", {"kind": "grid"})
    if design.get("kind", "grid") == "grid":
        configs = cs.enumerate_grid(space)
    elif design["kind"] == "random":
        configs = cs.sample_random(space, int(design["n"]), int(design.get("seed", 0)))
    else:
        raise ValueError(f"unknown design kind {design.get('kind')!r}")
    bounds = {}
    for key, pair in doc.get("bounds", {}).items():
        bounds[int(key)] = (float(pair[0]), float(pair[1]))
    fids = [f if isinstance(f, str) else int(f) for f in doc["fids"]]
    return ExperimentPlan(
        space=space,
        configs=configs,
        fids=fids,
        dims=[int(d) for d in doc["dims"]],
        iids=[int(i) for i in doc.get("iids", [1, 2, 3, 4, 5])],
        reps=int(doc.get("reps", 5)),
        budget=int(doc.get("budget", 10_000)),
        bounds=bounds,
    )

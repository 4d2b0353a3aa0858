"""Seeded Monte-Carlo experiments and their tabular output.

Every point of a sweep reuses realization indices 0..n-1, so comparisons
across points (and across schemes) are paired. Realizations that end in
an infeasible status are excluded from means and counted separately.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from .bcd import solve_baseline
from .errors import ExperimentInfeasible
from .scenario import SystemConfig, synthesize_scenario

COLUMNS = (
    "experiment",
    "config_hash",
    "seed",
    "sweep_variable",
    "sweep_value",
    "mean",
    "stderr",
    "n_ok",
    "n_infeasible",
)

SweepValue = Union[int, float, str]


@dataclass(frozen=True)
class ResultRow:
    experiment: str
    config_hash: str
    seed: int
    sweep_variable: str
    sweep_value: SweepValue
    mean: float
    stderr: float
    n_ok: int
    n_infeasible: int

    def same_as(self, other: "ResultRow") -> bool:
        """Field-wise equality that treats two NaNs as equal."""
        for name in COLUMNS:
            a, b = getattr(self, name), getattr(other, name)
            if isinstance(a, float) and isinstance(b, float) and math.isnan(a) and math.isnan(b):
                continue
            if a != b:
                return False
        return True


@dataclass
class Experiment:
    """Aggregated rows plus the per-realization powers behind them (NaN = infeasible)."""

    rows: list[ResultRow] = field(default_factory=list)
    samples: dict[SweepValue, list[float]] = field(default_factory=dict)
    statuses: dict[SweepValue, list[str]] = field(default_factory=dict)
    outer_iterations: list[int] = field(default_factory=list)  # convergence runs only; -1 if infeasible


# -- running --------------------------------------------------------------

@dataclass(frozen=True)
class _Job:
    cfg: SystemConfig
    realization: int
    mode: str = "double"


def _run_job(job: _Job) -> tuple[str, list[float]]:
    ch = synthesize_scenario(job.cfg, job.realization)
    res = solve_baseline(ch, job.cfg, job.mode, job.realization)
    return res.trace.status, (res.trace.powers if res.trace.ok else [])


def _run_jobs(jobs: Sequence[_Job], workers: int) -> list[tuple[str, list[float]]]:
    if workers <= 1 or len(jobs) <= 1:
        return [_run_job(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        # map preserves submission order, which fixes the output order
        return list(pool.map(_run_job, jobs))


def _summary(values: Iterable[float]) -> tuple[float, float, int]:
    ok = np.array([v for v in values if math.isfinite(v)], dtype=float)
    if ok.size == 0:
        return math.nan, math.nan, 0
    stderr = float(np.std(ok, ddof=1) / math.sqrt(ok.size)) if ok.size > 1 else 0.0
    return float(np.mean(ok)), stderr, int(ok.size)


def _point(exp: Experiment, name: str, cfg: SystemConfig, variable: str, value: SweepValue,
           statuses: list[str], finals: list[float]) -> None:
    mean, stderr, n_ok = _summary(finals)
    exp.rows.append(ResultRow(name, cfg.digest(), cfg.seed, variable, value, mean, stderr,
                              n_ok, len(finals) - n_ok))
    exp.samples[value] = finals
    exp.statuses[value] = statuses


def _sweep(name: str, variable: str, points: Sequence[tuple[SweepValue, SystemConfig, str]],
           base: SystemConfig, n_realizations: int, workers: int) -> Experiment:
    if n_realizations < 1:
        raise ValueError("need at least one realization")
    jobs = [_Job(cfg, r, mode) for _, cfg, mode in points for r in range(n_realizations)]
    results = _run_jobs(jobs, workers)
    exp = Experiment()
    for j, (value, _, _) in enumerate(points):
        chunk = results[j * n_realizations:(j + 1) * n_realizations]
        finals = [p[-1] if p else math.nan for _, p in chunk]
        _point(exp, name, base, variable, value, [s for s, _ in chunk], finals)
    if points and all(r.n_ok == 0 for r in exp.rows):
        raise ExperimentInfeasible(f"{name}: every realization was infeasible ({exp.statuses})")
    return exp


def run_convergence(cfg: SystemConfig, n_realizations: int, workers: int = 1) -> Experiment:
    """Mean transmit power after each outer iteration (1, 2, ...).

    Traces that stop early are padded with their final power so that all
    rows average the same set of realizations. A run with no outer
    iteration contributes its starting power as iteration 0.
    """
    if n_realizations < 1:
        raise ValueError("need at least one realization")
    results = _run_jobs([_Job(cfg, r) for r in range(n_realizations)], workers)
    exp = Experiment(outer_iterations=[len(p) - 1 if p else -1 for _, p in results])
    results = [(s, p[1:] or p) for s, p in results]
    traces = [p for _, p in results if p]
    n_bad = n_realizations - len(traces)
    if not traces:
        raise ExperimentInfeasible(f"convergence: all {n_realizations} realizations infeasible")
    length = max(len(t) for t in traces)
    first = 0 if cfg.i_max == 0 else 1
    padded = np.array([t + [t[-1]] * (length - len(t)) for t in traces])
    for i in range(length):
        col = padded[:, i]
        stderr = float(np.std(col, ddof=1) / math.sqrt(col.size)) if col.size > 1 else 0.0
        exp.rows.append(ResultRow("convergence", cfg.digest(), cfg.seed, "iteration", i + first,
                                  float(np.mean(col)), stderr, int(col.size), n_bad))
    # per-realization powers by iteration (infeasible ones are NaN throughout)
    full = iter(padded.tolist())
    per_real = [next(full) if p else [math.nan] * length for _, p in results]
    for i in range(length):
        exp.samples[i + first] = [row[i] for row in per_real]
        exp.statuses[i + first] = [s for s, _ in results]
    return exp


def run_total_sweep(cfg: SystemConfig, totals: Sequence[int], n_realizations: int,
                    workers: int = 1) -> Experiment:
    """Converged power as both surfaces grow together (N1 = N2 = T/2)."""
    for t in totals:
        if t < 0 or t % 2:
            raise ValueError(f"totals must be even and nonnegative, got {t}")
    points = [(int(t), cfg.replace(N1=t // 2, N2=t // 2), "double") for t in totals]
    return _sweep("sweep_total", "n_total", points, cfg, n_realizations, workers)


def run_split_sweep(cfg: SystemConfig, n_total: int, splits: Sequence[int], n_realizations: int,
                    workers: int = 1) -> Experiment:
    """Converged power as a fixed element budget moves between the surfaces.

    N1 = 0 and N1 = n_total are the user-side-only and BS-side-only schemes.
    """
    points = []
    for n1 in splits:
        if not 0 <= n1 <= n_total:
            raise ValueError(f"split {n1} outside [0, {n_total}]")
        mode = "single_user" if n1 == 0 else "single_bs" if n1 == n_total else "double"
        points.append((int(n1), cfg.replace(N1=n1, N2=n_total - n1), mode))
    return _sweep("sweep_split", "n1", points, cfg, n_realizations, workers)


def run_baselines(cfg: SystemConfig, n_realizations: int, workers: int = 1,
                  modes: Sequence[str] = ("double", "single_bs", "single_user", "random_phase")) -> Experiment:
    """Every scheme on the same channel draws of ``cfg``."""
    points = [(mode, cfg, mode) for mode in modes]
    return _sweep("baselines", "mode", points, cfg, n_realizations, workers)


# -- output ---------------------------------------------------------------

def _format(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _parse_value(text: str) -> SweepValue:
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    return text


def _row_from_dict(d: dict) -> ResultRow:
    value = d["sweep_value"]
    return ResultRow(
        experiment=str(d["experiment"]),
        config_hash=str(d["config_hash"]),
        seed=int(d["seed"]),
        sweep_variable=str(d["sweep_variable"]),
        sweep_value=_parse_value(value) if isinstance(value, str) else value,
        mean=float(d["mean"]),
        stderr=float(d["stderr"]),
        n_ok=int(d["n_ok"]),
        n_infeasible=int(d["n_infeasible"]),
    )


def render_results(rows: Sequence[ResultRow], fmt: str = "csv") -> str:
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(COLUMNS)
        for r in rows:
            writer.writerow([_format(getattr(r, c)) for c in COLUMNS])
        return buf.getvalue()
    if fmt == "jsonl":
        # NaN is written as the JSON token NaN, which json.loads reads back
        return "".join(json.dumps({c: getattr(r, c) for c in COLUMNS}) + "\n" for r in rows)
    raise ValueError(f"unknown format {fmt!r}; use csv or jsonl")


def emit_results(rows: Sequence[ResultRow], path: Union[str, Path], fmt: str = "csv") -> Path:
    path = Path(path)
    path.write_text(render_results(rows, fmt))
    return path


def parse_results(text: str, fmt: str = "csv") -> list[ResultRow]:
    if fmt == "csv":
        reader = csv.DictReader(io.StringIO(text))
        if reader.fieldnames is not None and tuple(reader.fieldnames) != COLUMNS:
            raise ValueError(f"unexpected columns {reader.fieldnames}")
        return [_row_from_dict(d) for d in reader]
    if fmt == "jsonl":
        return [_row_from_dict(json.loads(line)) for line in text.splitlines() if line.strip()]
    raise ValueError(f"unknown format {fmt!r}; use csv or jsonl")


def read_results(path: Union[str, Path], fmt: Optional[str] = None) -> list[ResultRow]:
    path = Path(path)
    fmt = fmt or ("jsonl" if path.suffix == ".jsonl" else "csv")
    return parse_results(path.read_text(), fmt)

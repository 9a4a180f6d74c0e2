"""Latin hypercube sweeps and partial rank correlation analysis."""

from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.stats import rankdata

from .climate import ForcingKind
from .sim import DataBundle, ParamSet, SimConfig, run_simulation

log = logging.getLogger(__name__)

PARAM_NAMES = ("ideo", "n_edge", "n_traders", "risk_tak", "seg", "true_model")
CONTINUOUS = ("ideo", "n_edge", "n_traders", "risk_tak", "seg")
RANGES = {
    "ideo": (0.0, 1.0),
    "n_edge": (100.0, 200.0),
    "n_traders": (50.0, 250.0),
    "risk_tak": (0.0, 1.0),
    "seg": (0.0, 1.0),
}
MIN_SUCCESS_SHARE = 0.8


class PrccError(ValueError):
    def __init__(self, column: str, message: str | None = None):
        self.column = column
        super().__init__(message or f"PRCC undefined: column {column!r} is constant")


@dataclass(frozen=True)
class DesignMatrix:
    rows: tuple[ParamSet, ...]
    # Unit-cube coordinates behind the continuous columns, shape (n, 5).
    unit: np.ndarray | None = None

    @property
    def n_points(self) -> int:
        return len(self.rows)


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def lhs_unit(n: int, d: int, rng: np.random.Generator) -> np.ndarray:
    """``n`` points in ``[0, 1)^d``, exactly one per stratum ``[k/n, (k+1)/n)`` in every column."""
    if n < 2:
        raise ValueError("need at least 2 points")
    cols = [(rng.permutation(n) + rng.random(n)) / n for _ in range(d)]
    return np.column_stack(cols)


def lhs_sample(n: int, rng: np.random.Generator) -> DesignMatrix:
    unit = lhs_unit(n, len(CONTINUOUS), rng)
    coin = rng.random(n) < 0.5
    rows = []
    for i in range(n):
        v = {}
        for j, name in enumerate(CONTINUOUS):
            lo, hi = RANGES[name]
            v[name] = lo + (hi - lo) * unit[i, j]
        rows.append(
            ParamSet(
                ideo=float(v["ideo"]),
                n_edge=_round_half_up(v["n_edge"]),
                n_traders=_round_half_up(v["n_traders"]),
                risk_tak=float(v["risk_tak"]),
                seg=float(v["seg"]),
                true_model=ForcingKind.LOG_CO2 if coin[i] else ForcingKind.TSI,
            )
        )
    return DesignMatrix(rows=tuple(rows), unit=unit)


def encode(row: ParamSet) -> list[float]:
    """Numeric design row; the true model is 1 for CO2 and 0 for TSI."""
    return [
        row.ideo,
        float(row.n_edge),
        float(row.n_traders),
        row.risk_tak,
        row.seg,
        1.0 if row.true_model is ForcingKind.LOG_CO2 else 0.0,
    ]


def design_matrix(rows: Iterable[ParamSet]) -> np.ndarray:
    return np.array([encode(r) for r in rows], dtype=float)


@dataclass(frozen=True)
class RowOutcome:
    index: int
    params: ParamSet
    score: float
    successes: int
    replicates: int
    status: str

    @property
    def ok(self) -> bool:
        return self.status == "ok"


@dataclass(frozen=True)
class SweepResult:
    outcomes: tuple[RowOutcome, ...]

    @property
    def X(self) -> np.ndarray:
        return design_matrix(o.params for o in self.outcomes if o.ok)

    @property
    def y(self) -> np.ndarray:
        return np.array([o.score for o in self.outcomes if o.ok])


def replicate_seed(master_seed: int, row: int, replicate: int) -> tuple[int, int, int]:
    return (int(master_seed), int(row), int(replicate))


def run_row(
    index: int,
    params: ParamSet,
    replicates: int,
    base_config: SimConfig,
    data: DataBundle,
    master_seed: int,
) -> RowOutcome:
    """Average convergence score of one design row over independent replicates."""
    scores = []
    errors = []
    for r in range(replicates):
        config = replace(base_config, params=params, master_seed=replicate_seed(master_seed, index, r))
        try:
            scores.append(run_simulation(config, data).convergence_score)
        except Exception as exc:  # recorded per row, never silently dropped
            errors.append(f"replicate {r}: {type(exc).__name__}: {exc}")
    needed = math.ceil(MIN_SUCCESS_SHARE * replicates)
    if len(scores) >= needed:
        status = "ok"
        score = math.fsum(scores) / len(scores)
        if errors:
            log.warning("row %d: %d of %d replicates failed", index, len(errors), replicates)
    else:
        status = "excluded"
        score = float("nan")
        log.warning("row %d excluded: %d of %d replicates succeeded; %s",
                    index, len(scores), replicates, "; ".join(errors))
    return RowOutcome(index, params, score, len(scores), replicates, status)


def _run_row_task(args):
    return run_row(*args)


def run_sweep(
    design: DesignMatrix,
    replicates: int,
    base_config: SimConfig,
    data: DataBundle,
    *,
    workers: int = 1,
    master_seed: int = 0,
    start: int = 0,
    on_row: Callable[[RowOutcome], None] | None = None,
) -> SweepResult:
    """Run every design row from ``start`` on; outcomes come back in row order.

    Each replicate seeds itself from ``(master_seed, row, replicate)``, so the
    result does not depend on ``workers`` or on completion order.
    """
    if replicates < 1:
        raise ValueError("replicates must be at least 1")
    tasks = [
        (i, design.rows[i], replicates, base_config, data, master_seed)
        for i in range(start, design.n_points)
    ]
    outcomes = []
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for outcome in pool.map(_run_row_task, tasks):
                outcomes.append(outcome)
                if on_row:
                    on_row(outcome)
    else:
        for task in tasks:
            outcome = run_row(*task)
            outcomes.append(outcome)
            if on_row:
                on_row(outcome)
    return SweepResult(tuple(outcomes))


def _check_columns(X: np.ndarray, y: np.ndarray, names: Sequence[str]) -> None:
    for j, name in enumerate(names):
        if np.ptp(X[:, j]) == 0:
            raise PrccError(name)
    if np.ptp(y) == 0:
        raise PrccError("y", "PRCC undefined: output y is constant")


def prcc(X, y, names: Sequence[str] | None = None) -> np.ndarray:
    """Partial rank correlation of each column of ``X`` with ``y``.

    Everything is rank transformed (average ranks for ties); each input's
    ranks and the output's ranks are regressed on the ranks of all other
    inputs and the two residual vectors are correlated.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, p = X.shape
    names = list(names) if names is not None else [f"x{j}" for j in range(p)]
    if n < 10:
        raise ValueError("PRCC needs at least 10 rows")
    if len(y) != n:
        raise ValueError("X and y row counts differ")
    _check_columns(X, y, names)
    R = np.column_stack([rankdata(X[:, j]) for j in range(p)])
    ry = rankdata(y)
    out = np.empty(p)
    for j in range(p):
        Z = np.column_stack([np.ones(n), np.delete(R, j, axis=1)])
        coef_x, *_ = np.linalg.lstsq(Z, R[:, j], rcond=None)
        coef_y, *_ = np.linalg.lstsq(Z, ry, rcond=None)
        ex = R[:, j] - Z @ coef_x
        ey = ry - Z @ coef_y
        denom = math.sqrt(float(ex @ ex) * float(ey @ ey))
        if denom == 0.0:
            raise PrccError(names[j], f"PRCC undefined for {names[j]!r}: fully explained by other inputs")
        out[j] = float(ex @ ey) / denom
    return np.clip(out, -1.0, 1.0)


@dataclass(frozen=True)
class PrccEntry:
    param: str
    estimate: float
    ci_low: float
    ci_high: float


@dataclass(frozen=True)
class PrccReport:
    entries: tuple[PrccEntry, ...]
    n_boot: int

    def __getitem__(self, name: str) -> PrccEntry:
        for e in self.entries:
            if e.param == name:
                return e
        raise KeyError(name)


def bootstrap_ci(
    X,
    y,
    n_boot: int = 1000,
    rng: np.random.Generator | None = None,
    names: Sequence[str] = PARAM_NAMES,
    level: float = 0.95,
    max_redraws: int = 1000,
) -> PrccReport:
    """Point PRCC from the full sample with percentile bootstrap intervals."""
    if n_boot < 100:
        raise ValueError("n_boot must be at least 100")
    if rng is None:
        rng = np.random.default_rng()
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    names = list(names)
    point = prcc(X, y, names)
    n = len(y)
    boots = np.empty((n_boot, X.shape[1]))
    for b in range(n_boot):
        for _ in range(max_redraws):
            idx = rng.integers(0, n, n)
            try:
                boots[b] = prcc(X[idx], y[idx], names)
                break
            except PrccError:
                continue
        else:
            raise PrccError("resample", "could not draw a non-degenerate bootstrap resample")
    tail = 100.0 * (1.0 - level) / 2.0
    lo = np.percentile(boots, tail, axis=0)
    hi = np.percentile(boots, 100.0 - tail, axis=0)
    entries = tuple(
        # Percentile intervals can miss the point estimate on skewed samples.
        PrccEntry(name, float(est), float(min(l, est)), float(max(h, est)))
        for name, est, l, h in zip(names, point, lo, hi)
    )
    return PrccReport(entries, n_boot)


DESIGN_COLUMNS = ("row",) + PARAM_NAMES
SWEEP_COLUMNS = DESIGN_COLUMNS + ("score", "replicates", "successes", "status")
PRCC_COLUMNS = ("param", "estimate", "ci_low", "ci_high")


def _param_cells(p: ParamSet) -> list:
    return [repr(p.ideo), p.n_edge, p.n_traders, repr(p.risk_tak), repr(p.seg), p.true_model.value]


def _parse_params(r: dict) -> ParamSet:
    return ParamSet(
        ideo=float(r["ideo"]),
        n_edge=int(r["n_edge"]),
        n_traders=int(r["n_traders"]),
        risk_tak=float(r["risk_tak"]),
        seg=float(r["seg"]),
        true_model=ForcingKind.parse(r["true_model"]),
    )


def _reader(path, columns):
    fh = Path(path).open(newline="", encoding="utf-8")
    reader = csv.DictReader(fh)
    if tuple(reader.fieldnames or ()) != tuple(columns):
        fh.close()
        raise ValueError(f"{path}: expected header {','.join(columns)}")
    return fh, reader


def write_design_csv(design: DesignMatrix, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(DESIGN_COLUMNS)
        for i, p in enumerate(design.rows):
            w.writerow([i] + _param_cells(p))


def read_design_csv(path) -> DesignMatrix:
    fh, reader = _reader(path, DESIGN_COLUMNS)
    with fh:
        rows = []
        for line, r in enumerate(reader, start=2):
            if int(r["row"]) != len(rows):
                raise ValueError(f"{path}: line {line}: rows must be numbered 0, 1, 2, ...")
            rows.append(_parse_params(r))
    return DesignMatrix(rows=tuple(rows))


def sweep_row_cells(o: RowOutcome) -> list:
    return [o.index] + _param_cells(o.params) + [repr(o.score), o.replicates, o.successes, o.status]


def write_sweep_header(path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        csv.writer(fh, lineterminator="\n").writerow(SWEEP_COLUMNS)


def append_sweep_row(path, outcome: RowOutcome) -> None:
    with Path(path).open("a", newline="", encoding="utf-8") as fh:
        csv.writer(fh, lineterminator="\n").writerow(sweep_row_cells(outcome))


def write_sweep_csv(result: SweepResult, path) -> None:
    write_sweep_header(path)
    for o in result.outcomes:
        append_sweep_row(path, o)


def read_sweep_csv(path) -> SweepResult:
    fh, reader = _reader(path, SWEEP_COLUMNS)
    outcomes = []
    with fh:
        for line, r in enumerate(reader, start=2):
            try:
                outcomes.append(
                    RowOutcome(
                        index=int(r["row"]),
                        params=_parse_params(r),
                        score=float(r["score"]),
                        successes=int(r["successes"]),
                        replicates=int(r["replicates"]),
                        status=r["status"],
                    )
                )
            except (TypeError, ValueError) as exc:
                raise ValueError(f"{path}: line {line}: {exc}") from None
    return SweepResult(tuple(outcomes))


def write_prcc_csv(report: PrccReport, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(PRCC_COLUMNS)
        for e in report.entries:
            w.writerow([e.param, repr(e.estimate), repr(e.ci_low), repr(e.ci_high)])


def read_prcc_csv(path) -> PrccReport:
    fh, reader = _reader(path, PRCC_COLUMNS)
    with fh:
        entries = tuple(
            PrccEntry(r["param"], float(r["estimate"]), float(r["ci_low"]), float(r["ci_high"]))
            for r in reader
        )
    return PrccReport(entries, n_boot=0)

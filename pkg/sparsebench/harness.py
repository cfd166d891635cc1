"""
Phase transition experiments.

A `PhaseGrid` describes cells ``(ensemble, n, r, k)``. Every cell runs ``trials`` independent
recoveries (sample the ensemble, sample an ``r``-sparse signal, basis pursuit, verify) and the
results are collected in a `PhaseTable`. Trial ``t`` of a cell draws its matrix and signal from
streams derived from the cell key and ``t``, so tables do not depend on the number of workers.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from os import PathLike
from typing import Iterable, Literal

import numpy as np
from loguru import logger
from numpy.typing import NDArray
from scipy.optimize import isotonic_regression
from tqdm import tqdm

from sparsebench.decorators import timer
from sparsebench.ensembles import (
    AMPLITUDE_MODELS,
    EnsembleSpec,
    SparseSignalSpec,
    normalize_kind,
    realify_vector,
    sample_measurements,
    sample_sparse_signal,
)
from sparsebench.errors import (
    ExportError,
    InfeasibleProblemError,
    NumericalError,
    ParameterError,
    ValidationError,
)
from sparsebench.fs import config_load, ensure_parent, matrix_load, write_text
from sparsebench.geometry import sample_complexity_gaussian
from sparsebench.lp import DEFAULT_MAXITER, DEFAULT_TOL
from sparsebench.numerics import RngStream, compensated_mean, derive_stream_id
from sparsebench.recovery import (
    basis_pursuit,
    check_measurement_count,
    recovery_error,
    verify_recovery,
)

PHASE_CSV_HEADER = (
    "ensemble,n,r,k,trials,successes,failures,solver_failures,success_rate,mean_l2_error,seed"
)
KSTAR_CSV_HEADER = "ensemble,n,r,threshold,k_star,bound,ratio"
DEFAULT_THRESHOLD = 0.9
SOLVER_FAILURE_BUDGET = 0.1

ExportFormat = Literal["csv", "svg"]


@dataclass
class PhaseGrid:
    """
    Experiment grid.

    ``k`` runs over ``k_min, k_min + k_step, ...`` up to ``min(k_max, n)`` for every ``n``.

    Args:
        ensemble (str): ``gaussian``, ``partial-fourier`` (``fourier``) or ``bounded-orthogonal``
            (``ortho``).
        n_values (tuple[int, ...]): Ambient dimensions.
        r_values (tuple[int, ...]): Sparsity levels.
        k_min (int): First measurement count.
        k_max (int): Last measurement count.
        k_step (int): Step between measurement counts.
        trials (int): Trials per cell.
        seed (int): Experiment seed.
        amplitude (str): ``rademacher`` or ``gaussian`` signal amplitudes.
        source (NDArray, optional): Orthogonal matrix for ``bounded-orthogonal``.
    """

    ensemble: str
    n_values: tuple[int, ...]
    r_values: tuple[int, ...]
    k_min: int
    k_max: int
    k_step: int = 1
    trials: int = 50
    seed: int = 0
    amplitude: str = "rademacher"
    source: NDArray | None = field(default=None, repr=False)

    def __post_init__(self):
        self.ensemble = normalize_kind(self.ensemble)
        self.n_values = tuple(int(n) for n in _as_list(self.n_values))
        self.r_values = tuple(int(r) for r in _as_list(self.r_values))
        if not self.n_values or not self.r_values:
            raise ParameterError(
                "grid", (self.n_values, self.r_values), "needs at least one n and r"
            )
        if self.trials < 1:
            raise ParameterError("trials", self.trials, "must be >= 1")
        if self.k_min < 1 or self.k_step < 1 or self.k_max < self.k_min:
            raise ParameterError(
                "k-range",
                (self.k_min, self.k_max, self.k_step),
                "needs 1 <= k_min <= k_max and step >= 1",
            )
        if self.amplitude not in AMPLITUDE_MODELS:
            raise ParameterError("amplitude", self.amplitude, f"must be one of {AMPLITUDE_MODELS}")
        if self.ensemble == "bounded-orthogonal":
            if self.source is None:
                raise ParameterError("source", None, "bounded-orthogonal needs a matrix U")
            self.source = np.asarray(self.source)
            if any(n != self.source.shape[0] for n in self.n_values):
                size = self.source.shape[0]
                raise ParameterError("n", self.n_values, f"must equal the size of U ({size})")
        for n in self.n_values:
            if self.k_min > n:
                logger.bind(n=n, k_min=self.k_min).warning("No measurement count fits this n")

    def k_values(self, n: int) -> list[int]:
        return list(range(self.k_min, min(self.k_max, n) + 1, self.k_step))

    def cells(self) -> list[tuple[str, int, int, int]]:
        """Cell keys ``(ensemble, n, r, k)`` in canonical order."""
        return sorted(
            (self.ensemble, n, r, k)
            for n in self.n_values
            for r in self.r_values
            if r <= n
            for k in self.k_values(n)
        )

    @classmethod
    def from_file(cls, path: str | PathLike, **overrides) -> "PhaseGrid":
        """
        Load a grid from YAML or TOML. Keys match the constructor (``n`` and ``r`` may be used for
        ``n_values`` / ``r_values``, dashes for underscores); ``matrix_file`` loads ``source``.
        Keyword arguments that are not ``None`` override file values.
        """
        data = config_load(path)
        data = data.get("phase", data)
        values = {}
        for key, value in data.items():
            key = key.replace("-", "_")
            key = {"n": "n_values", "r": "r_values"}.get(key, key)
            values[key] = value
        if matrix_file := values.pop("matrix_file", None):
            values["source"] = matrix_load(matrix_file)
        values.update({k: v for k, v in overrides.items() if v is not None})
        try:
            return cls(**values)
        except TypeError as e:
            raise ValidationError(f"Invalid phase grid in '{path}': {e}") from e


def _as_list(value) -> list:
    if isinstance(value, (int, np.integer)):
        return [value]
    return list(value)


@dataclass(frozen=True)
class PhaseRow:
    ensemble: str
    n: int
    r: int
    k: int
    trials: int
    successes: int
    failures: int
    solver_failures: int
    success_rate: float
    mean_l2_error: float
    seed: int

    def __post_init__(self):
        if self.successes + self.failures + self.solver_failures != self.trials:
            raise ValidationError(
                f"Counts {self.successes}+{self.failures}+{self.solver_failures} "
                f"do not add up to {self.trials} trials"
            )

    @property
    def key(self) -> tuple[str, int, int, int]:
        return (self.ensemble, self.n, self.r, self.k)

    @property
    def solver_failure_rate(self) -> float:
        return self.solver_failures / self.trials

    def to_csv(self) -> str:
        return ",".join(
            [
                self.ensemble,
                str(self.n),
                str(self.r),
                str(self.k),
                str(self.trials),
                str(self.successes),
                str(self.failures),
                str(self.solver_failures),
                repr(float(self.success_rate)),
                repr(float(self.mean_l2_error)),
                str(self.seed),
            ]
        )

    @classmethod
    def from_csv(cls, line: str) -> "PhaseRow":
        parts = line.split(",")
        if len(parts) != 11:
            raise ValidationError(f"Expected 11 fields, got {len(parts)}: {line!r}")
        ensemble, n, r, k, trials, successes, failures, solver_failures, rate, error, seed = parts
        return cls(
            ensemble,
            int(n),
            int(r),
            int(k),
            int(trials),
            int(successes),
            int(failures),
            int(solver_failures),
            float(rate),
            float(error),
            int(seed),
        )


@dataclass
class PhaseTable:
    rows: list[PhaseRow] = field(default_factory=list)

    def __post_init__(self):
        self.rows = sorted(self.rows, key=lambda row: row.key)

    def __len__(self) -> int:
        return len(self.rows)

    def __iter__(self):
        return iter(self.rows)

    def groups(self) -> dict[tuple[str, int, int], list[PhaseRow]]:
        """Rows keyed by ``(ensemble, n, r)``, each list sorted by ``k``."""
        out: dict[tuple[str, int, int], list[PhaseRow]] = {}
        for row in self.rows:
            out.setdefault((row.ensemble, row.n, row.r), []).append(row)
        return out

    def solver_failure_exceeded(self, budget: float = SOLVER_FAILURE_BUDGET) -> bool:
        return any(row.solver_failure_rate > budget for row in self.rows)

    def to_csv(self) -> str:
        return "\n".join([PHASE_CSV_HEADER, *(row.to_csv() for row in self.rows)]) + "\n"

    @classmethod
    def from_csv(cls, text: str) -> "PhaseTable":
        lines = [line for line in text.splitlines() if line.strip()]
        if not lines or lines[0].strip() != PHASE_CSV_HEADER:
            raise ValidationError(f"Phase table must start with the header '{PHASE_CSV_HEADER}'")
        return cls([PhaseRow.from_csv(line.strip()) for line in lines[1:]])

    @classmethod
    def read(cls, path: str | PathLike) -> "PhaseTable":
        with open(os.fspath(path), "r", encoding="utf-8") as f:
            return cls.from_csv(f.read())


@dataclass(frozen=True)
class KStarRow:
    ensemble: str
    n: int
    r: int
    threshold: float
    k_star: int | None
    bound: float

    @property
    def ratio(self) -> float | None:
        if self.k_star is None or self.bound <= 0:
            return None
        return self.k_star / self.bound

    def to_csv(self) -> str:
        ratio = self.ratio
        return ",".join(
            [
                self.ensemble,
                str(self.n),
                str(self.r),
                repr(float(self.threshold)),
                "" if self.k_star is None else str(self.k_star),
                repr(float(self.bound)),
                "" if ratio is None else repr(ratio),
            ]
        )


@dataclass
class KStarReport:
    rows: list[KStarRow] = field(default_factory=list)

    def __iter__(self):
        return iter(self.rows)

    def get(self, ensemble: str, n: int, r: int) -> KStarRow:
        ensemble = normalize_kind(ensemble)
        for row in self.rows:
            if (row.ensemble, row.n, row.r) == (ensemble, n, r):
                return row
        raise KeyError((ensemble, n, r))

    def to_csv(self) -> str:
        return "\n".join([KSTAR_CSV_HEADER, *(row.to_csv() for row in self.rows)]) + "\n"

    @classmethod
    def from_csv(cls, text: str) -> "KStarReport":
        lines = [line.strip() for line in text.splitlines() if line.strip()]
        if not lines or lines[0] != KSTAR_CSV_HEADER:
            raise ValidationError(f"k* report must start with the header '{KSTAR_CSV_HEADER}'")
        rows = []
        for line in lines[1:]:
            ensemble, n, r, threshold, k_star, bound, _ = line.split(",")
            rows.append(
                KStarRow(
                    ensemble,
                    int(n),
                    int(r),
                    float(threshold),
                    int(k_star) if k_star else None,
                    float(bound),
                )
            )
        return cls(rows)


def reference_bound(ensemble: str, n: int, r: int) -> float:
    """
    Measurement count the empirical ``k*`` is compared with: the Gaussian sample complexity for
    Gaussian rows and the unit ``r ln n`` for row-subsampled orthogonal ensembles.
    """
    if normalize_kind(ensemble) == "gaussian":
        return sample_complexity_gaussian(r, n)
    return r * math.log(n)


def plateau_start(rates: list[float], threshold: float) -> int | None:
    """
    Smallest index from which every rate is ``>= threshold``.

    Example:
        >>> plateau_start([0.95, 0.85, 0.95], 0.9)
        2
    """
    start = None
    for i in range(len(rates) - 1, -1, -1):
        if rates[i] < threshold:
            break
        start = i
    return start


def empirical_k_star(table: PhaseTable, threshold: float = DEFAULT_THRESHOLD) -> KStarReport:
    """
    Per ``(ensemble, n, r)``: the smallest grid ``k`` whose success rate and that of every larger
    grid ``k`` reach ``threshold``. Cells without such a plateau have ``k_star = None``.
    """
    if not 0 < threshold < 1:
        raise ParameterError("threshold", threshold, "must be in (0, 1)")
    rows = []
    for (ensemble, n, r), group in table.groups().items():
        start = plateau_start([row.success_rate for row in group], threshold)
        k_star = None if start is None else group[start].k
        rows.append(KStarRow(ensemble, n, r, threshold, k_star, reference_bound(ensemble, n, r)))
    return KStarReport(rows)


@dataclass(frozen=True)
class _CellTask:
    key: tuple[str, int, int, int]
    trials: int
    seed: int
    amplitude: str
    source: NDArray | None
    tol: float
    maxiter: int


def trial_streams(
    key: tuple[str, int, int, int], trial: int, seed: int
) -> tuple[RngStream, RngStream]:
    """Matrix and signal streams of one trial."""
    return (
        RngStream(seed, derive_stream_id(*key, trial, "matrix")),
        RngStream(seed, derive_stream_id(*key, trial, "signal")),
    )


def _run_trial(task: _CellTask, trial: int) -> tuple[str, float]:
    ensemble, n, r, k = task.key
    matrix_stream, signal_stream = trial_streams(task.key, trial, task.seed)
    spec = EnsembleSpec(ensemble, n, k, task.seed, task.source)
    measurements = sample_measurements(spec, matrix_stream)
    f = sample_sparse_signal(SparseSignalSpec(n, r, task.amplitude, task.seed), signal_stream)
    y = measurements.matrix @ f.values
    if measurements.is_complex:
        y = realify_vector(y)
    try:
        result = basis_pursuit(measurements.real_system(), y, tol=task.tol, maxiter=task.maxiter)
    except (InfeasibleProblemError, NumericalError) as e:
        logger.bind(cell=task.key, trial=trial).warning(f"Solver failure: {e}")
        return "solver_failure", math.nan
    if not result.success:
        return "solver_failure", math.nan
    return verify_recovery(f, result), recovery_error(f, result)


def _evaluate_cell(task: _CellTask) -> PhaseRow:
    outcomes = [_run_trial(task, t) for t in range(task.trials)]
    successes = sum(outcome == "exact" for outcome, _ in outcomes)
    solver_failures = sum(outcome == "solver_failure" for outcome, _ in outcomes)
    errors = [error for outcome, error in outcomes if outcome != "solver_failure"]
    ensemble, n, r, k = task.key
    return PhaseRow(
        ensemble=ensemble,
        n=n,
        r=r,
        k=k,
        trials=task.trials,
        successes=successes,
        failures=task.trials - successes - solver_failures,
        solver_failures=solver_failures,
        success_rate=successes / task.trials,
        mean_l2_error=compensated_mean(errors) if errors else math.nan,
        seed=task.seed,
    )


@timer()
def run_phase_transition(
    grid: PhaseGrid,
    workers: int = 1,
    progress: bool = False,
    tol: float = DEFAULT_TOL,
    maxiter: int = DEFAULT_MAXITER,
) -> PhaseTable:
    """
    Evaluate every cell of ``grid``.

    Args:
        grid (PhaseGrid): The experiment grid.
        workers (int, optional): Worker processes; ``1`` runs in-process.
        progress (bool, optional): Show a tqdm bar over cells.
        tol (float, optional): LP tolerance.
        maxiter (int, optional): LP iteration cap.

    Returns:
        PhaseTable: Rows in canonical ``(ensemble, n, r, k)`` order. The table is identical for
        every value of ``workers``.
    """
    if workers < 1:
        raise ParameterError("workers", workers, "must be >= 1")
    tasks = [
        _CellTask(key, grid.trials, grid.seed, grid.amplitude, grid.source, tol, maxiter)
        for key in grid.cells()
    ]
    for r, k in sorted({(task.key[2], task.key[3]) for task in tasks}):
        check_measurement_count(k, r)
    logger.bind(cells=len(tasks), trials=grid.trials, workers=workers).info("Running phase grid")

    bar = tqdm(total=len(tasks), disable=not progress, desc="cells", unit="cell")
    rows = []
    if workers == 1:
        for task in tasks:
            rows.append(_evaluate_cell(task))
            bar.update(1)
    else:
        with ProcessPoolExecutor(max_workers=workers) as executor:
            for row in executor.map(_evaluate_cell, tasks):
                rows.append(row)
                bar.update(1)
    bar.close()

    for row in rows:
        logger.bind(n=row.n, r=row.r, k=row.k, rate=row.success_rate).info(
            f"Cell finished ({row.solver_failures} solver failures)"
        )
    return PhaseTable(rows)


def _infer_format(path: str | PathLike, format: str | None) -> str:
    if format is None:
        format = os.path.splitext(os.fspath(path))[1].lstrip(".").lower()
    if format not in ("csv", "svg"):
        raise ParameterError("format", format, "must be 'csv' or 'svg'")
    return format


def _plot_table(table: PhaseTable, path: str | PathLike) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(8, 4.5))
    for i, ((ensemble, n, r), group) in enumerate(table.groups().items()):
        color = f"C{i % 10}"
        ax.plot(
            [row.k for row in group],
            [row.success_rate for row in group],
            color=color,
            marker="o",
            markersize=3,
            linewidth=1.0,
            label=f"{ensemble} n={n} r={r}",
        )
        ax.axvline(reference_bound(ensemble, n, r), color=color, linestyle="dotted", linewidth=1.0)
    ax.set_xlabel("measurements k")
    ax.set_ylabel("success rate")
    ax.set_ylim(-0.03, 1.03)
    ax.grid(True, color="lightgray", linestyle="dotted")
    if len(table):
        ax.legend(loc="lower right", fontsize=8)
    fig.savefig(os.fspath(path), format="svg", bbox_inches="tight")
    plt.close(fig)


def _plot_report(report: KStarReport, path: str | PathLike) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(8, 4.5))
    series: dict[tuple[str, int], list[KStarRow]] = {}
    for row in report:
        series.setdefault((row.ensemble, row.r), []).append(row)
    for i, ((ensemble, r), rows) in enumerate(sorted(series.items())):
        rows = sorted(rows, key=lambda row: row.n)
        color = f"C{i % 10}"
        found = [row for row in rows if row.k_star is not None]
        ax.plot(
            [row.n for row in found],
            [row.k_star for row in found],
            "o-",
            color=color,
            label=f"{ensemble} r={r} k*",
        )
        ax.plot(
            [row.n for row in rows],
            [row.bound for row in rows],
            ":",
            color=color,
            label=f"{ensemble} r={r} bound",
        )
    ax.set_xlabel("n")
    ax.set_ylabel("measurements")
    ax.grid(True, color="lightgray", linestyle="dotted")
    if report.rows:
        ax.legend(fontsize=8)
    fig.savefig(os.fspath(path), format="svg", bbox_inches="tight")
    plt.close(fig)


def export(
    obj: PhaseTable | KStarReport, path: str | PathLike, format: ExportFormat | None = None
) -> None:
    """
    Write a table or report as CSV or SVG (format inferred from the extension when omitted).

    Raises:
        ExportError: on I/O failure, with the offending path.
    """
    format = _infer_format(path, format)
    if format == "csv":
        write_text(path, obj.to_csv())
        return
    try:
        ensure_parent(path)
        if isinstance(obj, PhaseTable):
            _plot_table(obj, path)
        else:
            _plot_report(obj, path)
    except OSError as e:
        raise ExportError(os.fspath(path), e.strerror or str(e)) from e


def monotone_fit(rates: Iterable[float]) -> list[float]:
    """Isotonic (non-decreasing) least squares fit of success rates in ``k`` order."""
    values = np.asarray(list(rates), dtype=float)
    if values.size == 0:
        return []
    return isotonic_regression(values, increasing=True).x.tolist()


__all__ = [
    "PHASE_CSV_HEADER",
    "KSTAR_CSV_HEADER",
    "PhaseGrid",
    "PhaseRow",
    "PhaseTable",
    "KStarRow",
    "KStarReport",
    "reference_bound",
    "plateau_start",
    "empirical_k_star",
    "trial_streams",
    "run_phase_transition",
    "export",
    "monotone_fit",
]

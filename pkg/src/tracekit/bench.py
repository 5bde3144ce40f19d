"""Error-vs-budget experiment harness with CSV output.

An :class:`ExperimentSpec` names a matrix source, a set of estimators, an
ascending budget grid, a trial count, and a base seed.  :func:`run_sweep`
materializes the source once, computes its exact trace, runs every
(estimator, budget) cell for `trials` independently seeded repetitions, and
reduces each cell to median / quartile relative error plus the mean matvec
spend.  Results are deterministic in the base seed regardless of estimator
subset or execution order.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Union

import numpy as np

from tracekit.estimators import ESTIMATOR_NAMES, run_estimator
from tracekit.graph import (
    adjacency_operator,
    estrada_index_exact,
    load_edge_list,
    triangle_count_exact,
)
from tracekit.linop import DenseOperator, DiagonalOperator, LinearOperator
from tracekit.matfunc import exp_operator, power_operator, shifted_log_operator
from tracekit.synth import (
    SpectrumSpec,
    gaussian_kernel_matrix,
    load_points,
    power_law_matrix,
    synthetic_2d_points,
)
from tracekit.estimators import exact_trace

logger = logging.getLogger(__name__)

__all__ = [
    "PowerLawSource",
    "KernelLogDetSource",
    "GraphEstradaSource",
    "GraphTrianglesSource",
    "MatrixSource",
    "ExperimentSpec",
    "TrialStats",
    "run_sweep",
    "fit_loglog_slope",
    "emit_csv",
]

# Dense Estrada / triangle oracles are only used below these sizes; larger
# graphs get (cached) exact_trace on the wrapped operator instead.
_DENSE_ESTRADA_MAX = 2000
_TRIANGLE_ENUM_MAX = 5000


@dataclass(frozen=True)
class PowerLawSource:
    """Rotated (or, with rotate=False, exactly diagonal) power-law spectrum."""

    exponent: float
    dim: int = 1000
    rotate: bool = True


@dataclass(frozen=True)
class KernelLogDetSource:
    """logdet(B + shift*I) for a Gaussian kernel on 2-d points.

    Points come from a coordinates file when points_path is set, otherwise
    n_points uniform draws in the unit square.
    """

    n_points: int
    gamma: float = 64.0
    shift: float = 0.008
    lanczos_iterations: int = 40
    points_path: str | None = None


@dataclass(frozen=True)
class GraphEstradaSource:
    """trace(exp(B)) for a graph adjacency matrix read from an edge list."""

    path: str
    lanczos_iterations: int = 40


@dataclass(frozen=True)
class GraphTrianglesSource:
    """trace(B^3) for a graph adjacency matrix (6x the triangle count)."""

    path: str


MatrixSource = Union[
    PowerLawSource, KernelLogDetSource, GraphEstradaSource, GraphTrianglesSource
]


@dataclass(frozen=True)
class ExperimentSpec:
    """One benchmark sweep: source x estimators x budgets, `trials` deep."""

    source: MatrixSource
    estimators: tuple[str, ...]
    budgets: tuple[int, ...]
    trials: int
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "estimators", tuple(self.estimators))
        object.__setattr__(self, "budgets", tuple(int(m) for m in self.budgets))
        unknown = [e for e in self.estimators if e not in ESTIMATOR_NAMES]
        if unknown:
            raise ValueError(
                f"unknown estimators {unknown!r}; valid: {', '.join(ESTIMATOR_NAMES)}"
            )
        if not self.estimators:
            raise ValueError("need at least one estimator")
        if not self.budgets:
            raise ValueError("need at least one budget")
        if any(b <= a for a, b in zip(self.budgets, self.budgets[1:])):
            raise ValueError(f"budgets must be strictly ascending, got {self.budgets}")
        if int(self.trials) < 1:
            raise ValueError(f"trials must be >= 1, got {self.trials}")
        object.__setattr__(self, "trials", int(self.trials))


@dataclass(frozen=True)
class TrialStats:
    """Per-cell summary: quartiles of relative error and mean budget spent."""

    estimator: str
    m: int
    median_rel_err: float
    q25_rel_err: float
    q75_rel_err: float
    mean_matvecs: float


def _source_rng(seed: int) -> np.random.Generator:
    # The matrix/points draw gets its own child so trial seeds never collide.
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(0,)))


def _trial_rng(seed: int, estimator: str, m: int, trial: int) -> np.random.Generator:
    # Stable realization of hash(base_seed, estimator, m, trial): the
    # registry index keys the estimator, so results do not depend on which
    # subset the user requested or its order.
    idx = ESTIMATOR_NAMES.index(estimator)
    return np.random.default_rng(
        np.random.SeedSequence(seed, spawn_key=(1, idx, int(m), int(trial)))
    )


def _cached_exact_trace(path: Path, label: str, make_op) -> float:
    """exact_trace on the wrapped operator, cached in a JSON beside the file."""
    cache_path = Path(str(path) + ".trace-cache.json")
    cache: dict[str, float] = {}
    if cache_path.exists():
        try:
            cache = json.loads(cache_path.read_text())
        except (OSError, json.JSONDecodeError):
            cache = {}
    if label in cache:
        return float(cache[label])
    logger.info("computing exact ground truth for %s (%s); this is O(d) matvecs",
                path, label)
    value = exact_trace(make_op()).value
    cache[label] = value
    try:
        cache_path.write_text(json.dumps(cache, indent=1, sort_keys=True))
    except OSError:
        logger.warning("could not write ground-truth cache %s", cache_path)
    return value


def _materialize(source: MatrixSource, seed: int) -> tuple[LinearOperator, float]:
    """Build the source operator once and compute its exact trace."""
    if isinstance(source, PowerLawSource):
        spec = SpectrumSpec(source.dim, source.exponent)
        if source.rotate:
            A, op = power_law_matrix(spec, _source_rng(seed))
            return op, float(np.trace(A))
        return DiagonalOperator(spec.eigenvalues), spec.trace
    if isinstance(source, KernelLogDetSource):
        if source.points_path is not None:
            pts = load_points(source.points_path)
        else:
            pts = synthetic_2d_points(source.n_points, _source_rng(seed))
        B = gaussian_kernel_matrix(pts, source.gamma)
        shifted = B + source.shift * np.eye(B.shape[0])
        sign, logabsdet = np.linalg.slogdet(shifted)
        if sign <= 0:
            raise ValueError("kernel + shift is not positive definite")
        op = shifted_log_operator(
            DenseOperator(B), source.shift, source.lanczos_iterations
        )
        return op, float(logabsdet)
    if isinstance(source, GraphEstradaSource):
        g = load_edge_list(source.path)
        make_op = lambda: exp_operator(
            adjacency_operator(g), source.lanczos_iterations
        )
        if g.node_count <= _DENSE_ESTRADA_MAX:
            truth = estrada_index_exact(g)
        else:
            truth = _cached_exact_trace(
                Path(source.path),
                f"estrada_lanczos{source.lanczos_iterations}",
                make_op,
            )
        return make_op(), truth
    if isinstance(source, GraphTrianglesSource):
        g = load_edge_list(source.path)
        make_op = lambda: power_operator(adjacency_operator(g), 3)
        if g.node_count <= _TRIANGLE_ENUM_MAX:
            truth = 6.0 * triangle_count_exact(g)
        else:
            truth = _cached_exact_trace(Path(source.path), "adjacency_cubed", make_op)
        return make_op(), truth
    raise TypeError(f"unknown matrix source {source!r}")


def run_sweep(spec: ExperimentSpec) -> list[TrialStats]:
    """Run the full sweep; one TrialStats row per valid (estimator, m) cell.

    Budgets below an estimator's minimum are logged and skipped; the sweep
    continues.  Quartiles use linear interpolation between order statistics.
    """
    op, truth = _materialize(spec.source, spec.seed)
    if truth == 0.0:
        raise ValueError("ground-truth trace is zero; relative error is undefined")
    rows: list[TrialStats] = []
    for estimator in spec.estimators:
        for m in spec.budgets:
            errors = np.empty(spec.trials)
            matvecs = np.empty(spec.trials)
            try:
                for t in range(spec.trials):
                    trial_op = op.clone()
                    result = run_estimator(
                        trial_op, estimator, m, _trial_rng(spec.seed, estimator, m, t)
                    )
                    errors[t] = abs(result.value - truth) / abs(truth)
                    matvecs[t] = result.matvecs_used
            except ValueError as exc:
                logger.warning("skipping %s at m=%d: %s", estimator, m, exc)
                continue
            q25, med, q75 = np.percentile(errors, [25.0, 50.0, 75.0])
            rows.append(
                TrialStats(
                    estimator=estimator,
                    m=m,
                    median_rel_err=float(med),
                    q25_rel_err=float(q25),
                    q75_rel_err=float(q75),
                    mean_matvecs=float(matvecs.mean()),
                )
            )
    return rows


def fit_loglog_slope(stats: list[TrialStats]) -> float:
    """Least-squares slope of log(median error) against log(budget).

    Cells with zero median error carry no log-scale information; they are
    excluded (and noted).  Needs at least three usable points.
    """
    usable = [s for s in stats if s.median_rel_err > 0.0]
    dropped = len(stats) - len(usable)
    if dropped:
        logger.info("fit_loglog_slope: excluded %d zero-error cell(s)", dropped)
    if len(usable) < 3:
        raise ValueError(
            f"need >= 3 budgets with positive median error, have {len(usable)}"
        )
    x = np.log([s.m for s in usable])
    y = np.log([s.median_rel_err for s in usable])
    return float(np.polyfit(x, y, 1)[0])


_CSV_HEADER = "estimator,m,median_rel_err,q25,q75,mean_matvecs"


def _fmt(x: float) -> str:
    # 17 significant digits: decimal round-trips to the exact float.
    return format(float(x), ".17g")


def emit_csv(stats: list[TrialStats], destination) -> None:
    """Write sweep rows as CSV (LF endings, >= 12 significant digits).

    destination is a path or a file-like object with write().
    """
    lines = [_CSV_HEADER]
    for s in stats:
        lines.append(
            ",".join(
                [
                    s.estimator,
                    str(int(s.m)),
                    _fmt(s.median_rel_err),
                    _fmt(s.q25_rel_err),
                    _fmt(s.q75_rel_err),
                    _fmt(s.mean_matvecs),
                ]
            )
        )
    content = "\n".join(lines) + "\n"
    if hasattr(destination, "write"):
        destination.write(content)
    else:
        with open(destination, "w", newline="") as fh:
            fh.write(content)

"""Sequential experiment design over the joint model.

Active learning greedily maximizes the mutual information between a
candidate observation and the rest of the candidate grid,

    gain(x) = 1/2 log var[t(x) | A] - 1/2 log var[t(x) | D \\ (A + x)],

where A is the running design and D the grid; both conditionals also
include the model's existing training locations.  Gains depend on kernel
values only, never on outcomes, so a full design can be scored before any
experiment runs.  Bayesian optimization scores candidates by closed-form
expected improvement under the posterior and returns the best scorer.

Both drivers accept the joint multi-task model or the independent
per-task baselines; ties are broken by (task index, then input tuple) so
selections are deterministic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np
import scipy.linalg
from scipy.stats import norm

from .dag_gp import (
    IndependentTaskModels,
    MultiTaskGP,
    TaskPoint,
    _chol_with_ladder,
    condition,
    posterior,
    posterior_mean,
)
from .seeding import derived_rng

__all__ = [
    "CandidateGrid",
    "make_candidate_grid",
    "TraceStep",
    "DesignTrace",
    "mi_gain",
    "al_greedy_mi",
    "al_uniform_random",
    "expected_improvement",
    "bo_step",
]

_VAR_FLOOR = 1e-12


@dataclass(frozen=True)
class CandidateGrid:
    """Finite candidate set spanning every task."""

    points: tuple[TaskPoint, ...]
    tasks: tuple[tuple[str, ...], ...]

    def task_points(self, task: int) -> list[TaskPoint]:
        return [p for p in self.points if p.task == task]


def _per_dim_count(resolution: int, dim: int) -> int:
    if dim <= 1:
        return resolution
    if dim == 2:
        return max(2, (3 * resolution) // 10)
    return max(2, (7 * resolution) // 50)


def make_candidate_grid(
    tasks: Sequence[Sequence[str]],
    domains: Mapping[str, tuple[float, float]],
    resolution: int = 50,
) -> CandidateGrid:
    """Uniform per-task grids, cartesian across dimensions.

    ``resolution`` is the 1-D point count; higher-dimensional tasks use
    coarser per-axis counts (15 and 7 at the default 50) to keep grids
    comparable in size.
    """
    if resolution < 1:
        raise ValueError("resolution must be at least 1")
    task_tuple = tuple(tuple(sorted(t)) for t in tasks)
    points: list[TaskPoint] = []
    for t, task_vars in enumerate(task_tuple):
        count = _per_dim_count(resolution, len(task_vars))
        axes = [np.linspace(domains[v][0], domains[v][1], count) for v in task_vars]
        mesh = np.meshgrid(*axes, indexing="ij")
        stacked = np.stack([m.reshape(-1) for m in mesh], axis=1)
        points.extend(TaskPoint(t, tuple(row)) for row in stacked)
    return CandidateGrid(points=tuple(points), tasks=task_tuple)


@dataclass(frozen=True)
class TraceStep:
    step: int
    point: TaskPoint
    acquisition: float
    y: float | None = None
    metric: float | None = None


@dataclass(frozen=True)
class DesignTrace:
    steps: tuple[TraceStep, ...]

    @property
    def points(self) -> list[TaskPoint]:
        return [s.point for s in self.steps]

    def csv_text(self) -> str:
        """Serialize the trace; x columns are padded to the widest task."""
        width = max((len(s.point.x) for s in self.steps), default=1)
        header = ["step", "task"] + [f"x{k + 1}" for k in range(width)]
        header += ["acquisition", "y", "running_metric"]
        lines = [",".join(header)]
        for s in self.steps:
            x_cols = [repr(float(v)) for v in s.point.x]
            x_cols += [""] * (width - len(s.point.x))
            row = [str(s.step), str(s.point.task), *x_cols]
            for value in (s.acquisition, s.y, s.metric):
                row.append("" if value is None else repr(float(value)))
            lines.append(",".join(row))
        return "\n".join(lines) + "\n"

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.csv_text())


# ---------------------------------------------------------------------------
# model dispatch


def _cov_fn(model) -> Callable[[TaskPoint, TaskPoint], float]:
    if isinstance(model, MultiTaskGP):
        return model._cov
    if isinstance(model, IndependentTaskModels):
        return model.cov
    raise TypeError(f"unsupported model type {type(model).__name__}")


def _predict(model, points):
    if isinstance(model, MultiTaskGP):
        return posterior(model, points)
    return model.predict(points)


def _predict_mean(model, points) -> np.ndarray:
    if isinstance(model, MultiTaskGP):
        return posterior_mean(model, points)
    return model.predict_mean(points)


def _refit(model, points, y):
    if isinstance(model, MultiTaskGP):
        return condition(model, points, y)
    return model.condition(points, y)


# ---------------------------------------------------------------------------
# mutual-information greedy design


def _joint_matrix(cov, points: Sequence[TaskPoint]) -> np.ndarray:
    n = len(points)
    out = np.empty((n, n))
    for i in range(n):
        for j in range(i, n):
            out[i, j] = out[j, i] = cov(points[i], points[j])
    return out


def _cond_var(mat: np.ndarray, i: int, idx: list[int], noise_var: float) -> float:
    if not idx:
        return max(float(mat[i, i]), _VAR_FLOOR)
    sub = mat[np.ix_(idx, idx)] + noise_var * np.eye(len(idx))
    chol, _ = _chol_with_ladder(sub)
    k = mat[idx, i]
    v = scipy.linalg.cho_solve((chol, True), k)
    return max(float(mat[i, i] - k @ v), _VAR_FLOOR)


def _gain_from_matrix(
    mat: np.ndarray, i: int, in_idx: list[int], out_idx: list[int], noise_var: float
) -> float:
    var_in = _cond_var(mat, i, in_idx, noise_var)
    var_out = _cond_var(mat, i, out_idx, noise_var)
    return 0.5 * math.log(var_in) - 0.5 * math.log(var_out)


def mi_gain(
    model,
    candidate: TaskPoint,
    selected: Sequence[TaskPoint],
    grid: CandidateGrid,
) -> float:
    """Information gained about the grid by observing ``candidate``.

    Both conditioning sets include the model's training locations; outcomes
    never enter, only kernel values and the likelihood noise.
    """
    points = list(grid.points)
    try:
        cand_idx = points.index(candidate)
    except ValueError:
        raise ValueError("candidate must be a grid point") from None
    selected_idx = []
    for p in selected:
        j = points.index(p)
        if j == cand_idx:
            raise ValueError("candidate already selected")
        selected_idx.append(j)
    train = list(model.training_points)
    mat = _joint_matrix(_cov_fn(model), points + train)
    train_idx = list(range(len(points), len(points) + len(train)))
    rest_idx = [j for j in range(len(points)) if j != cand_idx and j not in selected_idx]
    return _gain_from_matrix(
        mat, cand_idx, selected_idx + train_idx, rest_idx + train_idx, model.noise_var
    )


def _execute(model, chosen: list[tuple[TaskPoint, float]], observe, metric) -> DesignTrace:
    steps = []
    current = model
    for step, (p, acq) in enumerate(chosen, start=1):
        y_val = None
        metric_val = None
        if observe is not None:
            y_val = float(observe(p))
            current = _refit(current, [p], [y_val])
        if metric is not None:
            metric_val = float(metric(current))
        steps.append(TraceStep(step=step, point=p, acquisition=acq, y=y_val, metric=metric_val))
    return DesignTrace(steps=tuple(steps))


def al_greedy_mi(
    model,
    grid: CandidateGrid,
    budget: int,
    *,
    observe: Callable[[TaskPoint], float] | None = None,
    metric: Callable[[object], float] | None = None,
) -> DesignTrace:
    """Greedy maximum-information design of ``budget`` grid points.

    Selection is outcome-free, so the whole design is fixed before any
    experiment runs.  When ``observe`` is given, each selected point is
    then executed in order and the model refit; ``metric`` (evaluated on
    the running model) fills the per-step metric column.
    """
    points = list(grid.points)
    if not 0 <= budget <= len(points):
        raise ValueError("budget must be between 0 and the grid size")
    train = list(model.training_points)
    mat = _joint_matrix(_cov_fn(model), points + train)
    train_idx = list(range(len(points), len(points) + len(train)))
    noise_var = model.noise_var

    selected: list[int] = []
    chosen: list[tuple[TaskPoint, float]] = []
    for _ in range(budget):
        remaining = [i for i in range(len(points)) if i not in selected]
        best = None
        for i in remaining:
            rest = [j for j in remaining if j != i]
            g = _gain_from_matrix(mat, i, selected + train_idx, rest + train_idx, noise_var)
            key = (-g, points[i].task, points[i].x)
            if best is None or key < best[0]:
                best = (key, i, g)
        selected.append(best[1])
        chosen.append((points[best[1]], float(best[2])))
    return _execute(model, chosen, observe, metric)


def al_uniform_random(
    model,
    grid: CandidateGrid,
    budget: int,
    seed: int,
    *,
    observe: Callable[[TaskPoint], float] | None = None,
    metric: Callable[[object], float] | None = None,
) -> DesignTrace:
    """Uniform-without-replacement baseline design, same trace format."""
    points = list(grid.points)
    if not 0 <= budget <= len(points):
        raise ValueError("budget must be between 0 and the grid size")
    rng = derived_rng(seed, "al-random")
    order = rng.choice(len(points), size=budget, replace=False)
    chosen = [(points[int(i)], float("nan")) for i in order]
    return _execute(model, chosen, observe, metric)


# ---------------------------------------------------------------------------
# expected improvement


def expected_improvement(mean: float, sd: float, best: float, minimize: bool = True) -> float:
    """Closed-form EI of a Gaussian belief against the incumbent."""
    if sd < 0:
        raise ValueError("sd must be nonnegative")
    imp = best - mean if minimize else mean - best
    if sd == 0.0:
        return max(imp, 0.0)
    u = imp / sd
    return float(imp * norm.cdf(u) + sd * norm.pdf(u))


def bo_step(model, grid: CandidateGrid, objective: str = "min") -> tuple[TaskPoint, float]:
    """One optimization step: the grid point with the highest EI.

    The incumbent is the best observed outcome, or the best posterior
    (prior) mean over the grid when nothing has been observed yet.
    """
    if objective not in ("min", "max"):
        raise ValueError("objective must be 'min' or 'max'")
    minimize = objective == "min"
    pred = _predict(model, list(grid.points))
    y = np.asarray(model.training_y, dtype=np.float64)
    if y.size:
        best_val = float(y.min() if minimize else y.max())
    else:
        best_val = float(pred.mean.min() if minimize else pred.mean.max())
    best = None
    for i, p in enumerate(grid.points):
        ei = expected_improvement(float(pred.mean[i]), float(pred.sd[i]), best_val, minimize)
        key = (-ei, p.task, p.x)
        if best is None or key < best[0]:
            best = (key, p, ei)
    return best[1], float(best[2])

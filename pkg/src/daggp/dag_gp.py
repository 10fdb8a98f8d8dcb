"""Multi-task GP over all intervention functions of a DAG.

Each intervention set is a task; its function is the image of the shared
base function under the set's integrating measure.  Propagating the base
prior through that operator gives every prior mean, variance, and
cross-covariance, including across tasks of different input dimension:

    m_s(x)        = integral of m(b) against the measure of (s, x)
    k((s,x),(s',x')) = double integral of K(b, b') against both measures

Integrals are Monte Carlo sums over per-point sample blocks with seeds
derived from (master seed, role, task variables, x), so Gram matrices are
reproducible, exactly symmetric, and positive semidefinite (each entry is
an inner product of empirical-measure kernel embeddings).  Point-mass
measures skip MC entirely and collapse the operator onto the base prior.

Observations follow y = t_s(x) + eps with Gaussian noise of fixed variance;
posteriors are standard GP updates.  Single-task baselines (plain RBF and
causal-prior variants) and the do-calculus-only baseline live here too.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np
import scipy.linalg
from scipy.spatial.distance import cdist

from . import _kernels
from .causal_prior import CausalPriorParams, make_causal_prior, make_standard_prior, rbf_kernel_value
from .density_models import FittedDAGDensity, IntegratingMeasure, build_integrating_measure
from .errors import InterventionError, NumericalError
from .graph_analysis import deduplicated_sets
from .scm_core import CausalGraph
from .seeding import derive_seed

__all__ = [
    "TaskPoint",
    "Prediction",
    "MultiTaskGP",
    "SingleTaskGP",
    "IndependentTaskModels",
    "build_multitask_model",
    "build_independent_models",
    "prior_mean_ts",
    "prior_cov",
    "build_gram",
    "posterior",
    "posterior_mean",
    "condition",
    "fit_single_task",
    "do_baseline",
    "rmse",
    "save_snapshot",
    "load_snapshot",
]

_JITTER_LADDER = (1e-8, 1e-6, 1e-4)


@dataclass(frozen=True)
class TaskPoint:
    """An intervention level of one task: task index plus input vector."""

    task: int
    x: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "x", tuple(float(v) for v in self.x))


@dataclass(frozen=True, eq=False)
class Prediction:
    mean: np.ndarray
    cov: np.ndarray
    sd: np.ndarray


def _chol_with_ladder(mat: np.ndarray) -> tuple[np.ndarray, float]:
    """Lower Cholesky factor after escalating diagonal jitter."""
    n = mat.shape[0]
    eye = np.eye(n)
    for jitter in _JITTER_LADDER:
        try:
            return scipy.linalg.cholesky(mat + jitter * eye, lower=True), jitter
        except scipy.linalg.LinAlgError:
            continue
    min_eig = float(np.linalg.eigvalsh(mat).min())
    raise NumericalError(
        f"matrix not positive definite within jitter ladder {_JITTER_LADDER}; "
        f"min eigenvalue {min_eig:.6e}"
    )


def _clamped_variances(diag: np.ndarray) -> np.ndarray:
    worst = float(diag.min()) if diag.size else 0.0
    if worst < -1e-8:
        raise NumericalError(f"negative predictive variance {worst:.6e}")
    return np.clip(diag, 0.0, None)


class _PointStats:
    """Per-(task, x) sample block and prior summaries."""

    __slots__ = ("key", "b_block", "sbar", "point_mass", "prior_mean")

    def __init__(self, key, b_block, sbar, point_mass):
        self.key = key
        self.b_block = b_block
        self.sbar = sbar
        self.point_mass = point_mass
        self.prior_mean: float | None = None


def _full_base_points(measure: IntegratingMeasure, x: np.ndarray, samples: np.ndarray) -> np.ndarray:
    """Assemble complete base-function inputs from measure samples.

    Intervened parents come from x (and pinned context), everything else
    from the sampled columns; output order is (parents, confounded), each
    lexicographic, matching the base-point layout.
    """
    fixed = measure._fixed_values(x)
    names = measure.base.parents + measure.base.confounded_noncolliders
    col = {v: j for j, v in enumerate(measure.columns)}
    n = samples.shape[0]
    out = np.empty((n, len(names)))
    for k, v in enumerate(names):
        out[:, k] = samples[:, col[v]] if v in col else fixed[v]
    return out


@dataclass(frozen=True, eq=False)
class MultiTaskGP:
    """Joint GP over the tasks, with shared memo caches across copies.

    Instances are immutable; ``condition`` returns a new model sharing the
    sample/entry caches (fills are idempotent, keyed by derived seeds).
    """

    graph: CausalGraph
    density: FittedDAGDensity
    tasks: tuple[tuple[str, ...], ...]
    measures: tuple[IntegratingMeasure, ...]
    prior: CausalPriorParams
    noise_var: float = 1e-3
    mean_samples: int = 1000
    pair_samples: int = 100
    master_seed: int = 0
    domains: Mapping[str, tuple[float, float]] | None = None
    training_points: tuple[TaskPoint, ...] = ()
    training_y: np.ndarray = field(default_factory=lambda: np.zeros(0))
    cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        y = np.asarray(self.training_y, dtype=np.float64).reshape(-1)
        object.__setattr__(self, "training_y", y)
        object.__setattr__(self, "training_points", tuple(self.training_points))
        if len(self.training_points) != y.shape[0]:
            raise ValueError("training points and targets differ in length")
        for p in self.training_points:
            self._validate_point(p)

    def _validate_point(self, p: TaskPoint) -> None:
        if not 0 <= p.task < len(self.tasks):
            raise InterventionError(f"task index {p.task} out of range")
        task_vars = self.tasks[p.task]
        if len(p.x) != len(task_vars):
            raise InterventionError(
                f"point for task {task_vars} needs {len(task_vars)} coordinates, got {len(p.x)}"
            )
        if self.domains:
            for v, value in zip(task_vars, p.x):
                lo, hi = self.domains[v]
                if not (lo <= value <= hi):
                    raise InterventionError(f"{v!r}={value} outside domain [{lo}, {hi}]")

    # ------------------------------------------------------------------
    # per-point statistics

    def _stats(self, p: TaskPoint) -> _PointStats:
        self._validate_point(p)
        x = np.array(p.x, dtype=np.float64)
        key = ("stats", p.task, x.tobytes())
        hit = self.cache.get(key)
        if hit is not None:
            return hit
        measure = self.measures[p.task]
        task_vars = self.tasks[p.task]
        if measure.is_point_mass:
            samples = measure.point_value(x)[None, :]
            block = _full_base_points(measure, x, samples)
            sbar = self.prior.sd_value(block[0]) if self.prior.mode == "causal" else 0.0
            stats = _PointStats(key, block, float(sbar), True)
        else:
            seed = derive_seed(self.master_seed, "measure-cov", task_vars, x)
            samples = measure.sample(x, self.pair_samples, seed)
            block = _full_base_points(measure, x, samples)
            if self.prior.mode == "causal":
                stream = derive_seed(self.master_seed, "effect-cov", task_vars, x)
                sbar = float(self.prior.batch_effects(block, stream)[1].mean())
            else:
                sbar = 0.0
            stats = _PointStats(key, block, sbar, False)
        self.cache[key] = stats
        return stats

    def _prior_mean(self, p: TaskPoint) -> float:
        if self.prior.mode == "standard":
            # empirical constant mean: a strictly zero mean cannot reach
            # outputs far from the origin once the propagated prior
            # variance is small, so center on the training targets
            return float(self.training_y.mean()) if self.training_y.size else 0.0
        stats = self._stats(p)
        if stats.prior_mean is None:
            if stats.point_mass:
                stats.prior_mean = float(self.prior.mean_value(stats.b_block[0]))
            else:
                task_vars = self.tasks[p.task]
                x = np.array(p.x, dtype=np.float64)
                measure = self.measures[p.task]
                seed = derive_seed(self.master_seed, "measure-mean", task_vars, x)
                samples = measure.sample(x, self.mean_samples, seed)
                block = _full_base_points(measure, x, samples)
                stream = derive_seed(self.master_seed, "effect-mean", task_vars, x)
                means = self.prior.batch_effects(block, stream)[0]
                stats.prior_mean = float(means.mean())
        return stats.prior_mean

    def _pair_rbf(self, a: _PointStats, b: _PointStats) -> float:
        inv_two_l2 = 1.0 / (2.0 * self.prior.lengthscale**2)
        if a.point_mass and b.point_mass:
            # exact collapse path: same arithmetic as the base kernel
            return rbf_kernel_value(
                a.b_block[0], b.b_block[0], self.prior.lengthscale, self.prior.signal_var
            )
        key = ("pair",) + tuple(sorted((a.key, b.key)))
        hit = self.cache.get(key)
        if hit is None:
            if a.key == b.key:
                hit = _kernels.self_mean_rbf(a.b_block, inv_two_l2, self.prior.signal_var)
            else:
                hit = _kernels.pair_mean_rbf(a.b_block, b.b_block, inv_two_l2, self.prior.signal_var)
            self.cache[key] = hit
        return hit

    def _cov(self, p: TaskPoint, q: TaskPoint) -> float:
        a = self._stats(p)
        b = self._stats(q)
        return self._pair_rbf(a, b) + a.sbar * b.sbar

    def _gram(self, points: Sequence[TaskPoint]) -> np.ndarray:
        n = len(points)
        out = np.empty((n, n))
        for i in range(n):
            for j in range(i, n):
                out[i, j] = out[j, i] = self._cov(points[i], points[j])
        return out

    def _cross(self, rows: Sequence[TaskPoint], cols: Sequence[TaskPoint]) -> np.ndarray:
        out = np.empty((len(rows), len(cols)))
        for i, p in enumerate(rows):
            for j, q in enumerate(cols):
                out[i, j] = self._cov(p, q)
        return out

    def _training_state(self):
        sig = (
            b"".join(
                np.array([p.task], dtype=np.int64).tobytes() + np.array(p.x).tobytes()
                for p in self.training_points
            )
            + self.training_y.tobytes()
        )
        key = ("train-state", sig, float(self.noise_var))
        hit = self.cache.get(key)
        if hit is None:
            gram = self._gram(self.training_points)
            chol, _ = _chol_with_ladder(gram + self.noise_var * np.eye(gram.shape[0]))
            m = np.array([self._prior_mean(p) for p in self.training_points])
            alpha = scipy.linalg.cho_solve((chol, True), self.training_y - m)
            hit = (chol, alpha)
            self.cache[key] = hit
        return hit


def build_multitask_model(
    graph: CausalGraph,
    density: FittedDAGDensity,
    tasks: Sequence[Sequence[str]] | None = None,
    *,
    prior: str = "causal",
    noise_var: float = 1e-3,
    mean_samples: int = 1000,
    pair_samples: int = 100,
    effect_mc: int = 1000,
    master_seed: int = 0,
    domains: Mapping[str, tuple[float, float]] | None = None,
    contexts: Mapping[int, Mapping[str, float]] | None = None,
) -> MultiTaskGP:
    """Assemble the joint model over ``tasks``.

    ``tasks`` defaults to the deduplicated intervention sets of the graph.
    ``prior`` selects the causal prior or the standard zero-mean one;
    ``contexts`` optionally pins free parents of chosen tasks at fixed
    values (the exact-collapse configuration).
    """
    if tasks is None:
        task_tuple = deduplicated_sets(graph)
    else:
        task_tuple = tuple(tuple(sorted(t)) for t in tasks)
    if not task_tuple:
        raise ValueError("model needs at least one task")
    contexts = contexts or {}
    measures = tuple(
        build_integrating_measure(density, graph, task_vars, context=contexts.get(i))
        for i, task_vars in enumerate(task_tuple)
    )
    if prior == "causal":
        params = make_causal_prior(density, graph, mc_samples=effect_mc, master_seed=master_seed)
    elif prior == "standard":
        params = make_standard_prior(mc_samples=effect_mc, master_seed=master_seed)
    else:
        raise ValueError("prior must be 'causal' or 'standard'")
    return MultiTaskGP(
        graph=graph,
        density=density,
        tasks=task_tuple,
        measures=measures,
        prior=params,
        noise_var=noise_var,
        mean_samples=mean_samples,
        pair_samples=pair_samples,
        master_seed=master_seed,
        domains=domains,
    )


# ---------------------------------------------------------------------------
# public operations


def prior_mean_ts(model: MultiTaskGP, p: TaskPoint) -> float:
    """Prior mean of t_s at x: MC image of the base mean under the measure."""
    return model._prior_mean(p)


def prior_cov(model: MultiTaskGP, p: TaskPoint, q: TaskPoint) -> float:
    """Prior covariance between two task points (cross-task included)."""
    return model._cov(p, q)


def build_gram(model: MultiTaskGP, points: Sequence[TaskPoint]) -> np.ndarray:
    """Symmetric prior Gram over ``points``; validates the jitter ladder."""
    if not points:
        raise ValueError("points must be nonempty")
    gram = model._gram(points)
    _chol_with_ladder(gram)
    return gram


def posterior(model: MultiTaskGP, query: Sequence[TaskPoint]) -> Prediction:
    """Predictive mean/cov/sd at ``query`` given the model's training data."""
    query = list(query)
    m_q = np.array([model._prior_mean(p) for p in query])
    k_qq = model._gram(query)
    if not model.training_points:
        sd = np.sqrt(_clamped_variances(np.diag(k_qq).copy()))
        return Prediction(mean=m_q, cov=k_qq, sd=sd)
    chol, alpha = model._training_state()
    k_qx = model._cross(query, model.training_points)
    mean = m_q + k_qx @ alpha
    v = scipy.linalg.cho_solve((chol, True), k_qx.T)
    cov = k_qq - k_qx @ v
    cov = (cov + cov.T) / 2.0
    sd = np.sqrt(_clamped_variances(np.diag(cov).copy()))
    return Prediction(mean=mean, cov=cov, sd=sd)


def posterior_mean(model: MultiTaskGP, query: Sequence[TaskPoint]) -> np.ndarray:
    """Predictive mean only; skips the query Gram when variances are unused."""
    query = list(query)
    m_q = np.array([model._prior_mean(p) for p in query])
    if not model.training_points:
        return m_q
    chol, alpha = model._training_state()
    k_qx = model._cross(query, model.training_points)
    return m_q + k_qx @ alpha


def condition(model: MultiTaskGP, points: Sequence[TaskPoint], y: np.ndarray) -> MultiTaskGP:
    """New model with (points, y) appended to the training data."""
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if len(points) != y.shape[0]:
        raise ValueError("points and targets differ in length")
    return replace(
        model,
        training_points=model.training_points + tuple(points),
        training_y=np.concatenate([model.training_y, y]),
    )


def rmse(predictions: np.ndarray, truth: np.ndarray) -> float:
    predictions = np.asarray(predictions, dtype=np.float64).reshape(-1)
    truth = np.asarray(truth, dtype=np.float64).reshape(-1)
    if predictions.shape != truth.shape or predictions.size == 0:
        raise ValueError("prediction and truth vectors must match and be nonempty")
    return float(np.sqrt(np.mean((predictions - truth) ** 2)))


# ---------------------------------------------------------------------------
# single-task baselines


def _rbf_matrix(a: np.ndarray, b: np.ndarray, lengthscale: float, signal_var: float) -> np.ndarray:
    sq = cdist(np.atleast_2d(a), np.atleast_2d(b), "sqeuclidean")
    return signal_var * np.exp(-sq / (2.0 * lengthscale**2))


@dataclass(frozen=True, eq=False)
class SingleTaskGP:
    """Plain zero-mean RBF GP on one task's own input space."""

    task_vars: tuple[str, ...]
    noise_var: float = 1e-3
    lengthscale: float = 1.0
    signal_var: float = 1.0
    train_x: np.ndarray = field(default_factory=lambda: np.zeros((0, 1)))
    train_y: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        x = np.asarray(self.train_x, dtype=np.float64)
        if x.ndim == 1:
            x = x[:, None]
        if x.size == 0:
            x = x.reshape(0, len(self.task_vars))
        object.__setattr__(self, "train_x", x)
        object.__setattr__(self, "train_y", np.asarray(self.train_y, dtype=np.float64).reshape(-1))

    def condition(self, x: np.ndarray, y: np.ndarray) -> "SingleTaskGP":
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        return replace(
            self,
            train_x=np.vstack([self.train_x, x]),
            train_y=np.concatenate([self.train_y, np.asarray(y, dtype=np.float64).reshape(-1)]),
        )

    def posterior_x(self, query: np.ndarray) -> Prediction:
        query = np.atleast_2d(np.asarray(query, dtype=np.float64))
        k_qq = _rbf_matrix(query, query, self.lengthscale, self.signal_var)
        if self.train_x.shape[0] == 0:
            sd = np.sqrt(_clamped_variances(np.diag(k_qq).copy()))
            return Prediction(mean=np.zeros(query.shape[0]), cov=k_qq, sd=sd)
        k_xx = _rbf_matrix(self.train_x, self.train_x, self.lengthscale, self.signal_var)
        chol, _ = _chol_with_ladder(k_xx + self.noise_var * np.eye(k_xx.shape[0]))
        k_qx = _rbf_matrix(query, self.train_x, self.lengthscale, self.signal_var)
        # center on the training targets; see MultiTaskGP._prior_mean
        center = float(self.train_y.mean())
        alpha = scipy.linalg.cho_solve((chol, True), self.train_y - center)
        mean = center + k_qx @ alpha
        v = scipy.linalg.cho_solve((chol, True), k_qx.T)
        cov = k_qq - k_qx @ v
        cov = (cov + cov.T) / 2.0
        sd = np.sqrt(_clamped_variances(np.diag(cov).copy()))
        return Prediction(mean=mean, cov=cov, sd=sd)


def fit_single_task(
    variant: str,
    task_vars,
    x: np.ndarray,
    y: np.ndarray,
    *,
    graph: CausalGraph | None = None,
    density: FittedDAGDensity | None = None,
    noise_var: float = 1e-3,
    mean_samples: int = 1000,
    pair_samples: int = 100,
    effect_mc: int = 1000,
    master_seed: int = 0,
    domains: Mapping[str, tuple[float, float]] | None = None,
):
    """Single-task baseline fitted on one task's data.

    ``gp`` is a zero-mean RBF GP on the task's own inputs; ``gp_plus``
    propagates the causal prior for that task alone (one-task joint model),
    so it shares the prior machinery but sees no other task's data.
    """
    task_vars = tuple(sorted(task_vars))
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if variant == "gp":
        model = SingleTaskGP(task_vars=task_vars, noise_var=noise_var)
        if x.shape[0]:
            model = model.condition(x, y)
        return model
    if variant == "gp_plus":
        if graph is None or density is None:
            raise ValueError("gp_plus needs the graph and fitted density")
        model = build_multitask_model(
            graph,
            density,
            tasks=(task_vars,),
            prior="causal",
            noise_var=noise_var,
            mean_samples=mean_samples,
            pair_samples=pair_samples,
            effect_mc=effect_mc,
            master_seed=master_seed,
            domains=domains,
        )
        points = [TaskPoint(0, tuple(row)) for row in x]
        return condition(model, points, y) if points else model
    raise ValueError("variant must be 'gp' or 'gp_plus'")


@dataclass(frozen=True, eq=False)
class IndependentTaskModels:
    """Per-task baselines behind the joint-model interface.

    Cross-task prior covariance is zero; within a task everything delegates
    to that task's own submodel.  This lets the greedy designers and the
    benchmark drive single-task baselines and the joint model identically.
    """

    tasks: tuple[tuple[str, ...], ...]
    submodels: tuple
    noise_var: float = 1e-3
    training_points: tuple[TaskPoint, ...] = ()
    training_y: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        object.__setattr__(self, "training_points", tuple(self.training_points))
        object.__setattr__(
            self, "training_y", np.asarray(self.training_y, dtype=np.float64).reshape(-1)
        )

    def cov(self, p: TaskPoint, q: TaskPoint) -> float:
        if p.task != q.task:
            return 0.0
        sub = self.submodels[p.task]
        if isinstance(sub, SingleTaskGP):
            a = np.array([p.x], dtype=np.float64)
            b = np.array([q.x], dtype=np.float64)
            return float(_rbf_matrix(a, b, sub.lengthscale, sub.signal_var)[0, 0])
        return sub._cov(TaskPoint(0, p.x), TaskPoint(0, q.x))

    def prior_mean_point(self, p: TaskPoint) -> float:
        sub = self.submodels[p.task]
        if isinstance(sub, SingleTaskGP):
            return float(sub.train_y.mean()) if sub.train_y.size else 0.0
        return sub._prior_mean(TaskPoint(0, p.x))

    def _per_task(self, points: Sequence[TaskPoint]):
        for t in range(len(self.tasks)):
            idx = [i for i, p in enumerate(points) if p.task == t]
            if idx:
                yield t, idx

    def predict(self, points: Sequence[TaskPoint]) -> Prediction:
        points = list(points)
        mean = np.zeros(len(points))
        sd = np.zeros(len(points))
        cov = np.zeros((len(points), len(points)))
        for t, idx in self._per_task(points):
            sub = self.submodels[t]
            if isinstance(sub, SingleTaskGP):
                pred = sub.posterior_x(np.array([points[i].x for i in idx]))
            else:
                pred = posterior(sub, [TaskPoint(0, points[i].x) for i in idx])
            mean[idx] = pred.mean
            sd[idx] = pred.sd
            cov[np.ix_(idx, idx)] = pred.cov
        return Prediction(mean=mean, cov=cov, sd=sd)

    def predict_mean(self, points: Sequence[TaskPoint]) -> np.ndarray:
        points = list(points)
        mean = np.zeros(len(points))
        for t, idx in self._per_task(points):
            sub = self.submodels[t]
            if isinstance(sub, SingleTaskGP):
                mean[idx] = sub.posterior_x(np.array([points[i].x for i in idx])).mean
            else:
                mean[idx] = posterior_mean(sub, [TaskPoint(0, points[i].x) for i in idx])
        return mean

    def condition(self, points: Sequence[TaskPoint], y: np.ndarray) -> "IndependentTaskModels":
        points = list(points)
        y = np.asarray(y, dtype=np.float64).reshape(-1)
        if len(points) != y.shape[0]:
            raise ValueError("points and targets differ in length")
        subs = list(self.submodels)
        for t, idx in self._per_task(points):
            xs = np.array([points[i].x for i in idx], dtype=np.float64)
            ys = y[idx]
            if isinstance(subs[t], SingleTaskGP):
                subs[t] = subs[t].condition(xs, ys)
            else:
                subs[t] = condition(subs[t], [TaskPoint(0, tuple(r)) for r in xs], ys)
        return replace(
            self,
            submodels=tuple(subs),
            training_points=self.training_points + tuple(points),
            training_y=np.concatenate([self.training_y, y]),
        )


def build_independent_models(
    variant: str,
    graph: CausalGraph,
    density: FittedDAGDensity,
    tasks: Sequence[Sequence[str]],
    *,
    noise_var: float = 1e-3,
    mean_samples: int = 1000,
    pair_samples: int = 100,
    effect_mc: int = 1000,
    master_seed: int = 0,
    domains: Mapping[str, tuple[float, float]] | None = None,
) -> IndependentTaskModels:
    """One unconditioned single-task baseline per task, jointly addressable."""
    task_tuple = tuple(tuple(sorted(t)) for t in tasks)
    subs = tuple(
        fit_single_task(
            variant,
            task_vars,
            np.zeros((0, len(task_vars))),
            np.zeros(0),
            graph=graph,
            density=density,
            noise_var=noise_var,
            mean_samples=mean_samples,
            pair_samples=pair_samples,
            effect_mc=effect_mc,
            master_seed=master_seed,
            domains=domains,
        )
        for task_vars in task_tuple
    )
    return IndependentTaskModels(tasks=task_tuple, submodels=subs, noise_var=noise_var)


def do_baseline(
    density: FittedDAGDensity,
    graph: CausalGraph,
    p: TaskPoint,
    *,
    tasks: Sequence[Sequence[str]],
    mean_samples: int = 1000,
    effect_mc: int = 1000,
    master_seed: int = 0,
    context: Mapping[str, float] | None = None,
) -> float:
    """Do-calculus-only estimate of t_s(x) from observational data.

    Ignores interventional data entirely; with matching seeds it equals the
    prior mean of the causal-prior models by construction.
    """
    task_vars = tuple(sorted(tasks[p.task]))
    measure = build_integrating_measure(density, graph, task_vars, context=context)
    prior = make_causal_prior(density, graph, mc_samples=effect_mc, master_seed=master_seed)
    x = np.array(p.x, dtype=np.float64)
    if measure.is_point_mass:
        block = _full_base_points(measure, x, measure.point_value(x)[None, :])
        return float(prior.mean_value(block[0]))
    seed = derive_seed(master_seed, "measure-mean", task_vars, x)
    samples = measure.sample(x, mean_samples, seed)
    block = _full_base_points(measure, x, samples)
    stream = derive_seed(master_seed, "effect-mean", task_vars, x)
    return float(prior.batch_effects(block, stream)[0].mean())


# ---------------------------------------------------------------------------
# snapshots


def save_snapshot(model: MultiTaskGP, path) -> None:
    """Persist training state and configuration for experiment resumption."""
    gram = model._gram(model.training_points) if model.training_points else np.zeros((0, 0))
    payload = {
        "version": 1,
        "prior_mode": model.prior.mode,
        "tasks": [list(t) for t in model.tasks],
        "noise_var": model.noise_var,
        "mean_samples": model.mean_samples,
        "pair_samples": model.pair_samples,
        "effect_mc": model.prior.mc_samples,
        "master_seed": model.master_seed,
        "training": [
            {"task": p.task, "x": list(p.x), "y": float(y)}
            for p, y in zip(model.training_points, model.training_y)
        ],
        "gram": [[float(v) for v in row] for row in gram],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=1, sort_keys=True)


def load_snapshot(path, graph: CausalGraph, density: FittedDAGDensity) -> MultiTaskGP:
    """Rebuild a model from a snapshot plus the fitted density it used."""
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    if payload.get("version") != 1:
        raise ValueError(f"unsupported snapshot version {payload.get('version')!r}")
    model = build_multitask_model(
        graph,
        density,
        tasks=[tuple(t) for t in payload["tasks"]],
        prior=payload["prior_mode"],
        noise_var=payload["noise_var"],
        mean_samples=payload["mean_samples"],
        pair_samples=payload["pair_samples"],
        effect_mc=payload["effect_mc"],
        master_seed=payload["master_seed"],
    )
    rows = payload["training"]
    if rows:
        points = [TaskPoint(r["task"], tuple(r["x"])) for r in rows]
        model = condition(model, points, [r["y"] for r in rows])
    return model

"""Fitted Gaussian conditionals and per-set integrating measures.

Observational data is summarized by one Gaussian conditional per node given
its graph parents; the output node additionally conditions on its confounded
non-collider partners, whose dependence the shared base function must carry.
Two mean families are provided: affine (maximum likelihood: least-squares
mean, divide-by-n residual variance) and a random-Fourier-feature ridge for
nonlinear mechanisms.  The fitted system doubles as a generative model: any
subset of nodes can be clamped and the rest drawn ancestrally, which is how
interventional quantities are later simulated from purely observational
fits.

The integrating measure of an intervention set factorizes into a do-free
conditional for the confounded variables being intervened on (``factor_a``,
derived in closed form from the implied joint Gaussian for the affine
family, or moment-matched on fitted draws otherwise) and an ancestral
composition of fitted conditionals on the mutilated graph (``factor_b``).
Sampled columns follow the base-function layout: free parents first, then
all confounded non-colliders, each group in lexicographic order.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from .errors import DegenerateDataError, TransferError
from .graph_analysis import (
    BaseSets,
    SetPartition,
    base_function_exists,
    base_sets,
    partition_for_set,
)
from .scm_core import CausalGraph, Dataset, topological_order
from .seeding import derived_rng

__all__ = [
    "ConditionalGaussian",
    "FeatureMapConditional",
    "FittedDAGDensity",
    "GaussianConditional",
    "IntegratingMeasure",
    "fit_conditional_gaussian",
    "fit_conditional_rff_gaussian",
    "fit_dag_density",
    "build_integrating_measure",
    "sample_measure",
]

_SD_FLOOR = 1e-8  # degenerate fits keep a point-mass-limit sd


@dataclass(frozen=True, eq=False)
class ConditionalGaussian:
    """Affine-Gaussian law of one variable given ordered conditioners."""

    target: str
    conditioners: tuple[str, ...]
    weights: np.ndarray
    intercept: float
    noise_sd: float

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64).reshape(len(self.conditioners))
        object.__setattr__(self, "weights", w)
        if self.noise_sd < 0:
            raise ValueError("noise_sd must be nonnegative")

    def mean_from(self, values: Mapping[str, np.ndarray]):
        out = np.asarray(self.intercept, dtype=np.float64)
        for name, w in zip(self.conditioners, self.weights):
            out = out + w * np.asarray(values[name], dtype=np.float64)
        return out

    def mean(self, given: np.ndarray) -> np.ndarray:
        given = np.atleast_2d(np.asarray(given, dtype=np.float64))
        return self.intercept + given @ self.weights

    def to_dict(self) -> dict:
        return {
            "family": "affine",
            "target": self.target,
            "conditioners": list(self.conditioners),
            "weights": [float(w) for w in self.weights],
            "intercept": float(self.intercept),
            "noise_sd": float(self.noise_sd),
        }


def fit_conditional_gaussian(data: Dataset, target: str, conditioners) -> ConditionalGaussian:
    """Least-squares affine fit with maximum-likelihood residual sd.

    Rank deficiency of the design is reported with the names of the
    offending columns: each conditioner column whose residual against the
    preceding columns (intercept included) is negligible is flagged.
    """
    conditioners = tuple(conditioners)
    y = data.column(target)
    n = y.shape[0]
    if n < len(conditioners) + 2:
        raise ValueError(
            f"fitting {target!r} on {len(conditioners)} conditioners needs at least "
            f"{len(conditioners) + 2} rows, got {n}"
        )
    design = np.column_stack([np.ones(n)] + [data.column(c) for c in conditioners])
    bad = []
    for j in range(1, design.shape[1]):
        col = design[:, j]
        prev = design[:, :j]
        coef, *_ = np.linalg.lstsq(prev, col, rcond=None)
        resid = col - prev @ coef
        scale = np.linalg.norm(col) + 1.0
        if np.linalg.norm(resid) <= 1e-8 * scale:
            bad.append(conditioners[j - 1])
    if bad:
        raise DegenerateDataError(target, tuple(bad))
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    resid = y - design @ coef
    sd = float(np.sqrt(np.mean(resid**2)))
    return ConditionalGaussian(
        target=target,
        conditioners=conditioners,
        weights=coef[1:],
        intercept=float(coef[0]),
        noise_sd=max(sd, _SD_FLOOR),
    )


@dataclass(frozen=True, eq=False)
class FeatureMapConditional:
    """Gaussian law whose mean is a random-Fourier-feature ridge fit.

    The feature map is drawn once per (target, conditioners) schema from a
    deterministic stream, so refits on the same schema share features.
    Conditioner columns are centered and scaled before featurization with
    robust statistics (median, interquartile range): ancestral draws of
    nonlinear mechanisms can be heavy-tailed, and a tail-inflated scale
    would squash the bulk of the data below the feature length scale.
    """

    target: str
    conditioners: tuple[str, ...]
    loc: np.ndarray
    scale: np.ndarray
    omega: np.ndarray
    phase: np.ndarray
    weights: np.ndarray
    intercept: float
    noise_sd: float

    def __post_init__(self):
        d = len(self.conditioners)
        m = np.asarray(self.phase).shape[0]
        object.__setattr__(self, "loc", np.asarray(self.loc, dtype=np.float64).reshape(d))
        object.__setattr__(self, "scale", np.asarray(self.scale, dtype=np.float64).reshape(d))
        object.__setattr__(self, "omega", np.asarray(self.omega, dtype=np.float64).reshape(d, m))
        object.__setattr__(self, "phase", np.asarray(self.phase, dtype=np.float64).reshape(m))
        object.__setattr__(self, "weights", np.asarray(self.weights, dtype=np.float64).reshape(m))
        if self.noise_sd < 0:
            raise ValueError("noise_sd must be nonnegative")

    def _features(self, x: np.ndarray) -> np.ndarray:
        z = (x - self.loc) / self.scale
        m = self.phase.shape[0]
        return np.sqrt(2.0 / m) * np.cos(z @ self.omega + self.phase)

    def mean_from(self, values: Mapping[str, np.ndarray]):
        cols = [np.asarray(values[c], dtype=np.float64) for c in self.conditioners]
        shape = np.broadcast_shapes(*[c.shape for c in cols])
        cols = [np.broadcast_to(c, shape) for c in cols]
        if shape and all(c.strides[-1] == 0 for c in cols):
            # every conditioner is constant along the trailing (sample)
            # axis, so featurize one slice and broadcast the result
            x = np.stack([c[..., :1].ravel() for c in cols], axis=1)
            out = self.intercept + self._features(x) @ self.weights
            return np.broadcast_to(out.reshape(shape[:-1] + (1,)), shape)
        x = np.stack([c.ravel() for c in cols], axis=1)
        return (self.intercept + self._features(x) @ self.weights).reshape(shape)

    def mean(self, given: np.ndarray) -> np.ndarray:
        given = np.atleast_2d(np.asarray(given, dtype=np.float64))
        return self.intercept + self._features(given) @ self.weights

    def to_dict(self) -> dict:
        return {
            "family": "fourier",
            "target": self.target,
            "conditioners": list(self.conditioners),
            "loc": [float(v) for v in self.loc],
            "scale": [float(v) for v in self.scale],
            "omega": [[float(v) for v in row] for row in self.omega],
            "phase": [float(v) for v in self.phase],
            "weights": [float(v) for v in self.weights],
            "intercept": float(self.intercept),
            "noise_sd": float(self.noise_sd),
        }


def fit_conditional_rff_gaussian(
    data: Dataset,
    target: str,
    conditioners,
    *,
    n_features: int = 200,
    length_scale: float = 0.5,
    ridge_floor: float = 1e-4,
) -> ConditionalGaussian | FeatureMapConditional:
    """Ridge fit of a random-Fourier-feature mean with ML residual sd.

    Root nodes fall back to the affine fitter (a constant-mean Gaussian
    needs no features).  The ridge weight is matched to the mean squared
    residual over three refinement passes, floored at ``ridge_floor``;
    degenerate conditioner columns are harmless under regularization, so
    unlike the affine fitter no collinearity check is performed.
    """
    conditioners = tuple(conditioners)
    if not conditioners:
        return fit_conditional_gaussian(data, target, conditioners)
    y = data.column(target)
    n = y.shape[0]
    if n < len(conditioners) + 2:
        raise ValueError(
            f"fitting {target!r} on {len(conditioners)} conditioners needs at least "
            f"{len(conditioners) + 2} rows, got {n}"
        )
    x = np.column_stack([data.column(c) for c in conditioners])
    loc = np.median(x, axis=0)
    q75, q25 = np.percentile(x, [75.0, 25.0], axis=0)
    scale = (q75 - q25) / 1.349  # matches the sd for a Gaussian column
    fallback = x.std(axis=0)
    scale = np.where(scale < 1e-12, fallback, scale)
    scale = np.where(scale < 1e-12, 1.0, scale)
    rng = derived_rng(0, "fourier-features", target, conditioners)
    omega = rng.standard_normal((len(conditioners), n_features)) / length_scale
    phase = rng.uniform(0.0, 2.0 * np.pi, n_features)
    mu_y = float(y.mean())
    sd_y = float(y.std()) or 1.0
    yz = (y - mu_y) / sd_y
    phi = np.sqrt(2.0 / n_features) * np.cos((x - loc) / scale @ omega + phase)
    gram = phi.T @ phi
    lam = 0.1
    for _ in range(3):
        weights = np.linalg.solve(gram + lam * np.eye(n_features), phi.T @ yz)
        lam = max(float(np.mean((yz - phi @ weights) ** 2)), ridge_floor)
    sd = float(np.sqrt(np.mean((yz - phi @ weights) ** 2))) * sd_y
    return FeatureMapConditional(
        target=target,
        conditioners=conditioners,
        loc=loc,
        scale=scale,
        omega=omega,
        phase=phase,
        weights=weights * sd_y,
        intercept=mu_y,
        noise_sd=max(sd, _SD_FLOOR),
    )


@dataclass(frozen=True, eq=False)
class FittedDAGDensity:
    """One fitted conditional per node, keyed by the node name."""

    graph: CausalGraph
    conditionals: Mapping[str, ConditionalGaussian | FeatureMapConditional]

    def __post_init__(self):
        for v in self.graph.nodes:
            if v not in self.conditionals:
                raise ValueError(f"missing conditional for {v!r}")

    def ancestral_draws(
        self,
        fixed: Mapping[str, np.ndarray | float],
        shape: tuple[int, ...],
        rng: np.random.Generator,
    ) -> dict[str, np.ndarray]:
        """Draw every non-fixed node in topological order.

        Fixed nodes are broadcast to ``shape`` and treated as constants,
        which realizes both do-interventions and clamped conditioning by
        substitution on the fitted system.  The output is drawn last: its
        conditional may reach confounded non-colliders that graph edges
        alone would not force ahead of it.
        """
        order = [v for v in topological_order(self.graph) if v != self.graph.output]
        order.append(self.graph.output)
        values: dict[str, np.ndarray] = {}
        for node in order:
            if node in fixed:
                values[node] = np.broadcast_to(
                    np.asarray(fixed[node], dtype=np.float64), shape
                )
                continue
            law = self.conditionals[node]
            mean = np.broadcast_to(law.mean_from(values), shape)
            values[node] = mean + rng.normal(0.0, law.noise_sd, shape)
        return values

    def joint_gaussian(self) -> tuple[tuple[str, ...], np.ndarray, np.ndarray]:
        """Implied joint of the fitted affine system, in topological order."""
        order = topological_order(self.graph)
        index = {v: i for i, v in enumerate(order)}
        k = len(order)
        weights = np.zeros((k, k))
        intercepts = np.zeros(k)
        noise_var = np.zeros(k)
        for v in order:
            law = self.conditionals[v]
            if not isinstance(law, ConditionalGaussian):
                raise TypeError(
                    "implied joint is closed-form only for affine conditionals; "
                    f"{v!r} uses {type(law).__name__}"
                )
            i = index[v]
            intercepts[i] = law.intercept
            noise_var[i] = law.noise_sd**2
            for c, w in zip(law.conditioners, law.weights):
                weights[i, index[c]] = w
        transport = np.linalg.inv(np.eye(k) - weights)
        mu = transport @ intercepts
        cov = transport @ np.diag(noise_var) @ transport.T
        return order, mu, cov

    def to_dict(self) -> dict:
        return {
            "nodes": list(self.graph.nodes),
            "conditionals": {v: self.conditionals[v].to_dict() for v in self.graph.nodes},
        }


def fit_dag_density(
    data: Dataset,
    graph: CausalGraph,
    fitter: Callable[[Dataset, str, tuple], ConditionalGaussian] = fit_conditional_gaussian,
) -> FittedDAGDensity:
    """Fit per-node conditionals from observational data.

    Every node conditions on its graph parents; the output additionally
    conditions on its confounded non-collider partners.  The shared base
    function takes those partners as arguments (with hidden common causes
    the estimand is the output given do(parents) and the confounded
    covariates), so a parents-only fit of the output would be constant in
    them and the confounder structure would be lost.  The partners are
    never descendants of the output, so the fitted system stays acyclic.
    ``fitter`` is the conditional-family hook; the default is the
    affine-Gaussian family.
    """
    base = base_sets(graph)
    output_parents = set(graph.parents(graph.output))
    extra = tuple(v for v in base.confounded_noncolliders if v not in output_parents)
    conditionals = {}
    for v in graph.nodes:
        conds = tuple(graph.parents(v))
        if v == graph.output:
            conds = conds + extra
        conditionals[v] = fitter(data, v, conds)
    return FittedDAGDensity(graph=graph, conditionals=conditionals)


@dataclass(frozen=True, eq=False)
class GaussianConditional:
    """Multivariate Gaussian law of ``targets`` given ``given`` (affine)."""

    targets: tuple[str, ...]
    given: tuple[str, ...]
    intercept: np.ndarray
    coef: np.ndarray
    cov: np.ndarray
    _chol: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        t, g = len(self.targets), len(self.given)
        object.__setattr__(self, "intercept", np.asarray(self.intercept, dtype=np.float64).reshape(t))
        object.__setattr__(self, "coef", np.asarray(self.coef, dtype=np.float64).reshape(t, g))
        cov = np.asarray(self.cov, dtype=np.float64).reshape(t, t)
        object.__setattr__(self, "cov", cov)
        try:
            chol = np.linalg.cholesky(cov)
        except np.linalg.LinAlgError:
            chol = np.linalg.cholesky(cov + 1e-12 * np.eye(t))
        object.__setattr__(self, "_chol", chol)

    def mean(self, given_values: np.ndarray) -> np.ndarray:
        given_values = np.asarray(given_values, dtype=np.float64).reshape(-1, len(self.given))
        return self.intercept + given_values @ self.coef.T

    def sample(self, given_values: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        mean = self.mean(given_values)
        z = rng.standard_normal((mean.shape[0], len(self.targets)))
        return mean + z @ self._chol.T

    def params_bytes(self) -> bytes:
        return b"|".join(
            [
                ",".join(self.targets).encode(),
                ",".join(self.given).encode(),
                self.intercept.tobytes(),
                self.coef.tobytes(),
                self.cov.tobytes(),
            ]
        )


def _conditional_from_joint(
    names: tuple[str, ...],
    mu: np.ndarray,
    cov: np.ndarray,
    targets: tuple[str, ...],
    given: tuple[str, ...],
) -> GaussianConditional:
    idx = {v: i for i, v in enumerate(names)}
    ti = [idx[v] for v in targets]
    gi = [idx[v] for v in given]
    s_tt = cov[np.ix_(ti, ti)]
    if not gi:
        return GaussianConditional(
            targets=targets, given=(), intercept=mu[ti], coef=np.zeros((len(ti), 0)), cov=s_tt
        )
    s_tg = cov[np.ix_(ti, gi)]
    s_gg = cov[np.ix_(gi, gi)]
    solve = np.linalg.solve(s_gg, s_tg.T).T  # s_tg @ s_gg^-1
    intercept = mu[ti] - solve @ mu[gi]
    cond_cov = s_tt - solve @ s_tg.T
    cond_cov = (cond_cov + cond_cov.T) / 2.0
    return GaussianConditional(targets=targets, given=given, intercept=intercept, coef=solve, cov=cond_cov)


_FACTOR_A_DRAWS = 8192


def _conditional_from_draws(
    density: FittedDAGDensity,
    targets: tuple[str, ...],
    given: tuple[str, ...],
    n: int = _FACTOR_A_DRAWS,
) -> GaussianConditional:
    """Affine-Gaussian fit of p(targets | given) on fitted-density draws.

    Non-affine conditional families have no closed-form implied joint, so
    the do-free conditional of the intervened-confounded block is moment
    matched on a deterministic ancestral sample (least-squares mean, ML
    residual covariance).
    """
    rng = derived_rng(0, "factor-a", targets, given)
    draws = density.ancestral_draws({}, (n,), rng)
    t = np.column_stack([draws[v] for v in targets])
    if given:
        design = np.column_stack([np.ones(n)] + [draws[v] for v in given])
        coef, *_ = np.linalg.lstsq(design, t, rcond=None)
        resid = t - design @ coef
        intercept = coef[0]
        beta = coef[1:].T
    else:
        intercept = t.mean(axis=0)
        resid = t - intercept
        beta = np.zeros((len(targets), 0))
    cov = resid.T @ resid / n
    cov = (cov + cov.T) / 2.0 + _SD_FLOOR**2 * np.eye(len(targets))
    return GaussianConditional(targets=targets, given=given, intercept=intercept, coef=beta, cov=cov)


@dataclass(frozen=True, eq=False)
class IntegratingMeasure:
    """Sampler for the integration variables of one intervention set.

    ``factor_a`` resamples the intervened-confounded block from its do-free
    conditional; ``factor_b`` is the fitted ancestral sampler on the graph
    mutilated by the intervention (and by any fixed context variables).
    Sample columns are (free parents, then all confounded non-colliders),
    lexicographic within each group.
    """

    density: FittedDAGDensity
    graph: CausalGraph
    intervention_set: tuple[str, ...]
    base: BaseSets
    partition: SetPartition
    context: tuple[tuple[str, float], ...]
    factor_a: GaussianConditional | None

    @property
    def columns(self) -> tuple[str, ...]:
        return self.partition.free_parents + self.base.confounded_noncolliders

    @property
    def is_point_mass(self) -> bool:
        fixed = {name for name, _ in self.context}
        return not self.base.confounded_noncolliders and all(
            v in fixed for v in self.partition.free_parents
        )

    def _fixed_values(self, x: np.ndarray) -> dict[str, float]:
        x = np.asarray(x, dtype=np.float64).reshape(len(self.intervention_set))
        fixed = {v: float(val) for v, val in zip(self.intervention_set, x)}
        fixed.update({name: value for name, value in self.context})
        return fixed

    def sample(self, x: np.ndarray, n: int, seed: int) -> np.ndarray:
        """n rows of (free parents, confounded non-colliders) given do(X_s=x)."""
        fixed = self._fixed_values(x)
        rng = np.random.default_rng(seed)
        draws = self.density.ancestral_draws(fixed, (n,), rng)
        columns: dict[str, np.ndarray] = {}
        for v in self.partition.free_parents:
            columns[v] = draws[v]
        for v in self.partition.free_confounded:
            columns[v] = draws[v]
        if self.factor_a is not None:
            given = (
                np.column_stack([draws[v] for v in self.partition.free_confounded])
                if self.partition.free_confounded
                else np.zeros((n, 0))
            )
            resampled = self.factor_a.sample(given, rng)
            for j, v in enumerate(self.partition.intervened_confounded):
                columns[v] = resampled[:, j]
        if not self.columns:
            return np.zeros((n, 0))
        return np.column_stack([columns[v] for v in self.columns])

    def point_value(self, x: np.ndarray) -> np.ndarray:
        """The single sample row of a point-mass measure."""
        if not self.is_point_mass:
            raise ValueError("measure is not a point mass")
        fixed = self._fixed_values(x)
        return np.array([fixed[v] for v in self.columns], dtype=np.float64)

    def analytic_moments(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Mean and covariance of the sample columns by affine propagation.

        Serves as the closed-form cross-check of the sampler: the mutilated
        fitted system is linear-Gaussian, so the marginal moments of
        ``factor_b``'s columns follow by propagation, and ``factor_a``'s
        block enters through its affine map plus its conditional covariance.
        """
        fixed = self._fixed_values(x)
        order = topological_order(self.graph)
        index = {v: i for i, v in enumerate(order)}
        k = len(order)
        weights = np.zeros((k, k))
        intercepts = np.zeros(k)
        noise_var = np.zeros(k)
        for v in order:
            i = index[v]
            if v in fixed:
                intercepts[i] = fixed[v]
                continue
            law = self.density.conditionals[v]
            if not isinstance(law, ConditionalGaussian):
                raise TypeError(
                    "analytic moments exist only for affine conditionals; "
                    f"{v!r} uses {type(law).__name__}"
                )
            intercepts[i] = law.intercept
            noise_var[i] = law.noise_sd**2
            for c, w in zip(law.conditioners, law.weights):
                weights[i, index[c]] = w
        transport = np.linalg.inv(np.eye(k) - weights)
        mu = transport @ intercepts
        cov = transport @ np.diag(noise_var) @ transport.T

        cols = self.columns
        m = len(cols)
        free = self.partition.free_parents + self.partition.free_confounded
        lin = np.zeros((m, k))
        const = np.zeros(m)
        extra = np.zeros((m, m))
        for r, v in enumerate(cols):
            if v in free:
                lin[r, index[v]] = 1.0
            else:  # intervened-confounded row: affine in the free confounded block
                j = self.partition.intervened_confounded.index(v)
                const[r] = self.factor_a.intercept[j]
                for g, name in enumerate(self.factor_a.given):
                    lin[r, index[name]] = self.factor_a.coef[j, g]
        if self.factor_a is not None:
            rows = [cols.index(v) for v in self.partition.intervened_confounded]
            extra[np.ix_(rows, rows)] = self.factor_a.cov
        mean = lin @ mu + const
        covariance = lin @ cov @ lin.T + extra
        return mean, covariance


def build_integrating_measure(
    density: FittedDAGDensity,
    graph: CausalGraph,
    x_s,
    context: Mapping[str, float] | None = None,
) -> IntegratingMeasure:
    """Assemble the measure for an intervention set.

    ``context`` optionally pins free parents at fixed values (they are then
    excluded from integration); with every free parent pinned and no
    confounded variables the measure degenerates to a point mass, which is
    the exact-collapse path of the operator.
    """
    xs = tuple(sorted(set(x_s)))
    report = base_function_exists(graph)
    if not report.exists and xs not in report.transferable_sets:
        raise TransferError(
            f"intervention set {xs} admits no shared-function transfer "
            f"(blocking nodes: {list(report.blocking_nodes)})"
        )
    base = base_sets(graph)
    part = partition_for_set(base, xs)
    context_items = tuple(sorted((context or {}).items()))
    for name, _ in context_items:
        if name not in part.free_parents:
            raise ValueError(f"context variable {name!r} is not a free parent of the set")
    factor_a = None
    if part.intervened_confounded:
        affine = all(
            isinstance(density.conditionals[v], ConditionalGaussian) for v in graph.nodes
        )
        if affine:
            names, mu, cov = density.joint_gaussian()
            factor_a = _conditional_from_joint(
                names, mu, cov, part.intervened_confounded, part.free_confounded
            )
        else:
            factor_a = _conditional_from_draws(
                density, part.intervened_confounded, part.free_confounded
            )
    return IntegratingMeasure(
        density=density,
        graph=graph,
        intervention_set=xs,
        base=base,
        partition=part,
        context=context_items,
        factor_a=factor_a,
    )


def sample_measure(measure: IntegratingMeasure, x, n: int, seed: int) -> np.ndarray:
    """Draw ``n`` integration samples; see ``IntegratingMeasure.sample``."""
    return measure.sample(np.asarray(x, dtype=np.float64), n, seed)

"""Do-calculus prior over the shared base function.

The base function f(b) = E[outcome | do(parents = v), confounded = c] is
estimated by ancestral simulation of the fitted observational density on the
mutilated graph: parents are clamped by do, confounded non-colliders by
substitution, everything else is drawn from its fitted conditional.  The
prior over f takes the estimated mean as its mean function and adds the
estimated standard deviation as a rank-1 term on top of a fixed RBF kernel:

    m(b) = f_hat(b)
    K(b, b') = sigma_f^2 exp(-||b - b'||^2 / (2 l^2)) + sigma_hat(b) sigma_hat(b')

with l = 1 and sigma_f^2 = 1 held fixed rather than optimized.  A
``standard`` variant of the same parameter object (zero mean, RBF only)
backs the non-causal model baselines.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .density_models import FittedDAGDensity
from .graph_analysis import base_sets
from .scm_core import CausalGraph
from .seeding import derive_seed

__all__ = [
    "BasePoint",
    "CausalPriorParams",
    "estimate_do_effect",
    "make_causal_prior",
    "make_standard_prior",
    "causal_mean",
    "causal_kernel",
    "rbf_kernel_value",
]


@dataclass(frozen=True)
class BasePoint:
    """Input of the base function: parent values then confounded values.

    Both blocks are in lexicographic variable order; concatenation gives the
    vector the kernel operates on.
    """

    parent_values: tuple[float, ...]
    confounded_values: tuple[float, ...] = ()

    def as_array(self) -> np.ndarray:
        return np.array(self.parent_values + self.confounded_values, dtype=np.float64)


def _as_base_array(b) -> np.ndarray:
    if isinstance(b, BasePoint):
        return b.as_array()
    return np.asarray(b, dtype=np.float64).reshape(-1)


def _batch_do_effects(
    density: FittedDAGDensity,
    graph: CausalGraph,
    points: np.ndarray,
    n_mc: int,
    rng: np.random.Generator,
) -> tuple[np.ndarray, np.ndarray]:
    """Simulated do-effect mean and sd for each row of ``points``.

    All rows share one draw block: the fitted simulator runs on (m, n_mc)
    arrays with the base coordinates broadcast down the Monte Carlo axis.
    """
    base = base_sets(graph)
    names = base.parents + base.confounded_noncolliders
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    if points.shape[1] != len(names):
        raise ValueError(f"base points must have {len(names)} coordinates")
    m = points.shape[0]
    fixed = {name: points[:, j][:, None] for j, name in enumerate(names)}
    draws = density.ancestral_draws(fixed, (m, n_mc), rng)
    y = draws[graph.output]
    return y.mean(axis=1), y.std(axis=1, ddof=1)


def estimate_do_effect(
    density: FittedDAGDensity,
    graph: CausalGraph,
    b,
    n_mc: int,
    seed: int,
) -> tuple[float, float]:
    """Monte Carlo estimate of the base function's mean and sd at ``b``."""
    if n_mc < 2:
        raise ValueError("n_mc must be at least 2")
    arr = _as_base_array(b)
    rng = np.random.default_rng(seed)
    means, sds = _batch_do_effects(density, graph, arr[None, :], n_mc, rng)
    return float(means[0]), float(sds[0])


@dataclass(frozen=True, eq=False)
class CausalPriorParams:
    """Prior mean/sd estimators plus the fixed kernel hyperparameters.

    ``mode`` selects the causal prior (do-calculus mean and sd) or the
    standard one (zero mean, no rank-1 term).  Point evaluations are
    memoized by the byte image of ``b`` so repeated kernel calls inside MC
    loops stay cheap and bit-stable.
    """

    mode: str
    density: FittedDAGDensity | None
    graph: CausalGraph | None
    mc_samples: int
    master_seed: int
    lengthscale: float = 1.0
    signal_var: float = 1.0
    _memo: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.mode not in ("causal", "standard"):
            raise ValueError("mode must be 'causal' or 'standard'")
        if self.mode == "causal" and (self.density is None or self.graph is None):
            raise ValueError("causal mode needs a fitted density and graph")

    def _point_estimates(self, arr: np.ndarray) -> tuple[float, float]:
        if self.mode == "standard":
            return 0.0, 0.0
        key = arr.tobytes()
        hit = self._memo.get(key)
        if hit is None:
            seed = derive_seed(self.master_seed, "base-effect", key)
            hit = estimate_do_effect(self.density, self.graph, arr, self.mc_samples, seed)
            self._memo[key] = hit
        return hit

    def mean_value(self, b) -> float:
        return self._point_estimates(_as_base_array(b))[0]

    def sd_value(self, b) -> float:
        return self._point_estimates(_as_base_array(b))[1]

    def batch_effects(self, points: np.ndarray, stream: int) -> tuple[np.ndarray, np.ndarray]:
        """Unmemoized batch estimates on a caller-chosen stream."""
        if self.mode == "standard":
            m = np.atleast_2d(points).shape[0]
            return np.zeros(m), np.zeros(m)
        rng = np.random.default_rng(stream)
        return _batch_do_effects(self.density, self.graph, points, self.mc_samples, rng)


def make_causal_prior(
    density: FittedDAGDensity,
    graph: CausalGraph,
    mc_samples: int = 1000,
    master_seed: int = 0,
) -> CausalPriorParams:
    return CausalPriorParams(
        mode="causal",
        density=density,
        graph=graph,
        mc_samples=mc_samples,
        master_seed=master_seed,
    )


def make_standard_prior(mc_samples: int = 1000, master_seed: int = 0) -> CausalPriorParams:
    return CausalPriorParams(
        mode="standard",
        density=None,
        graph=None,
        mc_samples=mc_samples,
        master_seed=master_seed,
    )


def rbf_kernel_value(a: np.ndarray, b: np.ndarray, lengthscale: float, signal_var: float) -> float:
    diff = np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64)
    return float(signal_var * np.exp(-float(diff @ diff) / (2.0 * lengthscale**2)))


def causal_mean(params: CausalPriorParams, b) -> float:
    """Prior mean m(b); memoized per point."""
    return params.mean_value(b)


def causal_kernel(params: CausalPriorParams, b, b2) -> float:
    """Prior covariance K(b, b') = RBF + sigma_hat(b) sigma_hat(b')."""
    a1 = _as_base_array(b)
    a2 = _as_base_array(b2)
    value = rbf_kernel_value(a1, a2, params.lengthscale, params.signal_var)
    if params.mode == "causal":
        value += params.sd_value(a1) * params.sd_value(a2)
    return value

"""Pure numpy implementation of the pairwise RBF reductions."""

import numpy as np
from scipy.spatial.distance import cdist


def pair_mean_rbf(a: np.ndarray, b: np.ndarray, inv_two_l2: float, variance: float) -> float:
    sq = cdist(a, b, "sqeuclidean")
    return float(variance * np.exp(-inv_two_l2 * sq).mean())


def self_mean_rbf(a: np.ndarray, inv_two_l2: float, variance: float) -> float:
    return pair_mean_rbf(a, a, inv_two_l2, variance)

"""Shared fixtures: small structural models and fitted densities."""

import numpy as np
import pytest

from daggp import (
    CausalGraph,
    ConditionalGaussian,
    FittedDAGDensity,
    NoiseLaw,
    SCM,
    builtin_scm,
    fit_dag_density,
    sample,
)


def make_affine_chain():
    """X -> Z -> Y with known affine mechanisms and Gaussian noise."""
    graph = CausalGraph(
        nodes=("X", "Z", "Y"),
        directed_edges=(("X", "Z"), ("Z", "Y")),
        confounder_pairs=(),
        output="Y",
        manipulable=frozenset({"X", "Z"}),
        non_manipulable=frozenset(),
    )
    equations = {
        "X": lambda p, e: 1.0 + e["eps_X"],
        "Z": lambda p, e: 3.0 + 0.5 * p["X"] + e["eps_Z"],
        "Y": lambda p, e: -1.0 + 2.0 * p["Z"] + e["eps_Y"],
    }
    laws = {
        "eps_X": NoiseLaw("normal", (2.0,)),
        "eps_Z": NoiseLaw("normal", (1.0,)),
        "eps_Y": NoiseLaw("normal", (0.5,)),
    }
    scm = SCM(
        graph=graph,
        equations=equations,
        exogenous_laws=laws,
        node_noise={"X": ("eps_X",), "Z": ("eps_Z",), "Y": ("eps_Y",)},
    )
    return scm


def make_affine_chain_density():
    """The affine chain's exact conditionals as a hand-built fitted density."""
    scm = make_affine_chain()
    conditionals = {
        "X": ConditionalGaussian("X", (), np.zeros(0), 1.0, 2.0),
        "Z": ConditionalGaussian("Z", ("X",), np.array([0.5]), 3.0, 1.0),
        "Y": ConditionalGaussian("Y", ("Z",), np.array([2.0]), -1.0, 0.5),
    }
    return FittedDAGDensity(graph=scm.graph, conditionals=conditionals)


def make_binary_chain():
    """X1 -> X2 -> Y, all Bernoulli; conditional means are affine exactly."""
    graph = CausalGraph(
        nodes=("X1", "X2", "Y"),
        directed_edges=(("X1", "X2"), ("X2", "Y")),
        confounder_pairs=(),
        output="Y",
        manipulable=frozenset({"X1", "X2"}),
        non_manipulable=frozenset(),
    )
    equations = {
        "X1": lambda p, e: (e["u1"] < 0.6).astype(np.float64),
        "X2": lambda p, e: (e["u2"] < 0.2 + 0.5 * p["X1"]).astype(np.float64),
        "Y": lambda p, e: (e["u3"] < 0.15 + 0.6 * p["X2"]).astype(np.float64),
    }
    laws = {name: NoiseLaw("uniform", (0.0, 1.0)) for name in ("u1", "u2", "u3")}
    scm = SCM(
        graph=graph,
        equations=equations,
        exogenous_laws=laws,
        node_noise={"X1": ("u1",), "X2": ("u2",), "Y": ("u3",)},
    )
    return scm


@pytest.fixture(scope="session")
def dag1_bundle():
    return builtin_scm("dag1")


@pytest.fixture(scope="session")
def dag2_bundle():
    return builtin_scm("dag2")


@pytest.fixture(scope="session")
def dag3_bundle():
    return builtin_scm("dag3")


@pytest.fixture(scope="session")
def dag1_density(dag1_bundle):
    """Affine-family fit of dag1 on a fixed observational sample."""
    data = sample(dag1_bundle.scm, 400, seed=7)
    return fit_dag_density(data, dag1_bundle.scm.graph)


@pytest.fixture(scope="session")
def dag2_density(dag2_bundle):
    data = sample(dag2_bundle.scm, 400, seed=7)
    return fit_dag_density(data, dag2_bundle.scm.graph)

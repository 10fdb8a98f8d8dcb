"""Structural models: graphs, sampling, interventions, and the grid oracle."""

import itertools

import numpy as np
import pytest

from daggp import (
    CausalGraph,
    Dataset,
    GraphStructureError,
    InterventionAssignment,
    InterventionError,
    McEstimate,
    NoiseLaw,
    apply_do,
    builtin_scm,
    manifest_hash,
    sample,
    scm_manifest,
    topological_order,
    true_function_grid,
    true_intervention_function,
    validate_domains,
)

from conftest import make_affine_chain, make_binary_chain


# ---------------------------------------------------------------------------
# graph validation


def _graph(**overrides):
    base = dict(
        nodes=("X", "Z", "Y"),
        directed_edges=(("X", "Z"), ("Z", "Y")),
        confounder_pairs=(),
        output="Y",
        manipulable=frozenset({"X", "Z"}),
        non_manipulable=frozenset(),
    )
    base.update(overrides)
    return CausalGraph(**base)


def test_graph_rejects_duplicates_and_bad_edges():
    with pytest.raises(GraphStructureError):
        _graph(nodes=("X", "X", "Y"))
    with pytest.raises(GraphStructureError):
        _graph(directed_edges=(("X", "W"),))
    with pytest.raises(GraphStructureError):
        _graph(directed_edges=(("X", "X"),))
    with pytest.raises(GraphStructureError):
        _graph(directed_edges=(("X", "Z"), ("Z", "X")))


def test_graph_rejects_bad_roles():
    with pytest.raises(GraphStructureError):
        _graph(output="W")
    with pytest.raises(GraphStructureError):
        _graph(manipulable=frozenset({"X", "Y"}))
    with pytest.raises(GraphStructureError):
        _graph(non_manipulable=frozenset({"X"}))
    with pytest.raises(GraphStructureError):
        _graph(confounder_pairs=(("X", "X"),))
    with pytest.raises(GraphStructureError):
        _graph(confounder_pairs=(("X", "W"),))


def test_confounder_pairs_are_canonicalized():
    g = _graph(confounder_pairs=(("Z", "X"),))
    assert g.confounder_pairs == (("X", "Z"),)
    assert g.confounded_with("X") == ("Z",)
    assert g.confounded_with("Y") == ()


def test_parents_children_sorted():
    g = builtin_scm("dag2").scm.graph
    assert g.parents("Y") == ("D", "E")
    assert g.parents("E") == ("A", "C")
    assert g.children("C") == ("D", "E")
    assert g.children("Y") == ()


def test_topological_order_is_deterministic_and_valid():
    g = builtin_scm("dag3").scm.graph
    order = topological_order(g)
    assert order == topological_order(g)
    pos = {v: i for i, v in enumerate(order)}
    for parent, child in g.directed_edges:
        assert pos[parent] < pos[child]
    # roots come out in node-declaration order
    chain = _graph(directed_edges=())
    assert topological_order(chain) == ("X", "Z", "Y")


# ---------------------------------------------------------------------------
# assignments and datasets


def test_intervention_assignment_sorts_variables():
    a = InterventionAssignment(("Z", "X"), (1.0, 2.0))
    assert a.variables == ("X", "Z")
    assert a.values == (2.0, 1.0)
    assert a.as_dict() == {"X": 2.0, "Z": 1.0}
    assert a == InterventionAssignment(("X", "Z"), (2.0, 1.0))


def test_intervention_assignment_validation():
    with pytest.raises(InterventionError):
        InterventionAssignment(("X", "X"), (1.0, 2.0))
    with pytest.raises(InterventionError):
        InterventionAssignment(("X",), (1.0, 2.0))


def test_dataset_columns_and_csv_round_trip(tmp_path):
    data = sample(make_affine_chain(), 25, seed=3)
    assert data.kind == "observational"
    assert data.n == 25
    np.testing.assert_array_equal(data.values(("Z", "X")),
                                  np.column_stack([data.column("Z"), data.column("X")]))
    path = tmp_path / "rows.csv"
    data.to_csv(path)
    loaded = Dataset.from_csv(path)
    assert loaded.columns == data.columns
    np.testing.assert_array_equal(loaded.rows, data.rows)


def test_dataset_shape_validation():
    with pytest.raises(ValueError):
        Dataset(columns=("a", "b"), rows=np.zeros((3, 3)))


def test_mc_estimate_fields():
    est = McEstimate(1.5, 0.1)
    assert est.value == 1.5 and est.stderr == 0.1
    assert tuple(est) == (1.5, 0.1)


def test_validate_domains():
    domains = {"X": (-1.0, 1.0)}
    validate_domains(InterventionAssignment(("X",), (1.0,)), domains)
    with pytest.raises(InterventionError):
        validate_domains(InterventionAssignment(("X",), (1.5,)), domains)
    with pytest.raises(InterventionError):
        validate_domains(InterventionAssignment(("Z",), (0.0,)), domains)


# ---------------------------------------------------------------------------
# sampling and mutilation


def test_sample_is_deterministic_per_seed():
    scm = make_affine_chain()
    a = sample(scm, 40, seed=11)
    b = sample(scm, 40, seed=11)
    c = sample(scm, 40, seed=12)
    np.testing.assert_array_equal(a.rows, b.rows)
    assert not np.array_equal(a.rows, c.rows)
    assert a.columns == scm.graph.nodes


def test_apply_do_clamps_and_cuts():
    scm = make_affine_chain()
    cut = apply_do(scm, InterventionAssignment(("Z",), (4.0,)))
    assert ("X", "Z") not in cut.graph.directed_edges
    data = sample(cut, 200, seed=5)
    # mutilation soundness: the clamped node has zero empirical variance
    assert float(data.column("Z").std()) == 0.0
    assert float(data.column("Z")[0]) == 4.0
    # downstream responds to the clamp: Y mean tracks -1 + 2 * 4
    assert abs(float(data.column("Y").mean()) - 7.0) < 0.2


def test_apply_do_validation():
    scm = make_affine_chain()
    with pytest.raises(InterventionError):
        apply_do(scm, InterventionAssignment(("W",), (0.0,)))
    with pytest.raises(InterventionError):
        apply_do(scm, InterventionAssignment(("Y",), (0.0,)))
    dag3 = builtin_scm("dag3").scm
    with pytest.raises(InterventionError):
        apply_do(dag3, InterventionAssignment(("age",), (60.0,)))
    allowed = apply_do(dag3, InterventionAssignment(("age",), (60.0,)), require_manipulable=False)
    assert float(sample(allowed, 5, seed=0).column("age").std()) == 0.0


def test_apply_do_drops_clamped_confounder_pairs():
    scm = builtin_scm("dag2").scm
    cut = apply_do(scm, InterventionAssignment(("B",), (0.0,)))
    assert cut.graph.confounder_pairs == (("A", "Y"),)
    assert ("B", "Y") not in cut.shared_exogenous
    # the surviving pair still correlates A and Y through the shared stream
    assert ("A", "Y") in cut.shared_exogenous


# ---------------------------------------------------------------------------
# builtins and manifests


def test_builtin_names_and_domains():
    for name in ("dag1", "dag2", "dag3"):
        bundle = builtin_scm(name)
        assert bundle.name == name
        for v in bundle.domains:
            assert v in bundle.scm.graph.manipulable
    with pytest.raises(ValueError):
        builtin_scm("dag4")


def test_builtin_noise_overrides():
    default = builtin_scm("dag1")
    scaled = builtin_scm("dag1", {"eps_Y": 0.001})
    assert scaled.scm.exogenous_laws["eps_Y"].params[0] == 0.001
    assert default.scm.exogenous_laws["eps_Y"].params[0] != 0.001
    with pytest.raises(ValueError):
        builtin_scm("dag1", {"eps_Q": 1.0})
    with pytest.raises(ValueError):
        builtin_scm("dag1", {"eps_Y": 0.0})


def test_noise_law_validation():
    with pytest.raises(ValueError):
        NoiseLaw("lognormal", (1.0,))
    with pytest.raises(ValueError):
        NoiseLaw("normal", (1.0, 2.0))
    with pytest.raises(ValueError):
        NoiseLaw("uniform", (1.0,))


def test_manifest_hash_is_stable_and_discriminating():
    m1 = scm_manifest(builtin_scm("dag1"))
    assert manifest_hash(m1) == manifest_hash(scm_manifest(builtin_scm("dag1")))
    assert manifest_hash(m1) != manifest_hash(scm_manifest(builtin_scm("dag2")))
    assert m1["output"] == "Y" and "noise" in m1 and "domains" in m1


# ---------------------------------------------------------------------------
# oracle estimates


def test_do_z_zero_on_near_noiseless_dag1():
    # cos(0) - exp(0) = 0 at do(Z=0) once noise is negligible
    quiet = builtin_scm("dag1", {"eps_X": 1e-9, "eps_Z": 1e-9, "eps_Y": 1e-9})
    est = true_intervention_function(quiet.scm, InterventionAssignment(("Z",), (0.0,)), 100, seed=1)
    assert abs(est.value) < 1e-6


def test_dag1_grid_oracle_matches_closed_form():
    bundle = builtin_scm("dag1")
    sigma = bundle.scm.exogenous_laws["eps_Z"].params[0]

    z = np.array([[-2.0], [0.0], [1.0], [3.0], [8.0]])
    means, errs = true_function_grid(bundle.scm, ("Z",), z, 120_000, seed=4)
    expected = np.cos(z[:, 0]) - np.exp(-z[:, 0] / 20.0)
    np.testing.assert_array_less(np.abs(means - expected), 5.0 * errs)

    # do(X=x): Z = exp(-x) + eps, so cos and exp push forward through the
    # Gaussian characteristic function and moment generating function
    x = np.array([[-1.0], [0.0], [2.0]])
    means_x, errs_x = true_function_grid(bundle.scm, ("X",), x, 120_000, seed=4)
    mu = np.exp(-x[:, 0])
    expected_x = np.exp(-sigma**2 / 2.0) * np.cos(mu) - np.exp(sigma**2 / 800.0) * np.exp(-mu / 20.0)
    np.testing.assert_array_less(np.abs(means_x - expected_x), 5.0 * errs_x)


def test_rule3_consistency_on_dag1_simulator():
    bundle = builtin_scm("dag1")
    rng = np.random.default_rng(0)
    for _ in range(20):
        x = float(rng.uniform(-5.0, 5.0))
        z = float(rng.uniform(-5.0, 20.0))
        both = true_intervention_function(
            bundle.scm, InterventionAssignment(("X", "Z"), (x, z)), 4000, seed=9
        )
        single = true_intervention_function(
            bundle.scm, InterventionAssignment(("Z",), (z,)), 4000, seed=10
        )
        joint_se = np.hypot(both.stderr, single.stderr)
        assert abs(both.value - single.value) <= 3.0 * joint_se


def test_mc_error_shrinks_with_budget_on_dag2():
    bundle = builtin_scm("dag2")
    a = InterventionAssignment(("D", "E"), (0.0, 0.0))
    small = true_intervention_function(bundle.scm, a, 1000, seed=2)
    large = true_intervention_function(bundle.scm, a, 16000, seed=2)
    ratio = small.stderr / large.stderr
    assert 2.5 < ratio < 6.5  # expected 4 = sqrt(16000/1000)


def test_binary_chain_joint_matches_enumeration():
    scm = make_binary_chain()
    data = sample(scm, 100_000, seed=21)
    rows = data.rows.astype(int)
    counts = {}
    for row in rows:
        counts[tuple(row)] = counts.get(tuple(row), 0) + 1
    p1 = {0: 0.4, 1: 0.6}
    p2 = lambda x1: {0: 0.8 - 0.5 * x1, 1: 0.2 + 0.5 * x1}
    py = lambda x2: {0: 0.85 - 0.6 * x2, 1: 0.15 + 0.6 * x2}
    tv = 0.0
    for x1, x2, y in itertools.product((0, 1), repeat=3):
        exact = p1[x1] * p2(x1)[x2] * py(x2)[y]
        tv += abs(counts.get((x1, x2, y), 0) / data.n - exact)
    assert tv / 2.0 < 0.01


def test_binary_chain_do_effects_match_enumeration():
    scm = make_binary_chain()
    # E[Y|do(X1=v)] = 0.15 + 0.6 (0.2 + 0.5 v) = 0.27 + 0.30 v
    # E[Y|do(X2=v)] = 0.15 + 0.60 v
    expected = {("X1", 0.0): 0.27, ("X1", 1.0): 0.57, ("X2", 0.0): 0.15, ("X2", 1.0): 0.75}
    for (var, v), target in expected.items():
        est = true_intervention_function(scm, InterventionAssignment((var,), (v,)), 100_000, seed=6)
        assert abs(est.value - target) < 0.01


def test_true_function_grid_validation_and_determinism():
    bundle = builtin_scm("dag1")
    pts = np.array([[0.0], [1.0]])
    with pytest.raises(ValueError):
        true_function_grid(bundle.scm, ("Z",), pts, 1, seed=0)
    with pytest.raises(ValueError):
        true_function_grid(bundle.scm, ("X", "Z"), pts, 100, seed=0)
    m1, e1 = true_function_grid(bundle.scm, ("Z",), pts, 500, seed=3)
    m2, e2 = true_function_grid(bundle.scm, ("Z",), pts, 500, seed=3)
    np.testing.assert_array_equal(m1, m2)
    np.testing.assert_array_equal(e1, e2)

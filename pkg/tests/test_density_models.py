"""Fitted conditionals, DAG densities, and integrating measures."""

import numpy as np
import pytest

from daggp import (
    ConditionalGaussian,
    Dataset,
    DegenerateDataError,
    FeatureMapConditional,
    TransferError,
    build_integrating_measure,
    builtin_scm,
    fit_conditional_gaussian,
    fit_conditional_rff_gaussian,
    fit_dag_density,
    sample,
    sample_measure,
)
from daggp.scm_core import SCM, CausalGraph, NoiseLaw

from conftest import make_affine_chain, make_affine_chain_density


def _xy_dataset(x, z):
    return Dataset(columns=("x", "z"), rows=np.column_stack([x, z]).astype(np.float64))


# ---------------------------------------------------------------------------
# affine conditional fits


def test_constant_conditioner_is_degenerate():
    data = _xy_dataset(np.full(6, 2.0), np.arange(6.0))
    with pytest.raises(DegenerateDataError) as err:
        fit_conditional_gaussian(data, "z", ("x",))
    assert err.value.target == "z"
    assert err.value.columns == ("x",)


def test_duplicate_conditioners_are_degenerate():
    rng = np.random.default_rng(0)
    x = rng.normal(size=30)
    data = Dataset(columns=("a", "b", "z"), rows=np.column_stack([x, 2 * x, x + 1]))
    with pytest.raises(DegenerateDataError) as err:
        fit_conditional_gaussian(data, "z", ("a", "b"))
    assert err.value.columns == ("b",)


def test_too_few_rows():
    data = _xy_dataset(np.array([0.0, 1.0]), np.array([0.0, 1.0]))
    with pytest.raises(ValueError):
        fit_conditional_gaussian(data, "z", ("x",))


def test_affine_fit_recovers_slope():
    rng = np.random.default_rng(1)
    x = rng.normal(size=10_000)
    z = 3.0 * x + rng.normal(scale=0.5, size=x.size)
    law = fit_conditional_gaussian(_xy_dataset(x, z), "z", ("x",))
    assert abs(law.weights[0] - 3.0) < 0.02
    assert abs(law.intercept) < 0.02
    assert abs(law.noise_sd - 0.5) < 0.02


def test_unconditional_fit_is_sample_mean_and_mle_sd():
    rng = np.random.default_rng(2)
    z = rng.normal(loc=4.0, scale=2.0, size=500)
    law = fit_conditional_gaussian(_xy_dataset(np.zeros_like(z), z), "z", ())
    assert law.intercept == pytest.approx(float(z.mean()))
    assert law.noise_sd == pytest.approx(float(z.std(ddof=0)))
    assert law.weights.size == 0


def test_affine_fit_matches_lstsq_oracle_on_dag1():
    bundle = builtin_scm("dag1")
    data = sample(bundle.scm, 300, seed=9)
    law = fit_conditional_gaussian(data, "Z", ("X",))
    design = np.column_stack([np.ones(data.n), data.column("X")])
    coef, *_ = np.linalg.lstsq(design, data.column("Z"), rcond=None)
    assert law.intercept == pytest.approx(coef[0])
    assert law.weights[0] == pytest.approx(coef[1])
    resid = data.column("Z") - design @ coef
    assert law.noise_sd == pytest.approx(float(np.sqrt(np.mean(resid**2))))


def test_fitted_bmi_slope_on_health_model():
    bundle = builtin_scm("dag3")
    data = sample(bundle.scm, 4000, seed=3)
    law = fit_conditional_gaussian(data, "bmi", ("age",))
    # slope standard error under the uniform age design
    se = law.noise_sd / np.sqrt(data.n * data.column("age").var())
    assert abs(law.weights[0] - (-0.01)) < 5 * se


def test_conditional_gaussian_mean_paths_agree():
    law = ConditionalGaussian("z", ("x", "w"), np.array([2.0, -1.0]), 0.5, 1.0)
    values = {"x": np.array([1.0, 2.0]), "w": np.array([3.0, 0.0])}
    np.testing.assert_allclose(law.mean_from(values), [-0.5, 4.5])
    np.testing.assert_allclose(law.mean(np.array([[1.0, 3.0], [2.0, 0.0]])), [-0.5, 4.5])
    d = law.to_dict()
    assert d["family"] == "affine" and d["target"] == "z"


# ---------------------------------------------------------------------------
# feature-map conditionals


def test_rff_fit_is_deterministic_and_tracks_nonlinearity():
    rng = np.random.default_rng(4)
    x = rng.uniform(-3, 3, size=2000)
    z = np.cos(x) + rng.normal(scale=0.1, size=x.size)
    data = _xy_dataset(x, z)
    law = fit_conditional_rff_gaussian(data, "z", ("x",))
    again = fit_conditional_rff_gaussian(data, "z", ("x",))
    assert isinstance(law, FeatureMapConditional)
    np.testing.assert_array_equal(law.weights, again.weights)

    grid = np.linspace(-2.5, 2.5, 41)
    pred = law.mean(grid[:, None])
    assert float(np.max(np.abs(pred - np.cos(grid)))) < 0.15

    affine = fit_conditional_gaussian(data, "z", ("x",))
    affine_err = float(np.max(np.abs(affine.mean(grid[:, None]) - np.cos(grid))))
    assert affine_err > 0.5  # a line cannot follow the cosine


def test_rff_fit_on_root_falls_back_to_affine():
    rng = np.random.default_rng(5)
    z = rng.normal(size=200)
    law = fit_conditional_rff_gaussian(_xy_dataset(np.zeros_like(z), z), "z", ())
    assert isinstance(law, ConditionalGaussian)


def test_rff_mean_from_matches_matrix_path():
    rng = np.random.default_rng(6)
    x = rng.normal(size=400)
    z = np.sin(x) + rng.normal(scale=0.2, size=x.size)
    law = fit_conditional_rff_gaussian(_xy_dataset(x, z), "z", ("x",))
    values = {"x": np.array([0.3, -1.2, 2.0])}
    np.testing.assert_allclose(
        law.mean_from(values), law.mean(values["x"][:, None]), rtol=0, atol=1e-12
    )
    assert law.to_dict()["family"] == "fourier"


# ---------------------------------------------------------------------------
# DAG densities


def test_fit_dag_density_conditioner_layout():
    bundle = builtin_scm("dag2")
    density = fit_dag_density(sample(bundle.scm, 400, seed=7), bundle.scm.graph)
    assert density.conditionals["C"].conditioners == ("B",)
    assert density.conditionals["E"].conditioners == ("A", "C")
    # the output picks up the confounded non-colliders beyond its parents
    assert density.conditionals["Y"].conditioners == ("D", "E", "A", "B")


def test_fit_dag_density_validates_coverage():
    bundle = builtin_scm("dag1")
    density = fit_dag_density(sample(bundle.scm, 100, seed=8), bundle.scm.graph)
    with pytest.raises(ValueError):
        type(density)(graph=bundle.scm.graph,
                      conditionals={"X": density.conditionals["X"]})


def test_joint_gaussian_matches_hand_computed_moments():
    density = make_affine_chain_density()
    order, mu, cov = density.joint_gaussian()
    assert order == ("X", "Z", "Y")
    np.testing.assert_allclose(mu, [1.0, 3.5, 6.0])
    expected = np.array([
        [4.0, 2.0, 4.0],
        [2.0, 2.0, 4.0],
        [4.0, 4.0, 8.25],
    ])
    np.testing.assert_allclose(cov, expected)


def test_joint_gaussian_rejects_nonaffine():
    bundle = builtin_scm("dag1")
    density = fit_dag_density(
        sample(bundle.scm, 400, seed=7), bundle.scm.graph, fitter=fit_conditional_rff_gaussian
    )
    with pytest.raises(TypeError):
        density.joint_gaussian()


def test_ancestral_draws_sample_output_last():
    # naive topological order would put Y before V; the fitted output
    # conditions on V, so Y must be drawn last
    graph = CausalGraph(
        nodes=("W", "Y", "V"),
        directed_edges=(("W", "Y"),),
        confounder_pairs=(("V", "Y"),),
        output="Y",
        manipulable=frozenset({"W"}),
        non_manipulable=frozenset({"V"}),
    )
    scm = SCM(
        graph=graph,
        equations={
            "W": lambda p, e: e["eps_W"],
            "V": lambda p, e: e["u_VY"] + e["eps_V"],
            "Y": lambda p, e: 0.5 * p["W"] + e["u_VY"] + e["eps_Y"],
        },
        exogenous_laws={
            "eps_W": NoiseLaw("normal", (1.0,)),
            "eps_V": NoiseLaw("normal", (0.5,)),
            "eps_Y": NoiseLaw("normal", (0.5,)),
            "u_VY": NoiseLaw("normal", (1.0,)),
        },
        node_noise={"W": ("eps_W",), "V": ("eps_V", "u_VY"), "Y": ("eps_Y", "u_VY")},
        shared_exogenous={("V", "Y"): "u_VY"},
    )
    density = fit_dag_density(sample(scm, 4000, seed=10), graph)
    assert density.conditionals["Y"].conditioners == ("W", "V")
    draws = density.ancestral_draws({"W": 1.0}, (5000,), np.random.default_rng(11))
    # Y reflects its dependence on V, so the fitted correlation survives
    corr = np.corrcoef(draws["V"], draws["Y"])[0, 1]
    assert corr > 0.3
    np.testing.assert_array_equal(draws["W"], np.ones(5000))


# ---------------------------------------------------------------------------
# integrating measures


def test_point_mass_measures():
    bundle = builtin_scm("dag1")
    density = fit_dag_density(sample(bundle.scm, 300, seed=7), bundle.scm.graph)
    g = bundle.scm.graph

    on_z = build_integrating_measure(density, g, ("Z",))
    assert on_z.columns == ()
    assert on_z.is_point_mass
    assert on_z.point_value(np.array([1.5])).shape == (0,)

    on_x = build_integrating_measure(density, g, ("X",))
    assert on_x.columns == ("Z",)
    assert not on_x.is_point_mass

    pinned = build_integrating_measure(density, g, ("X",), context={"Z": 2.0})
    assert pinned.is_point_mass
    np.testing.assert_array_equal(pinned.point_value(np.array([0.0])), [2.0])


def test_measure_context_must_be_free_parent():
    bundle = builtin_scm("dag1")
    density = fit_dag_density(sample(bundle.scm, 300, seed=7), bundle.scm.graph)
    with pytest.raises(ValueError):
        build_integrating_measure(density, bundle.scm.graph, ("X",), context={"X": 0.0})


def test_measure_sampler_mean_tracks_fitted_conditional():
    bundle = builtin_scm("dag1")
    density = fit_dag_density(sample(bundle.scm, 500, seed=7), bundle.scm.graph)
    law = density.conditionals["Z"]
    measure = build_integrating_measure(density, bundle.scm.graph, ("X",))
    for x0 in (-2.0, 0.0, 3.0):
        n = 40_000
        draws = measure.sample(np.array([x0]), n, seed=13)
        assert draws.shape == (n, 1)
        target = law.mean_from({"X": np.array([x0])})[0]
        assert abs(draws[:, 0].mean() - target) < 4 * law.noise_sd / np.sqrt(n)
    again = sample_measure(measure, [0.0], 100, seed=13)
    np.testing.assert_array_equal(again, measure.sample(np.array([0.0]), 100, seed=13))


def test_confounded_measure_layout_and_factor_a_determinism():
    bundle = builtin_scm("dag2")
    density = fit_dag_density(sample(bundle.scm, 500, seed=7), bundle.scm.graph)
    g = bundle.scm.graph
    m1 = build_integrating_measure(density, g, ("B",))
    m2 = build_integrating_measure(density, g, ("B",))
    assert m1.columns == ("D", "E", "A", "B")
    assert not m1.is_point_mass
    assert m1.factor_a is not None
    assert m1.factor_a.params_bytes() == m2.factor_a.params_bytes()
    assert m1.factor_a.targets == ("B",)
    assert m1.factor_a.given == ("A",)
    draws = m1.sample(np.array([1.0]), 64, seed=5)
    assert draws.shape == (64, 4)
    np.testing.assert_array_equal(draws, m2.sample(np.array([1.0]), 64, seed=5))


def test_factor_a_from_draws_matches_joint_solution():
    bundle = builtin_scm("dag2")
    data = sample(bundle.scm, 2000, seed=7)
    g = bundle.scm.graph
    affine = fit_dag_density(data, g)
    exact = build_integrating_measure(affine, g, ("B",)).factor_a

    class _Shim(FeatureMapConditional):
        pass

    # swapping one non-output conditional for a non-affine family forces the
    # sampled construction; the result must agree with the closed form
    rff = fit_dag_density(data, g, fitter=fit_conditional_rff_gaussian)
    mixed = type(affine)(
        graph=g,
        conditionals={**dict(affine.conditionals), "C": rff.conditionals["C"]},
    )
    sampled = build_integrating_measure(mixed, g, ("B",)).factor_a
    np.testing.assert_allclose(sampled.intercept, exact.intercept, atol=0.2)
    np.testing.assert_allclose(sampled.coef, exact.coef, atol=0.2)
    np.testing.assert_allclose(sampled.cov, exact.cov, atol=0.5)


def test_measure_moments_match_empirical_covariance():
    bundle = builtin_scm("dag2")
    density = fit_dag_density(sample(bundle.scm, 500, seed=7), bundle.scm.graph)
    measure = build_integrating_measure(density, bundle.scm.graph, ("B",))
    x = np.array([0.5])
    mean, cov = measure.analytic_moments(x)
    n = 20_000
    draws = measure.sample(x, n, seed=17)
    emp_mean = draws.mean(axis=0)
    emp_cov = np.cov(draws.T)
    sd = np.sqrt(np.diag(cov))
    np.testing.assert_array_less(np.abs(emp_mean - mean), 5 * sd / np.sqrt(n))
    # gaussian moment error: se(cov_ij) = sqrt((cov_ii cov_jj + cov_ij^2) / n)
    cov_se = np.sqrt(np.outer(np.diag(cov), np.diag(cov)) + cov**2) / np.sqrt(n)
    np.testing.assert_array_less(np.abs(emp_cov - cov), 5 * cov_se + 1e-12)


def test_degenerate_noise_gives_point_mass_draws():
    density = make_affine_chain_density()
    quiet = type(density)(
        graph=density.graph,
        conditionals={
            **dict(density.conditionals),
            "Z": ConditionalGaussian("Z", ("X",), np.array([0.5]), 3.0, 1e-8),
        },
    )
    measure = build_integrating_measure(quiet, density.graph, ("X",))
    draws = measure.sample(np.array([2.0]), 500, seed=19)
    assert float(draws[:, 0].std()) < 1e-6
    assert abs(float(draws[:, 0].mean()) - 4.0) < 1e-6


def test_nontransferable_set_is_rejected():
    bundle = builtin_scm("dag2")
    data = sample(bundle.scm, 500, seed=7)
    g = bundle.scm.graph
    blocked = CausalGraph(
        nodes=g.nodes,
        directed_edges=g.directed_edges + (("B", "A"),),
        confounder_pairs=g.confounder_pairs,
        output=g.output,
        manipulable=g.manipulable,
        non_manipulable=g.non_manipulable,
    )
    density = fit_dag_density(data, blocked)
    with pytest.raises(TransferError):
        build_integrating_measure(density, blocked, ("B",))
    # sets avoiding the blocking structure still build
    assert build_integrating_measure(density, blocked, ("D", "E")).columns == ("A", "B")

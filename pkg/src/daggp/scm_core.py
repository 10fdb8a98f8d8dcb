"""Structural causal models with hidden confounders.

A model is a DAG over observed variables plus a set of unordered confounder
pairs, each pair sharing one exogenous noise stream.  Every node carries a
deterministic structural equation of its graph parents and the exogenous
terms it is entitled to read (its own stream plus the shared streams of the
pairs it belongs to).  Interventions replace equations by constants and cut
the incoming edges of the intervened nodes; the shared stream of a cut pair
keeps feeding the non-intervened member.

Structural equations are vectorized: they map parent-value arrays and noise
arrays of a common shape to a value array of that shape, which lets the same
equation serve single draws, sample batches, and the batched grid oracle.

Three benchmark models ship as builtins:

* ``dag1`` - a three-variable chain with a nonlinear middle link.
* ``dag2`` - six variables, two of them confounded with the outcome.
* ``dag3`` - a health model (age, bmi, aspirin, statin, cancer, psa) whose
  treatment nodes are deterministic logistic scores.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from .errors import GraphStructureError, InterventionError
from .seeding import derived_rng

__all__ = [
    "CausalGraph",
    "NoiseLaw",
    "SCM",
    "InterventionAssignment",
    "Dataset",
    "McEstimate",
    "topological_order",
    "sample",
    "apply_do",
    "true_intervention_function",
    "true_function_grid",
    "builtin_scm",
    "validate_domains",
    "scm_manifest",
    "manifest_hash",
]

Equation = Callable[[Mapping[str, np.ndarray], Mapping[str, np.ndarray]], np.ndarray]


# ---------------------------------------------------------------------------
# graph


@dataclass(frozen=True)
class CausalGraph:
    """Directed acyclic graph plus confounder pairs and manipulability tags."""

    nodes: tuple[str, ...]
    directed_edges: tuple[tuple[str, str], ...]
    confounder_pairs: tuple[tuple[str, str], ...]
    output: str
    manipulable: frozenset[str]
    non_manipulable: frozenset[str]

    def __post_init__(self):
        known = set(self.nodes)
        if len(known) != len(self.nodes):
            raise GraphStructureError("duplicate node names")
        for parent, child in self.directed_edges:
            if parent not in known or child not in known:
                raise GraphStructureError(f"edge ({parent}, {child}) references unknown node")
            if parent == child:
                raise GraphStructureError(f"self-loop at {parent}")
        pairs = []
        for a, b in self.confounder_pairs:
            if a not in known or b not in known:
                raise GraphStructureError(f"confounder pair ({a}, {b}) references unknown node")
            if a == b:
                raise GraphStructureError(f"confounder pair at single node {a}")
            pairs.append(tuple(sorted((a, b))))
        object.__setattr__(self, "confounder_pairs", tuple(pairs))
        if self.output not in known:
            raise GraphStructureError(f"unknown output node {self.output!r}")
        if self.output in self.manipulable:
            raise GraphStructureError("output node cannot be manipulable")
        if self.manipulable & self.non_manipulable:
            raise GraphStructureError("manipulable and non-manipulable sets overlap")
        for v in self.manipulable | self.non_manipulable:
            if v not in known:
                raise GraphStructureError(f"unknown node {v!r} in manipulability sets")
        topological_order(self)  # raises on cycles

    def parents(self, node: str) -> tuple[str, ...]:
        return tuple(sorted(p for p, c in self.directed_edges if c == node))

    def children(self, node: str) -> tuple[str, ...]:
        return tuple(sorted(c for p, c in self.directed_edges if p == node))

    def confounded_with(self, node: str) -> tuple[str, ...]:
        out = set()
        for a, b in self.confounder_pairs:
            if a == node:
                out.add(b)
            elif b == node:
                out.add(a)
        return tuple(sorted(out))


def topological_order(graph: CausalGraph) -> tuple[str, ...]:
    """Kahn's algorithm; ties broken by position in ``graph.nodes``.

    The tie-break makes the order a pure function of the graph definition.
    """
    indegree = {v: 0 for v in graph.nodes}
    for _, child in graph.directed_edges:
        indegree[child] += 1
    order: list[str] = []
    ready = [v for v in graph.nodes if indegree[v] == 0]
    while ready:
        node = ready.pop(0)
        order.append(node)
        for parent, child in graph.directed_edges:
            if parent == node:
                indegree[child] -= 1
                if indegree[child] == 0 and child not in ready:
                    ready.append(child)
        ready.sort(key=graph.nodes.index)
    if len(order) != len(graph.nodes):
        stuck = sorted(v for v, d in indegree.items() if d > 0)
        raise GraphStructureError(f"cycle through {stuck}")
    return tuple(order)


# ---------------------------------------------------------------------------
# model


@dataclass(frozen=True)
class NoiseLaw:
    """Exogenous stream law: ``normal`` (mean 0, given sd) or ``uniform``."""

    kind: str
    params: tuple[float, ...]

    def __post_init__(self):
        if self.kind not in ("normal", "uniform"):
            raise ValueError(f"unknown noise law {self.kind!r}")
        n_expected = 1 if self.kind == "normal" else 2
        if len(self.params) != n_expected:
            raise ValueError(f"{self.kind} law takes {n_expected} parameter(s)")

    def draw(self, rng: np.random.Generator, shape) -> np.ndarray:
        if self.kind == "normal":
            return rng.normal(0.0, self.params[0], shape)
        return rng.uniform(self.params[0], self.params[1], shape)


@dataclass(frozen=True)
class SCM:
    """Graph plus structural equations and exogenous noise wiring."""

    graph: CausalGraph
    equations: Mapping[str, Equation]
    exogenous_laws: Mapping[str, NoiseLaw]
    node_noise: Mapping[str, tuple[str, ...]]
    shared_exogenous: Mapping[tuple[str, str], str] = field(default_factory=dict)

    def __post_init__(self):
        for v in self.graph.nodes:
            if v not in self.equations:
                raise GraphStructureError(f"no structural equation for {v!r}")
            for stream in self.node_noise.get(v, ()):
                if stream not in self.exogenous_laws:
                    raise GraphStructureError(f"{v!r} reads unknown stream {stream!r}")
        for pair, stream in self.shared_exogenous.items():
            a, b = sorted(pair)
            if (a, b) not in self.graph.confounder_pairs:
                raise GraphStructureError(f"shared stream for non-pair ({a}, {b})")
            for member in (a, b):
                if stream not in self.node_noise.get(member, ()):
                    raise GraphStructureError(
                        f"confounded node {member!r} does not read shared stream {stream!r}"
                    )

    def _draw_noise(self, rng: np.random.Generator, shape) -> dict[str, np.ndarray]:
        # sorted stream order fixes the rng consumption sequence
        return {name: self.exogenous_laws[name].draw(rng, shape) for name in sorted(self.exogenous_laws)}

    def _evaluate(self, noise: Mapping[str, np.ndarray], shape) -> dict[str, np.ndarray]:
        values: dict[str, np.ndarray] = {}
        for node in topological_order(self.graph):
            parents = {p: values[p] for p in self.graph.parents(node)}
            eps = {s: noise[s] for s in self.node_noise.get(node, ())}
            col = np.asarray(self.equations[node](parents, eps), dtype=np.float64)
            values[node] = np.broadcast_to(col, shape).astype(np.float64, copy=False)
        return values


@dataclass(frozen=True)
class InterventionAssignment:
    """Do-assignment: distinct variables with their clamped values.

    Stored in sorted variable order so equal assignments compare equal.
    """

    variables: tuple[str, ...]
    values: tuple[float, ...]

    def __post_init__(self):
        if len(self.variables) != len(self.values):
            raise InterventionError("variables and values differ in length")
        if len(set(self.variables)) != len(self.variables):
            raise InterventionError("intervened variables must be distinct")
        order = np.argsort(np.array(self.variables, dtype=object))
        object.__setattr__(self, "variables", tuple(self.variables[i] for i in order))
        object.__setattr__(self, "values", tuple(float(self.values[i]) for i in order))

    def as_dict(self) -> dict[str, float]:
        return dict(zip(self.variables, self.values))


@dataclass(frozen=True, eq=False)
class Dataset:
    """Rectangular sample: named columns over an (n, k) float matrix."""

    columns: tuple[str, ...]
    rows: np.ndarray
    intervention: InterventionAssignment | None = None

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=np.float64)
        if rows.ndim != 2 or rows.shape[1] != len(self.columns):
            raise ValueError("rows must be (n, len(columns))")
        object.__setattr__(self, "rows", rows)

    @property
    def kind(self) -> str:
        return "observational" if self.intervention is None else "interventional"

    @property
    def n(self) -> int:
        return self.rows.shape[0]

    def column(self, name: str) -> np.ndarray:
        return self.rows[:, self.columns.index(name)]

    def values(self, names) -> np.ndarray:
        idx = [self.columns.index(name) for name in names]
        return self.rows[:, idx]

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(",".join(self.columns) + "\n")
            for row in self.rows:
                fh.write(",".join(repr(float(v)) for v in row) + "\n")

    @classmethod
    def from_csv(cls, path, intervention: InterventionAssignment | None = None) -> "Dataset":
        with open(path, "r", encoding="utf-8") as fh:
            header = fh.readline().strip().split(",")
            body = [line.strip().split(",") for line in fh if line.strip()]
        rows = np.array([[float(v) for v in line] for line in body], dtype=np.float64)
        if rows.size == 0:
            rows = rows.reshape(0, len(header))
        return cls(columns=tuple(header), rows=rows, intervention=intervention)


class McEstimate(tuple):
    """(value, stderr) pair from a Monte Carlo estimator."""

    def __new__(cls, value: float, stderr: float):
        return super().__new__(cls, (float(value), float(stderr)))

    @property
    def value(self) -> float:
        return self[0]

    @property
    def stderr(self) -> float:
        return self[1]


# ---------------------------------------------------------------------------
# operations


def sample(scm: SCM, n: int, seed: int) -> Dataset:
    """Ancestral sample of ``n`` rows; columns follow ``graph.nodes``."""
    if n < 0:
        raise ValueError("n must be non-negative")
    rng = derived_rng(seed, "ancestral")
    noise = scm._draw_noise(rng, (n,))
    values = scm._evaluate(noise, (n,))
    rows = np.column_stack([values[v] for v in scm.graph.nodes]) if n else np.zeros((0, len(scm.graph.nodes)))
    return Dataset(columns=scm.graph.nodes, rows=rows)


def _constant_equation(value: float) -> Equation:
    def eq(parents, eps, _v=float(value)):
        return np.asarray(_v)

    return eq


def apply_do(scm: SCM, assignment: InterventionAssignment, *, require_manipulable: bool = True) -> SCM:
    """Mutilated model: intervened nodes clamped, their incoming edges cut.

    ``require_manipulable=False`` permits do() on any non-output node; used
    internally where interventions are mathematical rather than physical.
    """
    graph = scm.graph
    clamped = set(assignment.variables)
    for v in assignment.variables:
        if v not in graph.nodes:
            raise InterventionError(f"unknown variable {v!r}")
        if v == graph.output:
            raise InterventionError("cannot intervene on the output")
        if require_manipulable and v not in graph.manipulable:
            raise InterventionError(f"{v!r} is not manipulable")
    new_edges = tuple(e for e in graph.directed_edges if e[1] not in clamped)
    new_pairs = tuple(p for p in graph.confounder_pairs if p[0] not in clamped and p[1] not in clamped)
    new_graph = CausalGraph(
        nodes=graph.nodes,
        directed_edges=new_edges,
        confounder_pairs=new_pairs,
        output=graph.output,
        manipulable=graph.manipulable,
        non_manipulable=graph.non_manipulable,
    )
    equations = dict(scm.equations)
    node_noise = {v: scm.node_noise.get(v, ()) for v in graph.nodes}
    for v, value in zip(assignment.variables, assignment.values):
        equations[v] = _constant_equation(value)
        node_noise[v] = ()
    shared = {p: s for p, s in scm.shared_exogenous.items() if p in new_pairs}
    return SCM(
        graph=new_graph,
        equations=equations,
        exogenous_laws=scm.exogenous_laws,
        node_noise=node_noise,
        shared_exogenous=shared,
    )


def true_intervention_function(scm: SCM, assignment: InterventionAssignment, n_mc: int, seed: int) -> McEstimate:
    """Monte Carlo estimate of E[output | do(assignment)] with its stderr."""
    if n_mc < 2:
        raise ValueError("n_mc must be at least 2")
    mutilated = apply_do(scm, assignment)
    data = sample(mutilated, n_mc, seed)
    y = data.column(scm.graph.output)
    return McEstimate(float(np.mean(y)), float(np.std(y, ddof=1) / np.sqrt(n_mc)))


def true_function_grid(
    scm: SCM,
    task_vars: tuple[str, ...],
    points: np.ndarray,
    n_mc: int,
    seed: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Oracle intervention function on a grid, batched over grid rows.

    One noise draw block serves a whole chunk of grid points, with the
    do-values broadcast down the Monte Carlo axis; equations being
    vectorized makes this a constant number of array passes per node.
    Returns (means, stderrs) aligned with ``points`` rows.
    """
    if n_mc < 2:
        raise ValueError("n_mc must be at least 2")
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    if points.shape[1] != len(task_vars):
        raise ValueError("points width must match task_vars")
    base = apply_do(scm, InterventionAssignment(task_vars, tuple(points[0])), require_manipulable=False)
    order = topological_order(base.graph)
    means = np.empty(points.shape[0])
    errs = np.empty(points.shape[0])
    chunk = max(1, 4_000_000 // n_mc)
    for ci, start in enumerate(range(0, points.shape[0], chunk)):
        block = points[start : start + chunk]
        m = block.shape[0]
        rng = derived_rng(seed, "truth-grid", tuple(task_vars), ci)
        noise = base._draw_noise(rng, (m, n_mc))
        values: dict[str, np.ndarray] = {}
        do_cols = {v: block[:, j] for j, v in enumerate(task_vars)}
        for node in order:
            if node in do_cols:
                values[node] = np.broadcast_to(do_cols[node][:, None], (m, n_mc))
                continue
            parents = {p: values[p] for p in base.graph.parents(node)}
            eps = {s: noise[s] for s in base.node_noise.get(node, ())}
            col = np.asarray(base.equations[node](parents, eps), dtype=np.float64)
            values[node] = np.broadcast_to(col, (m, n_mc))
        y = values[scm.graph.output]
        means[start : start + m] = y.mean(axis=1)
        errs[start : start + m] = y.std(axis=1, ddof=1) / np.sqrt(n_mc)
    return means, errs


def validate_domains(assignment: InterventionAssignment, domains: Mapping[str, tuple[float, float]]) -> None:
    """Raise if any assigned value falls outside its interventional domain."""
    for v, value in zip(assignment.variables, assignment.values):
        if v not in domains:
            raise InterventionError(f"{v!r} has no interventional domain")
        lo, hi = domains[v]
        if not (lo <= value <= hi):
            raise InterventionError(f"{v!r}={value} outside domain [{lo}, {hi}]")


# ---------------------------------------------------------------------------
# builtins


def _sigmoid(x):
    out = np.empty_like(np.asarray(x, dtype=np.float64))
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


@dataclass(frozen=True)
class ScmBundle:
    """A builtin model with its interventional domains."""

    name: str
    scm: SCM
    domains: Mapping[str, tuple[float, float]]


def _build_dag1(sd: dict[str, float]) -> ScmBundle:
    graph = CausalGraph(
        nodes=("X", "Z", "Y"),
        directed_edges=(("X", "Z"), ("Z", "Y")),
        confounder_pairs=(),
        output="Y",
        manipulable=frozenset({"X", "Z"}),
        non_manipulable=frozenset(),
    )
    equations = {
        "X": lambda p, e: e["eps_X"],
        "Z": lambda p, e: np.exp(-p["X"]) + e["eps_Z"],
        "Y": lambda p, e: np.cos(p["Z"]) - np.exp(-p["Z"] / 20.0) + e["eps_Y"],
    }
    laws = {name: NoiseLaw("normal", (sd[name],)) for name in ("eps_X", "eps_Z", "eps_Y")}
    scm = SCM(
        graph=graph,
        equations=equations,
        exogenous_laws=laws,
        node_noise={"X": ("eps_X",), "Z": ("eps_Z",), "Y": ("eps_Y",)},
    )
    return ScmBundle("dag1", scm, {"X": (-5.0, 5.0), "Z": (-5.0, 20.0)})


def _build_dag2(sd: dict[str, float]) -> ScmBundle:
    graph = CausalGraph(
        nodes=("A", "B", "C", "D", "E", "Y"),
        directed_edges=(("B", "C"), ("C", "D"), ("A", "E"), ("C", "E"), ("D", "Y"), ("E", "Y")),
        confounder_pairs=(("A", "Y"), ("B", "Y")),
        output="Y",
        manipulable=frozenset({"B", "D", "E"}),
        non_manipulable=frozenset({"A", "C"}),
    )
    equations = {
        "A": lambda p, e: e["u_AY"] + e["eps_A"],
        "B": lambda p, e: e["u_BY"] + e["eps_B"],
        "C": lambda p, e: np.exp(-p["B"]) + e["eps_C"],
        "D": lambda p, e: np.exp(-p["C"]) / 10.0 + e["eps_D"],
        "E": lambda p, e: np.cos(p["A"]) + p["C"] / 10.0 + e["eps_E"],
        "Y": lambda p, e: np.cos(p["D"]) + np.sin(p["E"]) + e["u_AY"] + e["u_BY"] + e["eps_Y"],
    }
    streams = ("u_AY", "u_BY", "eps_A", "eps_B", "eps_C", "eps_D", "eps_E", "eps_Y")
    laws = {name: NoiseLaw("normal", (sd[name],)) for name in streams}
    scm = SCM(
        graph=graph,
        equations=equations,
        exogenous_laws=laws,
        node_noise={
            "A": ("eps_A", "u_AY"),
            "B": ("eps_B", "u_BY"),
            "C": ("eps_C",),
            "D": ("eps_D",),
            "E": ("eps_E",),
            "Y": ("eps_Y", "u_AY", "u_BY"),
        },
        shared_exogenous={("A", "Y"): "u_AY", ("B", "Y"): "u_BY"},
    )
    return ScmBundle("dag2", scm, {"B": (-3.0, 4.0), "D": (-3.0, 3.0), "E": (-3.0, 3.0)})


def _build_dag3(sd: dict[str, float]) -> ScmBundle:
    graph = CausalGraph(
        nodes=("age", "bmi", "aspirin", "statin", "cancer", "psa"),
        directed_edges=(
            ("age", "bmi"),
            ("age", "aspirin"),
            ("bmi", "aspirin"),
            ("age", "statin"),
            ("bmi", "statin"),
            ("age", "cancer"),
            ("bmi", "cancer"),
            ("aspirin", "cancer"),
            ("statin", "cancer"),
            ("age", "psa"),
            ("bmi", "psa"),
            ("aspirin", "psa"),
            ("statin", "psa"),
            ("cancer", "psa"),
        ),
        confounder_pairs=(),
        output="psa",
        manipulable=frozenset({"aspirin", "statin"}),
        non_manipulable=frozenset({"age", "bmi", "cancer"}),
    )
    equations = {
        "age": lambda p, e: e["eps_age"],
        "bmi": lambda p, e: 27.0 - 0.01 * p["age"] + e["eps_bmi"],
        "aspirin": lambda p, e: _sigmoid(-8.0 + 0.10 * p["age"] + 0.03 * p["bmi"]),
        "statin": lambda p, e: _sigmoid(-13.0 + 0.10 * p["age"] + 0.20 * p["bmi"]),
        "cancer": lambda p, e: _sigmoid(
            2.2 - 0.05 * p["age"] + 0.01 * p["bmi"] - 0.04 * p["statin"] + 0.02 * p["aspirin"]
        ),
        "psa": lambda p, e: 6.8
        + 0.04 * p["age"]
        - 0.15 * p["bmi"]
        - 0.60 * p["statin"]
        + 0.55 * p["aspirin"]
        + 1.00 * p["cancer"]
        + e["eps_psa"],
    }
    laws = {
        "eps_age": NoiseLaw("uniform", (55.0, 75.0)),
        "eps_bmi": NoiseLaw("normal", (sd["eps_bmi"],)),
        "eps_psa": NoiseLaw("normal", (sd["eps_psa"],)),
    }
    scm = SCM(
        graph=graph,
        equations=equations,
        exogenous_laws=laws,
        node_noise={
            "age": ("eps_age",),
            "bmi": ("eps_bmi",),
            "aspirin": (),
            "statin": (),
            "cancer": (),
            "psa": ("eps_psa",),
        },
    )
    return ScmBundle("dag3", scm, {"aspirin": (0.0, 1.0), "statin": (0.0, 1.0)})


# noise scales balance three needs: observational data must cover the
# interventional domains, the output must stay learnable from 100 rows,
# and heavy-noise transmission smooths any oscillatory pushforward terms
# enough that the downstream intervention functions are estimable
_DEFAULT_SD = {
    "dag1": {"eps_X": 3.0, "eps_Z": 1.5, "eps_Y": 0.3},
    "dag2": {"u_AY": 0.8, "u_BY": 0.8, "eps_A": 1.0, "eps_B": 2.2,
             "eps_C": 1.0, "eps_D": 2.0, "eps_E": 2.0, "eps_Y": 0.3},
    "dag3": {"eps_bmi": 0.7, "eps_psa": 0.4},
}

_BUILDERS = {"dag1": _build_dag1, "dag2": _build_dag2, "dag3": _build_dag3}


def builtin_scm(name: str, noise_overrides: Mapping[str, float] | None = None) -> ScmBundle:
    """One of the benchmark models, optionally with rescaled noise streams."""
    if name not in _BUILDERS:
        raise ValueError(f"unknown builtin {name!r}; choose from {sorted(_BUILDERS)}")
    sd = dict(_DEFAULT_SD[name])
    for stream, value in (noise_overrides or {}).items():
        if stream not in sd:
            raise ValueError(f"{name} has no gaussian stream {stream!r}")
        if value <= 0:
            raise ValueError("noise scale must be positive")
        sd[stream] = float(value)
    return _BUILDERS[name](sd)


def scm_manifest(bundle: ScmBundle) -> dict:
    """JSON-serializable description of a builtin model instance."""
    scm = bundle.scm
    return {
        "name": bundle.name,
        "nodes": list(scm.graph.nodes),
        "directed_edges": [list(e) for e in scm.graph.directed_edges],
        "confounder_pairs": [list(p) for p in scm.graph.confounder_pairs],
        "output": scm.graph.output,
        "manipulable": sorted(scm.graph.manipulable),
        "non_manipulable": sorted(scm.graph.non_manipulable),
        "domains": {v: list(d) for v, d in sorted(bundle.domains.items())},
        "noise": {
            name: {"kind": law.kind, "params": list(law.params)}
            for name, law in sorted(scm.exogenous_laws.items())
        },
    }


def manifest_hash(manifest: dict) -> str:
    """Stable content hash of a manifest (sorted-key JSON, sha256)."""
    blob = json.dumps(manifest, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()

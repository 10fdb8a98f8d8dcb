"""Base-set extraction, per-set partitions, and transfer analysis.

All intervention functions of a model hang off one shared latent function of
the outcome's direct parents plus the variables directly confounded with the
outcome.  This module computes those sets, the per-intervention-set
partitions of them, and whether the shared function exists at all; when it
does not, it constructs the subset of intervention sets that still share it.

A d-separation engine over graphs with bidirected (confounder) edges backs
the decision procedures: confounder pairs are expanded into explicit latent
parents, and independence is decided by trail reachability on graphs with
selected incoming or outgoing edges cut.  The engine turns the minimality
facts about the base set into executable assertions instead of prose.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Iterable

from .scm_core import CausalGraph

__all__ = [
    "BaseSets",
    "SetPartition",
    "TransferConditions",
    "TransferReport",
    "intervention_sets",
    "deduplicated_sets",
    "effective_set",
    "base_sets",
    "partition_for_set",
    "d_separated",
    "directed_ancestors",
    "transfer_conditions",
    "base_function_exists",
    "transferable_subset",
]


@dataclass(frozen=True)
class BaseSets:
    """Input sets of the shared latent function.

    ``parents`` are the outcome's direct parents; ``confounded`` the
    variables sharing a confounder pair with the outcome; and
    ``confounded_noncolliders`` drops the members of ``confounded`` that are
    causally influenced by both a manipulable variable and the outcome.
    """

    parents: tuple[str, ...]
    confounded: tuple[str, ...]
    confounded_noncolliders: tuple[str, ...]


@dataclass(frozen=True)
class SetPartition:
    """How one intervention set splits the base sets.

    ``free_parents``: outcome parents not intervened on (marginalized by the
    measure).  ``intervened_confounded``: confounded non-colliders inside the
    intervention set (resampled from their conditional).  ``free_confounded``:
    the remaining confounded non-colliders.
    """

    intervention_set: tuple[str, ...]
    free_parents: tuple[str, ...]
    intervened_confounded: tuple[str, ...]
    free_confounded: tuple[str, ...]


@dataclass(frozen=True)
class TransferConditions:
    """Do-calculus validity checks for one intervention set.

    ``observation_exchange``: conditioning on the free parents equals
    intervening on them (rule-2 style).  ``action_removal``: intervening on
    the non-parent members changes nothing further (rule-3 style).
    ``confounder_invariance``: the intervened-confounded conditional is
    unaffected by intervening on the parents.
    """

    observation_exchange: bool
    action_removal: bool
    confounder_invariance: bool

    @property
    def holds(self) -> bool:
        return self.observation_exchange and self.action_removal and self.confounder_invariance


@dataclass(frozen=True)
class TransferReport:
    """Existence decision for the shared function, with fallback sets."""

    exists: bool
    blocking_nodes: tuple[str, ...]
    transferable_sets: tuple[tuple[str, ...], ...]

    def to_dict(self) -> dict:
        return {
            "exists": self.exists,
            "blocking_nodes": list(self.blocking_nodes),
            "transferable_sets": [list(s) for s in self.transferable_sets],
        }


# ---------------------------------------------------------------------------
# intervention sets


def intervention_sets(graph: CausalGraph) -> tuple[tuple[str, ...], ...]:
    """All non-empty subsets of the manipulable variables, (size, lex) order."""
    pool = sorted(graph.manipulable)
    out = []
    for size in range(1, len(pool) + 1):
        for combo in combinations(pool, size):
            out.append(tuple(combo))
    return tuple(out)


def effective_set(graph: CausalGraph, x_s: Iterable[str]) -> tuple[str, ...]:
    """Members of ``x_s`` with a directed path to the outcome avoiding the rest.

    A member without such a path is redundant: clamping it cannot move the
    outcome once the other members are clamped too.
    """
    members = set(x_s)
    kept = []
    for v in sorted(members):
        blocked = members - {v}
        stack = [v]
        seen = {v}
        found = False
        while stack and not found:
            node = stack.pop()
            for child in graph.children(node):
                if child == graph.output:
                    found = True
                    break
                if child in blocked or child in seen:
                    continue
                seen.add(child)
                stack.append(child)
        if found:
            kept.append(v)
    return tuple(kept)


def deduplicated_sets(graph: CausalGraph) -> tuple[tuple[str, ...], ...]:
    """Intervention sets that are their own effective set.

    Any other set's intervention function coincides with the one of its
    effective subset, so this list enumerates the distinct functions.
    """
    return tuple(s for s in intervention_sets(graph) if effective_set(graph, s) == s)


# ---------------------------------------------------------------------------
# base sets


def _strict_descendants(graph: CausalGraph, source: str) -> set[str]:
    seen: set[str] = set()
    stack = [source]
    while stack:
        node = stack.pop()
        for child in graph.children(node):
            if child not in seen:
                seen.add(child)
                stack.append(child)
    return seen


def base_sets(graph: CausalGraph) -> BaseSets:
    y = graph.output
    parents = graph.parents(y)
    confounded = graph.confounded_with(y)
    influenced_by_x: set[str] = set()
    for x in graph.manipulable:
        influenced_by_x |= _strict_descendants(graph, x)
    influenced_by_y = _strict_descendants(graph, y)
    # a collider sits downstream of both a manipulable variable and the outcome
    noncolliders = tuple(v for v in confounded if not (v in influenced_by_x and v in influenced_by_y))
    return BaseSets(parents=parents, confounded=confounded, confounded_noncolliders=noncolliders)


def partition_for_set(base: BaseSets, x_s: Iterable[str]) -> SetPartition:
    xs = tuple(sorted(set(x_s)))
    free_parents = tuple(v for v in base.parents if v not in xs)
    intervened_confounded = tuple(v for v in base.confounded_noncolliders if v in xs)
    free_confounded = tuple(v for v in base.confounded_noncolliders if v not in xs)
    return SetPartition(
        intervention_set=xs,
        free_parents=free_parents,
        intervened_confounded=intervened_confounded,
        free_confounded=free_confounded,
    )


# ---------------------------------------------------------------------------
# d-separation engine


def _latent_expansion(
    graph: CausalGraph,
    cut_incoming: frozenset[str],
    cut_outgoing: frozenset[str],
) -> tuple[dict[str, set[str]], dict[str, set[str]]]:
    """Parent/child maps with confounder pairs as explicit latent parents."""
    parents: dict[str, set[str]] = {v: set() for v in graph.nodes}
    children: dict[str, set[str]] = {v: set() for v in graph.nodes}
    for p, c in graph.directed_edges:
        if c in cut_incoming or p in cut_outgoing:
            continue
        parents[c].add(p)
        children[p].add(c)
    for i, (a, b) in enumerate(graph.confounder_pairs):
        latent = f"~u{i}"
        parents[latent] = set()
        children[latent] = set()
        for member in (a, b):
            if member in cut_incoming:
                continue
            parents[member].add(latent)
            children[latent].add(member)
    return parents, children


def d_separated(
    graph: CausalGraph,
    first: Iterable[str],
    second: Iterable[str],
    conditioned: Iterable[str] = (),
    *,
    cut_incoming: Iterable[str] = (),
    cut_outgoing: Iterable[str] = (),
) -> bool:
    """True when no active trail links ``first`` and ``second`` given
    ``conditioned``, after cutting the requested edges.

    Confounder pairs act as latent common parents.  Members of the tested
    sets that also appear in ``conditioned`` are vacuously separated.
    """
    cond = set(conditioned)
    sources = set(first) - cond
    targets = set(second) - cond
    if not sources or not targets:
        return True
    parents, children = _latent_expansion(graph, frozenset(cut_incoming), frozenset(cut_outgoing))

    ancestors_of_cond = set(cond)
    stack = list(cond)
    while stack:
        node = stack.pop()
        for p in parents.get(node, ()):
            if p not in ancestors_of_cond:
                ancestors_of_cond.add(p)
                stack.append(p)

    # trail reachability: states are (node, came-from-child?)
    visited: set[tuple[str, bool]] = set()
    frontier: list[tuple[str, bool]] = [(s, True) for s in sources]
    while frontier:
        node, upward = frontier.pop()
        if (node, upward) in visited:
            continue
        visited.add((node, upward))
        if node in targets:
            return False
        if upward and node not in cond:
            for p in parents.get(node, ()):
                frontier.append((p, True))
            for c in children.get(node, ()):
                frontier.append((c, False))
        elif not upward:
            if node not in cond:
                for c in children.get(node, ()):
                    frontier.append((c, False))
            if node in ancestors_of_cond:
                for p in parents.get(node, ()):
                    frontier.append((p, True))
    return True


def directed_ancestors(
    graph: CausalGraph, nodes: Iterable[str], *, cut_incoming: Iterable[str] = ()
) -> set[str]:
    """Strict ancestors of ``nodes`` through directed edges, after cuts."""
    cut = set(cut_incoming)
    out: set[str] = set()
    stack = list(nodes)
    while stack:
        node = stack.pop()
        if node in cut:
            continue
        for p, c in graph.directed_edges:
            if c == node and p not in out:
                out.add(p)
                stack.append(p)
    return out


# ---------------------------------------------------------------------------
# transfer analysis


def transfer_conditions(
    graph: CausalGraph, x_s: Iterable[str], base: BaseSets | None = None
) -> TransferConditions:
    """Evaluate the do-calculus conditions that let one latent function
    represent the intervention function of ``x_s``.

    The three checks mirror the derivation of the shared-function operator:
    exchange observation for intervention on the free parents, remove the
    redundant interventions on non-parents, and keep the intervened-
    confounded conditional invariant to intervening on the parents.
    """
    if base is None:
        base = base_sets(graph)
    part = partition_for_set(base, x_s)
    y = graph.output
    xs = set(part.intervention_set)

    exchange = d_separated(
        graph,
        {y},
        set(part.free_parents),
        xs | set(part.free_confounded),
        cut_incoming=xs,
        cut_outgoing=part.free_parents,
    )

    parents = set(base.parents)
    extra = xs - parents
    if extra:
        anc = directed_ancestors(graph, part.free_confounded, cut_incoming=parents)
        removable = extra - anc
        removal = d_separated(
            graph,
            {y},
            extra,
            parents | set(part.free_confounded),
            cut_incoming=parents | removable,
        )
    else:
        removal = True

    if part.intervened_confounded:
        invariance = d_separated(
            graph,
            set(part.intervened_confounded),
            parents,
            set(part.free_confounded),
            cut_incoming=parents,
        )
    else:
        invariance = True

    return TransferConditions(
        observation_exchange=exchange,
        action_removal=removal,
        confounder_invariance=invariance,
    )


def _blocking_nodes(graph: CausalGraph) -> tuple[str, ...]:
    pairs = set(graph.confounder_pairs)

    def unconfounded(a: str, b: str) -> bool:
        return tuple(sorted((a, b))) not in pairs

    base = base_sets(graph)
    out = []
    for v in base.confounded:
        has_in = any(c == v and unconfounded(p, c) for p, c in graph.directed_edges)
        has_out = any(p == v and unconfounded(p, c) for p, c in graph.directed_edges)
        if has_in and has_out:
            out.append(v)
    return tuple(sorted(out))


def transferable_subset(graph: CausalGraph) -> tuple[tuple[str, ...], ...]:
    """Intervention sets that can still share one latent function.

    Sets containing a blocking node, or any direct cause of one, are
    excluded; with no blocking nodes the full list survives.
    """
    blocking = set(_blocking_nodes(graph))
    if not blocking:
        return intervention_sets(graph)
    into_blocking = {p for p, c in graph.directed_edges if c in blocking}
    banned = blocking | into_blocking
    return tuple(s for s in intervention_sets(graph) if not set(s) & banned)


def base_function_exists(graph: CausalGraph) -> TransferReport:
    """Decide whether one latent function covers every intervention set."""
    blocking = _blocking_nodes(graph)
    return TransferReport(
        exists=not blocking,
        blocking_nodes=blocking,
        transferable_sets=transferable_subset(graph),
    )

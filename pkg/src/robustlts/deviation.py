"""Deviation algebra: extra environment transitions and their ordering.

A deviation is a set of transitions over the environment's state/action
space that are absent from the normative transition relation. Deviations
are kept in a canonical form (sorted, disjoint from the environment's own
transitions) so that set comparison is representation independent.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Iterable

from .lts import Kind, Lts, Triple, check_safety, parallel_compose

EnvKey = tuple[tuple[str, ...], tuple[str, ...]]


class PreconditionError(Exception):
    """An analysis was invoked outside its defining assumptions.

    Carries the counterexample trace that breaks the assumption, so callers
    can report why the whole analysis is undefined rather than silently
    returning false.
    """

    def __init__(self, message: str, counterexample: tuple[str, ...] | None = None):
        super().__init__(message)
        self.counterexample = counterexample


def environment_key(e: Lts) -> EnvKey:
    return (e.states, e.alphabet.actions)


@dataclass(frozen=True)
class Deviation:
    """Canonical sorted set of extra environment transitions."""

    triples: tuple[Triple, ...]
    env: EnvKey

    @cached_property
    def triple_set(self) -> frozenset[Triple]:
        return frozenset(self.triples)

    def __len__(self) -> int:
        return len(self.triples)

    def _check_env(self, other: Deviation) -> None:
        if self.env != other.env:
            raise ValueError("deviations over different environments are incomparable")

    def __lt__(self, other: Deviation) -> bool:
        self._check_env(other)
        return self.triples < other.triples

    def __le__(self, other: Deviation) -> bool:
        self._check_env(other)
        return self.triples <= other.triples

    def named(self, e: Lts) -> list[tuple[str, str, str]]:
        return [e.triple_names(t) for t in self.triples]


def full_deviation(e: Lts) -> Deviation:
    """Every transition missing from e: the maximal deviation."""
    if e.kind is not Kind.ENVIRONMENT:
        raise ValueError("deviations are defined over an environment")
    ns, na = len(e.states), len(e.alphabet)
    triples = tuple(
        (s, a, t)
        for s in range(ns)
        for a in range(na)
        for t in range(ns)
        if (s, a, t) not in e.transitions
    )
    return Deviation(triples, environment_key(e))


def canonicalize(raw: Iterable[Triple], e: Lts) -> Deviation:
    """Normalize a raw triple set: drop normative transitions, sort."""
    ns, na = len(e.states), len(e.alphabet)
    cleaned = set()
    for triple in raw:
        s, a, t = triple
        if not (0 <= s < ns and 0 <= a < na and 0 <= t < ns):
            raise ValueError(f"triple {triple} indexes outside the environment")
        if triple not in e.transitions:
            cleaned.add(triple)
    return Deviation(tuple(sorted(cleaned)), environment_key(e))


def apply_deviation(e: Lts, d: Deviation) -> Lts:
    """The deviated environment: e with d's transitions added."""
    if environment_key(e) != d.env:
        raise ValueError("deviation does not belong to this environment")
    if not d.triples:
        return e
    return Lts(e.states, e.alphabet, e.transitions | d.triple_set, e.initial, e.kind)


def is_robust(e: Lts, c: Lts, p_saf: Lts, d: Deviation) -> bool:
    """Does the closed loop still satisfy p_saf under the deviated environment?

    Requires the undeviated closed loop to satisfy p_saf; otherwise the
    question is undefined and a PreconditionError is raised.
    """
    baseline = check_safety(parallel_compose(e, c), p_saf)
    if not baseline.satisfied:
        raise PreconditionError(
            "closed loop violates the safety property", baseline.counterexample
        )
    return check_safety(parallel_compose(apply_deviation(e, d), c), p_saf).satisfied


def satisfies_env(e: Lts, d: Deviation, p_env: Lts) -> bool:
    """Is the deviated environment feasible, i.e. within the constraint?"""
    baseline = check_safety(e, p_env)
    if not baseline.satisfied:
        raise PreconditionError(
            "environment violates the constraint", baseline.counterexample
        )
    return check_safety(apply_deviation(e, d), p_env).satisfied


def at_least_as_powerful(d1: Deviation, d2: Deviation) -> bool:
    """d1 deviates the environment at least as much as d2 (d2 is a subset)."""
    d1._check_env(d2)
    return d2.triple_set <= d1.triple_set

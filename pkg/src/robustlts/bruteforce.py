"""Exhaustive robustness computation over all deviation subsets.

This is the correctness oracle for the game-based engine: it decides each
candidate deviation by a direct reachability check on the composed system,
sharing nothing with the meta-system construction. It also hosts the
maximality filter used by every analysis.
"""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass
from typing import Iterable

from .deviation import (
    Deviation,
    PreconditionError,
    canonicalize,
    full_deviation,
)
from .lts import Lts, Triple, check_safety, parallel_compose
from .stats import Deadline, Stats, check_deadline

DEFAULT_CAP = 24


class CapExceeded(RuntimeError):
    """The deviation space is too large for exhaustive enumeration."""


@dataclass(frozen=True)
class Delta:
    """The antichain of maximal robust (and feasible) deviations."""

    deviations: tuple[Deviation, ...]
    stats: Stats

    def __len__(self) -> int:
        return len(self.deviations)

    def max_size(self) -> int:
        return max((len(d) for d in self.deviations), default=0)


def maximal_filter(ds: Iterable[Deviation]) -> frozenset[Deviation]:
    """Keep only the subset-maximal deviations (an antichain)."""
    items = sorted(set(ds), key=lambda d: (-len(d.triples), d.triples))
    kept: list[Deviation] = []
    for d in items:
        if not any(d.triple_set <= k.triple_set for k in kept):
            kept.append(d)
    return frozenset(kept)


class _ProductChecker:
    """Reachability of the property's error state in env || others || prop,
    where the environment's transitions vary per call by an added triple set."""

    def __init__(self, env: Lts, others: tuple[Lts, ...], prop: Lts):
        parts = (env, *others, prop)
        actions: list[str] = []
        seen: set[str] = set()
        for part in parts:
            for a in part.alphabet.actions:
                if a not in seen:
                    seen.add(a)
                    actions.append(a)
        self.n_parts = len(parts)
        self.err = prop.err
        self.prop_pos = self.n_parts - 1
        self.initial = tuple(p.initial for p in parts)
        # per part, per union action: move map or None (action not in alphabet)
        self.tables: list[list[dict[int, tuple[int, ...]] | None]] = []
        for part in parts:
            row: list[dict[int, tuple[int, ...]] | None] = []
            for name in actions:
                ai = part.alphabet.index.get(name)
                row.append(None if ai is None else part.action_moves[ai])
            self.tables.append(row)
        self.env_action_ids = [actions.index(a) for a in env.alphabet.actions]
        self.n_actions = len(actions)

    def err_reachable(self, extra: Iterable[Triple]) -> bool:
        if self.err is None:
            return False
        # overlay the deviation on the environment's move tables; deviations
        # range over the environment's own alphabet, so every overlaid action
        # has a (possibly empty) base row
        added: dict[int, dict[int, tuple[int, ...]]] = {}
        for (s, a, t) in sorted(extra):
            ai = self.env_action_ids[a]
            per_action = added.setdefault(ai, {})
            per_action[s] = per_action.get(s, ()) + (t,)

        start = self.initial
        if start[self.prop_pos] == self.err:
            return True
        visited = {start}
        stack = [start]
        n = self.n_parts
        tables = self.tables
        empty: dict[int, tuple[int, ...]] = {}
        while stack:
            cur = stack.pop()
            for ai in range(self.n_actions):
                targets: list[tuple[int, ...]] = []
                blocked = False
                for pi in range(n):
                    row = tables[pi][ai]
                    if row is None:
                        targets.append((cur[pi],))
                        continue
                    ts = row.get(cur[pi], ())
                    if pi == 0:
                        ts = ts + added.get(ai, empty).get(cur[0], ())
                    if not ts:
                        blocked = True
                        break
                    targets.append(ts)
                if blocked:
                    continue
                for tgt in itertools.product(*targets):
                    if tgt in visited:
                        continue
                    if tgt[self.prop_pos] == self.err:
                        return True
                    visited.add(tgt)
                    stack.append(tgt)
        return False


def bruteforce_delta(
    e: Lts,
    c: Lts,
    p_saf: Lts,
    p_env: Lts | None = None,
    *,
    cap: int = DEFAULT_CAP,
    prune: bool = True,
    deadline: Deadline | None = None,
) -> Delta:
    """Enumerate every deviation subset; keep the maximal robust feasible ones.

    With prune=True, subsets of an already accepted deviation are skipped
    (sound by anti-monotonicity of safety under trace inclusion). With
    prune=False every subset is checked and the result is self-validated:
    each robust feasible subset must be covered by some member.
    """
    candidates = full_deviation(e).triples
    n = len(candidates)
    if n > cap:
        raise CapExceeded(f"{n} candidate transitions exceed the cap of {cap}")

    baseline = check_safety(parallel_compose(e, c), p_saf)
    if not baseline.satisfied:
        raise PreconditionError(
            "closed loop violates the safety property", baseline.counterexample
        )
    if p_env is not None:
        feasible0 = check_safety(e, p_env)
        if not feasible0.satisfied:
            raise PreconditionError(
                "environment violates the constraint", feasible0.counterexample
            )

    started = time.monotonic()
    safety = _ProductChecker(e, (c,), p_saf)
    constraint = None if p_env is None else _ProductChecker(e, (), p_env)

    accepted: list[frozenset[Triple]] = []
    passing: list[frozenset[Triple]] = []
    examined = 0
    for k in range(n, -1, -1):
        for combo in itertools.combinations(range(n), k):
            triples = frozenset(candidates[i] for i in combo)
            if prune and any(triples <= acc for acc in accepted):
                continue
            examined += 1
            if examined % 256 == 0:
                check_deadline(deadline)
            if safety.err_reachable(triples):
                continue
            if constraint is not None and constraint.err_reachable(triples):
                continue
            if prune:
                accepted.append(triples)
            else:
                passing.append(triples)

    if prune:
        members = maximal_filter(canonicalize(ts, e) for ts in accepted)
    else:
        members = maximal_filter(canonicalize(ts, e) for ts in passing)
        member_sets = [m.triple_set for m in members]
        for ts in passing:
            if not any(ts <= m for m in member_sets):
                raise RuntimeError("oracle self-check failed: uncovered robust deviation")

    wall_ms = int((time.monotonic() - started) * 1000)
    stats = Stats(subsets_examined=examined, wall_ms=wall_ms)
    return Delta(tuple(sorted(members)), stats)

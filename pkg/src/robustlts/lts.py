"""Finite labeled transition systems: composition, determinism and safety checks.

States and actions are interned to dense integer indices; transitions are
index triples ``(source, action, target)``. All values are immutable and
every operation is a pure function, so instances can be shared freely.
"""

from __future__ import annotations

import itertools
import warnings
from collections import deque
from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from typing import Iterable, Iterator

Triple = tuple[int, int, int]

ERR = "err"


class Kind(Enum):
    ENVIRONMENT = "environment"
    CONTROLLER = "controller"
    PROPERTY = "property"
    CONSTRAINT = "constraint"
    DERIVED = "derived"


#: kinds whose state named "err" carries error semantics (a derived system
#: only contains an "err" state when a composition collapsed one into it)
ERR_KINDS = frozenset({Kind.PROPERTY, Kind.CONSTRAINT, Kind.DERIVED})


@dataclass(frozen=True)
class Alphabet:
    """Ordered set of unique action names with dense indices."""

    actions: tuple[str, ...]

    def __post_init__(self) -> None:
        if not all(isinstance(a, str) and a for a in self.actions):
            raise ValueError("action names must be non-empty strings")
        if len(set(self.actions)) != len(self.actions):
            raise ValueError("duplicate action name")

    @cached_property
    def index(self) -> dict[str, int]:
        return {a: i for i, a in enumerate(self.actions)}

    def __len__(self) -> int:
        return len(self.actions)

    def __iter__(self) -> Iterator[str]:
        return iter(self.actions)

    def __contains__(self, action: object) -> bool:
        return action in self.index

    def union(self, other: Alphabet) -> Alphabet:
        """Ordered union: this alphabet first, then the other's new actions."""
        extra = tuple(a for a in other.actions if a not in self.index)
        return Alphabet(self.actions + extra)


@dataclass(frozen=True)
class Verdict:
    """Outcome of a safety check, with a shortest violating trace if any."""

    satisfied: bool
    counterexample: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        if self.satisfied != (self.counterexample is None):
            raise ValueError("satisfied verdicts carry no counterexample")


@dataclass(frozen=True)
class Lts:
    """A finite labeled transition system with a designated initial state."""

    states: tuple[str, ...]
    alphabet: Alphabet
    transitions: frozenset[Triple]
    initial: int
    kind: Kind

    def __post_init__(self) -> None:
        if not self.states:
            raise ValueError("an LTS needs at least one state")
        if not all(isinstance(s, str) and s for s in self.states):
            raise ValueError("state names must be non-empty strings")
        if len(set(self.states)) != len(self.states):
            raise ValueError("duplicate state name")
        if not (0 <= self.initial < len(self.states)):
            raise ValueError("initial state index out of range")
        ns, na = len(self.states), len(self.alphabet)
        for (s, a, t) in self.transitions:
            if not (0 <= s < ns and 0 <= a < na and 0 <= t < ns):
                raise ValueError(f"transition {(s, a, t)} indexes outside the LTS")
        if self.err is not None:
            for (s, _, _) in self.transitions:
                if s == self.err:
                    raise ValueError(f"'{ERR}' must be a sink state")

    @cached_property
    def state_index(self) -> dict[str, int]:
        return {name: i for i, name in enumerate(self.states)}

    @cached_property
    def err(self) -> int | None:
        """Index of the error state, for kinds where "err" is meaningful."""
        if self.kind in ERR_KINDS:
            for i, name in enumerate(self.states):
                if name == ERR:
                    return i
        return None

    @cached_property
    def action_moves(self) -> tuple[dict[int, tuple[int, ...]], ...]:
        """Per action: map from source state to its sorted target states."""
        per: list[dict[int, list[int]]] = [{} for _ in self.alphabet.actions]
        for (s, a, t) in sorted(self.transitions):
            per[a].setdefault(s, []).append(t)
        return tuple({s: tuple(ts) for s, ts in row.items()} for row in per)

    def sorted_transitions(self) -> list[Triple]:
        return sorted(self.transitions)

    def triple_names(self, triple: Triple) -> tuple[str, str, str]:
        s, a, t = triple
        return (self.states[s], self.alphabet.actions[a], self.states[t])

    def with_kind(self, kind: Kind) -> Lts:
        if kind is self.kind:
            return self
        return Lts(self.states, self.alphabet, self.transitions, self.initial, kind)

    @classmethod
    def build(
        cls,
        kind: Kind,
        states: Iterable[str],
        actions: Iterable[str],
        transitions: Iterable[tuple[str, str, str]],
        initial: str,
    ) -> Lts:
        """Construct from named states/actions/transitions."""
        state_list = list(states)
        action_list = list(actions)
        sidx = {s: i for i, s in enumerate(state_list)}
        aidx = {a: i for i, a in enumerate(action_list)}
        triples = frozenset((sidx[s], aidx[a], sidx[t]) for (s, a, t) in transitions)
        return cls(tuple(state_list), Alphabet(tuple(action_list)), triples, sidx[initial], kind)


def _move_tables(parts: tuple[Lts, ...], actions: Alphabet):
    """Per part, per union-action: the part's move map, or None if the action
    is not in the part's alphabet (in which case the part does not move)."""
    tables = []
    for part in parts:
        row: list[dict[int, tuple[int, ...]] | None] = []
        for name in actions:
            ai = part.alphabet.index.get(name)
            row.append(None if ai is None else part.action_moves[ai])
        tables.append(row)
    return tables


def _union_alphabet(parts: tuple[Lts, ...]) -> Alphabet:
    acc = parts[0].alphabet
    for part in parts[1:]:
        acc = acc.union(part.alphabet)
    return acc


def _erroneous(parts: tuple[Lts, ...], combo: tuple[int, ...]) -> bool:
    return any(p.err is not None and combo[i] == p.err for i, p in enumerate(parts))


def parallel_compose(a: Lts, b: Lts) -> Lts:
    """Synchronous product: shared actions synchronize, the rest interleave.

    Only states reachable from the joint initial state are kept. Product
    states are named "(na,nb)". Any product state in which a property-like
    component sits at its error state is collapsed into a single "err" sink.
    """
    parts = (a, b)
    actions = _union_alphabet(parts)
    tables = _move_tables(parts, actions)

    names: list[str] = []
    index: dict[tuple[int, ...] | str, int] = {}
    transitions: set[Triple] = set()

    def register(combo: tuple[int, ...]) -> int:
        key: tuple[int, ...] | str = ERR if _erroneous(parts, combo) else combo
        got = index.get(key)
        if got is not None:
            return got
        idx = len(names)
        index[key] = idx
        names.append(ERR if key == ERR else f"({a.states[combo[0]]},{b.states[combo[1]]})")
        if key != ERR:
            queue.append((idx, combo))
        return idx

    queue: deque[tuple[int, tuple[int, ...]]] = deque()
    register((a.initial, b.initial))
    while queue:
        src, combo = queue.popleft()
        for ai in range(len(actions)):
            targets = []
            blocked = False
            for pi in range(2):
                moves = tables[pi][ai]
                if moves is None:
                    targets.append((combo[pi],))
                    continue
                ts = moves.get(combo[pi])
                if ts is None:
                    blocked = True
                    break
                targets.append(ts)
            if blocked:
                continue
            for tgt in itertools.product(*targets):
                transitions.add((src, ai, register(tgt)))

    return Lts(tuple(names), actions, frozenset(transitions), 0, Kind.DERIVED)


def compose_many(parts: Iterable[Lts]) -> Lts:
    """Left fold of parallel_compose; the fold order only affects naming."""
    items = list(parts)
    if not items:
        raise ValueError("cannot compose an empty list")
    acc = items[0]
    for nxt in items[1:]:
        acc = parallel_compose(acc, nxt)
    return acc


def is_deterministic(e: Lts) -> bool:
    """True iff no state has two distinct successors on the same action."""
    return all(len(ts) <= 1 for row in e.action_moves for ts in row.values())


def check_safety(system: Lts, prop: Lts) -> Verdict:
    """Model check ``system || prop`` for reachability of prop's error state.

    The counterexample, if any, is the lexicographically least shortest
    action sequence that drives prop into "err" (breadth-first search,
    ties broken by action index then target-state index).
    """
    if prop.kind not in ERR_KINDS:
        raise ValueError("safety checks need a property, constraint or derived monitor")
    if prop.err is None:
        warnings.warn("property has no error state: vacuously satisfied", stacklevel=2)
        return Verdict(True)

    parts = (system, prop)
    actions = _union_alphabet(parts)
    tables = _move_tables(parts, actions)
    err = prop.err

    start = (system.initial, prop.initial)
    if start[1] == err:
        return Verdict(False, ())
    parents: dict[tuple[int, int], tuple[tuple[int, int] | None, str | None]] = {start: (None, None)}
    queue: deque[tuple[int, int]] = deque([start])
    while queue:
        cur = queue.popleft()
        for ai, action in enumerate(actions.actions):
            targets = []
            blocked = False
            for pi in range(2):
                moves = tables[pi][ai]
                if moves is None:
                    targets.append((cur[pi],))
                    continue
                ts = moves.get(cur[pi])
                if ts is None:
                    blocked = True
                    break
                targets.append(ts)
            if blocked:
                continue
            for tgt in itertools.product(*targets):
                if tgt in parents:
                    continue
                parents[tgt] = (cur, action)
                if tgt[1] == err:
                    trace: list[str] = [action]
                    back: tuple[int, int] | None = cur
                    while back is not None:
                        prev, act = parents[back]
                        if act is not None:
                            trace.append(act)
                        back = prev
                    return Verdict(False, tuple(reversed(trace)))
                queue.append(tgt)
    return Verdict(True)


def complete_property(prop: Lts) -> Lts:
    """Route every missing (state, action) pair of a property to "err".

    Creates the error state if needed; idempotent. States that already have
    an outgoing transition on an action keep it untouched.
    """
    if prop.kind not in (Kind.PROPERTY, Kind.CONSTRAINT):
        raise ValueError("only properties and constraints can be completed")
    present: set[tuple[int, int]] = {(s, a) for (s, a, _) in prop.transitions}
    err = prop.err
    missing = [
        (s, a)
        for s in range(len(prop.states))
        for a in range(len(prop.alphabet))
        if s != err and (s, a) not in present
    ]
    if not missing:
        return prop
    states = prop.states
    if err is None:
        err = len(states)
        states = states + (ERR,)
    new_transitions = frozenset(prop.transitions | {(s, a, err) for (s, a) in missing})
    return Lts(states, prop.alphabet, new_transitions, prop.initial, prop.kind)

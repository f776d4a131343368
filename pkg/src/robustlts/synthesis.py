"""Game-based robustness computation over a meta-system.

The meta-system is the product of a deviated environment, the controller
and the safety property, with every product edge tagged by the environment
transition that backs it. Edges backed by a normative environment
transition (or by no environment move at all) are uncontrollable; edges
backed by a deviation may be disabled. Maximal robust deviations fall out
of enumerating sub-games that stay inside the winning set.

State sets are integer bitmasks throughout: subset enumeration over the
winning set is the hot path and mask arithmetic keeps it cheap.
"""

from __future__ import annotations

import random
import time
from dataclasses import dataclass
from functools import cached_property
from typing import Iterator

from .bruteforce import Delta, maximal_filter
from .deviation import (
    Deviation,
    PreconditionError,
    apply_deviation,
    canonicalize,
    environment_key,
)
from .lts import ERR, Kind, Lts, Triple, check_safety, parallel_compose
from .stats import Deadline, Stats, check_deadline

ALL_SUBSETS = "all-subsets"
CONNECTED_HEURISTIC = "connected-heuristic"
STRATEGIES = (ALL_SUBSETS, CONNECTED_HEURISTIC)

StateSet = int  # bitmask over meta-system state indices


def iter_bits(mask: int) -> Iterator[int]:
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low


@dataclass(frozen=True)
class MetaEdge:
    src: int
    action: int
    dst: int
    env_triple: Triple | None  # None when the environment does not move
    env_backed: bool  # True iff undeletable (normative or no env involvement)


@dataclass(frozen=True)
class MetaSystem:
    """Product of deviated environment, controller and property with
    per-edge provenance and a single collapsed error sink."""

    system: Lts
    edges: tuple[MetaEdge, ...]
    err: int | None
    env: Lts
    deviation: Deviation

    @property
    def initial(self) -> int:
        return self.system.initial

    @property
    def size(self) -> int:
        return len(self.system.states)

    @cached_property
    def full_mask(self) -> int:
        return (1 << self.size) - 1

    @cached_property
    def env_succ_mask(self) -> tuple[int, ...]:
        """Per state: bitmask of successors along environment-backed edges."""
        masks = [0] * self.size
        for edge in self.edges:
            if edge.env_backed:
                masks[edge.src] |= 1 << edge.dst
        return tuple(masks)

    @cached_property
    def dev_succ_mask(self) -> tuple[int, ...]:
        """Per state: bitmask of successors along deviation-backed edges."""
        masks = [0] * self.size
        for edge in self.edges:
            if not edge.env_backed:
                masks[edge.src] |= 1 << edge.dst
        return tuple(masks)

    @cached_property
    def dev_edges(self) -> tuple[tuple[int, int, Triple], ...]:
        """(src, dst, environment triple) of every deviation-backed edge."""
        return tuple(
            (e.src, e.dst, e.env_triple)
            for e in self.edges
            if not e.env_backed and e.env_triple is not None
        )

    @cached_property
    def dev_out(self) -> tuple[tuple[tuple[int, Triple], ...], ...]:
        """Per state: (target, triple) of its outgoing deviation-backed edges."""
        out: list[list[tuple[int, Triple]]] = [[] for _ in range(self.size)]
        for (src, dst, triple) in self.dev_edges:
            out[src].append((dst, triple))
        return tuple(tuple(row) for row in out)

    @cached_property
    def dev_in(self) -> tuple[tuple[tuple[int, Triple], ...], ...]:
        """Per state: (source, triple) of its incoming deviation-backed edges."""
        inc: list[list[tuple[int, Triple]]] = [[] for _ in range(self.size)]
        for (src, dst, triple) in self.dev_edges:
            inc[dst].append((src, triple))
        return tuple(tuple(row) for row in inc)


@dataclass(frozen=True)
class MetaController:
    """A sub-game: a state set avoiding err that drops only deviation edges.

    The retained transition relation is implicit: every meta-system edge
    with both endpoints inside ``states``.
    """

    states: StateSet
    initial: int


def build_meta_system(e: Lts, c: Lts, p_saf: Lts, d: Deviation) -> MetaSystem:
    """Compose the deviated environment with controller and property.

    Restricted to reachable states; all product states whose property
    component is the error state collapse into one sink named "err".
    """
    if p_saf.err is None:
        raise ValueError("meta-system needs a property with an error state")
    e_dev = apply_deviation(e, d)
    parts = (e_dev, c, p_saf)
    actions = e_dev.alphabet.union(c.alphabet).union(p_saf.alphabet)
    tables = []
    env_action_of: list[int | None] = []
    for name in actions:
        env_action_of.append(e.alphabet.index.get(name))
    for part in parts:
        row = []
        for name in actions:
            ai = part.alphabet.index.get(name)
            row.append(None if ai is None else part.action_moves[ai])
        tables.append(row)

    normative = e.transitions
    p_err = p_saf.err
    names: list[str] = []
    index: dict[tuple[int, int, int] | str, int] = {}
    combos: list[tuple[int, int, int] | None] = []
    edges: list[MetaEdge] = []
    queue: list[int] = []

    def register(combo: tuple[int, int, int]) -> int:
        key: tuple[int, int, int] | str = ERR if combo[2] == p_err else combo
        got = index.get(key)
        if got is not None:
            return got
        idx = len(names)
        index[key] = idx
        if key == ERR:
            names.append(ERR)
            combos.append(None)
        else:
            names.append(
                f"({e.states[combo[0]]},{c.states[combo[1]]},{p_saf.states[combo[2]]})"
            )
            combos.append(combo)
            queue.append(idx)
        return idx

    register((e.initial, c.initial, p_saf.initial))
    cursor = 0
    while cursor < len(queue):
        src = queue[cursor]
        cursor += 1
        combo = combos[src]
        assert combo is not None
        for ai in range(len(actions)):
            targets = []
            blocked = False
            for pi in range(3):
                row = tables[pi][ai]
                if row is None:
                    targets.append((combo[pi],))
                    continue
                ts = row.get(combo[pi])
                if ts is None:
                    blocked = True
                    break
                targets.append(ts)
            if blocked:
                continue
            env_ai = env_action_of[ai]
            for qe in targets[0]:
                if env_ai is None:
                    env_triple = None
                    backed = True
                else:
                    env_triple = (combo[0], env_ai, qe)
                    backed = env_triple in normative
                for qc in targets[1]:
                    for qp in targets[2]:
                        dst = register((qe, qc, qp))
                        edges.append(MetaEdge(src, ai, dst, env_triple, backed))

    transitions = frozenset((edge.src, edge.action, edge.dst) for edge in edges)
    system = Lts(tuple(names), actions, transitions, 0, Kind.DERIVED)
    err_idx = index.get(ERR)
    return MetaSystem(system, tuple(edges), err_idx, e, d)


def env_successors(f: MetaSystem, q: int) -> frozenset[int]:
    """Targets of environment-backed (undeletable) edges from q."""
    return frozenset(iter_bits(f.env_succ_mask[q]))


def invariant_set(f: MetaSystem, s: StateSet) -> StateSet:
    """Greatest subset of s closed under environment-backed successors.

    Computed as the greatest fixed point of pruning every state with an
    undeletable edge escaping the set; stabilizes within |Q| iterations.
    """
    masks = f.env_succ_mask
    cur = s
    changed = True
    while changed:
        changed = False
        for q in iter_bits(cur):
            if masks[q] & ~cur:
                cur &= ~(1 << q)
                changed = True
    return cur


def winning_set(f: MetaSystem) -> StateSet:
    """States from which the error sink is avoidable: Inv over the non-error states."""
    mask = f.full_mask
    if f.err is not None:
        mask &= ~(1 << f.err)
    return invariant_set(f, mask)


def meta_controller(s: StateSet, f: MetaSystem) -> MetaController | None:
    """Restrict the game to inv(s); absent when the initial state falls out."""
    closed = invariant_set(f, s)
    if not (closed >> f.initial) & 1:
        return None
    if f.err is not None and (closed >> f.err) & 1:
        raise ValueError("meta-controller must avoid the error sink")
    return MetaController(closed, f.initial)


def deletion_set(f: MetaSystem, t: MetaController, d: Deviation) -> frozenset[Triple]:
    """Environment triples behind the edges the meta-controller drops.

    Dropped edges are those leaving t's state set from inside it; they must
    all be deviation-backed, which the invariant closure guarantees.
    """
    states = t.states
    for q in iter_bits(states):
        if f.env_succ_mask[q] & ~states:
            raise RuntimeError("meta-controller drops an undeletable edge")
    dropped = {
        triple
        for (src, dst, triple) in f.dev_edges
        if (states >> src) & 1 and not (states >> dst) & 1
    }
    return frozenset(dropped) & d.triple_set


def _env_closure(f: MetaSystem, mask: int) -> int:
    masks = f.env_succ_mask
    frontier = mask
    while frontier:
        new = 0
        for q in iter_bits(frontier):
            new |= masks[q] & ~mask
        mask |= new
        frontier = new
    return mask


def _grow_subgames(
    f: MetaSystem, w: StateSet, deadline: Deadline | None
) -> Iterator[tuple[StateSet, int]]:
    """Depth-first growth of closed sub-games.

    Yields (state set, deletion fingerprint) for subsets of w that contain
    the initial state, are closed under environment-backed successors, and
    are reachable from the initial state inside themselves. The fingerprint
    is a sum of per-edge keys over the currently dropped deviation-backed
    edges: equal fingerprints identify equal dropped-edge sets without
    carrying them, so the caller materializes each distinct deletion set
    once (via deletion_set).

    Frontier states whose inclusion cannot force any new deletion (their
    closure's deviation edges all stay inside the grown set) are pulled in
    greedily instead of branching: including them only ever enlarges the
    surviving deviation, so every maximal deviation is still produced.
    """
    if not (w >> f.initial) & 1:
        return
    env_succ = f.env_succ_mask
    dev_succ = f.dev_succ_mask
    size = f.size

    # absolute environment-closure of each single state and the union of
    # deviation successors over that closure; a state is always added
    # together with its whole closure, so both are fixed per state
    closure: list[int] = [0] * size
    dev_target: list[int] = [0] * size
    for v in range(size):
        mask = 0
        pending = 1 << v
        while pending:
            mask |= pending
            nxt = 0
            for q in iter_bits(pending):
                nxt |= env_succ[q] & ~mask
            pending = nxt
        closure[v] = mask
        targets = 0
        for q in iter_bits(mask):
            targets |= dev_succ[q]
        dev_target[v] = targets

    # fixed random keys per deviation-backed edge (deterministic seed)
    rng = random.Random(0x5EED)
    out_keyed: list[list[tuple[int, int]]] = [[] for _ in range(size)]
    in_keyed: list[list[tuple[int, int]]] = [[] for _ in range(size)]
    for (src, dst, _) in f.dev_edges:
        key = rng.getrandbits(64)
        out_keyed[src].append((dst, key))
        in_keyed[dst].append((src, key))

    def absorb(state: StateSet, union: int, finger: int, grown: StateSet) -> tuple[int, int]:
        """Account for the states in grown minus state; returns the widened
        deviation-successor union and the updated fingerprint."""
        for q in iter_bits(grown & ~state):
            union |= dev_succ[q]
            for (dst, key) in out_keyed[q]:
                if not (grown >> dst) & 1:
                    finger += key
            for (src, key) in in_keyed[q]:
                if (state >> src) & 1:
                    finger -= key
        return union, finger

    def saturate(state: StateSet, union: int, finger: int) -> tuple[StateSet, int, int]:
        """Greedily include frontier states that cause no new deletions."""
        while True:
            frontier = union & w & ~state
            progressed = False
            for v in iter_bits(frontier):
                if (state >> v) & 1:
                    continue  # absorbed by an earlier free group this pass
                grown = state | closure[v]
                if grown & ~w or dev_target[v] & ~grown:
                    continue
                union, finger = absorb(state, union, finger, grown)
                state = grown
                progressed = True
            if not progressed:
                return state, union, finger

    seed = closure[f.initial]
    if seed & ~w:
        return
    union0, finger0 = absorb(0, 0, 0, seed)
    start, union0, finger0 = saturate(seed, union0, finger0)

    seen = {start}
    stack = [(start, union0, finger0)]
    while stack:
        current, dev_union, finger = stack.pop()
        yield current, finger
        check_deadline(deadline)
        frontier = dev_union & w & ~current
        for v in iter_bits(frontier):
            grown = current | closure[v]
            if grown & ~w:
                continue
            new_union, new_finger = absorb(current, dev_union, finger, grown)
            grown, new_union, new_finger = saturate(grown, new_union, new_finger)
            if grown not in seen:
                seen.add(grown)
                stack.append((grown, new_union, new_finger))

def connected_subsets(
    f: MetaSystem, w: StateSet, deadline: Deadline | None = None
) -> Iterator[StateSet]:
    """Candidate sub-games grown by depth-first search from the initial state.

    Yields exactly the subsets of w that contain the initial state, are
    closed under environment-backed successors, and are reachable from the
    initial state inside themselves. Growth is guided by the deviation-backed
    frontier: undeletable successors are pulled in by closure, deletable ones
    branch the search. Every yield is therefore connected, and disconnected
    state groups (which only produce redundant deletion sets) are skipped.
    Equals the all-subsets strategy after maximality filtering: any sub-game
    is dominated by the reachable core of its invariant closure, which this
    search visits.
    """
    for states, _ in _grow_subgames(f, w, deadline):
        yield states


def _all_subsets(w: StateSet, deadline: Deadline | None) -> Iterator[StateSet]:
    positions = list(iter_bits(w))
    n = len(positions)
    for k in range(1, 1 << n):
        if k % 2048 == 0:
            check_deadline(deadline)
        mask = 0
        rest = k
        i = 0
        while rest:
            if rest & 1:
                mask |= 1 << positions[i]
            rest >>= 1
            i += 1
        yield mask


def compute_robustness(
    e: Lts,
    c: Lts,
    p: Lts,
    d: Deviation,
    strategy: str = CONNECTED_HEURISTIC,
    *,
    deadline: Deadline | None = None,
    check_preconditions: bool = True,
) -> Delta:
    """Maximal robust sub-deviations of d via the meta-system safety game.

    Builds the meta-system for the deviated environment, computes the
    winning set, and for every candidate state subset with a viable
    meta-controller records the deviation that survives the controller's
    deletions. Candidate subsets whose invariant closure loses the initial
    state yield no deviation and are skipped (an empty sub-game would
    otherwise wrongly admit the full deviation).
    """
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}")
    if check_preconditions:
        baseline = check_safety(parallel_compose(e, c), p)
        if not baseline.satisfied:
            raise PreconditionError(
                "closed loop violates the safety property", baseline.counterexample
            )
    started = time.monotonic()
    f = build_meta_system(e, c, p, d)
    w = winning_set(f)
    if not (w >> f.initial) & 1:
        raise RuntimeError("initial state lost the safety game despite preconditions")

    env_key = environment_key(e)
    records: set[Deviation] = set()
    examined = 0
    controllers = 0
    if strategy == ALL_SUBSETS:
        by_controller: dict[int, Deviation] = {}
        for s in _all_subsets(w, deadline):
            examined += 1
            if examined % 512 == 0:
                check_deadline(deadline)
            t = meta_controller(s, f)
            if t is None:
                continue
            known = by_controller.get(t.states)
            if known is None:
                deleted = deletion_set(f, t, d)
                known = canonicalize(d.triple_set - deleted, e)
                by_controller[t.states] = known
            records.add(known)
        controllers = len(by_controller)
    else:
        # every grown sub-game is already invariant-closed and keeps the
        # initial state, so it is its own meta-controller
        by_finger: dict[int, Deviation] = {}
        for states, finger in _grow_subgames(f, w, deadline):
            examined += 1
            known = by_finger.get(finger)
            if known is None:
                deleted = deletion_set(f, MetaController(states, f.initial), d)
                known = canonicalize(d.triple_set - deleted, e)
                by_finger[finger] = known
            records.add(known)
        controllers = examined

    if not records:
        # no viable sub-game at all cannot happen: w itself is one
        raise RuntimeError("no meta-controller found inside the winning set")
    members = maximal_filter(records)
    wall_ms = int((time.monotonic() - started) * 1000)
    stats = Stats(
        meta_states=f.size,
        winning_set=w.bit_count(),
        subsets_examined=examined,
        meta_controllers=controllers,
        wall_ms=wall_ms,
    )
    assert all(m.env == env_key for m in members)
    return Delta(tuple(sorted(members)), stats)

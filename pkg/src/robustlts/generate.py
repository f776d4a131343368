"""Deterministic generation of small analysis instances.

Used by the oracle-diff harness and the cross-validation test suite: the
sweep walks a structured grid of environment/controller/property shapes,
and the random generator draws seeded instances, both filtered to satisfy
the analysis preconditions and to stay within exhaustive-enumeration reach.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Iterator

from .lts import Alphabet, ERR, Kind, Lts, check_safety, parallel_compose

ACTION_NAMES = ("a", "b", "c", "d")
PRIVATE_ACTION = "m"


@dataclass(frozen=True)
class Instance:
    name: str
    env: Lts
    controller: Lts
    prop: Lts
    constraint: Lts | None = None


def _env_from_bits(ne: int, na: int, bits: int) -> Lts:
    triples = []
    pos = 0
    for s in range(ne):
        for a in range(na):
            for t in range(ne):
                if (bits >> pos) & 1:
                    triples.append((s, a, t))
                pos += 1
    return Lts(
        tuple(f"q{i}" for i in range(ne)),
        Alphabet(ACTION_NAMES[:na]),
        frozenset(triples),
        0,
        Kind.ENVIRONMENT,
    )


def _controller_from_digits(nc: int, na: int, digits: list[int]) -> Lts:
    """Deterministic controller: one digit per (state, action); 0 blocks."""
    triples = []
    pos = 0
    for s in range(nc):
        for a in range(na):
            d = digits[pos]
            pos += 1
            if d > 0:
                triples.append((s, a, d - 1))
    return Lts(
        tuple(f"c{i}" for i in range(nc)),
        Alphabet(ACTION_NAMES[:na]),
        frozenset(triples),
        0,
        Kind.CONTROLLER,
    )


def _property_from_digits(np_: int, na: int, digits: list[int]) -> Lts:
    """Total (complete) property over np_ states where the last one is err."""
    states = tuple(f"p{i}" for i in range(np_ - 1)) + (ERR,)
    triples = []
    pos = 0
    for s in range(np_ - 1):
        for a in range(na):
            triples.append((s, a, digits[pos]))
            pos += 1
    return Lts(states, Alphabet(ACTION_NAMES[:na]), frozenset(triples), 0, Kind.PROPERTY)


def _decode(index: int, radix: int, count: int) -> list[int]:
    digits = []
    for _ in range(count):
        index, d = divmod(index, radix)
        digits.append(d)
    return digits


#: (environment states, actions, controller states, property states incl err)
SWEEP_SHAPES = (
    (1, 1, 1, 2),
    (1, 2, 1, 2),
    (2, 1, 1, 2),
    (2, 1, 2, 3),
    (2, 2, 1, 3),
    (2, 2, 2, 2),
    (3, 1, 2, 3),
    (3, 2, 2, 3),
)


def sweep_instances(per_shape: int = 200, max_candidates: int = 10) -> Iterator[Instance]:
    """Deterministic strided walk over the shape grid.

    Instances violating the closed-loop precondition or exceeding the
    candidate budget are dropped, so shapes yield varying counts.
    """
    for (ne, na, nc, np_) in SWEEP_SHAPES:
        env_bits = ne * na * ne
        ctrl_digits = nc * na
        prop_digits = (np_ - 1) * na
        env_total = 1 << env_bits
        ctrl_total = (nc + 1) ** ctrl_digits
        prop_total = np_**prop_digits
        total = env_total * ctrl_total * prop_total
        stride = max(1, total // per_shape)
        for index in range(0, total, stride):
            env_idx, rest = index % env_total, index // env_total
            ctrl_idx, prop_idx = rest % ctrl_total, rest // ctrl_total
            env = _env_from_bits(ne, na, env_idx)
            if env_bits - len(env.transitions) > max_candidates:
                continue
            controller = _controller_from_digits(nc, na, _decode(ctrl_idx, nc + 1, ctrl_digits))
            prop = _property_from_digits(np_, na, _decode(prop_idx, np_, prop_digits))
            if not check_safety(parallel_compose(env, controller), prop).satisfied:
                continue
            yield Instance(f"sweep-{ne}{na}{nc}{np_}-{index}", env, controller, prop)


def random_instance(
    rng: random.Random,
    *,
    with_constraint: bool = False,
    private_actions: bool = False,
    max_candidates: int = 10,
    max_attempts: int = 5000,
) -> Instance:
    """One seeded instance satisfying all analysis preconditions."""
    for attempt in range(max_attempts):
        ne = rng.randint(1, 3)
        na = rng.randint(1, 2)
        nc = rng.randint(1, 2)
        np_ = rng.randint(2, 3)

        env_bits = rng.getrandbits(ne * na * ne)
        env = _env_from_bits(ne, na, env_bits)
        if ne * na * ne - len(env.transitions) > max_candidates:
            continue

        private = private_actions and rng.random() < 0.5
        ctrl_actions = list(ACTION_NAMES[:na]) + ([PRIVATE_ACTION] if private else [])
        triples = []
        for s in range(nc):
            for a in range(len(ctrl_actions)):
                if rng.random() < 0.75:
                    triples.append((s, a, rng.randrange(nc)))
        controller = Lts(
            tuple(f"c{i}" for i in range(nc)),
            Alphabet(tuple(ctrl_actions)),
            frozenset(triples),
            0,
            Kind.CONTROLLER,
        )

        prop_actions = list(ACTION_NAMES[:na])
        if private and rng.random() < 0.5:
            prop_actions.append(PRIVATE_ACTION)
        prop_states = tuple(f"p{i}" for i in range(np_ - 1)) + (ERR,)
        prop_triples = []
        for s in range(np_ - 1):
            for a in range(len(prop_actions)):
                prop_triples.append((s, a, rng.randrange(np_)))
        prop = Lts(
            prop_states, Alphabet(tuple(prop_actions)), frozenset(prop_triples), 0, Kind.PROPERTY
        )

        constraint = None
        if with_constraint:
            ncon = rng.randint(2, 3)
            con_states = tuple(f"g{i}" for i in range(ncon - 1)) + (ERR,)
            con_triples = []
            for s in range(ncon - 1):
                for a in range(na):
                    con_triples.append((s, a, rng.randrange(ncon)))
            constraint = Lts(
                con_states,
                Alphabet(ACTION_NAMES[:na]),
                frozenset(con_triples),
                0,
                Kind.CONSTRAINT,
            )
            if not check_safety(env, constraint).satisfied:
                continue

        if not check_safety(parallel_compose(env, controller), prop).satisfied:
            continue
        return Instance(f"random-{attempt}", env, controller, prop, constraint)
    raise RuntimeError("could not draw a valid instance within the attempt budget")

"""End-to-end analyses: unconstrained and constrained robustness, and
robustness comparison between controllers and between properties."""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum

from .bruteforce import Delta, bruteforce_delta, maximal_filter
from .deviation import (
    Deviation,
    PreconditionError,
    full_deviation,
    is_robust,
    satisfies_env,
)
from .lts import Alphabet, Kind, Lts, check_safety, parallel_compose
from .stats import Deadline, Stats
from .synthesis import CONNECTED_HEURISTIC, compute_robustness

BRUTEFORCE = "bruteforce"
SYNTHESIS = "synthesis"
SYNTHESIS_HEURISTIC = "synthesis-heuristic"
ALGORITHMS = (BRUTEFORCE, SYNTHESIS, SYNTHESIS_HEURISTIC)

_STRATEGY_OF = {SYNTHESIS: "all-subsets", SYNTHESIS_HEURISTIC: "connected-heuristic"}


@dataclass(frozen=True)
class RobustnessReport:
    """A computed robustness envelope plus how it was obtained."""

    delta: Delta
    algorithm: str
    model: str = "<memory>"
    selection: dict[str, str | None] = field(default_factory=dict)
    envelope_stage: Stats | None = None
    synthesis_stages: tuple[Stats, ...] = ()


class CompareVerdict(Enum):
    EQUAL = "equal"
    LEFT_STRICTLY_MORE = "left-strictly-more"
    RIGHT_STRICTLY_MORE = "right-strictly-more"
    INCOMPARABLE = "incomparable"


@dataclass(frozen=True)
class ComparisonResult:
    """Domination verdict between two envelopes, with uncovered witnesses.

    A witness on one side is a maximal deviation of that side's envelope
    contained in no member of the other side's envelope.
    """

    verdict: CompareVerdict
    left: Delta
    right: Delta
    witness_left: Deviation | None = None
    witness_right: Deviation | None = None


def universal_controller(e: Lts) -> Lts:
    """One-state controller enabling every environment action."""
    n = len(e.alphabet)
    return Lts(
        ("all",),
        Alphabet(e.alphabet.actions),
        frozenset((0, a, 0) for a in range(n)),
        0,
        Kind.CONTROLLER,
    )


def _check_closed_loop(e: Lts, c: Lts, p_saf: Lts, label: str = "") -> None:
    verdict = check_safety(parallel_compose(e, c), p_saf)
    if not verdict.satisfied:
        suffix = f" ({label})" if label else ""
        raise PreconditionError(
            f"closed loop violates the safety property{suffix}", verdict.counterexample
        )


def _check_env(e: Lts, p_env: Lts, label: str = "") -> None:
    verdict = check_safety(e, p_env)
    if not verdict.satisfied:
        suffix = f" ({label})" if label else ""
        raise PreconditionError(
            f"environment violates the constraint{suffix}", verdict.counterexample
        )


def _total_stats(stages: list[Stats], wall_ms: int) -> Stats:
    return Stats(
        meta_states=max((s.meta_states for s in stages), default=0),
        winning_set=max((s.winning_set for s in stages), default=0),
        subsets_examined=sum(s.subsets_examined for s in stages),
        meta_controllers=sum(s.meta_controllers for s in stages),
        wall_ms=wall_ms,
    )


def delta_unconstrained(
    e: Lts,
    c: Lts,
    p_saf: Lts,
    algorithm: str = SYNTHESIS_HEURISTIC,
    *,
    deadline: Deadline | None = None,
    cap: int | None = None,
) -> RobustnessReport:
    """Robustness envelope against every possible extra environment transition."""
    if algorithm == BRUTEFORCE:
        kwargs = {} if cap is None else {"cap": cap}
        delta = bruteforce_delta(e, c, p_saf, None, deadline=deadline, **kwargs)
    else:
        _check_closed_loop(e, c, p_saf)
        delta = compute_robustness(
            e,
            c,
            p_saf,
            full_deviation(e),
            _STRATEGY_OF[algorithm],
            deadline=deadline,
            check_preconditions=False,
        )
    return RobustnessReport(
        delta=delta, algorithm=algorithm, synthesis_stages=(delta.stats,)
    )


def delta_constrained(
    e: Lts,
    c: Lts,
    p_saf: Lts,
    p_env: Lts,
    algorithm: str = SYNTHESIS_HEURISTIC,
    *,
    deadline: Deadline | None = None,
    cap: int | None = None,
    jobs: int = 1,
) -> RobustnessReport:
    """Robustness envelope restricted to feasible environment deviations.

    Stage one computes the maximal environment deviations that keep the
    constraint satisfied, by running the game against a controller that
    does not restrain the environment. Stage two computes, inside each such
    envelope, the maximal deviations the actual controller is robust to;
    the union is filtered down to the overall maximal ones.
    """
    started = time.monotonic()
    _check_closed_loop(e, c, p_saf)
    _check_env(e, p_env)
    if algorithm == BRUTEFORCE:
        kwargs = {} if cap is None else {"cap": cap}
        delta = bruteforce_delta(e, c, p_saf, p_env, deadline=deadline, **kwargs)
        return RobustnessReport(
            delta=delta, algorithm=algorithm, synthesis_stages=(delta.stats,)
        )

    strategy = _STRATEGY_OF[algorithm]
    env_delta = compute_robustness(
        e,
        universal_controller(e),
        p_env,
        full_deviation(e),
        strategy,
        deadline=deadline,
        check_preconditions=False,
    )

    def per_envelope(envelope: Deviation) -> Delta:
        return compute_robustness(
            e, c, p_saf, envelope, strategy, deadline=deadline, check_preconditions=False
        )

    envelopes = env_delta.deviations
    if jobs > 1 and len(envelopes) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(per_envelope, envelopes))
    else:
        results = [per_envelope(envelope) for envelope in envelopes]

    members = maximal_filter(d for result in results for d in result.deviations)
    stages = [r.stats for r in results]
    wall_ms = int((time.monotonic() - started) * 1000)
    delta = Delta(tuple(sorted(members)), _total_stats(stages, wall_ms))
    return RobustnessReport(
        delta=delta,
        algorithm=algorithm,
        envelope_stage=env_delta.stats,
        synthesis_stages=tuple(stages),
    )


def compute_delta(
    e: Lts,
    c: Lts,
    p_saf: Lts,
    p_env: Lts | None,
    algorithm: str = SYNTHESIS_HEURISTIC,
    *,
    deadline: Deadline | None = None,
    cap: int | None = None,
    jobs: int = 1,
) -> RobustnessReport:
    """Dispatch on the presence of an environmental constraint."""
    if p_env is None:
        return delta_unconstrained(e, c, p_saf, algorithm, deadline=deadline, cap=cap)
    return delta_constrained(
        e, c, p_saf, p_env, algorithm, deadline=deadline, cap=cap, jobs=jobs
    )


def _dominates(winner: Delta, other: Delta) -> Deviation | None:
    """None when every member of other is covered; else the first uncovered one."""
    for d in other.deviations:
        if not any(d.triple_set <= w.triple_set for w in winner.deviations):
            return d
    return None


def _compare(left: Delta, right: Delta) -> ComparisonResult:
    uncovered_right = _dominates(left, right)  # right member the left cannot match
    uncovered_left = _dominates(right, left)
    if uncovered_right is None and uncovered_left is None:
        verdict = CompareVerdict.EQUAL
    elif uncovered_right is None:
        verdict = CompareVerdict.LEFT_STRICTLY_MORE
    elif uncovered_left is None:
        verdict = CompareVerdict.RIGHT_STRICTLY_MORE
    else:
        verdict = CompareVerdict.INCOMPARABLE
    return ComparisonResult(
        verdict=verdict,
        left=left,
        right=right,
        witness_left=uncovered_left,
        witness_right=uncovered_right,
    )


def compare_controllers(
    e: Lts,
    c1: Lts,
    c2: Lts,
    p_saf: Lts,
    p_env: Lts | None = None,
    algorithm: str = SYNTHESIS_HEURISTIC,
    *,
    deadline: Deadline | None = None,
    jobs: int = 1,
) -> ComparisonResult:
    """Compare two controllers' envelopes under the same environment and property."""
    _check_closed_loop(e, c1, p_saf, "first controller")
    _check_closed_loop(e, c2, p_saf, "second controller")
    if p_env is not None:
        _check_env(e, p_env)
    left = compute_delta(e, c1, p_saf, p_env, algorithm, deadline=deadline, jobs=jobs)
    right = compute_delta(e, c2, p_saf, p_env, algorithm, deadline=deadline, jobs=jobs)
    return _compare(left.delta, right.delta)


def compare_properties(
    e: Lts,
    c: Lts,
    p1: Lts,
    p2: Lts,
    p_env: Lts | None = None,
    algorithm: str = SYNTHESIS_HEURISTIC,
    *,
    deadline: Deadline | None = None,
    jobs: int = 1,
) -> ComparisonResult:
    """Compare the envelopes of one controller under two safety properties."""
    _check_closed_loop(e, c, p1, "first property")
    _check_closed_loop(e, c, p2, "second property")
    if p_env is not None:
        _check_env(e, p_env)
    left = compute_delta(e, c, p1, p_env, algorithm, deadline=deadline, jobs=jobs)
    right = compute_delta(e, c, p2, p_env, algorithm, deadline=deadline, jobs=jobs)
    return _compare(left.delta, right.delta)


def verify_conditions(
    e: Lts, c: Lts, p_saf: Lts, p_env: Lts | None, delta: Delta
) -> None:
    """Re-verify an envelope against its defining conditions.

    Checks that every member is robust, that members form an antichain, and
    that every member is feasible. Raises RuntimeError on the first failure.
    """
    members = delta.deviations
    for d in members:
        if not is_robust(e, c, p_saf, d):
            raise RuntimeError(f"member {d.triples} is not robust")
        if p_env is not None and not satisfies_env(e, d, p_env):
            raise RuntimeError(f"member {d.triples} violates the constraint")
    for i, d1 in enumerate(members):
        for j, d2 in enumerate(members):
            if i != j and d1.triple_set <= d2.triple_set:
                raise RuntimeError("envelope members are not an antichain")

"""Robustness envelopes of discrete controllers against environment deviations.

The toolkit models environments, controllers and safety properties as
finite labeled transition systems, and computes the maximal sets of extra
environment transitions (deviations) under which a controller still
guarantees a safety property, optionally within environmental constraints.
"""

from .bruteforce import CapExceeded, DEFAULT_CAP, Delta, bruteforce_delta, maximal_filter
from .deviation import (
    Deviation,
    PreconditionError,
    apply_deviation,
    at_least_as_powerful,
    canonicalize,
    full_deviation,
    is_robust,
    satisfies_env,
)
from .lts import (
    ERR,
    Alphabet,
    Kind,
    Lts,
    Verdict,
    check_safety,
    complete_property,
    compose_many,
    is_deterministic,
    parallel_compose,
)
from .notation import ModelFile, ParseError, dot_export, parse_model, serialize
from .pipeline import (
    ALGORITHMS,
    CompareVerdict,
    ComparisonResult,
    RobustnessReport,
    compare_controllers,
    compare_properties,
    compute_delta,
    delta_constrained,
    delta_unconstrained,
    universal_controller,
    verify_conditions,
)
from .stats import AnalysisTimeout, Deadline, Stats
from .synthesis import (
    MetaController,
    MetaSystem,
    build_meta_system,
    compute_robustness,
    connected_subsets,
    deletion_set,
    env_successors,
    invariant_set,
    meta_controller,
    winning_set,
)

__version__ = "0.1.0"

__all__ = [
    "ALGORITHMS",
    "Alphabet",
    "AnalysisTimeout",
    "CapExceeded",
    "CompareVerdict",
    "ComparisonResult",
    "DEFAULT_CAP",
    "Deadline",
    "Delta",
    "Deviation",
    "ERR",
    "Kind",
    "Lts",
    "MetaController",
    "MetaSystem",
    "ModelFile",
    "ParseError",
    "PreconditionError",
    "RobustnessReport",
    "Stats",
    "Verdict",
    "apply_deviation",
    "at_least_as_powerful",
    "bruteforce_delta",
    "build_meta_system",
    "canonicalize",
    "check_safety",
    "compare_controllers",
    "compare_properties",
    "complete_property",
    "compose_many",
    "compute_delta",
    "compute_robustness",
    "connected_subsets",
    "delta_constrained",
    "delta_unconstrained",
    "deletion_set",
    "dot_export",
    "env_successors",
    "full_deviation",
    "invariant_set",
    "is_deterministic",
    "is_robust",
    "maximal_filter",
    "meta_controller",
    "parallel_compose",
    "parse_model",
    "satisfies_env",
    "serialize",
    "universal_controller",
    "verify_conditions",
    "winning_set",
]

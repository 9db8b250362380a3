"""Finite quantum measurement scenarios under typical-world sampling.

Exact outcome measures come from operator algebra (:mod:`.scenarios`);
worlds are seeded i.i.d. streams over outcome symbols (:mod:`.worlds`);
mixed states and density matrices live in :mod:`.mixedstate`.
"""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    CapExceededError,
    CompletenessError,
    ConfigError,
    InvariantError,
    TypicalWorldsError,
    ZeroProbabilityError,
)
from .measure import FiniteProbabilitySpace  # noqa: E402
from .quantum import MeasurementFamily, Observable, PureState  # noqa: E402
from .scenarios import Scenario, Stage, bb84, distribution, run  # noqa: E402
from .worlds import sample_world, world_stream  # noqa: E402

__all__ = [
    "CapExceededError",
    "CompletenessError",
    "ConfigError",
    "FiniteProbabilitySpace",
    "InvariantError",
    "MeasurementFamily",
    "Observable",
    "PureState",
    "Scenario",
    "Stage",
    "TypicalWorldsError",
    "ZeroProbabilityError",
    "bb84",
    "distribution",
    "run",
    "sample_world",
    "world_stream",
]

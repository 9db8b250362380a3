"""Multi-stage measurement scenarios, exact outcome measures, and builtin experiments.

A :class:`Scenario` is a joint initial state on a list of subsystem factors
plus an ordered list of :class:`Stage` objects. Each stage applies one
operator from a measurement family to its target factors; a *controlled*
stage picks the family from the outcomes of earlier stages. Unrecorded
stages hold a single unitary and contribute no symbol to outcome tuples.

One repetition of a scenario is one draw from its outcome distribution;
repetitions are i.i.d., so a world is a Bernoulli sequence over outcome
tuples.
"""

from __future__ import annotations

import json
import math
import os
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .errors import CapExceededError, CompletenessError, ConfigError, DimensionError
from .measure import FiniteProbabilitySpace, space_to_json
from .quantum import (
    MeasurementFamily,
    Observable,
    PureState,
    basis_family,
    bb84_basis_family,
    bb84_preparation,
    projective_family,
    unitary_family,
)
from .worlds import (
    BatteryReport,
    WorldPrefix,
    WorldStream,
    statistical_battery,
    world_stream,
)

DEFAULT_CAP = 10**6
CAP_ENV = "TYPICAL_WORLDS_CAP"
#: Branch weights below this are rounding residue of exact zeros.
ZERO_PROB = 1e-20


def tuple_cap() -> int:
    raw = os.environ.get(CAP_ENV)
    if raw is None:
        return DEFAULT_CAP
    try:
        cap = int(raw)
    except ValueError:
        raise ConfigError(f"{CAP_ENV} must be an integer, got {raw!r}") from None
    if cap < 1:
        raise ConfigError(f"{CAP_ENV} must be positive")
    return cap


@dataclass(frozen=True)
class Stage:
    """One step of a scenario.

    Exactly one of ``family`` or ``branches`` is given. With ``branches``,
    ``control`` names the earlier stage (an index) or stages (a tuple of
    indices) whose outcome, or tuple of outcomes, selects the family.
    """

    targets: tuple
    family: MeasurementFamily | None = None
    control: int | tuple | None = None
    branches: Mapping | None = None
    record: bool = True
    name: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "targets", tuple(int(t) for t in self.targets))
        if (self.family is None) == (self.branches is None):
            raise ConfigError("a stage needs exactly one of family or branches")
        if self.branches is not None:
            if self.control is None:
                raise ConfigError("a controlled stage needs control stage indices")
            if not self.branches:
                raise ConfigError("a controlled stage needs at least one branch")
            ctrl = self.control if isinstance(self.control, int) else tuple(int(c) for c in self.control)
            object.__setattr__(self, "control", ctrl)
            object.__setattr__(self, "branches", dict(self.branches))
        if not self.record and any(len(f) != 1 for f in self.families()):
            raise ConfigError("unrecorded stages must hold single-outcome (unitary) families")

    def families(self) -> list[MeasurementFamily]:
        return [self.family] if self.family is not None else list(self.branches.values())

    def family_for(self, outcomes: Sequence) -> MeasurementFamily:
        if self.family is not None:
            return self.family
        if isinstance(self.control, int):
            key = outcomes[self.control]
        else:
            key = tuple(outcomes[c] for c in self.control)
        try:
            return self.branches[key]
        except KeyError:
            raise ConfigError(f"stage {self.name or ''} has no branch for control value {key!r}") from None

    @classmethod
    def measure(cls, targets, family, name=None) -> Stage:
        return cls(tuple(targets), family=family, name=name)

    @classmethod
    def unitary(cls, targets, u, name=None) -> Stage:
        return cls(tuple(targets), family=unitary_family(u), record=False, name=name)

    @classmethod
    def controlled(cls, targets, control, branches, name=None) -> Stage:
        return cls(tuple(targets), control=control, branches=branches, name=name)

    @classmethod
    def controlled_unitary(cls, targets, control, unitaries, name=None) -> Stage:
        fams = {k: unitary_family(u) for k, u in unitaries.items()}
        return cls(tuple(targets), control=control, branches=fams, record=False, name=name)


@dataclass(frozen=True, eq=False)
class Scenario:
    factors: tuple
    initial: PureState
    stages: tuple
    repetitions: int = 100_000
    seed: int = 0
    name: str | None = None

    def __post_init__(self):
        factors = tuple(int(d) for d in self.factors)
        if not factors or any(d < 1 for d in factors):
            raise ConfigError(f"factor dimensions must be positive: {factors}")
        init = self.initial if isinstance(self.initial, PureState) else PureState(self.initial)
        if init.dim != math.prod(factors):
            raise DimensionError(f"initial state has dim {init.dim}, factors give {math.prod(factors)}")
        stages = tuple(self.stages)
        if not stages:
            raise ConfigError("a scenario needs at least one stage")
        for i, st in enumerate(stages):
            linalg.local_dims_check(factors, st.targets)
            tdim = math.prod(factors[t] for t in st.targets)
            for fam in st.families():
                if fam.dim != tdim:
                    raise DimensionError(f"stage {i} family dim {fam.dim} does not match targets dim {tdim}")
            if st.branches is not None:
                ctrl = (st.control,) if isinstance(st.control, int) else st.control
                for c in ctrl:
                    if not 0 <= c < i:
                        raise ConfigError(f"stage {i} is controlled by stage {c}, which is not earlier")
                    if not stages[c].record:
                        raise ConfigError(f"stage {i} is controlled by unrecorded stage {c}")
        if int(self.repetitions) < 0:
            raise ConfigError("repetitions must be non-negative")
        object.__setattr__(self, "factors", factors)
        object.__setattr__(self, "initial", init)
        object.__setattr__(self, "stages", stages)
        object.__setattr__(self, "repetitions", int(self.repetitions))

    @property
    def dim(self) -> int:
        return math.prod(self.factors)

    def recorded(self) -> list[int]:
        return [i for i, st in enumerate(self.stages) if st.record]

    def truncated(self, k: int) -> Scenario:
        """The same experiment stopped after its first ``k`` stages."""
        if not 1 <= k <= len(self.stages):
            raise ConfigError(f"cannot truncate to {k} stages")
        return Scenario(self.factors, self.initial, self.stages[:k], self.repetitions, self.seed, self.name)

    def tuple_space_bound(self) -> int:
        return math.prod(max(len(f) for f in st.families()) for st in self.stages)

    def symbol(self, outcomes: Sequence):
        """Outcome symbol of a full path: the recorded outcomes, bare if only one."""
        rec = tuple(outcomes[i] for i in self.recorded())
        return rec[0] if len(rec) == 1 else rec


def _paths(s: Scenario, apply, start):
    """Depth-first walk over all stage-outcome paths, applying ``apply`` per stage."""
    cap = tuple_cap()
    bound = s.tuple_space_bound()
    if bound > cap:
        raise CapExceededError(f"outcome tuple space of size up to {bound} exceeds cap {cap}")
    out = []

    def walk(i, outcomes, acc):
        if i == len(s.stages):
            out.append((tuple(outcomes), acc))
            return
        st = s.stages[i]
        fam = st.family_for(outcomes)
        for m in fam.outcomes:
            walk(i + 1, outcomes + [m], apply(st, fam.operators[m], acc))

    walk(0, [], start)
    return out


def compile(s: Scenario) -> MeasurementFamily:
    """Single measurement family over outcome symbols equivalent to the whole scenario.

    Each operator is the product of the lifted stage operators, later stages
    on the left.
    """
    paths = _paths(s, lambda st, op, acc: linalg.lift(op, s.factors, st.targets) @ acc, np.eye(s.dim, dtype=complex))
    return MeasurementFamily([(s.symbol(o), op) for o, op in paths])


@dataclass
class OutcomeDistribution:
    """Exact law of one repetition.

    ``space`` lists every outcome symbol, zero-probability ones included;
    ``branches`` holds the unnormalized joint branch vectors and
    ``branch_states`` the normalized ones for positive-probability symbols.
    """

    space: FiniteProbabilitySpace
    branches: dict
    branch_states: dict
    factors: tuple

    def factor_states(self, keep: Sequence[int]) -> dict:
        """Per-symbol post-measurement state of the ``keep`` factors (must be a product cut)."""
        return {k: linalg.factor_vector(v.vector, self.factors, keep) for k, v in self.branch_states.items()}

    def reduced_density(self, keep: Sequence[int]) -> np.ndarray:
        """``sum_x P(x) tr_rest |psi_x><psi_x|`` over the ``keep`` factors."""
        keep = sorted(keep)
        d = math.prod(self.factors[k] for k in keep)
        rho = np.zeros((d, d), dtype=complex)
        for x, st in self.branch_states.items():
            full = np.outer(st.vector, st.vector.conj())
            rho += self.space.prob(x) * linalg.partial_trace(full, self.factors, keep)
        return rho


def distribution(s: Scenario) -> OutcomeDistribution:
    """Enumerate every outcome path; probabilities are squared branch norms."""
    paths = _paths(
        s,
        lambda st, op, v: linalg.apply_local(op, v, s.factors, st.targets),
        s.initial.vector.copy(),
    )
    symbols, probs, branches, states = [], [], {}, {}
    for outcomes, v in paths:
        x = s.symbol(outcomes)
        w = float(np.real(np.vdot(v, v)))
        if w < ZERO_PROB:
            w = 0.0
        symbols.append(x)
        probs.append(w)
        branches[x] = v
        if w > 0:
            states[x] = PureState(v / math.sqrt(w), x)
    total = math.fsum(probs)
    if abs(total - 1) > 1e-9:
        raise CompletenessError(f"branch weights sum to {total!r}")
    probs = [p / total for p in probs]
    return OutcomeDistribution(FiniteProbabilitySpace(tuple(symbols), tuple(probs)), branches, states, s.factors)


@dataclass
class ScenarioRun:
    scenario: Scenario
    distribution: OutcomeDistribution
    world: WorldStream

    def prefix(self, n: int | None = None) -> WorldPrefix:
        return self.world.prefix(self.scenario.repetitions if n is None else n)


def run(s: Scenario, seed: int | None = None, threads: int | None = None) -> ScenarioRun:
    """Exact distribution plus the seeded world stream it governs."""
    dist = distribution(s)
    return ScenarioRun(s, dist, world_stream(dist.space, s.seed if seed is None else seed, threads))


# -------------------------------------------------------------------- builtins

DEFAULT_PSI = (0.6, 0.8)


def sec9(psi=DEFAULT_PSI, A=linalg.PAULI_Z) -> Scenario:
    """Single projective measurement of ``A`` on ``psi``."""
    st = PureState(psi)
    return Scenario((st.dim,), st, (Stage.measure([0], projective_family(Observable(A)), "A"),), name="sec9")


def sec10(psi=DEFAULT_PSI, A=linalg.PAULI_Z, B=linalg.PAULI_X) -> Scenario:
    """``A`` then ``B`` on the same system; outcomes ``(m, l)``."""
    st = PureState(psi)
    stages = (
        Stage.measure([0], projective_family(Observable(A)), "A"),
        Stage.measure([0], projective_family(Observable(B)), "B"),
    )
    return Scenario((st.dim,), st, stages, name="sec10")


def sec11(states=((1.0, 0.0), (2**-0.5, 2**-0.5)), weights=(0.3, 0.7), B=linalg.PAULI_Z) -> Scenario:
    """Ancilla-assisted preparation of non-orthogonal states.

    The composite state is ``sum_m sqrt(p_m) |m> (x) |psi_m>`` on
    ancilla (x) system; the ancilla is read in its computational basis, then
    ``B`` is measured on the system.
    """
    vecs = [PureState(v).vector for v in states]
    if len(vecs) != len(weights):
        raise ConfigError("need one weight per state")
    k, d = len(vecs), vecs[0].size
    comp = sum(math.sqrt(w) * np.kron(linalg.ket(i, k), v) for i, (w, v) in enumerate(zip(weights, vecs)))
    stages = (
        Stage.measure([0], basis_family(k), "A"),
        Stage.measure([1], projective_family(Observable(B)), "B"),
    )
    return Scenario((k, d), PureState(comp), stages, name="sec11")


def sec12_composite(
    psis=((0.6, 0.8), (3**-0.5, (2 / 3) ** 0.5)),
    observables=(linalg.PAULI_Z, linalg.PAULI_Z),
) -> Scenario:
    """Independent systems, each measured by its own observable, in parallel."""
    sts = [PureState(p) for p in psis]
    if len(sts) != len(observables):
        raise ConfigError("need one observable per system")
    init = PureState(linalg.kron_all([s.vector for s in sts]))
    stages = tuple(
        Stage.measure([i], projective_family(Observable(A)), f"E{i + 1}") for i, A in enumerate(observables)
    )
    return Scenario(tuple(s.dim for s in sts), init, stages, name="sec12-composite")


def mixture(
    psi_a=DEFAULT_PSI,
    A=np.diag([1.0, 2.0]),
    psi_b=(math.cos(math.pi / 8), math.sin(math.pi / 8)),
    branches=None,
) -> Scenario:
    """Observable switching: outcome ``k`` of ``A`` selects which ``B_k`` is measured on B."""
    if branches is None:
        branches = {1: linalg.PAULI_Z, 2: linalg.PAULI_X}
    obs_a = Observable(A)
    if any(np.linalg.matrix_rank(p) != 1 for _, p in obs_a.spectrum):
        raise ConfigError("the switching observable must be non-degenerate")
    if set(obs_a.outcomes) != set(branches):
        raise ConfigError(f"need one branch observable per outcome {obs_a.outcomes}")
    sa, sb = PureState(psi_a), PureState(psi_b)
    stages = (
        Stage.measure([0], projective_family(obs_a), "A"),
        Stage.controlled([1], 0, {k: projective_family(Observable(b)) for k, b in branches.items()}, "B"),
    )
    return Scenario((sa.dim, sb.dim), PureState(np.kron(sa.vector, sb.vector)), stages, name="mixture")


PLUS = np.array([1.0, 1.0]) / math.sqrt(2.0)


def _check_p(p) -> float:
    p = float(p)
    if not 0 < p < 1:
        raise ConfigError(f"security parameter p must lie in (0, 1), got {p}")
    return p


def bb84_scenario(p: float, eve: bool = False) -> Scenario:
    """One round of the modified BB84 protocol, all coins realized as qubits.

    Without Eve the factors are (coin a, coin b, carrier, coin c, coin d) and
    symbols are ``(a, b, c, m, d)``. With Eve a coin ``e`` is inserted before
    coin ``c`` and symbols are ``(a, b, e, f, c, m, d)``.
    """
    p = _check_p(p)
    biased = np.array([math.sqrt(1 - p), math.sqrt(p)])
    coin = basis_family(2)
    prep = {(a, b): bb84_preparation(a, b) for a in (0, 1) for b in (0, 1)}
    bob = {c: bb84_basis_family(c) for c in (0, 1)}
    if not eve:
        factors = (2, 2, 2, 2, 2)
        init = linalg.kron_all([PLUS, PLUS, linalg.ket(0, 2), PLUS, biased])
        stages = (
            Stage.measure([0], coin, "a"),
            Stage.measure([1], coin, "b"),
            Stage.controlled_unitary([2], (0, 1), prep, "prepare"),
            Stage.measure([3], coin, "c"),
            Stage.controlled([2], 3, bob, "m"),
            Stage.measure([4], coin, "d"),
        )
    else:
        factors = (2, 2, 2, 2, 2, 2)
        init = linalg.kron_all([PLUS, PLUS, linalg.ket(0, 2), PLUS, PLUS, biased])
        stages = (
            Stage.measure([0], coin, "a"),
            Stage.measure([1], coin, "b"),
            Stage.controlled_unitary([2], (0, 1), prep, "prepare"),
            Stage.measure([3], coin, "e"),
            Stage.controlled([2], 3, bob, "f"),
            Stage.measure([4], coin, "c"),
            Stage.controlled([2], 5, bob, "m"),
            Stage.measure([5], coin, "d"),
        )
    return Scenario(factors, PureState(init), stages, name="bb84-eve" if eve else "bb84")


def bb84_fields(eve: bool) -> tuple[str, ...]:
    return ("a", "b", "e", "f", "c", "m", "d") if eve else ("a", "b", "c", "m", "d")


def bb84_events(space: FiniteProbabilitySpace, eve: bool) -> dict:
    """Named events: ``shared`` (b=c, d=0), ``check`` (b=c, d=1), ``detect`` (check and a!=m)."""
    names = bb84_fields(eve)
    ix = {k: names.index(k) for k in names}

    def get(x, k):
        return x[ix[k]]

    shared = space.event(lambda x: get(x, "b") == get(x, "c") and get(x, "d") == 0)
    check = space.event(lambda x: get(x, "b") == get(x, "c") and get(x, "d") == 1)
    detect = frozenset(x for x in check if get(x, "a") != get(x, "m"))
    return {"shared": shared, "check": check, "detect": detect}


@dataclass
class BB84Report:
    p: float
    eve: bool
    n: int
    seed: int | None
    exact_space: FiniteProbabilitySpace | None
    shared_bits: int
    check_rounds: int
    detections: int
    sifted_out: int
    flag_round: int | None
    key_bits: np.ndarray
    quarantined_bits: int
    battery: BatteryReport | None = None
    extra: dict = field(default_factory=dict)

    @property
    def shared_bit_rate(self) -> float:
        return self.shared_bits / self.n if self.n else 0.0

    @property
    def kept_key_rate(self) -> float:
        return self.key_bits.size / self.n if self.n else 0.0

    @property
    def detection_rate(self) -> float | None:
        return self.detections / self.check_rounds if self.check_rounds else None

    def to_json(self) -> dict:
        return {
            "p": self.p,
            "eve": self.eve,
            "n": self.n,
            "seed": self.seed,
            "exact_space": None if self.exact_space is None else space_to_json(self.exact_space),
            "shared_bit_rate": self.shared_bit_rate,
            "kept_key_rate": self.kept_key_rate,
            "detection_rate": self.detection_rate,
            "flag_round": self.flag_round,
            "counts": {
                "rounds": self.n,
                "sifted_out": self.sifted_out,
                "shared_bits": self.shared_bits,
                "check_rounds": self.check_rounds,
                "detections": self.detections,
                "kept_key_bits": int(self.key_bits.size),
                "quarantined_bits": self.quarantined_bits,
            },
            "battery": None if self.battery is None else self.battery.to_json(),
        }


def _field_arrays(prefix: WorldPrefix, eve: bool) -> dict:
    names = bb84_fields(eve)
    if not all(isinstance(a, tuple) and len(a) == len(names) for a in prefix.alphabet):
        raise ConfigError(f"world symbols must be {len(names)}-tuples {names}")
    table = np.array(prefix.alphabet, dtype=np.int64).reshape(len(prefix.alphabet), len(names))
    rows = table[prefix.indices]
    return {k: rows[:, i] for i, k in enumerate(names)}


def bb84_postprocess(world, p: float, eve: bool = False, n: int | None = None, battery: bool = True) -> BB84Report:
    """Replay the classical Steps 6-12 over a world prefix.

    A round with ``b != c`` is sifted out. A round with ``b == c`` and
    ``d == 0`` yields a shared bit. A round with ``b == c`` and ``d == 1`` is a
    check round, and a check with ``a != m`` raises the flag. Once the flag is
    up, all shared bits so far are discarded and later shared bits are
    quarantined rather than kept, so the kept key is empty. ``flag_round`` is
    the 1-indexed round of the first detection.
    """
    p = _check_p(p)
    if isinstance(world, WorldStream):
        if n is None:
            raise ConfigError("need n to take a prefix of a stream")
        world = world.prefix(n)
    elif not isinstance(world, WorldPrefix):
        world = WorldPrefix.from_symbols(world)
    f = _field_arrays(world, eve)
    total = len(world)
    basis_ok = f["b"] == f["c"] if total else np.zeros(0, dtype=bool)
    shared = basis_ok & (f["d"] == 0)
    check = basis_ok & (f["d"] == 1)
    detect = check & (f["a"] != f["m"])
    hits = np.flatnonzero(detect)
    flag_round = int(hits[0]) + 1 if hits.size else None
    if flag_round is None:
        key = f["a"][shared] if total else np.zeros(0, dtype=np.int64)
        quarantined = 0
    else:
        key = np.zeros(0, dtype=np.int64)
        quarantined = int(np.count_nonzero(shared))
    bat = None
    if battery and key.size >= 1000:
        bat = statistical_battery(WorldPrefix((0, 1), key), FiniteProbabilitySpace((0, 1), (0.5, 0.5)))
    return BB84Report(
        p=p,
        eve=eve,
        n=total,
        seed=None,
        exact_space=world.space,
        shared_bits=int(np.count_nonzero(shared)),
        check_rounds=int(np.count_nonzero(check)),
        detections=int(np.count_nonzero(detect)),
        sifted_out=int(total - np.count_nonzero(basis_ok)),
        flag_round=flag_round,
        key_bits=key,
        quarantined_bits=quarantined,
        battery=bat,
    )


def bb84(p: float, eve: bool = False, seed: int = 0, n: int = 100_000, threads: int | None = None) -> BB84Report:
    """Exact distribution, ``n`` sampled rounds, and the classical post-processing."""
    s = bb84_scenario(p, eve)
    dist = distribution(s)
    world = world_stream(dist.space, seed, threads).prefix(n)
    rep = bb84_postprocess(world, p, eve)
    rep.seed = int(seed)
    rep.exact_space = dist.space
    return rep


BUILTINS = {
    "sec9": sec9,
    "sec10": sec10,
    "sec11": sec11,
    "sec12-composite": sec12_composite,
    "mixture": mixture,
    "bb84": lambda p=0.5: bb84_scenario(p, False),
    "bb84-eve": lambda p=0.5: bb84_scenario(p, True),
}


def builtin(name: str, **kwargs) -> Scenario:
    try:
        factory = BUILTINS[name]
    except KeyError:
        raise ConfigError(f"unknown builtin {name!r}; choose from {sorted(BUILTINS)}") from None
    return factory(**kwargs)


# ------------------------------------------------------------------ JSON input


def parse_symbol(key):
    """Outcome keys arrive as JSON object keys (strings); decode them when they hold JSON."""
    if not isinstance(key, str):
        return tuple(parse_symbol(k) for k in key) if isinstance(key, list) else key
    try:
        val = json.loads(key)
    except ValueError:
        return key
    if isinstance(val, list):
        return tuple(parse_symbol(v) for v in val)
    return val if isinstance(val, (int, float, str)) else key


def parse_vector(obj) -> np.ndarray:
    """Vectors as ``{"re": [...], "im": [...]}``, ``{"vector": ...}``, or a list of reals / ``[re, im]`` pairs."""
    if isinstance(obj, dict):
        if "vector" in obj:
            return parse_vector(obj["vector"])
        if "re" in obj:
            re = np.asarray(obj["re"], dtype=float)
            im = np.asarray(obj.get("im", [0.0] * re.size), dtype=float)
            if re.shape != im.shape:
                raise ConfigError("re and im parts differ in length")
            return re + 1j * im
        raise ConfigError("vector object needs 're' (and optionally 'im')")
    if isinstance(obj, list):
        try:
            if all(isinstance(x, list) for x in obj):
                return np.array([complex(x[0], x[1]) for x in obj])
            return np.array([complex(x) if isinstance(x, str) else x for x in obj], dtype=complex)
        except (TypeError, ValueError, IndexError) as exc:
            raise ConfigError(f"malformed vector: {exc}") from exc
    raise ConfigError(f"malformed vector {obj!r}")


def parse_family(obj) -> MeasurementFamily:
    """``{"operators": {outcome: matrix}}``, ``{"observable": matrix}``, ``{"basis": dim}``."""
    if not isinstance(obj, dict):
        raise ConfigError("family must be a JSON object")
    if "operators" in obj:
        ops = obj["operators"]
        items = ops.items() if isinstance(ops, dict) else [(o["outcome"], o["matrix"]) for o in ops]
        return MeasurementFamily([(parse_symbol(k), linalg.matrix_from_json(v)) for k, v in items])
    if "observable" in obj:
        return projective_family(Observable(linalg.matrix_from_json(obj["observable"])))
    if "basis" in obj:
        return basis_family(int(obj["basis"]))
    raise ConfigError("family needs 'operators', 'observable' or 'basis'")


def parse_stage(obj) -> Stage:
    if not isinstance(obj, dict) or "targets" not in obj:
        raise ConfigError("each stage needs 'targets'")
    targets = obj["targets"]
    name = obj.get("name")
    if "unitary" in obj:
        return Stage.unitary(targets, linalg.matrix_from_json(obj["unitary"]), name)
    if "family" in obj:
        return Stage(tuple(targets), family=parse_family(obj["family"]), record=obj.get("record", True), name=name)
    if "branches" in obj:
        ctrl = obj.get("control_stage")
        if ctrl is None:
            raise ConfigError("controlled stage needs 'control_stage'")
        if isinstance(ctrl, list):
            ctrl = tuple(ctrl)
        raw = obj["branches"]
        if obj.get("kind") == "unitary":
            units = {parse_symbol(k): linalg.matrix_from_json(v) for k, v in raw.items()}
            return Stage.controlled_unitary(targets, ctrl, units, name)
        fams = {parse_symbol(k): parse_family(v) for k, v in raw.items()}
        return Stage.controlled(targets, ctrl, fams, name)
    raise ConfigError("stage needs 'family', 'branches' or 'unitary'")


def scenario_from_json(obj) -> Scenario:
    if not isinstance(obj, dict):
        raise ConfigError("scenario must be a JSON object")
    try:
        factors = obj["factors"]
        initial = parse_vector(obj["initial"])
        stages = [parse_stage(s) for s in obj["stages"]]
    except KeyError as exc:
        raise ConfigError(f"scenario is missing {exc.args[0]!r}") from None
    return Scenario(
        tuple(factors),
        PureState(initial),
        tuple(stages),
        repetitions=obj.get("repetitions", 100_000),
        seed=obj.get("seed", 0),
        name=obj.get("name"),
    )


def load_scenario(path) -> Scenario:
    try:
        with open(path, encoding="utf-8") as fh:
            obj = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read scenario file: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed scenario JSON: {exc}") from exc
    return scenario_from_json(obj)

"""Finite probability spaces, Bernoulli cylinder measures and finite ML test levels.

A *string* is a tuple of alphabet symbols. For convenience a Python ``str``
is accepted wherever a string is expected; each character is looked up in
the alphabet, falling back to ``int(char)`` for integer alphabets, so
``"011"`` works over the alphabet ``(0, 1)``.
"""

from __future__ import annotations

import itertools
import math
from collections.abc import Callable, Hashable, Iterable, Mapping, Sequence
from dataclasses import dataclass

from .errors import ConfigError, InvariantError, ZeroProbabilityError

SUM_TOL = 1e-12


@dataclass(frozen=True)
class FiniteProbabilitySpace:
    """Probability assignment on an ordered finite alphabet.

    ``probs[i]`` is the probability of ``alphabet[i]``.
    """

    alphabet: tuple
    probs: tuple

    def __post_init__(self):
        alphabet = tuple(self.alphabet)
        probs = tuple(float(p) for p in self.probs)
        if not alphabet:
            raise ConfigError("alphabet must be non-empty")
        if len(alphabet) != len(probs):
            raise ConfigError("alphabet and probs differ in length")
        if len(set(alphabet)) != len(alphabet):
            raise ConfigError("alphabet symbols must be distinct")
        if any(not math.isfinite(p) or p < 0 for p in probs):
            raise ConfigError(f"probabilities must be finite and non-negative: {probs}")
        total = math.fsum(probs)
        if abs(total - 1.0) > SUM_TOL:
            raise ConfigError(f"probabilities sum to {total!r}, not 1")
        object.__setattr__(self, "alphabet", alphabet)
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "_index", {a: i for i, a in enumerate(alphabet)})

    @classmethod
    def from_dict(cls, probs: Mapping) -> FiniteProbabilitySpace:
        return cls(tuple(probs.keys()), tuple(probs.values()))

    @classmethod
    def uniform(cls, alphabet: Sequence) -> FiniteProbabilitySpace:
        alphabet = tuple(alphabet)
        return cls(alphabet, (1.0 / len(alphabet),) * len(alphabet))

    def __len__(self):
        return len(self.alphabet)

    def __contains__(self, a):
        return a in self._index

    def index(self, a) -> int:
        try:
            return self._index[a]
        except (KeyError, TypeError):
            raise ConfigError(f"unknown symbol {a!r}") from None

    def prob(self, a) -> float:
        return self.probs[self.index(a)]

    def event_prob(self, event: Iterable) -> float:
        return math.fsum(self.prob(a) for a in _event_members(self, event))

    def as_dict(self) -> dict:
        return dict(zip(self.alphabet, self.probs))

    def support(self) -> tuple:
        return tuple(a for a, p in zip(self.alphabet, self.probs) if p > 0)

    def event(self, predicate: Callable) -> frozenset:
        """Compile a predicate on symbols to an explicit event set."""
        return frozenset(a for a in self.alphabet if predicate(a))

    def isclose(self, other: FiniteProbabilitySpace, tol: float = SUM_TOL) -> bool:
        if set(self.alphabet) != set(other.alphabet):
            return False
        return all(abs(p - other.prob(a)) <= tol for a, p in zip(self.alphabet, self.probs))


def _event_members(P: FiniteProbabilitySpace, event: Iterable) -> list:
    members = list(dict.fromkeys(event))
    for a in members:
        P.index(a)
    return members


def as_string(alphabet_or_space, sigma) -> tuple:
    """Normalize ``sigma`` to a tuple of symbols (see module docstring)."""
    if isinstance(alphabet_or_space, FiniteProbabilitySpace):
        known = alphabet_or_space._index
    else:
        known = set(alphabet_or_space)
    if not isinstance(sigma, str):
        return tuple(sigma)
    out = []
    for ch in sigma:
        if ch in known:
            out.append(ch)
        elif ch.isdigit() and int(ch) in known:
            out.append(int(ch))
        else:
            raise ConfigError(f"unknown symbol {ch!r}")
    return tuple(out)


def cylinder_prob(P: FiniteProbabilitySpace, sigma) -> float:
    """Bernoulli measure of the cylinder of ``sigma``: the product of symbol probabilities."""
    out = 1.0
    for a in as_string(P, sigma):
        out *= P.prob(a)
    return out


def prefix_free_reduce(strings: Iterable) -> tuple:
    """Drop every string that extends another member; result sorted by (length, order seen)."""
    uniq = list(dict.fromkeys(tuple(s) for s in strings))
    uniq.sort(key=len)
    kept: list[tuple] = []
    kept_set: set[tuple] = set()
    for s in uniq:
        if not any(s[:k] in kept_set for k in range(len(s) + 1)):
            kept.append(s)
            kept_set.add(s)
    return tuple(kept)


@dataclass(frozen=True)
class PrefixSet:
    """Finite set of strings; its open set is the union of their cylinders."""

    alphabet: tuple
    strings: tuple

    def __post_init__(self):
        alphabet = tuple(self.alphabet)
        strings = tuple(dict.fromkeys(as_string(alphabet, s) for s in self.strings))
        known = set(alphabet)
        for s in strings:
            bad = [a for a in s if a not in known]
            if bad:
                raise ConfigError(f"string {s!r} uses symbols outside the alphabet: {bad}")
        object.__setattr__(self, "alphabet", alphabet)
        object.__setattr__(self, "strings", strings)

    def reduced(self) -> PrefixSet:
        return PrefixSet(self.alphabet, prefix_free_reduce(self.strings))

    def is_prefix_free(self) -> bool:
        return len(prefix_free_reduce(self.strings)) == len(self.strings)

    def max_length(self) -> int:
        return max((len(s) for s in self.strings), default=0)


def open_set_measure(P: FiniteProbabilitySpace, S) -> float:
    """Measure of the union of cylinders of ``S`` (a PrefixSet or iterable of strings)."""
    strings = S.strings if isinstance(S, PrefixSet) else [as_string(P, s) for s in S]
    return math.fsum(cylinder_prob(P, s) for s in prefix_free_reduce(strings))


@dataclass(frozen=True)
class FiniteMLTestLevel:
    """Level ``n`` of a Martin-Löf test, given explicitly as a finite prefix set."""

    level: int
    strings: PrefixSet

    def __post_init__(self):
        if int(self.level) != self.level or self.level < 1:
            raise ConfigError(f"test level must be a positive integer, got {self.level!r}")


def verify_test_level(t: FiniteMLTestLevel, P: FiniteProbabilitySpace) -> bool:
    """True iff the level's open set has measure strictly below ``2**-level``."""
    return open_set_measure(P, t.strings) < 2.0 ** (-t.level)


def _check_tuple_alphabet(P: FiniteProbabilitySpace) -> int:
    lengths = {len(a) if isinstance(a, tuple) else None for a in P.alphabet}
    if None in lengths:
        raise ConfigError("operation needs an alphabet of tuples")
    return min(lengths)


def _components(component) -> tuple[int, ...] | int:
    if isinstance(component, (int,)) and not isinstance(component, bool):
        return component
    comps = tuple(int(c) for c in component)
    if not comps:
        raise ConfigError("component tuple must be non-empty")
    return comps


def project(symbol: tuple, component):
    """Component ``i`` of a tuple symbol, or a sub-tuple for a tuple of indices."""
    if isinstance(component, tuple):
        return tuple(symbol[i] for i in component)
    return symbol[component]


def marginal_space(P: FiniteProbabilitySpace, component) -> FiniteProbabilitySpace:
    """Push ``P`` forward along a tuple projection.

    ``component`` is an index or a tuple of indices; the marginal alphabet
    keeps first-appearance order.
    """
    width = _check_tuple_alphabet(P)
    comp = _components(component)
    idx = comp if isinstance(comp, tuple) else (comp,)
    if any(i < -width or i >= width for i in idx):
        raise ConfigError(f"component {component!r} out of range for tuples of length {width}")
    acc: dict = {}
    for a, p in zip(P.alphabet, P.probs):
        key = project(a, comp)
        acc.setdefault(key, []).append(p)
    return FiniteProbabilitySpace(tuple(acc), tuple(math.fsum(v) for v in acc.values()))


def pushforward_space(P: FiniteProbabilitySpace, f: Callable) -> FiniteProbabilitySpace:
    """Image measure of ``P`` under a symbol map ``f``."""
    acc: dict = {}
    for a, p in zip(P.alphabet, P.probs):
        acc.setdefault(f(a), []).append(p)
    return FiniteProbabilitySpace(tuple(acc), tuple(math.fsum(v) for v in acc.values()))


def conditional_space(P: FiniteProbabilitySpace, B: Iterable) -> FiniteProbabilitySpace:
    """``P(. | B)`` on the members of ``B`` (alphabet order preserved)."""
    members = set(_event_members(P, B))
    alphabet = tuple(a for a in P.alphabet if a in members)
    pb = math.fsum(P.prob(a) for a in alphabet)
    if pb <= 0:
        raise ZeroProbabilityError("cannot condition on an event of probability zero")
    return FiniteProbabilitySpace(alphabet, tuple(P.prob(a) / pb for a in alphabet))


def mixing_space(P: FiniteProbabilitySpace, A: Iterable) -> FiniteProbabilitySpace:
    """Two-point space on ``(0, 1)`` with ``1`` carrying ``P(A)``."""
    pa = min(1.0, P.event_prob(A))
    return FiniteProbabilitySpace((0, 1), (1.0 - pa, pa))


def product_space(Ps: Sequence[FiniteProbabilitySpace]) -> FiniteProbabilitySpace:
    """Product measure on the tuple alphabet; a single factor is returned unchanged."""
    Ps = list(Ps)
    if not Ps:
        raise ConfigError("product_space needs at least one factor")
    if len(Ps) == 1:
        return Ps[0]
    alphabet = tuple(itertools.product(*(P.alphabet for P in Ps)))
    probs = tuple(math.prod(ps) for ps in itertools.product(*(P.probs for P in Ps)))
    return FiniteProbabilitySpace(alphabet, probs)


class PrefixMeasureRep:
    """Function ``r`` on finite strings with ``r(empty) = 1`` and additive consistency."""

    def __init__(self, alphabet: Sequence[Hashable], evaluator: Callable[[tuple], float]):
        self.alphabet = tuple(alphabet)
        self._r = evaluator

    @classmethod
    def bernoulli(cls, P: FiniteProbabilitySpace) -> PrefixMeasureRep:
        return cls(P.alphabet, lambda s: cylinder_prob(P, s))

    def __call__(self, sigma) -> float:
        return float(self._r(as_string(self.alphabet, sigma)))

    def consistency_residual(self, depth: int) -> float:
        """Largest violation of ``r(empty)=1`` and ``r(s) = sum_a r(sa)`` over strings shorter than ``depth``."""
        worst = abs(self(()) - 1.0)
        for n in range(depth):
            for s in itertools.product(self.alphabet, repeat=n):
                children = math.fsum(self(s + (a,)) for a in self.alphabet)
                worst = max(worst, abs(self(s) - children))
        return worst

    def verify(self, depth: int = 3, tol: float = 1e-10) -> None:
        res = self.consistency_residual(depth)
        if res > tol:
            raise InvariantError(f"prefix measure is inconsistent (residual {res:.3e})")

    def measure(self, S) -> float:
        strings = S.strings if isinstance(S, PrefixSet) else [as_string(self.alphabet, s) for s in S]
        return math.fsum(self(s) for s in prefix_free_reduce(strings))


def symbol_to_json(a):
    return list(symbol_to_json(x) for x in a) if isinstance(a, tuple) else a


def symbol_from_json(a):
    return tuple(symbol_from_json(x) for x in a) if isinstance(a, list) else a


def space_to_json(P: FiniteProbabilitySpace) -> dict:
    return {"alphabet": [symbol_to_json(a) for a in P.alphabet], "probs": list(P.probs)}


def space_from_json(obj) -> FiniteProbabilitySpace:
    try:
        return FiniteProbabilitySpace(
            tuple(symbol_from_json(a) for a in obj["alphabet"]), tuple(obj["probs"])
        )
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"malformed probability space: {exc}") from exc

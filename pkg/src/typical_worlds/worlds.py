"""Seeded world streams, randomness-preserving transforms, and a statistical battery.

A :class:`WorldStream` is a lazily generated infinite sequence over a finite
alphabet. Internally every stream produces integer *indices* into its
alphabet; symbols are materialized only on request. Sampled streams use
counter-based Philox blocks so that any prefix is reproducible from
``(seed, block number)`` alone, independent of how many threads drew it.
"""

from __future__ import annotations

import itertools
import math
from collections.abc import Callable, Iterable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .errors import ConfigError
from .measure import (
    FiniteMLTestLevel,
    FiniteProbabilitySpace,
    as_string,
    conditional_space,
    mixing_space,
    product_space,
    project,
    pushforward_space,
    space_to_json,
    symbol_to_json,
)

BLOCK = 1 << 16
GENERATOR = "numpy.random.Philox(SeedSequence([seed, block]))"
ALPHA = 1e-4
MIN_BATTERY = 1000
SEED_MAX = 2**64


def _check_seed(seed) -> int:
    if isinstance(seed, bool) or int(seed) != seed or not 0 <= int(seed) < SEED_MAX:
        raise ConfigError(f"seed must be an integer in [0, 2**64), got {seed!r}")
    return int(seed)


def _check_n(n) -> int:
    if isinstance(n, bool) or int(n) != n or n < 0:
        raise ConfigError(f"length must be a non-negative integer, got {n!r}")
    return int(n)


class WorldPrefix:
    """Finite prefix of a world: alphabet indices plus the alphabet itself."""

    def __init__(self, alphabet: Sequence, indices: np.ndarray, space: FiniteProbabilitySpace | None = None):
        self.alphabet = tuple(alphabet)
        self.indices = np.asarray(indices, dtype=np.int64)
        self.space = space

    @classmethod
    def from_symbols(cls, symbols: Iterable, alphabet: Sequence | None = None, space=None) -> WorldPrefix:
        symbols = list(symbols)
        if alphabet is None:
            alphabet = space.alphabet if space is not None else tuple(dict.fromkeys(symbols))
        lookup = {a: i for i, a in enumerate(alphabet)}
        try:
            idx = np.fromiter((lookup[s] for s in symbols), dtype=np.int64, count=len(symbols))
        except KeyError as exc:
            raise ConfigError(f"symbol {exc.args[0]!r} is not in the alphabet") from None
        return cls(alphabet, idx, space)

    def __len__(self):
        return int(self.indices.size)

    def __getitem__(self, k):
        if isinstance(k, slice):
            return WorldPrefix(self.alphabet, self.indices[k], self.space)
        return self.alphabet[int(self.indices[k])]

    def __iter__(self):
        alpha = self.alphabet
        return (alpha[i] for i in self.indices.tolist())

    def symbols(self) -> list:
        alpha = self.alphabet
        return [alpha[i] for i in self.indices.tolist()]

    def __eq__(self, other):
        if not isinstance(other, WorldPrefix):
            return NotImplemented
        return self.alphabet == other.alphabet and np.array_equal(self.indices, other.indices)

    def counts(self) -> np.ndarray:
        return np.bincount(self.indices, minlength=len(self.alphabet))


def _as_prefix(w, space: FiniteProbabilitySpace | None = None) -> WorldPrefix:
    if isinstance(w, WorldPrefix):
        return w
    if isinstance(w, WorldStream):
        raise ConfigError("pass a finite prefix, e.g. stream.prefix(n)")
    if space is None:
        return WorldPrefix.from_symbols(w)
    if isinstance(w, str):
        w = as_string(space, w)
    return _prefix_over(w, space)


def _prefix_over(symbols, space: FiniteProbabilitySpace) -> WorldPrefix:
    symbols = list(symbols)
    known = set(space.alphabet)
    extra = [s for s in dict.fromkeys(symbols) if s not in known]
    return WorldPrefix.from_symbols(symbols, space.alphabet + tuple(extra))


class WorldStream:
    """Base class. Subclasses implement :meth:`indices`.

    Attributes
    ----------
    alphabet : tuple
        Output symbols; ``indices`` point into it.
    space : FiniteProbabilitySpace or None
        Governing probability space over ``alphabet`` (same order), when known.
    """

    alphabet: tuple
    space: FiniteProbabilitySpace | None

    def indices(self, n: int) -> np.ndarray:
        raise NotImplementedError

    def prefix(self, n: int) -> WorldPrefix:
        return WorldPrefix(self.alphabet, self.indices(_check_n(n)), self.space)

    def __iter__(self):
        k = 0
        chunk = 4096
        while True:
            idx = self.indices(k + chunk)[k:]
            for i in idx.tolist():
                yield self.alphabet[i]
            k += chunk

    def pointwise_root(self):
        """``(root, table)`` if this stream is a symbolwise map of a sampled root."""
        return None

    def dump(self, path, n: int) -> None:
        """Write the first ``n`` symbols, one per line."""
        with open(path, "w", encoding="utf-8") as fh:
            for s in self.prefix(n):
                fh.write(format_symbol(s) + "\n")


def format_symbol(s) -> str:
    if isinstance(s, tuple):
        return ",".join(format_symbol(x) for x in s)
    return str(s)


class SampledStream(WorldStream):
    """I.i.d. draws from ``space`` by inverse CDF over its support.

    Block ``k`` (``BLOCK`` draws) comes from its own Philox generator keyed
    by ``(seed, k)``, so blocks can be filled in any order or in parallel.
    """

    def __init__(self, space: FiniteProbabilitySpace, seed: int, threads: int | None = None):
        self.space = space
        self.alphabet = space.alphabet
        self.seed = _check_seed(seed)
        self.threads = max(1, int(threads or 1))
        probs = np.asarray(space.probs)
        self._support = np.flatnonzero(probs > 0)
        cdf = np.cumsum(probs[self._support])
        cdf[-1] = 1.0
        self._cdf = cdf
        self._flat = np.zeros(0, dtype=np.int64)

    def _block(self, k: int) -> np.ndarray:
        if self._support.size == 1:
            return np.full(BLOCK, self._support[0], dtype=np.int64)
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([self.seed, k])))
        u = rng.random(BLOCK)
        return self._support[np.searchsorted(self._cdf, u, side="right")]

    def indices(self, n: int) -> np.ndarray:
        n = _check_n(n)
        need = -(-n // BLOCK)
        have = self._flat.size // BLOCK
        if need > have:
            todo = range(have, need)
            if self.threads > 1 and len(todo) > 1:
                with ThreadPoolExecutor(self.threads) as pool:
                    fresh = list(pool.map(self._block, todo))
            else:
                fresh = [self._block(k) for k in todo]
            self._flat = np.concatenate([self._flat, *fresh])
            self._flat.flags.writeable = False
        return self._flat[:n]

    def pointwise_root(self):
        return self, np.arange(len(self.alphabet))


class FixedStream(WorldStream):
    """A finite, explicitly given sequence; asking past its end is an error."""

    def __init__(self, symbols: Iterable, alphabet: Sequence | None = None, space=None):
        pre = WorldPrefix.from_symbols(symbols, alphabet, space)
        self.alphabet = pre.alphabet
        self.space = space
        self._idx = pre.indices

    def indices(self, n: int) -> np.ndarray:
        n = _check_n(n)
        if n > self._idx.size:
            raise ConfigError(f"fixed stream has only {self._idx.size} symbols, asked for {n}")
        return self._idx[:n]

    @property
    def size(self) -> int:
        return int(self._idx.size)


class MappedStream(WorldStream):
    """Symbolwise image of an upstream stream under a map of alphabets."""

    def __init__(self, upstream: WorldStream, f: Callable, space: FiniteProbabilitySpace | None = None, alphabet=None):
        images = [f(a) for a in upstream.alphabet]
        if space is None and upstream.space is not None:
            space = pushforward_space(upstream.space, f)
        if alphabet is None:
            alphabet = space.alphabet if space is not None else tuple(dict.fromkeys(images))
        lookup = {a: i for i, a in enumerate(alphabet)}
        self.upstream = upstream
        self.alphabet = tuple(alphabet)
        self.space = space
        self.table = np.array([lookup[b] for b in images], dtype=np.int64)

    def indices(self, n: int) -> np.ndarray:
        return self.table[self.upstream.indices(n)]

    def pointwise_root(self):
        up = self.upstream.pointwise_root()
        if up is None:
            return None
        root, table = up
        return root, self.table[table]


class ConditionedStream(WorldStream):
    """Subsequence of upstream members that lie in an event ``B``."""

    def __init__(self, upstream: WorldStream, B: Iterable):
        members = set(B)
        unknown = members - set(upstream.alphabet)
        if unknown:
            raise ConfigError(f"event contains symbols outside the alphabet: {sorted(map(repr, unknown))}")
        self.upstream = upstream
        if upstream.space is not None:
            self.space = conditional_space(upstream.space, members)
            self.alphabet = self.space.alphabet
            rate = sum(upstream.space.prob(a) for a in members)
        else:
            self.space = None
            self.alphabet = tuple(a for a in upstream.alphabet if a in members)
            rate = None
        self._rate = rate
        keep = np.full(len(upstream.alphabet), -1, dtype=np.int64)
        for i, a in enumerate(self.alphabet):
            keep[upstream.alphabet.index(a)] = i
        self._keep = keep
        self._pos = np.zeros(0, dtype=np.int64)
        self._scanned = 0

    def _fill(self, n: int) -> None:
        while self._pos.size < n:
            missing = n - self._pos.size
            rate = self._rate or 0.5
            m = self._scanned + max(4096, int(1.2 * missing / rate) + 1000)
            if isinstance(self.upstream, FixedStream):
                m = min(m, self.upstream._idx.size)
                if m <= self._scanned:
                    raise ConfigError("fixed upstream ran out before enough members were found")
            idx = self.upstream.indices(m)[self._scanned :]
            hits = np.flatnonzero(self._keep[idx] >= 0) + self._scanned
            self._pos = np.concatenate([self._pos, hits])
            self._scanned = m

    def positions(self, n: int) -> np.ndarray:
        """1-indexed upstream positions of the first ``n`` members."""
        n = _check_n(n)
        self._fill(n)
        return self._pos[:n] + 1

    def indices(self, n: int) -> np.ndarray:
        n = _check_n(n)
        self._fill(n)
        pos = self._pos[:n]
        up = self.upstream.indices(int(pos[-1]) + 1) if n else np.zeros(0, dtype=np.int64)
        return self._keep[up[pos]]


@dataclass(frozen=True)
class AffineIndex:
    """``f(k) = scale * k + offset`` on 1-indexed positions."""

    scale: int
    offset: int = 0

    def __post_init__(self):
        if self.scale < 1 or self.scale + self.offset < 1:
            raise ConfigError("affine index map must be increasing with f(1) >= 1")

    def __call__(self, n: int) -> np.ndarray:
        k = np.arange(1, n + 1, dtype=np.int64)
        return self.scale * k + self.offset


def nth_prime_bound(n: int) -> int:
    if n < 6:
        return 15
    return int(n * (math.log(n) + math.log(math.log(n)))) + 3


class PrimeIndex:
    """``f(k)`` = the ``k``-th prime (2, 3, 5, 7, 11, ...)."""

    def __call__(self, n: int) -> np.ndarray:
        limit = nth_prime_bound(n)
        sieve = np.ones(limit + 1, dtype=bool)
        sieve[:2] = False
        for p in range(2, math.isqrt(limit) + 1):
            if sieve[p]:
                sieve[p * p :: p] = False
        return np.flatnonzero(sieve)[:n].astype(np.int64)


class TableIndex:
    """Explicit finite table ``f(k) = table[k-1]``."""

    def __init__(self, table: Sequence[int]):
        self.table = np.asarray(table, dtype=np.int64)
        if self.table.size and self.table.min() < 1:
            raise ConfigError("table entries must be positive positions")

    def __call__(self, n: int) -> np.ndarray:
        if n > self.table.size:
            raise ConfigError(f"index table covers {self.table.size} positions, asked for {n}")
        return self.table[:n]


class ShuffledStream(WorldStream):
    """``out(k) = upstream(f(k))`` for an injective index rule ``f``."""

    def __init__(self, upstream: WorldStream, f: Callable[[int], np.ndarray]):
        self.upstream = upstream
        self.f = f
        self.alphabet = upstream.alphabet
        self.space = upstream.space

    def indices(self, n: int) -> np.ndarray:
        n = _check_n(n)
        if n == 0:
            return np.zeros(0, dtype=np.int64)
        pos = np.asarray(self.f(n), dtype=np.int64)
        if pos.size != n or pos.min() < 1:
            raise ConfigError("index rule must return n positive positions")
        if np.unique(pos).size != n:
            raise ConfigError("index rule is not injective on the requested range")
        return self.upstream.indices(int(pos.max()))[pos - 1]


class ZippedStream(WorldStream):
    """Elementwise tuple of several streams."""

    def __init__(self, streams: Sequence[WorldStream], space: FiniteProbabilitySpace | None = None):
        self.streams = list(streams)
        radices = [len(s.alphabet) for s in self.streams]
        self.alphabet = tuple(itertools.product(*(s.alphabet for s in self.streams)))
        self._radices = radices
        if space is not None and space.alphabet != self.alphabet:
            space = FiniteProbabilitySpace(self.alphabet, tuple(space.prob(a) if a in space else 0.0 for a in self.alphabet))
        self.space = space

    def indices(self, n: int) -> np.ndarray:
        out = np.zeros(_check_n(n), dtype=np.int64)
        for s, r in zip(self.streams, self._radices):
            out = out * r + s.indices(n)
        return out


# ---------------------------------------------------------------- constructors


def world_stream(P: FiniteProbabilitySpace, seed: int, threads: int | None = None) -> SampledStream:
    """Lazy i.i.d. stream governed by ``P``."""
    return SampledStream(P, seed, threads)


def sample_world(P: FiniteProbabilitySpace, seed: int, n: int, threads: int | None = None) -> WorldPrefix:
    """Length-``n`` prefix of the seeded world governed by ``P``."""
    return SampledStream(P, seed, threads).prefix(n)


# ------------------------------------------------------------------ transforms


def relabel(w: WorldStream, f: Callable, space: FiniteProbabilitySpace | None = None) -> MappedStream:
    """General symbolwise map; the governing space is the image measure."""
    return MappedStream(w, f, space)


def contract(w: WorldStream, b, a) -> MappedStream:
    """Replace every ``b`` by ``a``."""
    if a == b:
        raise ConfigError("contract needs two distinct symbols")
    for s in (a, b):
        if s not in w.alphabet:
            raise ConfigError(f"symbol {s!r} is not in the alphabet")
    alphabet = tuple(s for s in w.alphabet if s != b)
    space = None
    if w.space is not None:
        space = pushforward_space(w.space, lambda s: a if s == b else s)
        space = FiniteProbabilitySpace(alphabet, tuple(space.prob(s) for s in alphabet))
    return MappedStream(w, lambda s: a if s == b else s, space, alphabet)


def marginalize(w: WorldStream, component) -> MappedStream:
    """Project tuple symbols onto a component (or tuple of components)."""
    if not all(isinstance(s, tuple) for s in w.alphabet):
        raise ConfigError("marginalize needs a stream over tuples")
    comp = component if isinstance(component, int) else tuple(component)
    try:
        return MappedStream(w, lambda s: project(s, comp))
    except IndexError:
        raise ConfigError(f"component {component!r} out of range") from None


def condition(w: WorldStream, B: Iterable) -> ConditionedStream:
    """Keep only members of ``B``; ``positions`` exposes where they came from."""
    return ConditionedStream(w, B)


def characteristic(w: WorldStream, A: Iterable) -> MappedStream:
    """Indicator stream of ``A`` over the alphabet ``(0, 1)``."""
    members = set(A)
    unknown = members - set(w.alphabet)
    if unknown:
        raise ConfigError("event contains symbols outside the alphabet")
    space = mixing_space(w.space, members) if w.space is not None else None
    return MappedStream(w, lambda s: int(s in members), space, (0, 1))


def shuffle(w: WorldStream, f) -> ShuffledStream:
    """Subsequence selected by an injective index rule.

    ``f`` may be an :class:`AffineIndex`, :class:`PrimeIndex`, :class:`TableIndex`,
    the strings ``"identity"`` or ``"primes"``, or a positive int ``s`` meaning
    ``k -> s*k``.
    """
    if f == "identity":
        f = AffineIndex(1)
    elif f == "primes":
        f = PrimeIndex()
    elif isinstance(f, int) and not isinstance(f, bool):
        f = AffineIndex(f)
    elif isinstance(f, (list, tuple, np.ndarray)):
        f = TableIndex(f)
    return ShuffledStream(w, f)


def tensor(streams: Sequence[WorldStream], space: FiniteProbabilitySpace | None = None) -> ZippedStream:
    return ZippedStream(streams, space)


def independent_product(streams: Sequence[WorldStream]) -> ZippedStream:
    """Zip streams, declaring the product of their spaces as governing."""
    return ZippedStream(streams, product_space([s.space for s in streams]))


# ----------------------------------------------------------------- frequencies


@dataclass
class FrequencyReport:
    counts: dict
    total: int
    empirical: dict
    reference: FiniteProbabilitySpace
    max_abs_deviation: float
    sigma_bound: float

    @property
    def within_bound(self) -> bool:
        return self.max_abs_deviation <= self.sigma_bound

    def to_json(self) -> dict:
        return {
            "total": self.total,
            "counts": [[symbol_to_json(a), c] for a, c in self.counts.items()],
            "empirical": [[symbol_to_json(a), f] for a, f in self.empirical.items()],
            "reference": space_to_json(self.reference),
            "max_abs_deviation": self.max_abs_deviation,
            "sigma_bound": self.sigma_bound,
            "within_bound": self.within_bound,
        }


def _counts_over(prefix: WorldPrefix, P: FiniteProbabilitySpace) -> np.ndarray:
    """Counts aligned with ``P.alphabet``; symbols outside it raise."""
    raw = prefix.counts()
    out = np.zeros(len(P), dtype=np.int64)
    for i, a in enumerate(prefix.alphabet):
        if raw[i] == 0:
            continue
        if a not in P:
            raise ConfigError(f"symbol {a!r} appears in the world but not in the reference space")
        out[P.index(a)] += raw[i]
    return out


def frequency(w, P: FiniteProbabilitySpace) -> FrequencyReport:
    """Empirical frequencies of a prefix against ``P``.

    ``sigma_bound`` is ``5 * max_a sqrt(P(a)(1-P(a))/n)``.
    """
    prefix = _as_prefix(w, P)
    n = len(prefix)
    if n == 0:
        raise ConfigError("frequency needs a non-empty prefix")
    counts = _counts_over(prefix, P)
    probs = np.asarray(P.probs)
    emp = counts / n
    dev = float(np.max(np.abs(emp - probs)))
    sigma = 5.0 * float(np.max(np.sqrt(probs * (1 - probs) / n)))
    return FrequencyReport(
        counts={a: int(c) for a, c in zip(P.alphabet, counts)},
        total=n,
        empirical={a: float(e) for a, e in zip(P.alphabet, emp)},
        reference=P,
        max_abs_deviation=dev,
        sigma_bound=sigma,
    )


def cellwise_within(w, P: FiniteProbabilitySpace, nsigma: float = 5.0) -> bool:
    """Every cell's frequency is within ``nsigma`` binomial sd of ``P``."""
    prefix = _as_prefix(w, P)
    n = len(prefix)
    counts = _counts_over(prefix, P)
    probs = np.asarray(P.probs)
    sd = np.sqrt(probs * (1 - probs) / n)
    dev = np.abs(counts / n - probs)
    return bool(np.all(dev <= nsigma * sd + 1e-15))


# --------------------------------------------------------------------- battery


@dataclass
class TestResult:
    name: str
    statistic: float
    p_value: float
    threshold: float
    passed: bool
    detail: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "statistic": self.statistic,
            "p_value": self.p_value,
            "threshold": self.threshold,
            "passed": self.passed,
            **({"detail": self.detail} if self.detail else {}),
        }


@dataclass
class BatteryReport:
    n: int
    alpha: float
    tests: list

    @property
    def passed(self) -> bool:
        return all(t.passed for t in self.tests)

    def __getitem__(self, name) -> TestResult:
        for t in self.tests:
            if t.name == name:
                return t
        raise KeyError(name)

    def to_json(self) -> dict:
        return {"n": self.n, "alpha": self.alpha, "passed": self.passed, "tests": [t.to_json() for t in self.tests]}


def _chi_square(counts: np.ndarray, expected_p: np.ndarray, n: int) -> tuple[float, float]:
    """Pearson statistic and upper-tail p-value; mass on a zero cell gives p = 0."""
    zero = expected_p <= 0
    if np.any(counts[zero] > 0):
        return math.inf, 0.0
    c = counts[~zero]
    e = expected_p[~zero] * n
    k = c.size
    if k <= 1:
        return 0.0, 1.0
    stat = float(np.sum((c - e) ** 2 / e))
    return stat, float(stats.chi2.sf(stat, k - 1))


def _frequency_test(idx, probs, thr) -> TestResult:
    n = idx.size
    counts = np.bincount(idx, minlength=probs.size)
    stat, p = _chi_square(counts, probs, n)
    return TestResult("frequency", stat, p, thr, p >= thr)


def _block_frequency_test(idx, probs, thr, m=8) -> TestResult:
    support = probs > 0
    k = int(support.sum())
    nblocks = idx.size // m
    if k <= 1 or nblocks == 0:
        ok = not np.any(~support[idx])
        return TestResult("block_frequency", 0.0, 1.0 if ok else 0.0, thr, ok)
    if np.any(~support[idx]):
        return TestResult("block_frequency", math.inf, 0.0, thr, False)
    blocks = idx[: nblocks * m].reshape(nblocks, m)
    counts = np.stack([(blocks == j).sum(axis=1) for j in np.flatnonzero(support)], axis=1)
    p = probs[support]
    x = ((counts - m * p) ** 2 / (m * p)).sum(axis=1)
    total = float(x.sum())
    mean = nblocks * (k - 1)
    var = nblocks * (2 * (k - 1) + (np.sum(1 / p) - k * k - 2 * k + 2) / m)
    z = (total - mean) / math.sqrt(var)
    pval = float(2 * stats.norm.sf(abs(z)))
    return TestResult("block_frequency", total, pval, thr, pval >= thr, {"block": m, "z": z})


def _runs_test(idx, probs, thr) -> TestResult:
    n = idx.size
    tested = [j for j in range(probs.size) if 0 < probs[j] < 1]
    if not tested or n < 3:
        ok = not np.any(probs[idx] <= 0)
        return TestResult("runs", 0.0, 1.0 if ok else 0.0, thr, ok)
    worst_p, worst_z = 1.0, 0.0
    for j in tested:
        x = idx == j
        t = int(np.count_nonzero(x[1:] != x[:-1]))
        p, q = probs[j], 1 - probs[j]
        r = 2 * p * q
        mean = (n - 1) * r
        var = (n - 1) * r * (1 - r) + 2 * (n - 2) * (p * q - 4 * p * p * q * q)
        z = (t - mean) / math.sqrt(var) if var > 0 else (0.0 if t == mean else math.inf)
        pv = float(2 * stats.norm.sf(abs(z)))
        if pv < worst_p or (pv == worst_p and abs(z) > abs(worst_z)):
            worst_p, worst_z = pv, float(z)
    # Bonferroni across the per-symbol statistics
    pval = min(1.0, worst_p * len(tested))
    return TestResult("runs", worst_z, pval, thr, pval >= thr, {"symbols_tested": len(tested)})


def _serial_test(idx, probs, thr) -> TestResult:
    k = probs.size
    half = idx.size // 2
    pairs = idx[: 2 * half : 2] * k + idx[1 : 2 * half : 2]
    counts = np.bincount(pairs, minlength=k * k)
    stat, p = _chi_square(counts, np.outer(probs, probs).reshape(-1), half)
    return TestResult("serial", stat, p, thr, p >= thr)


def statistical_battery(w, P: FiniteProbabilitySpace, alpha: float = ALPHA) -> BatteryReport:
    """Frequency, block-frequency (block 8), per-symbol runs and serial-pair tests.

    Each of the four tests runs at ``alpha / 4`` so the family-wise false
    alarm rate is at most ``alpha``.
    """
    prefix = _as_prefix(w, P)
    n = len(prefix)
    if n < MIN_BATTERY:
        raise ConfigError(f"battery needs a prefix of length >= {MIN_BATTERY}, got {n}")
    # re-index onto P.alphabet, with foreign symbols mapped past the end
    lookup = np.array(
        [P.index(a) if a in P else len(P) + i for i, a in enumerate(prefix.alphabet)], dtype=np.int64
    )
    idx = lookup[prefix.indices]
    extra = int(max(0, idx.max() + 1 - len(P))) if n else 0
    probs = np.concatenate([np.asarray(P.probs), np.zeros(extra)])
    thr = alpha / 4
    tests = [
        _frequency_test(idx, probs, thr),
        _block_frequency_test(idx, probs, thr),
        _runs_test(idx, probs, thr),
        _serial_test(idx, probs, thr),
    ]
    return BatteryReport(n, alpha, tests)


# ------------------------------------------------------------------- ML tests


def test_hits(w, levels: Sequence[FiniteMLTestLevel]) -> list[tuple[int, tuple]]:
    """``(level, string)`` pairs whose string is a prefix of ``w``."""
    need = max((t.strings.max_length() for t in levels), default=0)
    if isinstance(w, WorldPrefix):
        seq = w.symbols()[:need]
    elif isinstance(w, FixedStream):
        seq = w.prefix(min(need, w.size)).symbols()
    elif isinstance(w, WorldStream):
        seq = w.prefix(need).symbols()
    else:
        seq = list(w)[:need]
    hits = []
    for t in levels:
        for s in t.strings.strings:
            if len(s) <= len(seq) and tuple(seq[: len(s)]) == s:
                hits.append((t.level, s))
    return hits


def avoids_test(w, levels: Sequence[FiniteMLTestLevel]) -> bool:
    """True iff no string of any level is a prefix of ``w``.

    Strings longer than the available prefix cannot be decided and count
    as misses.
    """
    return not test_hits(w, levels)

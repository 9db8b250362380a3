"""Mixed states as labeled pure-state alphabets, and their density matrices.

A :class:`MixedState` pairs a table of unit vectors (keyed by label) with a
probability space over the labels and, optionally, a world stream emitting
those labels. Density matrices are plain complex ``ndarray`` objects;
:func:`validate_density` checks the Hermitian / PSD / unit-trace contract.
"""

from __future__ import annotations

import itertools
import math
from collections.abc import Callable, Mapping, Sequence
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from . import linalg
from .errors import ConfigError, DimensionError, InvariantError, ZeroProbabilityError
from .measure import FiniteProbabilitySpace, product_space, pushforward_space
from .quantum import MeasurementFamily, PureState
from .worlds import WorldPrefix, WorldStream, ZippedStream, relabel

DENSITY_TOL = 1e-10
SAME_STATE_TOL = 1e-10
MIN_INDEPENDENCE_N = 10_000


def validate_density(rho, tol: float = DENSITY_TOL) -> np.ndarray:
    """Return ``rho`` as an array after checking it is a density matrix."""
    rho = linalg.as_matrix(rho)
    if rho.shape[0] != rho.shape[1]:
        raise DimensionError(f"density matrix must be square, got {rho.shape}")
    if linalg.hermiticity_residual(rho) > tol:
        raise InvariantError("density matrix is not Hermitian")
    tr = np.trace(rho)
    if abs(tr - 1) > tol:
        raise InvariantError(f"density matrix has trace {tr.real:.12g}, expected 1")
    lo = float(np.min(np.linalg.eigvalsh(0.5 * (rho + linalg.dagger(rho)))))
    if lo < -tol:
        raise InvariantError(f"density matrix has negative eigenvalue {lo:.3e}")
    return rho


def same_ray(u, v, tol: float = SAME_STATE_TOL) -> bool:
    """Unit vectors equal up to a global phase (fidelity above ``1 - tol``)."""
    return abs(np.vdot(u, v)) ** 2 > 1 - tol


class MixedState:
    """Probability-weighted alphabet of labeled pure states.

    Parameters
    ----------
    vectors : mapping
        Label to unit vector; iteration order fixes the label order.
    space : FiniteProbabilitySpace
        Probabilities over exactly those labels.
    stream : WorldStream, optional
        A world over the labels whose governing space must equal ``space``.
    """

    def __init__(self, vectors: Mapping, space: FiniteProbabilitySpace, stream: WorldStream | None = None, notes=None):
        labels = tuple(vectors)
        if len(set(labels)) != len(labels):
            raise ConfigError("mixed-state labels must be distinct")
        vecs = {k: PureState(v, k).vector for k, v in vectors.items()}
        dims = {v.size for v in vecs.values()}
        if len(dims) != 1:
            raise DimensionError(f"state vectors differ in dimension: {dims}")
        if set(space.alphabet) != set(labels):
            raise ConfigError("space alphabet must equal the set of labels")
        if stream is not None:
            if set(stream.alphabet) != set(labels):
                raise ConfigError("stream alphabet must equal the set of labels")
            if stream.space is not None and not stream.space.isclose(space):
                raise InvariantError("stream's governing space differs from the declared space")
        self.labels = labels
        self.vectors = vecs
        self.space = space
        self.stream = stream
        self.dim = dims.pop()
        self.notes = dict(notes or {})

    @classmethod
    def from_pairs(cls, pairs: Sequence[tuple[float, object]]) -> MixedState:
        """Build from ``(probability, vector)`` pairs; labels are ``0..k-1``."""
        vectors = {i: v for i, (_, v) in enumerate(pairs)}
        space = FiniteProbabilitySpace(tuple(vectors), tuple(p for p, _ in pairs))
        return cls(vectors, space)

    def __repr__(self):
        return f"MixedState(dim={self.dim}, labels={self.labels})"


def density_of(ms: MixedState) -> np.ndarray:
    """``sum_label P(label) |v><v|``."""
    rho = np.zeros((ms.dim, ms.dim), dtype=complex)
    for a, p in zip(ms.space.alphabet, ms.space.probs):
        v = ms.vectors[a]
        rho += p * np.outer(v, v.conj())
    return validate_density(rho)


def empirical_density(ms: MixedState, n: int) -> np.ndarray:
    """Density built from label frequencies in the first ``n`` stream symbols."""
    if ms.stream is None:
        raise ConfigError("mixed state has no stream")
    pre = ms.stream.prefix(n)
    if len(pre) == 0:
        raise ConfigError("need a non-empty prefix")
    counts = pre.counts()
    rho = np.zeros((ms.dim, ms.dim), dtype=complex)
    for a, c in zip(pre.alphabet, counts):
        if c:
            v = ms.vectors[a]
            rho += (c / len(pre)) * np.outer(v, v.conj())
    return rho


def _as_density(x) -> np.ndarray:
    return density_of(x) if isinstance(x, MixedState) else validate_density(x)


def measurement_space(ms, fam: MeasurementFamily) -> FiniteProbabilitySpace:
    """Outcome probabilities ``tr(M_m^dag M_m rho)`` for a mixed state or density."""
    rho = _as_density(ms)
    if rho.shape[0] != fam.dim:
        raise DimensionError(f"density dim {rho.shape[0]} does not match family dim {fam.dim}")
    probs = []
    for m in fam.outcomes:
        op = fam.operators[m]
        p = float(np.real(np.trace(linalg.dagger(op) @ op @ rho)))
        probs.append(0.0 if abs(p) < 1e-15 else p)
    return FiniteProbabilitySpace(fam.outcomes, tuple(probs))


def post_measurement_mixed(rho, F, tol: float = 1e-15) -> tuple[np.ndarray, float]:
    """``(F rho F^dag / w, w)`` with ``w = tr(F rho F^dag)``."""
    rho = validate_density(rho)
    F = linalg.as_matrix(F)
    if F.shape != rho.shape:
        raise DimensionError(f"operator shape {F.shape} does not match density {rho.shape}")
    out = F @ rho @ linalg.dagger(F)
    w = float(np.real(np.trace(out)))
    if w <= tol:
        raise ZeroProbabilityError("outcome has zero probability under this density")
    out = out / w
    return 0.5 * (out + linalg.dagger(out)), w


def merge_states(symbols: Sequence, vector_of: Callable, space: FiniteProbabilitySpace | None = None):
    """Group symbols whose vectors agree up to phase.

    Returns ``(label_of, vectors)``: a dict symbol -> integer label and a dict
    label -> representative unit vector. Zero-probability symbols (under
    ``space``) are attached to label ``0`` without being inspected.
    """
    reps: list[np.ndarray] = []
    label_of = {}
    skipped = []
    for s in symbols:
        if space is not None and space.prob(s) == 0:
            skipped.append(s)
            continue
        v = linalg.as_vector(vector_of(s))
        norm = np.linalg.norm(v)
        if norm == 0:
            raise ZeroProbabilityError(f"symbol {s!r} maps to the zero vector")
        v = v / norm
        for i, r in enumerate(reps):
            if same_ray(r, v):
                label_of[s] = i
                break
        else:
            label_of[s] = len(reps)
            reps.append(v)
    if not reps:
        raise ConfigError("no symbol carries positive probability")
    for s in skipped:
        label_of[s] = 0
    return label_of, dict(enumerate(reps))


def mixed_state_from_world(stream: WorldStream, vector_of) -> MixedState:
    """Relabel a world by post-measurement vectors, merging equal rays.

    ``vector_of`` is a mapping or callable from world symbols to (not
    necessarily normalized) vectors.
    """
    if stream.space is None:
        raise ConfigError("the world needs a governing space")
    f = vector_of.__getitem__ if isinstance(vector_of, Mapping) else vector_of
    label_of, vectors = merge_states(stream.alphabet, f, stream.space)
    P = stream.space
    acc = [0.0] * len(vectors)
    parts: list[list[float]] = [[] for _ in vectors]
    for s, p in zip(P.alphabet, P.probs):
        if p > 0:
            parts[label_of[s]].append(p)
    acc = [math.fsum(x) for x in parts]
    space = FiniteProbabilitySpace(tuple(vectors), tuple(acc))
    members = {k: tuple(s for s in P.alphabet if P.prob(s) > 0 and label_of[s] == k) for k in vectors}
    return MixedState(vectors, space, relabel(stream, label_of.__getitem__, space), {"members": members})


# ---------------------------------------------------------------- independence


@dataclass
class IndependenceReport:
    verdict: str
    n: int
    max_abs_z: float
    z_threshold: float
    lag1_max_abs_z: float
    cells: int
    detail: dict = field(default_factory=dict)

    @property
    def independent(self) -> bool:
        return self.verdict == "independent"

    def to_json(self) -> dict:
        return {
            "verdict": self.verdict,
            "n": self.n,
            "max_abs_z": self.max_abs_z,
            "z_threshold": self.z_threshold,
            "lag1_max_abs_z": self.lag1_max_abs_z,
            "cells": self.cells,
        }


def _joint_z(idx_list, probs_list) -> float:
    n = idx_list[0].size
    radices = [p.size for p in probs_list]
    flat = np.zeros(n, dtype=np.int64)
    for idx, r in zip(idx_list, radices):
        flat = flat * r + idx
    counts = np.bincount(flat, minlength=int(np.prod(radices)))
    expected = product_probs(probs_list)
    sd = np.sqrt(expected * (1 - expected) / n)
    dev = np.abs(counts / n - expected)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(sd > 0, dev / np.where(sd > 0, sd, 1), np.where(dev > 0, np.inf, 0.0))
    return float(np.max(z))


def product_probs(probs_list) -> np.ndarray:
    out = np.ones(1)
    for p in probs_list:
        out = np.outer(out, p).reshape(-1)
    return out


def _indices_over(prefix, space: FiniteProbabilitySpace) -> np.ndarray:
    if isinstance(prefix, WorldStream):
        raise ConfigError("pass finite prefixes to independence_test")
    if not isinstance(prefix, WorldPrefix):
        prefix = WorldPrefix.from_symbols(prefix, space.alphabet)
    lookup = np.array([space.index(a) for a in prefix.alphabet], dtype=np.int64)
    return lookup[prefix.indices]


def independence_test(prefixes: Sequence, spaces: Sequence[FiniteProbabilitySpace], nsigma: float = 5.0) -> IndependenceReport:
    """Compare joint frequencies of aligned prefixes with the product of ``spaces``.

    Every joint cell gets a binomial z-score; the threshold is the
    ``nsigma`` two-sided tail split evenly over all cells. The same check is
    repeated on the lag-1 pairing ``(x_1[t], x_2[t+1], ...)`` to catch
    serial cross-correlation. Below ``10**4`` symbols the verdict is
    ``"inconclusive"``.
    """
    if len(prefixes) != len(spaces) or len(prefixes) < 2:
        raise ConfigError("need at least two prefixes, each with its space")
    idx = [_indices_over(p, s) for p, s in zip(prefixes, spaces)]
    n = idx[0].size
    if any(i.size != n for i in idx):
        raise ConfigError("prefixes must have equal length")
    probs = [np.asarray(s.probs) for s in spaces]
    cells = int(np.prod([p.size for p in probs]))
    tail = 2 * stats.norm.sf(nsigma)
    thr = float(stats.norm.isf(tail / (2 * cells)))
    if n < 2:
        return IndependenceReport("inconclusive", n, 0.0, thr, 0.0, cells)
    zmax = _joint_z(idx, probs)
    lagged = [i[k : n - len(idx) + 1 + k] for k, i in enumerate(idx)]
    lag_z = _joint_z(lagged, probs)
    if n < MIN_INDEPENDENCE_N:
        verdict = "inconclusive"
    elif zmax > thr or lag_z > thr:
        verdict = "dependent"
    else:
        verdict = "independent"
    return IndependenceReport(verdict, n, zmax, thr, lag_z, cells)


def tensor_mixed(mss: Sequence[MixedState], n: int = 100_000) -> MixedState:
    """Elementwise tensor of stream-bearing mixed states.

    The governing space of the result is chosen as follows. If every
    component is a symbolwise image of one and the same sampled world, the
    joint law is computed exactly from that world's space. Otherwise, if
    :func:`independence_test` on the first ``n`` symbols says independent,
    it is the product space. In the remaining cases it is the empirical
    joint distribution over those ``n`` symbols. The test report is kept in
    ``notes["independence"]``.
    """
    mss = list(mss)
    if not mss:
        raise ConfigError("tensor_mixed needs at least one mixed state")
    if len(mss) == 1:
        return mss[0]
    if any(ms.stream is None for ms in mss):
        raise ConfigError("every component needs a stream")
    streams = [ms.stream for ms in mss]
    prefixes = [s.prefix(n) for s in streams]
    report = independence_test(prefixes, [ms.space for ms in mss])

    labels = tuple(itertools.product(*(ms.labels for ms in mss)))
    vectors = {lab: linalg.kron_all([ms.vectors[x] for ms, x in zip(mss, lab)]) for lab in labels}

    roots = [s.pointwise_root() for s in streams]
    if all(r is not None for r in roots) and all(r[0] is roots[0][0] for r in roots):
        root = roots[0][0]
        tables = [r[1] for r in roots]
        alphs = [s.alphabet for s in streams]
        pos = {a: i for i, a in enumerate(root.alphabet)}
        joint = pushforward_space(
            root.space, lambda a: tuple(al[t[pos[a]]] for al, t in zip(alphs, tables))
        )
        basis = "shared-world"
    elif report.independent:
        joint = product_space([ms.space for ms in mss])
        basis = "product"
    else:
        flat = ZippedStream(streams).prefix(n)
        counts = flat.counts()
        joint = FiniteProbabilitySpace(flat.alphabet, tuple(c / len(flat) for c in counts))
        basis = "empirical"
    joint = FiniteProbabilitySpace(labels, tuple(joint.prob(a) if a in joint else 0.0 for a in labels))
    stream = ZippedStream(streams, joint)
    return MixedState(vectors, joint, stream, {"independence": report, "joint_basis": basis})


def pairwise_linear_independence(states: Sequence) -> bool:
    """True iff no two of the states are parallel."""
    vecs = []
    for s in states:
        v = s.vector if isinstance(s, PureState) else linalg.as_vector(s)
        norm = np.linalg.norm(v)
        if norm == 0:
            return False
        vecs.append(v / norm)
    if len({v.size for v in vecs}) > 1:
        raise DimensionError("states differ in dimension")
    for i, j in itertools.combinations(range(len(vecs)), 2):
        if abs(np.vdot(vecs[i], vecs[j])) >= 1 - 1e-10:
            return False
    return True


def mixture_density(components: Sequence[tuple[float, object]]) -> np.ndarray:
    """Convex combination ``sum_k w_k rho_k`` of density matrices."""
    components = list(components)
    if not components:
        raise ConfigError("mixture needs at least one component")
    weights = [float(w) for w, _ in components]
    if any(not math.isfinite(w) or w < 0 for w in weights) or abs(math.fsum(weights) - 1) > 1e-12:
        raise ConfigError(f"weights must form a probability vector, got {weights}")
    rhos = [_as_density(r) for _, r in components]
    if len({r.shape for r in rhos}) != 1:
        raise DimensionError("component densities differ in shape")
    return validate_density(sum(w * r for w, r in zip(weights, rhos)))

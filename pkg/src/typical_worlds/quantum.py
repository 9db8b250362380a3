"""Measurement semantics: pure states, observables, measurement families.

Pointer (apparatus) states never appear as free vectors. A family with
``k`` outcomes is dilated onto a ``k``-dimensional pointer register whose
standard basis vector ``|e_i>`` stands for the record of the ``i``-th
outcome in ``family.outcomes`` order.
"""

from __future__ import annotations

from collections.abc import Hashable, Mapping
from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .errors import (
    CompletenessError,
    ConfigError,
    DimensionError,
    NotUnitaryError,
    ZeroProbabilityError,
)

#: Frobenius tolerance on ``sum_m M_m^dag M_m - I``.
COMPLETENESS_TOL = 1e-9
NORM_TOL = 1e-10
UNITARY_TOL = 1e-9

# An apparatus record is just the tuple of outcome symbols, one per apparatus.
ApparatusRecord = tuple


def clean_outcome(x: float, tol: float = 1e-9):
    """Snap a numerically computed eigenvalue to a tidy label.

    Values within ``tol`` of an integer become that ``int``; anything else is
    rounded to 12 decimals so that labels compare equal across runs.
    """
    r = round(x)
    if abs(x - r) <= tol * max(1.0, abs(x)):
        return int(r)
    return round(float(x), 12)


@dataclass(frozen=True, eq=False)
class PureState:
    """Unit vector in a finite-dimensional state space."""

    vector: np.ndarray
    label: Hashable | None = None

    def __post_init__(self):
        v = linalg.as_vector(self.vector)
        norm = np.linalg.norm(v)
        if abs(norm - 1.0) > NORM_TOL:
            raise ConfigError(f"state vector has norm {norm:.12g}, expected 1")
        v = v.copy()
        v.flags.writeable = False
        object.__setattr__(self, "vector", v)

    @classmethod
    def normalized(cls, vector, label=None) -> PureState:
        v = linalg.as_vector(vector)
        norm = np.linalg.norm(v)
        if norm == 0:
            raise ZeroProbabilityError("cannot normalize the zero vector")
        return cls(v / norm, label)

    @property
    def dim(self) -> int:
        return self.vector.size

    def density(self) -> np.ndarray:
        return linalg.projector(self.vector)


def _vec(state) -> np.ndarray:
    return state.vector if isinstance(state, PureState) else linalg.as_vector(state)


@dataclass(frozen=True, eq=False)
class Observable:
    """Hermitian matrix together with its grouped spectral decomposition."""

    matrix: np.ndarray
    spectrum: tuple = field(default=())
    tol: float = linalg.EIG_TOL

    def __post_init__(self):
        m = linalg.as_matrix(self.matrix)
        object.__setattr__(self, "matrix", m)
        if not self.spectrum:
            pairs = linalg.hermitian_eigendecomposition(m, self.tol)
            spec = tuple((clean_outcome(v), p) for v, p in pairs)
            object.__setattr__(self, "spectrum", spec)
        outcomes = [o for o, _ in self.spectrum]
        if len(set(outcomes)) != len(outcomes):
            raise ConfigError(f"observable outcomes are not distinct: {outcomes}")
        total = sum(p for _, p in self.spectrum)
        if np.linalg.norm(total - np.eye(m.shape[0])) > COMPLETENESS_TOL:
            raise CompletenessError("spectral projectors do not sum to the identity")

    @property
    def outcomes(self) -> tuple:
        return tuple(o for o, _ in self.spectrum)


class MeasurementFamily:
    """Operators ``{M_m}`` indexed by outcome symbols with ``sum M^dag M = I``.

    Parameters
    ----------
    operators : mapping or sequence of pairs
        Outcome symbol to square matrix. Iteration order fixes
        ``outcomes``, which in turn fixes pointer-register indices.
    tol : float
        Frobenius tolerance on the completeness residual.
    """

    def __init__(self, operators, tol: float = COMPLETENESS_TOL):
        items = list(operators.items()) if isinstance(operators, Mapping) else list(operators)
        if not items:
            raise ConfigError("a measurement family needs at least one outcome")
        outcomes = tuple(k for k, _ in items)
        if len(set(outcomes)) != len(outcomes):
            raise ConfigError(f"duplicate outcomes {outcomes}")
        ops = {k: linalg.as_matrix(v) for k, v in items}
        shapes = {m.shape for m in ops.values()}
        if len(shapes) != 1:
            raise DimensionError(f"operators have differing shapes {shapes}")
        (shape,) = shapes
        if shape[0] != shape[1]:
            raise DimensionError(f"operators must be square, got {shape}")
        for m in ops.values():
            m.flags.writeable = False
        self.outcomes = outcomes
        self.operators = ops
        self.dim = shape[0]
        self.residual = completeness_residual(ops.values(), self.dim)
        if self.residual > tol:
            raise CompletenessError(
                f"completeness residual {self.residual:.3e} exceeds {tol:g}"
            )

    def __len__(self):
        return len(self.outcomes)

    def __getitem__(self, m):
        try:
            return self.operators[m]
        except KeyError:
            raise ConfigError(f"unknown outcome {m!r}; known: {self.outcomes}") from None

    def __repr__(self):
        return f"MeasurementFamily(dim={self.dim}, outcomes={self.outcomes})"

    def index(self, m) -> int:
        self[m]
        return self.outcomes.index(m)


def completeness_residual(ops, dim: int) -> float:
    total = np.zeros((dim, dim), dtype=complex)
    for m in ops:
        total += linalg.dagger(m) @ m
    return float(np.linalg.norm(total - np.eye(dim)))


def projective_family(obs: Observable) -> MeasurementFamily:
    """The projectors of ``obs`` keyed by eigenvalue, ascending."""
    if not isinstance(obs, Observable):
        obs = Observable(obs)
    return MeasurementFamily(list(obs.spectrum))


def basis_family(dim: int, outcomes=None) -> MeasurementFamily:
    """Computational-basis projectors ``{k: |k><k|}``."""
    outcomes = tuple(range(dim)) if outcomes is None else tuple(outcomes)
    if len(outcomes) != dim:
        raise ConfigError("need one outcome label per basis vector")
    return MeasurementFamily(
        [(o, linalg.projector(linalg.ket(i, dim))) for i, o in enumerate(outcomes)]
    )


def vector_family(vectors: Mapping) -> MeasurementFamily:
    """Rank-one projective family from an orthonormal basis ``{m: |v_m>}``."""
    return MeasurementFamily([(m, linalg.projector(v)) for m, v in vectors.items()])


def unitary_family(u, outcome=0) -> MeasurementFamily:
    """A single-outcome family; the only operator must be unitary."""
    u = linalg.as_matrix(u)
    res = linalg.unitarity_residual(u)
    if res > UNITARY_TOL:
        raise NotUnitaryError(f"operator is not unitary (residual {res:.3e})")
    return MeasurementFamily({outcome: u})


def born_weight(fam: MeasurementFamily, state, m) -> float:
    """``|| M_m |psi> ||^2``."""
    v = _vec(state)
    if v.size != fam.dim:
        raise DimensionError(f"state dim {v.size} does not match family dim {fam.dim}")
    w = fam[m] @ v
    return float(np.real(np.vdot(w, w)))


def born_weights(fam: MeasurementFamily, state) -> dict:
    return {m: born_weight(fam, state, m) for m in fam.outcomes}


def post_measurement(fam: MeasurementFamily, state, m, tol: float = 1e-15) -> PureState:
    """Normalized ``M_m |psi>``; refuses zero-weight outcomes."""
    w = born_weight(fam, state, m)
    if w <= tol:
        raise ZeroProbabilityError(f"outcome {m!r} has zero Born weight")
    return PureState(fam[m] @ _vec(state) / np.sqrt(w), label=m)


def dilate_to_unitary(fam: MeasurementFamily) -> np.ndarray:
    """Unitary on system (x) pointer implementing ``fam``.

    Column ``j * k`` (``k`` = number of outcomes) maps ``|j>(x)|e_0>`` to
    ``sum_i M_{o_i}|j> (x) |e_i>`` where ``o_i = fam.outcomes[i]``. The other
    columns are an arbitrary orthonormal completion.
    """
    d, k = fam.dim, len(fam)
    ptr = np.eye(k, dtype=complex)
    given = []
    for j in range(d):
        col = np.zeros(d * k, dtype=complex)
        for i, o in enumerate(fam.outcomes):
            col += np.kron(fam.operators[o][:, j], ptr[i])
        given.append(col)
    full = linalg.unitary_completion(given, dim=d * k)
    u = np.empty_like(full)
    lead = [j * k for j in range(d)]
    rest = [c for c in range(d * k) if c not in set(lead)]
    u[:, lead] = full[:, :d]
    u[:, rest] = full[:, d:]
    return u


def dilated_branch(u, fam: MeasurementFamily, state, m) -> np.ndarray:
    """Apply ``u`` to ``|psi>(x)|e_0>`` and read off the pointer-``m`` component."""
    v = _vec(state)
    k = len(fam)
    out = u @ np.kron(v, linalg.ket(0, k))
    return out.reshape(fam.dim, k)[:, fam.index(m)]


def controlled_unitary(branches: Mapping) -> np.ndarray:
    """``sum_k U_k (x) |k><k|``: target register first, label register second.

    The ``i``-th key of ``branches`` (iteration order) is stored in label
    basis vector ``|i>``.
    """
    if not branches:
        raise ConfigError("controlled_unitary needs at least one branch")
    mats = [linalg.as_matrix(u) for u in branches.values()]
    dims = {m.shape for m in mats}
    if len(dims) != 1:
        raise DimensionError(f"branch unitaries differ in shape: {dims}")
    for key, m in zip(branches, mats):
        res = linalg.unitarity_residual(m)
        if res > UNITARY_TOL:
            raise NotUnitaryError(f"branch {key!r} is not unitary (residual {res:.3e})")
    n = len(mats)
    d = mats[0].shape[0]
    u = np.zeros((d * n, d * n), dtype=complex)
    for i, m in enumerate(mats):
        u += np.kron(m, linalg.projector(linalg.ket(i, n)))
    return u


# BB84 conjugate-basis states: |Psi_ab> encodes bit a in basis b.
def bb84_state(a: int, b: int) -> np.ndarray:
    if a not in (0, 1) or b not in (0, 1):
        raise ConfigError("BB84 indices must be bits")
    if b == 0:
        return linalg.ket(a, 2)
    sign = 1.0 if a == 0 else -1.0
    return np.array([1.0, sign], dtype=complex) / np.sqrt(2.0)


def bb84_preparation(a: int, b: int) -> np.ndarray:
    """``W_ab = |Psi_ab><0| + |Psi_(1-a)b><1|``."""
    return np.outer(bb84_state(a, b), linalg.ket(0, 2)) + np.outer(
        bb84_state(1 - a, b), linalg.ket(1, 2)
    )


def bb84_basis_family(c: int) -> MeasurementFamily:
    """Bob's measurement in basis ``c``: ``{m: |Psi_mc><Psi_mc|}``."""
    return vector_family({m: bb84_state(m, c) for m in (0, 1)})

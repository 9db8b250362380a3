"""Dense complex linear algebra for small systems.

Matrices and vectors are plain ``numpy`` arrays of dtype ``complex128``.
Everything here is a pure function; nothing is cached or mutated.
"""

from __future__ import annotations

import string
from collections.abc import Iterable, Sequence

import numpy as np

from .errors import (
    ConfigError,
    ConvergenceError,
    DimensionError,
    NotHermitianError,
    NotOrthonormalError,
)

#: Largest matrix side accepted by :func:`tensor_product`.
MAX_DIM = 2**12

#: Default eigenvalue grouping tolerance, relative to the spectral radius.
EIG_TOL = 1e-9

I2 = np.eye(2, dtype=complex)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)


def as_matrix(m) -> np.ndarray:
    """Coerce ``m`` to a finite 2-D complex array."""
    arr = np.asarray(m, dtype=complex)
    if arr.ndim != 2:
        raise DimensionError(f"expected a 2-D matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ConfigError("matrix contains NaN or Inf entries")
    return arr


def as_vector(v) -> np.ndarray:
    arr = np.asarray(v, dtype=complex)
    if arr.ndim == 2 and 1 in arr.shape:
        arr = arr.reshape(-1)
    if arr.ndim != 1:
        raise DimensionError(f"expected a 1-D vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ConfigError("vector contains NaN or Inf entries")
    return arr


def ket(index: int, dim: int) -> np.ndarray:
    """Standard basis vector ``|index>`` in ``dim`` dimensions."""
    if not 0 <= index < dim:
        raise DimensionError(f"basis index {index} out of range for dim {dim}")
    v = np.zeros(dim, dtype=complex)
    v[index] = 1.0
    return v


def projector(v) -> np.ndarray:
    """Rank-one projector ``|v><v|`` (``v`` is not normalized here)."""
    v = as_vector(v)
    return np.outer(v, v.conj())


def dagger(m) -> np.ndarray:
    return np.conj(np.asarray(m)).T


def hermiticity_residual(m) -> float:
    m = np.asarray(m)
    return float(np.max(np.abs(m - dagger(m)))) if m.size else 0.0


def unitarity_residual(u) -> float:
    """Frobenius norm of ``U^dag U - I``."""
    u = as_matrix(u)
    if u.shape[0] != u.shape[1]:
        raise DimensionError(f"unitary must be square, got {u.shape}")
    return float(np.linalg.norm(dagger(u) @ u - np.eye(u.shape[0])))


def tensor_product(a, b, max_dim: int = MAX_DIM) -> np.ndarray:
    """Kronecker product ``a (x) b``.

    Entry ``(i*p + k, j*q + l)`` of the result is ``a[i, j] * b[k, l]`` where
    ``(p, q)`` is the shape of ``b``. Vectors are treated as columns.
    """
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    if a.ndim == 1 and b.ndim == 1:
        if a.size * b.size > max_dim:
            raise DimensionError(
                f"tensor product dimension {a.size * b.size} exceeds cap {max_dim}"
            )
        return np.kron(a, b)
    a = as_matrix(a.reshape(-1, 1) if a.ndim == 1 else a)
    b = as_matrix(b.reshape(-1, 1) if b.ndim == 1 else b)
    rows = a.shape[0] * b.shape[0]
    cols = a.shape[1] * b.shape[1]
    if max(rows, cols) > max_dim:
        raise DimensionError(
            f"tensor product shape {(rows, cols)} exceeds cap {max_dim}"
        )
    return np.kron(a, b)


def kron_all(factors: Iterable, max_dim: int = MAX_DIM) -> np.ndarray:
    """Left-to-right tensor product of a non-empty sequence."""
    it = iter(factors)
    try:
        out = np.asarray(next(it), dtype=complex)
    except StopIteration:
        raise ConfigError("kron_all needs at least one factor") from None
    for f in it:
        out = tensor_product(out, f, max_dim=max_dim)
    return out


def hermitian_eigendecomposition(m, tol: float = EIG_TOL) -> list[tuple[float, np.ndarray]]:
    """Spectral decomposition of a Hermitian matrix as (eigenvalue, projector) pairs.

    Eigenvalues closer than ``tol * max(1, spectral radius)`` are merged into
    a single eigenspace whose eigenvalue is the group mean. Pairs come back
    sorted by ascending eigenvalue.

    Raises
    ------
    NotHermitianError
        If ``max |m - m^dag| > tol``.
    ConvergenceError
        If the underlying LAPACK solver fails.
    """
    m = as_matrix(m)
    if m.shape[0] != m.shape[1]:
        raise DimensionError(f"matrix must be square, got {m.shape}")
    if hermiticity_residual(m) > tol:
        raise NotHermitianError(
            f"matrix is not Hermitian (residual {hermiticity_residual(m):.3e} > {tol})"
        )
    herm = 0.5 * (m + dagger(m))
    try:
        vals, vecs = np.linalg.eigh(herm)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceError(str(exc)) from exc

    radius = float(np.max(np.abs(vals))) if vals.size else 0.0
    gap = tol * max(1.0, radius)
    groups: list[list[int]] = []
    for i, v in enumerate(vals):
        if groups and v - vals[groups[-1][-1]] <= gap:
            groups[-1].append(i)
        else:
            groups.append([i])

    out = []
    for g in groups:
        block = vecs[:, g]
        out.append((float(np.mean(vals[g])), block @ dagger(block)))
    return out


def _check_dims(dims: Sequence[int], size: int) -> list[int]:
    dims = [int(d) for d in dims]
    if any(d < 1 for d in dims):
        raise DimensionError(f"factor dimensions must be positive: {dims}")
    if int(np.prod(dims)) != size:
        raise DimensionError(f"dims {dims} do not multiply to {size}")
    return dims


def partial_trace(m, dims: Sequence[int], keep: Iterable[int]) -> np.ndarray:
    """Trace out every factor not listed in ``keep``.

    Kept factors appear in ascending index order in the result.
    """
    m = as_matrix(m)
    if m.shape[0] != m.shape[1]:
        raise DimensionError(f"matrix must be square, got {m.shape}")
    dims = _check_dims(dims, m.shape[0])
    keep = sorted(set(int(k) for k in keep))
    if not keep:
        raise ConfigError("keep must name at least one factor")
    if keep[0] < 0 or keep[-1] >= len(dims):
        raise DimensionError(f"keep {keep} out of range for {len(dims)} factors")
    if len(keep) == len(dims):
        return m.copy()
    n = len(dims)
    if 2 * n > len(string.ascii_letters):
        raise DimensionError("too many factors for partial_trace")
    row = list(string.ascii_letters[:n])
    col = list(string.ascii_letters[n : 2 * n])
    for i in range(n):
        if i not in keep:
            col[i] = row[i]
    out_idx = "".join(row[i] for i in keep) + "".join(col[i] for i in keep)
    spec = "".join(row) + "".join(col) + "->" + out_idx
    t = np.einsum(spec, m.reshape(dims + dims))
    d = int(np.prod([dims[i] for i in keep]))
    return t.reshape(d, d)


def trace_distance(a, b, tol: float = 1e-9) -> float:
    """Half the trace norm of ``a - b`` for Hermitian ``a`` and ``b``."""
    a = as_matrix(a)
    b = as_matrix(b)
    if a.shape != b.shape:
        raise DimensionError(f"shape mismatch {a.shape} vs {b.shape}")
    diff = a - b
    if hermiticity_residual(diff) > tol:
        raise NotHermitianError("trace_distance needs Hermitian arguments")
    vals = np.linalg.eigvalsh(0.5 * (diff + dagger(diff)))
    return 0.5 * float(np.sum(np.abs(vals)))


def unitary_completion(columns: Sequence, dim: int | None = None, tol: float = 1e-9) -> np.ndarray:
    """Extend orthonormal columns to a square unitary.

    The given vectors become the leading columns; the rest are filled by
    modified Gram-Schmidt (two passes) over standard basis candidates.
    ``dim`` is required only when ``columns`` is empty.
    """
    cols = [as_vector(c) for c in columns]
    if not cols:
        if dim is None:
            raise ConfigError("dim is required when no columns are given")
        return np.eye(dim, dtype=complex)
    d = cols[0].size
    if dim is not None and dim != d:
        raise DimensionError(f"columns have dim {d}, expected {dim}")
    if any(c.size != d for c in cols):
        raise DimensionError("columns differ in length")
    if len(cols) > d:
        raise NotOrthonormalError(f"{len(cols)} vectors cannot be orthonormal in dim {d}")
    v = np.column_stack(cols)
    gram_err = float(np.max(np.abs(dagger(v) @ v - np.eye(len(cols)))))
    if gram_err > tol:
        raise NotOrthonormalError(f"columns are not orthonormal (residual {gram_err:.3e})")

    basis = list(cols)
    for _ in range(d - len(cols)):
        q = np.column_stack(basis)
        # pick the standard vector with the largest component outside span(basis)
        resid = 1.0 - np.sum(np.abs(q) ** 2, axis=1)
        w = ket(int(np.argmax(resid)), d)
        for _pass in range(2):
            for b in basis:
                w = w - b * np.vdot(b, w)
        norm = np.linalg.norm(w)
        if norm < 1e-8:
            raise ConvergenceError("Gram-Schmidt completion lost rank")
        basis.append(w / norm)
    return np.column_stack(basis)


def local_dims_check(dims: Sequence[int], targets: Sequence[int]) -> tuple[list[int], list[int]]:
    dims = [int(d) for d in dims]
    targets = [int(t) for t in targets]
    if len(set(targets)) != len(targets):
        raise ConfigError(f"duplicate target factors {targets}")
    if any(t < 0 or t >= len(dims) for t in targets):
        raise DimensionError(f"targets {targets} out of range for {len(dims)} factors")
    return dims, targets


def apply_local(op, vec, dims: Sequence[int], targets: Sequence[int]) -> np.ndarray:
    """Apply ``op`` (acting on ``targets`` in the given order) to a joint vector."""
    dims, targets = local_dims_check(dims, targets)
    op = np.asarray(op, dtype=complex)
    vec = np.asarray(vec, dtype=complex)
    tdim = int(np.prod([dims[t] for t in targets]))
    if op.shape != (tdim, tdim):
        raise DimensionError(f"operator shape {op.shape} does not match targets dim {tdim}")
    if vec.size != int(np.prod(dims)):
        raise DimensionError(f"vector length {vec.size} does not match dims {dims}")
    t = vec.reshape(dims)
    rest = [i for i in range(len(dims)) if i not in targets]
    t = np.transpose(t, targets + rest).reshape(tdim, -1)
    t = (op @ t).reshape([dims[i] for i in targets] + [dims[i] for i in rest])
    inv = np.argsort(targets + rest)
    return np.transpose(t, inv).reshape(-1)


def lift(op, dims: Sequence[int], targets: Sequence[int]) -> np.ndarray:
    """Embed ``op`` on ``targets`` into the full space, identity elsewhere."""
    dims, targets = local_dims_check(dims, targets)
    total = int(np.prod(dims))
    eye = np.eye(total, dtype=complex)
    cols = [apply_local(op, eye[:, j], dims, targets) for j in range(total)]
    return np.column_stack(cols)


def matrix_to_json(m) -> dict:
    m = np.asarray(m, dtype=complex)
    if m.ndim == 1:
        m = m.reshape(-1, 1)
    return {
        "rows": int(m.shape[0]),
        "cols": int(m.shape[1]),
        "re": [float(x) for x in m.real.reshape(-1)],
        "im": [float(x) for x in m.imag.reshape(-1)],
    }


def matrix_from_json(obj) -> np.ndarray:
    """Inverse of :func:`matrix_to_json`; also accepts nested lists of numbers."""
    if isinstance(obj, dict):
        try:
            rows, cols = int(obj["rows"]), int(obj["cols"])
            re = np.asarray(obj["re"], dtype=float)
            im = np.asarray(obj.get("im", [0.0] * (rows * cols)), dtype=float)
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"malformed matrix object: {exc}") from exc
        if re.size != rows * cols or im.size != rows * cols:
            raise ConfigError("entry count does not equal rows * cols")
        return as_matrix((re + 1j * im).reshape(rows, cols))
    try:
        return as_matrix(np.array(obj, dtype=complex))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"malformed matrix: {exc}") from exc


def factor_vector(vec, dims: Sequence[int], keep: Sequence[int], tol: float = 1e-8) -> np.ndarray:
    """Pure state of the ``keep`` factors of a product vector.

    The joint vector must factor as ``|u>`` (on ``keep``) times something
    on the rest; the result is ``|u>`` normalized, with its largest entry made
    real and positive. Raises :class:`ConvergenceError` when the vector is
    entangled across the cut.
    """
    dims, keep = local_dims_check(dims, keep)
    vec = as_vector(vec)
    if vec.size != int(np.prod(dims)):
        raise DimensionError(f"vector length {vec.size} does not match dims {dims}")
    rest = [i for i in range(len(dims)) if i not in keep]
    kd = int(np.prod([dims[i] for i in keep]))
    t = np.transpose(vec.reshape(dims), list(keep) + rest).reshape(kd, -1)
    u, s, _ = np.linalg.svd(t, full_matrices=False)
    if s[0] == 0:
        raise ConvergenceError("zero vector has no factor")
    if s.size > 1 and s[1] > tol * s[0]:
        raise ConvergenceError("vector is not a product across the requested cut")
    out = u[:, 0]
    k = int(np.argmax(np.abs(out)))
    return out * (abs(out[k]) / out[k])

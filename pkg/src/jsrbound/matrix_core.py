from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import lru_cache, reduce
from typing import Any, Callable, Optional, Sequence

import numpy as np
import scipy.linalg as la
from scipy.sparse.linalg import ArpackNoConvergence, eigs
from scipy.sparse.linalg import LinearOperator as ScipyLinearOperator

from .errors import CapacityError, ConvergenceError, DimensionError, SymmetryError, ValidationError

logger = logging.getLogger(__name__)

DEFAULT_KRON_LIMIT = 4096
_UNDERFLOW = np.finfo(float).tiny
MAX_OPERATOR_ITER = 50_000


def as_matrix(a: Any, *, square: bool = False) -> np.ndarray:
    m = np.asarray(a, dtype=float)
    if m.ndim != 2 or 0 in m.shape:
        raise DimensionError(f"Expected a non-empty 2-D matrix, got shape {m.shape}.")
    if square and m.shape[0] != m.shape[1]:
        raise DimensionError(f"Expected a square matrix, got shape {m.shape}.")
    if not np.all(np.isfinite(m)):
        raise ValidationError("Matrix entries must be finite.")
    return m


def spectral_radius(a: Any) -> float:
    """
    max |lambda| over the eigenvalues of a square matrix (dense nonsymmetric solver).
    """
    A = as_matrix(a, square=True)
    if not A.any():
        return 0.0
    return float(np.max(np.abs(la.eigvals(A))))


def spectral_norm(a: Any) -> float:
    """Largest singular value, i.e. sqrt(rho(A^T A))."""
    A = as_matrix(a)
    if not A.any():
        return 0.0
    return float(la.svdvals(A)[0])


def kron(a: Any, b: Any) -> np.ndarray:
    return np.kron(as_matrix(a), as_matrix(b))


def kron_power(a: Any, k: int, *, limit: int = DEFAULT_KRON_LIMIT) -> np.ndarray:
    A = as_matrix(a)
    if k < 1:
        raise ValidationError(f"Kronecker power needs k >= 1, got {k}.")
    rows, cols = A.shape[0] ** k, A.shape[1] ** k
    if max(rows, cols) > limit:
        raise CapacityError(
            f"A^(x{k}) would have side {max(rows, cols)} > {limit}; "
            "use a matrix-free kron_sum operator instead."
        )
    return reduce(np.kron, [A] * k)


def kron_matvec(factors: Sequence[np.ndarray], x: np.ndarray) -> np.ndarray:
    """
    (K_1 (x) K_2 (x) ... (x) K_k) x without forming the product.

    x is read as a C-ordered tensor with one axis per factor; each round
    multiplies the leading axis and rotates it to the back, so after k rounds
    the axes are in their original order.
    """
    y = np.asarray(x, dtype=float)
    for K in factors:
        Y = y.reshape(K.shape[1], -1)
        y = (K @ Y).T.ravel()
    return y


@lru_cache(maxsize=64)
def _triu(n: int) -> tuple[np.ndarray, np.ndarray]:
    rows, cols = np.triu_indices(n)
    rows.setflags(write=False)
    cols.setflags(write=False)
    return rows, cols


def sym_dim(n: int) -> int:
    return n * (n + 1) // 2


def sym_side(length: int) -> int:
    n = (math.isqrt(8 * length + 1) - 1) // 2
    if sym_dim(n) != length:
        raise DimensionError(f"{length} is not a triangular number n(n+1)/2.")
    return n


def svec_coords(X: np.ndarray) -> np.ndarray:
    """Upper-triangular row-major coordinates (x11, x12, ..., x1n, x22, ..., xnn), unscaled."""
    return X[_triu(X.shape[0])].copy()


def unsvec_coords(coords: np.ndarray, n: int) -> np.ndarray:
    rows, cols = _triu(n)
    X = np.zeros((n, n))
    X[rows, cols] = coords
    X[cols, rows] = coords
    return X


@dataclass(frozen=True)
class SymVec:
    n: int
    coords: np.ndarray

    def __post_init__(self) -> None:
        if self.coords.shape != (sym_dim(self.n),):
            raise DimensionError(
                f"SymVec for n={self.n} needs {sym_dim(self.n)} coordinates, got {self.coords.shape}."
            )


def svec(x: Any, *, tol: float = 1e-12) -> SymVec:
    X = as_matrix(x, square=True)
    scale = max(1.0, float(np.max(np.abs(X))))
    if np.max(np.abs(X - X.T)) > tol * scale:
        raise SymmetryError("svec needs a symmetric matrix.")
    return SymVec(n=X.shape[0], coords=svec_coords(X))


def unsvec(v: SymVec) -> np.ndarray:
    return unsvec_coords(np.asarray(v.coords, dtype=float), v.n)


@dataclass(frozen=True)
class LinearOperator:
    """
    A square linear map given by its action on vectors.

    cone_invariant promises that `apply` maps a fixed proper cone into itself;
    `start` is a vector in the interior of that cone, or None when no interior
    point is known. Power iteration needs both.
    """
    dim: int
    apply: Callable[[np.ndarray], np.ndarray]
    cone_invariant: bool = False
    start: Optional[np.ndarray] = None
    label: str = "operator"

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.apply(x)

    def start_vector(self) -> np.ndarray:
        if self.start is not None:
            return np.asarray(self.start, dtype=float)
        return np.ones(self.dim)

    def materialize(self, *, limit: int = DEFAULT_KRON_LIMIT) -> np.ndarray:
        if self.dim > limit:
            raise CapacityError(f"Cannot materialize {self.label} of side {self.dim} > {limit}.")
        cols = []
        e = np.zeros(self.dim)
        for j in range(self.dim):
            e[j] = 1.0
            cols.append(np.array(self.apply(e), dtype=float))
            e[j] = 0.0
        return np.column_stack(cols)

    def as_scipy(self) -> ScipyLinearOperator:
        return ScipyLinearOperator((self.dim, self.dim), matvec=self.apply, dtype=float)


def dense_operator(a: Any, *, cone_invariant: Optional[bool] = None, label: str = "dense") -> LinearOperator:
    """Wrap a dense matrix; nonnegative matrices are cone-invariant on the orthant."""
    A = as_matrix(a, square=True)
    if cone_invariant is None:
        cone_invariant = bool(np.all(A >= 0))
    return LinearOperator(
        dim=A.shape[0],
        apply=lambda x: A @ x,
        cone_invariant=cone_invariant,
        start=np.ones(A.shape[0]),
        label=label,
    )


@dataclass(frozen=True)
class PowerResult:
    estimate: float
    converged: bool
    iterations: int
    vector: np.ndarray


def power_iterate(op: LinearOperator, *, tol: float = 1e-10, max_iter: Optional[int] = None) -> PowerResult:
    if not op.cone_invariant:
        raise ValidationError(f"Power iteration needs a cone-invariant operator ({op.label}).")
    if op.start is None:
        raise ValidationError(f"Power iteration needs a start vector inside the invariant cone ({op.label}).")
    if op.dim < 1:
        raise DimensionError("Operator dimension must be positive.")
    max_iter = max_iter if max_iter is not None else 100 * op.dim

    v = op.start_vector()
    v = v / np.linalg.norm(v)
    previous: Optional[float] = None

    for it in range(1, max_iter + 1):
        w = op.apply(v)
        norm_w = float(np.linalg.norm(w))
        if not np.isfinite(norm_w):
            raise ConvergenceError(f"Power iteration on {op.label} overflowed.")
        if norm_w < _UNDERFLOW:
            logger.debug(f"Power iteration on {op.label} collapsed after {it} steps (nilpotent direction).")
            return PowerResult(estimate=0.0, converged=True, iterations=it, vector=v)

        v = w / norm_w
        if previous is not None and abs(norm_w - previous) <= tol * norm_w:
            logger.debug(f"Power iteration on {op.label} converged in {it} steps: {norm_w!r}")
            return PowerResult(estimate=norm_w, converged=True, iterations=it, vector=v)
        previous = norm_w

    logger.warning(f"Power iteration on {op.label} did not converge in {max_iter} steps.")
    return PowerResult(estimate=previous or 0.0, converged=False, iterations=max_iter, vector=v)


def power_iteration(
    op: LinearOperator,
    tol: float = 1e-10,
    max_iter: Optional[int] = None,
) -> tuple[float, bool]:
    res = power_iterate(op, tol=tol, max_iter=max_iter)
    return res.estimate, res.converged


def operator_radius(
    op: LinearOperator,
    *,
    dense_eig_limit: int = 64,
    dense_capacity: int = DEFAULT_KRON_LIMIT,
    tol: float = 1e-10,
    max_iter_factor: int = 100,
) -> float:
    """
    rho(op): dense eigen-solve for small operators, power iteration from the
    cone interior when a start vector is known. A non-converged iteration falls back to a dense
    solve when it fits, then to ARPACK, and raises ConvergenceError when both fail.
    """
    if op.dim <= dense_eig_limit:
        return spectral_radius(op.materialize(limit=max(dense_eig_limit, op.dim)))

    iterations = 0
    if op.cone_invariant and op.start is not None:
        res = power_iterate(op, tol=tol, max_iter=min(max_iter_factor * op.dim, MAX_OPERATOR_ITER))
        if res.converged:
            return res.estimate
        iterations = res.iterations
    if op.dim <= dense_capacity:
        logger.info(f"Falling back to a dense eigen-solve for {op.label} (side {op.dim}).")
        return spectral_radius(op.materialize(limit=dense_capacity))
    try:
        vals = eigs(op.as_scipy(), k=1, which="LM", v0=op.start_vector(), tol=tol, return_eigenvectors=False)
        return float(np.abs(vals[0]))
    except ArpackNoConvergence:
        pass
    raise ConvergenceError(
        f"Spectral radius of {op.label} (side {op.dim}) is inconclusive after {iterations} power iterations."
    )

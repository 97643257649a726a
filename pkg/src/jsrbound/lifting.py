from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum
from functools import reduce
from typing import Any, Optional, Sequence

import numpy as np

from .errors import CapacityError, ValidationError
from .matrix_core import (
    DEFAULT_KRON_LIMIT,
    LinearOperator,
    as_matrix,
    kron_matvec,
    svec_coords,
    sym_dim,
    unsvec_coords,
)
from .models import MatrixSet

logger = logging.getLogger(__name__)

DEFAULT_OPERATOR_CAPACITY = 2_000_000


class LiftKind(str, Enum):
    KRON_SUM = "kron_sum"
    SDP_LIFT_SUM = "sdp_lift_sum"
    LIFT_THEN_KRON = "mixed_lift_then_kron"
    KRON_THEN_LIFT = "mixed_kron_then_lift"
    RECURSIVE = "recursive_lift"


def recursive_dimensions(n: int, depth: int) -> list[int]:
    """[n_1, ..., n_depth] with n_{l+1} = n_l (n_l + 1) / 2 and n_0 = n."""
    dims = []
    current = n
    for _ in range(depth):
        current = sym_dim(current)
        dims.append(current)
    return dims


def lifted_dimension(n: int, kind: LiftKind | str, param: int = 1, *, limit: Optional[int] = None) -> int:
    """
    Exact side of the lifted operator. Python integers do not overflow, so the
    value is always exact; `limit` turns an oversized result into a CapacityError.
    """
    kind = LiftKind(kind)
    if n < 1 or param < 1:
        raise ValidationError(f"Lifted dimension needs n >= 1 and a positive parameter, got n={n}, {param}.")

    if kind is LiftKind.KRON_SUM:
        dim, symbolic = n**param, f"{n}^{param}"
    elif kind is LiftKind.SDP_LIFT_SUM:
        dim, symbolic = sym_dim(n), f"{n}({n}+1)/2"
    elif kind is LiftKind.LIFT_THEN_KRON:
        dim, symbolic = sym_dim(n) ** param, f"({n}({n}+1)/2)^{param}"
    elif kind is LiftKind.KRON_THEN_LIFT:
        dim, symbolic = sym_dim(n**param), f"{n}^{param}({n}^{param}+1)/2"
    else:
        dim, symbolic = recursive_dimensions(n, param)[-1], f"n_{param} for n={n}"

    if limit is not None and dim > limit:
        raise CapacityError(f"Lifted dimension {symbolic} = {dim} exceeds the capacity {limit}.")
    return dim


def sdp_lift(a: Any) -> np.ndarray:
    """
    Matrix of X -> A X A^T on symmetric matrices in svec coordinates.

    Column (i, j) is svec(A B_ij A^T) for the basis B_ii = E_ii and
    B_ij = E_ij + E_ji (i < j), which reads entrywise as
    A[p,i] A[q,j] + A[p,j] A[q,i] for output coordinate (p, q).
    """
    A = as_matrix(a, square=True)
    n = A.shape[0]
    rows, cols = np.triu_indices(n)
    off_diagonal = (rows != cols).astype(float)
    M = A[np.ix_(rows, rows)] * A[np.ix_(cols, cols)]
    M += off_diagonal[None, :] * A[np.ix_(rows, cols)] * A[np.ix_(cols, rows)]
    return M


def lift_sum_dense(matrices: MatrixSet | Sequence[Any], *, limit: int = DEFAULT_KRON_LIMIT) -> np.ndarray:
    mats = matrices.matrices if isinstance(matrices, MatrixSet) else [as_matrix(a, square=True) for a in matrices]
    side = sym_dim(mats[0].shape[0])
    if side > limit:
        raise CapacityError(
            f"Lifted sum has side {side} > {limit}; use make_operator(sdp_lift_sum) instead."
        )
    return reduce(np.add, (sdp_lift(a) for a in mats))


@dataclass(frozen=True)
class LiftedOperatorSpec:
    source: MatrixSet
    kind: LiftKind
    param: int = 1

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", LiftKind(self.kind))

    @property
    def dim(self) -> int:
        return lifted_dimension(self.source.n, self.kind, self.param)

    @property
    def label(self) -> str:
        if self.kind is LiftKind.SDP_LIFT_SUM:
            return self.kind.value
        return f"{self.kind.value}({self.param})"


def _kron_left(A: np.ndarray, power: int, X: np.ndarray) -> np.ndarray:
    """A^{(x)power} @ X for a square X, one tensor axis at a time."""
    n = A.shape[0]
    N = X.shape[0]
    T = X.reshape((n,) * power + (X.shape[1],))
    for axis in range(power):
        T = np.moveaxis(np.tensordot(A, T, axes=([1], [axis])), 0, axis)
    return T.reshape(N, -1)


def _congruence_sum(mats: Sequence[np.ndarray]):
    n = mats[0].shape[0]

    def apply(x: np.ndarray) -> np.ndarray:
        X = unsvec_coords(x, n)
        Y = sum(B @ X @ B.T for B in mats)
        return svec_coords(Y)

    return apply


def make_operator(
    spec: LiftedOperatorSpec,
    *,
    capacity: int = DEFAULT_OPERATOR_CAPACITY,
    dense_capacity: int = DEFAULT_KRON_LIMIT,
) -> LinearOperator:
    """
    Matrix-free operator for the lifted sum named by `spec`.

    Only vectors of length spec.dim are ever allocated, except for the
    recursive kind whose previous level is materialized (and must fit
    `dense_capacity`).
    """
    mats = spec.source.matrices
    n = spec.source.n
    dim = lifted_dimension(n, spec.kind, spec.param, limit=capacity)
    logger.debug(f"Building {spec.label} operator of side {dim} for m={spec.source.m}, n={n}.")

    if spec.kind is LiftKind.KRON_SUM:
        k = spec.param

        def apply(x: np.ndarray) -> np.ndarray:
            return sum(kron_matvec([A] * k, x) for A in mats)

        return LinearOperator(
            dim=dim,
            apply=apply,
            cone_invariant=spec.source.cone_available,
            # all-ones is interior only for the orthant; an asserted cone goes to the eigen-solvers
            start=np.ones(dim) if spec.source.nonnegative else None,
            label=spec.label,
        )

    if spec.kind is LiftKind.SDP_LIFT_SUM:
        return LinearOperator(
            dim=dim,
            apply=_congruence_sum(mats),
            cone_invariant=True,
            start=svec_coords(np.eye(n)),
            label=spec.label,
        )

    if spec.kind is LiftKind.LIFT_THEN_KRON:
        l = spec.param
        lifts = [sdp_lift(A) for A in mats]

        def apply(x: np.ndarray) -> np.ndarray:
            return sum(kron_matvec([M] * l, x) for M in lifts)

        identity = svec_coords(np.eye(n))
        return LinearOperator(
            dim=dim,
            apply=apply,
            cone_invariant=True,
            start=reduce(np.kron, [identity] * l),
            label=spec.label,
        )

    if spec.kind is LiftKind.KRON_THEN_LIFT:
        l = spec.param
        N = n**l

        def apply(x: np.ndarray) -> np.ndarray:
            X = unsvec_coords(x, N)
            Y = sum(_kron_left(A, l, _kron_left(A, l, X).T) for A in mats)
            return svec_coords(0.5 * (Y + Y.T))

        return LinearOperator(
            dim=dim,
            apply=apply,
            cone_invariant=True,
            start=svec_coords(np.eye(N)),
            label=spec.label,
        )

    # Recursive lift: materialize levels 1..depth-1, act on the last one matrix-free.
    depth = spec.param
    levels = [n] + recursive_dimensions(n, depth)
    if levels[depth - 1] > dense_capacity:
        raise CapacityError(
            f"Recursive lift needs level n_{depth - 1} = {levels[depth - 1]} materialized, "
            f"beyond the dense capacity {dense_capacity}."
        )
    current = list(mats)
    for _ in range(depth - 1):
        current = [sdp_lift(B) for B in current]

    return LinearOperator(
        dim=dim,
        apply=_congruence_sum(current),
        cone_invariant=True,
        start=svec_coords(np.eye(levels[depth - 1])),
        label=spec.label,
    )

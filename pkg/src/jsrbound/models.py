from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Literal, Optional, Sequence

import numpy as np

from .errors import DimensionError, ValidationError

MethodName = Literal[
    "average",
    "sum",
    "kron",
    "lift",
    "kron_lift",
    "recursive",
    "bruteforce",
    "ellipsoid",
]

METHODS: tuple[str, ...] = (
    "average",
    "sum",
    "kron",
    "lift",
    "kron_lift",
    "recursive",
    "bruteforce",
    "ellipsoid",
)


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class MatrixSet:
    """
    The set {A_1, ..., A_m} of real n x n matrices.

    `nonnegative` is detected from the entries; `cone_asserted` is the caller's
    claim that the matrices share an invariant proper cone.
    """
    matrices: tuple[np.ndarray, ...]
    nonnegative: bool
    cone_asserted: bool = False
    name: Optional[str] = None

    @staticmethod
    def of(
        matrices: Sequence[Any],
        *,
        cone_asserted: bool = False,
        name: Optional[str] = None,
    ) -> "MatrixSet":
        if len(matrices) == 0:
            raise ValidationError("A matrix set needs at least one matrix.")

        mats = []
        for i, raw in enumerate(matrices):
            a = np.asarray(raw, dtype=float)
            if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] == 0:
                raise DimensionError(f"Matrix {i + 1} must be square and non-empty, got shape {a.shape}.")
            if not np.all(np.isfinite(a)):
                raise ValidationError(f"Matrix {i + 1} has non-finite entries.")
            mats.append(_frozen(a))

        n = mats[0].shape[0]
        for i, a in enumerate(mats):
            if a.shape != (n, n):
                raise DimensionError(f"Matrix {i + 1} has shape {a.shape}, expected {(n, n)}.")

        nonnegative = all(bool(np.all(a >= 0)) for a in mats)
        return MatrixSet(matrices=tuple(mats), nonnegative=nonnegative, cone_asserted=cone_asserted, name=name)

    @property
    def m(self) -> int:
        return len(self.matrices)

    @property
    def n(self) -> int:
        return self.matrices[0].shape[0]

    @property
    def cone_available(self) -> bool:
        return self.nonnegative or self.cone_asserted

    def scaled(self, factor: float) -> "MatrixSet":
        return MatrixSet.of(
            [factor * a for a in self.matrices],
            cone_asserted=self.cone_asserted,
            name=self.name,
        )

    def digest(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "m": self.m,
            "n": self.n,
            "nonnegative": self.nonnegative,
            "cone_asserted": self.cone_asserted,
        }


@dataclass(frozen=True)
class CertifiedInterval:
    """
    Bounds lower <= rho(A_1, ..., A_m) <= upper.

    guaranteed_accuracy is the factor mu with mu * upper <= rho <= upper for
    the methods that come with one; None means no a-priori rate is known.
    """
    lower: float
    upper: float
    method: str
    params: dict[str, Any] = field(default_factory=dict)
    guaranteed_accuracy: Optional[float] = None
    hypothesis: Optional[str] = None

    def __post_init__(self) -> None:
        if not (self.lower >= 0.0 and self.upper >= 0.0):
            raise ValidationError(f"Bounds must be nonnegative, got [{self.lower}, {self.upper}].")
        if self.lower > self.upper:
            raise ValidationError(f"Lower bound {self.lower} exceeds upper bound {self.upper} ({self.method}).")

    @property
    def width(self) -> float:
        return self.upper - self.lower

    def to_dict(self) -> dict[str, Any]:
        return {
            "method": self.method,
            "lower": self.lower,
            "upper": self.upper,
            "params": dict(self.params),
            "guaranteed_accuracy": self.guaranteed_accuracy,
            "hypothesis": self.hypothesis,
        }


@dataclass(frozen=True)
class PlanCandidate:
    method: str
    params: dict[str, int]
    guaranteed_accuracy: float
    predicted_dim: int
    lift_stages: int

    def to_dict(self) -> dict[str, Any]:
        return {
            "method": self.method,
            "params": dict(self.params),
            "guaranteed_accuracy": self.guaranteed_accuracy,
            "predicted_dim": self.predicted_dim,
            "lift_stages": self.lift_stages,
        }


@dataclass(frozen=True)
class ApproximationPlan:
    epsilon: float
    method: str
    params: dict[str, int]
    guaranteed_accuracy: float
    predicted_dim: int
    feasible: bool
    alternatives: tuple[PlanCandidate, ...] = ()

    def to_dict(self) -> dict[str, Any]:
        return {
            "epsilon": self.epsilon,
            "method": self.method,
            "params": dict(self.params),
            "guaranteed_accuracy": self.guaranteed_accuracy,
            "predicted_dim": self.predicted_dim,
            "feasible": self.feasible,
            "alternatives": [c.to_dict() for c in self.alternatives],
        }


@dataclass(frozen=True)
class EllipsoidCertificate:
    """
    A pair (X, tau) with X > 0 and tau X >= A_i X A_i^T for every i.
    A certificate that verifies proves rho(A_1, ..., A_m) <= sqrt(tau).
    """
    X: np.ndarray
    tau: float
    slack: float = 0.0

    def to_dict(self) -> dict[str, Any]:
        return {
            "X": [[float(v) for v in row] for row in self.X],
            "tau": self.tau,
            "slack": self.slack,
        }


@dataclass(frozen=True)
class VerificationReport:
    valid: bool
    slack: float
    margins: tuple[float, ...]
    min_eig_X: float
    pd_ok: bool
    message: str = ""

    def to_dict(self) -> dict[str, Any]:
        return {
            "valid": self.valid,
            "slack": self.slack,
            "margins": list(self.margins),
            "min_eig_X": self.min_eig_X,
            "pd_ok": self.pd_ok,
            "message": self.message,
        }

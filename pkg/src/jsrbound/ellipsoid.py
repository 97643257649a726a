from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from typing import Optional, Protocol

import numpy as np
import scipy.linalg as la

from .config import Budget, EllipsoidSettings, Tolerances
from .errors import CapacityError, ConvergenceError, DimensionError
from .lifting import LiftKind, LiftedOperatorSpec, lift_sum_dense, make_operator
from .matrix_core import (
    operator_radius,
    power_iterate,
    spectral_norm,
    spectral_radius,
    svec_coords,
    sym_dim,
    unsvec_coords,
)
from .models import EllipsoidCertificate, MatrixSet, VerificationReport

logger = logging.getLogger(__name__)

# Relative inflation of tau so that a constructed certificate has strictly positive slack.
TAU_INFLATION = 1e-8
# Smallest eigenvalue of a certificate X relative to trace X / n; keeps the pencils (A X A^T, X) well conditioned.
CERT_FLOOR = 1e-6
# Relative distance to rho(B) at which the starting certificate stops lowering its floor.
PERRON_RTOL = 1e-6


def _prescale(matrix_set: MatrixSet) -> tuple[float, MatrixSet]:
    scale = max(spectral_norm(a) for a in matrix_set.matrices)
    if scale == 0.0:
        return 0.0, matrix_set
    return scale, matrix_set.scaled(1.0 / scale)


def _check_capacity(matrix_set: MatrixSet, budget: Budget) -> None:
    side = sym_dim(matrix_set.n)
    if side > budget.operator_capacity:
        raise CapacityError(f"Lifted sum of side {side} exceeds the operator capacity {budget.operator_capacity}.")


def lifted_sum_radius(
    matrix_set: MatrixSet,
    *,
    budget: Budget = Budget(),
    tolerances: Tolerances = Tolerances(),
) -> float:
    """rho(B)^(1/2) for B: X -> sum_i A_i X A_i^T on symmetric matrices."""
    _check_capacity(matrix_set, budget)
    scale, scaled = _prescale(matrix_set)
    if scale == 0.0:
        return 0.0
    op = make_operator(
        LiftedOperatorSpec(scaled, LiftKind.SDP_LIFT_SUM),
        capacity=budget.operator_capacity,
        dense_capacity=budget.dense_capacity,
    )
    rho_b = operator_radius(
        op,
        dense_eig_limit=budget.dense_eig_limit,
        dense_capacity=budget.dense_capacity,
        tol=tolerances.power_tol,
        max_iter_factor=tolerances.power_max_iter_factor,
    )
    return scale * math.sqrt(rho_b)


def tightest_tau(matrix_set: MatrixSet, X: np.ndarray) -> float:
    """
    Smallest tau with tau X >= A_i X A_i^T for all i, i.e. the largest
    generalized eigenvalue of the pencils (A_i X A_i^T, X). Infinite when X is
    not positive definite.
    """
    X = 0.5 * (X + X.T)
    worst = 0.0
    for A in matrix_set.matrices:
        C = A @ X @ A.T
        try:
            vals = la.eigh(0.5 * (C + C.T), X, eigvals_only=True)
        except la.LinAlgError:
            return math.inf
        worst = max(worst, float(vals[-1]))
    return worst


def verify_certificate(
    matrix_set: MatrixSet,
    cert: EllipsoidCertificate,
    *,
    tolerances: Tolerances = Tolerances(),
) -> VerificationReport:
    """
    Checks X > 0 and tau X - A_i X A_i^T >= -psd_tol * tau * ||X|| for every i.

    margins[i] = 1 - lambda_max(A_i X A_i^T, X) / tau is the fraction by which
    tau could shrink for this X; it is positive exactly when constraint i holds
    strictly.
    """
    n = matrix_set.n
    X = np.asarray(cert.X, dtype=float)
    if X.shape != (n, n):
        raise DimensionError(f"Certificate X has shape {X.shape}, expected {(n, n)}.")
    tau = float(cert.tau)

    asym = float(np.max(np.abs(X - X.T)))
    X = 0.5 * (X + X.T)
    eig_x = la.eigvalsh(X)
    trace = float(np.trace(X))
    min_eig = float(eig_x[0])
    pd_ok = trace > 0 and min_eig >= tolerances.pd_floor * trace / n
    if asym > tolerances.symmetry_tol * max(1.0, float(np.max(np.abs(X)))):
        return VerificationReport(False, -1.0, (), min_eig, False, "X is not symmetric.")
    if not tau > 0 or not math.isfinite(tau):
        return VerificationReport(False, -1.0, (), min_eig, pd_ok, "tau must be a positive finite number.")
    if not pd_ok:
        return VerificationReport(False, -1.0, (), min_eig, False, "X is not positive definite.")

    norm_x = float(eig_x[-1])
    margins = []
    failures = []
    for i, A in enumerate(matrix_set.matrices, start=1):
        C = A @ X @ A.T
        C = 0.5 * (C + C.T)
        lam = float(la.eigvalsh(tau * X - C)[0])
        if lam < -tolerances.psd_tol * tau * norm_x:
            failures.append(i)
        top = float(la.eigh(C, X, eigvals_only=True)[-1])
        margins.append(1.0 - top / tau)

    slack = min(margins)
    if failures:
        message = "Constraint(s) " + ", ".join(str(i) for i in failures) + " violated."
    else:
        message = "ok"
    return VerificationReport(
        valid=not failures,
        slack=slack,
        margins=tuple(margins),
        min_eig_X=min_eig,
        pd_ok=True,
        message=message,
    )


def _to_psd(X: np.ndarray) -> np.ndarray:
    X = 0.5 * (X + X.T)
    if np.trace(X) < 0:
        X = -X
    w, V = la.eigh(X)
    return (V * np.clip(w, 0.0, None)) @ V.T


def _perron_candidates(scaled: MatrixSet, budget: Budget, tolerances: Tolerances) -> tuple[float, list[np.ndarray]]:
    """rho(B) and PSD approximations of its Perron eigenvector, read as matrices."""
    n = scaled.n
    op = make_operator(
        LiftedOperatorSpec(scaled, LiftKind.SDP_LIFT_SUM),
        capacity=budget.operator_capacity,
        dense_capacity=budget.dense_capacity,
    )
    candidates = []
    rho_b: Optional[float] = None

    res = power_iterate(op, tol=tolerances.power_tol, max_iter=tolerances.power_max_iter_factor * op.dim)
    if res.converged and res.estimate > 0:
        rho_b = res.estimate
        candidates.append(_to_psd(unsvec_coords(res.vector, n)))

    if op.dim <= budget.dense_capacity:
        M = lift_sum_dense(scaled, limit=budget.dense_capacity)
        vals, vecs = la.eig(M)
        # The Perron root is real and nonnegative; skip peripheral eigenvalues of the same modulus.
        peripheral = np.abs(vals) >= (1.0 - 1e-9) * np.max(np.abs(vals))
        j = int(np.argmax(np.where(peripheral, vals.real, -np.inf)))
        rho_b = float(np.abs(vals[j]))
        candidates.append(_to_psd(unsvec_coords(np.real(vecs[:, j]), n)))

    if rho_b is None:
        raise ConvergenceError("The Perron vector of the lifted sum could not be computed.")
    return rho_b, candidates


def _normalize(X: np.ndarray, floor: float) -> np.ndarray:
    n = X.shape[0]
    X = 0.5 * (X + X.T)
    trace = float(np.trace(X))
    if not trace > 0 or not np.all(np.isfinite(X)):
        return np.eye(n)
    X = X * (n / trace)
    w, V = la.eigh(X)
    w = np.clip(w, floor, None)
    X = (V * w) @ V.T
    return 0.5 * (X + X.T) * (n / float(np.sum(w)))


def _resolvent_candidates(
    scaled: MatrixSet,
    rho_b: float,
    budget: Budget,
    tolerances: Tolerances,
) -> list[np.ndarray]:
    """
    X = (I - B/tau)^-1 Z for tau just above rho(B) and Z > 0. Then
    tau X - sum_i A_i X A_i^T = tau Z > 0, so every such X is feasible at tau.
    Z is drawn from the inverse of the Perron matrix of the adjoint
    Y -> sum_i A_i^T Y A_i, which keeps X well conditioned when the
    Perron matrix of B is singular.
    """
    n = scaled.n
    if rho_b <= 0.0 or sym_dim(n) > budget.dense_capacity:
        return []
    adjoint = MatrixSet.of([a.T for a in scaled.matrices])
    try:
        _, duals = _perron_candidates(adjoint, budget, tolerances)
    except ConvergenceError:
        return []
    Y = _normalize(duals[-1], floor=0.0)
    w, V = la.eigh(Y)
    w = np.clip(w, 0.0, None)

    tau = rho_b * (1.0 + 0.5 * PERRON_RTOL)
    M = lift_sum_dense(scaled, limit=budget.dense_capacity)
    lu = la.lu_factor(np.eye(M.shape[0]) - M / tau)
    candidates = []
    for mu in np.logspace(0, -14, 15):
        Z = (V / (w + mu)) @ V.T
        X = unsvec_coords(la.lu_solve(lu, svec_coords(0.5 * (Z + Z.T))), n)
        if np.all(np.isfinite(X)):
            candidates.append(X)
    return candidates


def _floor_schedule(tolerances: Tolerances) -> list[float]:
    """CERT_FLOOR, then decades down to twice pd_floor so that verification still accepts the result."""
    bottom = 2.0 * tolerances.pd_floor
    floors = []
    floor = CERT_FLOOR
    while floor > bottom:
        floors.append(floor)
        floor /= 10.0
    floors.append(bottom)
    return floors


def _closest_to_perron(
    scaled: MatrixSet,
    candidates: list[np.ndarray],
    floor: float,
) -> Optional[tuple[float, np.ndarray]]:
    n = scaled.n
    best: Optional[tuple[float, np.ndarray]] = None
    for X in candidates:
        for regularization in (0.0, 1e-8, 1e-6, 1e-4, 1e-2):
            trial = _normalize(X + regularization * np.eye(n), floor=floor)
            tau = tightest_tau(scaled, trial)
            if math.isfinite(tau):
                break
        if math.isfinite(tau) and (best is None or tau < best[0]):
            best = (tau, trial)
    return best


def initial_certificate(
    matrix_set: MatrixSet,
    *,
    budget: Budget = Budget(),
    tolerances: Tolerances = Tolerances(),
) -> EllipsoidCertificate:
    """
    Certificate built from the Perron eigenvector X* of B: X -> sum_i A_i X A_i^T.
    Each A_i X* A_i^T is PSD and they sum to rho(B) X*, so (X*, rho(B)) is feasible.

    X* may be singular. Its eigenvalues are then lifted to a floor, which costs
    tightness; the floor is lowered one decade at a time (down to twice
    pd_floor) until tau comes within PERRON_RTOL of rho(B). If no floor gets
    there, resolvent certificates are tried. The smallest verified tau wins.
    """
    _check_capacity(matrix_set, budget)
    n = matrix_set.n
    scale, scaled = _prescale(matrix_set)
    if scale == 0.0:
        return EllipsoidCertificate(X=np.eye(n), tau=np.finfo(float).tiny, slack=1.0)

    rho_b, candidates = _perron_candidates(scaled, budget, tolerances)
    target = rho_b * (1.0 + PERRON_RTOL)
    kept: Optional[tuple[EllipsoidCertificate, VerificationReport]] = None
    last_failure = "no positive definite starting point"

    def keep(X: np.ndarray, tau_tilde: float) -> bool:
        nonlocal kept, last_failure
        cert = EllipsoidCertificate(X=X, tau=max(rho_b, tau_tilde) * (1.0 + TAU_INFLATION) * scale**2)
        report = verify_certificate(matrix_set, cert, tolerances=tolerances)
        if not (report.valid and report.slack > 0):
            last_failure = report.message
            return False
        if kept is None or cert.tau < kept[0].tau:
            kept = (cert, report)
        return tau_tilde <= target

    reached = False
    for floor in _floor_schedule(tolerances):
        best = _closest_to_perron(scaled, candidates, floor)
        if best is not None and keep(best[1], best[0]):
            reached = True
            break
        logger.debug(f"Starting certificate at floor {floor!r} does not reach rho(B) {rho_b!r}.")

    if not reached:
        floor = 2.0 * tolerances.pd_floor
        for X in _resolvent_candidates(scaled, rho_b, budget, tolerances):
            X = _normalize(X, floor=floor)
            if keep(X, tightest_tau(scaled, X)):
                reached = True
                break

    if kept is None:
        raise ConvergenceError(f"Initial ellipsoid certificate failed verification: {last_failure}")
    cert, report = kept
    if not reached:
        logger.warning(
            f"Starting ellipsoid tau {cert.tau!r} stays above rho(B) {rho_b * scale**2!r}: "
            f"no well-conditioned certificate was found near the Perron matrix of the lifted sum."
        )
    return replace(cert, slack=report.slack)


class FeasibilityBackend(Protocol):
    """
    Finds X with tau X >= A_i X A_i^T for all i, or gives up. Whatever it
    returns is only trusted after verify_certificate accepts it.
    """

    def find(self, matrix_set: MatrixSet, tau: float, X0: np.ndarray) -> Optional[np.ndarray]: ...


@dataclass(frozen=True)
class SubgradientBackend:
    """
    Subgradient descent on f(X) = max_i lambda_max(A_i X A_i^T - tau X) over
    {X >= floor I, trace X = n}. Deterministic step schedule step0 / sqrt(t + 1).
    """
    steps: int = 500
    step0: float = 0.5
    floor: float = 1e-6

    def find(self, matrix_set: MatrixSet, tau: float, X0: np.ndarray) -> Optional[np.ndarray]:
        X = _normalize(X0, self.floor)
        for t in range(self.steps):
            worst, grad = -math.inf, None
            for A in matrix_set.matrices:
                C = A @ X @ A.T - tau * X
                w, V = la.eigh(0.5 * (C + C.T))
                if w[-1] > worst:
                    u = V[:, -1]
                    Au = A.T @ u
                    worst, grad = float(w[-1]), np.outer(Au, Au) - tau * np.outer(u, u)
            if worst < 0:
                logger.debug(f"Subgradient backend found a feasible X for tau={tau!r} after {t} steps.")
                return X
            g_norm = float(np.linalg.norm(grad))
            if g_norm == 0.0:
                return None
            X = _normalize(X - (self.step0 / math.sqrt(t + 1)) * grad / g_norm, self.floor)
        return None


@dataclass(frozen=True)
class CvxpyBackend:
    """Interior-point feasibility through cvxpy (optional `sdp` extra)."""
    floor: float = 1e-6
    solver: Optional[str] = None

    def find(self, matrix_set: MatrixSet, tau: float, X0: np.ndarray) -> Optional[np.ndarray]:
        try:
            import cvxpy as cp
        except ImportError as e:
            raise ImportError("The cvxpy backend needs the optional dependency: pip install jsrbound[sdp]") from e

        n = matrix_set.n
        X = cp.Variable((n, n), symmetric=True)
        constraints = [X >> self.floor * np.eye(n), cp.trace(X) == n]
        for A in matrix_set.matrices:
            S = cp.Variable((n, n), symmetric=True)
            constraints += [S == tau * X - A @ X @ A.T, S >> 0]

        prob = cp.Problem(cp.Minimize(0), constraints)
        try:
            prob.solve(**({"solver": self.solver} if self.solver else {}))
        except cp.error.SolverError as e:
            logger.warning(f"cvxpy failed at tau={tau!r}: {e}")
            return None
        if prob.status not in ("optimal", "optimal_inaccurate") or X.value is None:
            return None
        return np.asarray(X.value)


def make_backend(settings: EllipsoidSettings) -> FeasibilityBackend:
    if settings.backend == "cvxpy":
        return CvxpyBackend()
    return SubgradientBackend(steps=settings.subgradient_steps)


@dataclass(frozen=True)
class EllipsoidResult:
    rho_hat: float
    certificate: EllipsoidCertificate
    lifted_radius: float
    levels: int

    def __iter__(self):
        yield self.rho_hat
        yield self.certificate


def ellipsoid_approx(
    matrix_set: MatrixSet,
    tol: Optional[float] = None,
    *,
    settings: EllipsoidSettings = EllipsoidSettings(),
    budget: Budget = Budget(),
    tolerances: Tolerances = Tolerances(),
    backend: Optional[FeasibilityBackend] = None,
) -> EllipsoidResult:
    """
    Upper bound sqrt(tau) from the best verified certificate found by bisection
    on tau, starting from initial_certificate. Never worse than the start.
    """
    tol = settings.tol if tol is None else tol
    backend = backend or make_backend(settings)
    m, n = matrix_set.m, matrix_set.n

    start = initial_certificate(matrix_set, budget=budget, tolerances=tolerances)
    scale, scaled = _prescale(matrix_set)
    if scale == 0.0:
        return EllipsoidResult(rho_hat=0.0, certificate=start, lifted_radius=0.0, levels=0)

    X_best = start.X
    tau_start = start.tau / scale**2
    hi = min(tau_start, tightest_tau(scaled, X_best) * (1.0 + TAU_INFLATION))
    rho_b = (lifted_sum_radius(scaled, budget=budget, tolerances=tolerances)) ** 2
    lo = max(max(spectral_radius(a) ** 2 for a in scaled.matrices), rho_b / m)
    lo = min(lo, hi)
    scaled_tol = tol / scale

    levels = 0
    for _ in range(settings.bisection_levels):
        if math.sqrt(hi) - math.sqrt(lo) <= scaled_tol:
            break
        levels += 1
        mid = 0.5 * (lo + hi)
        X = backend.find(scaled, mid, X_best)
        if X is None:
            lo = mid
            continue
        X = _normalize(np.asarray(X, dtype=float), floor=CERT_FLOOR)
        tau = tightest_tau(scaled, X) * (1.0 + TAU_INFLATION)
        candidate = EllipsoidCertificate(X=X, tau=tau)
        report = verify_certificate(scaled, candidate, tolerances=tolerances)
        if tau < hi and report.valid and report.slack > 0:
            hi, X_best = tau, X
            logger.debug(f"Ellipsoid bisection level {levels}: verified tau={tau!r}")
        else:
            lo = mid

    cert = EllipsoidCertificate(X=X_best, tau=hi * scale**2)
    report = verify_certificate(matrix_set, cert, tolerances=tolerances)
    if not (report.valid and report.slack > 0):
        logger.warning("Refined ellipsoid certificate did not re-verify; keeping the starting certificate.")
        cert, report = start, verify_certificate(matrix_set, start, tolerances=tolerances)
    cert = replace(cert, slack=report.slack)

    rho_hat = math.sqrt(cert.tau)
    logger.info(f"Ellipsoid approximation {rho_hat!r} after {levels} bisection levels (m={m}, n={n}).")
    return EllipsoidResult(
        rho_hat=rho_hat,
        certificate=cert,
        lifted_radius=scale * math.sqrt(rho_b),
        levels=levels,
    )

from __future__ import annotations

import itertools
import logging
import math
import time
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Optional, Sequence

import numpy as np

from .config import Budget, EllipsoidSettings, Tolerances
from .ellipsoid import FeasibilityBackend, ellipsoid_approx
from .errors import CapacityError, HypothesisError, JsrError, ValidationError, reason_code
from .lifting import LiftKind, LiftedOperatorSpec, lifted_dimension, make_operator, recursive_dimensions
from .matrix_core import operator_radius, spectral_norm, spectral_radius, sym_dim
from .models import METHODS, ApproximationPlan, CertifiedInterval, MatrixSet, PlanCandidate
from .oracle import brute_force_bounds

logger = logging.getLogger(__name__)

# Upper bounds from different methods may disagree with lower bounds by rounding only.
_AGREEMENT_TOL = 1e-9


def sum_accuracy(m: int) -> float:
    return 1.0 / m


def kron_accuracy(m: int, k: int) -> float:
    return m ** (-1.0 / k)


def lift_accuracy(m: int, l: int) -> float:
    return m ** (-1.0 / (2 * l))


def recursive_accuracy(m: int, depth: int) -> float:
    return (1.0 / m) ** (1.0 / 2**depth)


def _hypothesis(matrix_set: MatrixSet, method: str) -> Optional[str]:
    """Name the cone hypothesis a Kronecker-sum bound relies on, or refuse."""
    if matrix_set.m == 1:
        return None
    if matrix_set.nonnegative:
        return "nonnegative"
    if matrix_set.cone_asserted:
        return "cone_asserted"
    raise HypothesisError(
        f"The {method} upper bound needs a common invariant proper cone: the matrices are not "
        "entrywise nonnegative and no cone was asserted (--assert-cone)."
    )


def _lifted_upper(
    matrix_set: MatrixSet,
    kind: LiftKind,
    param: int,
    root: int,
    budget: Budget,
    tolerances: Tolerances,
) -> float:
    """s * rho(lifted sum of A_i / s)^(1/root) with s the largest spectral norm."""
    scale = max(spectral_norm(a) for a in matrix_set.matrices)
    if scale == 0.0:
        return 0.0
    scaled = matrix_set.scaled(1.0 / scale)
    op = make_operator(
        LiftedOperatorSpec(scaled, kind, param),
        capacity=budget.operator_capacity,
        dense_capacity=budget.dense_capacity,
    )
    rho = operator_radius(
        op,
        dense_eig_limit=budget.dense_eig_limit,
        dense_capacity=budget.dense_capacity,
        tol=tolerances.power_tol,
        max_iter_factor=tolerances.power_max_iter_factor,
    )
    return scale * rho ** (1.0 / root)


def _interval(
    upper: float,
    accuracy: float,
    method: str,
    params: dict[str, Any],
    hypothesis: Optional[str] = None,
) -> CertifiedInterval:
    return CertifiedInterval(
        lower=accuracy * upper,
        upper=upper,
        method=method,
        params=params,
        guaranteed_accuracy=accuracy,
        hypothesis=hypothesis,
    )


def _positive(name: str, value: int) -> int:
    if not isinstance(value, (int, np.integer)) or isinstance(value, bool) or value < 1:
        raise ValidationError(f"{name} must be a positive integer, got {value!r}.")
    return int(value)


def lower_bound_average(
    matrix_set: MatrixSet,
    weights: Optional[Sequence[float]] = None,
    tol: Optional[float] = None,
    *,
    tolerances: Tolerances = Tolerances(),
) -> float:
    """
    rho(sum_i w_i A_i) for a probability vector w (uniform when omitted).
    Any convex combination of the A_i lies in their convex hull, whose joint
    spectral radius equals that of the set.
    """
    tol = tolerances.weight_tol if tol is None else tol
    m = matrix_set.m
    if weights is None:
        w = np.full(m, 1.0 / m)
    else:
        w = np.asarray(weights, dtype=float)
        if w.shape != (m,):
            raise ValidationError(f"Expected {m} weights, got shape {w.shape}.")
        if np.any(w < -tol) or abs(float(w.sum()) - 1.0) > tol:
            raise ValidationError("Weights must be nonnegative and sum to 1.")
        w = np.clip(w, 0.0, None)
    combination = sum(wi * a for wi, a in zip(w, matrix_set.matrices))
    return spectral_radius(combination)


def _simplex_grid(m: int, resolution: int) -> Iterable[tuple[float, ...]]:
    for cut in itertools.combinations(range(resolution + m - 1), m - 1):
        parts = np.diff((-1,) + cut + (resolution + m - 1,)) - 1
        yield tuple(float(p) / resolution for p in parts)


def best_average_lower_bound(
    matrix_set: MatrixSet,
    *,
    resolution: int = 8,
    max_points: int = 4096,
    tolerances: Tolerances = Tolerances(),
) -> tuple[float, tuple[float, ...]]:
    """
    Largest rho(sum_i w_i A_i) over the vertices of the simplex, the uniform
    weights and, when it is small enough, a grid of the given resolution.
    """
    m = matrix_set.m
    points = {tuple(float(i == j) for j in range(m)) for i in range(m)}
    points.add(tuple([1.0 / m] * m))
    if math.comb(resolution + m - 1, m - 1) <= max_points:
        points.update(_simplex_grid(m, resolution))

    best, best_w = -1.0, None
    for w in sorted(points):
        value = lower_bound_average(matrix_set, w, tolerances=tolerances)
        if value > best:
            best, best_w = value, w
    return best, best_w


def sum_bounds(
    matrix_set: MatrixSet,
    *,
    budget: Budget = Budget(),
    tolerances: Tolerances = Tolerances(),
) -> CertifiedInterval:
    """[rho(sum A_i) / m, rho(sum A_i)]."""
    hypothesis = _hypothesis(matrix_set, "sum")
    upper = _lifted_upper(matrix_set, LiftKind.KRON_SUM, 1, 1, budget, tolerances)
    return _interval(upper, sum_accuracy(matrix_set.m), "sum", {}, hypothesis)


def kronecker_bounds(
    matrix_set: MatrixSet,
    k: int,
    *,
    budget: Budget = Budget(),
    tolerances: Tolerances = Tolerances(),
) -> CertifiedInterval:
    """[m^(-1/k) U, U] with U = rho(sum A_i^(x)k)^(1/k), computed matrix-free."""
    k = _positive("k", k)
    hypothesis = _hypothesis(matrix_set, "Kronecker")
    lifted_dimension(matrix_set.n, LiftKind.KRON_SUM, k, limit=budget.operator_capacity)
    upper = _lifted_upper(matrix_set, LiftKind.KRON_SUM, k, k, budget, tolerances)
    return _interval(upper, kron_accuracy(matrix_set.m, k), "kron", {"k": k}, hypothesis)


def lift_bounds(
    matrix_set: MatrixSet,
    l: int,
    *,
    budget: Budget = Budget(),
    tolerances: Tolerances = Tolerances(),
) -> CertifiedInterval:
    """[m^(-1/(2l)) U, U] with U = rho(sum_i lift(A_i)^(x)l)^(1/(2l)); no cone needed."""
    l = _positive("l", l)
    kind = LiftKind.SDP_LIFT_SUM if l == 1 else LiftKind.LIFT_THEN_KRON
    lifted_dimension(matrix_set.n, kind, l, limit=budget.operator_capacity)
    upper = _lifted_upper(matrix_set, kind, l, 2 * l, budget, tolerances)
    return _interval(upper, lift_accuracy(matrix_set.m, l), "lift", {"l": l})


def kron_lift_bounds(
    matrix_set: MatrixSet,
    l: int,
    *,
    budget: Budget = Budget(),
    tolerances: Tolerances = Tolerances(),
) -> CertifiedInterval:
    """Same rate as lift_bounds, lifting A_i^(x)l instead of taking powers of the lift."""
    l = _positive("l", l)
    lifted_dimension(
        matrix_set.n,
        LiftKind.KRON_THEN_LIFT,
        l,
        limit=min(budget.operator_capacity, budget.dense_capacity),
    )
    upper = _lifted_upper(matrix_set, LiftKind.KRON_THEN_LIFT, l, 2 * l, budget, tolerances)
    return _interval(upper, lift_accuracy(matrix_set.m, l), "kron_lift", {"l": l})


def recursive_lift_bounds(
    matrix_set: MatrixSet,
    depth: int,
    *,
    budget: Budget = Budget(),
    tolerances: Tolerances = Tolerances(),
) -> CertifiedInterval:
    """[(1/m)^(1/2^depth) U, U] with U the 2^depth-th root of the depth-fold lifted sum."""
    depth = _positive("depth", depth)
    lifted_dimension(matrix_set.n, LiftKind.RECURSIVE, depth, limit=budget.operator_capacity)
    upper = _lifted_upper(matrix_set, LiftKind.RECURSIVE, depth, 2**depth, budget, tolerances)
    return _interval(upper, recursive_accuracy(matrix_set.m, depth), "recursive", {"depth": depth})


def _smallest(accuracy: Callable[[int], float], target: float) -> int:
    p = 1
    while accuracy(p) < target:
        p *= 2
    lo, hi = max(1, p // 2), p
    while lo < hi:
        mid = (lo + hi) // 2
        if accuracy(mid) >= target:
            hi = mid
        else:
            lo = mid + 1
    return hi


def plan_accuracy(
    m: int,
    n: int,
    epsilon: float,
    *,
    cone_available: bool = True,
    capacity: int = Budget().operator_capacity,
) -> ApproximationPlan:
    """
    Cheapest configuration whose a-priori accuracy is at least 1 - epsilon.

    Candidates are the Kronecker power (only with a cone), the lift, the
    Kronecker-then-lift and the recursive lift, each at its smallest
    sufficient parameter. The one with the smallest operator side wins; ties
    go to fewer lift stages.
    """
    m, n = _positive("m", m), _positive("n", n)
    if not 0.0 < epsilon < 1.0:
        raise ValidationError(f"epsilon must lie in (0, 1), got {epsilon!r}.")

    if m == 1:
        exact = PlanCandidate("kron", {"k": 1}, 1.0, n, 0)
        return ApproximationPlan(epsilon, exact.method, exact.params, 1.0, n, n <= capacity)

    target = 1.0 - epsilon
    candidates = []
    if cone_available:
        k = _smallest(lambda p: kron_accuracy(m, p), target)
        candidates.append(PlanCandidate("kron", {"k": k}, kron_accuracy(m, k), n**k, 0))
    l = _smallest(lambda p: lift_accuracy(m, p), target)
    candidates.append(PlanCandidate("lift", {"l": l}, lift_accuracy(m, l), sym_dim(n) ** l, 1))
    candidates.append(PlanCandidate("kron_lift", {"l": l}, lift_accuracy(m, l), sym_dim(n**l), 1))
    depth = _smallest(lambda p: recursive_accuracy(m, p), target)
    candidates.append(
        PlanCandidate("recursive", {"depth": depth}, recursive_accuracy(m, depth), recursive_dimensions(n, depth)[-1], depth)
    )

    ranked = sorted(enumerate(candidates), key=lambda item: (item[1].predicted_dim, item[1].lift_stages, item[0]))
    best = ranked[0][1]
    alternatives = tuple(c for _, c in ranked[1:])
    logger.debug(f"Plan for m={m}, n={n}, epsilon={epsilon}: {best.method} {best.params} side {best.predicted_dim}")
    return ApproximationPlan(
        epsilon=epsilon,
        method=best.method,
        params=best.params,
        guaranteed_accuracy=best.guaranteed_accuracy,
        predicted_dim=best.predicted_dim,
        feasible=best.predicted_dim <= capacity,
        alternatives=alternatives,
    )


def ellipsoid_bounds(
    matrix_set: MatrixSet,
    *,
    settings: EllipsoidSettings = EllipsoidSettings(),
    budget: Budget = Budget(),
    tolerances: Tolerances = Tolerances(),
    backend: Optional[FeasibilityBackend] = None,
) -> tuple[CertifiedInterval, Any]:
    """
    [min(rho_hat, sqrt(rho(B))) / sqrt(m), rho_hat] from the ellipsoid
    approximation, together with the certificate behind rho_hat.
    """
    result = ellipsoid_approx(matrix_set, settings=settings, budget=budget, tolerances=tolerances, backend=backend)
    lower = min(result.rho_hat, result.lifted_radius) / math.sqrt(matrix_set.m)
    interval = CertifiedInterval(
        lower=lower,
        upper=result.rho_hat,
        method="ellipsoid",
        params={"backend": settings.backend, "levels": result.levels},
    )
    return interval, result.certificate


def classify_stability(interval: CertifiedInterval) -> str:
    """Stability of the switched system x+ = A_sigma x under arbitrary switching."""
    if interval.upper < 1.0:
        return "stable"
    if interval.lower > 1.0:
        return "unstable"
    return "inconclusive"


@dataclass(frozen=True)
class MethodOutcome:
    """One method run by best_bounds: an interval, a lower bound only, or a skip reason."""
    method: str
    params: dict[str, Any] = field(default_factory=dict)
    interval: Optional[CertifiedInterval] = None
    lower: Optional[float] = None
    reason: Optional[str] = None
    message: str = ""
    seconds: float = 0.0
    extra: dict[str, Any] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.reason is None

    def to_dict(self, *, include_timings: bool = True) -> dict[str, Any]:
        out: dict[str, Any] = {"method": self.method, "params": dict(self.params)}
        if include_timings:
            out["seconds"] = self.seconds
        if self.interval is not None:
            out["interval"] = self.interval.to_dict()
        if self.lower is not None:
            out["lower"] = self.lower
        if self.reason is not None:
            out["skipped"] = {"reason": self.reason, "message": self.message}
        out.update(self.extra)
        return out


@dataclass(frozen=True)
class CombinedBounds:
    interval: Optional[CertifiedInterval]
    lower_from: Optional[str]
    upper_from: Optional[str]
    outcomes: tuple[MethodOutcome, ...]

    @property
    def stability(self) -> Optional[str]:
        return classify_stability(self.interval) if self.interval is not None else None

    def outcome(self, method: str) -> Optional[MethodOutcome]:
        return next((o for o in self.outcomes if o.method == method), None)


def default_parameters(matrix_set: MatrixSet, budget: Budget = Budget()) -> dict[str, Optional[int]]:
    """Largest parameter of each method whose operator fits the budget (None when none fits)."""
    m, n = matrix_set.m, matrix_set.n
    cap = budget.operator_capacity

    def largest(limit: int, fits: Callable[[int], bool]) -> Optional[int]:
        best = None
        for p in range(1, limit + 1):
            if fits(p):
                best = p
        return best

    return {
        "k": largest(budget.max_kron_k, lambda k: n**k <= cap),
        "l": largest(budget.max_lift_l, lambda l: sym_dim(n) ** l <= cap),
        "kron_lift_l": largest(budget.max_lift_l, lambda l: sym_dim(n**l) <= min(cap, budget.dense_capacity)),
        "depth": largest(
            budget.max_depth,
            lambda d: ([n] + recursive_dimensions(n, d))[d - 1] <= budget.dense_capacity
            and recursive_dimensions(n, d)[-1] <= cap,
        ),
        "bruteforce_k": largest(budget.max_bruteforce_k, lambda k: m**k <= budget.enumeration_budget),
    }


def _run(method: str, params: dict[str, Any], fn: Callable[[], Any]) -> tuple[MethodOutcome, Any]:
    started = time.perf_counter()
    try:
        value = fn()
    except JsrError as e:
        if isinstance(e, ValueError):
            raise
        logger.info(f"Skipping {method}: {e}")
        return MethodOutcome(method, params, reason=reason_code(e), message=str(e),
                             seconds=time.perf_counter() - started), None
    return MethodOutcome(method, params, seconds=time.perf_counter() - started), value


def best_bounds(
    matrix_set: MatrixSet,
    *,
    budget: Budget = Budget(),
    tolerances: Tolerances = Tolerances(),
    ellipsoid: EllipsoidSettings = EllipsoidSettings(),
    methods: Optional[Sequence[str]] = None,
    params: Optional[dict[str, int]] = None,
    backend: Optional[FeasibilityBackend] = None,
) -> CombinedBounds:
    """
    Runs every applicable method in a fixed order and intersects the results:
    the largest lower bound and the smallest upper bound, with the methods
    they came from. Methods whose hypothesis fails or whose operator does not
    fit the budget are recorded as skipped instead of failing the call.
    """
    methods = list(methods or METHODS)
    for name in methods:
        if name not in METHODS:
            raise ValidationError(f"Unknown method {name!r}; expected one of {', '.join(METHODS)}.")
    chosen = default_parameters(matrix_set, budget)
    chosen.update({k: v for k, v in (params or {}).items() if v is not None})

    def needs(key: str) -> int:
        if chosen.get(key) is None:
            raise CapacityError(f"No value of {key} fits the budget for n={matrix_set.n}, m={matrix_set.m}.")
        return int(chosen[key])

    outcomes: list[MethodOutcome] = []
    for method in METHODS:
        if method not in methods:
            continue

        if method == "average":
            outcome, value = _run(method, {}, lambda: best_average_lower_bound(matrix_set, tolerances=tolerances))
            if value is not None:
                outcome = MethodOutcome(method, {"weights": list(value[1])}, lower=value[0], seconds=outcome.seconds)
        elif method == "sum":
            outcome, value = _run(method, {}, lambda: sum_bounds(matrix_set, budget=budget, tolerances=tolerances))
        elif method == "kron":
            outcome, value = _run(method, {"k": chosen.get("k")}, lambda: kronecker_bounds(
                matrix_set, needs("k"), budget=budget, tolerances=tolerances))
        elif method == "lift":
            outcome, value = _run(method, {"l": chosen.get("l")}, lambda: lift_bounds(
                matrix_set, needs("l"), budget=budget, tolerances=tolerances))
        elif method == "kron_lift":
            outcome, value = _run(method, {"l": chosen.get("kron_lift_l")}, lambda: kron_lift_bounds(
                matrix_set, needs("kron_lift_l"), budget=budget, tolerances=tolerances))
        elif method == "recursive":
            outcome, value = _run(method, {"depth": chosen.get("depth")}, lambda: recursive_lift_bounds(
                matrix_set, needs("depth"), budget=budget, tolerances=tolerances))
        elif method == "bruteforce":
            outcome, value = _run(method, {"k": chosen.get("bruteforce_k")}, lambda: brute_force_bounds(
                matrix_set, needs("bruteforce_k"), budget=budget.enumeration_budget))
            if value is not None:
                interval = CertifiedInterval(value.lower, value.upper, "bruteforce", {"k": value.k})
                outcome = MethodOutcome(
                    method, {"k": value.k}, interval=interval, seconds=outcome.seconds,
                    extra={"lower_word": str(value.lower_word), "upper_word": str(value.upper_word)},
                )
                value = None
        else:
            outcome, value = _run(method, {"backend": ellipsoid.backend}, lambda: ellipsoid_bounds(
                matrix_set, settings=ellipsoid, budget=budget, tolerances=tolerances, backend=backend))
            if value is not None:
                interval, cert = value
                outcome = MethodOutcome(method, interval.params, interval=interval, seconds=outcome.seconds,
                                        extra={"certificate": cert.to_dict()})
                value = None

        if isinstance(value, CertifiedInterval):
            outcome = MethodOutcome(method, dict(value.params), interval=value, seconds=outcome.seconds)
        outcomes.append(outcome)

    return combine(outcomes)


def combine(outcomes: Sequence[MethodOutcome]) -> CombinedBounds:
    lowers = []
    uppers = []
    for o in outcomes:
        if o.interval is not None:
            lowers.append((o.interval.lower, o.method))
            uppers.append((o.interval.upper, o.method))
        elif o.lower is not None:
            lowers.append((o.lower, o.method))

    if not uppers:
        return CombinedBounds(None, None, None, tuple(outcomes))

    # max/min keep the first method in run order on ties.
    lower, lower_from = max(lowers, key=lambda item: item[0])
    upper, upper_from = min(uppers, key=lambda item: item[0])
    if lower > upper:
        if lower - upper > _AGREEMENT_TOL * max(1.0, upper):
            logger.warning(f"Lower bound {lower!r} ({lower_from}) exceeds upper bound {upper!r} ({upper_from}).")
        lower = upper

    interval = CertifiedInterval(
        lower=lower,
        upper=upper,
        method="combined",
        params={"lower_from": lower_from, "upper_from": upper_from},
    )
    return CombinedBounds(interval, lower_from, upper_from, tuple(outcomes))

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from typing import Any, Optional

from . import __version__
from .bounds import CombinedBounds, best_bounds, plan_accuracy
from .config import AppConfig, load_config
from .ellipsoid import FeasibilityBackend, verify_certificate
from .errors import ValidationError
from .models import METHODS, ApproximationPlan, EllipsoidCertificate, MatrixSet, VerificationReport

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Report:
    matrix_set: MatrixSet
    requested: str
    result: CombinedBounds

    @property
    def interval(self):
        return self.result.interval

    @property
    def certificate(self) -> Optional[dict[str, Any]]:
        outcome = self.result.outcome("ellipsoid")
        if outcome is None:
            return None
        return outcome.extra.get("certificate")

    def to_dict(self, *, include_timings: bool = True) -> dict[str, Any]:
        interval = self.result.interval
        return {
            "tool": {"name": "jsrbound", "version": __version__},
            "input": self.matrix_set.digest(),
            "requested": self.requested,
            "methods": [o.to_dict(include_timings=include_timings) for o in self.result.outcomes],
            "combined": interval.to_dict() if interval is not None else None,
            "stability": self.result.stability,
        }

    def to_json(self, *, include_timings: bool = True) -> str:
        return json.dumps(self.to_dict(include_timings=include_timings), indent=2, sort_keys=True)


class Manager:
    """
    Entry point shared by the CLI and library callers: picks methods and
    parameters from the configured budget and wraps results in a Report.
    """

    def __init__(
        self,
        config: Optional[AppConfig] = None,
        backend: Optional[FeasibilityBackend] = None,
    ) -> None:
        self._config = config or load_config()
        self._backend = backend

    @property
    def config(self) -> AppConfig:
        return self._config

    def bound(
        self,
        matrix_set: MatrixSet,
        method: str = "all",
        *,
        k: Optional[int] = None,
        l: Optional[int] = None,
        depth: Optional[int] = None,
    ) -> Report:
        """
        Bounds from one method, or from every method when method == "all".
        Explicit parameters override the budget-derived defaults.
        """
        if method != "all" and method not in METHODS:
            raise ValidationError(f"Unknown method {method!r}; expected 'all' or one of {', '.join(METHODS)}.")
        methods = list(METHODS) if method == "all" else [method]

        params: dict[str, Optional[int]] = {"k": k, "bruteforce_k": k, "l": l, "kron_lift_l": l, "depth": depth}
        logger.info(f"Bounding {matrix_set.name or 'matrix set'} (m={matrix_set.m}, n={matrix_set.n}) with {method}.")
        result = best_bounds(
            matrix_set,
            budget=self._config.budget,
            tolerances=self._config.tolerances,
            ellipsoid=self._config.ellipsoid,
            methods=methods,
            params=params,
            backend=self._backend,
        )
        for outcome in result.outcomes:
            if outcome.reason is not None:
                logger.info(f"{outcome.method} skipped ({outcome.reason}): {outcome.message}")
        return Report(matrix_set=matrix_set, requested=method, result=result)

    def plan(self, m: int, n: int, epsilon: float, *, cone_available: bool = True) -> ApproximationPlan:
        return plan_accuracy(
            m,
            n,
            epsilon,
            cone_available=cone_available,
            capacity=self._config.budget.operator_capacity,
        )

    def verify(self, matrix_set: MatrixSet, certificate: EllipsoidCertificate) -> VerificationReport:
        report = verify_certificate(matrix_set, certificate, tolerances=self._config.tolerances)
        if report.valid:
            logger.info(f"Certificate valid: rho <= {certificate.tau ** 0.5!r} (slack {report.slack!r}).")
        else:
            logger.warning(f"Certificate rejected: {report.message}")
        return report

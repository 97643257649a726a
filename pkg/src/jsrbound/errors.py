from __future__ import annotations


class JsrError(Exception):
    """Root of every error raised by jsrbound."""

    reason = "error"


class DimensionError(JsrError, ValueError):
    reason = "invalid"


class SymmetryError(JsrError, ValueError):
    reason = "invalid"


class ValidationError(JsrError, ValueError):
    reason = "invalid"


class HypothesisError(JsrError):
    """An upper bound needs a common invariant proper cone that was neither detected nor asserted."""

    reason = "hypothesis_unmet"


class CapacityError(JsrError):
    reason = "capacity"


class ConvergenceError(JsrError):
    reason = "not_converged"


def reason_code(exc: BaseException) -> str:
    return getattr(exc, "reason", "error")

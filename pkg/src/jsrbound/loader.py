from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Any, Optional

import numpy as np

from .errors import DimensionError, ValidationError
from .models import EllipsoidCertificate, MatrixSet

logger = logging.getLogger(__name__)


def _read_json(path: Path) -> Any:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ValidationError(f"File not found: {path}")
    except OSError as e:
        raise ValidationError(f"Cannot read {path}: {e.strerror or e}")
    except UnicodeDecodeError:
        raise ValidationError(f"{path} is not UTF-8 text.")
    except json.JSONDecodeError as e:
        raise ValidationError(f"{path} is not valid JSON: {e}")


def _matrix(raw: Any, what: str) -> np.ndarray:
    if not isinstance(raw, list) or not all(isinstance(row, list) for row in raw):
        raise ValidationError(f"{what} must be a list of rows.")
    widths = {len(row) for row in raw}
    if len(widths) > 1:
        raise DimensionError(f"{what} has rows of different lengths.")
    try:
        return np.asarray(raw, dtype=float)
    except (TypeError, ValueError):
        raise ValidationError(f"{what} must contain numbers only.")


def matrix_set_from_dict(data: Any, *, cone_asserted: bool = False) -> MatrixSet:
    """
    {"name": optional str, "assert_cone": optional bool, "matrices": [[[...], ...], ...]}.
    A cone asserted on the command line wins over the file.
    """
    if not isinstance(data, dict):
        raise ValidationError("Matrix set root must be a JSON object.")
    raw = data.get("matrices")
    if not isinstance(raw, list) or not raw:
        raise ValidationError("'matrices' must be a non-empty list of square matrices.")
    name = data.get("name")
    if name is not None and not isinstance(name, str):
        raise ValidationError("'name' must be a string.")
    asserted = data.get("assert_cone", False)
    if not isinstance(asserted, bool):
        raise ValidationError("'assert_cone' must be true or false.")

    mats = [_matrix(a, f"Matrix {i}") for i, a in enumerate(raw, start=1)]
    return MatrixSet.of(mats, cone_asserted=cone_asserted or asserted, name=name)


def load_matrix_set(path: Path, *, cone_asserted: bool = False) -> MatrixSet:
    matrix_set = matrix_set_from_dict(_read_json(path), cone_asserted=cone_asserted)
    if matrix_set.name is None:
        matrix_set = MatrixSet(
            matrices=matrix_set.matrices,
            nonnegative=matrix_set.nonnegative,
            cone_asserted=matrix_set.cone_asserted,
            name=Path(path).stem,
        )
    logger.debug(f"Loaded {matrix_set.m} matrices of size {matrix_set.n} from {path}")
    return matrix_set


def certificate_from_dict(data: Any, n: Optional[int] = None) -> EllipsoidCertificate:
    if not isinstance(data, dict):
        raise ValidationError("Certificate root must be a JSON object.")
    if "X" not in data or "tau" not in data:
        raise ValidationError("A certificate needs both 'X' and 'tau'.")
    X = _matrix(data["X"], "Certificate X")
    if X.ndim != 2 or X.shape[0] != X.shape[1]:
        raise DimensionError(f"Certificate X must be square, got shape {X.shape}.")
    if n is not None and X.shape != (n, n):
        raise DimensionError(f"Certificate X has shape {X.shape}, the matrix set needs {(n, n)}.")
    tau = data["tau"]
    if isinstance(tau, bool) or not isinstance(tau, (int, float)):
        raise ValidationError("'tau' must be a number.")
    return EllipsoidCertificate(X=X, tau=float(tau), slack=float(data.get("slack", 0.0)))


def load_certificate(path: Path, n: Optional[int] = None) -> EllipsoidCertificate:
    data = _read_json(path)
    # A full report carries the certificate under its ellipsoid result.
    if isinstance(data, dict) and "X" not in data and "certificate" in data:
        data = data["certificate"]
    return certificate_from_dict(data, n)

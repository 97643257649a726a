from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Literal, Optional

BackendName = Literal["subgradient", "cvxpy"]


def _default_config_path() -> Path:
    """
    Default to a per-user config location so budgets and tolerances survive
    between runs without living next to the input files.
    """
    override = os.environ.get("JSRBOUND_CONFIG_PATH")
    if override:
        return Path(override).expanduser()

    return Path.home() / ".config" / "jsrbound" / "config.json"


def _positive_int(d: dict[str, Any], key: str, default: int) -> int:
    value = d.get(key, default)
    if isinstance(value, bool) or not isinstance(value, int) or value < 1:
        raise ValueError(f"Config '{key}' must be a positive integer, got {value!r}.")
    return value


def _positive_float(d: dict[str, Any], key: str, default: float) -> float:
    value = d.get(key, default)
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not value > 0:
        raise ValueError(f"Config '{key}' must be a positive number, got {value!r}.")
    return float(value)


@dataclass(frozen=True)
class Budget:
    """
    Capacity limits. Every lifted construction checks its size against these
    before allocating anything.
      - dense_capacity: largest side of a materialized matrix
      - operator_capacity: largest vector length of a matrix-free operator
      - dense_eig_limit: above this side, cone operators go through power iteration
    """
    dense_capacity: int = 4096
    operator_capacity: int = 2_000_000
    dense_eig_limit: int = 64
    enumeration_budget: int = 2**20
    max_kron_k: int = 8
    max_lift_l: int = 3
    max_depth: int = 3
    max_bruteforce_k: int = 10

    def to_dict(self) -> dict[str, Any]:
        return {
            "dense_capacity": self.dense_capacity,
            "operator_capacity": self.operator_capacity,
            "dense_eig_limit": self.dense_eig_limit,
            "enumeration_budget": self.enumeration_budget,
            "max_kron_k": self.max_kron_k,
            "max_lift_l": self.max_lift_l,
            "max_depth": self.max_depth,
            "max_bruteforce_k": self.max_bruteforce_k,
        }

    @staticmethod
    def from_dict(d: dict[str, Any]) -> "Budget":
        base = Budget()
        return Budget(
            dense_capacity=_positive_int(d, "dense_capacity", base.dense_capacity),
            operator_capacity=_positive_int(d, "operator_capacity", base.operator_capacity),
            dense_eig_limit=_positive_int(d, "dense_eig_limit", base.dense_eig_limit),
            enumeration_budget=_positive_int(d, "enumeration_budget", base.enumeration_budget),
            max_kron_k=_positive_int(d, "max_kron_k", base.max_kron_k),
            max_lift_l=_positive_int(d, "max_lift_l", base.max_lift_l),
            max_depth=_positive_int(d, "max_depth", base.max_depth),
            max_bruteforce_k=_positive_int(d, "max_bruteforce_k", base.max_bruteforce_k),
        )


@dataclass(frozen=True)
class Tolerances:
    power_tol: float = 1e-10
    power_max_iter_factor: int = 100
    pd_floor: float = 1e-9
    psd_tol: float = 1e-9
    symmetry_tol: float = 1e-12
    weight_tol: float = 1e-12

    def to_dict(self) -> dict[str, Any]:
        return {
            "power_tol": self.power_tol,
            "power_max_iter_factor": self.power_max_iter_factor,
            "pd_floor": self.pd_floor,
            "psd_tol": self.psd_tol,
            "symmetry_tol": self.symmetry_tol,
            "weight_tol": self.weight_tol,
        }

    @staticmethod
    def from_dict(d: dict[str, Any]) -> "Tolerances":
        base = Tolerances()
        return Tolerances(
            power_tol=_positive_float(d, "power_tol", base.power_tol),
            power_max_iter_factor=_positive_int(d, "power_max_iter_factor", base.power_max_iter_factor),
            pd_floor=_positive_float(d, "pd_floor", base.pd_floor),
            psd_tol=_positive_float(d, "psd_tol", base.psd_tol),
            symmetry_tol=_positive_float(d, "symmetry_tol", base.symmetry_tol),
            weight_tol=_positive_float(d, "weight_tol", base.weight_tol),
        )


@dataclass(frozen=True)
class EllipsoidSettings:
    subgradient_steps: int = 500
    bisection_levels: int = 20
    tol: float = 1e-6
    backend: BackendName = "subgradient"

    def to_dict(self) -> dict[str, Any]:
        return {
            "subgradient_steps": self.subgradient_steps,
            "bisection_levels": self.bisection_levels,
            "tol": self.tol,
            "backend": self.backend,
        }

    @staticmethod
    def from_dict(d: dict[str, Any]) -> "EllipsoidSettings":
        base = EllipsoidSettings()
        backend = d.get("backend", base.backend)
        if backend not in ("subgradient", "cvxpy"):
            raise ValueError(f"Config 'backend' has invalid value: {backend!r}")
        return EllipsoidSettings(
            subgradient_steps=_positive_int(d, "subgradient_steps", base.subgradient_steps),
            bisection_levels=_positive_int(d, "bisection_levels", base.bisection_levels),
            tol=_positive_float(d, "tol", base.tol),
            backend=backend,
        )


@dataclass(frozen=True)
class AppConfig:
    budget: Budget = field(default_factory=Budget)
    tolerances: Tolerances = field(default_factory=Tolerances)
    ellipsoid: EllipsoidSettings = field(default_factory=EllipsoidSettings)

    def to_dict(self) -> dict[str, Any]:
        return {
            "budget": self.budget.to_dict(),
            "tolerances": self.tolerances.to_dict(),
            "ellipsoid": self.ellipsoid.to_dict(),
        }

    @staticmethod
    def from_dict(d: dict[str, Any]) -> "AppConfig":
        sections = {}
        for key in ("budget", "tolerances", "ellipsoid"):
            raw = d.get(key, {})
            if not isinstance(raw, dict):
                raise ValueError(f"Config '{key}' must be an object.")
            sections[key] = raw

        return AppConfig(
            budget=Budget.from_dict(sections["budget"]),
            tolerances=Tolerances.from_dict(sections["tolerances"]),
            ellipsoid=EllipsoidSettings.from_dict(sections["ellipsoid"]),
        )


def load_config(path: Optional[Path] = None) -> AppConfig:
    p = path or _default_config_path()
    if not p.exists():
        return AppConfig()

    data = json.loads(p.read_text(encoding="utf-8"))
    if not isinstance(data, dict):
        raise ValueError("Config file root must be a JSON object.")
    return AppConfig.from_dict(data)


def save_config(cfg: AppConfig, path: Optional[Path] = None) -> Path:
    p = path or _default_config_path()
    p.parent.mkdir(parents=True, exist_ok=True)

    tmp = p.with_suffix(".json.tmp")
    tmp.write_text(json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    tmp.replace(p)
    return p

from __future__ import annotations

import json
from dataclasses import replace
from pathlib import Path

import pytest

from jsrbound.config import AppConfig, Budget, EllipsoidSettings, load_config, save_config


def test_load_config_returns_default_when_missing(tmp_path: Path, monkeypatch: pytest.MonkeyPatch):
    cfg_path = tmp_path / "config.json"
    monkeypatch.setenv("JSRBOUND_CONFIG_PATH", str(cfg_path))

    cfg = load_config()
    assert isinstance(cfg, AppConfig)
    assert cfg.budget.operator_capacity == 2_000_000
    assert cfg.budget.dense_capacity == 4096
    assert cfg.tolerances.power_tol == 1e-10
    assert cfg.ellipsoid.backend == "subgradient"


def test_save_and_load_round_trip(tmp_path: Path, monkeypatch: pytest.MonkeyPatch):
    cfg_path = tmp_path / "config.json"
    monkeypatch.setenv("JSRBOUND_CONFIG_PATH", str(cfg_path))

    cfg_in = AppConfig(
        budget=Budget(operator_capacity=50_000, max_kron_k=5),
        ellipsoid=EllipsoidSettings(bisection_levels=7, backend="cvxpy"),
    )
    cfg_in = replace(cfg_in, tolerances=replace(cfg_in.tolerances, psd_tol=1e-7))

    saved_path = save_config(cfg_in)
    assert saved_path.exists()
    assert not saved_path.with_suffix(".json.tmp").exists()

    cfg_out = load_config()
    assert cfg_out == cfg_in


def test_partial_config_keeps_defaults(tmp_path: Path):
    cfg_path = tmp_path / "config.json"
    cfg_path.write_text(json.dumps({"budget": {"max_depth": 4}}), encoding="utf-8")

    cfg = load_config(cfg_path)
    assert cfg.budget.max_depth == 4
    assert cfg.budget.max_lift_l == 3
    assert cfg.ellipsoid == EllipsoidSettings()


def test_load_config_rejects_invalid_backend(tmp_path: Path, monkeypatch: pytest.MonkeyPatch):
    cfg_path = tmp_path / "config.json"
    monkeypatch.setenv("JSRBOUND_CONFIG_PATH", str(cfg_path))
    cfg_path.write_text(json.dumps({"ellipsoid": {"backend": "mosek-direct"}}), encoding="utf-8")

    with pytest.raises(ValueError) as e:
        load_config()
    assert "backend" in str(e.value).lower()


def test_load_config_rejects_non_positive_capacity(tmp_path: Path):
    cfg_path = tmp_path / "config.json"
    cfg_path.write_text(json.dumps({"budget": {"operator_capacity": 0}}), encoding="utf-8")

    with pytest.raises(ValueError) as e:
        load_config(cfg_path)
    assert "operator_capacity" in str(e.value)


def test_load_config_rejects_non_object_section(tmp_path: Path):
    cfg_path = tmp_path / "config.json"
    cfg_path.write_text(json.dumps({"tolerances": [1, 2]}), encoding="utf-8")

    with pytest.raises(ValueError):
        load_config(cfg_path)

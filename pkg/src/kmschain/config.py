"""Experiment configuration: nested TOML tables validated against built-in defaults.

Every key a user may set appears in ``DEFAULTS``; unknown keys and values of
the wrong type raise ``ConfigInvalid``.  Integers are accepted where floats
are expected and stored as floats, so a loaded config serializes back to the
same normalized document.
"""
from __future__ import annotations

import copy
import hashlib
import sys
from pathlib import Path
from typing import Any, Mapping

import tomli_w

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

from .basis import GaussianBump, PotentialSpec
from .chain import DEFAULT_MAX_DIM, ChainSpec
from .errors import ConfigInvalid

__all__ = ["DEFAULTS", "SECTIONS", "ExperimentConfig", "load_config", "default_config"]

_BUMP_KEYS = ("amplitude", "center", "width")

DEFAULTS: dict[str, Any] = {
    "seed": 0,
    "out": "",
    "chain": {
        "omega": 1.0,
        "beta": 0.5,
        "max_dim": DEFAULT_MAX_DIM,
        "V": [{"amplitude": 0.5, "center": 0.0, "width": 1.0}],
        "phi": [{"amplitude": 0.3, "center": 0.0, "width": 1.0}],
    },
    "spectrum": {"L": 1, "site_dim": 8, "levels": 16, "tol": 1e-10},
    "gibbs": {"L": 1, "L_big": 2, "site_dim": 6, "samples": 20, "tol": 1e-10},
    "sandwich": {"L": 1, "L_big": 2, "site_dim": 8, "multipliers": 5},
    "kernel": {
        "dim": 60,
        "x_min": -6.0,
        "x_max": 6.0,
        "points": 256,
        "betas": [0.25, 0.5, 1.0, 2.0],
        "mehler_tol": 1e-8,
        "trotter_beta": 1.0,
        "trotter_V": [{"amplitude": 0.5, "center": 0.0, "width": 1.0}],
        "trotter_steps": [8, 16, 32, 64],
        "trotter_x_min": -8.0,
        "trotter_x_max": 8.0,
        "trotter_points": 256,
        "order_min": 0.8,
        "order_max": 1.2,
        "shift_t": [0.05, 0.1, 0.2],
        "shift_steps": 64,
    },
    "lr": {
        "L": 2,
        "site_dim": 6,
        "q_site": 0,
        "r_site": 2,
        "lam": 1.0,
        "t_max": 1.0,
        "points": 41,
        "drift_t": [0.25, 0.5, 0.75, 1.0],
        "drift_increment": 2,
        "drift_factor": 10.0,
        "control_tol": 1e-10,
    },
    "dyson": {
        "site_dim": 2,
        "orders": [1, 2, 3, 4, 5, 6],
        "times": [0.25, 0.5, 1.0],
        "nodes": 32,
        "quad_budget": 1e-6,
    },
    "kms": {
        "L": 1,
        "site_dim": 16,
        "betas": [0.5, 1.0],
        "pairs": 10,
        "t_max": 2.0,
        "points": 41,
        "boundary_tol": 1e-9,
        "invariance_tol": 1e-10,
    },
    "regularity": {
        "volumes": [1, 2],
        "site_dim": 8,
        "t_max": 0.2,
        "points": 41,
        "deltas": [0.025, 0.05, 0.1, 0.2],
        "Q": [{"amplitude": 1.0, "center": 0.0, "width": 1.0}],
    },
    "entropy": {
        "L": 1,
        "L_big": 2,
        "site_dim": 6,
        "pb_trials": 50,
        "pb_dim": 16,
        "monotonicity_trials": 50,
        "monotonicity_site_dim": 3,
    },
    "resolvent": {
        "dims": [8, 16, 32],
        "samples": 8,
        "exact_tol": 1e-12,
    },
}

SECTIONS = tuple(k for k, v in DEFAULTS.items() if isinstance(v, dict) and k != "chain")


def _is_bump_list(value) -> bool:
    return isinstance(value, list) and all(isinstance(v, dict) for v in value)


def _normalize(default, value, path: str):
    if isinstance(default, dict):
        if not isinstance(value, Mapping):
            raise ConfigInvalid(f"{path} must be a table")
        unknown = set(value) - set(default)
        if unknown:
            raise ConfigInvalid(f"unknown keys in {path or 'top level'}: {sorted(unknown)}")
        return {k: _normalize(d, value.get(k, d), f"{path}.{k}".lstrip(".")) for k, d in default.items()}
    if _is_bump_list(default):
        if not isinstance(value, list):
            raise ConfigInvalid(f"{path} must be a list of bump tables")
        out = []
        for i, item in enumerate(value):
            if not isinstance(item, Mapping) or not set(item) <= set(_BUMP_KEYS) or "amplitude" not in item:
                raise ConfigInvalid(f"{path}[{i}] needs amplitude and optional center, width")
            item = {"center": 0.0, "width": 1.0, **item}
            bump = {k: _normalize(1.0, item[k], f"{path}[{i}].{k}") for k in _BUMP_KEYS}
            try:
                GaussianBump(**bump)
            except ValueError as exc:
                raise ConfigInvalid(f"{path}[{i}]: {exc}") from None
            out.append(bump)
        return out
    if isinstance(default, list):
        if not isinstance(value, list) or not value:
            raise ConfigInvalid(f"{path} must be a nonempty list")
        return [_normalize(default[0], v, f"{path}[{i}]") for i, v in enumerate(value)]
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigInvalid(f"{path} must be a boolean")
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigInvalid(f"{path} must be an integer")
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigInvalid(f"{path} must be a number")
        return float(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigInvalid(f"{path} must be a string")
        return value
    raise ConfigInvalid(f"unsupported value at {path}")  # pragma: no cover


def potential(terms: list[dict]) -> PotentialSpec:
    return PotentialSpec(tuple(GaussianBump(**t) for t in terms))


class ExperimentConfig:
    """Validated experiment configuration.

    ``out`` is excluded from the digest so that runs written to different
    directories carry the same provenance tag.
    """

    def __init__(self, data: Mapping[str, Any] | None = None):
        self._data = _normalize(DEFAULTS, dict(data or {}), "")

    def __getitem__(self, key: str):
        return copy.deepcopy(self._data[key])

    def __eq__(self, other) -> bool:
        return isinstance(other, ExperimentConfig) and self._data == other._data

    def __repr__(self) -> str:
        return f"ExperimentConfig(digest={self.digest[:12]})"

    @property
    def seed(self) -> int:
        return self._data["seed"]

    @property
    def out(self) -> str:
        return self._data["out"]

    def as_dict(self) -> dict[str, Any]:
        return copy.deepcopy(self._data)

    def replace(self, **changes) -> "ExperimentConfig":
        """Copy with top-level keys or ``section__key`` entries replaced."""
        data = self.as_dict()
        for key, value in changes.items():
            if "__" in key:
                sec, sub = key.split("__", 1)
                if sec not in data or not isinstance(data[sec], dict):
                    raise ConfigInvalid(f"unknown section {sec}")
                data[sec][sub] = value
            else:
                data[key] = value
        return ExperimentConfig(data)

    def to_toml(self) -> str:
        return tomli_w.dumps(self._data)

    @classmethod
    def from_toml(cls, text: str) -> "ExperimentConfig":
        try:
            data = tomllib.loads(text)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigInvalid(f"malformed TOML: {exc}") from None
        return cls(data)

    @property
    def digest(self) -> str:
        data = self.as_dict()
        data["out"] = ""
        return hashlib.sha256(tomli_w.dumps(data).encode()).hexdigest()

    def chain(self, section: str, **overrides) -> ChainSpec:
        """ChainSpec from the shared [chain] table plus the section's L and site_dim."""
        base = self._data["chain"]
        sec = self._data[section]
        params = dict(
            L=sec.get("L", 1),
            site_dim=sec["site_dim"],
            omega=base["omega"],
            V=potential(base["V"]),
            phi=potential(base["phi"]),
            beta=base["beta"],
            max_dim=base["max_dim"],
        )
        params.update(overrides)
        try:
            return ChainSpec(**params)
        except ValueError as exc:
            if isinstance(exc, ConfigInvalid):
                raise
            raise ConfigInvalid(str(exc)) from None


def default_config() -> ExperimentConfig:
    return ExperimentConfig()


def load_config(path: str | Path | None) -> ExperimentConfig:
    if path is None:
        return default_config()
    p = Path(path)
    if not p.is_file():
        raise ConfigInvalid(f"config file {p} does not exist")
    return ExperimentConfig.from_toml(p.read_text())

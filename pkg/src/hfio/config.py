"""Run configuration: a single strict JSON document.

Unknown keys are rejected anywhere in the document, every value is
type-checked before any computation starts, and the canonical hash of
the parsed config is embedded in every emitted report so outputs are
traceable to their inputs.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ._jsonutil import canonical_dumps
from .core import Grid, make_grid
from .errors import InvalidArgumentError
from .oscillatory import CutoffSpec, IBPSpec
from .phase import PhaseSpec, QuadraticPhase
from .presets import AMPLITUDE_PRESETS, PHASE_PRESETS, amplitude_preset, \
    phase_preset
from .symbols import AmplitudeSpec


class ConfigError(InvalidArgumentError):
    """Malformed run configuration (CLI exit code 2)."""


def _require_keys(d: dict, allowed: set, context: str):
    unknown = set(d) - allowed
    if unknown:
        raise ConfigError(f"unknown keys in {context}: {sorted(unknown)}")


def _number(v, context: str) -> float:
    if not isinstance(v, (int, float)) or isinstance(v, bool):
        raise ConfigError(f"{context} must be a number, got {v!r}")
    return float(v)


@dataclass(frozen=True)
class RunConfig:
    phase: PhaseSpec
    amplitude: AmplitudeSpec
    h_list: tuple
    grid: Grid
    source_grid: Optional[Grid]
    theta_grid: Optional[Grid]
    cutoff: Optional[CutoffSpec]
    ibp: Optional[IBPSpec]
    cv_k: Optional[int]
    cv_gamma: Optional[float]
    seed: int
    out_dir: str
    raw: dict = field(repr=False)

    @property
    def sha256(self) -> str:
        return hashlib.sha256(
            canonical_dumps(self.raw).encode()).hexdigest()[:16]

    def stamp(self) -> dict:
        """Provenance fields embedded in every emitted report."""
        return {"config_sha256": self.sha256, "seed": self.seed}


def _parse_phase(node, context="phase") -> PhaseSpec:
    if not isinstance(node, dict):
        raise ConfigError(f"{context} must be an object")
    if "quadratic" in node:
        _require_keys(node, {"quadratic"}, context)
        q = node["quadratic"]
        _require_keys(q, {"A", "B", "C"}, f"{context}.quadratic")
        try:
            qp = QuadraticPhase(np.asarray(q.get("A"), float),
                                np.asarray(q.get("B"), float),
                                np.asarray(q.get("C"), float))
        except Exception as exc:
            raise ConfigError(f"bad quadratic phase: {exc}") from exc
        return qp.to_phase_spec("quadratic")
    _require_keys(node, {"preset", "dim", "factor"}, context)
    name = node.get("preset")
    if name not in PHASE_PRESETS:
        raise ConfigError(f"{context}.preset must be one of {PHASE_PRESETS}")
    dim = int(node.get("dim", 1))
    kwargs = {}
    if "factor" in node:
        kwargs["factor"] = _number(node["factor"], f"{context}.factor")
    return phase_preset(name, dim, **kwargs)


def _parse_amplitude(node, context="amplitude") -> AmplitudeSpec:
    if not isinstance(node, dict):
        raise ConfigError(f"{context} must be an object")
    _require_keys(node, {"preset", "dim", "m"}, context)
    name = node.get("preset")
    if name not in AMPLITUDE_PRESETS:
        raise ConfigError(
            f"{context}.preset must be one of {AMPLITUDE_PRESETS}")
    dim = int(node.get("dim", 1))
    m = _number(node.get("m", -1.0), f"{context}.m")
    return amplitude_preset(name, dim, m=m)


def _parse_grid(node, context) -> Grid:
    _require_keys(node, {"dim", "half_width", "points"}, context)
    try:
        return make_grid(int(node.get("dim", 1)),
                         _number(node.get("half_width"), context),
                         int(node.get("points")))
    except (TypeError, InvalidArgumentError) as exc:
        raise ConfigError(f"bad {context}: {exc}") from exc


_TOL_KEYS = {"cutoff_shape", "sigma0", "k_max", "cutoff_tol",
             "ibp_enabled", "ibp_q", "ibp_c_ns"}
_TOP_KEYS = {"phase", "amplitude", "h_list", "grid", "source_grid",
             "theta_grid", "tolerances", "cv", "seed", "out_dir"}


def parse_config(doc: dict) -> RunConfig:
    if not isinstance(doc, dict):
        raise ConfigError("config root must be a JSON object")
    _require_keys(doc, _TOP_KEYS, "config")
    for key in ("phase", "amplitude", "h_list", "grid"):
        if key not in doc:
            raise ConfigError(f"config missing required key {key!r}")
    phase = _parse_phase(doc["phase"])
    amplitude = _parse_amplitude(doc["amplitude"])
    if phase.dim != amplitude.dim:
        raise ConfigError("phase and amplitude dims differ")
    hs = doc["h_list"]
    if not isinstance(hs, list) or not hs:
        raise ConfigError("h_list must be a non-empty list")
    h_list = tuple(_number(v, "h_list entry") for v in hs)
    if any(h <= 0 for h in h_list):
        raise ConfigError("h_list entries must be positive")
    grid = _parse_grid(doc["grid"], "grid")
    source = _parse_grid(doc["source_grid"], "source_grid") \
        if "source_grid" in doc else None
    theta = _parse_grid(doc["theta_grid"], "theta_grid") \
        if "theta_grid" in doc else None

    cutoff = ibp = None
    if "tolerances" in doc:
        t = doc["tolerances"]
        _require_keys(t, _TOL_KEYS, "tolerances")
        base = CutoffSpec()
        try:
            cutoff = CutoffSpec(
                shape=t.get("cutoff_shape", base.shape),
                sigma0=_number(t.get("sigma0", base.sigma0), "sigma0"),
                k_max=int(t.get("k_max", base.k_max)),
                tol=_number(t.get("cutoff_tol", base.tol), "cutoff_tol"))
            if any(k in t for k in ("ibp_enabled", "ibp_q", "ibp_c_ns")):
                ibp = IBPSpec(enabled=bool(t.get("ibp_enabled", False)),
                              q=int(t.get("ibp_q", 2)),
                              c_ns=_number(t.get("ibp_c_ns", 0.05),
                                           "ibp_c_ns"))
        except InvalidArgumentError as exc:
            raise ConfigError(str(exc)) from exc

    cv_k = cv_gamma = None
    if "cv" in doc:
        _require_keys(doc["cv"], {"k", "gamma"}, "cv")
        if "k" in doc["cv"]:
            cv_k = int(doc["cv"]["k"])
        if "gamma" in doc["cv"]:
            cv_gamma = _number(doc["cv"]["gamma"], "cv.gamma")

    seed = doc.get("seed", 1234)
    if not isinstance(seed, int) or isinstance(seed, bool):
        raise ConfigError("seed must be an integer")
    out_dir = doc.get("out_dir", "hfio-out")
    if not isinstance(out_dir, str):
        raise ConfigError("out_dir must be a string")
    return RunConfig(phase=phase, amplitude=amplitude, h_list=h_list,
                     grid=grid, source_grid=source, theta_grid=theta,
                     cutoff=cutoff, ibp=ibp, cv_k=cv_k, cv_gamma=cv_gamma,
                     seed=seed, out_dir=out_dir, raw=doc)


def load_config(path: str) -> RunConfig:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    return parse_config(doc)

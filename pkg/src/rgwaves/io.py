"""JSON configuration ingestion, run manifests and small output helpers.

Config schema (documented in docs/config.md)::

    {"params":  {"g_perp": .., "g_parallel": .., "c_f": .., "c_t": ..},
     "grid":    {"x_lo": .., "x_hi": .., "n_cells": .., "bc": "outflow" | "periodic"},
     "initial": {"type": .., ...},
     "time":    {"t_end": .., "cfl": 0.45, "snapshots": [..], "riemann_solver": "hll"}}

Validation errors carry the dotted field path and, when the config came from
a file, the line on which that field appears.
"""

from __future__ import annotations

import json
import os
import platform
import re
import tempfile
from dataclasses import dataclass, field
from importlib import metadata

import numpy as np

from .errors import ConfigError
from .initial import shape_function, initial_condition
from .model import PhysParams
from .profiles import (ProfileSpec, WaveProfile, connect_endstates, constant_profile,
                       construct_from_delta, construct_periodic, construct_single_jump,
                       kappa_for, make_grid, read_profile_csv)
from .solver import Grid1D, SimConfig

SECTIONS = ("params", "grid", "initial", "time")
PARAM_KEYS = ("g_perp", "g_parallel", "c_f", "c_t")


def code_version():
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        from . import __version__
        return __version__


def locate_field(text, path):
    """1-based line of the last key of a dotted path in JSON text, or None.

    Keys are matched in order of appearance, each after the previous one, so
    the result is the first occurrence consistent with the nesting.
    """
    if text is None or not path:
        return None
    pos = 0
    line = None
    for part in re.sub(r"\[\d+\]", "", path).split("."):
        m = re.compile(r'"%s"\s*:' % re.escape(part)).search(text, pos)
        if m is None:
            break
        pos = m.end()
        line = text.count("\n", 0, m.start()) + 1
    return line


def _number(section, key, where, *, positive=False, integer=False, default=None):
    if key not in section:
        if default is not None:
            return default
        raise ConfigError(f"missing key '{key}'", f"{where}.{key}")
    v = section[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"'{key}' must be a number, got {v!r}", f"{where}.{key}")
    if integer and int(v) != v:
        raise ConfigError(f"'{key}' must be an integer", f"{where}.{key}")
    if not np.isfinite(v) or (positive and v <= 0):
        raise ConfigError(f"'{key}' must be {'positive' if positive else 'finite'}",
                          f"{where}.{key}")
    return int(v) if integer else float(v)


def params_from_dict(d, where="params"):
    if not isinstance(d, dict):
        raise ConfigError("params must be an object", where)
    unknown = sorted(set(d) - set(PARAM_KEYS))
    if unknown:
        raise ConfigError(f"unknown key '{unknown[0]}'", f"{where}.{unknown[0]}")
    vals = {k: _number(d, k, where, default=0.0 if k == "c_t" else None) for k in PARAM_KEYS}
    try:
        return PhysParams(**vals)
    except ValueError as exc:
        raise ConfigError(str(exc), where) from None


def grid_from_dict(d, overrides=None):
    if not isinstance(d, dict):
        raise ConfigError("grid must be an object", "grid")
    n = _number(d, "n_cells", "grid", positive=True, integer=True)
    if overrides and overrides.get("cells"):
        n = int(overrides["cells"])
    return Grid1D(_number(d, "x_lo", "grid"), _number(d, "x_hi", "grid"), n,
                  d.get("bc", "outflow"))


def config_from_dict(cfg, *, overrides=None, seed_check=True) -> SimConfig:
    """Validated SimConfig from a parsed config dictionary.

    overrides may set 'cells' and 'cfl' (command-line flags win over the file).
    """
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object", "")
    for key in SECTIONS:
        if key not in cfg:
            raise ConfigError(f"missing section '{key}'", key)
    unknown = sorted(set(cfg) - set(SECTIONS) - {"name", "description"})
    if unknown:
        raise ConfigError(f"unknown section '{unknown[0]}'", unknown[0])
    overrides = overrides or {}
    p = params_from_dict(cfg["params"])
    grid = grid_from_dict(cfg["grid"], overrides)
    tm = cfg["time"]
    if not isinstance(tm, dict):
        raise ConfigError("time must be an object", "time")
    t_end = _number(tm, "t_end", "time")
    cfl = _number(tm, "cfl", "time", positive=True, default=0.45)
    if overrides.get("cfl"):
        cfl = float(overrides["cfl"])
    snaps = tm.get("snapshots", [t_end])
    if not isinstance(snaps, list) or not all(
            isinstance(s, (int, float)) and not isinstance(s, bool) for s in snaps):
        raise ConfigError("snapshots must be a list of numbers", "time.snapshots")
    init = cfg["initial"]
    if not isinstance(init, dict):
        raise ConfigError("initial must be an object", "initial")
    return SimConfig(p, grid, initial_condition(init, p, seed_check=seed_check), t_end,
                     [float(s) for s in snaps], cfl=cfl,
                     riemann_solver=tm.get("riemann_solver", "hll"), initial_spec=init)


def load_config(path, *, overrides=None, seed_check=True):
    """Parse a JSON config file; errors name the field and its line."""
    with open(path) as fh:
        text = fh.read()
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc.msg}", None, exc.lineno) from None
    try:
        return cfg, config_from_dict(cfg, overrides=overrides, seed_check=seed_check)
    except ConfigError as exc:
        if exc.line is None and exc.field:
            msg = str(exc).rsplit(" (", 1)[0]
            raise ConfigError(msg, exc.field, locate_field(text, exc.field)) from None
        raise


def config_to_dict(config: SimConfig):
    g = config.grid
    return {
        "params": config.params.to_dict(),
        "grid": g.to_dict(),
        "initial": config.initial_spec,
        "time": {"t_end": config.t_end, "cfl": config.cfl,
                 "snapshots": list(config.snapshots),
                 "riemann_solver": config.riemann_solver},
    }


PROFILE_KINDS = ("delta", "periodic", "single_jump", "connect", "constant", "csv")


def profile_from_dict(d, p: PhysParams, where="profile") -> WaveProfile:
    """Build a WaveProfile from a tagged spec (see docs/config.md)."""
    if not isinstance(d, dict):
        raise ConfigError("profile must be an object", where)
    kind = d.get("kind")
    if kind not in PROFILE_KINDS:
        raise ConfigError(f"unknown profile kind {kind!r}; expected one of {PROFILE_KINDS}",
                          f"{where}.kind")
    h0 = _number(d, "h0", where, positive=True, default=1.0)
    c = float(p.equilibrium_velocity(h0))
    dx = _number(d, "dx", where, positive=True, default=0.01)
    if kind == "constant":
        return constant_profile(h0, _number(d, "phi0", where, positive=True), p,
                                _number(d, "x_lo", where, default=-10.0),
                                _number(d, "x_hi", where, default=10.0), dx)
    if kind == "single_jump":
        return construct_single_jump(
            h0, c, _number(d, "phi_left", where, positive=True),
            _number(d, "phi_right", where, positive=True),
            _number(d, "x_jump", where, default=0.0), p,
            domain=(d.get("x_lo"), d.get("x_hi")), dx=dx)
    if kind == "connect":
        return connect_endstates(
            h0, _number(d, "phi_minus", where, positive=True),
            _number(d, "phi_plus", where, positive=True), p,
            center=_number(d, "center", where, default=0.0),
            width=_number(d, "width", where, positive=True) if "width" in d else None,
            x_lo=d.get("x_lo"), x_hi=d.get("x_hi"), dx=dx)
    if kind == "csv":
        if "path" not in d:
            raise ConfigError("missing key 'path'", f"{where}.path")
        x, h, phi, jumps = read_profile_csv(d["path"])
        return WaveProfile(x=x, h=h, phi=phi, c=c, h0=h0, params=p,
                           phi_minus=float(phi[0]), phi_plus=float(phi[-1]))
    if "kappa" in d:
        kappa = _number(d, "kappa", where)
    else:
        kappa = kappa_for(h0, _number(d, "phi_minus", where, positive=True), p)
    if "delta" not in d:
        raise ConfigError("missing key 'delta'", f"{where}.delta")
    delta = shape_function(d["delta"], f"{where}.delta")
    if kind == "periodic":
        period = _number(d, "period", where, positive=True)
        x0 = _number(d, "x_lo", where, default=0.0)
        n = max(int(round(period / dx)), 8)
        x = np.linspace(x0, x0 + period, n + 1)
        return construct_periodic(ProfileSpec(h0=h0, c=c, kappa=kappa, x=x, delta=delta,
                                              period=period), p)
    x = make_grid(_number(d, "x_lo", where, default=-10.0),
                  _number(d, "x_hi", where, default=10.0), dx)
    return construct_from_delta(ProfileSpec(h0=h0, c=c, kappa=kappa, x=x, delta=delta), p)


# ---------------------------------------------------------------------------
# manifest
# ---------------------------------------------------------------------------

@dataclass
class CheckResult:
    name: str
    passed: bool
    value: object = None
    expected: str = ""
    detail: str = ""

    def to_dict(self):
        v = self.value
        if isinstance(v, (np.floating, np.integer)):
            v = v.item()
        return {"name": self.name, "passed": bool(self.passed), "value": v,
                "expected": self.expected, "detail": self.detail}


@dataclass
class RunManifest:
    config: dict
    wall_time: float
    files: list = field(default_factory=list)
    checks: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)
    version: str = field(default_factory=code_version)

    def to_dict(self):
        return {
            "version": self.version,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "config": self.config,
            "wall_time_s": self.wall_time,
            "files": sorted(self.files),
            "checks": [c.to_dict() for c in self.checks],
            **self.extra,
        }

    def write(self, out_dir, name="manifest.json"):
        """Write atomically (temp file + rename); the manifest lists itself."""
        if name not in self.files:
            self.files.append(name)
        write_json_atomic(os.path.join(out_dir, name), self.to_dict())


def _default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, complex):
        return [o.real, o.imag]
    raise TypeError(f"not JSON serialisable: {type(o).__name__}")


def write_json_atomic(path, data):
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=".json")
    try:
        with os.fdopen(fd, "w") as fh:
            json.dump(data, fh, indent=2, default=_default)
            fh.write("\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc.msg}", None, exc.lineno) from None


__all__ = ["CheckResult", "RunManifest", "config_from_dict", "config_to_dict",
           "load_config", "locate_field", "params_from_dict", "profile_from_dict",
           "write_json_atomic"]

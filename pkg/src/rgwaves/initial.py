"""Initial-condition builders: tagged JSON-like specs to conserved cell arrays.

Supported ``type`` tags:

- ``riemann_phi``: uniform equilibrium flow of height h with a phi step.
- ``piecewise``: each primitive field piecewise constant with its own breaks;
  ``U: "equilibrium"`` uses the uniform-flow velocity of the local height.
- ``perturbed_profile``: a convective wave built from a height deviation,
  with optional additive bumps.
- ``periodic_sine``: uniform equilibrium flow with phi = mean + amp sin(k x).
- ``sampled``: explicit arrays (or a CSV path) of x, h, U, Phi, phi.

Every spec may carry ``perturbations``: a list of
``{field, shape, ...shape arguments}`` added to the primitive fields.
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigError, NegativeEnstrophy, NonPositiveHeight
from .model import PhysParams, conserved_from_primitive
from .profiles import DELTA_SHAPES, ProfileSpec, construct_from_delta, kappa_for, make_grid

FIELDS = ("h", "U", "Phi", "phi")
TYPES = ("riemann_phi", "piecewise", "perturbed_profile", "periodic_sine", "sampled")


def _need(spec, key, where):
    if key not in spec:
        raise ConfigError(f"missing key '{key}'", f"{where}.{key}")
    return spec[key]


def shape_function(spec, where):
    name = _need(spec, "shape", where)
    if name not in DELTA_SHAPES:
        raise ConfigError(f"unknown shape '{name}'; expected one of {sorted(DELTA_SHAPES)}",
                          f"{where}.shape")
    kw = {k: float(v) for k, v in spec.items() if k not in ("shape", "field")}
    fn = DELTA_SHAPES[name]
    try:
        fn(np.zeros(1), **kw)
    except TypeError as exc:
        raise ConfigError(f"bad arguments for shape '{name}': {exc}", where) from None
    return lambda x: fn(x, **kw)


def _piecewise(x, field_spec, where):
    if isinstance(field_spec, (int, float)):
        return np.full_like(x, float(field_spec))
    breaks = list(map(float, _need(field_spec, "breaks", where)))
    values = list(map(float, _need(field_spec, "values", where)))
    if len(values) != len(breaks) + 1:
        raise ConfigError("need exactly one more value than breaks", f"{where}.values")
    if breaks != sorted(breaks):
        raise ConfigError("breaks must be sorted", f"{where}.breaks")
    # right-closed pieces: value k holds on (b_{k-1}, b_k]
    idx = np.searchsorted(np.asarray(breaks), x, side="left")
    return np.asarray(values)[idx]


def primitive_fields(spec: dict, x: np.ndarray, p: PhysParams):
    """(h, U, Phi, phi) at the points x for an initial-condition spec."""
    kind = _need(spec, "type", "initial")
    if kind not in TYPES:
        raise ConfigError(f"unknown initial type '{kind}'; expected one of {TYPES}",
                          "initial.type")
    x = np.asarray(x, dtype=float)
    if kind == "riemann_phi":
        h = np.full_like(x, float(_need(spec, "h", "initial")))
        x0 = float(_need(spec, "x0", "initial"))
        phi = np.where(x <= x0, float(_need(spec, "phi_left", "initial")),
                       float(_need(spec, "phi_right", "initial")))
        W = [h, p.equilibrium_velocity(h), np.full_like(x, float(spec.get("Phi", 0.0))), phi]
    elif kind == "piecewise":
        fields = _need(spec, "fields", "initial")
        h = _piecewise(x, _need(fields, "h", "initial.fields"), "initial.fields.h")
        u_spec = fields.get("U", "equilibrium")
        U = (p.equilibrium_velocity(h) if u_spec == "equilibrium"
             else _piecewise(x, u_spec, "initial.fields.U"))
        Phi = _piecewise(x, fields.get("Phi", 0.0), "initial.fields.Phi")
        phi = _piecewise(x, fields.get("phi", 0.0), "initial.fields.phi")
        W = [h, U, Phi, phi]
    elif kind == "perturbed_profile":
        prof = wave_profile_from_spec(_need(spec, "profile", "initial"), p, x)
        h, phi = prof.evaluate(x)
        W = [h, np.full_like(x, prof.c), np.zeros_like(x), phi]
    elif kind == "periodic_sine":
        h = np.full_like(x, float(spec.get("h", 1.0)))
        k = float(spec.get("wavenumber", np.pi))
        phi = (float(_need(spec, "mean", "initial"))
               + float(_need(spec, "amplitude", "initial")) * np.sin(k * x))
        W = [h, p.equilibrium_velocity(h), np.zeros_like(x), phi]
    else:
        W = _sampled(spec, x)
    W = [np.asarray(w, dtype=float).copy() for w in W]
    for i, pert in enumerate(spec.get("perturbations", [])):
        where = f"initial.perturbations[{i}]"
        name = _need(pert, "field", where)
        if name not in FIELDS:
            raise ConfigError(f"unknown field '{name}'", f"{where}.field")
        W[FIELDS.index(name)] += shape_function(pert, where)(x)
    return np.array(W)


def _sampled(spec, x):
    if "path" in spec:
        data = np.loadtxt(spec["path"], delimiter=",", skiprows=1, ndmin=2)
        xs, cols = data[:, 0], data[:, 1:5].T
    else:
        xs = np.asarray(_need(spec, "x", "initial"), dtype=float)
        cols = [np.asarray(_need(spec, f, "initial"), dtype=float) for f in FIELDS]
    return [np.interp(x, xs, c) for c in cols]


def wave_profile_from_spec(spec: dict, p: PhysParams, x=None):
    """Convective wave from {h0, phi_minus | kappa, delta: {shape, ...}, dx}."""
    h0 = float(spec.get("h0", 1.0))
    c = float(p.equilibrium_velocity(h0))
    if "kappa" in spec:
        kappa = float(spec["kappa"])
    else:
        kappa = kappa_for(h0, float(_need(spec, "phi_minus", "initial.profile")), p)
    delta = shape_function(_need(spec, "delta", "initial.profile"), "initial.profile.delta")
    dx = float(spec.get("dx", 0.005))
    if x is not None:
        lo, hi = float(np.min(x)) - 1.0, float(np.max(x)) + 1.0
    else:
        lo, hi = float(spec.get("x_lo", -10.0)), float(spec.get("x_hi", 10.0))
    grid = make_grid(lo, hi, dx)
    return construct_from_delta(ProfileSpec(h0=h0, c=c, kappa=kappa, x=grid, delta=delta), p)


def check_admissible(W, x=None):
    """Raise if the initial primitive fields are not admissible states."""
    h, U, Phi, phi = W
    where = (lambda i: f" at x = {x[i]:.6g}") if x is not None else (lambda i: "")
    if np.any(~np.isfinite(W)):
        raise ConfigError("initial fields contain non-finite values", "initial")
    if np.any(h <= 0):
        i = int(np.argmin(h))
        raise NonPositiveHeight(f"initial height {h[i]:.3e} <= 0{where(i)}")
    for name, f in (("Phi", Phi), ("phi", phi)):
        if np.any(f < 0):
            i = int(np.argmin(f))
            raise NegativeEnstrophy(f"initial {name} = {f[i]:.3e} < 0{where(i)}")


def initial_condition(spec: dict, p: PhysParams, seed_check=True):
    """Callable x -> conserved (4, n) array for SimConfig."""
    def build(x):
        W = primitive_fields(spec, x, p)
        if seed_check:
            check_admissible(W, x)
        return conserved_from_primitive(W, p)
    # validate eagerly on a tiny grid so config errors surface early
    primitive_fields(spec, np.linspace(0.0, 1.0, 4), p)
    return build

"""Bundled reproduction experiments (fig2 ... fig10) with outcome checks.

Each preset is a pure function of its name: a config dictionary in the JSON
schema of :mod:`rgwaves.io` plus a check function that inspects the run.
Grid sizes and domains are not given with the original figures; the values
here were chosen so every preset runs in well under a few minutes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.optimize import minimize_scalar

from .equilibrium import EquilibriumState, riemann_solve
from .errors import NoTransitionFound
from .io import CheckResult
from .model import PhysParams
from .profiles import cumulative_integral, construct_single_jump
from .solver import RunResult, find_fronts, measure_wave

PI = math.pi

GENTLE = {"g_perp": 10 * math.cos(PI / 10), "g_parallel": 10 * math.sin(PI / 10),
          "c_f": 1.0, "c_t": 0.9}
STEEP = {"g_perp": 10 * math.cos(PI / 6), "g_parallel": 10 * math.sin(PI / 6),
         "c_f": 0.05, "c_t": 0.04}

FRONT_THRESHOLD = 0.05   # per-cell |dh| marking an h-discontinuity


@dataclass(frozen=True)
class ExperimentPreset:
    name: str
    description: str
    config: dict
    check: Callable[[RunResult, PhysParams, dict], list]

    def params(self):
        return PhysParams(**self.config["params"])


def _cfg(params, grid, initial, t_end, snapshots, **time):
    return {"params": dict(params), "grid": grid, "initial": initial,
            "time": {"t_end": t_end, "cfl": 0.45, "snapshots": snapshots, **time}}


def _snap(run, t):
    for s in run.snapshots:
        if abs(s.t - t) < 1e-9:
            return s
    raise KeyError(f"no snapshot at t = {t}")


def _check(name, value, lo=None, hi=None, expected=""):
    ok = bool(np.isfinite(value)) and (lo is None or value >= lo) and (hi is None or value <= hi)
    return CheckResult(name, ok, float(value), expected)


def _within(name, value, target, tol, rel=False):
    width = tol * abs(target) if rel else tol
    return _check(name, value, target - width, target + width,
                  f"{target:.6g} +/- {tol:g}{' (relative)' if rel else ''}")


def h_fronts(snapshot, threshold=FRONT_THRESHOLD):
    W = snapshot.primitive
    return find_fronts(snapshot.x, W[0], threshold)


def shift_aligned_l1(x, h, phi, profile, guess, search=5.0):
    """min over shifts s of the mean of |h - hbar(x - s)| + |phi - phibar(x - s)|.

    Returns (distance per unit length, optimal shift).
    """
    length = x[-1] - x[0]

    def dist(s):
        hb, pb = profile.evaluate(x - s)
        return float(np.trapezoid(np.abs(h - hb) + np.abs(phi - pb), x) / length)

    coarse = np.linspace(guess - search, guess + search, 201)
    vals = [dist(s) for s in coarse]
    k = int(np.argmin(vals))
    step = coarse[1] - coarse[0]
    res = minimize_scalar(dist, bounds=(coarse[k] - step, coarse[k] + step), method="bounded",
                          options={"xatol": 1e-6})
    return float(res.fun), float(res.x)


# ---------------------------------------------------------------------------
# checks
# ---------------------------------------------------------------------------

def _fig2_checks(run, p, cfg):
    s = _snap(run, 95.0)
    W = s.primitive
    c = float(p.equilibrium_velocity(1.0))
    target = 50.0 + 95.0 * c
    loc = measure_wave(s, "contact").location
    out = [_within("contact at 217", loc, target, 1.0)]
    down = W[0][(s.x > loc + 5.0)]
    out.append(_check("downstream h = 1", float(np.max(np.abs(down - 1.0))), hi=1e-2,
                      expected="max |h - 1| <= 1e-2 right of the contact"))
    prof = construct_single_jump(1.0, c, 0.2, 0.5, target, p, domain=(s.x[0], s.x[-1]),
                                 dx=0.01)
    dist, shift = shift_aligned_l1(s.x, W[0], W[3], prof, 0.0)
    r = _check("shift-aligned L1 to single-jump profile", dist, hi=0.05,
               expected="<= 0.05 per unit length")
    r.detail = f"optimal shift {shift:+.4f}"
    out.append(r)
    return out


def _fig4_checks(run, p, cfg):
    s = run.snapshots[-1]
    W = s.primitive
    contact = measure_wave(s, "contact", window=(s.x[0], s.x[-1]), which="departure").location
    fronts = [f for f, _ in h_fronts(s) if f > contact + 1.0]
    out = [_check("h-discontinuities ahead of the contact", len(fronts), lo=1,
                  expected=">= 1 front right of the phi contact")]
    k = int(np.argmax(np.abs(W[2])))
    gap = min((abs(s.x[k] - f) for f in fronts), default=np.inf)
    out.append(_check("Phi peak sits at an h-discontinuity", gap, hi=2.0,
                      expected="distance <= 2"))
    return out


def _profile_distance(run, p, cfg, field):
    """Shift-aligned sup distance of the final field to the reference wave."""
    from .initial import primitive_fields, wave_profile_from_spec
    s = run.snapshots[-1]
    W = s.primitive
    spec = dict(cfg["initial"])
    prof = wave_profile_from_spec(spec["profile"], p, s.x)
    if field == "phi":
        # the reference is the perturbed initial enstrophy, transported at c
        ref = primitive_fields(spec, s.x, p)[3]

        def shifted(z):
            return np.interp(z, s.x, ref)
    else:
        def shifted(z):
            return prof.evaluate(z)[0]
    i = 0 if field == "h" else 3
    inner = (s.x > s.x[0] + 5.0) & (s.x < s.x[-1] - 5.0)
    guess = prof.c * s.t

    def dist(sh):
        return float(np.max(np.abs(W[i][inner] - shifted(s.x[inner] - sh))))
    res = minimize_scalar(dist, bounds=(guess - 2.0, guess + 2.0), method="bounded",
                          options={"xatol": 1e-6})
    return float(res.fun), float(res.x), guess


def _fig5_checks(run, p, cfg):
    d, sh, guess = _profile_distance(run, p, cfg, "h")
    r = _check("h returns to a translate of the unperturbed wave", d, hi=2e-3,
               expected="sup |h - hbar(x - s)| <= 2e-3 (perturbation amplitude 1e-2)")
    r.detail = f"shift {sh:.4f} vs transport c t = {guess:.4f}"
    W = run.snapshots[-1].primitive
    c = float(p.equilibrium_velocity(1.0))
    return [r, _check("U relaxes to c", float(np.max(np.abs(W[1] - c))), hi=1e-2,
                      expected="max |U - c| <= 1e-2")]


def _fig6_checks(run, p, cfg):
    d, sh, guess = _profile_distance(run, p, cfg, "phi")
    r = _check("phi keeps the perturbed shape", d, hi=2e-2,
               expected="sup |phi - (phibar + pert)(x - s)| <= 2e-2 (perturbation 0.1*e^-1)")
    r.detail = f"shift {sh:.4f} vs transport c t = {guess:.4f}"
    return [r]


def _dam_break_speeds(run, p, cfg, t1, t2):
    s1, s2 = _snap(run, t1), _snap(run, t2)
    out = []
    phi_left = cfg["initial"]["fields"]["phi"]["values"][0]
    locs = []
    for s in (s1, s2):
        W = s.primitive
        thr = 0.05 * float(np.ptp(W[3]))
        locs.append(measure_wave(s, "contact", which="departure", threshold=thr).location)
        assert abs(W[3][0] - phi_left) < 1e-9
    out.append((locs[1] - locs[0]) / (t2 - t1))
    shocks = [measure_wave(s, "shock").location for s in (s1, s2)]
    out.append((shocks[1] - shocks[0]) / (t2 - t1))
    return out


def _fig7_checks(run, p, cfg):
    contact, shock = _dam_break_speeds(run, p, cfg, 10.0, 15.0)
    sol = riemann_solve(EquilibriumState(1.0, 0.3), EquilibriumState(0.2, 0.6), p)
    sc, ss = sol.wave_speeds()
    return [_within("contact speed 10", contact, sc, 0.02, rel=True),
            _within("shock speed (25 - sqrt 5)/2", shock, ss, 0.02, rel=True)]


def _fig8_checks(run, p, cfg):
    counts = {s.t: len(h_fronts(s)) for s in run.snapshots if s.t > 0}
    early = max(v for t, v in counts.items() if t <= 15.0)
    late = max(v for t, v in counts.items() if t > 15.0)
    r1 = _check("single h-discontinuity up to t = 15", early, hi=1, expected="1")
    r1.detail = f"counts {counts}"
    r2 = _check("second h-discontinuity after t = 15", late, lo=2, expected=">= 2")
    r2.detail = f"counts {counts}"
    return [r1, r2]


def _periodic_drift(run):
    h0, h1 = run.history[0], run.history[-1]
    return (abs(h1.mass - h0.mass) / abs(h0.mass),
            abs(h1.hphi_total - h0.hphi_total) / abs(h0.hphi_total))


def _fig9_checks(run, p, cfg):
    dm, dq = _periodic_drift(run)
    c = float(p.equilibrium_velocity(1.0))
    dev = [float(np.max(np.abs(s.primitive[1] - c))) for s in run.snapshots if s.t > 0]
    s = run.snapshots[-1]
    W = s.primitive
    # a convective wave satisfies g'h^2/2 + phi h^3 - g_par int (h - h0) = kappa
    rel = (0.5 * p.g_perp * W[0] ** 2 + W[3] * W[0] ** 3
           - p.g_parallel * cumulative_integral(s.x, W[0] - 1.0))
    spread = float(np.ptp(rel) / np.mean(rel))
    return [
        _check("mass drift", dm, hi=1e-10, expected="<= 1e-10 relative"),
        _check("h phi drift", dq, hi=1e-10, expected="<= 1e-10 relative"),
        _check("U approaches c monotonically", float(np.all(np.diff(dev) < 0)), lo=1.0,
               expected="max |U - c| decreasing over snapshots"),
        _check("U relaxed to c", dev[-1], hi=1e-2, expected="max |U - c| <= 1e-2"),
        _check("profile relation holds", spread, hi=1e-2,
               expected="relative spread of kappa <= 1e-2"),
    ]


def _fig10_checks(run, p, cfg):
    dm, dq = _periodic_drift(run)
    s = run.snapshots[-1]
    W = s.primitive
    fronts = [f for f, _ in h_fronts(s)]
    Phi = np.abs(W[2])
    out = [_check("mass drift", dm, hi=1e-10, expected="<= 1e-10 relative"),
           _check("h phi drift", dq, hi=1e-10, expected="<= 1e-10 relative"),
           _check("h-discontinuities present", len(fronts), lo=1, expected=">= 1")]
    if not fronts:
        out.append(CheckResult("Phi localized at h-discontinuities", False, None,
                               "Phi peaks within 1 of a front", "no h-discontinuity found"))
        return out
    period = s.x[-1] - s.x[0] + (s.x[1] - s.x[0])
    d = np.min([np.abs((s.x - f + 0.5 * period) % period - 0.5 * period) for f in fronts],
               axis=0)
    near, far = Phi[d <= 1.0], Phi[d > 1.0]
    ratio = float(far.max() / near.max()) if far.size else 0.0
    out.append(_check("Phi nonzero at h-discontinuities", float(near.max()), lo=1e-3,
                      expected="max Phi within 1 of a front >= 1e-3"))
    out.append(_check("Phi localized at h-discontinuities", ratio, hi=0.1,
                      expected="max Phi away from fronts <= 10% of the peak"))
    return out


# ---------------------------------------------------------------------------
# registry
# ---------------------------------------------------------------------------

def _dam_break(h_right):
    return {
        "type": "piecewise",
        "fields": {
            "h": {"breaks": [5.0], "values": [1.0, h_right]},
            "U": "equilibrium",
            "Phi": 0.0,
            "phi": {"breaks": [10.0, 20.0, 30.0, 40.0], "values": [0.3, 0.1, 0.5, 0.2, 0.6]},
        },
    }


def _smooth_wave(extra):
    return {
        "type": "perturbed_profile",
        "profile": {"h0": 1.0, "phi_minus": 4.0, "dx": 0.005,
                    "delta": {"shape": "bump", "center": 3.0, "width": 1.0, "amplitude": 0.02}},
        "perturbations": [extra],
    }


GENTLE_08 = dict(GENTLE, c_t=0.8)

PRESETS = {
    "fig2": ExperimentPreset(
        "fig2", "phi step between stable states: convective contact wave",
        _cfg(GENTLE, {"x_lo": 0.0, "x_hi": 250.0, "n_cells": 2500, "bc": "outflow"},
             {"type": "riemann_phi", "h": 1.0, "x0": 50.0, "phi_left": 0.2, "phi_right": 0.5},
             95.0, [0.0, 1.0, 10.0, 95.0]),
        _fig2_checks),
    "fig4": ExperimentPreset(
        "fig4", "phi step between unstable states: contact wave with shocks ahead",
        _cfg(STEEP, {"x_lo": 0.0, "x_hi": 300.0, "n_cells": 3000, "bc": "outflow"},
             {"type": "riemann_phi", "h": 1.0, "x0": 50.0, "phi_left": 0.3, "phi_right": 0.1},
             20.0, [0.0, 5.0, 10.0, 20.0]),
        _fig4_checks),
    "fig5": ExperimentPreset(
        "fig5", "smooth convective wave with an h perturbation",
        _cfg(GENTLE_08, {"x_lo": -10.0, "x_hi": 30.0, "n_cells": 2000, "bc": "outflow"},
             _smooth_wave({"field": "h", "shape": "bump", "center": 6.0, "width": 1.0,
                           "amplitude": -0.01}),
             6.0, [0.0, 0.2, 1.0, 6.0]),
        _fig5_checks),
    "fig6": ExperimentPreset(
        "fig6", "smooth convective wave with a phi perturbation",
        _cfg(GENTLE_08, {"x_lo": -10.0, "x_hi": 30.0, "n_cells": 2000, "bc": "outflow"},
             _smooth_wave({"field": "phi", "shape": "bump", "center": 5.0, "width": 1.0,
                           "amplitude": 0.1}),
             6.0, [0.0, 0.2, 1.0, 6.0]),
        _fig6_checks),
    "fig7": ExperimentPreset(
        "fig7", "dam break, h_R = 0.2: hydraulic shock with a trailing contact",
        _cfg(STEEP, {"x_lo": 0.0, "x_hi": 250.0, "n_cells": 2500, "bc": "outflow"},
             _dam_break(0.2), 15.0, [0.0, 5.0, 10.0, 15.0]),
        _fig7_checks),
    "fig8": ExperimentPreset(
        "fig8", "dam break, h_R = 0.5: the shock splits after t = 15",
        _cfg(STEEP, {"x_lo": 0.0, "x_hi": 400.0, "n_cells": 4000, "bc": "outflow"},
             _dam_break(0.5), 25.0, [0.0, 5.0, 10.0, 15.0, 20.0, 25.0]),
        _fig8_checks),
    "fig9": ExperimentPreset(
        "fig9", "periodic phi data, stable states: periodic convective wave",
        _cfg(GENTLE, {"x_lo": 0.0, "x_hi": 10.0, "n_cells": 500, "bc": "periodic"},
             {"type": "periodic_sine", "h": 1.0, "mean": 2.0, "amplitude": 1.0,
              "wavenumber": PI},
             5.0, [0.0, 0.5, 2.0, 5.0]),
        _fig9_checks),
    "fig10": ExperimentPreset(
        "fig10", "periodic phi data, unstable states: convective wave plus roll wave",
        _cfg(STEEP, {"x_lo": 0.0, "x_hi": 10.0, "n_cells": 500, "bc": "periodic"},
             {"type": "periodic_sine", "h": 1.0, "mean": 2.0, "amplitude": 1.0,
              "wavenumber": PI},
             40.0, [0.0, 5.0, 10.0, 40.0]),
        _fig10_checks),
}


def get_preset(name) -> ExperimentPreset:
    try:
        return PRESETS[name]
    except KeyError:
        raise KeyError(f"unknown preset '{name}'; choose from {sorted(PRESETS)}") from None


def evaluate_checks(preset: ExperimentPreset, run: RunResult):
    """Run the preset's checks; a measurement failure becomes a failed check."""
    try:
        return preset.check(run, preset.params(), preset.config)
    except (NoTransitionFound, KeyError, ValueError, AssertionError) as exc:
        return [CheckResult(f"{preset.name} measurement", False, None, "", str(exc))]


__all__ = ["ExperimentPreset", "PRESETS", "get_preset", "evaluate_checks",
           "shift_aligned_l1", "h_fronts", "GENTLE", "STEEP"]

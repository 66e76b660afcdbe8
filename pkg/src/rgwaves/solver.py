"""Finite-volume time integration of the 4x4 system.

Strang splitting: half source step (explicit midpoint), one SSP-RK2 step of
the homogeneous system with minmod-limited reconstruction of (h, U, Phi, phi)
and an HLL (or contact-restoring HLLC) interface flux, half source step.
Arrays of conserved states have shape (4, n_cells).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import BlowUp, CFLViolation, ConfigError, NoTransitionFound, StiffSource
from .model import (
    PhysParams,
    conserved_from_primitive,
    flux_array,
    friction_coefficient,
    pressure,
    primitive_from_conserved,
    source_array,
    sound_speed_array,
)

N_GHOST = 2
H_FLOOR = 1e-10
BLOWUP_SPEED = 1e6
BOUNDARIES = ("outflow", "periodic")


@dataclass(frozen=True)
class Grid1D:
    x_lo: float
    x_hi: float
    n_cells: int
    bc: str = "outflow"

    def __post_init__(self):
        if self.n_cells < 8:
            raise ConfigError("a grid needs at least 8 cells", "grid.n_cells")
        if not self.x_hi > self.x_lo:
            raise ConfigError("x_hi must exceed x_lo", "grid.x_hi")
        if self.bc not in BOUNDARIES:
            raise ConfigError(f"boundary must be one of {BOUNDARIES}", "grid.bc")

    @property
    def dx(self):
        return (self.x_hi - self.x_lo) / self.n_cells

    @property
    def centers(self):
        return self.x_lo + (np.arange(self.n_cells) + 0.5) * self.dx

    @property
    def faces(self):
        return self.x_lo + np.arange(self.n_cells + 1) * self.dx

    def to_dict(self):
        return {"x_lo": self.x_lo, "x_hi": self.x_hi, "n_cells": self.n_cells, "bc": self.bc}


@dataclass(frozen=True)
class Diagnostics:
    t: float
    mass: float
    hphi_total: float
    min_h: float
    max_abs_u: float
    max_abs_Phi: float
    floor_breaches: int

    FIELDS = ("t", "mass", "hphi_total", "min_h", "max_abs_u", "max_abs_Phi",
              "floor_breaches")

    def row(self):
        return [getattr(self, f) for f in self.FIELDS]


@dataclass(frozen=True, eq=False)
class Snapshot:
    t: float
    x: np.ndarray
    q: np.ndarray
    params: PhysParams
    diagnostics: Diagnostics

    @property
    def primitive(self):
        return primitive_from_conserved(self.q, self.params)

    def to_csv(self, path):
        W = self.primitive
        with open(path, "w", newline="") as fh:
            fh.write("x,h,U,Phi,phi\n")
            for row in zip(self.x, *W):
                fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


def snapshot_name(t):
    return f"t{t:010.4f}.csv"


@dataclass
class SimConfig:
    params: PhysParams
    grid: Grid1D
    initial: Callable[[np.ndarray], np.ndarray]
    t_end: float
    snapshots: Sequence[float] = ()
    cfl: float = 0.45
    riemann_solver: str = "hll"
    h_floor: float = H_FLOOR
    max_steps: Optional[int] = None
    stiffness_limit: float = 1.0
    initial_spec: dict = field(default_factory=dict)

    def __post_init__(self):
        if not 0.0 < self.cfl <= 1.0:
            raise ConfigError("CFL number must lie in (0, 1]", "time.cfl")
        if self.t_end < 0:
            raise ConfigError("end time must be non-negative", "time.t_end")
        snaps = list(self.snapshots)
        if snaps != sorted(snaps):
            raise ConfigError("snapshot times must be sorted", "time.snapshots")
        if snaps and (snaps[0] < 0 or snaps[-1] > self.t_end):
            raise ConfigError("snapshot times must lie in [0, t_end]", "time.snapshots")
        if self.riemann_solver not in ("hll", "hllc"):
            raise ConfigError("riemann_solver must be 'hll' or 'hllc'", "time.riemann_solver")


# ---------------------------------------------------------------------------
# interface fluxes
# ---------------------------------------------------------------------------

def wave_speed_bounds(WL, WR, p: PhysParams):
    aL = sound_speed_array(WL[0], WL[2] + WL[3], p)
    aR = sound_speed_array(WR[0], WR[2] + WR[3], p)
    sL = np.minimum(WL[1] - aL, WR[1] - aR)
    sR = np.maximum(WL[1] + aL, WR[1] + aR)
    return sL, sR


def hll_flux(qL, qR, p: PhysParams, WL=None, WR=None):
    """Two-wave HLL flux between conserved states (arrays of shape (4, ...))."""
    qL = np.asarray(qL, dtype=float)
    qR = np.asarray(qR, dtype=float)
    WL = primitive_from_conserved(qL, p) if WL is None else WL
    WR = primitive_from_conserved(qR, p) if WR is None else WR
    FL = flux_array(qL, p, WL)
    FR = flux_array(qR, p, WR)
    sL, sR = wave_speed_bounds(WL, WR, p)
    sLm = np.minimum(sL, 0.0)
    sRp = np.maximum(sR, 0.0)
    den = sRp - sLm
    den = np.where(den > 0, den, 1.0)
    F = (sRp * FL - sLm * FR + sLm * sRp * (qR - qL)) / den
    return F


def hllc_flux(qL, qR, p: PhysParams, WL=None, WR=None):
    """Three-wave flux restoring the contact at the fluid velocity.

    Star states follow the classical gas-dynamics construction with the
    pressure g'h^2/2 + (Phi + phi) h^3; phi is carried passively.
    """
    qL = np.asarray(qL, dtype=float)
    qR = np.asarray(qR, dtype=float)
    WL = primitive_from_conserved(qL, p) if WL is None else WL
    WR = primitive_from_conserved(qR, p) if WR is None else WR
    FL = flux_array(qL, p, WL)
    FR = flux_array(qR, p, WR)
    sL, sR = wave_speed_bounds(WL, WR, p)
    hL, uL = WL[0], WL[1]
    hR, uR = WR[0], WR[1]
    pL = pressure(hL, WL[2] + WL[3], p)
    pR = pressure(hR, WR[2] + WR[3], p)
    mL = hL * (sL - uL)
    mR = hR * (sR - uR)
    den = mL - mR
    den = np.where(den != 0, den, 1e-300)
    s_star = (pR - pL + uL * mL - uR * mR) / den

    def star(q, W, s, m, pk):
        h, u = W[0], W[1]
        fac = m / (s - s_star)
        E = q[2] / h
        return np.array([
            fac,
            fac * s_star,
            fac * (E + (s_star - u) * (s_star + pk / m)),
            fac * W[3],
        ])

    with np.errstate(divide="ignore", invalid="ignore"):
        qsL = star(qL, WL, sL, mL, pL)
        qsR = star(qR, WR, sR, mR, pR)
    F = np.where(sL >= 0, FL,
                 np.where(s_star >= 0, FL + sL * (qsL - qL),
                          np.where(sR > 0, FR + sR * (qsR - qR), FR)))
    return F


FLUXES = {"hll": hll_flux, "hllc": hllc_flux}


# ---------------------------------------------------------------------------
# reconstruction, hyperbolic and source steps
# ---------------------------------------------------------------------------

def fill_ghosts(Q, bc):
    g = N_GHOST
    if bc == "periodic":
        return np.concatenate([Q[:, -g:], Q, Q[:, :g]], axis=1)
    return np.concatenate([np.repeat(Q[:, :1], g, axis=1), Q,
                           np.repeat(Q[:, -1:], g, axis=1)], axis=1)


def minmod(a, b):
    return np.where(a * b > 0, np.sign(a) * np.minimum(np.abs(a), np.abs(b)), 0.0)


def interface_states(Q, p: PhysParams, bc):
    """Limited primitive values left and right of each of the n+1 faces."""
    W = primitive_from_conserved(fill_ghosts(Q, bc), p)
    slope = minmod(W[:, 1:-1] - W[:, :-2], W[:, 2:] - W[:, 1:-1])
    Wc = W[:, 1:-1]
    right_edge = Wc + 0.5 * slope   # cells 1..n+2 of the padded array
    left_edge = Wc - 0.5 * slope
    # face k sits between padded cells k+1 and k+2 (k = 0..n)
    WL = right_edge[:, :-1][:, :Q.shape[1] + 1]
    WR = left_edge[:, 1:][:, :Q.shape[1] + 1]
    return WL, WR


def flux_divergence(Q, p: PhysParams, dx, bc, solver="hll"):
    WL, WR = interface_states(Q, p, bc)
    WL[0] = np.maximum(WL[0], H_FLOOR)
    WR[0] = np.maximum(WR[0], H_FLOOR)
    F = FLUXES[solver](conserved_from_primitive(WL, p), conserved_from_primitive(WR, p),
                       p, WL, WR)
    return -(F[:, 1:] - F[:, :-1]) / dx


def hyperbolic_step(Q, dt, p: PhysParams, dx, bc, solver="hll"):
    """SSP-RK2 step of the homogeneous system."""
    Q1 = Q + dt * flux_divergence(Q, p, dx, bc, solver)
    return 0.5 * (Q + Q1 + dt * flux_divergence(Q1, p, dx, bc, solver))


def source_rate(Q, p: PhysParams, W=None):
    """Largest relaxation rate 2 C |U| / h of the friction terms."""
    if W is None:
        W = primitive_from_conserved(Q, p)
    C = np.maximum(friction_coefficient(W[2], W[3], p), p.c_f)
    return float(np.max(2.0 * C * np.abs(W[1]) / W[0]))


def source_step(Q, dt, p: PhysParams, stiffness_limit=1.0):
    """Explicit midpoint step of dQ/dt = S(Q)."""
    W = primitive_from_conserved(Q, p)
    rate = source_rate(Q, p, W)
    if dt * rate > stiffness_limit:
        raise StiffSource(
            f"source relaxation rate {rate:.3e} is stiff for dt = {dt:.3e}; reduce dt")
    half = Q + 0.5 * dt * source_array(Q, p, W)
    return Q + dt * source_array(half, p)


def stable_dt(Q, p: PhysParams, dx, cfl):
    W = primitive_from_conserved(Q, p)
    a = sound_speed_array(W[0], W[2] + W[3], p)
    smax = float(np.max(np.abs(W[1]) + a))
    if not math.isfinite(smax):
        raise BlowUp("non-finite characteristic speed")
    return cfl * dx / smax


def apply_floor(Q, p: PhysParams, h_floor):
    """Reset cells with h < h_floor to fluid at rest of height h_floor.

    Returns (Q, breaches, mass added) so the conservation error is accounted.
    """
    bad = Q[0] < h_floor
    n = int(np.count_nonzero(bad))
    if not n:
        return Q, 0, 0.0
    Q = Q.copy()
    added = float(np.sum(h_floor - Q[0][bad]))
    rest = conserved_from_primitive(np.array([h_floor, 0.0, 0.0, 0.0]), p)
    Q[:, bad] = rest[:, None]
    return Q, n, added


def step(Q, dt, p: PhysParams, grid: Grid1D, cfl=0.45, solver="hll", h_floor=H_FLOOR,
         stiffness_limit=1.0, check_cfl=True):
    """One Strang-split step; returns (Q_new, floor_breaches).

    check_cfl=False skips the CFL test when dt already came from stable_dt.
    """
    if check_cfl:
        limit = stable_dt(Q, p, grid.dx, 1.0) * cfl
        if dt > limit * (1.0 + 1e-12):
            raise CFLViolation(f"dt = {dt:.3e} exceeds the CFL limit {limit:.3e}")
    Q = source_step(Q, 0.5 * dt, p, stiffness_limit)
    Q = hyperbolic_step(Q, dt, p, grid.dx, grid.bc, solver)
    Q, breaches, _ = apply_floor(Q, p, h_floor)
    Q = source_step(Q, 0.5 * dt, p, stiffness_limit)
    return Q, breaches


def diagnostics(t, Q, p: PhysParams, dx, breaches):
    W = primitive_from_conserved(Q, p)
    return Diagnostics(float(t), float(np.sum(Q[0]) * dx), float(np.sum(Q[3]) * dx),
                       float(W[0].min()), float(np.abs(W[1]).max()),
                       float(np.abs(W[2]).max()), int(breaches))


# ---------------------------------------------------------------------------
# driver
# ---------------------------------------------------------------------------

@dataclass
class RunResult:
    snapshots: list
    history: list
    steps: int
    floor_breaches: int


def run(config: SimConfig, *, record_every=0, on_snapshot=None) -> RunResult:
    """Integrate to t_end, hitting every snapshot time exactly.

    record_every > 0 also stores diagnostics every that many steps.
    """
    p, grid = config.params, config.grid
    x = grid.centers
    Q = np.asarray(config.initial(x), dtype=float)
    if Q.shape != (4, grid.n_cells):
        raise ConfigError("initial condition must return a (4, n_cells) array", "initial")
    targets = sorted(set(float(t) for t in config.snapshots) | {float(config.t_end)})
    want = set(float(t) for t in config.snapshots)
    t = 0.0
    steps = 0
    breaches = 0
    snaps = []
    history = [diagnostics(0.0, Q, p, grid.dx, 0)]

    def emit(t_now):
        snap = Snapshot(t_now, x, Q.copy(), p, diagnostics(t_now, Q, p, grid.dx, breaches))
        snaps.append(snap)
        if on_snapshot is not None:
            on_snapshot(snap)

    for target in targets:
        while t < target:
            dt = stable_dt(Q, p, grid.dx, config.cfl)
            if t + dt >= target or target - (t + dt) < 1e-12 * max(1.0, target):
                dt = target - t
            Q, nb = step(Q, dt, p, grid, config.cfl, config.riemann_solver,
                         config.h_floor, config.stiffness_limit, check_cfl=False)
            breaches += nb
            t = target if dt == target - t else t + dt
            steps += 1
            if not np.all(np.isfinite(Q)):
                raise BlowUp(f"non-finite state at t = {t:.6g}")
            umax = np.max(np.abs(Q[1] / Q[0]))
            if umax > BLOWUP_SPEED:
                raise BlowUp(f"|U| = {umax:.3e} at t = {t:.6g}")
            if record_every and steps % record_every == 0:
                history.append(diagnostics(t, Q, p, grid.dx, breaches))
            if config.max_steps is not None and steps >= config.max_steps:
                break
        if target in want:
            emit(target)
        if config.max_steps is not None and steps >= config.max_steps:
            break
    history.append(diagnostics(t, Q, p, grid.dx, breaches))
    return RunResult(snaps, history, steps, breaches)


def write_diagnostics(path, history):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(Diagnostics.FIELDS)
        for d in history:
            w.writerow([f"{v:.17g}" if isinstance(v, float) else v for v in d.row()])


def read_snapshot_csv(path):
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return data[:, 0], data[:, 1:].T


# ---------------------------------------------------------------------------
# post-processing
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class WaveMeasurement:
    kind: str
    location: float
    t: float
    jump: float


def find_fronts(x, f, threshold):
    """Locations of transitions where |f[i+1] - f[i]| exceeds threshold.

    Adjacent steep faces are merged; each front is located at the face with
    the largest difference within its group.
    """
    d = np.diff(f)
    steep = np.flatnonzero(np.abs(d) > threshold)
    if steep.size == 0:
        return []
    groups = np.split(steep, np.flatnonzero(np.diff(steep) > 1) + 1)
    dx = x[1] - x[0]
    fronts = []
    for g in groups:
        k = g[np.argmax(np.abs(d[g]))]
        total = f[g[-1] + 1] - f[g[0]]
        fronts.append((float(x[k] + 0.5 * dx), float(total)))
    return fronts


def measure_wave(snapshot: Snapshot, kind="contact", window=None, which="steepest",
                 threshold=None) -> WaveMeasurement:
    """Locate a contact (steepest phi gradient) or shock (steepest h gradient).

    which: 'steepest', 'leftmost' or 'rightmost' among fronts whose jump
    exceeds threshold (default: 10% of the field's range in the window), or
    'departure': the first point, scanning from the window's left end, where
    the field leaves its left value by more than threshold (default 5% of
    the range). The last mode tracks a smeared contact sitting ahead of
    further variation, where no single face is steep.
    """
    W = snapshot.primitive
    f = W[3] if kind == "contact" else W[0] if kind == "shock" else None
    if f is None:
        raise ValueError("kind must be 'contact' or 'shock'")
    x = snapshot.x
    if window is not None:
        m = (x >= window[0]) & (x <= window[1])
        x, f = x[m], f[m]
    if x.size < 3:
        raise NoTransitionFound("window contains fewer than three cells")
    span = float(f.max() - f.min())
    if span == 0.0:
        raise NoTransitionFound(f"no {kind} transition: field is constant")
    if which == "steepest":
        d = np.diff(f)
        k = int(np.argmax(np.abs(d)))
        return WaveMeasurement(kind, float(0.5 * (x[k] + x[k + 1])), snapshot.t, float(d[k]))
    if which == "departure":
        thr = 0.05 * span if threshold is None else threshold
        dev = np.abs(f - f[0])
        idx = np.flatnonzero(dev > thr)
        if idx.size == 0:
            raise NoTransitionFound(f"no {kind} departure above {thr:.3g}")
        k = int(idx[0])
        # linear interpolation of the threshold crossing between k-1 and k
        a, b = dev[k - 1], dev[k]
        loc = x[k - 1] + (thr - a) / (b - a) * (x[k] - x[k - 1])
        return WaveMeasurement(kind, float(loc), snapshot.t, float(f[k] - f[0]))
    if which not in ("leftmost", "rightmost"):
        raise ValueError(f"unknown measurement mode '{which}'")
    thr = 0.1 * span if threshold is None else threshold
    fronts = find_fronts(x, f, thr)
    if not fronts:
        raise NoTransitionFound(f"no {kind} transition above {thr:.3g}")
    loc, jump = fronts[0] if which == "leftmost" else fronts[-1]
    return WaveMeasurement(kind, loc, snapshot.t, jump)


def wave_speed(s1: Snapshot, s2: Snapshot, kind="contact", **kw):
    a = measure_wave(s1, kind, **kw)
    b = measure_wave(s2, kind, **kw)
    if s2.t == s1.t:
        raise ValueError("snapshots must be at distinct times")
    return (b.location - a.location) / (s2.t - s1.t)

"""Convective-wave profiles: U = c, Phi = 0, and (h, phi) tied together by

    g' h^2/2 + phi h^3 = kappa + g_par * int_{-inf}^x (h - h0) dy,

with h0 = c_f c^2 / g_par. Any height deviation delta = h - h0 (smooth or
with jumps) yields a profile; jumps automatically satisfy [g'h^2/2 + phi h^3] = 0.

Profiles are stored as samples. A repeated abscissa marks a jump: the first
copy carries the left limit, the second the right limit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicSpline

from .errors import (
    IntegrationFailure,
    NegativeEnstrophy,
    NoPositiveRoot,
    NonEquilibriumEndstate,
    NonPositiveHeight,
    NonZeroMean,
)
from .model import PhysParams

EQUILIBRIUM_RTOL = 1e-10


# ---------------------------------------------------------------------------
# built-in height deviations
# ---------------------------------------------------------------------------

def bump(x, center=0.0, width=1.0, amplitude=1.0):
    """amplitude * exp(-1/(1-s^2)) for |s| < 1, s = (x - center)/width."""
    s = (np.asarray(x, dtype=float) - center) / width
    out = np.zeros_like(s)
    inside = np.abs(s) < 1.0
    out[inside] = amplitude * np.exp(-1.0 / (1.0 - s[inside] ** 2))
    return out


# integral of exp(-1/(1-s^2)) over (-1, 1)
BUMP_MASS = 0.44399381616807943


def gaussian(x, center=0.0, width=1.0, amplitude=1.0):
    s = (np.asarray(x, dtype=float) - center) / width
    return amplitude * np.exp(-0.5 * s * s)


def sine(x, amplitude=1.0, period=1.0, phase=0.0):
    return amplitude * np.sin(2.0 * np.pi * np.asarray(x, dtype=float) / period + phase)


def box(x, start=0.0, stop=1.0, amplitude=1.0):
    x = np.asarray(x, dtype=float)
    return np.where((x >= start) & (x < stop), amplitude, 0.0)


DELTA_SHAPES = {"bump": bump, "gaussian": gaussian, "sine": sine, "box": box}


def make_grid(x_lo, x_hi, dx, jumps=()):
    """Uniform-ish sample grid with each jump location duplicated."""
    breaks = [x_lo, *sorted(j for j in jumps if x_lo < j < x_hi), x_hi]
    parts = []
    for a, b in zip(breaks[:-1], breaks[1:]):
        n = max(int(math.ceil((b - a) / dx)), 6)
        parts.append(np.linspace(a, b, n + 1))
    return np.concatenate(parts)


def sample_on_grid(func, x):
    """Evaluate func on a grid with duplicated jump points (left limit first)."""
    x = np.asarray(x, dtype=float)
    xe = x.copy()
    dup = np.flatnonzero(np.diff(x) == 0.0)
    xe[dup] = np.nextafter(x[dup], -np.inf)
    return np.asarray(func(xe), dtype=float)


# ---------------------------------------------------------------------------
# profile containers
# ---------------------------------------------------------------------------

def piece_slices(x):
    """Slices of the smooth pieces of a sample grid with duplicated jumps."""
    cuts = np.flatnonzero(np.diff(x) == 0.0) + 1
    bounds = [0, *cuts.tolist(), len(x)]
    return [slice(a, b) for a, b in zip(bounds[:-1], bounds[1:])]


def cumulative_integral(x, f, start=0.0):
    """Running integral of sampled f, piece by piece.

    Uses the antiderivative of a not-a-knot cubic spline: its error varies
    smoothly along the grid, so the result can be differentiated again
    without the even/odd ripple of composite Simpson sums.
    """
    f = np.asarray(f)
    out = np.empty_like(f, dtype=np.result_type(f, float))
    acc = start
    for sl in piece_slices(x):
        xs, fs = x[sl], f[sl]
        if xs.size == 1:
            out[sl] = acc
            continue
        if xs.size < 4:
            part = np.concatenate([[0.0], np.cumsum(0.5 * (fs[1:] + fs[:-1]) * np.diff(xs))])
        else:
            part = CubicSpline(xs, fs).antiderivative()(xs)
            part = part - part[0]
        out[sl] = acc + part
        acc = out[sl][-1]
    return out


@dataclass(frozen=True)
class ProfileSpec:
    """Input of construct_from_delta / construct_periodic.

    delta is either an array sampled on x or a callable of x; jumps lists
    discontinuity locations (they are inserted into x as duplicates when
    delta is a callable).
    """

    h0: float
    c: float
    kappa: float
    x: np.ndarray
    delta: object
    jumps: Sequence[float] = ()
    period: Optional[float] = None


@dataclass(frozen=True, eq=False)
class WaveProfile:
    x: np.ndarray
    h: np.ndarray
    phi: np.ndarray
    c: float
    h0: float
    params: PhysParams
    phi_minus: Optional[float]
    phi_plus: Optional[float]
    kappa: Optional[float] = None
    period: Optional[float] = None
    decay_rates: tuple = (None, None)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if np.any(~(self.h > 0)):
            raise NonPositiveHeight("profile height must be positive")
        if np.any(~(self.phi > 0)):
            raise NegativeEnstrophy(
                f"profile enstrophy must be positive (min {self.phi.min():.3e} "
                f"at x={self.x[np.argmin(self.phi)]:.4g})")

    # -- structure -------------------------------------------------------
    @cached_property
    def pieces(self):
        return piece_slices(self.x)

    @property
    def jumps(self):
        return tuple(float(self.x[s.start]) for s in self.pieces[1:])

    @property
    def is_periodic(self):
        return self.period is not None

    @property
    def u(self):
        return np.full_like(self.h, self.c)

    @property
    def Phi(self):
        return np.zeros_like(self.h)

    @property
    def delta(self):
        return self.h - self.h0

    def jump_states(self):
        """[(x_j, (h_L, phi_L), (h_R, phi_R)), ...]."""
        out = []
        for s in self.pieces[1:]:
            i = s.start
            out.append((float(self.x[i]), (self.h[i - 1], self.phi[i - 1]),
                        (self.h[i], self.phi[i])))
        return out

    # -- evaluation ------------------------------------------------------
    @cached_property
    def _splines(self):
        out = []
        for sl in self.pieces:
            xs = self.x[sl]
            if xs.size >= 4:
                out.append((CubicSpline(xs, self.h[sl]), CubicSpline(xs, self.phi[sl])))
            else:
                hv, pv = self.h[sl][0], self.phi[sl][0]
                out.append((lambda z, v=hv: np.full_like(np.asarray(z, float), v),
                            lambda z, v=pv: np.full_like(np.asarray(z, float), v)))
        return out

    def piece_index(self, x, side="right"):
        return np.searchsorted(np.asarray(self.jumps), x, side=side)

    def evaluate(self, x, side="right"):
        """(h, phi) at arbitrary x; outside the samples the endstates hold."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        h = np.empty_like(x)
        phi = np.empty_like(x)
        idx = self.piece_index(x, side)
        for k, (sh, sp) in enumerate(self._splines):
            m = idx == k
            if not np.any(m):
                continue
            sl = self.pieces[k]
            xc = np.clip(x[m], self.x[sl][0], self.x[sl][-1])
            h[m] = sh(xc)
            phi[m] = sp(xc)
        if not self.is_periodic:
            lo, hi = x < self.x[0], x > self.x[-1]
            h[lo | hi] = self.h0
            phi[lo] = self.phi[0]
            phi[hi] = self.phi[-1]
        return h, phi

    # -- checks ----------------------------------------------------------
    def relation_residual(self):
        """g'h^2/2 + phi h^3 - kappa - g_par * int delta, at every sample."""
        p = self.params
        kappa = self.kappa if self.kappa is not None else self.implied_kappa()
        integral = cumulative_integral(self.x, self.delta, self.meta.get("tail", 0.0))
        lhs = 0.5 * p.g_perp * self.h ** 2 + self.phi * self.h ** 3
        return lhs - kappa - p.g_parallel * integral

    def jump_residuals(self):
        g = self.params.g_perp
        return np.array([
            (0.5 * g * hr ** 2 + pr * hr ** 3) - (0.5 * g * hl ** 2 + pl * hl ** 3)
            for _, (hl, pl), (hr, pr) in self.jump_states()])

    def implied_kappa(self):
        g = self.params.g_perp
        return 0.5 * g * self.h[0] ** 2 + self.phi[0] * self.h[0] ** 3

    # -- io --------------------------------------------------------------
    def to_csv(self, path):
        header = [
            "# jumps: " + " ".join(repr(float(j)) for j in self.jumps),
            f"# c: {self.c!r}", f"# h0: {self.h0!r}",
        ]
        with open(path, "w", newline="") as fh:
            fh.write("\n".join(header) + "\n")
            fh.write("x,h,phi\n")
            for row in zip(self.x, self.h, self.phi):
                fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


def read_profile_csv(path):
    """Parse a profile CSV into (x, h, phi, jumps)."""
    jumps = []
    rows = []
    with open(path) as fh:
        for line in fh:
            if line.startswith("# jumps:"):
                jumps = [float(t) for t in line.split(":", 1)[1].split()]
            elif line.startswith("#") or line.startswith("x,"):
                continue
            elif line.strip():
                rows.append([float(t) for t in line.split(",")])
    arr = np.array(rows)
    return arr[:, 0], arr[:, 1], arr[:, 2], jumps


# ---------------------------------------------------------------------------
# construction
# ---------------------------------------------------------------------------

def _check_equilibrium(h0, c, p: PhysParams):
    target = p.c_f * c * c
    if abs(p.g_parallel * h0 - target) > EQUILIBRIUM_RTOL * max(abs(target), 1.0):
        raise NonEquilibriumEndstate(
            f"g_par*h0 = {p.g_parallel * h0!r} differs from c_f*c^2 = {target!r}")


def _estimate_decay(x, d):
    """Exponential decay rates of |delta| toward each end (None if it vanishes)."""
    rates = []
    for idx in ((0, 5), (-1, -6)):
        a, b = abs(d[idx[0]]), abs(d[idx[1]])
        if a == 0.0:
            rates.append(None)
        elif b <= a:
            rates.append(0.0)
        else:
            rates.append(math.log(b / a) / abs(x[idx[1]] - x[idx[0]]))
    return tuple(rates)


def _sampled_delta(spec: ProfileSpec):
    x = np.asarray(spec.x, dtype=float)
    if callable(spec.delta):
        x = np.unique(np.concatenate([x, np.asarray(spec.jumps, float)]))
        for j in spec.jumps:
            k = np.searchsorted(x, j)
            x = np.insert(x, k, j)
        d = sample_on_grid(spec.delta, x)
    else:
        d = np.asarray(spec.delta, dtype=float)
        if d.shape != x.shape:
            raise ValueError("delta samples must match x")
    return x, d


_GL8 = np.polynomial.legendre.leggauss(8)


def gauss_cumulative_integral(func, x, start=0.0):
    """Running integral of a callable with 8-point Gauss-Legendre per interval.

    Jump duplicates give zero-width intervals, so the quadrature never
    straddles a discontinuity.
    """
    a, b = x[:-1], x[1:]
    half = 0.5 * (b - a)
    nodes = (a + b)[:, None] * 0.5 + half[:, None] * _GL8[0][None, :]
    vals = np.asarray(func(nodes.ravel()), dtype=float).reshape(nodes.shape)
    panels = half * (vals @ _GL8[1])
    return start + np.concatenate([[0.0], np.cumsum(panels)])


def _integral_of(spec, x, d, start=0.0):
    if callable(spec.delta):
        return gauss_cumulative_integral(spec.delta, x, start)
    return cumulative_integral(x, d, start)


def phi_from_relation(h, integral, kappa, p: PhysParams):
    num = kappa + p.g_parallel * integral - 0.5 * p.g_perp * h * h
    return num / h ** 3, num


def construct_from_delta(spec: ProfileSpec, p: PhysParams) -> WaveProfile:
    """Asymptotically constant convective wave with height h0 + delta."""
    _check_equilibrium(spec.h0, spec.c, p)
    x, d = _sampled_delta(spec)
    h = spec.h0 + d
    if np.any(h <= 0):
        raise NonPositiveHeight("h0 + delta must stay positive")
    rates = _estimate_decay(x, d)
    tail = d[0] / rates[0] if rates[0] else 0.0
    integral = _integral_of(spec, x, d, tail)
    phi, num = phi_from_relation(h, integral, spec.kappa, p)
    if np.any(num <= 0):
        i = int(np.argmin(num))
        raise NegativeEnstrophy(f"enstrophy numerator {num[i]:.3e} <= 0 at x={x[i]:.4g}")
    g = p.g_perp
    h0 = spec.h0
    phi_minus = (spec.kappa - 0.5 * g * h0 ** 2) / h0 ** 3
    total = integral[-1] + (d[-1] / rates[1] if rates[1] else 0.0)
    phi_plus = (spec.kappa + p.g_parallel * total - 0.5 * g * h0 ** 2) / h0 ** 3
    return WaveProfile(x=x, h=h, phi=phi, c=spec.c, h0=h0, params=p,
                       phi_minus=float(phi_minus), phi_plus=float(phi_plus),
                       kappa=spec.kappa, decay_rates=rates, meta={"tail": tail})


def construct_periodic(spec: ProfileSpec, p: PhysParams, mean_tol=1e-9) -> WaveProfile:
    """Periodic convective wave; x must span exactly one period."""
    if spec.period is None:
        raise ValueError("periodic construction needs a period")
    _check_equilibrium(spec.h0, spec.c, p)
    x, d = _sampled_delta(spec)
    if not math.isclose(x[-1] - x[0], spec.period, rel_tol=1e-9):
        raise ValueError("samples must span exactly one period")
    integral = _integral_of(spec, x, d)
    mean = integral[-1] / spec.period
    if abs(mean) > mean_tol * max(1.0, np.max(np.abs(d))):
        raise NonZeroMean(f"delta has mean {mean:.3e} over one period")
    h = spec.h0 + d
    if np.any(h <= 0):
        raise NonPositiveHeight("h0 + delta must stay positive")
    phi, num = phi_from_relation(h, integral, spec.kappa, p)
    if np.any(num <= 0):
        i = int(np.argmin(num))
        raise NegativeEnstrophy(f"enstrophy numerator {num[i]:.3e} <= 0 at x={x[i]:.4g}")
    return WaveProfile(x=x, h=h, phi=phi, c=spec.c, h0=spec.h0, params=p,
                       phi_minus=None, phi_plus=None, kappa=spec.kappa,
                       period=spec.period)


def kappa_for(h0, phi_minus, p: PhysParams):
    """Integration constant giving left endstate enstrophy phi_minus."""
    return 0.5 * p.g_perp * h0 ** 2 + phi_minus * h0 ** 3


def connect_endstates(h0, phi_minus, phi_plus, p: PhysParams, *, center=0.0,
                      width=None, x_lo=None, x_hi=None, dx=0.01):
    """Smooth bump-shaped profile joining prescribed endstate enstrophies.

    The bump area is g_par-scaled so that phi(+inf) = phi_plus exactly. By
    default the bump is widened until its peak stays below half of both h0
    and phi_minus h0^2 / g', which keeps h and phi positive.
    """
    c = float(p.equilibrium_velocity(h0))
    area = (phi_plus - phi_minus) * h0 ** 3 / p.g_parallel
    peak = 0.5 * min(h0, phi_minus * h0 ** 2 / p.g_perp)
    need = abs(area) / (peak * math.e * BUMP_MASS)
    width = max(2.0, need) if width is None else width
    amp = area / (width * BUMP_MASS)
    x_lo = center - width - 10.0 if x_lo is None else x_lo
    x_hi = center + width + 10.0 if x_hi is None else x_hi
    x = make_grid(x_lo, x_hi, dx)
    spec = ProfileSpec(h0=h0, c=c, kappa=kappa_for(h0, phi_minus, p), x=x,
                       delta=bump(x, center, width, amp))
    return construct_from_delta(spec, p)


def constant_profile(h0, phi0, p: PhysParams, x_lo=-10.0, x_hi=10.0, dx=0.1):
    c = float(p.equilibrium_velocity(h0))
    x = make_grid(x_lo, x_hi, dx)
    spec = ProfileSpec(h0=h0, c=c, kappa=kappa_for(h0, phi0, p), x=x,
                       delta=np.zeros_like(x))
    return construct_from_delta(spec, p)


def jump_height(h_right, phi_left, phi_right, p: PhysParams):
    """Left height h_L with [g'h^2/2 + phi h^3] = 0 across a convective jump."""
    if not h_right > 0:
        raise NonPositiveHeight("h_right must be positive")
    if phi_left < 0 or phi_right < 0:
        raise NegativeEnstrophy("enstrophies must be non-negative")
    g = p.g_perp
    rhs = phi_right * h_right ** 3 + 0.5 * g * h_right ** 2
    roots = np.roots([phi_left, 0.5 * g, 0.0, -rhs])
    real = [r.real for r in roots if abs(r.imag) <= 1e-9 * max(1.0, abs(r)) and r.real > 0]
    if not real:
        raise NoPositiveRoot(f"no positive root for phi_L={phi_left}, phi_R={phi_right}")
    h = max(real)
    # Newton polish against the cubic residual
    for _ in range(3):
        f = phi_left * h ** 3 + 0.5 * g * h * h - rhs
        df = 3.0 * phi_left * h * h + g * h
        h -= f / df
    return float(h)


def construct_single_jump(h0, c, phi_left, phi_right, x_jump, p: PhysParams,
                          domain=(None, None), dx=0.01, rtol=1e-10,
                          settle_tol=1e-12) -> WaveProfile:
    """Profile with phi = phi_left | phi_right and a single jump at x_jump.

    Right of the jump h = h0; left of it h solves
    h' = g_par (h - h0) / (g' h + 3 phi_left h^2), integrated backward from
    the jump height given by jump_height.
    """
    _check_equilibrium(h0, c, p)
    if not (phi_left > 0 and phi_right > 0):
        raise NegativeEnstrophy("endstate enstrophies must be positive")
    x_lo, x_hi = domain
    rate = p.g_parallel / (p.g_perp * h0 + 3.0 * phi_left * h0 ** 2)
    h_left = jump_height(h0, phi_left, phi_right, p)
    if x_lo is None:
        dev = abs(h_left - h0)
        x_lo = x_jump - (math.log(max(dev, settle_tol) / settle_tol) / rate + 5.0)
    if x_hi is None:
        x_hi = x_jump + 10.0
    has_jump = phi_left != phi_right
    x = make_grid(x_lo, x_hi, dx, (x_jump,) if has_jump else ())
    n_left = int(np.searchsorted(x, x_jump, side="left")) + 1 if has_jump else x.size
    h = np.full_like(x, h0)
    phi = np.full_like(x, phi_right)
    phi[:n_left] = phi_left

    if has_jump and h_left != h0:
        g, gp = p.g_perp, p.g_parallel

        def rhs(_, y):
            return gp * (y - h0) / (g * y + 3.0 * phi_left * y * y)

        def settled(_, y):
            return abs(y[0] - h0) - settle_tol
        settled.terminal = True

        sol = solve_ivp(rhs, (x_jump, x_lo), [h_left], method="RK45", rtol=rtol,
                        atol=settle_tol * 1e-2, dense_output=True, events=settled)
        if sol.status < 0:
            raise IntegrationFailure(sol.message)
        x_stop = sol.t[-1]
        xl = x[:n_left]
        active = xl >= x_stop
        h[:n_left][active] = sol.sol(xl[active])[0]
    return WaveProfile(x=x, h=h, phi=phi, c=c, h0=h0, params=p,
                       phi_minus=float(phi_left), phi_plus=float(phi_right),
                       kappa=kappa_for(h0, phi_left, p), decay_rates=(rate, None),
                       meta={"tail": 0.0, "h_left": h_left})


# ---------------------------------------------------------------------------
# mollification (used to compare discontinuous profiles with smooth ones)
# ---------------------------------------------------------------------------

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(64)


def _kernel(s):
    out = np.zeros_like(s)
    m = np.abs(s) < 1.0
    out[m] = np.exp(-1.0 / (1.0 - s[m] ** 2))
    return out


def mollify(profile: WaveProfile, eps, dx=None) -> WaveProfile:
    """Convolve delta with a bump kernel of half-width eps; rebuild phi.

    The kernel integral is split at every jump so each quadrature panel
    only sees one smooth piece.
    """
    if dx is None:
        dx = min(eps / 40.0, float(np.min(np.diff(profile.x)[np.diff(profile.x) > 0])))
    x = make_grid(profile.x[0], profile.x[-1], dx)
    jumps = np.asarray(profile.jumps)
    # breakpoints in kernel coordinate s (x - eps*s hits a jump)
    bps = np.concatenate([
        -np.ones((x.size, 1)),
        np.clip((x[:, None] - jumps[None, :]) / eps, -1.0, 1.0),
        np.ones((x.size, 1))], axis=1)
    bps.sort(axis=1)
    acc = np.zeros_like(x)
    norm = np.zeros_like(x)
    for k in range(bps.shape[1] - 1):
        a, b = bps[:, k:k + 1], bps[:, k + 1:k + 2]
        half = 0.5 * (b - a)
        s = a + half * (_GL_NODES[None, :] + 1.0)
        w = half * _GL_WEIGHTS[None, :] * _kernel(s)
        h, _ = profile.evaluate((x[:, None] - eps * s).ravel())
        acc += np.sum(w * (h.reshape(s.shape) - profile.h0), axis=1)
        norm += np.sum(w, axis=1)
    delta = acc / norm
    kappa = profile.kappa if profile.kappa is not None else profile.implied_kappa()
    spec = ProfileSpec(h0=profile.h0, c=profile.c, kappa=kappa, x=x, delta=delta)
    return construct_from_delta(spec, profile.params)


def phi_decay_diagnostic(snapshots) -> np.ndarray:
    """max |Phi| of every snapshot."""
    return np.array([float(np.max(np.abs(s.primitive[2]))) for s in snapshots])

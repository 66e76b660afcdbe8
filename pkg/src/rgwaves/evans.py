"""Evans function of convective waves and argument-principle eigenvalue counts.

The eigenvalue problem is integrated as the first-order system

    w1' = (c_f c^2 w1 + w2) / K,      w2' = (lam^2 h + 2 lam c_f c) w1,

with w1 = U, w2 = K U' - c_f c^2 U and K = h^2 (g' + 3 h phi). Both
components are continuous across profile jumps, so smooth and
discontinuous profiles are handled identically: integration simply
restarts on the next smooth piece.

Normalization. Z- is the solution behaving like exp(gamma1(-inf) x) r1 at
-inf and Z+ like exp(gamma2(+inf) x) r2 at +inf, with r = (1, K gamma - c_f c^2).
By Abel's identity the Wronskian W = det[Z-, Z+] satisfies W' = (c_f c^2/K) W,
and the reported value is

    D(lam) = W(x_ref) exp(-(gamma1- + gamma2+) x_ref) / (h0^2 G- (gamma2- - gamma1-)),

which does not depend on the matching point or on where the integration
starts. D = 1 identically for a constant profile, and D is real on the real
axis and satisfies D(conj lam) = conj D(lam).
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .errors import (
    ContourThroughZero,
    IntegrationFailure,
    LambdaZero,
    OverflowGuard,
    SplittingFailure,
)
from .profiles import WaveProfile, cumulative_integral
from .spectral import f1_endstate, mode_weights, spatial_eigenvalues

ODE_RTOL = 1e-10
ODE_ATOL = 1e-13
TAIL_TOL = 1e-12
_LOG_LIMIT = 600.0


def resolve_weights(profile: WaveProfile, weight):
    """(theta-, theta+) for a mode name, a pair, or None (unweighted)."""
    if weight is None:
        return 0.0, 0.0
    if isinstance(weight, str):
        p = profile.params
        return mode_weights(weight, f1_endstate(profile.h0, profile.phi_minus, p),
                            f1_endstate(profile.h0, profile.phi_plus, p))
    tm, tp = weight
    return float(tm), float(tp)


def default_match_point(profile: WaveProfile):
    """Largest jump if any, else the location of the largest height deviation."""
    states = profile.jump_states()
    if states:
        k = int(np.argmax([abs(l[0] - r[0]) for _, l, r in states]))
        return states[k][0]
    d = np.abs(profile.delta)
    if d.max() == 0.0:
        return float(np.clip(0.0, profile.x[0], profile.x[-1]))
    return float(profile.x[int(np.argmax(d))])


def _active_range(profile: WaveProfile, tol):
    """Smallest [a, b] outside which the profile equals its endstates to tol."""
    x, h, phi = profile.x, profile.h, profile.phi
    dev_l = np.maximum(np.abs(h - profile.h0), np.abs(phi - profile.phi_minus))
    dev_r = np.maximum(np.abs(h - profile.h0), np.abs(phi - profile.phi_plus))
    il = np.flatnonzero(dev_l > tol)
    ir = np.flatnonzero(dev_r > tol)
    a = x[max(il[0] - 1, 0)] if il.size else x[-1]
    b = x[min(ir[-1] + 1, x.size - 1)] if ir.size else x[0]
    return float(a), float(b)


@dataclass(frozen=True, eq=False)
class _Setup:
    profile: WaveProfile
    lam: np.ndarray
    g1m: np.ndarray
    g2m: np.ndarray
    g2p: np.ndarray
    x_start: float
    x_end: float
    x_match: float


def _endstate_K(profile, phi_end):
    h0 = profile.h0
    return h0 * h0 * (profile.params.g_perp + 3.0 * h0 * phi_end)


def _setup(profile: WaveProfile, lam, weight, match_point, tail_tol):
    if profile.is_periodic:
        raise SplittingFailure("Evans functions need an asymptotically constant profile")
    lam = np.atleast_1d(np.asarray(lam, dtype=complex))
    if np.any(lam == 0):
        raise LambdaZero("the Evans function is not evaluated at lambda = 0")
    p = profile.params
    tm, tp = resolve_weights(profile, weight)
    g1m, g2m = spatial_eigenvalues(lam, profile.phi_minus, profile.h0, p, continuation=True)
    g1p, g2p = spatial_eigenvalues(lam, profile.phi_plus, profile.h0, p, continuation=True)
    bad_m = ~((g1m.real > -tm) & (g2m.real < -tm))
    bad_p = ~((g1p.real > -tp) & (g2p.real < -tp))
    if np.any(bad_m | bad_p):
        k = int(np.argmax(bad_m | bad_p))
        side = "-inf" if bad_m[k] else "+inf"
        raise SplittingFailure(
            f"no consistent splitting at {side} for lambda = {lam[k]:.6g} "
            f"(weights {tm:.4g}, {tp:.4g})")
    xm = default_match_point(profile) if match_point is None else float(match_point)
    a, b = _active_range(profile, tail_tol)
    return _Setup(profile, lam, g1m, g2m, g2p, min(a, xm), max(b, xm), xm)


def _piece_coefficients(profile: WaveProfile, k):
    sh, sp = profile._splines[k]
    g = profile.params.g_perp

    def coef(x):
        h = float(sh(x))
        phi = float(sp(x))
        return h, h * h * (g + 3.0 * h * phi)
    return coef


def _integrate(profile: WaveProfile, lam, gamma, z0, x_from, x_to, rtol, atol, t_eval=None):
    """Integrate the rescaled system z' = (M - gamma) z through all pieces.

    Returns the end value, the accumulated log-scale per column and, when
    t_eval is given, (xs, zs, logs) samples for eigenfunction output.
    """
    p = profile.params
    cfc = p.c_f * profile.c
    cfc2 = cfc * profile.c
    n = lam.size
    jumps = np.asarray(profile.jumps)
    forward = x_to >= x_from
    inner = jumps[(jumps > min(x_from, x_to)) & (jumps < max(x_from, x_to))]
    stops = [x_from, *(inner if forward else inner[::-1]), x_to]
    z = np.asarray(z0, dtype=complex).reshape(2, n).copy()
    logs = np.zeros(n)
    lam2 = lam * lam
    twol = 2.0 * lam * cfc
    samples = []
    for a, b in zip(stops[:-1], stops[1:]):
        if a == b:
            continue
        mid = 0.5 * (a + b)
        k = int(np.searchsorted(jumps, mid, side="right"))
        coef = _piece_coefficients(profile, k)

        def rhs(x, y):
            h, K = coef(x)
            z1, z2 = y[:n], y[n:]
            return np.concatenate([(cfc2 * z1 + z2) / K - gamma * z1,
                                   (lam2 * h + twol) * z1 - gamma * z2])

        te = None
        if t_eval is not None:
            lo, hi = min(a, b), max(a, b)
            te = t_eval[(t_eval >= lo) & (t_eval <= hi)]
            te = np.sort(te) if forward else np.sort(te)[::-1]
            te = te if te.size else None
        sol = solve_ivp(rhs, (a, b), z.ravel(), method="DOP853", rtol=rtol, atol=atol,
                        t_eval=te)
        if sol.status < 0:
            raise IntegrationFailure(sol.message)
        if te is not None:
            samples.append((sol.t, sol.y.reshape(2, n, -1), logs.copy()))
        z = sol.y[:, -1].reshape(2, n).copy()
        if not np.all(np.isfinite(z)):
            raise OverflowGuard("Evans integration produced non-finite values")
        scale = np.max(np.abs(z), axis=0)
        scale = np.where(scale > 0, scale, 1.0)
        z /= scale
        logs += np.log(scale)
    return z, logs, samples


def _trace_integral(profile: WaveProfile, x_to, x_from=0.0):
    """int_{x_from}^{x_to} c_f c^2 / K(y) dy with K constant beyond the samples."""
    p = profile.params
    cfc2 = p.c_f * profile.c ** 2
    x = profile.x
    K = profile.h ** 2 * (p.g_perp + 3.0 * profile.h * profile.phi)
    F = cumulative_integral(x, cfc2 / K)
    tl = cfc2 / _endstate_K(profile, profile.phi_minus)
    tr = cfc2 / _endstate_K(profile, profile.phi_plus)

    def prim(y):
        if y <= x[0]:
            return tl * (y - x[0])
        if y >= x[-1]:
            return F[-1] + tr * (y - x[-1])
        return float(np.interp(y, x, F))
    return prim(x_to) - prim(x_from)


def evans(profile: WaveProfile, lam, weight=None, *, match_point=None, reference=0.0,
          rtol=ODE_RTOL, atol=ODE_ATOL, tail_tol=TAIL_TOL):
    """Evans function D(lam); lam may be a scalar or an array (integrated jointly).

    weight: None, a mode name ('standard', 'convective', 'extended_convective')
    or a pair (theta-, theta+). The weight only decides which spatial modes
    count as decaying; SplittingFailure is raised when that choice is not
    consistent at an endstate.
    """
    scalar = np.ndim(lam) == 0
    s = _setup(profile, lam, weight, match_point, tail_tol)
    p = profile.params
    h0 = profile.h0
    Km, Kp = _endstate_K(profile, profile.phi_minus), _endstate_K(profile, profile.phi_plus)
    cfc2 = p.c_f * profile.c ** 2
    r1 = np.stack([np.ones_like(s.lam), Km * s.g1m - cfc2])
    r2 = np.stack([np.ones_like(s.lam), Kp * s.g2p - cfc2])
    zm, lm, _ = _integrate(profile, s.lam, s.g1m, r1, s.x_start, s.x_match, rtol, atol)
    zp, lp, _ = _integrate(profile, s.lam, s.g2p, r2, s.x_end, s.x_match, rtol, atol)
    W = zm[0] * zp[1] - zm[1] * zp[0]
    # move from the matching point to the reference point (Abel's identity)
    tr = _trace_integral(profile, s.x_match, reference)
    expo = lm + lp - tr + (s.g1m + s.g2p) * (s.x_match - reference)
    if np.any(expo.real > _LOG_LIMIT):
        raise OverflowGuard("Evans normalization exponent too large; move the reference point")
    norm = Km * (s.g2m - s.g1m)
    D = W * np.exp(expo) / norm
    return complex(D[0]) if scalar else D


@dataclass(frozen=True, eq=False)
class ShootingSolution:
    """Solutions of the (w1, w2) system sampled on profile.x.

    minus is the solution decaying at -inf, plus the one decaying at +inf,
    each returned where it was integrated (x <= x_match resp. x >= x_match)
    and with the normalization of :func:`evans`.
    """

    lam: complex
    x_minus: np.ndarray
    w_minus: np.ndarray
    x_plus: np.ndarray
    w_plus: np.ndarray
    x_match: float


def _sampled(profile, lam, gamma, r, x_from, x_to, grid, rtol, atol):
    _, _, samples = _integrate(profile, lam, gamma, r, x_from, x_to, rtol, atol, t_eval=grid)
    xs, ws = [], []
    for t, y, logs in samples:
        xs.append(t)
        ws.append(y[:, 0, :] * np.exp(logs[0] + gamma[0] * t))
    if not xs:
        return np.empty(0), np.empty((2, 0), complex)
    x = np.concatenate(xs)
    w = np.concatenate(ws, axis=1)
    order = np.argsort(x, kind="stable")
    return x[order], w[:, order]


def shoot(profile: WaveProfile, lam, weight=None, *, match_point=None, grid=None,
          rtol=ODE_RTOL, atol=ODE_ATOL, tail_tol=TAIL_TOL) -> ShootingSolution:
    """Sample both decaying solutions at the points of grid (default profile.x)."""
    s = _setup(profile, lam, weight, match_point, tail_tol)
    p = profile.params
    cfc2 = p.c_f * profile.c ** 2
    Km, Kp = _endstate_K(profile, profile.phi_minus), _endstate_K(profile, profile.phi_plus)
    grid = np.unique(profile.x) if grid is None else np.asarray(grid, dtype=float)
    # integrate over the full grid so the samples cover the requested range
    x0 = min(s.x_start, grid[0])
    x1 = max(s.x_end, grid[-1])
    r1 = np.stack([np.ones(1, complex), Km * s.g1m - cfc2])
    r2 = np.stack([np.ones(1, complex), Kp * s.g2p - cfc2])
    xm, wm = _sampled(profile, s.lam, s.g1m, r1, x0, s.x_match, grid, rtol, atol)
    xp, wp = _sampled(profile, s.lam, s.g2p, r2, x1, s.x_match, grid, rtol, atol)
    return ShootingSolution(complex(s.lam[0]), xm, wm, xp, wp, s.x_match)


# ---------------------------------------------------------------------------
# winding numbers
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Contour:
    """Rectangle Re in [r0, R], Im in [-M, M]; indented around 0 when r0 == 0."""

    r0: float = 1e-3
    R: float = 5.0
    M: float = 10.0
    indent: float = 1e-2

    def __post_init__(self):
        if not (self.R > self.r0 and self.M > 0):
            raise ValueError("contour needs R > r0 and M > 0")

    def to_dict(self):
        return {"r0": self.r0, "R": self.R, "M": self.M, "indent": self.indent}

    def _segments(self, upper_only):
        r0, R, M = self.r0, self.R, self.M
        segs = []
        bottom = 0.0 if upper_only else -M
        segs.append(("line", complex(R, bottom), complex(R, M)))
        segs.append(("line", complex(R, M), complex(r0, M)))
        if r0 == 0.0:
            rho = self.indent
            segs.append(("line", complex(0, M), complex(0, rho)))
            segs.append(("arc", rho, (math.pi / 2, 0.0 if upper_only else -math.pi / 2)))
            if not upper_only:
                segs.append(("line", complex(0, -rho), complex(0, -M)))
        else:
            segs.append(("line", complex(r0, M), complex(r0, bottom)))
        if not upper_only:
            segs.append(("line", complex(r0, -M), complex(R, -M)))
        return segs

    def path(self, s, upper_only=False):
        """Points on the positively oriented boundary for s in [0, 1]."""
        segs = self._segments(upper_only)
        lengths = []
        for kind, a, b in segs:
            lengths.append(abs(b - a) if kind == "line" else a * abs(b[1] - b[0]))
        L = np.cumsum([0.0, *lengths])
        t = np.asarray(s, dtype=float) * L[-1]
        out = np.empty(t.shape, dtype=complex)
        idx = np.clip(np.searchsorted(L, t, side="right") - 1, 0, len(segs) - 1)
        for k, (kind, a, b) in enumerate(segs):
            m = idx == k
            u = (t[m] - L[k]) / lengths[k]
            if kind == "line":
                out[m] = a + (b - a) * u
            else:
                ang = b[0] + (b[1] - b[0]) * u
                out[m] = a * np.exp(1j * ang)
        return out


@dataclass(frozen=True, eq=False)
class WindingResult:
    count: int
    lam: np.ndarray
    values: np.ndarray
    min_modulus: float


def _evaluate_batch(args):
    profile, lam, kw = args
    return evans(profile, lam, **kw)


def _evaluate(profile, lam, kw, workers, chunk):
    pieces = [lam[i:i + chunk] for i in range(0, lam.size, chunk)]
    if workers > 1 and len(pieces) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(_evaluate_batch, [(profile, b, kw) for b in pieces]))
    else:
        parts = [evans(profile, b, **kw) for b in pieces]
    return np.concatenate(parts) if parts else np.empty(0, complex)


def _is_constant(profile: WaveProfile):
    return (not profile.jumps and np.all(profile.h == profile.h0)
            and np.all(profile.phi == profile.phi[0]))


def constant_state_count(profile: WaveProfile, contour: Contour, xi_max=100.0, n_xi=4001):
    """Largest number of Fourier-mode growth rates inside the contour.

    For a constant state the unstable spectrum is the continuous family of
    dispersion roots lam(xi); each wavenumber contributes at most two.
    """
    from .spectral import dispersion_roots
    xi = np.linspace(-xi_max, xi_max, n_xi)
    a, b = dispersion_roots(xi, profile.h0, profile.phi[0], profile.params)
    inside = 0
    for lam in (a, b):
        inside = inside + ((lam.real > contour.r0) & (lam.real < contour.R)
                           & (np.abs(lam.imag) < contour.M)).astype(int)
    return int(inside.max())


def winding_number(profile: WaveProfile, contour: Contour = Contour(), weight=None, *,
                   n_initial=64, max_points=4096, min_modulus=1e-8, symmetric=True,
                   workers=1, chunk=64, **evans_kw) -> WindingResult:
    """Argument-principle count of Evans zeros inside the contour.

    Samples are refined until consecutive phase increments stay below pi/2.
    With symmetric=True only the upper half is traversed and conjugate
    symmetry supplies the rest.
    """
    kw = dict(evans_kw, weight=weight)
    s = np.linspace(0.0, 1.0, n_initial + 1)
    lam = contour.path(s, upper_only=symmetric)
    D = _evaluate(profile, lam, kw, workers, chunk)
    while True:
        dphi = np.angle(D[1:] / D[:-1])
        bad = np.flatnonzero(np.abs(dphi) >= 0.5 * np.pi)
        if bad.size == 0:
            break
        if s.size + bad.size > max_points:
            raise ContourThroughZero(
                f"phase still unresolved with {s.size} samples; a zero may lie on the contour")
        s_new = 0.5 * (s[bad] + s[bad + 1])
        lam_new = contour.path(s_new, upper_only=symmetric)
        D_new = _evaluate(profile, lam_new, kw, workers, chunk)
        s = np.insert(s, bad + 1, s_new)
        lam = np.insert(lam, bad + 1, lam_new)
        D = np.insert(D, bad + 1, D_new)
    mod = np.abs(D)
    ref = np.median(mod)
    if mod.min() < min_modulus * max(ref, 1e-300):
        k = int(np.argmin(mod))
        raise ContourThroughZero(f"|D| = {mod[k]:.3e} at lambda = {lam[k]:.6g}")
    total = np.sum(np.angle(D[1:] / D[:-1]))
    if symmetric:
        count = total / np.pi
    else:
        total += np.angle(D[0] / D[-1])
        count = total / (2.0 * np.pi)
    return WindingResult(int(round(count)), lam, D, float(mod.min()))


def count_unstable(profile: WaveProfile, contour: Contour = Contour(), weight=None,
                   **kw) -> int:
    """Number of eigenvalues enclosed by the contour (right half-plane box).

    Constant profiles have no point spectrum; for them the count is that
    of the constant-state dispersion roots at the worst wavenumber.
    """
    if _is_constant(profile):
        return constant_state_count(profile, contour)
    return winding_number(profile, contour, weight, **kw).count

"""Linearization about convective waves, the reduced scalar eigenvalue ODE,
constant-state dispersion relations and the Froude/weight stability criteria.

The Evans-function machinery lives in :mod:`rgwaves.evans`.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from . import _fd
from .errors import (
    BranchCut,
    GridTooCoarse,
    LambdaZero,
    NotAsymptoticallyConstant,
    ReductionViolation,
)
from .model import PhysParams, froude_endstate
from .profiles import WaveProfile, cumulative_integral

MODES = ("standard", "convective", "extended_convective")


# ---------------------------------------------------------------------------
# linearized 4x4 system
# ---------------------------------------------------------------------------

def linearized_matrices(h, phi, c, p: PhysParams):
    """A0, A1, E and A = A1 - c A0 at states (h, phi); arrays of shape (n, 4, 4)."""
    h = np.atleast_1d(np.asarray(h, dtype=float))
    phi = np.atleast_1d(np.asarray(phi, dtype=float))
    n = h.size
    g, gp, cf, ct = p.g_perp, p.g_parallel, p.c_f, p.c_t
    h2, h3 = h * h, h ** 3
    A0 = np.zeros((n, 4, 4))
    A0[:, 0, 0] = 1.0
    A0[:, 1, 0] = c
    A0[:, 1, 1] = h
    A0[:, 2, 0] = 0.5 * c * c + 1.5 * phi * h2 + g * h
    A0[:, 2, 1] = c * h
    A0[:, 2, 2] = 0.5 * h3
    A0[:, 2, 3] = 0.5 * h3
    A0[:, 3, 0] = phi
    A0[:, 3, 3] = h

    A1 = np.zeros((n, 4, 4))
    A1[:, 0, 0] = c
    A1[:, 0, 1] = h
    A1[:, 1, 0] = c * c + 3.0 * phi * h2 + g * h
    A1[:, 1, 1] = 2.0 * c * h
    A1[:, 1, 2] = h3
    A1[:, 1, 3] = h3
    A1[:, 2, 0] = 0.5 * c * (c * c + 9.0 * phi * h2 + 4.0 * g * h)
    A1[:, 2, 1] = 0.5 * h * (3.0 * c * c + 3.0 * phi * h2 + 2.0 * g * h)
    A1[:, 2, 2] = 1.5 * c * h3
    A1[:, 2, 3] = 1.5 * c * h3
    A1[:, 3, 0] = c * phi
    A1[:, 3, 1] = h * phi
    A1[:, 3, 3] = c * h

    E = np.zeros((n, 4, 4))
    E[:, 1, 0] = gp
    E[:, 1, 1] = -2.0 * cf * c
    E[:, 1, 2] = -c * c * (ct - cf) / phi
    E[:, 2, 0] = c * gp
    E[:, 2, 1] = gp * h - 3.0 * cf * c * c
    return A0, A1, E, A1 - c * A0


def left_kernel(h, phi, c, p: PhysParams):
    """Left null vectors l1, l2 of A, shape (n, 4) each."""
    h = np.atleast_1d(np.asarray(h, dtype=float))
    phi = np.atleast_1d(np.asarray(phi, dtype=float))
    zero, one = np.zeros_like(h), np.ones_like(h)
    l1 = np.stack([-phi, zero, zero, one], axis=1)
    l2 = np.stack([c * c - 3.0 * phi * h * h - 2.0 * p.g_perp * h,
                   -2.0 * c * one, 2.0 * one, zero], axis=1)
    return l1, l2


@dataclass(frozen=True, eq=False)
class LinearizedSystem:
    x: np.ndarray
    A0: np.ndarray
    A1: np.ndarray
    E: np.ndarray
    A: np.ndarray
    l1: np.ndarray
    l2: np.ndarray

    @classmethod
    def from_profile(cls, profile: WaveProfile, p: PhysParams):
        A0, A1, E, A = linearized_matrices(profile.h, profile.phi, profile.c, p)
        l1, l2 = left_kernel(profile.h, profile.phi, profile.c, p)
        return cls(profile.x, A0, A1, E, A, l1, l2)


def profile_relation_derivative(profile: WaveProfile, p: PhysParams):
    """c_f c^2 - g_par h + (h^3 phi + g' h^2/2)' at every sample.

    This is the numerator that forces Phi = 0 in the reduced problem.
    """
    out = np.empty_like(profile.h)
    pressure = profile.h ** 3 * profile.phi + 0.5 * p.g_perp * profile.h ** 2
    for sl in profile.pieces:
        out[sl] = _fd.derivative(profile.x[sl], pressure[sl])
    return p.c_f * profile.c ** 2 - p.g_parallel * profile.h + out


@dataclass(frozen=True)
class ReductionDiagnostics:
    kernel_residual: float
    rank_gap: float
    relation_residual: float
    worst_location: float


def check_reduction(profile: WaveProfile, p: PhysParams, kernel_tol=1e-10,
                    relation_tol=1e-8, rank_tol=1e-10) -> ReductionDiagnostics:
    """Verify l1 A = l2 A = 0, rank A = 2 and the Phi-forcing numerator vanishes."""
    sys_ = LinearizedSystem.from_profile(profile, p)
    scale = np.max(np.abs(sys_.A), axis=(1, 2))
    r1 = np.max(np.abs(np.einsum("ni,nij->nj", sys_.l1, sys_.A)), axis=1)
    r2 = np.max(np.abs(np.einsum("ni,nij->nj", sys_.l2, sys_.A)), axis=1)
    kres = np.maximum(r1, r2) / (scale * np.max(np.abs(sys_.l2), axis=1))
    i = int(np.argmax(kres))
    if kres[i] > kernel_tol:
        raise ReductionViolation(f"left kernel residual {kres[i]:.3e}", float(profile.x[i]))
    sv = np.linalg.svd(sys_.A, compute_uv=False)
    ratio3 = sv[:, 2] / sv[:, 0]
    ratio2 = sv[:, 1] / sv[:, 0]
    if np.any(ratio3 > rank_tol) or np.any(ratio2 <= rank_tol):
        j = int(np.argmax(ratio3))
        raise ReductionViolation("A does not have rank 2", float(profile.x[j]))
    rel = np.abs(profile_relation_derivative(profile, p))
    k = int(np.argmax(rel))
    if rel[k] > relation_tol:
        raise ReductionViolation(
            f"profile relation residual {rel[k]:.3e} would force Phi != 0",
            float(profile.x[k]))
    return ReductionDiagnostics(float(kres[i]), float(ratio2.min()), float(rel[k]),
                                float(profile.x[k]))


# ---------------------------------------------------------------------------
# reduced scalar eigenvalue ODE  U'' + f1 U' + (f2 l^2 + f3 l + f4) U = 0
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ReducedCoefficients:
    x: np.ndarray
    f1: np.ndarray
    f2: np.ndarray
    f3: np.ndarray
    f4: np.ndarray
    f1_minus: float
    f1_plus: float
    h_x: np.ndarray = field(repr=False, default=None)
    phi_x: np.ndarray = field(repr=False, default=None)
    f1_x: np.ndarray = field(repr=False, default=None)


def f1_endstate(h0, phi0, p: PhysParams):
    return -p.g_parallel / (h0 * (p.g_perp + 3.0 * h0 * phi0))


def _validated_derivative(x, f, order, tol):
    """Finite-difference derivative, checked against the same stencil on every
    other sample; a large disagreement means the features are under-resolved."""
    d4 = _fd.derivative(x, f, order)
    if tol is not None and x.size >= 24:
        dc = _fd.derivative(x[::2], f[::2], order)
        scale = max(np.max(np.abs(d4)), 1.0)
        gap = np.max(np.abs(d4[::2][2:-2] - dc[2:-2]))
        if gap > tol * scale:
            raise GridTooCoarse(
                f"order-{order} derivative changes by {gap:.3e} under 2x coarsening; "
                "refine the grid")
    return d4


def reduced_coefficients(profile: WaveProfile, p: PhysParams,
                         stencil_tol: Optional[float] = 1e-2) -> ReducedCoefficients:
    """f1..f4 along the samples, derivatives taken piece by piece."""
    x, h, phi = profile.x, profile.h, profile.phi
    g, gp = p.g_perp, p.g_parallel
    hx = np.empty_like(h)
    hxx = np.empty_like(h)
    phix = np.empty_like(h)
    mom_xx = np.empty_like(h)
    for sl in profile.pieces:
        xs = x[sl]
        hx[sl] = _validated_derivative(xs, h[sl], 1, stencil_tol)
        hxx[sl] = _validated_derivative(xs, h[sl], 2, stencil_tol)
        phix[sl] = _validated_derivative(xs, phi[sl], 1, stencil_tol)
        mom_xx[sl] = _validated_derivative(xs, phi[sl] * h[sl] ** 3, 2, stencil_tol)
    G = g + 3.0 * h * phi
    f1 = (4.0 * phix * h * h + 12.0 * hx * phi * h - gp + 3.0 * g * hx) / (h * G)
    f2 = -1.0 / (h * G)
    f3 = -2.0 * p.c_f * profile.c / (h * h * G)
    f4 = (mom_xx + g * hxx * h + g * hx * hx - gp * hx) / (h * h * G)
    f1x = np.empty_like(h)
    for sl in profile.pieces:
        f1x[sl] = _fd.derivative(x[sl], f1[sl])
    if profile.is_periodic:
        f1m = f1p = float("nan")
    else:
        f1m = f1_endstate(profile.h0, profile.phi_minus, p)
        f1p = f1_endstate(profile.h0, profile.phi_plus, p)
    return ReducedCoefficients(x, f1, f2, f3, f4, f1m, f1p, hx, phix, f1x)


# ---------------------------------------------------------------------------
# constant states
# ---------------------------------------------------------------------------

def _endstate_speed(h0, p: PhysParams):
    return float(np.sqrt(p.g_parallel * h0 / p.c_f))


def dispersion_roots(xi, h0, phi0, p: PhysParams):
    """Both roots of l^2 + 2 c_f c l / h0 + i xi g_par + xi^2 h0 (g' + 3 h0 phi0) = 0.

    Returns (lam_a, lam_b) with lam_a the branch through 0 at xi = 0. The
    small root is taken from the product of roots to avoid cancellation.
    """
    xi = np.asarray(xi, dtype=float)
    c = _endstate_speed(h0, p)
    half_b = p.c_f * c / h0
    G = p.g_perp + 3.0 * h0 * phi0
    const = 1j * xi * p.g_parallel + xi * xi * h0 * G
    s = np.sqrt(half_b * half_b - const + 0j)
    big = -half_b - s          # Re s >= 0 so no cancellation here
    small = const / big
    return small, big


def max_growth_rate(h0, phi0, p: PhysParams, xi):
    a, b = dispersion_roots(xi, h0, phi0, p)
    return np.maximum(a.real, b.real)


def hydro_stable(h0, phi0, p: PhysParams) -> bool:
    """Strict constant-state stability c^2 < 4 h0 (g' + 3 h0 phi0)."""
    c2 = p.g_parallel * h0 / p.c_f
    return bool(c2 < 4.0 * h0 * (p.g_perp + 3.0 * h0 * phi0))


def spatial_eigenvalues(lam, phi0, h0, p: PhysParams, continuation=False, cut_tol=1e-13):
    """(gamma_1, gamma_2) = [g_par +- sqrt(rad)] / (2 h0 G) at an endstate.

    rad = g_par^2 + 4 G (2 c_f c lam + h0 lam^2). Principal square root, so
    Re gamma_1 >= Re gamma_2. On the cut (rad real negative) BranchCut is
    raised unless continuation is requested, in which case the value from
    the upper side of the cut is returned.
    """
    lam = np.asarray(lam, dtype=complex)
    c = _endstate_speed(h0, p)
    G = p.g_perp + 3.0 * h0 * phi0
    rad = p.g_parallel ** 2 + 4.0 * G * (2.0 * p.c_f * c * lam + h0 * lam * lam)
    on_cut = (rad.real < 0) & (np.abs(rad.imag) <= cut_tol * np.abs(rad))
    if np.any(on_cut):
        if not continuation:
            raise BranchCut("lambda lies on the branch cut of the spatial eigenvalues")
        rad = np.where(on_cut, rad.real + 0j, rad)
        root = np.where(on_cut, 1j * np.sqrt(-rad.real), np.sqrt(rad))
    else:
        root = np.sqrt(rad)
    den = 2.0 * h0 * G
    g1 = (p.g_parallel + root) / den
    g2 = (p.g_parallel - root) / den
    if g1.ndim == 0:
        return complex(g1), complex(g2)
    return g1, g2


# ---------------------------------------------------------------------------
# verdicts
# ---------------------------------------------------------------------------

@dataclass
class StabilityReport:
    mode: str
    cf_ct_ok: bool
    froude_minus: float
    froude_plus: float
    standard_stable: bool
    standard_strongly_stable: Optional[bool]
    convective_stable: bool
    convective_strongly_stable: Optional[bool]
    extended_convective_strongly_stable: Optional[bool]
    essential_range: tuple
    theta_minus: float
    theta_plus: float
    f1_minus: float
    f1_plus: float
    discontinuous: bool
    evans_winding: Optional[int] = None
    contour: Optional[dict] = None

    @property
    def verdict(self):
        """'strongly_stable', 'stable', 'unstable' or 'undetermined' for the mode."""
        if self.mode == "standard":
            stable, strong = self.standard_stable, self.standard_strongly_stable
        elif self.mode == "convective":
            stable, strong = self.convective_stable, self.convective_strongly_stable
        else:
            strong = self.extended_convective_strongly_stable
            stable = self.cf_ct_ok
        if strong:
            return "strongly_stable"
        return "stable" if stable else "unstable"

    def to_dict(self):
        d = asdict(self)
        d["essential_range"] = list(self.essential_range)
        d["verdict"] = self.verdict
        return d

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)


def essential_range(profile: WaveProfile, p: PhysParams):
    """Closure endpoints of -2 (c_f - c_t) c^3 / (h^3 phi) over the profile."""
    vals = -2.0 * (p.c_f - p.c_t) * profile.c ** 3 / (profile.h ** 3 * profile.phi)
    ends = []
    if not profile.is_periodic:
        for phi_end in (profile.phi_minus, profile.phi_plus):
            ends.append(-2.0 * (p.c_f - p.c_t) * profile.c ** 3 / (profile.h0 ** 3 * phi_end))
    allv = np.concatenate([vals, ends])
    return float(allv.min()), float(allv.max())


def mode_weights(mode, f1_minus, f1_plus):
    if mode == "standard":
        return 0.0, 0.0
    if mode == "convective":
        return 0.5 * f1_minus, 0.0
    if mode == "extended_convective":
        return 0.5 * f1_minus, 0.5 * f1_plus
    raise ValueError(f"unknown mode {mode!r}; expected one of {MODES}")


def stability_verdict(profile: WaveProfile, p: PhysParams, mode="standard") -> StabilityReport:
    """Evaluate the Froude and friction criteria for every weighting.

    Strong flags are withheld (None) for discontinuous profiles, for which
    only plain spectral stability is characterized.
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}; expected one of {MODES}")
    if profile.is_periodic:
        raise NotAsymptoticallyConstant("verdicts are only defined for asymptotically constant waves")
    if not profile.c > 0:
        raise ValueError("wave speed must be positive")
    ok = p.c_f >= p.c_t
    Fm = float(froude_endstate(profile.h0, profile.phi_minus, p))
    Fp = float(froude_endstate(profile.h0, profile.phi_plus, p))
    disc = len(profile.jumps) > 0
    f1m = f1_endstate(profile.h0, profile.phi_minus, p)
    f1p = f1_endstate(profile.h0, profile.phi_plus, p)
    th_m, th_p = mode_weights(mode, f1m, f1p)

    def strong(flag):
        return None if disc else bool(flag)

    return StabilityReport(
        mode=mode, cf_ct_ok=bool(ok), froude_minus=Fm, froude_plus=Fp,
        standard_stable=bool(ok and Fp <= 2 and Fm <= 2),
        standard_strongly_stable=strong(ok and Fp < 2 and Fm < 2),
        convective_stable=bool(ok and Fp <= 2),
        convective_strongly_stable=strong(ok and Fp < 2),
        extended_convective_strongly_stable=strong(ok),
        essential_range=essential_range(profile, p),
        theta_minus=th_m, theta_plus=th_p, f1_minus=f1m, f1_plus=f1p,
        discontinuous=disc)


# ---------------------------------------------------------------------------
# eigenfunctions and zero modes
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class EigenFunction:
    lam: complex
    x: np.ndarray
    h: np.ndarray
    U: np.ndarray
    Phi: np.ndarray
    phi: np.ndarray
    w1: Optional[np.ndarray] = None
    w2: Optional[np.ndarray] = None

    def as_array(self):
        return np.array([self.h, self.U, self.Phi, self.phi])


def reconstruct_eigenfunction(profile: WaveProfile, lam, U, w2=None) -> EigenFunction:
    """Full (h, U, Phi, phi) from U sampled on profile.x.

    h = -(h_bar U)'/lam, phi = -phi_bar' U / lam, Phi = 0.
    """
    lam = complex(lam)
    if lam == 0:
        raise LambdaZero("eigenfunction reconstruction needs lambda != 0")
    U = np.asarray(U, dtype=complex)
    x = profile.x
    hU_x = np.empty_like(U)
    phix = np.empty(x.shape)
    for sl in profile.pieces:
        hU_x[sl] = _fd.derivative(x[sl], profile.h[sl] * U[sl])
        phix[sl] = _fd.derivative(x[sl], profile.phi[sl])
    h = -hU_x / lam
    phi = -phix * U / lam
    return EigenFunction(lam, x, h, U, np.zeros_like(U), phi, U if w2 is not None else None, w2)


def linearized_residual(profile: WaveProfile, p: PhysParams, ef: EigenFunction):
    """lam A0 W + (A W)' - E W for W = (h, U, Phi, phi), shape (4, n)."""
    A0, _, E, A = linearized_matrices(profile.h, profile.phi, profile.c, p)
    W = ef.as_array().T  # (n, 4)
    AW = np.einsum("nij,nj->ni", A, W)
    dAW = np.empty_like(AW)
    for sl in profile.pieces:
        for k in range(4):
            dAW[sl, k] = _fd.derivative(profile.x[sl], AW[sl, k])
    res = ef.lam * np.einsum("nij,nj->ni", A0, W) + dAW - np.einsum("nij,nj->ni", E, W)
    return res.T


@dataclass(frozen=True, eq=False)
class KernelMode:
    x: np.ndarray
    h: np.ndarray
    phi: np.ndarray

    def as_array(self):
        z = np.zeros_like(self.h)
        return np.array([self.h, z, z, self.phi])


def kernel_modes(profile: WaveProfile, p: PhysParams, seed_h, const=0.0) -> KernelMode:
    """Zero-eigenvalue mode (h, 0, 0, phi) generated by a height perturbation.

    phi = [const + g_par int h - h_bar (g' + 3 h_bar phi_bar) h] / h_bar^3.
    seed_h is an array on profile.x or a callable.
    """
    x = profile.x
    h = np.asarray(seed_h(x) if callable(seed_h) else seed_h, dtype=float)
    integral = cumulative_integral(x, h)
    hb, pb = profile.h, profile.phi
    phi = (const + p.g_parallel * integral - hb * (p.g_perp + 3.0 * hb * pb) * h) / hb ** 3
    return KernelMode(x, h, phi)


def kernel_mode_residual(profile: WaveProfile, p: PhysParams, mode: KernelMode):
    """(A W)' - E W for the zero mode (the lam A0 W term vanishes)."""
    _, _, E, A = linearized_matrices(profile.h, profile.phi, profile.c, p)
    W = mode.as_array().T
    AW = np.einsum("nij,nj->ni", A, W)
    dAW = np.empty_like(AW)
    for sl in profile.pieces:
        for k in range(4):
            dAW[sl, k] = _fd.derivative(profile.x[sl], AW[sl, k])
    return (dAW - np.einsum("nij,nj->ni", E, W)).T


# ---------------------------------------------------------------------------
# Liouville transform
# ---------------------------------------------------------------------------

def liouville_transform(coeffs: ReducedCoefficients, U, pieces=None):
    """w = exp(1/2 int_0^x f1) U on the sample grid."""
    x = coeffs.x
    F = cumulative_integral(x, coeffs.f1)
    F = F - np.interp(0.0, x, F) if x[0] <= 0.0 <= x[-1] else F
    return np.exp(0.5 * F) * np.asarray(U)


def weq_residual(coeffs: ReducedCoefficients, lam, w, pieces):
    """w'' + (f2 l^2 + f3 l + f4 - f1^2/4 - f1'/2) w on each smooth piece."""
    res = np.empty_like(np.asarray(w, dtype=complex))
    x = coeffs.x
    for sl in pieces:
        res[sl] = _fd.derivative2(x[sl], w[sl])
    pot = (coeffs.f2 * lam * lam + coeffs.f3 * lam + coeffs.f4
           - 0.25 * coeffs.f1 ** 2 - 0.5 * coeffs.f1_x)
    return res + pot * w


def ueq_residual(coeffs: ReducedCoefficients, lam, U, pieces):
    x = coeffs.x
    res = np.empty_like(np.asarray(U, dtype=complex))
    for sl in pieces:
        u1 = _fd.derivative(x[sl], U[sl])
        u2 = _fd.derivative2(x[sl], U[sl])
        res[sl] = (u2 + coeffs.f1[sl] * u1
                   + (coeffs.f2[sl] * lam * lam + coeffs.f3[sl] * lam + coeffs.f4[sl]) * U[sl])
    return res
